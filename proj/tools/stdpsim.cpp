// stdpsim: batch runner for plasticity experiments.
//
//   stdpsim run <config.json | manifest.json | scenario> [--seed N] [--out DIR] [--horizon T]
//   stdpsim validate [--quick] [config.json] [--seed N] [--out DIR]
//   stdpsim scenarios [--show NAME]
//
// Exit codes: 0 pass, 1 validation failure, 2 config error.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "stdpsim/experiment.hpp"
#include "stdpsim/validation.hpp"

namespace {

constexpr int kPass = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;

stdpsim::ExperimentConfig load(const std::string& what) {
  if (std::filesystem::exists(what)) return stdpsim::load_experiment(what);
  for (const auto& s : stdpsim::bundled_scenarios()) {
    if (s.name == what) return stdpsim::bundled_scenario(what);
  }
  throw stdpsim::ConfigError(what + ": no such file or bundled scenario");
}

int cmd_run(const std::string& what, const stdpsim::Overrides& overrides, unsigned threads) {
  stdpsim::ExperimentConfig config;
  try {
    config = load(what);
    stdpsim::apply_overrides(config, overrides);
  } catch (const stdpsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  const auto outcome = stdpsim::run_experiment(config, threads);
  for (const auto& f : outcome.files) std::cout << "wrote " << f.string() << '\n';
  for (const auto& f : outcome.failures) std::cerr << "failed: " << f << '\n';
  return outcome.status == 0 ? kPass : kFailure;
}

int cmd_validate(const std::string& what, bool quick, const stdpsim::Overrides& overrides, unsigned threads) {
  stdpsim::ValidationOptions options;
  options.quick = quick;
  options.threads = threads;
  if (!what.empty()) {
    try {
      auto config = load(what);
      stdpsim::apply_overrides(config, overrides);
      options.seed = config.seeds.front();
      std::cout << "config " << what << ": " << config.runs.size() << " run(s) valid\n";
    } catch (const stdpsim::ConfigError& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return kConfigError;
    }
  } else if (overrides.seed) {
    options.seed = *overrides.seed;
  }
  const auto results = stdpsim::run_acceptance(options, [](const stdpsim::CriterionResult& r) {
    std::cout << stdpsim::format_result_line(r) << std::endl;
  });
  bool all = true;
  for (const auto& r : results) all = all && r.passed;
  std::cout << (all ? "ALL CRITERIA PASSED" : "SOME CRITERIA FAILED") << '\n';
  if (overrides.output) {
    std::filesystem::create_directories(*overrides.output);
    const auto path = std::filesystem::path(*overrides.output) / "validation.json";
    std::ofstream out(path);
    stdpsim::write_results_json(out, results, options);
    std::cout << "wrote " << path.string() << '\n';
  }
  return all ? kPass : kFailure;
}

int cmd_scenarios(const std::string& show) {
  if (show.empty()) {
    for (const auto& s : stdpsim::bundled_scenarios()) std::cout << s.name << "  " << s.description << '\n';
    return kPass;
  }
  try {
    std::cout << stdpsim::to_json(stdpsim::bundled_scenario(show)).dump(2) << '\n';
  } catch (const stdpsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  return kPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-driven simulation of plasticity kernels, weights and neurons"};
  app.require_subcommand(1);
  app.set_version_flag("--version", stdpsim::build_version());

  std::string target;
  std::string show;
  bool quick = false;
  unsigned threads = 0;
  std::uint64_t seed = 0;
  std::string out;
  double horizon = 0.0;

  auto* run = app.add_subcommand("run", "run a config file, a manifest or a bundled scenario");
  run->add_option("config", target, "config file, manifest or scenario name")->required();
  auto* validate = app.add_subcommand("validate", "check a config and run the acceptance suite");
  validate->add_option("config", target, "config file or scenario name");
  validate->add_flag("--quick", quick, "reduced sample counts");
  auto* scenarios = app.add_subcommand("scenarios", "list the bundled scenarios");
  scenarios->add_option("--show", show, "print the config of one scenario");

  struct Shared {
    CLI::Option* seed;
    CLI::Option* out;
    CLI::Option* horizon;
  };
  auto add_shared = [&](CLI::App* sub) {
    sub->add_option("--threads", threads, "worker threads (0: all cores)");
    return Shared{sub->add_option("--seed", seed, "replace the seed list by one seed"),
                  sub->add_option("--out", out, "output directory"),
                  sub->add_option("--horizon", horizon, "override every run's horizon")};
  };
  const Shared run_opts = add_shared(run);
  const Shared validate_opts = add_shared(validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return e.get_exit_code() == 0 ? code : kConfigError;
  }

  const Shared& opts = run->parsed() ? run_opts : validate_opts;
  stdpsim::Overrides overrides;
  if (opts.seed->count()) overrides.seed = seed;
  if (opts.out->count()) overrides.output = out;
  if (opts.horizon->count()) overrides.horizon = horizon;

  try {
    if (run->parsed()) return cmd_run(target, overrides, threads);
    if (validate->parsed()) return cmd_validate(target, quick, overrides, threads);
    return cmd_scenarios(show);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
