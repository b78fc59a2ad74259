#ifndef STDPSIM_EXPERIMENT_HPP
#define STDPSIM_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "stdpsim/discrete_lab.hpp"
#include "stdpsim/simulator.hpp"

namespace stdpsim {

/// Malformed or invalid experiment document. The message starts with the
/// offending field path ("runs[0].model.alpha: ...") or with "line L, column C"
/// for syntax errors.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Engine { kContinuous, kContinuousUnfiltered, kDiscrete, kDiscreteFast };

const char* engine_name(Engine e);

/// A builtin kernel with its chosen representation, or a hand-written system.
struct KernelConfig {
  std::variant<KernelSpec, ClassMSpec> source;
  NearestForm nearest = NearestForm::kResetTraces;

  ClassMSpec resolve() const;
};

struct ContinuousModel {
  KernelConfig kernel;
  SimConfig sim;  // sim.kernel is kernel.resolve(); sim.seed is set per run
};

struct FastModel {
  DiscreteParams params;
  double horizon = 1e4;
  std::vector<double> u_grid{0.0, 0.25, 0.5, 0.75};
  int batches = 100;
  long x0 = 0;
  long c0 = 0;
};

struct RunSpec {
  std::string name;
  Engine engine = Engine::kContinuous;
  ContinuousModel continuous;
  DiscreteFullConfig discrete;
  FastModel fast;
};

enum class TraceFormat { kCsv, kJsonl };

struct ReportOptions {
  bool summary = true;
  TraceFormat trace_format = TraceFormat::kCsv;
};

struct ExperimentConfig {
  std::string scenario;
  std::vector<RunSpec> runs;
  std::vector<std::uint64_t> seeds;
  std::string output = "out";
  ReportOptions report;
};

/// Parses and validates a document. Accepts the single-run form
/// {scenario, engine, model, ...}, the multi-run form {scenario, runs: [...]},
/// and a manifest written by run_experiment. Unknown keys are rejected.
ExperimentConfig parse_experiment(const std::string& text);
ExperimentConfig parse_experiment(const nlohmann::json& doc);
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// Normalized multi-run form with every field spelled out. Reals are written
/// in shortest round-trip form and infinities as "inf", so parsing the output
/// gives back an identical configuration.
nlohmann::json to_json(const ExperimentConfig& config);

/// Command-line overrides, applied before validation of the result.
struct Overrides {
  std::optional<std::uint64_t> seed;  // replaces the seed list
  std::optional<std::string> output;
  std::optional<double> horizon;      // every run
};

void apply_overrides(ExperimentConfig& config, const Overrides& overrides);

/// Checks every run; throws ConfigError naming the run.
void validate(const ExperimentConfig& config);

struct ExperimentOutcome {
  /// 0: all runs finished; 1: an invariant was violated in some run.
  int status = 0;
  std::vector<std::filesystem::path> files;
  std::vector<std::string> failures;
};

/// Runs every (run, seed) pair on up to `threads` threads. Writes one trace
/// per pair as <output>/<run>_seed<seed>.<csv|jsonl>, then summary.json when
/// requested and manifest.json. Nothing is written if validation fails.
ExperimentOutcome run_experiment(const ExperimentConfig& config, unsigned threads = 0);

/// Build identifier recorded in manifests.
std::string build_version();

struct ScenarioInfo {
  std::string name;
  std::string description;
};

std::vector<ScenarioInfo> bundled_scenarios();
/// Throws ConfigError for an unknown name.
ExperimentConfig bundled_scenario(const std::string& name);

}  // namespace stdpsim

#endif  // STDPSIM_EXPERIMENT_HPP
