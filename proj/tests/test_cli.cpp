#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "stdpsim_test_cli";

struct Result {
  int status = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result cli(const std::string& args) {
  fs::create_directories(kWork);
  const auto out = kWork / "stdout.txt";
  const auto err = kWork / "stderr.txt";
  const std::string cmd = std::string("\"") + STDPSIM_CLI + "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                          err.string() + "\"";
  const int raw = std::system(cmd.c_str());
  Result r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

fs::path write(const std::string& name, const std::string& text) {
  fs::create_directories(kWork);
  const auto p = kWork / name;
  std::ofstream(p) << text;
  return p;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("scenarios lists the bundled scenarios") {
  const auto r = cli("scenarios");
  CHECK(r.status == 0);
  CHECK(r.out.find("pairbased-s1") != std::string::npos);
  CHECK(r.out.find("calcium-s2") != std::string::npos);
  const auto shown = cli("scenarios --show calcium-s2");
  CHECK(shown.status == 0);
  CHECK(shown.out.find("\"engine\": \"discrete\"") != std::string::npos);
  CHECK(cli("scenarios --show nothing").status == 2);
}

TEST_CASE("usage and config errors exit with 2") {
  CHECK(cli("").status == 2);
  CHECK(cli("frobnicate").status == 2);
  CHECK(cli("run").status == 2);
  const auto missing = cli("run " + q(kWork / "does-not-exist.json"));
  CHECK(missing.status == 2);
  CHECK(missing.err.find("no such file") != std::string::npos);
  const auto broken = write("broken.json", "{\n  \"scenario\": \"b\",\n  \"seeds\": [1]\n  \"engine\": 1\n}\n");
  const auto r = cli("run " + q(broken));
  CHECK(r.status == 2);
  CHECK(r.err.find("line 4") != std::string::npos);
}

TEST_CASE("an empty seed list writes no files") {
  const auto out = kWork / "empty_out";
  fs::remove_all(out);
  const auto cfg = write("empty.json", R"({"scenario": "e", "engine": "discrete", "seeds": [], "model": {"params": {}}})");
  const auto r = cli("run " + q(cfg) + " --out " + q(out));
  CHECK(r.status == 2);
  CHECK(r.err.find("seed list is empty") != std::string::npos);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("a corrupted spec fails validation with the positivity diagnostic") {
  const auto cfg = write("corrupt.json", R"({
    "scenario": "corrupt", "engine": "continuous", "seeds": [1],
    "model": {"kernel": {"type": "class-m", "decay": [1], "jump_pre": [{"add": -0.5}], "jump_post": [{"add": 1}],
                         "potentiation": {"at_post": [{"type": "trace", "index": 0}]}}}
  })");
  const auto r = cli("validate --quick " + q(cfg));
  CHECK(r.status == 2);
  CHECK(r.err.find("positive orthant") != std::string::npos);
}

TEST_CASE("run writes traces and a manifest that reproduces them") {
  const auto a = kWork / "s1_a";
  const auto b = kWork / "s1_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const auto r = cli("run pairbased-s1 --horizon 8 --seed 5 --out " + q(a));
  REQUIRE(r.status == 0);
  int traces = 0;
  for (const auto& e : fs::directory_iterator(a)) traces += e.path().extension() == ".csv";
  CHECK(traces == 6);
  REQUIRE(cli("run " + q(a / "manifest.json") + " --out " + q(b)).status == 0);
  for (const auto& e : fs::directory_iterator(a)) {
    if (e.path().extension() == ".csv") CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
  }
  CHECK(slurp(a / "manifest.json").find("\"seeds\": [\n    5\n  ]") != std::string::npos);
}

TEST_CASE("an invariant violation exits with 1") {
  const auto out = kWork / "ceiling";
  const auto cfg = write("ceiling.json", R"({
    "scenario": "ceiling", "engine": "continuous", "seeds": [1],
    "model": {"kernel": {"type": "calcium"}, "rule": {"type": "gated-linear"}, "horizon": 50, "max_events": 2}
  })");
  const auto r = cli("run " + q(cfg) + " --out " + q(out));
  CHECK(r.status == 1);
  CHECK(r.err.find("event ceiling") != std::string::npos);
}

TEST_CASE("validate runs the acceptance suite") {
  const auto out = kWork / "validation";
  const auto r = cli("validate --quick calcium-s2 --out " + q(out));
  CHECK(r.status == 0);
  CHECK(r.out.find("ALL CRITERIA PASSED") != std::string::npos);
  CHECK(fs::exists(out / "validation.json"));
  fs::remove_all(kWork);
}
