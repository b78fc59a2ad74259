#ifndef STDPSIM_VALIDATION_HPP
#define STDPSIM_VALIDATION_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "stdpsim/simulator.hpp"

namespace stdpsim {

struct ValidationOptions {
  /// Reduced sample counts: horizons and sample sizes are divided by 5 to 10;
  /// tolerances stay the same except where they scale with the sample size.
  bool quick = false;
  std::uint64_t seed = 20'240'601;
  unsigned threads = 0;  // 0 uses the hardware concurrency
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string measured;
  std::string limit;
  double seconds = 0.0;
};

/// The acceptance criteria, numbered 1 to 11.
int criterion_count();
std::string criterion_name(int id);
CriterionResult run_criterion(int id, const ValidationOptions& options);
std::vector<CriterionResult> run_acceptance(const ValidationOptions& options,
                                            const std::function<void(const CriterionResult&)>& on_result = {});

/// "PASS  3  name  measured=...  limit=...  (1.2 s)"
std::string format_result_line(const CriterionResult& r);
void write_results_json(std::ostream& os, const std::vector<CriterionResult>& results, const ValidationOptions& options);

/// Calls fn(i) for i in [0, n) on up to `threads` threads. Every call must
/// only touch its own state. The first exception is rethrown.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

/// Random inputs shared by the criteria and the command-line tool.
struct RandomSetup {
  static KernelSpec kernel(RngStream& rng, int which);  // which in [0, 7)
  static NeuronSpec neuron(RngStream& rng);
  static SpikeTrain train(RngStream& rng, double rate, double horizon, std::size_t max_spikes);
};

}  // namespace stdpsim

#endif  // STDPSIM_VALIDATION_HPP
