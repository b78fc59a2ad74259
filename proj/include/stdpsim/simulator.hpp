#ifndef STDPSIM_SIMULATOR_HPP
#define STDPSIM_SIMULATOR_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "stdpsim/classm_engine.hpp"

namespace stdpsim {

/// M = omega_p - omega_d on K_W = R.
struct AdditiveRule {};

/// M = (A_p - w)^n omega_p - (w - A_d)^n omega_d - mu (w - A_r) on K_W = [A_d, A_p].
struct BoundedMultiplicativeRule {
  double a_d = 0.0;
  double a_p = 1.0;
  double a_r = 0.5;
  double exponent = 1.0;
  double homeostasis = 0.0;  // mu
};

/// M = omega_p - w omega_d on K_W = R_+.
struct ExcitatoryRule {};

/// M = A_p omega_p - A_d 1{w >= 0} omega_d on K_W = R, solved with sliding at
/// w = 0 (the weight rests at 0 while depression dominates).
struct GatedLinearRule {
  double a_p = 1.0;
  double a_d = 1.0;
};

using WeightRule = std::variant<AdditiveRule, BoundedMultiplicativeRule, ExcitatoryRule, GatedLinearRule>;

/// Closed interval K_W; infinite ends allowed.
std::pair<double, double> weight_domain(const WeightRule& rule);
double weight_drift(const WeightRule& rule, double omega_p, double omega_d, double w);
void validate(const WeightRule& rule);

/// Omega on one inter-event piece:
/// omega_a(s) = input_a/alpha + (omega_a - input_a/alpha) e^{-alpha s}.
struct OmegaPath {
  double omega_p = 0.0;
  double omega_d = 0.0;
  double input_p = 0.0;
  double input_d = 0.0;
  double alpha = 1.0;
};

/// Raised when a weight leaves K_W by more than 1e-9.
class DomainViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the event ceiling is reached before the horizon.
class LivenessViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// w after dt along the given Omega path. Additive and gated-linear rules are
/// solved exactly; the others use classical RK4 with steps of at most
/// max_step, the last one aligned with dt.
double integrate_weight(const WeightRule& rule, const OmegaPath& path, double w0, double dt, double max_step);

/// First point in (0, window] of the Poisson process with intensity
/// beta(x0 e^{-u}), sampled by thinning, or nullopt.
std::optional<double> next_post_spike(double x0, const NeuronSpec& neuron, RngStream& rng, double window);

enum class EventTag { kStart, kPre, kPost, kThreshold, kSample, kEnd };

const char* event_name(EventTag tag);

struct TraceRecord {
  double t = 0.0;
  EventTag tag = EventTag::kSample;
  double x = 0.0;
  std::vector<double> z;
  double omega_p = 0.0;
  double omega_d = 0.0;
  double w = 0.0;
};

struct SimConfig {
  NeuronSpec neuron;
  ClassMSpec kernel;
  WeightRule rule = AdditiveRule{};
  double alpha = 1.0;
  double horizon = 10.0;
  std::uint64_t seed = 1;
  double max_step = 0.05;         // h_max: thinning window and RK4 step cap
  double sample_interval = 0.0;   // 0 records events only
  double x0 = 0.0;
  double w0 = 0.0;
  double omega_p0 = 0.0;
  double omega_d0 = 0.0;
  std::uint64_t max_events = 10'000'000;
  /// End the run early instead of throwing LivenessViolation.
  bool stop_on_liveness = false;
  bool record_events = true;
  /// Prescribed spike trains replace the random ones when present.
  std::optional<SpikeTrain> forced_pre;
  std::optional<SpikeTrain> forced_post;
};

void validate(const SimConfig& config);

struct RunResult {
  std::vector<TraceRecord> trace;
  FullState final_state;
  SpikeTrain pre;
  SpikeTrain post;
  std::uint64_t events = 0;
  /// Time integral of x over [0, horizon].
  double x_integral = 0.0;
  /// Set when stop_on_liveness ended the run before the horizon.
  std::optional<std::string> stopped_early;
};

/// Filtered model: Omega is the exponential filter of the kernel and
/// dW = M(Omega_p, Omega_d, W) dt.
RunResult run(const SimConfig& config);

/// Unfiltered model: W jumps by the kernel atoms and drifts with its density.
/// Supports the additive and gated-linear rules.
RunResult run_unfiltered(const SimConfig& config);

/// Visits the fast process (X, Z) at frozen weight w as a sequence of flow
/// segments: fn(x, z, duration) is called with the state at the start of each
/// segment, which then follows the exact flow for `duration`.
void for_each_fast_segment(const ClassMSpec& spec, const NeuronSpec& neuron, double w, double x0, double horizon,
                           std::uint64_t seed, double max_step,
                           const std::function<void(double, std::span<const double>, double)>& fn);

/// (W(t), Wbar(t)) of the toy comparison with alpha = 2 eps. Throws for eps
/// outside (0, 1).
std::pair<double, double> toy_closed_form(double target, double w0, double eps, double t);

/// The same pair obtained by RK4 integration of the filtered system
/// W' = Omega, Omega' = -alpha Omega + (F - W), and of Wbar' = eps (F - Wbar).
std::vector<std::pair<double, double>> toy_integrate(double target, double w0, double eps,
                                                     const std::vector<double>& times, double step);

/// Header "t,event,x,<labels>,omega_p,omega_d,w"; reals with 17 significant digits.
void write_trace_csv(std::ostream& os, const std::vector<std::string>& labels,
                     const std::vector<TraceRecord>& trace);
/// One JSON object per line with the same fields.
void write_trace_jsonl(std::ostream& os, const std::vector<std::string>& labels,
                       const std::vector<TraceRecord>& trace);

/// splitmix64 step, used to derive independent stream seeds from one seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace stdpsim

#endif  // STDPSIM_SIMULATOR_HPP
