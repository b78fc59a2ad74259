#ifndef STDPSIM_CLASSM_ENGINE_HPP
#define STDPSIM_CLASSM_ENGINE_HPP

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "stdpsim/kernels.hpp"
#include "stdpsim/neuron.hpp"

namespace stdpsim {

/// One coordinate of a jump map. The coordinate becomes
///   (reset ? 0 : z_i) + add * (gate >= 0 ? (1 - z_gate)^+ : 1)
/// where every z on the right-hand side is the pre-jump value.
struct CoordJump {
  double add = 0.0;
  bool reset = false;
  int gate = -1;

  bool operator==(const CoordJump&) const = default;
};

// Terms of an output function n(z). A function is the sum of its terms.

/// value
struct ConstantTerm {
  double value = 0.0;
  bool operator==(const ConstantTerm&) const = default;
};
/// z_index
struct TraceTerm {
  int index = 0;
  bool operator==(const TraceTerm&) const = default;
};
/// (1 - z_gate)^+ z_index
struct SuppressedTraceTerm {
  int index = 0;
  int gate = 0;
  bool operator==(const SuppressedTraceTerm&) const = default;
};
/// (1 + z_boost) z_index
struct BoostedTraceTerm {
  int index = 0;
  int boost = 0;
  bool operator==(const BoostedTraceTerm&) const = default;
};
/// curve(z_clock), times 1{z_clock <= z_guard} when guard >= 0.
struct ClockCurveTerm {
  int clock = 0;
  StdpCurve curve;
  int guard = -1;
  bool operator==(const ClockCurveTerm&) const = default;
};
/// rate 1{z_index >= theta}
struct ThresholdTerm {
  int index = 0;
  double rate = 0.0;
  double theta = 0.0;
  bool operator==(const ThresholdTerm&) const = default;
};
/// scale (z_index - theta)^+, times z_multiplier when multiplier >= 0.
struct HingeTerm {
  int index = 0;
  double theta = 0.0;
  double scale = 1.0;
  int multiplier = -1;
  bool operator==(const HingeTerm&) const = default;
};

using OutputTerm = std::variant<ConstantTerm, TraceTerm, SuppressedTraceTerm, BoostedTraceTerm,
                                ClockCurveTerm, ThresholdTerm, HingeTerm>;

struct OutputFn {
  std::vector<OutputTerm> terms;

  double operator()(std::span<const double> z) const;
  bool operator==(const OutputFn&) const = default;
};

/// n_{a,0}, n_{a,1}, n_{a,2} of one channel.
struct ChannelOutputs {
  OutputFn drift;    // Omega_a grows at rate n_{a,0}(z) between spikes
  OutputFn at_pre;   // Omega_a jumps by n_{a,1}(z(t-)) at a pre spike
  OutputFn at_post;  // Omega_a jumps by n_{a,2}(z(t-)) at a post spike

  bool operator==(const ChannelOutputs&) const = default;
};

/// Finite-dimensional Markovian representation of a plasticity kernel:
/// dz = (-decay * z + drift) dt + k1(z(t-)) dN_pre + k2(z(t-)) dN_post.
/// Drift outputs may only use constant and threshold terms, so Omega's drift
/// is piecewise constant between spikes.
struct ClassMSpec {
  std::string name;
  std::vector<std::string> labels;
  std::vector<double> decay;       // gamma
  std::vector<double> drift;       // k0
  std::vector<CoordJump> jump_pre;   // k1
  std::vector<CoordJump> jump_post;  // k2
  ChannelOutputs potentiation;
  ChannelOutputs depression;
  std::vector<double> initial;     // z(0); +inf is allowed for clock coordinates

  std::size_t dimension() const { return decay.size(); }
  bool operator==(const ClassMSpec&) const = default;
};

/// Checks shapes, indices, signs and positivity preservation (analytically and
/// by randomized sampling of R_+^l). Throws std::invalid_argument.
void validate(const ClassMSpec& spec);

struct FastState {
  double x = 0.0;
  std::vector<double> z;
};

struct FullState {
  double x = 0.0;
  std::vector<double> z;
  double omega_p = 0.0;
  double omega_d = 0.0;
  double w = 0.0;
};

/// Exact solution of the inter-spike flow after dt >= 0.
std::vector<double> z_flow(const ClassMSpec& spec, std::span<const double> z, double dt);

/// z(t-) + k(z(t-)). Throws std::domain_error if the result leaves R_+^l.
std::vector<double> jump_z(const ClassMSpec& spec, std::span<const double> z, SpikeSource which);

/// (n_{p,i}(z), n_{d,i}(z)) with i = 1 for pre and 2 for post.
std::pair<double, double> jump_outputs(const ClassMSpec& spec, std::span<const double> z,
                                       SpikeSource which);

/// Pre: x += w. Post: x -= g(x). Both: z jumps and Omega gets the outputs at z(t-).
FullState apply_jump(const ClassMSpec& spec, FullState state, SpikeSource which, const Reset& g);

/// (n_{p,0}(z), n_{d,0}(z)).
std::pair<double, double> omega_drift(const ClassMSpec& spec, std::span<const double> z);

/// Piece of an inter-spike interval on which the drift outputs are constant.
struct DriftPiece {
  double duration = 0.0;
  double rate_p = 0.0;
  double rate_d = 0.0;
};

/// First time in (0, max_dt] at which a drift output can change along the flow
/// started at z, or +inf.
double next_drift_change(const ClassMSpec& spec, std::span<const double> z, double max_dt);

/// Splits [0, dt] at drift changes. Each piece's rate is the value on its
/// interior, so an instantaneous touch of a threshold carries no mass.
std::vector<DriftPiece> drift_pieces(const ClassMSpec& spec, std::span<const double> z, double dt);

/// Which of the two nearest-neighbour representations builtin_spec produces.
enum class NearestForm { kResetTraces, kClocks };

/// Class-M system of a builtin kernel. Trace-based forms need exponential
/// curves; the clock form accepts any curve. Throws std::invalid_argument.
ClassMSpec builtin_spec(const KernelSpec& kernel, NearestForm nearest = NearestForm::kResetTraces);

/// Omega at time t when the system is driven by prescribed spike trains,
/// filtered at rate alpha from omega0. Spikes at exactly t are included; at
/// equal times the pre spike is applied first.
std::pair<double, double> drive_omega(const ClassMSpec& spec, const SpikeTrain& pre, const SpikeTrain& post,
                                      double alpha, double t, std::pair<double, double> omega0 = {0.0, 0.0});

struct FastGradient {
  double dx = 0.0;
  std::vector<double> dz;
};

struct TestFunction {
  std::function<double(const FastState&)> value;
  std::function<FastGradient(const FastState&)> gradient;
};

/// Generator of the fast process (X, Z) at fixed weight w.
double generator_apply(const ClassMSpec& spec, double w, const TestFunction& f, const FastState& v,
                       const NeuronSpec& neuron);

}  // namespace stdpsim

#endif  // STDPSIM_CLASSM_ENGINE_HPP
