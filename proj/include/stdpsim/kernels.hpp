#ifndef STDPSIM_KERNELS_HPP
#define STDPSIM_KERNELS_HPP

#include <iosfwd>
#include <utility>
#include <variant>
#include <vector>

#include "stdpsim/spike_core.hpp"

namespace stdpsim {

/// STDP curve Phi on [0, +inf]: either B exp(-gamma s) or a piecewise-linear
/// table that is flat before its first breakpoint and 0 after its last one.
/// Phi(+inf) is 0 in both forms.
class StdpCurve {
 public:
  /// The zero curve.
  StdpCurve() = default;

  static StdpCurve exponential(double amplitude, double decay);
  /// `points` are (delay, value) pairs with strictly increasing delays.
  /// Values must be finite and non-negative; with `require_non_increasing`
  /// they must also be non-increasing.
  static StdpCurve tabulated(std::vector<std::pair<double, double>> points,
                             bool require_non_increasing = true);

  double operator()(double delay) const;

  bool is_exponential() const { return points_.empty(); }
  bool is_zero() const;
  double amplitude() const { return amplitude_; }
  double decay() const { return decay_; }
  const std::vector<std::pair<double, double>>& points() const { return points_; }
  /// sup of the curve over [0, +inf).
  double max_value() const;

  bool operator==(const StdpCurve&) const = default;

 private:
  double amplitude_ = 0.0;
  double decay_ = 1.0;
  std::vector<std::pair<double, double>> points_;
};

enum class PairScheme { kAllToAll, kNearestSymmetric, kNearestReduced };

/// Curves and direct-drive constants of one channel (potentiation or depression).
struct ChannelCurves {
  StdpCurve from_pre;        // Phi_{a,1}: weighs earlier pre spikes, charged at post spikes
  StdpCurve from_post;       // Phi_{a,2}: weighs earlier post spikes, charged at pre spikes
  double direct_pre = 0.0;   // D_{a,1}
  double direct_post = 0.0;  // D_{a,2}
};

struct PairBasedSpec {
  ChannelCurves potentiation;
  ChannelCurves depression;
  PairScheme scheme = PairScheme::kAllToAll;

  /// Pre-before-post potentiates, post-before-pre depresses; the other two curves are 0.
  static PairBasedSpec hebbian(StdpCurve potentiation, StdpCurve depression,
                               PairScheme scheme = PairScheme::kAllToAll);
  bool is_hebbian() const;
};

struct CalciumSpec {
  double jump_pre = 1.0;   // C_1
  double jump_post = 1.0;  // C_2
  double decay = 1.0;      // gamma
  double theta_p = 1.0;
  double theta_d = 1.0;
  double rate_p = 1.0;  // B_p
  double rate_d = 1.0;  // B_d
  double initial = 0.0;
};

/// Pair-based rule whose pairings are damped by 1 - Phi_S of the delay to the
/// previous spike of the same train. Phi_S must take values in [0, 1].
struct SuppressionSpec {
  ChannelCurves potentiation;  // direct-drive constants are ignored
  ChannelCurves depression;
  StdpCurve suppress_pre;   // Phi_{S,1}
  StdpCurve suppress_post;  // Phi_{S,2}
};

struct TripletSpec {
  ChannelCurves potentiation;  // direct-drive constants are ignored
  ChannelCurves depression;
  StdpCurve triplet_p_pre;   // Phi_{T,p,1}
  StdpCurve triplet_p_post;  // Phi_{T,p,2}
  StdpCurve triplet_d_pre;   // Phi_{T,d,1}
  StdpCurve triplet_d_post;  // Phi_{T,d,2}
};

/// Spike-train adaptation of the voltage-based rule.
struct VoltageSpec {
  double amplitude_p = 1.0;  // B_p
  double amplitude_d = 1.0;  // B_d
  double decay_p_pre = 1.0;  // gamma_{p,1}
  double decay_p_post = 1.0; // gamma_{p,2}
  double decay_d_post = 1.0; // gamma_{d,2}
  double theta_d = 0.0;
};

using KernelSpec = std::variant<PairBasedSpec, CalciumSpec, SuppressionSpec, TripletSpec, VoltageSpec>;

enum class SpikeSource { kPre, kPost };

/// Point masses of Gamma_p and Gamma_d at one spike.
struct KernelAtom {
  double time = 0.0;
  double potentiation = 0.0;
  double depression = 0.0;
  SpikeSource source = SpikeSource::kPre;

  bool operator==(const KernelAtom&) const = default;
};

/// Gamma_a(dt) = rate_a dt on [start, end).
struct DensitySegment {
  double start = 0.0;
  double end = 0.0;
  double potentiation_rate = 0.0;
  double depression_rate = 0.0;

  bool operator==(const DensitySegment&) const = default;
};

struct KernelMeasure {
  std::vector<KernelAtom> atoms;
  std::vector<DensitySegment> segments;
};

// All of the functions below evaluate the defining sums over the spike
// histories literally. They serve as the reference the state-based engine is
// checked against. Atoms with zero mass in both channels are omitted; at equal
// times pre atoms come before post atoms. Pairings use the strict past: a spike
// at exactly t does not pair with another spike at t.

/// Atomic part of any kernel with one. Throws std::invalid_argument for
/// CalciumSpec, which is a pure density.
std::vector<KernelAtom> kernel_atoms(const KernelSpec& spec, const SpikeTrain& pre,
                                     const SpikeTrain& post, double horizon);

std::vector<KernelAtom> pair_atoms(const PairBasedSpec& spec, const SpikeTrain& pre,
                                   const SpikeTrain& post, double horizon);
std::vector<KernelAtom> suppression_atoms(const SuppressionSpec& spec, const SpikeTrain& pre,
                                          const SpikeTrain& post, double horizon);
std::vector<KernelAtom> triplet_atoms(const TripletSpec& spec, const SpikeTrain& pre,
                                      const SpikeTrain& post, double horizon);
std::vector<KernelAtom> voltage_atoms(const VoltageSpec& spec, const SpikeTrain& pre,
                                      const SpikeTrain& post, double horizon);

/// C(0) e^{-gamma t} + C_1 sum_{s in pre, s <= t} e^{-gamma (t-s)} + C_2 (same over post).
double calcium_trace(const CalciumSpec& spec, const SpikeTrain& pre, const SpikeTrain& post, double t);

/// (B_p 1{C(t) >= theta_p}, B_d 1{C(t) >= theta_d}).
std::pair<double, double> kernel_density(const CalciumSpec& spec, const SpikeTrain& pre,
                                         const SpikeTrain& post, double t);

/// Piecewise-constant density of the calcium kernel on [0, horizon], split at
/// spikes and at threshold crossings.
std::vector<DensitySegment> calcium_density_segments(const CalciumSpec& spec, const SpikeTrain& pre,
                                                     const SpikeTrain& post, double horizon);

/// Atoms and density of any kernel on [0, horizon].
KernelMeasure kernel_measure(const KernelSpec& spec, const SpikeTrain& pre, const SpikeTrain& post,
                             double horizon);

/// Omega_a(t) of the exponential filter with rate alpha applied to the kernel
/// measure, starting from omega0 at time 0. Atoms at exactly t are included.
std::pair<double, double> filter_kernel_measure(const KernelMeasure& measure, double alpha, double t,
                                                std::pair<double, double> omega0 = {0.0, 0.0});

/// Three columns: time, potentiation mass, depression mass.
void write_atoms(std::ostream& os, const std::vector<KernelAtom>& atoms);

}  // namespace stdpsim

#endif  // STDPSIM_KERNELS_HPP
