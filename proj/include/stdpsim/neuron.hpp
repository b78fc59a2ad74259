#ifndef STDPSIM_NEURON_HPP
#define STDPSIM_NEURON_HPP

#include <variant>
#include <vector>

namespace stdpsim {

/// beta(x) = slope * (x + cutoff)^+, zero for x <= -cutoff.
struct LinearActivation {
  double slope = 1.0;
  double cutoff = 0.0;
};

/// beta(x) = max_rate * (s(x) - s(-cutoff))^+ / (1 - s(-cutoff)) with
/// s(x) = 1 / (1 + exp(-gain (x - midpoint))). Continuous, non-decreasing,
/// zero for x <= -cutoff and bounded by max_rate.
struct SigmoidActivation {
  double max_rate = 1.0;
  double gain = 1.0;
  double midpoint = 0.0;
  double cutoff = 0.0;
};

/// Piecewise-constant rate: values[i] on [edges[i], edges[i+1]), the last value
/// beyond the last edge, 0 below edges[0].
struct TableActivation {
  std::vector<double> edges;
  std::vector<double> values;
};

using Activation = std::variant<LinearActivation, SigmoidActivation, TableActivation>;

/// g(x) = x: the potential is reset to 0.
struct FullReset {};
/// g(x) = drop.
struct ConstantDrop {
  double drop = 1.0;
};
/// g(x) = 0.
struct NoReset {};

using Reset = std::variant<FullReset, ConstantDrop, NoReset>;

struct NeuronSpec {
  double pre_rate = 1.0;  // lambda
  Activation activation = LinearActivation{};
  Reset reset = FullReset{};
};

double firing_rate(const Activation& beta, double x);
/// Supremum of beta over the closed interval [lo, hi].
double firing_rate_sup(const Activation& beta, double lo, double hi);
/// c_beta: beta(x) = 0 for x <= -c_beta.
double firing_cutoff(const Activation& beta);
double potential_drop(const Reset& g, double x);

/// Throws std::invalid_argument when the rates are negative or non-finite or a
/// table is malformed.
void validate(const NeuronSpec& neuron);

}  // namespace stdpsim

#endif  // STDPSIM_NEURON_HPP
