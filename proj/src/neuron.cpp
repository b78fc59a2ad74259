#include "stdpsim/neuron.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stdpsim {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

double logistic(double u) { return 1.0 / (1.0 + std::exp(-u)); }

double sigmoid_rate(const SigmoidActivation& s, double x) {
  if (x <= -s.cutoff) {
    return 0.0;
  }
  const double base = logistic(s.gain * (-s.cutoff - s.midpoint));
  const double v = (logistic(s.gain * (x - s.midpoint)) - base) / (1.0 - base);
  return s.max_rate * std::max(v, 0.0);
}

}  // namespace

double firing_rate(const Activation& beta, double x) {
  return std::visit(
      overloaded{
          [x](const LinearActivation& a) { return a.slope * std::max(x + a.cutoff, 0.0); },
          [x](const SigmoidActivation& a) { return sigmoid_rate(a, x); },
          [x](const TableActivation& a) {
            if (a.edges.empty() || x < a.edges.front()) {
              return 0.0;
            }
            auto it = std::upper_bound(a.edges.begin(), a.edges.end(), x);
            return a.values[static_cast<std::size_t>(it - a.edges.begin()) - 1];
          },
      },
      beta);
}

double firing_rate_sup(const Activation& beta, double lo, double hi) {
  if (lo > hi) {
    std::swap(lo, hi);
  }
  if (const auto* t = std::get_if<TableActivation>(&beta)) {
    double m = firing_rate(beta, lo);
    for (std::size_t i = 0; i < t->edges.size(); ++i) {
      if (t->edges[i] > lo && t->edges[i] <= hi) {
        m = std::max(m, t->values[i]);
      }
    }
    return m;
  }
  // Linear and sigmoid rates are non-decreasing.
  return firing_rate(beta, hi);
}

double firing_cutoff(const Activation& beta) {
  return std::visit(overloaded{
                        [](const LinearActivation& a) { return a.cutoff; },
                        [](const SigmoidActivation& a) { return a.cutoff; },
                        [](const TableActivation& a) { return a.edges.empty() ? 0.0 : -a.edges.front(); },
                    },
                    beta);
}

double potential_drop(const Reset& g, double x) {
  return std::visit(overloaded{
                        [x](const FullReset&) { return x; },
                        [](const ConstantDrop& c) { return c.drop; },
                        [](const NoReset&) { return 0.0; },
                    },
                    g);
}

void validate(const NeuronSpec& neuron) {
  if (!(neuron.pre_rate >= 0.0) || !std::isfinite(neuron.pre_rate)) {
    throw std::invalid_argument("neuron: pre-synaptic rate must be finite and non-negative");
  }
  std::visit(overloaded{
                 [](const LinearActivation& a) {
                   if (!(a.slope >= 0.0) || !std::isfinite(a.slope) || !(a.cutoff >= 0.0) ||
                       !std::isfinite(a.cutoff)) {
                     throw std::invalid_argument("linear activation: slope and cutoff must be finite and non-negative");
                   }
                 },
                 [](const SigmoidActivation& a) {
                   if (!(a.max_rate >= 0.0) || !std::isfinite(a.max_rate) || !(a.gain > 0.0) ||
                       !std::isfinite(a.midpoint) || !(a.cutoff >= 0.0) || !std::isfinite(a.cutoff)) {
                     throw std::invalid_argument("sigmoid activation: invalid parameters");
                   }
                 },
                 [](const TableActivation& a) {
                   if (a.edges.empty() || a.edges.size() != a.values.size()) {
                     throw std::invalid_argument("table activation: edges and values must be non-empty and equal length");
                   }
                   for (std::size_t i = 0; i < a.edges.size(); ++i) {
                     if (!std::isfinite(a.edges[i]) || (i > 0 && !(a.edges[i] > a.edges[i - 1]))) {
                       throw std::invalid_argument("table activation: edges must be finite and increasing");
                     }
                     if (!(a.values[i] >= 0.0) || !std::isfinite(a.values[i])) {
                       throw std::invalid_argument("table activation: values must be finite and non-negative");
                     }
                   }
                 },
             },
             neuron.activation);
  if (const auto* c = std::get_if<ConstantDrop>(&neuron.reset)) {
    if (!(c->drop >= 0.0) || !std::isfinite(c->drop)) {
      throw std::invalid_argument("constant drop must be finite and non-negative");
    }
  }
}

}  // namespace stdpsim
