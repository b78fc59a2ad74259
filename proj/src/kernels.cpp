#include "stdpsim/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace stdpsim {

StdpCurve StdpCurve::exponential(double amplitude, double decay) {
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) {
    throw std::invalid_argument("StdpCurve: amplitude must be finite and non-negative");
  }
  if (!(decay > 0.0) || !std::isfinite(decay)) {
    throw std::invalid_argument("StdpCurve: decay must be finite and positive");
  }
  StdpCurve c;
  c.amplitude_ = amplitude;
  c.decay_ = decay;
  return c;
}

StdpCurve StdpCurve::tabulated(std::vector<std::pair<double, double>> points, bool require_non_increasing) {
  if (points.empty()) {
    throw std::invalid_argument("StdpCurve: table needs at least one breakpoint");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto [s, v] = points[i];
    if (!std::isfinite(s) || s < 0.0 || !std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("StdpCurve: breakpoints must be finite and non-negative");
    }
    if (i > 0) {
      if (!(s > points[i - 1].first)) {
        throw std::invalid_argument("StdpCurve: breakpoint delays must be strictly increasing");
      }
      if (require_non_increasing && v > points[i - 1].second) {
        throw std::invalid_argument("StdpCurve: STDP curve must be non-increasing");
      }
    }
  }
  StdpCurve c;
  c.points_ = std::move(points);
  return c;
}

double StdpCurve::operator()(double delay) const {
  if (std::isinf(delay)) {
    return 0.0;
  }
  if (points_.empty()) {
    return amplitude_ * std::exp(-decay_ * delay);
  }
  if (delay <= points_.front().first) {
    return points_.front().second;
  }
  if (delay > points_.back().first) {
    return 0.0;
  }
  auto hi = std::lower_bound(points_.begin(), points_.end(), delay,
                             [](const auto& p, double d) { return p.first < d; });
  auto lo = hi - 1;
  const double frac = (delay - lo->first) / (hi->first - lo->first);
  return lo->second + frac * (hi->second - lo->second);
}

bool StdpCurve::is_zero() const {
  if (points_.empty()) {
    return amplitude_ == 0.0;
  }
  return std::all_of(points_.begin(), points_.end(), [](const auto& p) { return p.second == 0.0; });
}

double StdpCurve::max_value() const {
  if (points_.empty()) {
    return amplitude_;
  }
  double m = 0.0;
  for (const auto& p : points_) {
    m = std::max(m, p.second);
  }
  return m;
}

PairBasedSpec PairBasedSpec::hebbian(StdpCurve potentiation, StdpCurve depression, PairScheme scheme) {
  PairBasedSpec s;
  s.potentiation.from_pre = std::move(potentiation);
  s.depression.from_post = std::move(depression);
  s.scheme = scheme;
  return s;
}

bool PairBasedSpec::is_hebbian() const {
  return potentiation.from_post.is_zero() && depression.from_pre.is_zero();
}

namespace {

void check_train(const SpikeTrain& m, double horizon, const char* what) {
  if (!m.empty() && m.times().back() > horizon) {
    throw std::invalid_argument(std::string(what) + " train extends past the horizon");
  }
}

// Sum over s in m, s < t, of f(t - s).
template <typename F>
double past_sum(const SpikeTrain& m, double t, F&& f) {
  double acc = 0.0;
  for (double s : m) {
    if (!(s < t)) {
      break;
    }
    acc += f(t - s);
  }
  return acc;
}

// Visits every spike of both trains in time order, pre first at ties.
template <typename F>
void for_each_spike(const SpikeTrain& pre, const SpikeTrain& post, F&& f) {
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < pre.size() || j < post.size()) {
    if (j == post.size() || (i < pre.size() && pre[i] <= post[j])) {
      f(pre[i++], SpikeSource::kPre);
    } else {
      f(post[j++], SpikeSource::kPost);
    }
  }
}

void push_atom(std::vector<KernelAtom>& out, double t, double p, double d, SpikeSource src) {
  if (p != 0.0 || d != 0.0) {
    out.push_back({t, p, d, src});
  }
}

double pair_mass(const ChannelCurves& ch, PairScheme scheme, const SpikeTrain& pre,
                 const SpikeTrain& post, double t, SpikeSource src) {
  const bool at_pre = src == SpikeSource::kPre;
  const SpikeTrain& own = at_pre ? pre : post;
  const SpikeTrain& other = at_pre ? post : pre;
  const StdpCurve& phi = at_pre ? ch.from_post : ch.from_pre;
  const double direct = at_pre ? ch.direct_pre : ch.direct_post;
  switch (scheme) {
    case PairScheme::kAllToAll:
      return past_sum(other, t, [&](double u) { return phi(u); }) + direct;
    case PairScheme::kNearestSymmetric:
      return phi(last_spike_delay(other, t)) + direct;
    case PairScheme::kNearestReduced: {
      const double d_other = last_spike_delay(other, t);
      const double d_own = last_spike_delay(own, t);
      return (d_other <= d_own ? phi(d_other) : 0.0) + direct;
    }
  }
  return 0.0;
}

double one_minus(const StdpCurve& suppress, double delay) {
  const double v = suppress(delay);
  if (v > 1.0) {
    throw std::invalid_argument("suppression curve must not exceed 1");
  }
  return 1.0 - v;
}

}  // namespace

std::vector<KernelAtom> pair_atoms(const PairBasedSpec& spec, const SpikeTrain& pre,
                                   const SpikeTrain& post, double horizon) {
  check_train(pre, horizon, "pre");
  check_train(post, horizon, "post");
  std::vector<KernelAtom> out;
  for_each_spike(pre, post, [&](double t, SpikeSource src) {
    push_atom(out, t, pair_mass(spec.potentiation, spec.scheme, pre, post, t, src),
              pair_mass(spec.depression, spec.scheme, pre, post, t, src), src);
  });
  return out;
}

std::vector<KernelAtom> suppression_atoms(const SuppressionSpec& spec, const SpikeTrain& pre,
                                          const SpikeTrain& post, double horizon) {
  check_train(pre, horizon, "pre");
  check_train(post, horizon, "post");
  if (spec.suppress_pre.max_value() > 1.0 || spec.suppress_post.max_value() > 1.0) {
    throw std::invalid_argument("suppression curve must not exceed 1");
  }
  std::vector<KernelAtom> out;
  for_each_spike(pre, post, [&](double t, SpikeSource src) {
    const bool at_pre = src == SpikeSource::kPre;
    const SpikeTrain& own = at_pre ? pre : post;
    const SpikeTrain& other = at_pre ? post : pre;
    const StdpCurve& own_suppress = at_pre ? spec.suppress_pre : spec.suppress_post;
    const StdpCurve& other_suppress = at_pre ? spec.suppress_post : spec.suppress_pre;
    const double own_factor = one_minus(own_suppress, last_spike_delay(own, t));
    auto mass = [&](const ChannelCurves& ch) {
      const StdpCurve& phi = at_pre ? ch.from_post : ch.from_pre;
      double acc = 0.0;
      for (double s : other) {
        if (!(s < t)) {
          break;
        }
        acc += one_minus(other_suppress, last_spike_delay(other, s)) * phi(t - s);
      }
      return own_factor * acc;
    };
    push_atom(out, t, mass(spec.potentiation), mass(spec.depression), src);
  });
  return out;
}

std::vector<KernelAtom> triplet_atoms(const TripletSpec& spec, const SpikeTrain& pre,
                                      const SpikeTrain& post, double horizon) {
  check_train(pre, horizon, "pre");
  check_train(post, horizon, "post");
  std::vector<KernelAtom> out;
  for_each_spike(pre, post, [&](double t, SpikeSource src) {
    const bool at_pre = src == SpikeSource::kPre;
    const SpikeTrain& own = at_pre ? pre : post;
    const SpikeTrain& other = at_pre ? post : pre;
    auto mass = [&](const ChannelCurves& ch, const StdpCurve& trip_pre, const StdpCurve& trip_post) {
      const StdpCurve& phi = at_pre ? ch.from_post : ch.from_pre;
      const StdpCurve& trip = at_pre ? trip_pre : trip_post;
      const double boost = 1.0 + past_sum(own, t, [&](double u) { return trip(u); });
      return boost * past_sum(other, t, [&](double u) { return phi(u); });
    };
    push_atom(out, t, mass(spec.potentiation, spec.triplet_p_pre, spec.triplet_p_post),
              mass(spec.depression, spec.triplet_d_pre, spec.triplet_d_post), src);
  });
  return out;
}

std::vector<KernelAtom> voltage_atoms(const VoltageSpec& spec, const SpikeTrain& pre,
                                      const SpikeTrain& post, double horizon) {
  check_train(pre, horizon, "pre");
  check_train(post, horizon, "post");
  std::vector<KernelAtom> out;
  auto trace = [](const SpikeTrain& m, double t, double decay) {
    return past_sum(m, t, [&](double u) { return std::exp(-decay * u); });
  };
  for_each_spike(pre, post, [&](double t, SpikeSource src) {
    if (src == SpikeSource::kPre) {
      const double d = spec.amplitude_d * std::max(trace(post, t, spec.decay_d_post) - spec.theta_d, 0.0);
      push_atom(out, t, 0.0, d, src);
    } else {
      const double p = spec.amplitude_p * std::max(trace(post, t, spec.decay_p_post) - spec.theta_d, 0.0) *
                       trace(pre, t, spec.decay_p_pre);
      push_atom(out, t, p, 0.0, src);
    }
  });
  return out;
}

std::vector<KernelAtom> kernel_atoms(const KernelSpec& spec, const SpikeTrain& pre,
                                     const SpikeTrain& post, double horizon) {
  return std::visit(
      [&](const auto& s) -> std::vector<KernelAtom> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PairBasedSpec>) {
          return pair_atoms(s, pre, post, horizon);
        } else if constexpr (std::is_same_v<T, SuppressionSpec>) {
          return suppression_atoms(s, pre, post, horizon);
        } else if constexpr (std::is_same_v<T, TripletSpec>) {
          return triplet_atoms(s, pre, post, horizon);
        } else if constexpr (std::is_same_v<T, VoltageSpec>) {
          return voltage_atoms(s, pre, post, horizon);
        } else {
          throw std::invalid_argument("kernel_atoms: calcium kernel has no atomic part");
        }
      },
      spec);
}

double calcium_trace(const CalciumSpec& spec, const SpikeTrain& pre, const SpikeTrain& post, double t) {
  if (t < 0.0) {
    throw std::invalid_argument("calcium_trace: t must be non-negative");
  }
  double c = spec.initial * std::exp(-spec.decay * t);
  for (double s : pre) {
    if (s > t) break;
    c += spec.jump_pre * std::exp(-spec.decay * (t - s));
  }
  for (double s : post) {
    if (s > t) break;
    c += spec.jump_post * std::exp(-spec.decay * (t - s));
  }
  return c;
}

std::pair<double, double> kernel_density(const CalciumSpec& spec, const SpikeTrain& pre,
                                         const SpikeTrain& post, double t) {
  const double c = calcium_trace(spec, pre, post, t);
  return {c >= spec.theta_p ? spec.rate_p : 0.0, c >= spec.theta_d ? spec.rate_d : 0.0};
}

std::vector<DensitySegment> calcium_density_segments(const CalciumSpec& spec, const SpikeTrain& pre,
                                                     const SpikeTrain& post, double horizon) {
  check_train(pre, horizon, "pre");
  check_train(post, horizon, "post");
  std::vector<double> knots{0.0};
  for_each_spike(pre, post, [&](double t, SpikeSource) {
    if (t > knots.back()) knots.push_back(t);
  });
  if (horizon > knots.back()) knots.push_back(horizon);

  std::vector<DensitySegment> out;
  auto emit = [&](double a, double b, double rp, double rd) {
    if (b <= a) return;
    if (!out.empty() && out.back().end == a && out.back().potentiation_rate == rp &&
        out.back().depression_rate == rd) {
      out.back().end = b;
    } else {
      out.push_back({a, b, rp, rd});
    }
  };
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    const double a = knots[k];
    const double b = knots[k + 1];
    const double c0 = calcium_trace(spec, pre, post, a);
    // C decays on [a, b); each channel stays on until C drops below its threshold.
    auto off_time = [&](double theta) {
      if (c0 < theta) return a;
      if (theta <= 0.0) return b;
      return std::min(b, a + std::log(c0 / theta) / spec.decay);
    };
    const double tp = off_time(spec.theta_p);
    const double td = off_time(spec.theta_d);
    double cuts[4] = {a, std::min(tp, td), std::max(tp, td), b};
    for (int i = 0; i < 3; ++i) {
      const double mid = cuts[i];
      emit(cuts[i], cuts[i + 1], mid < tp ? spec.rate_p : 0.0, mid < td ? spec.rate_d : 0.0);
    }
  }
  // Drop zero-density segments.
  std::erase_if(out, [](const DensitySegment& s) { return s.potentiation_rate == 0.0 && s.depression_rate == 0.0; });
  return out;
}

KernelMeasure kernel_measure(const KernelSpec& spec, const SpikeTrain& pre, const SpikeTrain& post,
                             double horizon) {
  KernelMeasure m;
  if (const auto* ca = std::get_if<CalciumSpec>(&spec)) {
    m.segments = calcium_density_segments(*ca, pre, post, horizon);
  } else {
    m.atoms = kernel_atoms(spec, pre, post, horizon);
  }
  return m;
}

std::pair<double, double> filter_kernel_measure(const KernelMeasure& measure, double alpha, double t,
                                                std::pair<double, double> omega0) {
  double p = omega0.first * std::exp(-alpha * t);
  double d = omega0.second * std::exp(-alpha * t);
  for (const auto& a : measure.atoms) {
    if (a.time > t) continue;
    const double k = std::exp(-alpha * (t - a.time));
    p += a.potentiation * k;
    d += a.depression * k;
  }
  for (const auto& s : measure.segments) {
    if (s.start >= t) continue;
    const double end = std::min(s.end, t);
    // integral of e^{-alpha (t - u)} over [start, end]
    const double w = (std::exp(-alpha * (t - end)) - std::exp(-alpha * (t - s.start))) / alpha;
    p += s.potentiation_rate * w;
    d += s.depression_rate * w;
  }
  return {p, d};
}

void write_atoms(std::ostream& os, const std::vector<KernelAtom>& atoms) {
  for (const auto& a : atoms) {
    os << format_real(a.time) << ' ' << format_real(a.potentiation) << ' ' << format_real(a.depression) << '\n';
  }
}

}  // namespace stdpsim
