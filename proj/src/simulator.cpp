#include "stdpsim/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>

#include <boost/math/tools/roots.hpp>
#include "json.hpp"

namespace stdpsim {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

double pos(double v) { return v > 0.0 ? v : 0.0; }

constexpr double kDomainSlack = 1e-9;

// f(s) = c + d e^{-alpha s}: the weight drift on one piece when Omega relaxes
// exponentially. With alpha = 0 the drift is the constant c (d must be 0).
struct ExpAffine {
  double c = 0.0;
  double d = 0.0;
  double alpha = 0.0;

  double operator()(double s) const { return d == 0.0 ? c : c + d * std::exp(-alpha * s); }
  // integral over [a, b]
  double integral(double a, double b) const {
    double v = c * (b - a);
    if (d != 0.0) {
      v += d * (std::exp(-alpha * a) - std::exp(-alpha * b)) / alpha;
    }
    return v;
  }
  bool increasing() const { return d < 0.0; }
  // The unique zero of f in (a, b) when f changes sign there.
  std::optional<double> zero_in(double a, double b) const {
    const double fa = (*this)(a);
    const double fb = (*this)(b);
    if (d == 0.0 || !((fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0))) {
      return std::nullopt;
    }
    const double u = -std::log(-c / d) / alpha;
    return std::clamp(u, a, b);
  }
};

double bracketed_root(const std::function<double(double)>& f, double a, double b) {
  double fa = f(a);
  double fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  std::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (r.first + r.second);
}

// Exact solution of w' = on(s) for w >= 0 and w' = off(s) for w < 0 over
// [0, duration], with the Filippov sliding solution at w = 0 when on < 0 <= off.
double gated_advance(double w, const ExpAffine& on, const ExpAffine& off, double duration) {
  double s = 0.0;
  bool released = false;  // set when sliding ends at a zero of the on-drift
  for (int guard = 0; s < duration; ++guard) {
    if (guard > 10000) {
      throw std::logic_error("gated weight solver did not terminate");
    }
    const double f_now = on(s);
    const bool leaves_upward = released || f_now > 0.0 || (f_now == 0.0 && !(on.d > 0.0));
    released = false;
    if (w > 0.0 || (w == 0.0 && leaves_upward)) {
      const double w0 = w;
      const double s0 = s;
      auto path = [&](double u) { return w0 + on.integral(s0, u); };
      std::optional<std::pair<double, double>> bracket;
      if (on.increasing()) {
        // Convex path: its minimum is where the drift turns positive.
        if (f_now < 0.0) {
          const double m = on.zero_in(s, duration).value_or(duration);
          if (path(m) < 0.0) bracket = std::pair{s, m};
        }
      } else if (path(duration) < 0.0) {
        // Concave or linear path: start the bracket at its maximum.
        const double m = f_now > 0.0 ? on.zero_in(s, duration).value_or(s) : s;
        bracket = std::pair{m, duration};
      }
      if (!bracket) {
        w = path(duration);
        s = duration;
      } else {
        s = bracketed_root(path, bracket->first, bracket->second);
        w = 0.0;
      }
    } else if (w < 0.0) {
      const double w0 = w;
      const double s0 = s;
      auto path = [&](double u) { return w0 + off.integral(s0, u); };
      if (path(duration) >= 0.0) {
        s = bracketed_root(path, s, duration);
        w = 0.0;
      } else {
        w = path(duration);
        s = duration;
      }
    } else {
      // Sliding at 0 until depression stops dominating.
      const auto z = on.increasing() ? on.zero_in(s, duration) : std::nullopt;
      s = z.value_or(duration);
      released = z.has_value();
    }
  }
  return w;
}

void check_domain(const WeightRule& rule, double& w) {
  const auto [lo, hi] = weight_domain(rule);
  if (w < lo) {
    if (w < lo - kDomainSlack) throw DomainViolation("weight " + format_real(w) + " left its domain");
    w = lo;
  } else if (w > hi) {
    if (w > hi + kDomainSlack) throw DomainViolation("weight " + format_real(w) + " left its domain");
    w = hi;
  }
  if (std::isnan(w)) {
    throw DomainViolation("weight became NaN");
  }
}

double lipschitz_bound(const WeightRule& rule, double omega_p, double omega_d) {
  return std::visit(overloaded{
                        [](const AdditiveRule&) { return 0.0; },
                        [](const GatedLinearRule&) { return 0.0; },
                        [&](const ExcitatoryRule&) { return omega_d; },
                        [&](const BoundedMultiplicativeRule& r) {
                          const double n = r.exponent;
                          const double scale = n >= 1.0 ? n * std::pow(r.a_p - r.a_d, n - 1.0) : 0.0;
                          return scale * (omega_p + omega_d) + r.homeostasis;
                        },
                    },
                    rule);
}

double rk4_weight(const WeightRule& rule, const OmegaPath& path, double w, double dt, double max_step) {
  const double ep = path.input_p / path.alpha;
  const double ed = path.input_d / path.alpha;
  auto omega = [&](double s) {
    const double k = std::exp(-path.alpha * s);
    return std::pair{ep + (path.omega_p - ep) * k, ed + (path.omega_d - ed) * k};
  };
  auto f = [&](double s, double v) {
    const auto [p, d] = omega(s);
    return weight_drift(rule, p, d, v);
  };
  const auto [p_end, d_end] = omega(dt);
  const double lip = lipschitz_bound(rule, std::max(path.omega_p, p_end), std::max(path.omega_d, d_end));
  double steps = std::ceil(dt / max_step);
  if (lip > 0.0) {
    steps = std::max(steps, std::ceil(dt * lip / 0.5));
  }
  const auto [lo, hi] = weight_domain(rule);
  // A step that leaves K_W is redone as two half steps. This only triggers
  // next to a boundary where the drift is not Lipschitz (exponent below 1).
  std::function<double(double, double, double, int)> step = [&](double s, double v, double h, int depth) {
    const double k1 = f(s, v);
    const double k2 = f(s + 0.5 * h, v + 0.5 * h * k1);
    const double k3 = f(s + 0.5 * h, v + 0.5 * h * k2);
    const double k4 = f(s + h, v + h * k3);
    double next = v + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if ((next < lo - kDomainSlack || next > hi + kDomainSlack) && depth < 40) {
      next = step(s + 0.5 * h, step(s, v, 0.5 * h, depth + 1), 0.5 * h, depth + 1);
    }
    check_domain(rule, next);
    return next;
  };
  const auto n = static_cast<long>(std::max(1.0, steps));
  const double h = dt / static_cast<double>(n);
  for (long k = 0; k < n; ++k) {
    w = step(h * static_cast<double>(k), w, h, 0);
  }
  return w;
}

double unfiltered_drift(const WeightRule& rule, double w, double rate_p, double rate_d, double dt) {
  if (std::holds_alternative<AdditiveRule>(rule)) {
    return w + (rate_p - rate_d) * dt;
  }
  const auto& g = std::get<GatedLinearRule>(rule);
  return gated_advance(w, ExpAffine{g.a_p * rate_p - g.a_d * rate_d}, ExpAffine{g.a_p * rate_p}, dt);
}

double unfiltered_jump(const WeightRule& rule, double w, double p, double d) {
  if (std::holds_alternative<AdditiveRule>(rule)) {
    return w + p - d;
  }
  const auto& g = std::get<GatedLinearRule>(rule);
  return w + g.a_p * p - (w >= 0.0 ? g.a_d * d : 0.0);
}

}  // namespace

std::pair<double, double> weight_domain(const WeightRule& rule) {
  return std::visit(overloaded{
                        [](const AdditiveRule&) { return std::pair{-kInfinity, kInfinity}; },
                        [](const GatedLinearRule&) { return std::pair{-kInfinity, kInfinity}; },
                        [](const ExcitatoryRule&) { return std::pair{0.0, kInfinity}; },
                        [](const BoundedMultiplicativeRule& r) { return std::pair{r.a_d, r.a_p}; },
                    },
                    rule);
}

double weight_drift(const WeightRule& rule, double omega_p, double omega_d, double w) {
  return std::visit(overloaded{
                        [&](const AdditiveRule&) { return omega_p - omega_d; },
                        [&](const GatedLinearRule& r) { return r.a_p * omega_p - (w >= 0.0 ? r.a_d * omega_d : 0.0); },
                        [&](const ExcitatoryRule&) { return omega_p - w * omega_d; },
                        [&](const BoundedMultiplicativeRule& r) {
                          return std::pow(pos(r.a_p - w), r.exponent) * omega_p -
                                 std::pow(pos(w - r.a_d), r.exponent) * omega_d - r.homeostasis * (w - r.a_r);
                        },
                    },
                    rule);
}

void validate(const WeightRule& rule) {
  if (const auto* r = std::get_if<BoundedMultiplicativeRule>(&rule)) {
    if (!(r->a_d <= r->a_r && r->a_r <= r->a_p) || !std::isfinite(r->a_d) || !std::isfinite(r->a_p)) {
      throw std::invalid_argument("bounded multiplicative rule needs finite A_d <= A_r <= A_p");
    }
    if (!(r->exponent > 0.0) || !(r->homeostasis >= 0.0)) {
      throw std::invalid_argument("bounded multiplicative rule needs n > 0 and mu >= 0");
    }
  }
  if (const auto* g = std::get_if<GatedLinearRule>(&rule)) {
    if (!(g->a_p >= 0.0) || !(g->a_d >= 0.0)) {
      throw std::invalid_argument("gated linear rule needs non-negative amplitudes");
    }
  }
}

double integrate_weight(const WeightRule& rule, const OmegaPath& path, double w0, double dt, double max_step) {
  if (!(dt >= 0.0) || !(path.alpha > 0.0)) {
    throw std::invalid_argument("integrate_weight: need dt >= 0 and alpha > 0");
  }
  if (dt == 0.0) {
    return w0;
  }
  const double ep = path.input_p / path.alpha;
  const double ed = path.input_d / path.alpha;
  return std::visit(
      overloaded{
          [&](const AdditiveRule&) {
            return w0 + exp_filter_integral(path.omega_p, path.alpha, path.input_p, dt) -
                   exp_filter_integral(path.omega_d, path.alpha, path.input_d, dt);
          },
          [&](const GatedLinearRule& g) {
            const ExpAffine on{g.a_p * ep - g.a_d * ed, g.a_p * (path.omega_p - ep) - g.a_d * (path.omega_d - ed),
                               path.alpha};
            const ExpAffine off{g.a_p * ep, g.a_p * (path.omega_p - ep), path.alpha};
            return gated_advance(w0, on, off, dt);
          },
          [&](const auto&) {
            if (!std::isfinite(dt)) {
              throw std::invalid_argument("integrate_weight: numerical rules need a finite dt");
            }
            return rk4_weight(rule, path, w0, dt, max_step);
          },
      },
      rule);
}

std::optional<double> next_post_spike(double x0, const NeuronSpec& neuron, RngStream& rng, double window) {
  const double x1 = x0 * std::exp(-window);
  const double bound = firing_rate_sup(neuron.activation, std::min(x0, x1), std::max(x0, x1));
  if (!std::isfinite(bound)) {
    throw std::domain_error("activation has no finite envelope on the window");
  }
  if (!(bound > 0.0)) {
    return std::nullopt;
  }
  double u = 0.0;
  while (true) {
    u += rng.exponential(bound);
    if (u > window) {
      return std::nullopt;
    }
    if (rng.uniform() * bound < firing_rate(neuron.activation, x0 * std::exp(-u))) {
      return u;
    }
  }
}

const char* event_name(EventTag tag) {
  switch (tag) {
    case EventTag::kStart: return "start";
    case EventTag::kPre: return "pre";
    case EventTag::kPost: return "post";
    case EventTag::kThreshold: return "threshold";
    case EventTag::kSample: return "sample";
    case EventTag::kEnd: return "end";
  }
  return "?";
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void validate(const SimConfig& c) {
  validate(c.neuron);
  validate(c.kernel);
  validate(c.rule);
  if (!(c.alpha > 0.0) || !std::isfinite(c.alpha)) throw std::invalid_argument("alpha must be positive");
  if (!(c.horizon > 0.0) || !std::isfinite(c.horizon)) throw std::invalid_argument("horizon must be positive");
  if (!(c.max_step > 0.0)) throw std::invalid_argument("max_step must be positive");
  if (!(c.sample_interval >= 0.0)) throw std::invalid_argument("sample_interval must be non-negative");
  if (!std::isfinite(c.x0) || !std::isfinite(c.w0)) throw std::invalid_argument("initial state must be finite");
  if (!(c.omega_p0 >= 0.0) || !(c.omega_d0 >= 0.0)) throw std::invalid_argument("initial Omega must be non-negative");
  const auto [lo, hi] = weight_domain(c.rule);
  if (c.w0 < lo || c.w0 > hi) throw std::invalid_argument("initial weight outside the rule's domain");
  for (const auto* m : {&c.forced_pre, &c.forced_post}) {
    if (*m && !(*m)->empty() && (*m)->times().back() > c.horizon) {
      throw std::invalid_argument("prescribed spike train extends past the horizon");
    }
  }
}

namespace {

RunResult simulate(const SimConfig& cfg, bool filtered) {
  validate(cfg);
  if (!filtered && !std::holds_alternative<AdditiveRule>(cfg.rule) &&
      !std::holds_alternative<GatedLinearRule>(cfg.rule)) {
    throw std::invalid_argument("unfiltered model supports the additive and gated-linear rules only");
  }
  const ClassMSpec& spec = cfg.kernel;
  RngStream pre_rng(derive_seed(cfg.seed, 1));
  RngStream post_rng(derive_seed(cfg.seed, 2));
  FullState st{cfg.x0, spec.initial, cfg.omega_p0, cfg.omega_d0, cfg.w0};
  RunResult res;

  auto record = [&](double t, EventTag tag) {
    res.trace.push_back({t, tag, st.x, st.z, st.omega_p, st.omega_d, st.w});
  };

  std::size_t pre_idx = 0;
  std::size_t post_idx = 0;
  auto draw_pre = [&](double now) {
    if (cfg.forced_pre) {
      return pre_idx < cfg.forced_pre->size() ? (*cfg.forced_pre)[pre_idx] : kInfinity;
    }
    return now + pre_rng.exponential(cfg.neuron.pre_rate);
  };
  auto draw_forced_post = [&]() {
    if (!cfg.forced_post) return kInfinity;
    return post_idx < cfg.forced_post->size() ? (*cfg.forced_post)[post_idx] : kInfinity;
  };

  auto advance = [&](double dt) {
    if (dt <= 0.0) return;
    for (const auto& piece : drift_pieces(spec, st.z, dt)) {
      if (filtered) {
        const OmegaPath path{st.omega_p, st.omega_d, piece.rate_p, piece.rate_d, cfg.alpha};
        st.w = integrate_weight(cfg.rule, path, st.w, piece.duration, cfg.max_step);
      } else {
        st.w = unfiltered_drift(cfg.rule, st.w, piece.rate_p, piece.rate_d, piece.duration);
      }
      st.omega_p = exp_filter_with_input(st.omega_p, cfg.alpha, piece.rate_p, piece.duration);
      st.omega_d = exp_filter_with_input(st.omega_d, cfg.alpha, piece.rate_d, piece.duration);
    }
    res.x_integral += -st.x * std::expm1(-dt);
    st.x *= std::exp(-dt);
    st.z = z_flow(spec, st.z, dt);
  };

  auto spike = [&](SpikeSource which) {
    if (!filtered) {
      const auto [p, d] = jump_outputs(spec, st.z, which);
      st.w = unfiltered_jump(cfg.rule, st.w, p, d);
    }
    st = apply_jump(spec, std::move(st), which, cfg.neuron.reset);
  };

  double t = 0.0;
  double t_pre = draw_pre(0.0);
  double t_post = draw_forced_post();
  std::uint64_t sample_k = 1;
  auto next_sample = [&]() {
    return cfg.sample_interval > 0.0 ? cfg.sample_interval * static_cast<double>(sample_k) : kInfinity;
  };
  record(0.0, EventTag::kStart);

  enum class Stop { kPre, kForcedPost, kPost, kThreshold, kSample, kHorizon, kWindow };
  while (true) {
    double bound = t + cfg.max_step;
    Stop stop = Stop::kWindow;
    auto take = [&](double when, Stop why) {
      if (when <= bound) {
        // Earlier entries win ties, so the order below is the tie-break order.
        if (when < bound || static_cast<int>(why) < static_cast<int>(stop)) {
          bound = when;
          stop = why;
        }
      }
    };
    take(cfg.horizon, Stop::kHorizon);
    take(next_sample(), Stop::kSample);
    take(t_post, Stop::kForcedPost);
    take(t_pre, Stop::kPre);
    const double change = next_drift_change(spec, st.z, bound - t);
    if (t + change < bound) {
      bound = t + change;
      stop = Stop::kThreshold;
    }
    if (!cfg.forced_post && bound > t) {
      if (auto u = next_post_spike(st.x, cfg.neuron, post_rng, bound - t); u && t + *u < bound) {
        if (t + *u == t) {
          const std::string why = "firing rate too high to resolve event times at t = " + format_real(t);
          if (!cfg.stop_on_liveness) throw LivenessViolation(why);
          res.stopped_early = why;
          break;
        }
        bound = t + *u;
        stop = Stop::kPost;
      }
    }
    advance(bound - t);
    t = bound;

    switch (stop) {
      case Stop::kPre:
        spike(SpikeSource::kPre);
        res.pre.push_back(t);
        ++pre_idx;
        t_pre = draw_pre(t);
        if (cfg.record_events) record(t, EventTag::kPre);
        break;
      case Stop::kForcedPost:
      case Stop::kPost:
        spike(SpikeSource::kPost);
        res.post.push_back(t);
        if (stop == Stop::kForcedPost) {
          ++post_idx;
          t_post = draw_forced_post();
        }
        if (cfg.record_events) record(t, EventTag::kPost);
        break;
      case Stop::kThreshold:
        if (cfg.record_events) record(t, EventTag::kThreshold);
        break;
      case Stop::kSample:
        record(t, EventTag::kSample);
        ++sample_k;
        break;
      case Stop::kHorizon:
      case Stop::kWindow:
        break;
    }
    if (stop == Stop::kPre || stop == Stop::kPost || stop == Stop::kForcedPost || stop == Stop::kThreshold) {
      if (++res.events > cfg.max_events) {
        const std::string why = "event ceiling " + std::to_string(cfg.max_events) + " reached at t = " +
                                format_real(t) + " before the horizon " + format_real(cfg.horizon);
        if (!cfg.stop_on_liveness) throw LivenessViolation(why);
        res.stopped_early = why;
        break;
      }
    }
    if (stop == Stop::kHorizon) {
      break;
    }
  }
  record(t, EventTag::kEnd);
  res.final_state = st;
  return res;
}

}  // namespace

RunResult run(const SimConfig& config) { return simulate(config, true); }

RunResult run_unfiltered(const SimConfig& config) { return simulate(config, false); }

void for_each_fast_segment(const ClassMSpec& spec, const NeuronSpec& neuron, double w, double x0, double horizon,
                           std::uint64_t seed, double max_step,
                           const std::function<void(double, std::span<const double>, double)>& fn) {
  RngStream pre_rng(derive_seed(seed, 1));
  RngStream post_rng(derive_seed(seed, 2));
  double x = x0;
  std::vector<double> z = spec.initial;
  double t = 0.0;
  double t_pre = pre_rng.exponential(neuron.pre_rate);
  while (t < horizon) {
    double bound = std::min({t + max_step, horizon, t_pre});
    bool is_pre = bound == t_pre;
    bool is_post = false;
    if (auto u = next_post_spike(x, neuron, post_rng, bound - t); u && t + *u < bound) {
      bound = t + *u;
      is_post = true;
      is_pre = false;
    }
    const double dt = bound - t;
    fn(x, z, dt);
    x *= std::exp(-dt);
    z = z_flow(spec, z, dt);
    t = bound;
    if (is_pre) {
      z = jump_z(spec, z, SpikeSource::kPre);
      x += w;
      t_pre = t + pre_rng.exponential(neuron.pre_rate);
    } else if (is_post) {
      z = jump_z(spec, z, SpikeSource::kPost);
      x -= potential_drop(neuron.reset, x);
    }
  }
}

std::pair<double, double> toy_closed_form(double target, double w0, double eps, double t) {
  if (!(eps > 0.0 && eps < 1.0)) {
    throw std::invalid_argument("toy_closed_form: eps must lie in (0, 1)");
  }
  const double omega = std::sqrt(1.0 - eps * eps);
  const double decay = (w0 - target) * std::exp(-eps * t);
  const double filtered = target + decay * (std::cos(omega * t) + eps / omega * std::sin(omega * t));
  const double direct = target + decay;
  return {filtered, direct};
}

std::vector<std::pair<double, double>> toy_integrate(double target, double w0, double eps,
                                                     const std::vector<double>& times, double step) {
  if (!(eps > 0.0) || !(step > 0.0)) {
    throw std::invalid_argument("toy_integrate: eps and step must be positive");
  }
  const double alpha = 2.0 * eps;
  // y = (W, Omega, Wbar)
  std::array<double, 3> y{w0, 0.0, w0};
  auto f = [&](const std::array<double, 3>& v) {
    return std::array<double, 3>{v[1], -alpha * v[1] + (target - v[0]), eps * (target - v[2])};
  };
  auto axpy = [](const std::array<double, 3>& a, double h, const std::array<double, 3>& b) {
    return std::array<double, 3>{a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2]};
  };
  std::vector<std::pair<double, double>> out;
  double t = 0.0;
  for (double target_t : times) {
    if (target_t < t) {
      throw std::invalid_argument("toy_integrate: times must be non-decreasing and non-negative");
    }
    const double span = target_t - t;
    const auto n = static_cast<long>(std::ceil(span / step));
    const double h = n > 0 ? span / static_cast<double>(n) : 0.0;
    for (long k = 0; k < n; ++k) {
      const auto k1 = f(y);
      const auto k2 = f(axpy(y, 0.5 * h, k1));
      const auto k3 = f(axpy(y, 0.5 * h, k2));
      const auto k4 = f(axpy(y, h, k3));
      for (int i = 0; i < 3; ++i) {
        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      }
    }
    t = target_t;
    out.emplace_back(y[0], y[2]);
  }
  return out;
}

namespace {

std::vector<std::string> column_labels(const std::vector<std::string>& labels, std::size_t dim) {
  if (labels.size() == dim) return labels;
  std::vector<std::string> out;
  for (std::size_t i = 0; i < dim; ++i) out.push_back("z" + std::to_string(i));
  return out;
}

}  // namespace

void write_trace_csv(std::ostream& os, const std::vector<std::string>& labels,
                     const std::vector<TraceRecord>& trace) {
  const std::size_t dim = trace.empty() ? labels.size() : trace.front().z.size();
  os << "t,event,x";
  for (const auto& l : column_labels(labels, dim)) os << ',' << l;
  os << ",omega_p,omega_d,w\n";
  for (const auto& r : trace) {
    os << format_real(r.t) << ',' << event_name(r.tag) << ',' << format_real(r.x);
    for (double v : r.z) os << ',' << format_real(v);
    os << ',' << format_real(r.omega_p) << ',' << format_real(r.omega_d) << ',' << format_real(r.w) << '\n';
  }
}

void write_trace_jsonl(std::ostream& os, const std::vector<std::string>& labels,
                       const std::vector<TraceRecord>& trace) {
  const std::size_t dim = trace.empty() ? labels.size() : trace.front().z.size();
  const auto names = column_labels(labels, dim);
  // Non-finite values (clock coordinates before the first spike) are written as strings.
  auto real = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return format_real(v);
  };
  for (const auto& r : trace) {
    nlohmann::ordered_json j;
    j["t"] = real(r.t);
    j["event"] = event_name(r.tag);
    j["x"] = real(r.x);
    for (std::size_t i = 0; i < r.z.size(); ++i) j[names[i]] = real(r.z[i]);
    j["omega_p"] = real(r.omega_p);
    j["omega_d"] = real(r.omega_d);
    j["w"] = real(r.w);
    os << j.dump() << '\n';
  }
}

}  // namespace stdpsim
