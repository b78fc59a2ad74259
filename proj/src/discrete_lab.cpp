#include "stdpsim/discrete_lab.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/binomial.hpp>

#include "json.hpp"
#include "stdpsim/simulator.hpp"

namespace stdpsim {

namespace {

struct Channel {
  DiscreteEvent tag;
  int index;  // z coordinate for kLeakZ
  double rate;
};

// Transitions of the fast process at frozen weight w.
std::vector<Channel> fast_channels(const DiscreteState& s, const DiscreteParams& p, long w) {
  std::vector<Channel> out;
  const auto x = static_cast<double>(s.x);
  out.push_back({DiscreteEvent::kLeakX, -1, x});
  out.push_back({DiscreteEvent::kPost, -1, p.beta * x});
  out.push_back({DiscreteEvent::kPre, -1, p.lambda});
  if (std::any_of(p.k0.begin(), p.k0.end(), [](long v) { return v != 0; })) {
    out.push_back({DiscreteEvent::kClock, -1, 1.0});
  }
  for (std::size_t j = 0; j < s.z.size(); ++j) {
    out.push_back({DiscreteEvent::kLeakZ, static_cast<int>(j), p.gamma[j] * static_cast<double>(s.z[j])});
  }
  (void)w;
  return out;
}

void add_vector(std::vector<long>& z, const std::vector<long>& k) {
  for (std::size_t j = 0; j < z.size(); ++j) z[j] += k[j];
}

void apply_fast(DiscreteState& s, const DiscreteParams& p, const Channel& c, long w) {
  switch (c.tag) {
    case DiscreteEvent::kLeakX: s.x -= 1; break;
    case DiscreteEvent::kPost:
      s.x -= 1;
      add_vector(s.z, p.k2);
      break;
    case DiscreteEvent::kPre:
      s.x += w;
      add_vector(s.z, p.k1);
      break;
    case DiscreteEvent::kClock: add_vector(s.z, p.k0); break;
    case DiscreteEvent::kLeakZ: s.z[static_cast<std::size_t>(c.index)] -= 1; break;
    default: throw std::logic_error("not a fast-process transition");
  }
  if (s.x < 0 || std::any_of(s.z.begin(), s.z.end(), [](long v) { return v < 0; })) {
    throw std::logic_error("integer coordinate became negative");
  }
}

const Channel& pick(const std::vector<Channel>& channels, double r) {
  for (const auto& c : channels) {
    if (r < c.rate) return c;
    r -= c.rate;
  }
  // Rounding can leave r just above the last positive rate.
  for (auto it = channels.rbegin(); it != channels.rend(); ++it) {
    if (it->rate > 0.0) return *it;
  }
  throw std::logic_error("no channel with positive rate");
}

double total_rate(const std::vector<Channel>& channels) {
  double t = 0.0;
  for (const auto& c : channels) t += c.rate;
  return t;
}

// Accumulates time integrals of several functionals over equal-length batches.
class BatchAccumulator {
 public:
  BatchAccumulator(double horizon, int batches, std::size_t functionals)
      : width_(horizon / batches), sums_(static_cast<std::size_t>(batches), std::vector<double>(functionals, 0.0)) {}

  template <class F>
  void add(double start, double length, F&& values) {
    double t = start;
    const double end = start + length;
    while (t < end) {
      auto b = static_cast<std::size_t>(t / width_);
      b = std::min(b, sums_.size() - 1);
      const double stop = std::min(end, width_ * static_cast<double>(b + 1));
      const double len = (b + 1 == sums_.size()) ? end - t : stop - t;
      auto& row = sums_[b];
      for (std::size_t i = 0; i < row.size(); ++i) row[i] += values(i) * len;
      t += len;
      if (len <= 0.0) break;
    }
  }

  BatchedMean result(std::size_t i) const {
    const auto n = static_cast<double>(sums_.size());
    double sum = 0.0, sq = 0.0;
    for (const auto& row : sums_) {
      const double m = row[i] / width_;
      sum += m;
      sq += m * m;
    }
    const double mean = sum / n;
    const double var = n > 1.0 ? std::max(0.0, (sq - n * mean * mean) / (n - 1.0)) : 0.0;
    return {mean, std::sqrt(var / n)};
  }

 private:
  double width_;
  std::vector<std::vector<double>> sums_;
};

}  // namespace

DiscreteParams DiscreteParams::calcium(double lambda, double beta, double gamma, long c1, long c2, long w) {
  DiscreteParams p;
  p.lambda = lambda;
  p.beta = beta;
  p.gamma = {gamma};
  p.k0 = {0};
  p.k1 = {c1};
  p.k2 = {c2};
  p.w = w;
  return p;
}

bool DiscreteParams::is_calcium() const { return gamma.size() == 1 && k0.size() == 1 && k0[0] == 0; }

void validate(const DiscreteParams& p) {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("discrete parameters: ") + what);
  };
  need(std::isfinite(p.lambda) && p.lambda >= 0.0, "lambda must be non-negative");
  need(std::isfinite(p.beta) && p.beta >= 0.0, "beta must be non-negative");
  need(std::isfinite(p.mu) && p.mu >= 0.0, "mu must be non-negative");
  need(!p.gamma.empty(), "gamma must not be empty");
  need(p.k0.size() == p.gamma.size() && p.k1.size() == p.gamma.size() && p.k2.size() == p.gamma.size(),
       "jump vectors must match gamma in length");
  for (double g : p.gamma) need(std::isfinite(g) && g >= 0.0, "gamma must be non-negative");
  for (const auto* k : {&p.k0, &p.k1, &p.k2}) {
    for (long v : *k) need(v >= 0, "jump quanta must be non-negative");
  }
  need(p.a_p >= 0 && p.a_d >= 0 && p.w >= 0, "A_p, A_d and w must be non-negative integers");
}

const char* discrete_event_name(DiscreteEvent e) {
  switch (e) {
    case DiscreteEvent::kLeakX: return "leak_x";
    case DiscreteEvent::kLeakZ: return "leak_z";
    case DiscreteEvent::kClock: return "clock";
    case DiscreteEvent::kPre: return "pre";
    case DiscreteEvent::kPost: return "post";
    case DiscreteEvent::kPotentiate: return "potentiate";
    case DiscreteEvent::kDepress: return "depress";
    case DiscreteEvent::kLeakW: return "leak_w";
    case DiscreteEvent::kAbsorbed: return "absorbed";
  }
  return "?";
}

CtmcStep ctmc_step(const DiscreteState& state, const DiscreteParams& params, RngStream& rng) {
  if (state.z.size() != params.dimension() || state.x < 0 ||
      std::any_of(state.z.begin(), state.z.end(), [](long v) { return v < 0; })) {
    throw std::invalid_argument("ctmc_step: invalid state");
  }
  const auto channels = fast_channels(state, params, params.w);
  const double total = total_rate(channels);
  CtmcStep out;
  out.next = state;
  if (!(total > 0.0)) {
    out.holding = kInfinity;
    out.tag = DiscreteEvent::kAbsorbed;
    return out;
  }
  out.holding = rng.exponential(total);
  const auto& c = pick(channels, rng.uniform() * total);
  apply_fast(out.next, params, c, params.w);
  out.tag = c.tag;
  return out;
}

FastCalciumResult simulate_fast_calcium(const DiscreteParams& params, double horizon, RngStream& rng,
                                        const FastCalciumOptions& options) {
  validate(params);
  if (!params.is_calcium()) throw std::invalid_argument("simulate_fast_calcium: needs the calcium form");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("horizon must be positive");
  if (options.batches < 1) throw std::invalid_argument("batches must be positive");

  const std::size_t nu = options.u_grid.size();
  BatchAccumulator acc(horizon, options.batches, 2 + nu);
  FastCalciumResult res;
  res.horizon = horizon;
  DiscreteState s{options.x0, {options.c0}, 0.0, 0.0, params.w};
  std::vector<double> powers(nu);
  double t = 0.0;
  if (options.record_trace) res.trace.push_back({0.0, s.x, s.z[0]});
  while (t < horizon) {
    auto step = ctmc_step(s, params, rng);
    const double len = std::min(step.holding, horizon - t);
    const auto c = s.z[0];
    for (std::size_t i = 0; i < nu; ++i) powers[i] = std::pow(options.u_grid[i], static_cast<double>(c));
    acc.add(t, len, [&](std::size_t i) {
      if (i == 0) return static_cast<double>(s.x);
      if (i == 1) return static_cast<double>(c);
      return powers[i - 2];
    });
    if (res.occupation.size() <= static_cast<std::size_t>(c)) res.occupation.resize(static_cast<std::size_t>(c) + 1);
    res.occupation[static_cast<std::size_t>(c)] += len;
    t += len;
    if (t < horizon) {
      s = std::move(step.next);
      ++res.events;
      if (options.record_trace) res.trace.push_back({t, s.x, s.z[0]});
    }
  }
  for (auto& v : res.occupation) v /= horizon;
  res.mean_x = acc.result(0);
  res.mean_c = acc.result(1);
  for (std::size_t i = 0; i < nu; ++i) res.pgf.push_back(acc.result(2 + i));
  return res;
}

double pgf_delta(const DiscreteParams& p, double u, double s, bool expand_from_zero) {
  const double v = u - 1.0;
  const double g = p.gamma[0];
  const long c2 = p.c2();
  const double first = std::pow(1.0 + v * std::exp(-g * s), static_cast<double>(p.c1()));
  // p2(s, k) = beta binom(C2, k) (e^{-gamma k s} - e^{-(beta+1) s}) / (beta + 1 - gamma k)
  auto p2 = [&](long k) {
    const double binom = boost::math::binomial_coefficient<double>(static_cast<unsigned>(c2), static_cast<unsigned>(k));
    const double delta = p.beta + 1.0 - g * static_cast<double>(k);
    const double tail = std::exp(-(p.beta + 1.0) * s);
    if (std::abs(delta) < 1e-9) {
      return p.beta * binom * s * tail;
    }
    return p.beta * binom * tail * std::expm1(delta * s) / delta;
  };
  double second = 1.0;
  long k = 1;
  if (expand_from_zero) {
    second = 1.0 - p2(0);
    k = 0;
  }
  double vk = expand_from_zero ? 1.0 : v;
  for (; k <= c2; ++k) {
    second += vk * p2(k);
    vk *= v;
  }
  return first * std::pow(second, static_cast<double>(p.w));
}

PgfValue analytic_pgf(const DiscreteParams& params, double u) {
  validate(params);
  if (!params.is_calcium()) throw std::invalid_argument("analytic_pgf: needs the calcium form");
  if (!(u >= 0.0 && u <= 1.0)) throw std::invalid_argument("analytic_pgf: u must lie in [0, 1]");
  const double g = params.gamma[0];
  if (!(g > 0.0)) throw std::invalid_argument("analytic_pgf: gamma must be positive");
  PgfValue out;
  // 1 - Delta is a finite sum of exponentials decaying at least like e^{-min(gamma, beta+1) s}
  // (times s on the singular branch), so beyond S the tail is below e^{-50} times a modest constant.
  out.truncation = std::max(50.0 / g, 50.0 / (params.beta + 1.0));
  if (u == 1.0) {
    out.value = 1.0;
    return out;
  }
  auto integrand = [&](double s) { return 1.0 - pgf_delta(params, u, s); };
  double error = 0.0;
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, out.truncation, 20, 1e-13, &error);
  out.value = std::exp(-params.lambda * integral);
  out.error_estimate = params.lambda * error;
  return out;
}

std::pair<double, double> fast_calcium_means(const DiscreteParams& p) {
  const double mx = p.lambda * static_cast<double>(p.w) / (p.beta + 1.0);
  const double mc = p.lambda / p.gamma[0] *
                    (static_cast<double>(p.c1()) + static_cast<double>(p.c2()) * p.beta * static_cast<double>(p.w) /
                                                       (p.beta + 1.0));
  return {mx, mc};
}

void validate(const DiscreteFullConfig& cfg) {
  const auto& p = cfg.params;
  validate(p);
  if (!p.is_calcium()) throw std::invalid_argument("run_discrete_full: needs the calcium form");
  if (!(cfg.alpha > 0.0) || !std::isfinite(cfg.alpha) || !(cfg.horizon > 0.0) || !std::isfinite(cfg.horizon)) {
    throw std::invalid_argument("run_discrete_full: alpha and horizon must be positive");
  }
  if (!(cfg.drive.rate_p >= 0.0) || !(cfg.drive.rate_d >= 0.0)) {
    throw std::invalid_argument("run_discrete_full: drive rates must be non-negative");
  }
  if (!(cfg.sample_interval >= 0.0)) throw std::invalid_argument("run_discrete_full: sample_interval must be non-negative");
  const auto& s = cfg.initial;
  if ((!s.z.empty() && s.z.size() != p.dimension()) || s.x < 0 || s.w < 0 || (!s.z.empty() && s.z[0] < 0) ||
      !(s.omega_p >= 0.0) || !(s.omega_d >= 0.0)) {
    throw std::invalid_argument("run_discrete_full: invalid initial state");
  }
}

DiscreteRunResult run_discrete_full(const DiscreteFullConfig& cfg) {
  validate(cfg);
  const auto& p = cfg.params;
  DiscreteState s = cfg.initial;
  if (s.z.empty()) s.z.assign(p.dimension(), 0);
  RngStream rng(derive_seed(cfg.seed, 7));
  DiscreteRunResult res;
  auto record = [&](double t, const char* tag) { res.trace.push_back({t, tag, s}); };
  auto h = [&](long c) {
    const auto cc = static_cast<double>(c);
    return std::pair{cc >= cfg.drive.theta_p ? cfg.drive.rate_p : 0.0, cc >= cfg.drive.theta_d ? cfg.drive.rate_d : 0.0};
  };
  auto relax = [&](double dt) {
    const auto [hp, hd] = h(s.z[0]);
    s.omega_p = exp_filter_with_input(s.omega_p, cfg.alpha, hp, dt);
    s.omega_d = exp_filter_with_input(s.omega_d, cfg.alpha, hd, dt);
    res.x_integral += static_cast<double>(s.x) * dt;
    res.z_integral += static_cast<double>(s.z[0]) * dt;
  };

  double t = 0.0;
  std::uint64_t sample_k = 1;
  std::uint64_t candidates = 0;
  record(0.0, "start");
  while (true) {
    const double next_sample =
        cfg.sample_interval > 0.0 ? cfg.sample_interval * static_cast<double>(sample_k) : kInfinity;
    const double bound = std::min(cfg.horizon, next_sample);
    auto channels = fast_channels(s, p, s.w);
    channels.push_back({DiscreteEvent::kLeakW, -1, p.mu * static_cast<double>(s.w)});
    const double base = total_rate(channels);
    const auto [hp, hd] = h(s.z[0]);
    const bool can_depress = s.w >= p.a_d;
    // Omega relaxes monotonically toward h/alpha, so the larger end bounds its rate.
    const double env_p = cfg.filtered ? std::max(s.omega_p, hp / cfg.alpha) : hp;
    const double env_d = can_depress ? (cfg.filtered ? std::max(s.omega_d, hd / cfg.alpha) : hd) : 0.0;
    const double total = base + env_p + env_d;
    const double tau = total > 0.0 ? rng.exponential(total) : kInfinity;
    if (t + tau >= bound) {
      relax(bound - t);
      t = bound;
      if (bound == cfg.horizon) break;
      record(t, "sample");
      ++sample_k;
      continue;
    }
    relax(tau);
    t += tau;
    if (++candidates > 50 * cfg.max_events) {
      throw LivenessViolation("discrete model: candidate ceiling reached at t = " + format_real(t));
    }
    double r = rng.uniform() * total;
    const char* tag = nullptr;
    if (r < base) {
      const auto& c = pick(channels, r);
      if (c.tag == DiscreteEvent::kLeakW) {
        s.w -= 1;
      } else {
        apply_fast(s, p, c, s.w);
      }
      tag = discrete_event_name(c.tag);
    } else if ((r -= base) < env_p) {
      const double rate = cfg.filtered ? s.omega_p : hp;
      if (rng.uniform() * env_p < rate) {
        s.w += p.a_p;
        tag = "potentiate";
      }
    } else {
      const double rate = cfg.filtered ? s.omega_d : hd;
      if (rng.uniform() * env_d < rate) {
        s.w -= p.a_d;
        tag = "depress";
      }
    }
    if (tag != nullptr) {
      if (s.w < 0) throw std::logic_error("weight became negative");
      if (++res.events > cfg.max_events) {
        throw LivenessViolation("discrete model: event ceiling reached at t = " + format_real(t));
      }
      if (cfg.record_events) record(t, tag);
    }
  }
  record(t, "end");
  res.final_state = s;
  return res;
}

void write_discrete_trace_csv(std::ostream& os, const std::vector<DiscreteTraceRecord>& trace) {
  const std::size_t dim = trace.empty() ? 1 : trace.front().state.z.size();
  os << "t,event,x";
  for (std::size_t j = 0; j < dim; ++j) os << ",z" << j;
  os << ",omega_p,omega_d,w\n";
  for (const auto& r : trace) {
    os << format_real(r.t) << ',' << r.tag << ',' << r.state.x;
    for (long v : r.state.z) os << ',' << v;
    os << ',' << format_real(r.state.omega_p) << ',' << format_real(r.state.omega_d) << ',' << r.state.w << '\n';
  }
}

PgfReport pgf_report(const DiscreteParams& params, const std::vector<double>& u_grid) {
  PgfReport rep{params, u_grid, {}};
  for (double u : u_grid) rep.values.push_back(analytic_pgf(params, u));
  return rep;
}

void write_pgf_report(std::ostream& os, const PgfReport& r) {
  nlohmann::ordered_json j;
  j["parameters"] = {{"lambda", r.params.lambda}, {"beta", r.params.beta},   {"gamma", r.params.gamma[0]},
                     {"c1", r.params.c1()},       {"c2", r.params.c2()},     {"w", r.params.w}};
  j["u"] = r.u;
  auto& vals = j["pgf"] = nlohmann::ordered_json::array();
  auto& errs = j["quadrature_error"] = nlohmann::ordered_json::array();
  for (const auto& v : r.values) {
    vals.push_back(v.value);
    errs.push_back(v.error_estimate);
  }
  j["truncation"] = r.values.empty() ? 0.0 : r.values.front().truncation;
  os << j.dump(2) << '\n';
}

}  // namespace stdpsim
