#include "stdpsim/validation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <boost/math/quadrature/gauss.hpp>

#include "json.hpp"
#include "stdpsim/discrete_lab.hpp"

namespace stdpsim {

namespace {

std::string fmt(double v, int digits = 3) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

unsigned thread_count(const ValidationOptions& o) {
  if (o.threads > 0) return o.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

StdpCurve random_exp(RngStream& rng) {
  return StdpCurve::exponential(0.2 + rng.uniform(), 0.3 + 2.0 * rng.uniform());
}

ChannelCurves random_channel(RngStream& rng, bool direct) {
  return {random_exp(rng), random_exp(rng), direct ? 0.1 * rng.uniform() : 0.0, direct ? 0.1 * rng.uniform() : 0.0};
}

SpikeTrain restrict_to(const SpikeTrain& m, double t) {
  SpikeTrain out;
  for (double s : m) {
    if (s <= t) out.push_back(s);
  }
  return out;
}

const char* kRuleNames[] = {"all-to-all", "nearest-symmetric", "nearest-reduced", "suppression",
                            "triplet",    "calcium",           "voltage"};

// ---------------------------------------------------------------------------

CriterionResult pgf_agreement(const ValidationOptions& o) {
  const double horizon = o.quick ? 2e4 : 1e5;
  const std::vector<double> grid{0.0, 0.25, 0.5, 0.75};
  double worst = 0.0;
  double max_quadrature = 0.0;
  const auto start = std::chrono::steady_clock::now();
  for (double gamma : {1.0, 2.0}) {
    const auto p = DiscreteParams::calcium(1.0, 1.0, gamma, 1, 1, 2);
    RngStream rng(derive_seed(o.seed, 100 + static_cast<std::uint64_t>(gamma)));
    FastCalciumOptions opt;
    opt.u_grid = grid;
    const auto mc = simulate_fast_calcium(p, horizon, rng, opt);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto exact = analytic_pgf(p, grid[i]);
      max_quadrature = std::max(max_quadrature, exact.error_estimate);
      worst = std::max(worst, std::abs(mc.pgf[i].mean - exact.value) / mc.pgf[i].std_error);
    }
  }
  // Runtime budget is for one single-threaded pass of both parameter sets.
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CriterionResult r;
  r.passed = worst <= 3.0 && secs <= 60.0 && max_quadrature <= 1e-10;
  r.measured = "max |MC - pgf| = " + fmt(worst) + " SE over u in {0,.25,.5,.75}, gamma in {1,2}; quadrature err " +
               fmt(max_quadrature) + "; " + fmt(secs) + " s";
  r.limit = "3 SE, T = " + fmt(horizon) + ", <= 60 s";
  return r;
}

CriterionResult mean_identities(const ValidationOptions& o) {
  const double horizon = o.quick ? 2e4 : 1e5;
  const auto p = DiscreteParams::calcium(1.0, 1.0, 1.0, 1, 1, 2);
  const auto [ex, ec] = fast_calcium_means(p);
  RngStream rng(derive_seed(o.seed, 200));
  const auto mc = simulate_fast_calcium(p, horizon, rng);
  const double dx = std::abs(mc.mean_x.mean - ex) / ex;
  const double dc = std::abs(mc.mean_c.mean - ec) / ec;
  CriterionResult r;
  r.passed = dx <= 0.02 && dc <= 0.02;
  r.measured = "mean x = " + fmt(mc.mean_x.mean, 5) + " (exact " + fmt(ex) + "), mean c = " + fmt(mc.mean_c.mean, 5) +
               " (exact " + fmt(ec) + ")";
  r.limit = "2% relative, T = " + fmt(horizon);
  return r;
}

CriterionResult oracle_equivalence(const ValidationOptions& o) {
  const auto start = std::chrono::steady_clock::now();
  RngStream rng(derive_seed(o.seed, 300));
  const int pairs = 200;
  double worst = 0.0;
  std::string worst_rule = "-";
  long comparisons = 0;
  for (int trial = 0; trial < pairs; ++trial) {
    const double horizon = 20.0;
    const auto pre = RandomSetup::train(rng, 0.5 + 2.5 * rng.uniform(), horizon, 50);
    const auto post = RandomSetup::train(rng, 0.5 + 2.5 * rng.uniform(), horizon, 50);
    const double alpha = 0.1 + 2.0 * rng.uniform();
    std::vector<double> times{rng.uniform() * horizon, rng.uniform() * horizon, horizon};
    if (!pre.empty()) times.push_back(pre[pre.size() - 1]);
    if (!post.empty()) times.push_back(post[post.size() - 1]);
    for (int which = 0; which < 7; ++which) {
      const auto kernel = RandomSetup::kernel(rng, which);
      std::vector<ClassMSpec> forms{builtin_spec(kernel)};
      if (which == 1 || which == 2) forms.push_back(builtin_spec(kernel, NearestForm::kClocks));
      for (double t : times) {
        const auto pre_t = restrict_to(pre, t);
        const auto post_t = restrict_to(post, t);
        const auto measure = kernel_measure(kernel, pre_t, post_t, t);
        const auto [rp, rd] = filter_kernel_measure(measure, alpha, t);
        for (const auto& spec : forms) {
          const auto [ep, ed] = drive_omega(spec, pre, post, alpha, t);
          const double e = std::max(rel_err(ep, rp), rel_err(ed, rd));
          ++comparisons;
          if (e > worst || std::isnan(e)) {
            worst = std::isnan(e) ? kInfinity : e;
            worst_rule = kRuleNames[which];
          }
        }
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CriterionResult r;
  r.passed = worst <= 1e-9 && secs <= 30.0;
  r.measured = "max relative error " + fmt(worst) + " (" + worst_rule + ") over " + std::to_string(comparisons) +
               " comparisons, 7 rules; " + fmt(secs) + " s";
  r.limit = "1e-9, 200 train pairs, <= 30 s";
  return r;
}

CriterionResult filter_exactness(const ValidationOptions& o) {
  RngStream rng(derive_seed(o.seed, 400));
  const int instances = 10'000;
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const double alpha = 0.05 + 5.0 * rng.uniform();
    const double dt = 5.0 * rng.uniform();
    const FilterState h0{10.0 * rng.uniform() - 2.0, alpha};
    std::vector<FilterJump> jumps(rng.below(6));
    for (auto& j : jumps) j = {dt * rng.uniform(), 3.0 * rng.uniform()};
    std::sort(jumps.begin(), jumps.end(), [](auto& a, auto& b) { return a.offset < b.offset; });

    const double v = exp_filter_advance(h0, dt, jumps).value;
    double oracle = h0.value * std::exp(-alpha * dt);
    for (const auto& j : jumps) oracle += j.weight * std::exp(-alpha * (dt - j.offset));
    worst = std::max(worst, rel_err(v, oracle));

    // Semigroup: split the window at s.
    const double s = dt * rng.uniform();
    std::vector<FilterJump> first, second;
    for (const auto& j : jumps) (j.offset <= s ? first : second).push_back(j);
    for (auto& j : second) j.offset -= s;
    const double split = exp_filter_advance(exp_filter_advance(h0, s, first), dt - s, second).value;
    worst = std::max(worst, rel_err(split, v));

    // Jump composition: a jump equals two simultaneous jumps with the same total mass.
    if (!jumps.empty()) {
      auto doubled = jumps;
      const double frac = rng.uniform();
      const FilterJump extra{jumps[0].offset, (1.0 - frac) * jumps[0].weight};
      doubled[0].weight *= frac;
      doubled.insert(doubled.begin() + 1, extra);
      worst = std::max(worst, rel_err(exp_filter_advance(h0, dt, doubled).value, v));
    }

    // Constant input: flow property.
    const double input = 3.0 * rng.uniform();
    const double whole = exp_filter_with_input(h0.value, alpha, input, dt);
    const double parts = exp_filter_with_input(exp_filter_with_input(h0.value, alpha, input, s), alpha, input, dt - s);
    worst = std::max(worst, rel_err(parts, whole));
  }
  CriterionResult r;
  r.passed = worst <= 1e-12;
  r.measured = "max relative deviation " + fmt(worst) + " over " + std::to_string(instances) + " instances";
  r.limit = "1e-12";
  return r;
}

CriterionResult toy_model(const ValidationOptions&) {
  std::vector<double> times;
  for (int i = 1; i <= 100; ++i) times.push_back(0.2 * i);
  const auto num = toy_integrate(1.0, 0.0, 0.5, times, 1e-3);
  double worst_w = 0.0, worst_bar = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto exact = toy_closed_form(1.0, 0.0, 0.5, times[i]);
    worst_w = std::max(worst_w, std::abs(num[i].first - exact.first));
    worst_bar = std::max(worst_bar, std::abs(num[i].second - exact.second));
  }
  CriterionResult r;
  r.passed = worst_w <= 1e-6 && worst_bar <= 1e-6;
  r.measured = "max abs error W " + fmt(worst_w) + ", Wbar " + fmt(worst_bar) + " at 100 points in (0, 20]";
  r.limit = "1e-6";
  return r;
}

CriterionResult domain_invariance(const ValidationOptions& o) {
  const int per_rule = o.quick ? 20 : 100;
  const char* names[] = {"additive", "bounded-multiplicative", "excitatory", "gated-linear"};
  struct Outcome {
    double violation = 0.0;
    bool truncated = false;
    std::string error;
  };
  std::vector<Outcome> out(4 * static_cast<std::size_t>(per_rule));
  parallel_for(out.size(), thread_count(o), [&](std::size_t i) {
    const int rule_id = static_cast<int>(i) / per_rule;
    RngStream rng(derive_seed(o.seed, 600 + i));
    SimConfig c;
    c.neuron = RandomSetup::neuron(rng);
    c.kernel = builtin_spec(RandomSetup::kernel(rng, static_cast<int>(rng.below(7))));
    c.alpha = 0.2 + 3.0 * rng.uniform();
    c.horizon = 20.0;
    c.seed = derive_seed(o.seed, 10'000 + i);
    c.x0 = rng.uniform();
    c.sample_interval = 0.1;
    // Unbounded weight domains allow runaway firing; the trace up to the ceiling is still checked.
    c.max_events = 200'000;
    c.stop_on_liveness = true;
    switch (rule_id) {
      case 0: c.rule = AdditiveRule{}; c.w0 = 2.0 * rng.uniform() - 1.0; break;
      case 1: {
        const double exps[] = {0.5, 1.0, 2.0};
        c.rule = BoundedMultiplicativeRule{0.0, 1.0, rng.uniform(), exps[rng.below(3)], rng.uniform()};
        c.w0 = rng.uniform();
        break;
      }
      case 2: c.rule = ExcitatoryRule{}; c.w0 = 2.0 * rng.uniform(); break;
      default: c.rule = GatedLinearRule{0.5 + rng.uniform(), 0.5 + rng.uniform()}; c.w0 = 2.0 * rng.uniform() - 1.0;
    }
    const auto [lo, hi] = weight_domain(c.rule);
    try {
      const auto res = run(c);
      out[i].truncated = res.stopped_early.has_value();
      for (const auto& rec : res.trace) {
        const double v = std::isfinite(rec.w) ? std::max({lo - rec.w, rec.w - hi, 0.0}) : kInfinity;
        out[i].violation = std::max(out[i].violation, v);
      }
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
  });
  CriterionResult r;
  r.passed = true;
  std::ostringstream m;
  for (int k = 0; k < 4; ++k) {
    double worst = 0.0;
    int errors = 0;
    int truncated = 0;
    for (int j = 0; j < per_rule; ++j) {
      const auto& x = out[static_cast<std::size_t>(k * per_rule + j)];
      worst = std::max(worst, x.violation);
      errors += !x.error.empty();
      truncated += x.truncated;
    }
    r.passed = r.passed && worst <= 1e-9 && errors == 0;
    m << (k ? "; " : "") << names[k] << ": max violation " << fmt(worst) << ", " << errors << " aborted";
    if (truncated) m << ", " << truncated << " stopped at the event ceiling";
  }
  r.measured = m.str();
  r.limit = "1e-9, " + std::to_string(per_rule) + " runs per rule";
  return r;
}

CriterionResult thinning_ks(const ValidationOptions& o) {
  const std::size_t n = o.quick ? 20'000 : 100'000;
  const double b = 2.0;
  const double horizon = 12.0;
  SimConfig base;
  base.neuron = NeuronSpec{0.0, LinearActivation{b, 0.0}, FullReset{}};
  base.kernel = builtin_spec(PairBasedSpec::hebbian(StdpCurve::exponential(1.0, 1.0), StdpCurve::exponential(1.0, 1.0)));
  base.x0 = 1.0;
  base.horizon = horizon;
  base.record_events = false;
  std::vector<double> first(n);
  parallel_for(n, thread_count(o), [&](std::size_t i) {
    SimConfig c = base;
    c.seed = derive_seed(o.seed, 700'000 + i);
    c.max_events = 1;  // only the first post spike matters
    try {
      const auto res = run(c);
      first[i] = res.post.empty() ? kInfinity : res.post[0];
    } catch (const LivenessViolation&) {
      first[i] = kInfinity;  // unreachable: there is at most one event before x reaches 0
    }
  });
  std::sort(first.begin(), first.end());
  // F(t) = 1 - exp(-b (1 - e^{-t})), with the mass beyond the horizon censored.
  auto cdf = [&](double t) { return -std::expm1(-b * -std::expm1(-t)); };
  double d = 0.0;
  const auto nn = static_cast<double>(n);
  for (std::size_t i = 0; i < n && std::isfinite(first[i]); ++i) {
    const double f = cdf(first[i]);
    d = std::max({d, std::abs(static_cast<double>(i + 1) / nn - f), std::abs(f - static_cast<double>(i) / nn)});
  }
  const auto finite = static_cast<double>(std::count_if(first.begin(), first.end(), [](double v) { return std::isfinite(v); }));
  d = std::max(d, std::abs(finite / nn - cdf(horizon)));
  const double critical = 1.6276 / std::sqrt(nn);
  CriterionResult r;
  r.passed = d <= critical;
  r.measured = "D = " + fmt(d, 4) + " with " + std::to_string(n) + " samples, P(no spike) empirical " +
               fmt(1.0 - finite / nn, 4) + " vs " + fmt(1.0 - cdf(horizon), 4);
  r.limit = "1% critical value " + fmt(critical, 4);
  return r;
}

CriterionResult liveness(const ValidationOptions& o) {
  const std::size_t configs = o.quick ? 200 : 1000;
  std::vector<std::uint64_t> events(configs);
  std::vector<std::string> errors(configs);
  parallel_for(configs, thread_count(o), [&](std::size_t i) {
    RngStream rng(derive_seed(o.seed, 800'000 + i));
    SimConfig c;
    c.neuron = RandomSetup::neuron(rng);
    c.neuron.pre_rate = 0.5 + 4.5 * rng.uniform();
    c.kernel = builtin_spec(RandomSetup::kernel(rng, static_cast<int>(rng.below(7))));
    c.alpha = 0.2 + 3.0 * rng.uniform();
    c.horizon = 100.0;
    c.seed = derive_seed(o.seed, 900'000 + i);
    c.x0 = 2.0 * rng.uniform() - 1.0;
    c.w0 = 2.0 * rng.uniform() - 0.5;
    c.record_events = false;
    // Bounded weights: with an unbounded domain a Hebbian feedback loop can grow the
    // weight, and with it the firing rate, exponentially over the horizon.
    const double a_d = -rng.uniform();
    const double a_p = 0.5 + 1.5 * rng.uniform();
    c.rule = BoundedMultiplicativeRule{a_d, a_p, a_d + (a_p - a_d) * rng.uniform(), 0.5 + 1.5 * rng.uniform(),
                                       rng.uniform()};
    c.w0 = a_d + (a_p - a_d) * rng.uniform();
    try {
      const auto res = run(c);
      events[i] = res.events;
      if (res.trace.back().t != c.horizon) errors[i] = "stopped early";
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  const auto failed = std::count_if(errors.begin(), errors.end(), [](const auto& e) { return !e.empty(); });
  const auto most = *std::max_element(events.begin(), events.end());
  CriterionResult r;
  r.passed = failed == 0;
  r.measured = std::to_string(configs - static_cast<std::size_t>(failed)) + "/" + std::to_string(configs) +
               " reached T = 100; most events in one run " + std::to_string(most);
  r.limit = "all runs, event ceiling 1e7";
  return r;
}

bool same_measure_before(const KernelMeasure& a, const KernelMeasure& b, double t) {
  std::vector<KernelAtom> ab;
  for (const auto& x : b.atoms) {
    if (x.time <= t) ab.push_back(x);
  }
  if (a.atoms != ab) return false;
  std::vector<DensitySegment> sb;
  for (auto s : b.segments) {
    if (s.start < t) {
      s.end = std::min(s.end, t);
      sb.push_back(s);
    }
  }
  std::vector<DensitySegment> sa;
  for (const auto& s : a.segments) {
    if (s.start < s.end) sa.push_back(s);
  }
  std::erase_if(sb, [](const DensitySegment& s) { return !(s.start < s.end); });
  return sa == sb;
}

CriterionResult causality(const ValidationOptions& o) {
  RngStream rng(derive_seed(o.seed, 1000));
  const int cases = 500;
  int failures = 0;
  std::string first_failure;
  for (int which = 0; which < 7; ++which) {
    for (int k = 0; k < cases; ++k) {
      const auto kernel = RandomSetup::kernel(rng, which);
      const auto spec = builtin_spec(kernel);
      const double t = 10.0 * rng.uniform();
      const auto pre = RandomSetup::train(rng, 2.0 * rng.uniform() + 0.2, t, 30);
      const auto post = RandomSetup::train(rng, 2.0 * rng.uniform() + 0.2, t, 30);
      auto pre_ext = pre, post_ext = post;
      for (double s = t; (s += rng.exponential(2.0)) <= t + 5.0;) pre_ext.push_back(s);
      for (double s = t; (s += rng.exponential(2.0)) <= t + 5.0;) post_ext.push_back(s);
      // Future spikes may also land exactly one ulp after t.
      if (rng.below(4) == 0) pre_ext.push_back(std::nextafter(std::max(t, pre_ext.empty() ? t : pre_ext[pre_ext.size() - 1]), kInfinity));
      const double alpha = 0.1 + rng.uniform();
      const bool measure_ok =
          same_measure_before(kernel_measure(kernel, pre, post, t), kernel_measure(kernel, pre_ext, post_ext, t + 6.0), t);
      const bool engine_ok = drive_omega(spec, pre, post, alpha, t) == drive_omega(spec, pre_ext, post_ext, alpha, t);
      if (!measure_ok || !engine_ok) {
        if (failures++ == 0) first_failure = std::string(kRuleNames[which]) + (measure_ok ? " (engine)" : " (kernel)");
      }
    }
  }
  CriterionResult r;
  r.passed = failures == 0;
  r.measured = std::to_string(failures) + " of " + std::to_string(7 * cases) + " cases differ" +
               (failures ? ", first: " + first_failure : "");
  r.limit = "exact equality";
  return r;
}

CriterionResult generator_stationarity(const ValidationOptions& o) {
  const double horizon = o.quick ? 2e4 : 1e5;
  const int batches = 100;
  const CalciumSpec cal{1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0};
  const auto spec = builtin_spec(cal);
  const NeuronSpec neuron{1.0, LinearActivation{1.0, 0.0}, ConstantDrop{1.0}};
  const double w = 2.0;

  std::vector<TestFunction> fs{
      {[](const FastState& v) { return v.x; }, [](const FastState&) { return FastGradient{1.0, {0.0}}; }},
      {[](const FastState& v) { return v.z[0]; }, [](const FastState&) { return FastGradient{0.0, {1.0}}; }},
      {[](const FastState& v) { return v.x * v.x; }, [](const FastState& v) { return FastGradient{2.0 * v.x, {0.0}}; }},
      {[](const FastState& v) { return v.x * v.z[0]; },
       [](const FastState& v) { return FastGradient{v.z[0], {v.x}}; }},
  };
  const char* names[] = {"x", "c", "x^2", "xc"};
  const double width = horizon / batches;
  std::vector<std::vector<double>> sums(fs.size(), std::vector<double>(batches, 0.0));
  double t = 0.0;
  for_each_fast_segment(spec, neuron, w, 0.0, horizon, derive_seed(o.seed, 1100), 1.0,
                        [&](double x, std::span<const double> z, double dur) {
                          // Segments are at most 1 long; split the rare one that straddles a batch edge.
                          double done = 0.0;
                          while (done < dur) {
                            const auto b = std::min<std::size_t>(static_cast<std::size_t>((t + done) / width), batches - 1);
                            const double edge = b + 1 == batches ? horizon : width * static_cast<double>(b + 1);
                            const double piece = std::min(dur - done, std::max(edge - (t + done), 0.0));
                            const double len = piece > 0.0 ? piece : dur - done;
                            for (std::size_t k = 0; k < fs.size(); ++k) {
                              auto integrand = [&](double u) {
                                FastState v{x * std::exp(-u), z_flow(spec, z, u)};
                                return generator_apply(spec, w, fs[k], v, neuron);
                              };
                              sums[k][b] += boost::math::quadrature::gauss<double, 10>::integrate(
                                  integrand, done, done + len);
                            }
                            done += len;
                          }
                          t += dur;
                        });
  CriterionResult r;
  r.passed = true;
  std::ostringstream m;
  for (std::size_t k = 0; k < fs.size(); ++k) {
    double s = 0.0, sq = 0.0;
    for (double v : sums[k]) {
      s += v / width;
      sq += (v / width) * (v / width);
    }
    const double mean = s / batches;
    const double se = std::sqrt(std::max(0.0, (sq - batches * mean * mean) / (batches - 1)) / batches);
    const double z = std::abs(mean) / se;
    r.passed = r.passed && z <= 3.0;
    m << (k ? "; " : "") << names[k] << ": " << fmt(mean) << " (" << fmt(z) << " SE)";
  }
  r.measured = m.str();
  r.limit = "3 SE, T = " + fmt(horizon);
  return r;
}

CriterionResult discrete_continuous(const ValidationOptions& o) {
  const double horizon = o.quick ? 2e3 : 1e4;
  const long n = 50;
  // Discrete: every quantum of potential fires at rate 1; C1 = C2 = n, w = 2n.
  const auto dp = DiscreteParams::calcium(1.0, 1.0, 1.0, n, n, 2 * n);
  RngStream rng(derive_seed(o.seed, 1200));
  const auto disc = simulate_fast_calcium(dp, horizon, rng);
  const double dx = disc.mean_x.mean / static_cast<double>(n);
  const double dc = disc.mean_c.mean / static_cast<double>(n);

  // Continuous counterpart in units of n quanta: firing rate n x^+, each spike removes 1/n.
  const CalciumSpec cal{1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0};
  const auto spec = builtin_spec(cal);
  const NeuronSpec neuron{1.0, LinearActivation{static_cast<double>(n), 0.0}, ConstantDrop{1.0 / static_cast<double>(n)}};
  double ix = 0.0, ic = 0.0;
  for_each_fast_segment(spec, neuron, 2.0, 0.0, horizon, derive_seed(o.seed, 1201), 0.05,
                        [&](double x, std::span<const double> z, double dur) {
                          ix += -x * std::expm1(-dur);
                          ic += -z[0] * std::expm1(-dur);  // gamma = 1
                        });
  const double cx = ix / horizon;
  const double cc = ic / horizon;
  const double ec = std::abs(dc - cc) / cc;
  const double ex = std::abs(dx - cx) / cx;
  CriterionResult r;
  r.passed = ec <= 0.05 && ex <= 0.05;
  r.measured = "mean c: discrete/50 = " + fmt(dc, 5) + ", continuous = " + fmt(cc, 5) + " (" + fmt(100 * ec) +
               "%); mean x: " + fmt(dx, 5) + " vs " + fmt(cx, 5) + " (" + fmt(100 * ex) + "%)";
  r.limit = "5% relative, T = " + fmt(horizon);
  return r;
}

using Runner = CriterionResult (*)(const ValidationOptions&);

struct Entry {
  const char* name;
  Runner fn;
};

const Entry kCriteria[] = {
    {"discrete calcium generating function vs Monte Carlo", pgf_agreement},
    {"discrete calcium stationary means", mean_identities},
    {"class-M engine vs direct kernel sums", oracle_equivalence},
    {"exponential filter identities", filter_exactness},
    {"toy model closed form", toy_model},
    {"weight domain invariance", domain_invariance},
    {"thinning: first post spike KS test", thinning_ks},
    {"liveness over random configurations", liveness},
    {"causality of kernels and engine", causality},
    {"generator stationarity of the calcium fast process", generator_stationarity},
    {"discrete vs continuous calcium means", discrete_continuous},
};

}  // namespace

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

KernelSpec RandomSetup::kernel(RngStream& rng, int which) {
  switch (which) {
    case 0: return PairBasedSpec{random_channel(rng, true), random_channel(rng, true), PairScheme::kAllToAll};
    case 1: return PairBasedSpec{random_channel(rng, true), random_channel(rng, true), PairScheme::kNearestSymmetric};
    case 2: return PairBasedSpec{random_channel(rng, true), random_channel(rng, true), PairScheme::kNearestReduced};
    case 3:
      return SuppressionSpec{random_channel(rng, false), random_channel(rng, false),
                             StdpCurve::exponential(rng.uniform(), 0.5 + rng.uniform()),
                             StdpCurve::exponential(rng.uniform(), 0.5 + rng.uniform())};
    case 4:
      return TripletSpec{random_channel(rng, false), random_channel(rng, false), random_exp(rng),
                         random_exp(rng),            random_exp(rng),            random_exp(rng)};
    case 5:
      return CalciumSpec{0.3 + rng.uniform(),     0.3 + rng.uniform(),   0.3 + 2.0 * rng.uniform(),
                         0.5 + rng.uniform(),     0.2 + rng.uniform(),   rng.uniform() + 0.1,
                         rng.uniform() + 0.1,     rng.uniform()};
    case 6:
      return VoltageSpec{0.5 + rng.uniform(), 0.5 + rng.uniform(), 0.3 + rng.uniform(),
                         0.3 + rng.uniform(), 0.3 + rng.uniform(), 0.5 * rng.uniform()};
    default: throw std::invalid_argument("RandomSetup::kernel: which must lie in [0, 7)");
  }
}

NeuronSpec RandomSetup::neuron(RngStream& rng) {
  NeuronSpec n;
  n.pre_rate = 0.5 + 3.0 * rng.uniform();
  const double cutoff = rng.uniform();
  switch (rng.below(3)) {
    case 0: n.activation = LinearActivation{0.5 + 3.0 * rng.uniform(), cutoff}; break;
    case 1: n.activation = SigmoidActivation{1.0 + 9.0 * rng.uniform(), 0.5 + 3.0 * rng.uniform(), rng.uniform(), cutoff}; break;
    default: n.activation = TableActivation{{-cutoff, 0.5, 1.5}, {0.5 * rng.uniform(), 1.0 + rng.uniform(), 3.0 + 3.0 * rng.uniform()}};
  }
  switch (rng.below(3)) {
    case 0: n.reset = FullReset{}; break;
    case 1: n.reset = ConstantDrop{0.2 + 0.8 * rng.uniform()}; break;
    default: n.reset = NoReset{};
  }
  return n;
}

SpikeTrain RandomSetup::train(RngStream& rng, double rate, double horizon, std::size_t max_spikes) {
  SpikeTrain m;
  for (double t = rng.exponential(rate); t <= horizon && m.size() < max_spikes; t += rng.exponential(rate)) {
    m.push_back(t);
  }
  return m;
}

int criterion_count() { return static_cast<int>(std::size(kCriteria)); }

std::string criterion_name(int id) {
  if (id < 1 || id > criterion_count()) throw std::out_of_range("no criterion " + std::to_string(id));
  return kCriteria[id - 1].name;
}

CriterionResult run_criterion(int id, const ValidationOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  CriterionResult r;
  try {
    r = kCriteria[id - 1].fn(options);
  } catch (const std::exception& e) {
    r.passed = false;
    r.measured = std::string("aborted: ") + e.what();
  }
  r.id = id;
  r.name = criterion_name(id);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::vector<CriterionResult> run_acceptance(const ValidationOptions& options,
                                            const std::function<void(const CriterionResult&)>& on_result) {
  std::vector<CriterionResult> out;
  for (int id = 1; id <= criterion_count(); ++id) {
    out.push_back(run_criterion(id, options));
    if (on_result) on_result(out.back());
  }
  return out;
}

std::string format_result_line(const CriterionResult& r) {
  std::ostringstream os;
  os << (r.passed ? "PASS" : "FAIL") << "  " << std::setw(2) << r.id << "  " << r.name << "  measured: " << r.measured
     << "  limit: " << r.limit << "  (" << std::fixed << std::setprecision(1) << r.seconds << " s)";
  return os.str();
}

void write_results_json(std::ostream& os, const std::vector<CriterionResult>& results, const ValidationOptions& options) {
  nlohmann::ordered_json j;
  j["quick"] = options.quick;
  j["seed"] = options.seed;
  auto& arr = j["criteria"] = nlohmann::ordered_json::array();
  bool all = true;
  for (const auto& r : results) {
    arr.push_back({{"id", r.id}, {"name", r.name}, {"passed", r.passed}, {"measured", r.measured},
                   {"limit", r.limit}, {"seconds", r.seconds}});
    all = all && r.passed;
  }
  j["all_passed"] = all;
  os << j.dump(2) << '\n';
}

}  // namespace stdpsim
