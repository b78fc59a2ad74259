#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "stdpsim/discrete_lab.hpp"
#include "stdpsim/simulator.hpp"

using namespace stdpsim;

namespace {

// Stationary law of the calcium fast process on the box x <= xmax, c <= cmax,
// from the balance equations of the truncated generator (jumps leaving the box
// are dropped). Independent of the generating-function formula.
Eigen::MatrixXd truncated_stationary(const DiscreteParams& p, int xmax, int cmax) {
  const int nx = xmax + 1, nc = cmax + 1, n = nx * nc;
  auto id = [&](int x, int c) { return x * nc + c; };
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  auto add = [&](int from, int x, int c, double rate) {
    if (x < 0 || c < 0 || x > xmax || c > cmax || rate == 0.0) return;
    q(from, id(x, c)) += rate;
    q(from, from) -= rate;
  };
  for (int x = 0; x <= xmax; ++x) {
    for (int c = 0; c <= cmax; ++c) {
      const int s = id(x, c);
      add(s, x + static_cast<int>(p.w), c + static_cast<int>(p.c1()), p.lambda);
      add(s, x - 1, c, x);
      add(s, x - 1, c + static_cast<int>(p.c2()), p.beta * x);
      add(s, x, c - 1, p.gamma[0] * c);
    }
  }
  // pi Q = 0 with sum(pi) = 1: replace one equation by the normalization.
  Eigen::MatrixXd a = q.transpose();
  a.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1.0;
  const Eigen::VectorXd pi = a.partialPivLu().solve(b);
  Eigen::MatrixXd out(nx, nc);
  for (int x = 0; x <= xmax; ++x)
    for (int c = 0; c <= cmax; ++c) out(x, c) = pi(id(x, c));
  return out;
}

double truncated_pgf(const Eigen::MatrixXd& pi, double u) {
  double acc = 0.0;
  for (int c = 0; c < pi.cols(); ++c) acc += pi.col(c).sum() * std::pow(u, c);
  return acc;
}

}  // namespace

TEST_CASE("ctmc step bookkeeping") {
  RngStream rng(1);
  DiscreteParams p = DiscreteParams::calcium(0.0, 1.0, 1.0, 1, 1, 2);
  DiscreteState s{0, {0}, 0.0, 0.0, 2};
  const auto absorbed = ctmc_step(s, p, rng);
  CHECK(absorbed.tag == DiscreteEvent::kAbsorbed);
  CHECK(std::isinf(absorbed.holding));

  p.k0 = {3};
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const auto step = ctmc_step(s, p, rng);
    CHECK(step.tag == DiscreteEvent::kClock);
    CHECK(step.next.z[0] == 3);
    sum += step.holding;
  }
  CHECK(sum / 20000 == doctest::Approx(1.0).epsilon(0.03));

  const auto q = DiscreteParams::calcium(1.0, 0.0, 1.0, 4, 7, 5);
  const auto pre = ctmc_step(s, q, rng);
  CHECK(pre.tag == DiscreteEvent::kPre);
  CHECK(pre.next.x == 5);
  CHECK(pre.next.z[0] == 4);

  const auto r = DiscreteParams::calcium(1.0, 3.0, 1.0, 4, 7, 5);
  const DiscreteState at{6, {2}, 0.0, 0.0, 5};
  int posts = 0;
  for (int i = 0; i < 4000; ++i) {
    const auto step = ctmc_step(at, r, rng);
    if (step.tag == DiscreteEvent::kPost) {
      ++posts;
      CHECK(step.next.x == 5);
      CHECK(step.next.z[0] == 9);
    }
    CHECK(step.next.x >= 0);
    CHECK(step.next.z[0] >= 0);
  }
  // post rate 18 out of 6 + 18 + 1 + 2
  CHECK(posts / 4000.0 == doctest::Approx(18.0 / 27.0).epsilon(0.05));
}

TEST_CASE("time averages match the closed-form means") {
  const auto p = DiscreteParams::calcium(1.0, 1.0, 1.0, 1, 1, 2);
  const auto [mx, mc] = fast_calcium_means(p);
  CHECK(mx == doctest::Approx(1.0));
  CHECK(mc == doctest::Approx(2.0));
  RngStream rng(11);
  const auto res = simulate_fast_calcium(p, 1e5, rng);
  CHECK(res.mean_x.mean == doctest::Approx(1.0).epsilon(0.02));
  CHECK(res.mean_c.mean == doctest::Approx(2.0).epsilon(0.02));
  double total = 0.0;
  for (double v : res.occupation) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("decoupled calcium decays to zero") {
  const auto p = DiscreteParams::calcium(1.0, 1.0, 1.0, 0, 0, 2);
  RngStream rng(2);
  FastCalciumOptions opt;
  opt.c0 = 5;
  opt.record_trace = true;
  const auto res = simulate_fast_calcium(p, 200.0, rng, opt);
  CHECK(res.trace.back().c == 0);
  for (std::size_t i = 1; i < res.trace.size(); ++i) CHECK(res.trace[i].c <= res.trace[i - 1].c);
}

TEST_CASE("pgf normalization and the Poisson special case") {
  const auto p = DiscreteParams::calcium(1.0, 1.0, 1.0, 1, 0, 3);
  CHECK(analytic_pgf(p, 1.0).value == 1.0);
  CHECK(analytic_pgf(p, 0.0).value == doctest::Approx(0.3678794412).epsilon(1e-10));
  for (double u : {0.1, 0.4, 0.9}) {
    CHECK(analytic_pgf(p, u).value == doctest::Approx(std::exp(-(1.0 - u))).epsilon(1e-10));
  }
  CHECK_THROWS_AS(analytic_pgf(p, 1.5), std::invalid_argument);
}

TEST_CASE("pgf matches the truncated balance equations") {
  for (const auto& p : {DiscreteParams::calcium(1.0, 1.0, 1.0, 1, 1, 2), DiscreteParams::calcium(1.0, 1.0, 2.0, 1, 1, 2),
                        DiscreteParams::calcium(0.7, 2.0, 1.5, 2, 3, 1)}) {
    const auto pi = truncated_stationary(p, 30, 45);
    for (double u : {0.0, 0.25, 0.5, 0.75}) {
      const auto v = analytic_pgf(p, u);
      CHECK(v.value == doctest::Approx(truncated_pgf(pi, u)).epsilon(1e-8));
      CHECK(v.error_estimate < 1e-10);
    }
  }
}

TEST_CASE("pgf is bounded and non-decreasing in u") {
  const auto p = DiscreteParams::calcium(1.5, 0.5, 0.8, 2, 2, 3);
  double prev = 0.0;
  for (int i = 0; i <= 20; ++i) {
    const double v = analytic_pgf(p, i / 20.0).value;
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("removable singularity is continuous") {
  // gamma k = beta + 1 for k = 1 (and k = 2 with C2 = 2).
  for (long c2 : {1L, 2L}) {
    const auto p = DiscreteParams::calcium(1.0, 1.0, 2.0, 1, c2, 2);
    auto q = p;
    q.gamma = {2.0 * (1.0 + 1e-7)};
    auto r = p;
    r.gamma = {2.0 * (1.0 - 1e-7)};
    const double v = analytic_pgf(p, 0.3).value;
    CHECK(v == doctest::Approx(analytic_pgf(q, 0.3).value).epsilon(1e-6));
    CHECK(v == doctest::Approx(analytic_pgf(r, 0.3).value).epsilon(1e-6));
  }
  const auto half = DiscreteParams::calcium(1.0, 1.0, 1.0, 0, 2, 1);  // gamma * 2 = beta + 1
  for (double s : {0.1, 1.0, 5.0}) {
    auto near = half;
    near.gamma = {1.0 + 1e-8};
    CHECK(pgf_delta(half, 0.2, s) == doctest::Approx(pgf_delta(near, 0.2, s)).epsilon(1e-7));
  }
}

TEST_CASE("k = 0 expansion agrees with the k = 1 form") {
  RngStream rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = DiscreteParams::calcium(1.0, 3.0 * rng.uniform(), 0.2 + 2.0 * rng.uniform(),
                                     static_cast<long>(rng.below(4)), static_cast<long>(rng.below(5)),
                                     static_cast<long>(1 + rng.below(4)));
    const double u = rng.uniform();
    const double s = 5.0 * rng.uniform();
    CHECK(pgf_delta(p, u, s, true) == doctest::Approx(pgf_delta(p, u, s, false)).epsilon(1e-12));
  }
}

TEST_CASE("pgf regression value against Monte Carlo") {
  const auto p = DiscreteParams::calcium(1.0, 1.0, 1.0, 1, 1, 2);
  const double v = analytic_pgf(p, 0.5).value;
  RngStream rng(21);
  FastCalciumOptions opt;
  opt.u_grid = {0.5};
  const auto mc = simulate_fast_calcium(p, 1e5, rng, opt);
  CHECK(std::abs(mc.pgf[0].mean - v) <= 3.0 * mc.pgf[0].std_error);
  CHECK(v == doctest::Approx(0.40656965974059889).epsilon(1e-12));
}

TEST_CASE("full discrete model: pure death of the weight") {
  DiscreteFullConfig c;
  c.params = DiscreteParams::calcium(1.0, 1.0, 1.0, 1, 1, 2);
  c.params.a_p = 0;
  c.params.a_d = 0;
  c.params.mu = 0.5;
  c.horizon = 2.0;
  c.initial.w = 100;
  c.initial.x = 0;
  c.record_events = false;
  double sum = 0.0;
  const int runs = 400;
  for (int i = 0; i < runs; ++i) {
    c.seed = static_cast<std::uint64_t>(i + 1);
    sum += static_cast<double>(run_discrete_full(c).final_state.w);
  }
  CHECK(sum / runs == doctest::Approx(100.0 * std::exp(-1.0)).epsilon(0.02));
}

TEST_CASE("full discrete model: monotone without depression, gated at A_d") {
  DiscreteFullConfig c;
  c.params = DiscreteParams::calcium(2.0, 1.0, 1.0, 2, 3, 2);
  c.drive = {1.0, 1.0, 1.0, 0.0};
  c.horizon = 50.0;
  const auto r = run_discrete_full(c);
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i].state.w >= r.trace[i - 1].state.w);
  CHECK(r.final_state.w > 0);

  c.drive = {1.0, 1.0, 0.2, 5.0};
  c.params.a_d = 3;
  c.initial.w = 4;
  for (bool filtered : {true, false}) {
    c.filtered = filtered;
    const auto g = run_discrete_full(c);
    for (const auto& rec : g.trace) CHECK(rec.state.w >= 0);
    CHECK(g.final_state.w < 3);
  }
}

TEST_CASE("full discrete model: Omega follows the threshold drive") {
  DiscreteFullConfig c;
  c.params = DiscreteParams::calcium(0.0, 1.0, 1.0, 1, 1, 2);
  c.initial.z = {3};
  c.drive = {1.0, 2.0, 1.0, 1.0};
  c.alpha = 2.0;
  c.horizon = 1.0;
  c.params.a_p = 0;
  c.params.a_d = 0;
  const auto r = run_discrete_full(c);
  // Replays Omega from the recorded calcium path.
  double op = 0.0, od = 0.0, t = 0.0;
  long calcium = 3;
  for (const auto& rec : r.trace) {
    const double dt = rec.t - t;
    op = exp_filter_with_input(op, 2.0, calcium >= 1 ? 1.0 : 0.0, dt);
    od = exp_filter_with_input(od, 2.0, calcium >= 2 ? 1.0 : 0.0, dt);
    t = rec.t;
    calcium = rec.state.z[0];
  }
  CHECK(r.final_state.omega_p == doctest::Approx(op).epsilon(1e-12));
  CHECK(r.final_state.omega_d == doctest::Approx(od).epsilon(1e-12));
}

TEST_CASE("event ceiling and writers") {
  DiscreteFullConfig c;
  c.params = DiscreteParams::calcium(100.0, 1.0, 1.0, 1, 1, 2);
  c.max_events = 50;
  CHECK_THROWS_AS(run_discrete_full(c), LivenessViolation);

  c.max_events = 10'000'000;
  c.horizon = 1.0;
  std::ostringstream csv;
  write_discrete_trace_csv(csv, run_discrete_full(c).trace);
  CHECK(csv.str().rfind("t,event,x,z0,omega_p,omega_d,w\n", 0) == 0);

  std::ostringstream json;
  write_pgf_report(json, pgf_report(DiscreteParams::calcium(1.0, 1.0, 1.0, 1, 1, 2), {0.0, 0.5, 1.0}));
  CHECK(json.str().find("\"pgf\"") != std::string::npos);
  CHECK(json.str().find("\"quadrature_error\"") != std::string::npos);
}
