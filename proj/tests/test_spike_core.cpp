#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "stdpsim/spike_core.hpp"

using namespace stdpsim;

namespace {

// Explicit Euler on dH = -alpha H dt with point masses added when the grid
// reaches them; independent of the closed form under test.
double euler_filter(double h, double alpha, double dt, const std::vector<FilterJump>& jumps, double step) {
  const auto n = static_cast<long>(std::llround(dt / step));
  std::size_t next = 0;
  for (long k = 0; k <= n; ++k) {
    const double t = k * step;
    while (next < jumps.size() && jumps[next].offset <= t + 0.5 * step) {
      h += jumps[next++].weight;
    }
    if (k < n) {
      h -= alpha * h * step;
    }
  }
  return h;
}

}  // namespace

TEST_CASE("last spike delay") {
  CHECK(std::isinf(last_spike_delay(SpikeTrain{}, 5.0)));
  CHECK(last_spike_delay(SpikeTrain({1.0, 2.5}), 3.0) == doctest::Approx(0.5));
  CHECK(std::isinf(last_spike_delay(SpikeTrain({1.0}), 1.0)));
  CHECK(last_spike_delay(SpikeTrain({1.0, 2.5}), 2.5) == doctest::Approx(1.5));
  CHECK_THROWS_AS(last_spike_delay(SpikeTrain{}, -1.0), std::invalid_argument);
}

TEST_CASE("last spike delay ignores spikes after t") {
  RngStream rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto base = sample_homogeneous_arrivals(rng, 2.0, 5.0);
    const double t = 5.0 * rng.uniform();
    SpikeTrain extended = base;
    double s = std::max(5.0, t) + rng.exponential(1.0);
    for (int k = 0; k < 3; ++k, s += rng.exponential(1.0)) {
      extended.push_back(s);
    }
    CHECK(last_spike_delay(base, t) == last_spike_delay(extended, t));
  }
}

TEST_CASE("spike train validation") {
  CHECK_THROWS_AS(SpikeTrain({1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(SpikeTrain({2.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(SpikeTrain({-0.5}), std::invalid_argument);
  CHECK_THROWS_AS(SpikeTrain({std::nan("")}), std::invalid_argument);
  SpikeTrain m({0.5});
  CHECK_THROWS_AS(m.push_back(0.5), std::invalid_argument);
  CHECK(SpikeTrain({1, 2, 3}).restricted_to(2.0) == SpikeTrain({1, 2}));
  CHECK(SpikeTrain({1, 2, 3}).count_before(2.0) == 1);
}

TEST_CASE("spike train text round trip") {
  RngStream rng(11);
  const auto m = sample_homogeneous_arrivals(rng, 3.0, 20.0);
  std::stringstream ss;
  write_spike_train(ss, m);
  CHECK(read_spike_train(ss) == m);
}

TEST_CASE("exponential filter closed form") {
  const double e1 = 0.36787944117144233;
  CHECK(exp_filter_advance({1.0, 1.0}, 1.0).value == doctest::Approx(e1).epsilon(1e-15));
  CHECK(exp_filter_advance({0.0, 3.0}, 2.0).value == 0.0);

  const std::vector<FilterJump> jumps{{0.5, 2.0}};
  const double frozen = 1.5809407605967092;  // Euler oracle below, step 1e-6
  CHECK(exp_filter_advance({1.0, 1.0}, 1.0, jumps).value == doctest::Approx(frozen).epsilon(1e-12));
  CHECK(euler_filter(1.0, 1.0, 1.0, jumps, 1e-6) == doctest::Approx(frozen).epsilon(2e-6));

  CHECK_THROWS_AS(exp_filter_advance({1.0, 1.0}, -0.1), std::invalid_argument);
  const std::vector<FilterJump> outside{{1.5, 1.0}};
  CHECK_THROWS_AS(exp_filter_advance({1.0, 1.0}, 1.0, outside), std::invalid_argument);
}

TEST_CASE("exponential filter semigroup") {
  RngStream rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const double alpha = 0.1 + 3.0 * rng.uniform();
    const double dt = 5.0 * rng.uniform();
    std::vector<FilterJump> jumps;
    double off = 0.0;
    while (true) {
      off += rng.exponential(2.0);
      if (off > dt) break;
      jumps.push_back({off, rng.uniform()});
    }
    const double h0 = rng.uniform();
    const double whole = exp_filter_advance({h0, alpha}, dt, jumps).value;

    const double cut = dt * rng.uniform();
    std::vector<FilterJump> first;
    std::vector<FilterJump> second;
    for (const auto& j : jumps) {
      if (j.offset <= cut) {
        first.push_back(j);
      } else {
        second.push_back({j.offset - cut, j.weight});
      }
    }
    const auto mid = exp_filter_advance({h0, alpha}, cut, first);
    const double split = exp_filter_advance(mid, dt - cut, second).value;
    CHECK(std::abs(split - whole) <= 1e-12 * std::max(1.0, std::abs(whole)));
  }
}

TEST_CASE("filter with constant input") {
  // dH = (-2 H + 4) dt from 0 tends to 2.
  CHECK(exp_filter_with_input(0.0, 2.0, 4.0, 50.0) == doctest::Approx(2.0));
  CHECK(exp_filter_with_input(1.0, 1.0, 0.0, 1.0) == doctest::Approx(std::exp(-1.0)));
  // integral of e^{-t} over [0, inf) is 1
  CHECK(exp_filter_integral(1.0, 1.0, 0.0, 60.0) == doctest::Approx(1.0));
  // Midpoint-rule cross-check of the integral with input.
  const double v = 0.3, a = 1.7, r = 0.9, dt = 2.2;
  double acc = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    acc += exp_filter_with_input(v, a, r, (k + 0.5) * dt / n) * dt / n;
  }
  CHECK(exp_filter_integral(v, a, r, dt) == doctest::Approx(acc).epsilon(1e-9));
}

TEST_CASE("homogeneous arrivals") {
  RngStream a(42);
  RngStream b(42);
  CHECK(sample_homogeneous_arrivals(a, 1.0, 10.0) == sample_homogeneous_arrivals(b, 1.0, 10.0));
  CHECK(sample_homogeneous_arrivals(a, 1.0, 0.0).empty());
  CHECK_THROWS_AS(sample_homogeneous_arrivals(a, 0.0, 1.0), std::invalid_argument);

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RngStream rng(seed);
    const auto n = static_cast<double>(sample_homogeneous_arrivals(rng, 2.0, 1000.0).size());
    CHECK(std::abs(n - 2000.0) <= 3.0 * std::sqrt(2000.0));
  }
}

TEST_CASE("arrival counts on disjoint bins are independent Poisson") {
  // 10^4 samples of counts on [0,1) and [1,2) at rate 1.5: Pearson chi-square on
  // the joint table against the product of Poisson marginals.
  const int samples = 10000;
  const int cap = 5;  // counts >= cap pooled into the last cell
  std::vector<double> table((cap + 1) * (cap + 1), 0.0);
  RngStream rng(2024);
  for (int s = 0; s < samples; ++s) {
    const auto m = sample_homogeneous_arrivals(rng, 1.5, 2.0);
    const auto c1 = std::min<std::size_t>(m.count_before(1.0), cap);
    const auto c2 = std::min<std::size_t>(m.size() - m.count_before(1.0), cap);
    table[c1 * (cap + 1) + c2] += 1.0;
  }
  std::vector<double> p(cap + 1);
  double tail = 1.0;
  for (int k = 0; k < cap; ++k) {
    p[k] = std::exp(-1.5) * std::pow(1.5, k) / std::tgamma(k + 1.0);
    tail -= p[k];
  }
  p[cap] = tail;
  double chi2 = 0.0;
  for (int i = 0; i <= cap; ++i) {
    for (int j = 0; j <= cap; ++j) {
      const double e = samples * p[i] * p[j];
      const double o = table[i * (cap + 1) + j];
      chi2 += (o - e) * (o - e) / e;
    }
  }
  // 35 degrees of freedom, 1% upper quantile.
  CHECK(chi2 < 57.342);
}

TEST_CASE("rng stream") {
  RngStream a(5);
  for (int k = 0; k < 1000; ++k) {
    const double u = a.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
  CHECK(std::isinf(a.exponential(0.0)));
  CHECK(a.below(1) == 0);
  CHECK_THROWS_AS(a.below(0), std::invalid_argument);
  RngStream b(99);
  RngStream c(99);
  for (int k = 0; k < 100; ++k) {
    CHECK(b.next_u64() == c.next_u64());
  }
}

TEST_CASE("format real") {
  CHECK(format_real(kInfinity) == "inf");
  CHECK(std::stod(format_real(0.1)) == 0.1);
  CHECK(format_real(1.0) == "1");
}
