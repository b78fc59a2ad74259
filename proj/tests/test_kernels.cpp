#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "stdpsim/kernels.hpp"

using namespace stdpsim;

namespace {

const StdpCurve kUnit = StdpCurve::exponential(1.0, 1.0);

SpikeTrain random_train(RngStream& rng, double rate, double horizon, std::size_t cap = 50) {
  SpikeTrain m;
  double t = rng.exponential(rate);
  while (t <= horizon && m.size() < cap) {
    m.push_back(t);
    t += rng.exponential(rate);
  }
  return m;
}

StdpCurve random_exp(RngStream& rng) {
  return StdpCurve::exponential(0.2 + rng.uniform(), 0.3 + 2.0 * rng.uniform());
}

PairBasedSpec random_pair_spec(RngStream& rng, PairScheme scheme) {
  PairBasedSpec s;
  s.scheme = scheme;
  s.potentiation = {random_exp(rng), random_exp(rng), 0.1 * rng.uniform(), 0.1 * rng.uniform()};
  s.depression = {random_exp(rng), random_exp(rng), 0.1 * rng.uniform(), 0.1 * rng.uniform()};
  return s;
}

std::vector<KernelSpec> random_specs(RngStream& rng) {
  std::vector<KernelSpec> out;
  for (auto scheme : {PairScheme::kAllToAll, PairScheme::kNearestSymmetric, PairScheme::kNearestReduced}) {
    out.emplace_back(random_pair_spec(rng, scheme));
  }
  SuppressionSpec sup;
  sup.potentiation = {random_exp(rng), random_exp(rng)};
  sup.depression = {random_exp(rng), random_exp(rng)};
  sup.suppress_pre = StdpCurve::exponential(rng.uniform(), 1.0 + rng.uniform());
  sup.suppress_post = StdpCurve::exponential(rng.uniform(), 1.0 + rng.uniform());
  out.emplace_back(sup);
  TripletSpec trip;
  trip.potentiation = {random_exp(rng), random_exp(rng)};
  trip.depression = {random_exp(rng), random_exp(rng)};
  trip.triplet_p_pre = random_exp(rng);
  trip.triplet_p_post = random_exp(rng);
  trip.triplet_d_pre = random_exp(rng);
  trip.triplet_d_post = random_exp(rng);
  out.emplace_back(trip);
  out.emplace_back(VoltageSpec{1.0 + rng.uniform(), 1.0 + rng.uniform(), 1.0, 0.5, 2.0, 0.3 * rng.uniform()});
  out.emplace_back(CalciumSpec{0.6, 1.1, 0.8, 1.3, 0.9, 2.0, 1.5, 0.4});
  return out;
}

// Independent all-to-all double sum: every (s, t) pair with s < t.
std::pair<double, double> all_to_all_oracle(const PairBasedSpec& k, const SpikeTrain& pre,
                                            const SpikeTrain& post, double t, bool at_pre) {
  double p = at_pre ? k.potentiation.direct_pre : k.potentiation.direct_post;
  double d = at_pre ? k.depression.direct_pre : k.depression.direct_post;
  const SpikeTrain& other = at_pre ? post : pre;
  for (double s : other) {
    if (s < t) {
      p += at_pre ? k.potentiation.from_post(t - s) : k.potentiation.from_pre(t - s);
      d += at_pre ? k.depression.from_post(t - s) : k.depression.from_pre(t - s);
    }
  }
  return {p, d};
}

}  // namespace

TEST_CASE("stdp curves") {
  CHECK(kUnit(0.0) == 1.0);
  CHECK(kUnit(kInfinity) == 0.0);
  CHECK(StdpCurve{}(0.3) == 0.0);
  CHECK(StdpCurve{}.is_zero());
  const auto tab = StdpCurve::tabulated({{0.5, 2.0}, {1.5, 1.0}, {2.5, 0.0}});
  CHECK(tab(0.0) == 2.0);
  CHECK(tab(1.0) == doctest::Approx(1.5));
  CHECK(tab(3.0) == 0.0);
  CHECK(tab(kInfinity) == 0.0);
  CHECK(tab.max_value() == 2.0);
  CHECK_THROWS_AS(StdpCurve::tabulated({{0.0, 1.0}, {1.0, 2.0}}), std::invalid_argument);
  CHECK_NOTHROW(StdpCurve::tabulated({{0.0, 1.0}, {1.0, 2.0}}, false));
  CHECK_THROWS_AS(StdpCurve::exponential(-1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(StdpCurve::exponential(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("pair-based examples") {
  const SpikeTrain pre({0.0, 1.0});
  const SpikeTrain post({2.0});
  const auto all = pair_atoms(PairBasedSpec::hebbian(kUnit, StdpCurve{}), pre, post, 3.0);
  REQUIRE(all.size() == 1);
  CHECK(all[0].time == 2.0);
  CHECK(all[0].source == SpikeSource::kPost);
  CHECK(all[0].potentiation == doctest::Approx(std::exp(-2.0) + std::exp(-1.0)).epsilon(1e-14));
  CHECK(all[0].potentiation == doctest::Approx(0.5032147244));

  const auto near = pair_atoms(PairBasedSpec::hebbian(kUnit, StdpCurve{}, PairScheme::kNearestSymmetric), pre,
                               post, 3.0);
  REQUIRE(near.size() == 1);
  CHECK(near[0].potentiation == doctest::Approx(0.3678794412));

  for (auto scheme : {PairScheme::kAllToAll, PairScheme::kNearestSymmetric, PairScheme::kNearestReduced}) {
    CHECK(pair_atoms(PairBasedSpec::hebbian(kUnit, kUnit, scheme), {}, {}, 1.0).empty());
  }
}

TEST_CASE("nearest reduced drops pairings interrupted by an own spike") {
  // pre 0, post 1, post 2: the second post follows a post, so the reduced
  // rule gives it nothing while the symmetric rule pairs it with pre 0.
  const SpikeTrain pre({0.0});
  const SpikeTrain post({1.0, 2.0});
  const auto sym = pair_atoms(PairBasedSpec::hebbian(kUnit, StdpCurve{}, PairScheme::kNearestSymmetric), pre,
                              post, 3.0);
  const auto red = pair_atoms(PairBasedSpec::hebbian(kUnit, StdpCurve{}, PairScheme::kNearestReduced), pre,
                              post, 3.0);
  REQUIRE(sym.size() == 2);
  REQUIRE(red.size() == 1);
  CHECK(red[0].time == 1.0);
  CHECK(red[0].potentiation == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("pre/post-only drive adds constants at every spike") {
  PairBasedSpec k;
  k.potentiation.direct_pre = 0.25;
  k.depression.direct_post = 0.5;
  const auto atoms = pair_atoms(k, SpikeTrain({1.0}), SpikeTrain({2.0}), 3.0);
  REQUIRE(atoms.size() == 2);
  CHECK(atoms[0].potentiation == 0.25);
  CHECK(atoms[0].depression == 0.0);
  CHECK(atoms[1].potentiation == 0.0);
  CHECK(atoms[1].depression == 0.5);
}

TEST_CASE("all-to-all matches an independent double sum") {
  RngStream rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const auto k = random_pair_spec(rng, PairScheme::kAllToAll);
    const auto pre = random_train(rng, 2.0, 10.0);
    const auto post = random_train(rng, 2.0, 10.0);
    const auto atoms = pair_atoms(k, pre, post, 10.0);
    std::size_t idx = 0;
    for (const auto& a : atoms) {
      const auto [p, d] = all_to_all_oracle(k, pre, post, a.time, a.source == SpikeSource::kPre);
      CHECK(a.potentiation == doctest::Approx(p).epsilon(1e-12));
      CHECK(a.depression == doctest::Approx(d).epsilon(1e-12));
      ++idx;
    }
    // Direct drive is positive, so every spike carries an atom.
    CHECK(idx == pre.size() + post.size());
  }
}

TEST_CASE("calcium trace and density") {
  CalciumSpec c;
  c.initial = 2.0;
  c.decay = 1.0;
  CHECK(calcium_trace(c, {}, {}, 1.0) == doctest::Approx(0.7357588823));

  CalciumSpec c2;
  c2.initial = 0.0;
  c2.jump_pre = 1.0;
  c2.decay = 2.0;
  const double expected = exp_filter_advance({0.0, 2.0}, 1.0, std::vector<FilterJump>{{0.0, 1.0}, {0.5, 1.0}}).value;
  CHECK(calcium_trace(c2, SpikeTrain({0.0, 0.5}), {}, 1.0) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(expected == doctest::Approx(0.5032147244));
  CHECK(calcium_trace(c2, SpikeTrain({0.5}), {}, 0.3) == 0.0);

  CalciumSpec z;
  z.initial = 0.0;
  z.theta_p = 0.5;
  z.theta_d = 0.5;
  CHECK(kernel_density(z, {}, {}, 3.0) == std::pair{0.0, 0.0});
  z.theta_p = 0.0;
  CHECK(kernel_density(z, {}, {}, 3.0).first == z.rate_p);

  CalciumSpec x;
  x.jump_pre = 1.0;
  x.decay = 1.0;
  x.theta_d = 0.5;
  x.rate_d = 1.0;
  x.theta_p = 10.0;
  const auto segs = calcium_density_segments(x, SpikeTrain({0.0}), {}, 5.0);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].start == 0.0);
  CHECK(segs[0].end == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(segs[0].end == doctest::Approx(0.6931471806));
  CHECK(segs[0].depression_rate == 1.0);
  CHECK(segs[0].potentiation_rate == 0.0);

  // Closed threshold: exactly at theta the rate is on.
  CalciumSpec eq;
  eq.initial = 0.75;
  eq.theta_p = 0.75;
  eq.theta_d = 0.76;
  CHECK(kernel_density(eq, {}, {}, 0.0) == std::pair{eq.rate_p, 0.0});
}

TEST_CASE("calcium segments agree with pointwise density") {
  RngStream rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    CalciumSpec c{0.5 + rng.uniform(), 0.5 + rng.uniform(), 0.5 + rng.uniform(), 0.8 + rng.uniform(),
                  0.3 + rng.uniform(), 1.0 + rng.uniform(), 1.0 + rng.uniform(), rng.uniform()};
    const auto pre = random_train(rng, 1.5, 10.0);
    const auto post = random_train(rng, 1.0, 10.0);
    const auto segs = calcium_density_segments(c, pre, post, 10.0);
    for (int k = 0; k < 400; ++k) {
      const double t = 10.0 * rng.uniform();
      double rp = 0.0, rd = 0.0;
      for (const auto& s : segs) {
        if (s.start <= t && t < s.end) {
          rp = s.potentiation_rate;
          rd = s.depression_rate;
        }
      }
      const auto [ep, ed] = kernel_density(c, pre, post, t);
      CHECK(rp == ep);
      CHECK(rd == ed);
    }
  }
}

TEST_CASE("suppression") {
  const SpikeTrain pre({0.0, 0.1});
  const SpikeTrain post({1.0});
  SuppressionSpec s;
  s.potentiation.from_pre = kUnit;
  s.suppress_pre = kUnit;
  const auto atoms = suppression_atoms(s, pre, post, 2.0);
  REQUIRE(atoms.size() == 1);
  CHECK(atoms[0].time == 1.0);
  const double expected = std::exp(-1.0) + (1.0 - std::exp(-0.1)) * std::exp(-0.9);
  CHECK(atoms[0].potentiation == doctest::Approx(expected).epsilon(1e-14));

  // First spikes of both trains are unsuppressed.
  s.suppress_post = kUnit;
  const auto first = suppression_atoms(s, SpikeTrain({0.0}), SpikeTrain({1.0}), 2.0);
  REQUIRE(first.size() == 1);
  CHECK(first[0].potentiation == doctest::Approx(std::exp(-1.0)));

  SuppressionSpec bad;
  bad.suppress_pre = StdpCurve::exponential(1.5, 1.0);
  CHECK_THROWS_AS(suppression_atoms(bad, pre, post, 2.0), std::invalid_argument);
}

TEST_CASE("triplet and voltage examples") {
  TripletSpec t;
  t.potentiation.from_pre = kUnit;
  t.triplet_p_post = kUnit;
  const auto atoms = triplet_atoms(t, SpikeTrain({0.0}), SpikeTrain({1.0, 2.0}), 3.0);
  REQUIRE(atoms.size() == 2);
  CHECK(atoms[1].time == 2.0);
  CHECK(atoms[1].potentiation == doctest::Approx((1.0 + std::exp(-1.0)) * std::exp(-2.0)).epsilon(1e-14));
  CHECK(atoms[1].potentiation == doctest::Approx(0.1851223516));
  CHECK(triplet_atoms(t, {}, {}, 1.0).empty());

  VoltageSpec v{1.0, 1.0, 1.0, 1.0, 1.0, 0.0};
  const auto single = voltage_atoms(v, SpikeTrain({0.0}), SpikeTrain({1.0}), 2.0);
  CHECK(single.empty());
  const auto two = voltage_atoms(v, SpikeTrain({0.0}), SpikeTrain({1.0, 2.0}), 3.0);
  REQUIRE(two.size() == 1);
  CHECK(two[0].time == 2.0);
  CHECK(two[0].potentiation == doctest::Approx(0.0497870684));
  // Pre spike with no earlier post: depression mass is (0 - theta)^+ = 0.
  v.theta_d = 0.2;
  CHECK(voltage_atoms(v, SpikeTrain({0.5}), {}, 1.0).empty());
}

TEST_CASE("reductions to all-to-all") {
  RngStream rng(29);
  for (int trial = 0; trial < 30; ++trial) {
    auto base = random_pair_spec(rng, PairScheme::kAllToAll);
    base.potentiation.direct_pre = base.potentiation.direct_post = 0.0;
    base.depression.direct_pre = base.depression.direct_post = 0.0;
    const auto pre = random_train(rng, 2.0, 8.0);
    const auto post = random_train(rng, 2.0, 8.0);
    const auto reference = pair_atoms(base, pre, post, 8.0);

    SuppressionSpec s;
    s.potentiation = base.potentiation;
    s.depression = base.depression;
    const auto sup = suppression_atoms(s, pre, post, 8.0);
    TripletSpec t;
    t.potentiation = base.potentiation;
    t.depression = base.depression;
    const auto trip = triplet_atoms(t, pre, post, 8.0);
    REQUIRE(sup.size() == reference.size());
    REQUIRE(trip.size() == reference.size());
    for (std::size_t i = 0; i < reference.size(); ++i) {
      CHECK(sup[i].potentiation == doctest::Approx(reference[i].potentiation).epsilon(1e-14));
      CHECK(sup[i].depression == doctest::Approx(reference[i].depression).epsilon(1e-14));
      CHECK(trip[i] == reference[i]);
    }
  }
}

TEST_CASE("kernels are causal") {
  RngStream rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const auto specs = random_specs(rng);
    const auto pre = random_train(rng, 1.5, 6.0);
    const auto post = random_train(rng, 1.5, 6.0);
    const double t = 6.0 * rng.uniform();
    SpikeTrain pre_ext = pre.restricted_to(t);
    SpikeTrain post_ext = post.restricted_to(t);
    double s = 6.0;
    for (int k = 0; k < 4; ++k) {
      s += rng.exponential(1.0);
      (rng.uniform() < 0.5 ? pre_ext : post_ext).push_back(s);
    }
    for (const auto& spec : specs) {
      const auto a = kernel_measure(spec, pre.restricted_to(t), post.restricted_to(t), t);
      const auto b = kernel_measure(spec, pre_ext, post_ext, 20.0);
      std::vector<KernelAtom> b_atoms;
      for (const auto& x : b.atoms) {
        if (x.time <= t) b_atoms.push_back(x);
      }
      CHECK(a.atoms == b_atoms);
      // Densities restricted to [0, t] agree.
      for (int k = 0; k < 50; ++k) {
        const double u = t * rng.uniform();
        auto rate_at = [u](const std::vector<DensitySegment>& segs) {
          for (const auto& seg : segs) {
            if (seg.start <= u && u < seg.end) return std::pair{seg.potentiation_rate, seg.depression_rate};
          }
          return std::pair{0.0, 0.0};
        };
        CHECK(rate_at(a.segments) == rate_at(b.segments));
      }
    }
  }
}

TEST_CASE("kernel masses are non-negative and Hebbian atoms sit where they should") {
  RngStream rng(37);
  for (int trial = 0; trial < 40; ++trial) {
    const auto pre = random_train(rng, 2.0, 8.0);
    const auto post = random_train(rng, 2.0, 8.0);
    for (const auto& spec : random_specs(rng)) {
      const auto m = kernel_measure(spec, pre, post, 8.0);
      for (const auto& a : m.atoms) {
        CHECK(a.potentiation >= 0.0);
        CHECK(a.depression >= 0.0);
      }
      for (const auto& s : m.segments) {
        CHECK(s.potentiation_rate >= 0.0);
        CHECK(s.depression_rate >= 0.0);
        CHECK(s.start < s.end);
      }
    }
    for (auto scheme : {PairScheme::kAllToAll, PairScheme::kNearestSymmetric, PairScheme::kNearestReduced}) {
      const auto k = PairBasedSpec::hebbian(random_exp(rng), random_exp(rng), scheme);
      CHECK(k.is_hebbian());
      for (const auto& a : pair_atoms(k, pre, post, 8.0)) {
        if (a.potentiation > 0.0) CHECK(a.source == SpikeSource::kPost);
        if (a.depression > 0.0) CHECK(a.source == SpikeSource::kPre);
      }
    }
  }
}

TEST_CASE("nearest reduced atoms are dominated by nearest symmetric atoms") {
  RngStream rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    auto sym = random_pair_spec(rng, PairScheme::kNearestSymmetric);
    sym.potentiation.direct_pre = sym.potentiation.direct_post = 0.0;
    sym.depression.direct_pre = sym.depression.direct_post = 0.0;
    auto red = sym;
    red.scheme = PairScheme::kNearestReduced;
    const auto pre = random_train(rng, 2.0, 8.0);
    const auto post = random_train(rng, 2.0, 8.0);
    const auto a = pair_atoms(sym, pre, post, 8.0);
    const auto b = pair_atoms(red, pre, post, 8.0);
    std::size_t j = 0;
    for (const auto& r : b) {
      while (j < a.size() && (a[j].time != r.time || a[j].source != r.source)) ++j;
      REQUIRE(j < a.size());
      CHECK(r.potentiation <= a[j].potentiation);
      CHECK(r.depression <= a[j].depression);
    }
  }
}

TEST_CASE("kernel filtering and atom output") {
  KernelMeasure m;
  m.atoms.push_back({0.5, 2.0, 0.0, SpikeSource::kPost});
  const auto [p, d] = filter_kernel_measure(m, 1.0, 1.0, {1.0, 0.0});
  CHECK(p == doctest::Approx(std::exp(-1.0) + 2.0 * std::exp(-0.5)));
  CHECK(d == 0.0);
  m.segments.push_back({0.0, 1.0, 0.0, 1.0});
  // integral of e^{-(2 - u)} over [0, 1]
  CHECK(filter_kernel_measure(m, 1.0, 2.0).second == doctest::Approx(std::exp(-1.0) - std::exp(-2.0)));
  std::ostringstream os;
  write_atoms(os, m.atoms);
  CHECK(os.str() == "0.5 2 0\n");
  CHECK_THROWS_AS(kernel_atoms(CalciumSpec{}, {}, {}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(pair_atoms(PairBasedSpec{}, SpikeTrain({2.0}), {}, 1.0), std::invalid_argument);
}
