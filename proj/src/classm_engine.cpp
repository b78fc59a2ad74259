#include "stdpsim/classm_engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stdpsim {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

double pos(double v) { return v > 0.0 ? v : 0.0; }

double term_value(const OutputTerm& term, std::span<const double> z) {
  return std::visit(
      overloaded{
          [](const ConstantTerm& t) { return t.value; },
          [&](const TraceTerm& t) { return z[t.index]; },
          [&](const SuppressedTraceTerm& t) { return pos(1.0 - z[t.gate]) * z[t.index]; },
          [&](const BoostedTraceTerm& t) { return (1.0 + z[t.boost]) * z[t.index]; },
          [&](const ClockCurveTerm& t) {
            if (t.guard >= 0 && !(z[t.clock] <= z[t.guard])) {
              return 0.0;
            }
            return t.curve(z[t.clock]);
          },
          [&](const ThresholdTerm& t) { return z[t.index] >= t.theta ? t.rate : 0.0; },
          [&](const HingeTerm& t) {
            const double h = t.scale * pos(z[t.index] - t.theta);
            return t.multiplier >= 0 ? h * z[t.multiplier] : h;
          },
      },
      term);
}

void require(bool ok, const std::string& what) {
  if (!ok) {
    throw std::invalid_argument("class-M spec: " + what);
  }
}

bool finite_non_negative(double v) { return std::isfinite(v) && v >= 0.0; }

void check_output(const OutputFn& fn, int dim, bool drift, const std::string& where) {
  auto idx = [&](int i) { return i >= 0 && i < dim; };
  for (const auto& term : fn.terms) {
    std::visit(overloaded{
                   [&](const ConstantTerm& t) { require(finite_non_negative(t.value), where + ": negative constant"); },
                   [&](const TraceTerm& t) { require(idx(t.index), where + ": index out of range"); },
                   [&](const SuppressedTraceTerm& t) {
                     require(idx(t.index) && idx(t.gate), where + ": index out of range");
                   },
                   [&](const BoostedTraceTerm& t) {
                     require(idx(t.index) && idx(t.boost), where + ": index out of range");
                   },
                   [&](const ClockCurveTerm& t) {
                     require(idx(t.clock) && (t.guard < 0 || idx(t.guard)), where + ": index out of range");
                   },
                   [&](const ThresholdTerm& t) {
                     require(idx(t.index), where + ": index out of range");
                     require(finite_non_negative(t.rate) && std::isfinite(t.theta), where + ": bad threshold term");
                   },
                   [&](const HingeTerm& t) {
                     require(idx(t.index) && (t.multiplier < 0 || idx(t.multiplier)), where + ": index out of range");
                     require(finite_non_negative(t.scale) && std::isfinite(t.theta), where + ": bad hinge term");
                   },
               },
               term);
    if (drift) {
      require(std::holds_alternative<ConstantTerm>(term) || std::holds_alternative<ThresholdTerm>(term),
              where + ": drift outputs take only constant and threshold terms");
    }
  }
}

void check_jump(const std::vector<CoordJump>& k, std::size_t dim, const std::string& where) {
  require(k.size() == dim, where + ": wrong length");
  for (const auto& c : k) {
    require(std::isfinite(c.add), where + ": non-finite increment");
    // (1 - z_gate)^+ lies in [0, 1], so a non-negative increment keeps z_i >= 0.
    require(c.add >= 0.0, where + ": negative increment can leave the positive orthant");
    require(c.gate < static_cast<int>(dim), where + ": gate index out of range");
  }
}

// Points of R_+^l that stress the boundary: zeros, small values, values near 1
// (where suppression gates switch) and large values.
std::vector<double> sample_orthant_point(RngStream& rng, std::size_t dim) {
  std::vector<double> z(dim);
  for (auto& v : z) {
    switch (rng.below(4)) {
      case 0: v = 0.0; break;
      case 1: v = rng.uniform(); break;
      case 2: v = 0.5 + rng.uniform(); break;
      default: v = rng.exponential(0.05); break;
    }
  }
  return z;
}

}  // namespace

double OutputFn::operator()(std::span<const double> z) const {
  double acc = 0.0;
  for (const auto& t : terms) {
    acc += term_value(t, z);
  }
  return acc;
}

void validate(const ClassMSpec& spec) {
  const std::size_t dim = spec.dimension();
  require(dim > 0, "dimension must be positive");
  require(spec.drift.size() == dim && spec.initial.size() == dim, "vector lengths differ");
  require(spec.labels.empty() || spec.labels.size() == dim, "label count differs from dimension");
  for (std::size_t i = 0; i < dim; ++i) {
    require(finite_non_negative(spec.decay[i]), "decay must be finite and non-negative");
    require(finite_non_negative(spec.drift[i]), "drift constant must be finite and non-negative");
    require(!std::isnan(spec.initial[i]) && spec.initial[i] >= 0.0, "initial state must lie in R_+");
    // An infinite coordinate only makes sense for a pure clock.
    require(std::isfinite(spec.initial[i]) || spec.decay[i] == 0.0, "infinite initial value on a decaying coordinate");
  }
  check_jump(spec.jump_pre, dim, "pre jump");
  check_jump(spec.jump_post, dim, "post jump");
  const int d = static_cast<int>(dim);
  for (const auto* ch : {&spec.potentiation, &spec.depression}) {
    check_output(ch->drift, d, true, "drift output");
    check_output(ch->at_pre, d, false, "pre output");
    check_output(ch->at_post, d, false, "post output");
  }

  RngStream rng(0x5eedc1a55ULL);
  for (int trial = 0; trial < 256; ++trial) {
    const auto z = sample_orthant_point(rng, dim);
    for (auto which : {SpikeSource::kPre, SpikeSource::kPost}) {
      const auto next = jump_z(spec, z, which);  // throws on a negative coordinate
      (void)next;
      auto [p, q] = jump_outputs(spec, z, which);
      require(p >= 0.0 && q >= 0.0, "output function is negative on R_+^l");
    }
    auto [p, q] = omega_drift(spec, z);
    require(p >= 0.0 && q >= 0.0, "drift output is negative on R_+^l");
  }
}

std::vector<double> z_flow(const ClassMSpec& spec, std::span<const double> z, double dt) {
  if (!(dt >= 0.0)) {
    throw std::invalid_argument("z_flow: dt must be non-negative");
  }
  std::vector<double> out(z.begin(), z.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double g = spec.decay[i];
    const double k = spec.drift[i];
    if (g > 0.0) {
      out[i] = out[i] * std::exp(-g * dt) - (k / g) * std::expm1(-g * dt);
    } else {
      out[i] += k * dt;
    }
  }
  return out;
}

std::vector<double> jump_z(const ClassMSpec& spec, std::span<const double> z, SpikeSource which) {
  const auto& k = which == SpikeSource::kPre ? spec.jump_pre : spec.jump_post;
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const auto& c = k[i];
    const double factor = c.gate >= 0 ? pos(1.0 - z[c.gate]) : 1.0;
    out[i] = (c.reset ? 0.0 : z[i]) + c.add * factor;
    if (!(out[i] >= 0.0)) {
      throw std::domain_error("class-M jump left the positive orthant");
    }
  }
  return out;
}

std::pair<double, double> jump_outputs(const ClassMSpec& spec, std::span<const double> z, SpikeSource which) {
  if (which == SpikeSource::kPre) {
    return {spec.potentiation.at_pre(z), spec.depression.at_pre(z)};
  }
  return {spec.potentiation.at_post(z), spec.depression.at_post(z)};
}

FullState apply_jump(const ClassMSpec& spec, FullState state, SpikeSource which, const Reset& g) {
  const auto [dp, dd] = jump_outputs(spec, state.z, which);
  state.z = jump_z(spec, state.z, which);
  state.omega_p += dp;
  state.omega_d += dd;
  if (which == SpikeSource::kPre) {
    state.x += state.w;
  } else {
    state.x -= potential_drop(g, state.x);
  }
  return state;
}

std::pair<double, double> omega_drift(const ClassMSpec& spec, std::span<const double> z) {
  return {spec.potentiation.drift(z), spec.depression.drift(z)};
}

double next_drift_change(const ClassMSpec& spec, std::span<const double> z, double max_dt) {
  double best = kInfinity;
  auto consider = [&](const OutputFn& fn) {
    for (const auto& term : fn.terms) {
      const auto* th = std::get_if<ThresholdTerm>(&term);
      if (th == nullptr || th->rate == 0.0) {
        continue;
      }
      const double zi = z[th->index];
      const double g = spec.decay[th->index];
      const double k = spec.drift[th->index];
      double t = kInfinity;
      if (g > 0.0) {
        // z(t) = eq + (zi - eq) e^{-g t} reaches theta when the ratio exceeds 1.
        const double eq = k / g;
        const double ratio = (zi - eq) / (th->theta - eq);
        if (th->theta != eq && ratio > 1.0) {
          t = std::log(ratio) / g;
        }
      } else if (k > 0.0 && th->theta > zi) {
        t = (th->theta - zi) / k;
      }
      // A crossing closer than this is the one just processed, seen through rounding.
      if (t > 1e-12) {
        best = std::min(best, t);
      }
    }
  };
  for (const auto* ch : {&spec.potentiation, &spec.depression}) {
    consider(ch->drift);
  }
  return best <= max_dt ? best : kInfinity;
}

std::vector<DriftPiece> drift_pieces(const ClassMSpec& spec, std::span<const double> z, double dt) {
  std::vector<DriftPiece> out;
  std::vector<double> cur(z.begin(), z.end());
  double left = dt;
  while (left > 0.0) {
    double step = next_drift_change(spec, cur, left);
    if (!(step < left)) {
      step = left;
    }
    const auto mid = z_flow(spec, cur, 0.5 * step);
    const auto [rp, rd] = omega_drift(spec, mid);
    if (!out.empty() && out.back().rate_p == rp && out.back().rate_d == rd) {
      out.back().duration += step;
    } else {
      out.push_back({step, rp, rd});
    }
    cur = z_flow(spec, cur, step);
    left -= step;
  }
  return out;
}

namespace {

std::vector<CoordJump> no_jumps(std::size_t dim) { return std::vector<CoordJump>(dim); }

double require_exponential(const StdpCurve& c, const char* what) {
  if (!c.is_exponential()) {
    throw std::invalid_argument(std::string(what) + ": trace representation needs an exponential curve");
  }
  return c.decay();
}

ClassMSpec traces_base(std::string name, std::vector<std::string> labels, std::vector<double> decay) {
  ClassMSpec s;
  const std::size_t dim = decay.size();
  s.name = std::move(name);
  s.labels = std::move(labels);
  s.decay = std::move(decay);
  s.drift.assign(dim, 0.0);
  s.initial.assign(dim, 0.0);
  s.jump_pre = no_jumps(dim);
  s.jump_post = no_jumps(dim);
  return s;
}

void add_constant(OutputFn& fn, double v) {
  if (v != 0.0) {
    fn.terms.push_back(ConstantTerm{v});
  }
}

// Coordinates: 0 z_p1, 1 z_p2, 2 z_d1, 3 z_d2.
ClassMSpec pair_traces(const PairBasedSpec& k) {
  const ChannelCurves* ch[2] = {&k.potentiation, &k.depression};
  const char* name = k.scheme == PairScheme::kAllToAll           ? "all-to-all"
                     : k.scheme == PairScheme::kNearestSymmetric ? "nearest-symmetric"
                                                                 : "nearest-reduced";
  std::vector<double> decay;
  for (const auto* c : ch) {
    decay.push_back(require_exponential(c->from_pre, name));
    decay.push_back(require_exponential(c->from_post, name));
  }
  auto s = traces_base(name, {"z_p1", "z_p2", "z_d1", "z_d2"}, std::move(decay));
  ChannelOutputs* out[2] = {&s.potentiation, &s.depression};
  for (int a = 0; a < 2; ++a) {
    const int i1 = 2 * a;
    const int i2 = 2 * a + 1;
    s.jump_pre[i1].add = ch[a]->from_pre.amplitude();
    s.jump_post[i2].add = ch[a]->from_post.amplitude();
    if (k.scheme != PairScheme::kAllToAll) {
      s.jump_pre[i1].reset = true;
      s.jump_post[i2].reset = true;
    }
    if (k.scheme == PairScheme::kNearestReduced) {
      // A spike on one side invalidates the pending pairing from the other side.
      s.jump_pre[i2].reset = true;
      s.jump_post[i1].reset = true;
    }
    out[a]->at_pre.terms.push_back(TraceTerm{i2});
    out[a]->at_post.terms.push_back(TraceTerm{i1});
    add_constant(out[a]->at_pre, ch[a]->direct_pre);
    add_constant(out[a]->at_post, ch[a]->direct_post);
  }
  return s;
}

// Coordinates: 0 time since the last pre spike, 1 time since the last post spike.
ClassMSpec pair_clocks(const PairBasedSpec& k) {
  if (k.scheme == PairScheme::kAllToAll) {
    throw std::invalid_argument("all-to-all scheme has no clock representation");
  }
  const bool reduced = k.scheme == PairScheme::kNearestReduced;
  ClassMSpec s;
  s.name = reduced ? "nearest-reduced-clocks" : "nearest-symmetric-clocks";
  s.labels = {"age_pre", "age_post"};
  s.decay = {0.0, 0.0};
  s.drift = {1.0, 1.0};
  s.initial = {kInfinity, kInfinity};
  s.jump_pre = no_jumps(2);
  s.jump_post = no_jumps(2);
  s.jump_pre[0].reset = true;
  s.jump_post[1].reset = true;
  const ChannelCurves* ch[2] = {&k.potentiation, &k.depression};
  ChannelOutputs* out[2] = {&s.potentiation, &s.depression};
  for (int a = 0; a < 2; ++a) {
    out[a]->at_pre.terms.push_back(ClockCurveTerm{1, ch[a]->from_post, reduced ? 0 : -1});
    out[a]->at_post.terms.push_back(ClockCurveTerm{0, ch[a]->from_pre, reduced ? 1 : -1});
    add_constant(out[a]->at_pre, ch[a]->direct_pre);
    add_constant(out[a]->at_post, ch[a]->direct_post);
  }
  return s;
}

// Coordinates: 0 z_p1, 1 z_p2, 2 z_d1, 3 z_d2, 4 z_s1, 5 z_s2.
ClassMSpec suppression(const SuppressionSpec& k) {
  const ChannelCurves* ch[2] = {&k.potentiation, &k.depression};
  std::vector<double> decay;
  for (const auto* c : ch) {
    decay.push_back(require_exponential(c->from_pre, "suppression"));
    decay.push_back(require_exponential(c->from_post, "suppression"));
  }
  decay.push_back(require_exponential(k.suppress_pre, "suppression"));
  decay.push_back(require_exponential(k.suppress_post, "suppression"));
  if (k.suppress_pre.amplitude() > 1.0 || k.suppress_post.amplitude() > 1.0) {
    throw std::invalid_argument("suppression: curve must not exceed 1");
  }
  auto s = traces_base("suppression", {"z_p1", "z_p2", "z_d1", "z_d2", "z_s1", "z_s2"}, std::move(decay));
  ChannelOutputs* out[2] = {&s.potentiation, &s.depression};
  for (int a = 0; a < 2; ++a) {
    const int i1 = 2 * a;
    const int i2 = 2 * a + 1;
    s.jump_pre[i1] = CoordJump{ch[a]->from_pre.amplitude(), false, 4};
    s.jump_post[i2] = CoordJump{ch[a]->from_post.amplitude(), false, 5};
    out[a]->at_pre.terms.push_back(SuppressedTraceTerm{i2, 4});
    out[a]->at_post.terms.push_back(SuppressedTraceTerm{i1, 5});
  }
  s.jump_pre[4] = CoordJump{k.suppress_pre.amplitude(), true, -1};
  s.jump_post[5] = CoordJump{k.suppress_post.amplitude(), true, -1};
  return s;
}

// Coordinates: 0 z_p1, 1 z_p2, 2 z_d1, 3 z_d2, 4 y_p1, 5 y_p2, 6 y_d1, 7 y_d2.
ClassMSpec triplet(const TripletSpec& k) {
  const ChannelCurves* ch[2] = {&k.potentiation, &k.depression};
  const StdpCurve* trip[2][2] = {{&k.triplet_p_pre, &k.triplet_p_post}, {&k.triplet_d_pre, &k.triplet_d_post}};
  std::vector<double> decay;
  for (const auto* c : ch) {
    decay.push_back(require_exponential(c->from_pre, "triplet"));
    decay.push_back(require_exponential(c->from_post, "triplet"));
  }
  for (auto& t : trip) {
    decay.push_back(require_exponential(*t[0], "triplet"));
    decay.push_back(require_exponential(*t[1], "triplet"));
  }
  auto s = traces_base("triplet", {"z_p1", "z_p2", "z_d1", "z_d2", "y_p1", "y_p2", "y_d1", "y_d2"},
                       std::move(decay));
  ChannelOutputs* out[2] = {&s.potentiation, &s.depression};
  for (int a = 0; a < 2; ++a) {
    const int i1 = 2 * a;
    const int i2 = 2 * a + 1;
    const int y1 = 4 + 2 * a;
    const int y2 = 5 + 2 * a;
    s.jump_pre[i1].add = ch[a]->from_pre.amplitude();
    s.jump_post[i2].add = ch[a]->from_post.amplitude();
    s.jump_pre[y1].add = trip[a][0]->amplitude();
    s.jump_post[y2].add = trip[a][1]->amplitude();
    out[a]->at_pre.terms.push_back(BoostedTraceTerm{i2, y1});
    out[a]->at_post.terms.push_back(BoostedTraceTerm{i1, y2});
  }
  return s;
}

ClassMSpec calcium(const CalciumSpec& k) {
  if (!(k.decay > 0.0) || !std::isfinite(k.decay)) {
    throw std::invalid_argument("calcium: decay must be positive");
  }
  auto s = traces_base("calcium", {"c"}, {k.decay});
  s.initial = {k.initial};
  s.jump_pre[0].add = k.jump_pre;
  s.jump_post[0].add = k.jump_post;
  s.potentiation.drift.terms.push_back(ThresholdTerm{0, k.rate_p, k.theta_p});
  s.depression.drift.terms.push_back(ThresholdTerm{0, k.rate_d, k.theta_d});
  return s;
}

// Coordinates: 0 z_p1, 1 z_p2, 2 z_d2.
ClassMSpec voltage(const VoltageSpec& k) {
  for (double g : {k.decay_p_pre, k.decay_p_post, k.decay_d_post}) {
    if (!(g > 0.0) || !std::isfinite(g)) {
      throw std::invalid_argument("voltage: decays must be positive");
    }
  }
  auto s = traces_base("voltage", {"z_p1", "z_p2", "z_d2"}, {k.decay_p_pre, k.decay_p_post, k.decay_d_post});
  s.jump_pre[0].add = 1.0;
  s.jump_post[1].add = 1.0;
  s.jump_post[2].add = 1.0;
  s.potentiation.at_post.terms.push_back(HingeTerm{1, k.theta_d, k.amplitude_p, 0});
  s.depression.at_pre.terms.push_back(HingeTerm{2, k.theta_d, k.amplitude_d, -1});
  return s;
}

}  // namespace

ClassMSpec builtin_spec(const KernelSpec& kernel, NearestForm nearest) {
  ClassMSpec s = std::visit(
      overloaded{
          [&](const PairBasedSpec& k) {
            if (k.scheme != PairScheme::kAllToAll && nearest == NearestForm::kClocks) {
              return pair_clocks(k);
            }
            return pair_traces(k);
          },
          [](const CalciumSpec& k) { return calcium(k); },
          [](const SuppressionSpec& k) { return suppression(k); },
          [](const TripletSpec& k) { return triplet(k); },
          [](const VoltageSpec& k) { return voltage(k); },
      },
      kernel);
  validate(s);
  return s;
}

std::pair<double, double> drive_omega(const ClassMSpec& spec, const SpikeTrain& pre, const SpikeTrain& post,
                                      double alpha, double t, std::pair<double, double> omega0) {
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("drive_omega: alpha must be positive");
  }
  std::vector<double> z = spec.initial;
  auto [wp, wd] = omega0;
  double now = 0.0;
  auto advance = [&](double until) {
    for (const auto& piece : drift_pieces(spec, z, until - now)) {
      wp = exp_filter_with_input(wp, alpha, piece.rate_p, piece.duration);
      wd = exp_filter_with_input(wd, alpha, piece.rate_d, piece.duration);
    }
    z = z_flow(spec, z, until - now);
    now = until;
  };
  std::size_t i = 0;
  std::size_t j = 0;
  while (true) {
    const double tp = i < pre.size() ? pre[i] : kInfinity;
    const double tq = j < post.size() ? post[j] : kInfinity;
    const bool is_pre = tp <= tq;
    const double te = is_pre ? tp : tq;
    if (te > t) {
      break;
    }
    advance(te);
    const auto which = is_pre ? SpikeSource::kPre : SpikeSource::kPost;
    const auto [dp, dd] = jump_outputs(spec, z, which);
    wp += dp;
    wd += dd;
    z = jump_z(spec, z, which);
    (is_pre ? i : j)++;
  }
  advance(t);
  return {wp, wd};
}

double generator_apply(const ClassMSpec& spec, double w, const TestFunction& f, const FastState& v,
                       const NeuronSpec& neuron) {
  const double f0 = f.value(v);
  const FastGradient grad = f.gradient(v);
  double flow = -v.x * grad.dx;
  for (std::size_t i = 0; i < v.z.size(); ++i) {
    const double dzi = (spec.decay[i] > 0.0 ? -spec.decay[i] * v.z[i] : 0.0) + spec.drift[i];
    if (dzi != 0.0) {
      flow += dzi * grad.dz[i];
    }
  }
  const FastState after_pre{v.x + w, jump_z(spec, v.z, SpikeSource::kPre)};
  const FastState after_post{v.x - potential_drop(neuron.reset, v.x), jump_z(spec, v.z, SpikeSource::kPost)};
  const double beta = firing_rate(neuron.activation, v.x);
  double out = flow + neuron.pre_rate * (f.value(after_pre) - f0);
  if (beta != 0.0) {
    out += beta * (f.value(after_post) - f0);
  }
  return out;
}

}  // namespace stdpsim
