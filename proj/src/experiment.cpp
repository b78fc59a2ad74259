#include "stdpsim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "stdpsim/validation.hpp"

#ifndef STDPSIM_VERSION
#define STDPSIM_VERSION "unknown"
#endif

namespace stdpsim {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

std::string index_path(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError((path.empty() ? std::string("document") : path) + ": " + what);
}

// ---- reading ---------------------------------------------------------------

double read_real(const json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  fail(path, "expected a number (or \"inf\", \"-inf\")");
}

long read_long(const json& j, const std::string& path) {
  if (j.is_number_integer()) {
    if (j.is_number_unsigned() && j.get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<long>::max())) {
      fail(path, "integer out of range");
    }
    return j.get<long>();
  }
  fail(path, "expected an integer");
}

std::uint64_t read_u64(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) {
    if (j.get<std::int64_t>() < 0) fail(path, "expected a non-negative integer");
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  }
  fail(path, "expected an integer");
}

bool read_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected true or false");
  return j.get<bool>();
}

std::string read_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

template <class F>
auto read_array(const json& j, const std::string& path, F&& item) {
  if (!j.is_array()) fail(path, "expected an array");
  std::vector<decltype(item(j, path))> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(item(j[i], index_path(path, i)));
  return out;
}

std::vector<double> read_reals(const json& j, const std::string& path) { return read_array(j, path, read_real); }
std::vector<long> read_longs(const json& j, const std::string& path) { return read_array(j, path, read_long); }

/// Object reader that rejects keys nobody asked for.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) fail(path_, "expected an object");
  }

  const std::string& path() const { return path_; }
  std::string field(const std::string& key) const { return join(path_, key); }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& at(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) fail(field(key), "missing field");
    return j_.at(key);
  }

  const json* find(const std::string& key) {
    used_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void real(const std::string& key, double& dst) {
    if (const auto* v = find(key)) dst = read_real(*v, field(key));
  }
  void integer(const std::string& key, long& dst) {
    if (const auto* v = find(key)) dst = read_long(*v, field(key));
  }
  void integer(const std::string& key, int& dst) {
    if (const auto* v = find(key)) {
      const long x = read_long(*v, field(key));
      if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) fail(field(key), "integer out of range");
      dst = static_cast<int>(x);
    }
  }
  void count(const std::string& key, std::uint64_t& dst) {
    if (const auto* v = find(key)) dst = read_u64(*v, field(key));
  }
  void boolean(const std::string& key, bool& dst) {
    if (const auto* v = find(key)) dst = read_bool(*v, field(key));
  }
  void text(const std::string& key, std::string& dst) {
    if (const auto* v = find(key)) dst = read_string(*v, field(key));
  }
  void reals(const std::string& key, std::vector<double>& dst) {
    if (const auto* v = find(key)) dst = read_reals(*v, field(key));
  }
  void longs(const std::string& key, std::vector<long>& dst) {
    if (const auto* v = find(key)) dst = read_longs(*v, field(key));
  }

  std::string type() { return read_string(at("type"), field("type")); }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) fail(field(key), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

/// Runs `make` and reports any exception it raises against `path`.
template <class F>
auto guarded(const std::string& path, F&& make) {
  try {
    return make();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail(path, e.what());
  }
}

// ---- writing ---------------------------------------------------------------

json jreal(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

json jreals(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(jreal(x));
  return a;
}

// ---- curves and kernels ----------------------------------------------------

StdpCurve read_curve(const json& j, const std::string& path) {
  Obj o(j, path);
  const std::string type = o.type();
  StdpCurve c;
  if (type == "zero") {
  } else if (type == "exponential") {
    const double a = read_real(o.at("amplitude"), o.field("amplitude"));
    const double d = read_real(o.at("decay"), o.field("decay"));
    c = guarded(path, [&] { return StdpCurve::exponential(a, d); });
  } else if (type == "table") {
    const auto pts = read_array(o.at("points"), o.field("points"), [](const json& p, const std::string& pp) {
      const auto xy = read_reals(p, pp);
      if (xy.size() != 2) fail(pp, "expected a [delay, value] pair");
      return std::pair{xy[0], xy[1]};
    });
    bool non_increasing = true;
    o.boolean("non_increasing", non_increasing);
    c = guarded(path, [&] { return StdpCurve::tabulated(pts, non_increasing); });
  } else {
    fail(o.field("type"), "unknown curve type \"" + type + "\" (zero, exponential, table)");
  }
  o.finish();
  return c;
}

json write_curve(const StdpCurve& c) {
  if (c.is_exponential()) return {{"type", "exponential"}, {"amplitude", jreal(c.amplitude())}, {"decay", jreal(c.decay())}};
  json pts = json::array();
  bool non_increasing = true;
  for (std::size_t i = 0; i < c.points().size(); ++i) {
    pts.push_back({jreal(c.points()[i].first), jreal(c.points()[i].second)});
    if (i > 0 && c.points()[i].second > c.points()[i - 1].second) non_increasing = false;
  }
  return {{"type", "table"}, {"points", pts}, {"non_increasing", non_increasing}};
}

ChannelCurves read_channel(const json& j, const std::string& path) {
  Obj o(j, path);
  ChannelCurves c;
  if (const auto* v = o.find("from_pre")) c.from_pre = read_curve(*v, o.field("from_pre"));
  if (const auto* v = o.find("from_post")) c.from_post = read_curve(*v, o.field("from_post"));
  o.real("direct_pre", c.direct_pre);
  o.real("direct_post", c.direct_post);
  o.finish();
  return c;
}

json write_channel(const ChannelCurves& c) {
  return {{"from_pre", write_curve(c.from_pre)},
          {"from_post", write_curve(c.from_post)},
          {"direct_pre", jreal(c.direct_pre)},
          {"direct_post", jreal(c.direct_post)}};
}

const std::pair<PairScheme, const char*> kSchemes[] = {{PairScheme::kAllToAll, "all-to-all"},
                                                       {PairScheme::kNearestSymmetric, "nearest-symmetric"},
                                                       {PairScheme::kNearestReduced, "nearest-reduced"}};

CoordJump read_coord_jump(const json& j, const std::string& path) {
  Obj o(j, path);
  CoordJump c;
  o.real("add", c.add);
  o.boolean("reset", c.reset);
  o.integer("gate", c.gate);
  o.finish();
  return c;
}

OutputTerm read_term(const json& j, const std::string& path) {
  Obj o(j, path);
  const std::string type = o.type();
  OutputTerm term;
  if (type == "constant") {
    ConstantTerm t;
    o.real("value", t.value);
    term = t;
  } else if (type == "trace") {
    TraceTerm t;
    o.integer("index", t.index);
    term = t;
  } else if (type == "suppressed-trace") {
    SuppressedTraceTerm t;
    o.integer("index", t.index);
    o.integer("gate", t.gate);
    term = t;
  } else if (type == "boosted-trace") {
    BoostedTraceTerm t;
    o.integer("index", t.index);
    o.integer("boost", t.boost);
    term = t;
  } else if (type == "clock-curve") {
    ClockCurveTerm t;
    o.integer("clock", t.clock);
    t.curve = read_curve(o.at("curve"), o.field("curve"));
    o.integer("guard", t.guard);
    term = t;
  } else if (type == "threshold") {
    ThresholdTerm t;
    o.integer("index", t.index);
    o.real("rate", t.rate);
    o.real("theta", t.theta);
    term = t;
  } else if (type == "hinge") {
    HingeTerm t;
    o.integer("index", t.index);
    o.real("theta", t.theta);
    o.real("scale", t.scale);
    o.integer("multiplier", t.multiplier);
    term = t;
  } else {
    fail(o.field("type"), "unknown output term \"" + type + "\"");
  }
  o.finish();
  return term;
}

json write_term(const OutputTerm& term) {
  struct V {
    json operator()(const ConstantTerm& t) const { return {{"type", "constant"}, {"value", jreal(t.value)}}; }
    json operator()(const TraceTerm& t) const { return {{"type", "trace"}, {"index", t.index}}; }
    json operator()(const SuppressedTraceTerm& t) const {
      return {{"type", "suppressed-trace"}, {"index", t.index}, {"gate", t.gate}};
    }
    json operator()(const BoostedTraceTerm& t) const {
      return {{"type", "boosted-trace"}, {"index", t.index}, {"boost", t.boost}};
    }
    json operator()(const ClockCurveTerm& t) const {
      return {{"type", "clock-curve"}, {"clock", t.clock}, {"curve", write_curve(t.curve)}, {"guard", t.guard}};
    }
    json operator()(const ThresholdTerm& t) const {
      return {{"type", "threshold"}, {"index", t.index}, {"rate", jreal(t.rate)}, {"theta", jreal(t.theta)}};
    }
    json operator()(const HingeTerm& t) const {
      return {{"type", "hinge"},
              {"index", t.index},
              {"theta", jreal(t.theta)},
              {"scale", jreal(t.scale)},
              {"multiplier", t.multiplier}};
    }
  };
  return std::visit(V{}, term);
}

OutputFn read_output(const json& j, const std::string& path) { return OutputFn{read_array(j, path, read_term)}; }

json write_output(const OutputFn& f) {
  json a = json::array();
  for (const auto& t : f.terms) a.push_back(write_term(t));
  return a;
}

ChannelOutputs read_outputs(const json& j, const std::string& path) {
  Obj o(j, path);
  ChannelOutputs c;
  if (const auto* v = o.find("drift")) c.drift = read_output(*v, o.field("drift"));
  if (const auto* v = o.find("at_pre")) c.at_pre = read_output(*v, o.field("at_pre"));
  if (const auto* v = o.find("at_post")) c.at_post = read_output(*v, o.field("at_post"));
  o.finish();
  return c;
}

json write_outputs(const ChannelOutputs& c) {
  return {{"drift", write_output(c.drift)}, {"at_pre", write_output(c.at_pre)}, {"at_post", write_output(c.at_post)}};
}

ClassMSpec read_class_m(Obj& o) {
  ClassMSpec s;
  o.text("name", s.name);
  if (const auto* v = o.find("labels")) s.labels = read_array(*v, o.field("labels"), read_string);
  s.decay = read_reals(o.at("decay"), o.field("decay"));
  s.drift.assign(s.decay.size(), 0.0);
  s.initial.assign(s.decay.size(), 0.0);
  o.reals("drift", s.drift);
  o.reals("initial", s.initial);
  s.jump_pre = read_array(o.at("jump_pre"), o.field("jump_pre"), read_coord_jump);
  s.jump_post = read_array(o.at("jump_post"), o.field("jump_post"), read_coord_jump);
  if (const auto* v = o.find("potentiation")) s.potentiation = read_outputs(*v, o.field("potentiation"));
  if (const auto* v = o.find("depression")) s.depression = read_outputs(*v, o.field("depression"));
  guarded(o.path(), [&] {
    validate(s);
    return 0;
  });
  return s;
}

json write_class_m(const ClassMSpec& s) {
  json jumps_pre = json::array(), jumps_post = json::array();
  for (const auto& c : s.jump_pre) jumps_pre.push_back({{"add", jreal(c.add)}, {"reset", c.reset}, {"gate", c.gate}});
  for (const auto& c : s.jump_post) jumps_post.push_back({{"add", jreal(c.add)}, {"reset", c.reset}, {"gate", c.gate}});
  return {{"type", "class-m"},
          {"name", s.name},
          {"labels", s.labels},
          {"decay", jreals(s.decay)},
          {"drift", jreals(s.drift)},
          {"initial", jreals(s.initial)},
          {"jump_pre", jumps_pre},
          {"jump_post", jumps_post},
          {"potentiation", write_outputs(s.potentiation)},
          {"depression", write_outputs(s.depression)}};
}

KernelConfig read_kernel(const json& j, const std::string& path) {
  Obj o(j, path);
  const std::string type = o.type();
  KernelConfig k;
  auto curve = [&](const char* key, StdpCurve& dst) {
    if (const auto* v = o.find(key)) dst = read_curve(*v, o.field(key));
  };
  auto channel = [&](const char* key, ChannelCurves& dst) {
    if (const auto* v = o.find(key)) dst = read_channel(*v, o.field(key));
  };
  if (type == "pair-based") {
    PairBasedSpec s;
    channel("potentiation", s.potentiation);
    channel("depression", s.depression);
    if (const auto* v = o.find("scheme")) {
      const auto name = read_string(*v, o.field("scheme"));
      const auto it = std::find_if(std::begin(kSchemes), std::end(kSchemes), [&](auto& e) { return name == e.second; });
      if (it == std::end(kSchemes)) fail(o.field("scheme"), "expected all-to-all, nearest-symmetric or nearest-reduced");
      s.scheme = it->first;
    }
    k.source = KernelSpec{s};
  } else if (type == "calcium") {
    CalciumSpec s;
    o.real("jump_pre", s.jump_pre);
    o.real("jump_post", s.jump_post);
    o.real("decay", s.decay);
    o.real("theta_p", s.theta_p);
    o.real("theta_d", s.theta_d);
    o.real("rate_p", s.rate_p);
    o.real("rate_d", s.rate_d);
    o.real("initial", s.initial);
    k.source = KernelSpec{s};
  } else if (type == "suppression") {
    SuppressionSpec s;
    channel("potentiation", s.potentiation);
    channel("depression", s.depression);
    curve("suppress_pre", s.suppress_pre);
    curve("suppress_post", s.suppress_post);
    k.source = KernelSpec{s};
  } else if (type == "triplet") {
    TripletSpec s;
    channel("potentiation", s.potentiation);
    channel("depression", s.depression);
    curve("triplet_p_pre", s.triplet_p_pre);
    curve("triplet_p_post", s.triplet_p_post);
    curve("triplet_d_pre", s.triplet_d_pre);
    curve("triplet_d_post", s.triplet_d_post);
    k.source = KernelSpec{s};
  } else if (type == "voltage") {
    VoltageSpec s;
    o.real("amplitude_p", s.amplitude_p);
    o.real("amplitude_d", s.amplitude_d);
    o.real("decay_p_pre", s.decay_p_pre);
    o.real("decay_p_post", s.decay_p_post);
    o.real("decay_d_post", s.decay_d_post);
    o.real("theta_d", s.theta_d);
    k.source = KernelSpec{s};
  } else if (type == "class-m") {
    k.source = read_class_m(o);
  } else {
    fail(o.field("type"), "unknown kernel type \"" + type + "\" (pair-based, calcium, suppression, triplet, voltage, class-m)");
  }
  if (type != "class-m") {
    if (const auto* v = o.find("nearest_form")) {
      const auto name = read_string(*v, o.field("nearest_form"));
      if (name == "reset-traces") {
        k.nearest = NearestForm::kResetTraces;
      } else if (name == "clocks") {
        k.nearest = NearestForm::kClocks;
      } else {
        fail(o.field("nearest_form"), "expected reset-traces or clocks");
      }
    }
  }
  o.finish();
  return k;
}

json write_kernel(const KernelConfig& k) {
  if (const auto* m = std::get_if<ClassMSpec>(&k.source)) return write_class_m(*m);
  struct V {
    json operator()(const PairBasedSpec& s) const {
      const auto it = std::find_if(std::begin(kSchemes), std::end(kSchemes), [&](auto& e) { return e.first == s.scheme; });
      return {{"type", "pair-based"},
              {"scheme", it->second},
              {"potentiation", write_channel(s.potentiation)},
              {"depression", write_channel(s.depression)}};
    }
    json operator()(const CalciumSpec& s) const {
      return {{"type", "calcium"},          {"jump_pre", jreal(s.jump_pre)}, {"jump_post", jreal(s.jump_post)},
              {"decay", jreal(s.decay)},    {"theta_p", jreal(s.theta_p)},   {"theta_d", jreal(s.theta_d)},
              {"rate_p", jreal(s.rate_p)},  {"rate_d", jreal(s.rate_d)},     {"initial", jreal(s.initial)}};
    }
    json operator()(const SuppressionSpec& s) const {
      return {{"type", "suppression"},
              {"potentiation", write_channel(s.potentiation)},
              {"depression", write_channel(s.depression)},
              {"suppress_pre", write_curve(s.suppress_pre)},
              {"suppress_post", write_curve(s.suppress_post)}};
    }
    json operator()(const TripletSpec& s) const {
      return {{"type", "triplet"},
              {"potentiation", write_channel(s.potentiation)},
              {"depression", write_channel(s.depression)},
              {"triplet_p_pre", write_curve(s.triplet_p_pre)},
              {"triplet_p_post", write_curve(s.triplet_p_post)},
              {"triplet_d_pre", write_curve(s.triplet_d_pre)},
              {"triplet_d_post", write_curve(s.triplet_d_post)}};
    }
    json operator()(const VoltageSpec& s) const {
      return {{"type", "voltage"},
              {"amplitude_p", jreal(s.amplitude_p)},
              {"amplitude_d", jreal(s.amplitude_d)},
              {"decay_p_pre", jreal(s.decay_p_pre)},
              {"decay_p_post", jreal(s.decay_p_post)},
              {"decay_d_post", jreal(s.decay_d_post)},
              {"theta_d", jreal(s.theta_d)}};
    }
  };
  json out = std::visit(V{}, std::get<KernelSpec>(k.source));
  out["nearest_form"] = k.nearest == NearestForm::kClocks ? "clocks" : "reset-traces";
  return out;
}

// ---- neuron and rule -------------------------------------------------------

NeuronSpec read_neuron(const json& j, const std::string& path) {
  Obj o(j, path);
  NeuronSpec n;
  o.real("pre_rate", n.pre_rate);
  if (const auto* v = o.find("activation")) {
    Obj a(*v, o.field("activation"));
    const auto type = a.type();
    if (type == "linear") {
      LinearActivation l;
      a.real("slope", l.slope);
      a.real("cutoff", l.cutoff);
      n.activation = l;
    } else if (type == "sigmoid") {
      SigmoidActivation s;
      a.real("max_rate", s.max_rate);
      a.real("gain", s.gain);
      a.real("midpoint", s.midpoint);
      a.real("cutoff", s.cutoff);
      n.activation = s;
    } else if (type == "table") {
      TableActivation t;
      a.reals("edges", t.edges);
      a.reals("values", t.values);
      n.activation = t;
    } else {
      fail(a.field("type"), "unknown activation \"" + type + "\" (linear, sigmoid, table)");
    }
    a.finish();
  }
  if (const auto* v = o.find("reset")) {
    Obj r(*v, o.field("reset"));
    const auto type = r.type();
    if (type == "full") {
      n.reset = FullReset{};
    } else if (type == "constant-drop") {
      ConstantDrop d;
      r.real("drop", d.drop);
      n.reset = d;
    } else if (type == "none") {
      n.reset = NoReset{};
    } else {
      fail(r.field("type"), "unknown reset \"" + type + "\" (full, constant-drop, none)");
    }
    r.finish();
  }
  o.finish();
  guarded(path, [&] {
    validate(n);
    return 0;
  });
  return n;
}

json write_neuron(const NeuronSpec& n) {
  struct A {
    json operator()(const LinearActivation& a) const {
      return {{"type", "linear"}, {"slope", jreal(a.slope)}, {"cutoff", jreal(a.cutoff)}};
    }
    json operator()(const SigmoidActivation& a) const {
      return {{"type", "sigmoid"},
              {"max_rate", jreal(a.max_rate)},
              {"gain", jreal(a.gain)},
              {"midpoint", jreal(a.midpoint)},
              {"cutoff", jreal(a.cutoff)}};
    }
    json operator()(const TableActivation& a) const {
      return {{"type", "table"}, {"edges", jreals(a.edges)}, {"values", jreals(a.values)}};
    }
  };
  struct R {
    json operator()(const FullReset&) const { return {{"type", "full"}}; }
    json operator()(const ConstantDrop& d) const { return {{"type", "constant-drop"}, {"drop", jreal(d.drop)}}; }
    json operator()(const NoReset&) const { return {{"type", "none"}}; }
  };
  return {{"pre_rate", jreal(n.pre_rate)},
          {"activation", std::visit(A{}, n.activation)},
          {"reset", std::visit(R{}, n.reset)}};
}

WeightRule read_rule(const json& j, const std::string& path) {
  Obj o(j, path);
  const auto type = o.type();
  WeightRule rule;
  if (type == "additive") {
    rule = AdditiveRule{};
  } else if (type == "bounded-multiplicative") {
    BoundedMultiplicativeRule r;
    o.real("a_d", r.a_d);
    o.real("a_p", r.a_p);
    o.real("a_r", r.a_r);
    o.real("exponent", r.exponent);
    o.real("homeostasis", r.homeostasis);
    rule = r;
  } else if (type == "excitatory") {
    rule = ExcitatoryRule{};
  } else if (type == "gated-linear") {
    GatedLinearRule r;
    o.real("a_p", r.a_p);
    o.real("a_d", r.a_d);
    rule = r;
  } else {
    fail(o.field("type"), "unknown rule \"" + type + "\" (additive, bounded-multiplicative, excitatory, gated-linear)");
  }
  o.finish();
  guarded(path, [&] {
    validate(rule);
    return 0;
  });
  return rule;
}

json write_rule(const WeightRule& rule) {
  struct V {
    json operator()(const AdditiveRule&) const { return {{"type", "additive"}}; }
    json operator()(const BoundedMultiplicativeRule& r) const {
      return {{"type", "bounded-multiplicative"}, {"a_d", jreal(r.a_d)},           {"a_p", jreal(r.a_p)},
              {"a_r", jreal(r.a_r)},              {"exponent", jreal(r.exponent)}, {"homeostasis", jreal(r.homeostasis)}};
    }
    json operator()(const ExcitatoryRule&) const { return {{"type", "excitatory"}}; }
    json operator()(const GatedLinearRule& r) const {
      return {{"type", "gated-linear"}, {"a_p", jreal(r.a_p)}, {"a_d", jreal(r.a_d)}};
    }
  };
  return std::visit(V{}, rule);
}

// ---- models ----------------------------------------------------------------

std::optional<SpikeTrain> read_train(Obj& o, const std::string& key) {
  const auto* v = o.find(key);
  if (!v || v->is_null()) return std::nullopt;
  auto times = read_reals(*v, o.field(key));
  return guarded(o.field(key), [&] { return SpikeTrain(std::move(times)); });
}

ContinuousModel read_continuous(const json& j, const std::string& path) {
  Obj o(j, path);
  ContinuousModel m;
  SimConfig& c = m.sim;
  if (const auto* v = o.find("neuron")) c.neuron = read_neuron(*v, o.field("neuron"));
  m.kernel = read_kernel(o.at("kernel"), o.field("kernel"));
  if (const auto* v = o.find("rule")) c.rule = read_rule(*v, o.field("rule"));
  o.real("alpha", c.alpha);
  o.real("horizon", c.horizon);
  o.real("max_step", c.max_step);
  o.real("sample_interval", c.sample_interval);
  o.real("x0", c.x0);
  o.real("w0", c.w0);
  o.real("omega_p0", c.omega_p0);
  o.real("omega_d0", c.omega_d0);
  o.count("max_events", c.max_events);
  o.boolean("record_events", c.record_events);
  c.forced_pre = read_train(o, "forced_pre");
  c.forced_post = read_train(o, "forced_post");
  o.finish();
  c.kernel = guarded(o.field("kernel"), [&] { return m.kernel.resolve(); });
  return m;
}

json write_train(const std::optional<SpikeTrain>& m) { return m ? jreals(m->times()) : json(nullptr); }

json write_continuous(const ContinuousModel& m) {
  const SimConfig& c = m.sim;
  return {{"neuron", write_neuron(c.neuron)},
          {"kernel", write_kernel(m.kernel)},
          {"rule", write_rule(c.rule)},
          {"alpha", jreal(c.alpha)},
          {"horizon", jreal(c.horizon)},
          {"max_step", jreal(c.max_step)},
          {"sample_interval", jreal(c.sample_interval)},
          {"x0", jreal(c.x0)},
          {"w0", jreal(c.w0)},
          {"omega_p0", jreal(c.omega_p0)},
          {"omega_d0", jreal(c.omega_d0)},
          {"max_events", c.max_events},
          {"record_events", c.record_events},
          {"forced_pre", write_train(c.forced_pre)},
          {"forced_post", write_train(c.forced_post)}};
}

DiscreteParams read_params(const json& j, const std::string& path) {
  Obj o(j, path);
  DiscreteParams p;
  o.real("lambda", p.lambda);
  o.real("beta", p.beta);
  o.reals("gamma", p.gamma);
  o.longs("k0", p.k0);
  o.longs("k1", p.k1);
  o.longs("k2", p.k2);
  o.integer("a_p", p.a_p);
  o.integer("a_d", p.a_d);
  o.real("mu", p.mu);
  o.integer("w", p.w);
  o.finish();
  guarded(path, [&] {
    validate(p);
    return 0;
  });
  return p;
}

json write_params(const DiscreteParams& p) {
  return {{"lambda", jreal(p.lambda)}, {"beta", jreal(p.beta)}, {"gamma", jreals(p.gamma)}, {"k0", p.k0},
          {"k1", p.k1},                {"k2", p.k2},            {"a_p", p.a_p},              {"a_d", p.a_d},
          {"mu", jreal(p.mu)},         {"w", p.w}};
}

DiscreteFullConfig read_discrete(const json& j, const std::string& path) {
  Obj o(j, path);
  DiscreteFullConfig c;
  c.params = read_params(o.at("params"), o.field("params"));
  if (const auto* v = o.find("drive")) {
    Obj d(*v, o.field("drive"));
    d.real("theta_p", c.drive.theta_p);
    d.real("theta_d", c.drive.theta_d);
    d.real("rate_p", c.drive.rate_p);
    d.real("rate_d", c.drive.rate_d);
    d.finish();
  }
  o.real("alpha", c.alpha);
  o.real("horizon", c.horizon);
  if (const auto* v = o.find("initial")) {
    Obj s(*v, o.field("initial"));
    s.integer("x", c.initial.x);
    s.longs("z", c.initial.z);
    s.real("omega_p", c.initial.omega_p);
    s.real("omega_d", c.initial.omega_d);
    s.integer("w", c.initial.w);
    s.finish();
  }
  o.real("sample_interval", c.sample_interval);
  o.boolean("record_events", c.record_events);
  o.boolean("filtered", c.filtered);
  o.count("max_events", c.max_events);
  o.finish();
  return c;
}

json write_discrete(const DiscreteFullConfig& c) {
  return {{"params", write_params(c.params)},
          {"drive",
           {{"theta_p", jreal(c.drive.theta_p)},
            {"theta_d", jreal(c.drive.theta_d)},
            {"rate_p", jreal(c.drive.rate_p)},
            {"rate_d", jreal(c.drive.rate_d)}}},
          {"alpha", jreal(c.alpha)},
          {"horizon", jreal(c.horizon)},
          {"initial",
           {{"x", c.initial.x},
            {"z", c.initial.z},
            {"omega_p", jreal(c.initial.omega_p)},
            {"omega_d", jreal(c.initial.omega_d)},
            {"w", c.initial.w}}},
          {"sample_interval", jreal(c.sample_interval)},
          {"record_events", c.record_events},
          {"filtered", c.filtered},
          {"max_events", c.max_events}};
}

FastModel read_fast(const json& j, const std::string& path) {
  Obj o(j, path);
  FastModel m;
  m.params = read_params(o.at("params"), o.field("params"));
  o.real("horizon", m.horizon);
  o.reals("u_grid", m.u_grid);
  o.integer("batches", m.batches);
  o.integer("x0", m.x0);
  o.integer("c0", m.c0);
  o.finish();
  return m;
}

json write_fast(const FastModel& m) {
  return {{"params", write_params(m.params)}, {"horizon", jreal(m.horizon)}, {"u_grid", jreals(m.u_grid)},
          {"batches", m.batches},             {"x0", m.x0},                  {"c0", m.c0}};
}

const std::pair<Engine, const char*> kEngines[] = {{Engine::kContinuous, "continuous"},
                                                   {Engine::kContinuousUnfiltered, "continuous-unfiltered"},
                                                   {Engine::kDiscrete, "discrete"},
                                                   {Engine::kDiscreteFast, "discrete-fast"}};

Engine read_engine(const json& j, const std::string& path) {
  const auto name = read_string(j, path);
  for (const auto& [e, n] : kEngines) {
    if (name == n) return e;
  }
  fail(path, "unknown engine \"" + name + "\" (continuous, continuous-unfiltered, discrete, discrete-fast)");
}

void read_model(RunSpec& run, const json& j, const std::string& path) {
  switch (run.engine) {
    case Engine::kContinuous:
    case Engine::kContinuousUnfiltered: run.continuous = read_continuous(j, path); break;
    case Engine::kDiscrete: run.discrete = read_discrete(j, path); break;
    case Engine::kDiscreteFast: run.fast = read_fast(j, path); break;
  }
}

json write_model(const RunSpec& run) {
  switch (run.engine) {
    case Engine::kContinuous:
    case Engine::kContinuousUnfiltered: return write_continuous(run.continuous);
    case Engine::kDiscrete: return write_discrete(run.discrete);
    case Engine::kDiscreteFast: return write_fast(run.fast);
  }
  return nullptr;
}

RunSpec read_run(const json& j, const std::string& path) {
  Obj o(j, path);
  RunSpec run;
  run.name = read_string(o.at("name"), o.field("name"));
  run.engine = read_engine(o.at("engine"), o.field("engine"));
  read_model(run, o.at("model"), o.field("model"));
  o.finish();
  return run;
}

bool safe_name(const std::string& s) {
  return !s.empty() && s.size() <= 100 && s.front() != '.' &&
         std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'; });
}

constexpr const char* kManifestFormat = "stdpsim-manifest/1";

}  // namespace

const char* engine_name(Engine e) {
  for (const auto& [k, n] : kEngines) {
    if (k == e) return n;
  }
  return "?";
}

ClassMSpec KernelConfig::resolve() const {
  if (const auto* m = std::get_if<ClassMSpec>(&source)) return *m;
  return builtin_spec(std::get<KernelSpec>(source), nearest);
}

ExperimentConfig parse_experiment(const json& doc) {
  if (doc.is_object() && doc.contains("format")) {
    Obj m(doc, "");
    const auto format = read_string(m.at("format"), "format");
    if (format != kManifestFormat) fail("format", "unsupported manifest format \"" + format + "\"");
    for (const char* key : {"version", "seeds", "files", "failures"}) m.find(key);
    const auto& inner = m.at("config");
    m.finish();
    try {
      return parse_experiment(inner);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("config.") + e.what());
    }
  }
  Obj o(doc, "");
  ExperimentConfig c;
  c.scenario = read_string(o.at("scenario"), "scenario");
  c.seeds = read_array(o.at("seeds"), "seeds", read_u64);
  o.text("output", c.output);
  if (const auto* v = o.find("report")) {
    Obj r(*v, "report");
    r.boolean("summary", c.report.summary);
    if (const auto* f = r.find("trace_format")) {
      const auto name = read_string(*f, "report.trace_format");
      if (name == "csv") {
        c.report.trace_format = TraceFormat::kCsv;
      } else if (name == "jsonl") {
        c.report.trace_format = TraceFormat::kJsonl;
      } else {
        fail("report.trace_format", "expected csv or jsonl");
      }
    }
    r.finish();
  }
  if (o.has("runs")) {
    if (o.has("engine") || o.has("model")) fail("runs", "give either runs or engine and model, not both");
    c.runs = read_array(o.at("runs"), "runs", read_run);
  } else {
    RunSpec run;
    run.name = c.scenario;
    run.engine = read_engine(o.at("engine"), "engine");
    read_model(run, o.at("model"), "model");
    c.runs.push_back(std::move(run));
  }
  o.finish();
  validate(c);
  return c;
}

ExperimentConfig parse_experiment(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, column = 1;
    const std::size_t end = std::min(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ConfigError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + e.what());
  }
  return parse_experiment(doc);
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_experiment(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

json to_json(const ExperimentConfig& c) {
  json runs = json::array();
  for (const auto& r : c.runs) {
    runs.push_back({{"name", r.name}, {"engine", engine_name(r.engine)}, {"model", write_model(r)}});
  }
  return {{"scenario", c.scenario},
          {"seeds", c.seeds},
          {"output", c.output},
          {"report",
           {{"summary", c.report.summary},
            {"trace_format", c.report.trace_format == TraceFormat::kJsonl ? "jsonl" : "csv"}}},
          {"runs", runs}};
}

void apply_overrides(ExperimentConfig& c, const Overrides& o) {
  if (o.seed) c.seeds = {*o.seed};
  if (o.output) c.output = *o.output;
  if (o.horizon) {
    for (auto& r : c.runs) {
      r.continuous.sim.horizon = *o.horizon;
      r.discrete.horizon = *o.horizon;
      r.fast.horizon = *o.horizon;
    }
  }
  validate(c);
}

void validate(const ExperimentConfig& c) {
  if (c.seeds.empty()) fail("seeds", "the seed list is empty");
  if (c.runs.empty()) fail("runs", "no runs");
  if (c.output.empty()) fail("output", "empty output directory");
  std::set<std::string> names;
  for (std::size_t i = 0; i < c.runs.size(); ++i) {
    const auto& r = c.runs[i];
    const std::string path = index_path("runs", i);
    if (!safe_name(r.name)) fail(path + ".name", "use letters, digits, '-', '_' and '.' only");
    if (!names.insert(r.name).second) fail(path + ".name", "duplicate run name \"" + r.name + "\"");
    const bool continuous = r.engine == Engine::kContinuous || r.engine == Engine::kContinuousUnfiltered;
    if (!continuous && c.report.trace_format == TraceFormat::kJsonl) {
      fail("report.trace_format", "jsonl traces are available for the continuous engines only");
    }
    guarded(path + ".model", [&] {
      switch (r.engine) {
        case Engine::kContinuous: validate(r.continuous.sim); break;
        case Engine::kContinuousUnfiltered:
          validate(r.continuous.sim);
          if (!std::holds_alternative<AdditiveRule>(r.continuous.sim.rule) &&
              !std::holds_alternative<GatedLinearRule>(r.continuous.sim.rule)) {
            throw std::invalid_argument("the unfiltered engine supports the additive and gated-linear rules only");
          }
          break;
        case Engine::kDiscrete: validate(r.discrete); break;
        case Engine::kDiscreteFast: {
          const auto& f = r.fast;
          validate(f.params);
          if (!f.params.is_calcium()) throw std::invalid_argument("discrete-fast needs the calcium form");
          if (!(f.horizon > 0.0) || !std::isfinite(f.horizon)) throw std::invalid_argument("horizon must be positive");
          if (f.batches < 1) throw std::invalid_argument("batches must be positive");
          if (f.x0 < 0 || f.c0 < 0) throw std::invalid_argument("initial counts must be non-negative");
          for (double u : f.u_grid) {
            if (!(u >= 0.0 && u <= 1.0)) throw std::invalid_argument("u_grid values must lie in [0, 1]");
          }
          break;
        }
      }
      return 0;
    });
  }
}

std::string build_version() { return STDPSIM_VERSION; }

namespace {

json state_json(const FullState& s) {
  return {{"x", jreal(s.x)}, {"z", jreals(s.z)}, {"omega_p", jreal(s.omega_p)}, {"omega_d", jreal(s.omega_d)},
          {"w", jreal(s.w)}};
}

json batched(const BatchedMean& b) { return {{"mean", jreal(b.mean)}, {"std_error", jreal(b.std_error)}}; }

/// Runs one (run, seed) pair, writes its trace and returns its summary.
json execute(const RunSpec& run, std::uint64_t seed, TraceFormat format, const std::filesystem::path& file) {
  std::ostringstream trace;
  json stats = {{"seed", seed}};
  switch (run.engine) {
    case Engine::kContinuous:
    case Engine::kContinuousUnfiltered: {
      SimConfig c = run.continuous.sim;
      c.seed = seed;
      const auto res = run.engine == Engine::kContinuous ? stdpsim::run(c) : run_unfiltered(c);
      if (format == TraceFormat::kJsonl) {
        write_trace_jsonl(trace, c.kernel.labels, res.trace);
      } else {
        write_trace_csv(trace, c.kernel.labels, res.trace);
      }
      double lo = res.trace.front().w, hi = lo;
      for (const auto& r : res.trace) {
        lo = std::min(lo, r.w);
        hi = std::max(hi, r.w);
      }
      stats["events"] = res.events;
      stats["pre_spikes"] = res.pre.size();
      stats["post_spikes"] = res.post.size();
      stats["mean_x"] = jreal(res.x_integral / c.horizon);
      stats["w_min"] = jreal(lo);
      stats["w_max"] = jreal(hi);
      stats["final"] = state_json(res.final_state);
      break;
    }
    case Engine::kDiscrete: {
      DiscreteFullConfig c = run.discrete;
      c.seed = seed;
      const auto res = run_discrete_full(c);
      write_discrete_trace_csv(trace, res.trace);
      const auto& s = res.final_state;
      stats["events"] = res.events;
      stats["mean_x"] = jreal(res.x_integral / c.horizon);
      stats["mean_c"] = jreal(res.z_integral / c.horizon);
      stats["final"] = {{"x", s.x}, {"z", s.z}, {"omega_p", jreal(s.omega_p)}, {"omega_d", jreal(s.omega_d)}, {"w", s.w}};
      break;
    }
    case Engine::kDiscreteFast: {
      const auto& m = run.fast;
      RngStream rng(derive_seed(seed, 5));
      FastCalciumOptions opt;
      opt.u_grid = m.u_grid;
      opt.batches = m.batches;
      opt.x0 = m.x0;
      opt.c0 = m.c0;
      opt.record_trace = true;
      const auto res = simulate_fast_calcium(m.params, m.horizon, rng, opt);
      trace << "t,x,c\n";
      for (const auto& p : res.trace) trace << format_real(p.t) << ',' << p.x << ',' << p.c << '\n';
      const auto [ex, ec] = fast_calcium_means(m.params);
      json pgf = json::array();
      for (std::size_t i = 0; i < m.u_grid.size(); ++i) {
        const auto exact = analytic_pgf(m.params, m.u_grid[i]);
        const auto& mc = res.pgf[i];
        pgf.push_back({{"u", jreal(m.u_grid[i])},
                       {"monte_carlo", batched(mc)},
                       {"analytic", jreal(exact.value)},
                       {"deviation_se", jreal(mc.std_error > 0 ? std::abs(mc.mean - exact.value) / mc.std_error : 0.0)}});
      }
      stats["events"] = res.events;
      stats["mean_x"] = batched(res.mean_x);
      stats["mean_c"] = batched(res.mean_c);
      stats["analytic_mean_x"] = jreal(ex);
      stats["analytic_mean_c"] = jreal(ec);
      stats["pgf"] = pgf;
      break;
    }
  }
  std::ofstream out(file, std::ios::binary);
  out << trace.str();
  if (!out) throw std::runtime_error("cannot write " + file.string());
  return stats;
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& config, unsigned threads) {
  validate(config);
  const std::filesystem::path dir(config.output);
  std::filesystem::create_directories(dir);
  const char* ext = config.report.trace_format == TraceFormat::kJsonl ? ".jsonl" : ".csv";

  struct Task {
    std::size_t run = 0;
    std::uint64_t seed = 0;
    std::string file;
    json stats;
    std::string error;
  };
  std::vector<Task> tasks;
  for (std::size_t r = 0; r < config.runs.size(); ++r) {
    for (auto seed : config.seeds) {
      tasks.push_back({r, seed, config.runs[r].name + "_seed" + std::to_string(seed) + ext, {}, {}});
    }
  }
  parallel_for(tasks.size(), threads, [&](std::size_t i) {
    auto& t = tasks[i];
    try {
      t.stats = execute(config.runs[t.run], t.seed, config.report.trace_format, dir / t.file);
    } catch (const std::exception& e) {
      t.error = "run " + config.runs[t.run].name + ", seed " + std::to_string(t.seed) + ": " + e.what();
    }
  });

  ExperimentOutcome outcome;
  json files = json::array();
  json failures = json::array();
  json summary = json::object();
  for (const auto& t : tasks) {
    if (!t.error.empty()) {
      outcome.failures.push_back(t.error);
      failures.push_back(t.error);
      continue;
    }
    outcome.files.push_back(dir / t.file);
    files.push_back(t.file);
    summary[config.runs[t.run].name].push_back(t.stats);
  }
  outcome.status = outcome.failures.empty() ? 0 : 1;
  if (config.report.summary) {
    write_json_file(dir / "summary.json", summary);
    outcome.files.push_back(dir / "summary.json");
  }
  const json manifest = {{"format", kManifestFormat},
                         {"version", build_version()},
                         {"seeds", config.seeds},
                         {"files", files},
                         {"failures", failures},
                         {"config", to_json(config)}};
  write_json_file(dir / "manifest.json", manifest);
  outcome.files.push_back(dir / "manifest.json");
  return outcome;
}

// ---- bundled scenarios -----------------------------------------------------

std::vector<ScenarioInfo> bundled_scenarios() {
  return {{"pairbased-s1",
           "three Hebbian pair-based schemes on one fixed spike pattern, with and without exponential filtering "
           "(6 traces per seed)"},
          {"calcium-s2", "continuous and discrete calcium models side by side, with and without filtering (4 traces per seed)"}};
}

ExperimentConfig bundled_scenario(const std::string& name) {
  ExperimentConfig c;
  c.scenario = name;
  c.seeds = {1};
  c.output = name;
  if (name == "pairbased-s1") {
    // Four cycles of a pre burst, a post doublet and a lone pre during [0, 5],
    // then a quiet phase 20 times as long.
    std::vector<double> pre_times, post_times;
    for (double o : {0.0, 1.25, 2.5, 3.75}) {
      pre_times.insert(pre_times.end(), {o + 0.2, o + 0.4, o + 0.6, o + 1.0});
      post_times.insert(post_times.end(), {o + 0.8, o + 0.9});
    }
    const SpikeTrain pre(pre_times);
    const SpikeTrain post(post_times);
    for (const auto& [scheme, label] : kSchemes) {
      ContinuousModel m;
      m.kernel.source = KernelSpec{PairBasedSpec::hebbian(StdpCurve::exponential(1.0, 2.0),
                                                          StdpCurve::exponential(1.0, 2.0), scheme)};
      m.sim.kernel = m.kernel.resolve();
      m.sim.neuron = NeuronSpec{1.0, LinearActivation{1.0, 0.0}, FullReset{}};
      m.sim.rule = AdditiveRule{};
      m.sim.alpha = 0.2;
      m.sim.horizon = 100.0;
      m.sim.sample_interval = 0.05;
      m.sim.max_step = 0.05;
      m.sim.w0 = 1.0;
      m.sim.forced_pre = pre;
      m.sim.forced_post = post;
      for (Engine e : {Engine::kContinuous, Engine::kContinuousUnfiltered}) {
        RunSpec r;
        r.name = std::string(label) + (e == Engine::kContinuous ? "-filtered" : "-unfiltered");
        r.engine = e;
        r.continuous = m;
        c.runs.push_back(r);
      }
    }
    return c;
  }
  if (name == "calcium-s2") {
    ContinuousModel m;
    CalciumSpec k;
    k.jump_pre = 2.0;
    k.jump_post = 3.0;
    k.decay = 1.0;
    k.theta_p = 4.0;
    k.theta_d = 2.0;
    k.rate_p = 1.0;
    k.rate_d = 1.0;
    m.kernel.source = KernelSpec{k};
    m.sim.kernel = m.kernel.resolve();
    m.sim.neuron = NeuronSpec{1.0, LinearActivation{1.0, 0.0}, ConstantDrop{1.0}};
    m.sim.rule = GatedLinearRule{1.0, 1.0};
    m.sim.alpha = 0.1;
    m.sim.horizon = 100.0;
    m.sim.sample_interval = 0.05;
    m.sim.w0 = 5.0;
    m.sim.max_events = 1'000'000;

    DiscreteFullConfig d;
    d.params = DiscreteParams::calcium(1.0, 1.0, 1.0, 2, 3, 5);
    d.drive = ThresholdDrive{4.0, 2.0, 1.0, 1.0};
    d.alpha = 0.1;
    d.horizon = 100.0;
    d.initial.w = 5;
    d.sample_interval = 0.05;
    d.max_events = 1'000'000;

    for (Engine e : {Engine::kContinuous, Engine::kContinuousUnfiltered}) {
      RunSpec r;
      r.name = e == Engine::kContinuous ? "continuous-filtered" : "continuous-unfiltered";
      r.engine = e;
      r.continuous = m;
      c.runs.push_back(r);
    }
    for (bool filtered : {true, false}) {
      RunSpec r;
      r.name = filtered ? "discrete-filtered" : "discrete-unfiltered";
      r.engine = Engine::kDiscrete;
      r.discrete = d;
      r.discrete.filtered = filtered;
      c.runs.push_back(r);
    }
    return c;
  }
  std::string known;
  for (const auto& s : bundled_scenarios()) known += (known.empty() ? "" : ", ") + s.name;
  throw ConfigError("unknown scenario \"" + name + "\" (" + known + ")");
}

}  // namespace stdpsim
