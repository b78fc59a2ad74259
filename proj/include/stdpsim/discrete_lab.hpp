#ifndef STDPSIM_DISCRETE_LAB_HPP
#define STDPSIM_DISCRETE_LAB_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "stdpsim/spike_core.hpp"

namespace stdpsim {

/// Integer-valued model. Every quantum of X leaves at rate 1 and triggers a
/// post spike at rate beta; every quantum of z_j leaves at rate gamma_j. The
/// jump vectors k0, k1, k2 are constant; the calcium model is l = 1 with
/// k1 = C1, k2 = C2 and k0 = 0.
struct DiscreteParams {
  double lambda = 1.0;
  double beta = 1.0;
  std::vector<double> gamma{1.0};
  std::vector<long> k0{0};  // added at rate 1 when non-zero
  std::vector<long> k1{1};  // added at pre spikes
  std::vector<long> k2{1};  // added at post spikes
  long a_p = 1;
  long a_d = 1;
  double mu = 0.0;  // each weight quantum leaves at rate mu
  long w = 1;       // frozen weight of the fast process

  static DiscreteParams calcium(double lambda, double beta, double gamma, long c1, long c2, long w);
  std::size_t dimension() const { return gamma.size(); }
  /// C1 and C2 of the calcium form.
  long c1() const { return k1.at(0); }
  long c2() const { return k2.at(0); }
  bool is_calcium() const;
};

/// Throws std::invalid_argument on negative rates or quanta or mismatched lengths.
void validate(const DiscreteParams& params);

struct DiscreteState {
  long x = 0;
  std::vector<long> z;
  double omega_p = 0.0;
  double omega_d = 0.0;
  long w = 0;
};

enum class DiscreteEvent { kLeakX, kLeakZ, kClock, kPre, kPost, kPotentiate, kDepress, kLeakW, kAbsorbed };

const char* discrete_event_name(DiscreteEvent e);

struct CtmcStep {
  double holding = 0.0;  // +inf when absorbed
  DiscreteState next;
  DiscreteEvent tag = DiscreteEvent::kAbsorbed;
};

/// One Gillespie step of the fast process (X, Z) at the frozen weight params.w.
CtmcStep ctmc_step(const DiscreteState& state, const DiscreteParams& params, RngStream& rng);

/// Mean over equal-length time batches, with its standard error.
struct BatchedMean {
  double mean = 0.0;
  double std_error = 0.0;
};

struct FastCalciumOptions {
  std::vector<double> u_grid;  // points where the empirical E[u^C] is estimated
  int batches = 100;
  long x0 = 0;
  long c0 = 0;
  bool record_trace = false;
};

struct FastTracePoint {
  double t = 0.0;
  long x = 0;
  long c = 0;
};

struct FastCalciumResult {
  double horizon = 0.0;
  BatchedMean mean_x;
  BatchedMean mean_c;
  std::vector<BatchedMean> pgf;  // one per u_grid entry
  /// occupation[c] = fraction of time spent with C = c.
  std::vector<double> occupation;
  std::vector<FastTracePoint> trace;
  std::uint64_t events = 0;
};

/// Long-run trajectory of the calcium fast process, with ergodic averages
/// taken under the exact time-weighted occupation measure.
FastCalciumResult simulate_fast_calcium(const DiscreteParams& params, double horizon, RngStream& rng,
                                        const FastCalciumOptions& options = {});

/// Delta(u, s, w) of the stationary generating function. With
/// `expand_from_zero` the post-spike factor is written as
/// 1 - p(s) + sum_{k=0}^{C2} (u-1)^k p2(s, k), where p(s) = p2(s, 0) is the
/// probability that a potential quantum has fired within s.
double pgf_delta(const DiscreteParams& params, double u, double s, bool expand_from_zero = false);

struct PgfValue {
  double value = 1.0;
  double error_estimate = 0.0;  // absolute quadrature error on the exponent
  double truncation = 0.0;      // upper end S of the quadrature
};

/// E[u^C] under the stationary distribution of the calcium fast process.
PgfValue analytic_pgf(const DiscreteParams& params, double u);

/// Closed-form stationary means (E[X], E[C]) of the calcium fast process.
std::pair<double, double> fast_calcium_means(const DiscreteParams& params);

/// h_a(c) = rate_a 1{c >= theta_a}.
struct ThresholdDrive {
  double theta_p = 1.0;
  double theta_d = 1.0;
  double rate_p = 1.0;
  double rate_d = 1.0;
};

struct DiscreteFullConfig {
  DiscreteParams params;
  ThresholdDrive drive;
  double alpha = 1.0;
  double horizon = 10.0;
  std::uint64_t seed = 1;
  DiscreteState initial;  // initial.z defaults to zeros when empty
  double sample_interval = 0.0;
  bool record_events = true;
  /// Without filtering, W jumps at rates h_a(C) instead of Omega_a.
  bool filtered = true;
  std::uint64_t max_events = 10'000'000;
};

/// Throws std::invalid_argument.
void validate(const DiscreteFullConfig& config);

struct DiscreteTraceRecord {
  double t = 0.0;
  std::string tag;
  DiscreteState state;
};

struct DiscreteRunResult {
  std::vector<DiscreteTraceRecord> trace;
  DiscreteState final_state;
  std::uint64_t events = 0;
  /// Time integrals of x and of z_0 over [0, horizon].
  double x_integral = 0.0;
  double z_integral = 0.0;
};

/// Coupled model: W gains A_p at rate Omega_p(t), loses A_d at rate
/// Omega_d(t) while W >= A_d, and loses single quanta at rate mu W. Omega
/// relaxes continuously toward h_a(C)/alpha; its jump rates are sampled by
/// thinning. Throws LivenessViolation at the event ceiling.
DiscreteRunResult run_discrete_full(const DiscreteFullConfig& config);

/// Header "t,event,x,z0..,omega_p,omega_d,w"; integer columns printed exactly.
void write_discrete_trace_csv(std::ostream& os, const std::vector<DiscreteTraceRecord>& trace);

struct PgfReport {
  DiscreteParams params;
  std::vector<double> u;
  std::vector<PgfValue> values;
};

PgfReport pgf_report(const DiscreteParams& params, const std::vector<double>& u_grid);
void write_pgf_report(std::ostream& os, const PgfReport& report);

}  // namespace stdpsim

#endif  // STDPSIM_DISCRETE_LAB_HPP
