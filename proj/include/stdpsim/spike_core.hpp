#ifndef STDPSIM_SPIKE_CORE_HPP
#define STDPSIM_SPIKE_CORE_HPP

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace stdpsim {

/// Extended-real "no spike yet" delay. Every STDP curve maps it to 0.
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Sorted, strictly increasing, non-negative spike instants.
class SpikeTrain {
 public:
  SpikeTrain() = default;
  /// Throws std::invalid_argument if times are unsorted, tied, negative or non-finite.
  explicit SpikeTrain(std::vector<double> times);

  const std::vector<double>& times() const { return times_; }
  std::size_t size() const { return times_.size(); }
  bool empty() const { return times_.empty(); }
  double operator[](std::size_t i) const { return times_[i]; }
  auto begin() const { return times_.begin(); }
  auto end() const { return times_.end(); }

  /// Appends a spike; it must come strictly after the current last one.
  void push_back(double t);

  /// Spikes s with s <= t.
  SpikeTrain restricted_to(double t) const;

  /// Number of spikes strictly before t.
  std::size_t count_before(double t) const;

  bool operator==(const SpikeTrain&) const = default;

 private:
  std::vector<double> times_;
};

/// t - sup{s < t : s in m}, or kInfinity when no spike precedes t.
double last_spike_delay(const SpikeTrain& m, double t);

/// One time per line, 17 significant digits.
void write_spike_train(std::ostream& os, const SpikeTrain& m);
SpikeTrain read_spike_train(std::istream& is);

/// Seeded random stream. mt19937_64 underneath; uniform and exponential
/// variates are derived from the raw 64-bit output by hand so the sequence
/// does not depend on the standard library's distribution implementations.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Exponential with the given rate; +inf for rate 0.
  double exponential(double rate);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  std::uint64_t next_u64() { return engine_(); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// Exponential filter state H with decay rate alpha.
struct FilterState {
  double value = 0.0;
  double rate = 1.0;
};

/// A point mass of `weight` placed `offset` time units into an advance window.
struct FilterJump {
  double offset = 0.0;
  double weight = 0.0;
};

/// Exact solution of dH = -alpha H dt + sum weight_i delta_{offset_i} over [0, dt].
/// Throws std::invalid_argument on negative dt or offsets outside [0, dt].
FilterState exp_filter_advance(FilterState h, double dt, std::span<const FilterJump> jumps = {});

/// Exact solution of dH = (-alpha H + input) dt over [0, dt] for constant input.
double exp_filter_with_input(double value, double rate, double input, double dt);

/// Integral over [0, dt] of the path produced by exp_filter_with_input.
double exp_filter_integral(double value, double rate, double input, double dt);

/// Homogeneous Poisson arrivals of the given rate on [0, horizon].
SpikeTrain sample_homogeneous_arrivals(RngStream& rng, double rate, double horizon);

/// Formats a real with 17 significant digits (round-trip exact).
std::string format_real(double v);

}  // namespace stdpsim

#endif  // STDPSIM_SPIKE_CORE_HPP
