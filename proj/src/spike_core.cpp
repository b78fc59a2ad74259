#include "stdpsim/spike_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace stdpsim {

SpikeTrain::SpikeTrain(std::vector<double> times) : times_(std::move(times)) {
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (!std::isfinite(times_[i]) || times_[i] < 0.0) {
      throw std::invalid_argument("spike time must be finite and non-negative");
    }
    if (i > 0 && !(times_[i] > times_[i - 1])) {
      throw std::invalid_argument("spike times must be strictly increasing");
    }
  }
}

void SpikeTrain::push_back(double t) {
  if (!std::isfinite(t) || t < 0.0) {
    throw std::invalid_argument("spike time must be finite and non-negative");
  }
  if (!times_.empty() && !(t > times_.back())) {
    throw std::invalid_argument("spike times must be strictly increasing");
  }
  times_.push_back(t);
}

SpikeTrain SpikeTrain::restricted_to(double t) const {
  SpikeTrain out;
  auto last = std::upper_bound(times_.begin(), times_.end(), t);
  out.times_.assign(times_.begin(), last);
  return out;
}

std::size_t SpikeTrain::count_before(double t) const {
  return static_cast<std::size_t>(std::lower_bound(times_.begin(), times_.end(), t) - times_.begin());
}

double last_spike_delay(const SpikeTrain& m, double t) {
  if (t < 0.0) {
    throw std::invalid_argument("last_spike_delay: t must be non-negative");
  }
  std::size_t n = m.count_before(t);
  if (n == 0) {
    return kInfinity;
  }
  return t - m[n - 1];
}

std::string format_real(double v) {
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_spike_train(std::ostream& os, const SpikeTrain& m) {
  for (double t : m) {
    os << format_real(t) << '\n';
  }
}

SpikeTrain read_spike_train(std::istream& is) {
  std::vector<double> times;
  std::string line;
  while (std::getline(is, line)) {
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') {
      continue;
    }
    times.push_back(std::stod(line.substr(first)));
  }
  return SpikeTrain(std::move(times));
}

double RngStream::uniform() {
  // 53 random bits, shifted by half an ulp so 0 and 1 are both excluded.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::exponential(double rate) {
  if (rate <= 0.0) {
    return kInfinity;
  }
  return -std::log(uniform()) / rate;
}

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) {
    throw std::invalid_argument("RngStream::below: n must be positive");
  }
  // Rejection keeps the result exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return r % n;
}

FilterState exp_filter_advance(FilterState h, double dt, std::span<const FilterJump> jumps) {
  if (!(dt >= 0.0)) {
    throw std::invalid_argument("exp_filter_advance: dt must be non-negative");
  }
  if (!(h.rate > 0.0)) {
    throw std::invalid_argument("exp_filter_advance: rate must be positive");
  }
  double value = h.value * std::exp(-h.rate * dt);
  double prev = 0.0;
  for (const auto& j : jumps) {
    if (j.offset < prev || j.offset > dt) {
      throw std::invalid_argument("exp_filter_advance: jump offsets must be sorted within [0, dt]");
    }
    prev = j.offset;
    value += j.weight * std::exp(-h.rate * (dt - j.offset));
  }
  return {value, h.rate};
}

double exp_filter_with_input(double value, double rate, double input, double dt) {
  const double decay = std::exp(-rate * dt);
  return value * decay - input / rate * std::expm1(-rate * dt);
}

double exp_filter_integral(double value, double rate, double input, double dt) {
  const double eq = input / rate;
  const double transient = -(value - eq) * std::expm1(-rate * dt) / rate;
  return eq == 0.0 ? transient : transient + eq * dt;
}

SpikeTrain sample_homogeneous_arrivals(RngStream& rng, double rate, double horizon) {
  if (!(rate > 0.0)) {
    throw std::invalid_argument("sample_homogeneous_arrivals: rate must be positive");
  }
  SpikeTrain out;
  if (!(horizon > 0.0)) {
    return out;
  }
  double t = rng.exponential(rate);
  while (t <= horizon) {
    out.push_back(t);
    t += rng.exponential(rate);
  }
  return out;
}

}  // namespace stdpsim
