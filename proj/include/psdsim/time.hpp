#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace psdsim {

// All timing arithmetic runs on integer picoseconds so that simultaneity
// checks are exact equality tests and results reproduce across platforms.
using ps_t = std::int64_t;

inline constexpr double speed_of_light_m_per_s = 299'792'458.0;

inline constexpr ps_t ps_per_ns = 1'000;
inline constexpr ps_t ps_per_us = 1'000'000;
inline constexpr ps_t ps_per_ms = 1'000'000'000;
inline constexpr ps_t ps_per_s = 1'000'000'000'000;

inline ps_t ps_from_seconds(double seconds) {
  return static_cast<ps_t>(std::llround(seconds * 1e12));
}

inline double seconds_from_ps(ps_t ps) { return static_cast<double>(ps) * 1e-12; }

// Multiplier for a unit suffix as used in scenario files.
inline ps_t ps_unit_multiplier(const std::string& unit) {
  if (unit == "ps") return 1;
  if (unit == "ns") return ps_per_ns;
  if (unit == "us") return ps_per_us;
  if (unit == "ms") return ps_per_ms;
  if (unit == "s") return ps_per_s;
  throw std::invalid_argument("unknown time unit '" + unit + "'");
}

inline ps_t ps_from_value_unit(double value, const std::string& unit) {
  return static_cast<ps_t>(std::llround(value * static_cast<double>(ps_unit_multiplier(unit))));
}

// Reduce x into (-period/2, period/2]; used for modulo-period residuals.
inline ps_t wrap_to_period(ps_t x, ps_t period) {
  if (period <= 0) return x;
  ps_t r = x % period;
  if (r < 0) r += period;            // now in [0, period)
  if (r * 2 > period) r -= period;   // now in (-period/2, period/2]
  return r;
}

}  // namespace psdsim
