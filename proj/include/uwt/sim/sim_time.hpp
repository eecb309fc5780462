#pragma once

#include <cmath>
#include <compare>

namespace uwt {

// Simulation clock value in seconds.
struct SimTime {
  double seconds{0.0};

  constexpr SimTime() = default;
  constexpr explicit SimTime(double s) : seconds(s) {}

  constexpr auto operator<=>(const SimTime&) const = default;

  constexpr SimTime operator+(double dt) const { return SimTime{seconds + dt}; }
  constexpr double operator-(SimTime other) const { return seconds - other.seconds; }
};

// Index of the monitoring interval that contains `t` ([k*len, (k+1)*len)).
inline long interval_index(SimTime t, double interval_len) {
  return static_cast<long>(std::floor(t.seconds / interval_len));
}

}  // namespace uwt
