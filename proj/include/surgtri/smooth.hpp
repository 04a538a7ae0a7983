#pragma once

#include <cmath>

namespace surgtri {

/// C-infinity step: 0 for x <= 0, 1 for x >= 1, built from exp(-1/x).
template <class T>
T smooth_step(T x) {
  if (x <= T(0)) return T(0);
  if (x >= T(1)) return T(1);
  const T a = std::exp(-T(1) / x), b = std::exp(-T(1) / (T(1) - x));
  return a / (a + b);
}

template <class T>
T smooth_step_derivative(T x) {
  if (x <= T(0) || x >= T(1)) return T(0);
  const T a = std::exp(-T(1) / x), b = std::exp(-T(1) / (T(1) - x));
  const T da = a / (x * x), db = -b / ((T(1) - x) * (T(1) - x));
  return (da * b - a * db) / ((a + b) * (a + b));
}

}  // namespace surgtri
