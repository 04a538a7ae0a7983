#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace surgtri {

/// Tolerances for the adaptive one-step integrator.
struct StepControl {
  double atol = 1e-14;
  double rtol = 1e-11;
  double h_init = 1e-3;
  double h_min = 1e-13;  // relative to max(1, |s|)
  double h_max = std::numeric_limits<double>::infinity();
  double blowup_norm = 1e8;
  std::size_t max_steps = 20'000'000;
};

template <class State>
struct Sample {
  double s;
  State x;
};

/// Thrown when the step size underflows or the state leaves the finite range.
/// Carries the last accepted state.
template <class State>
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, double s, State x)
      : std::runtime_error(what), last_s(s), last_state(std::move(x)) {}
  double last_s;
  State last_state;
};

template <class State, class Rhs>
State rk4_step(const Rhs& rhs, const State& x, double s, double h) {
  const State k1 = rhs(s, x);
  const State k2 = rhs(s + 0.5 * h, State(x + (0.5 * h) * k1));
  const State k3 = rhs(s + 0.5 * h, State(x + (0.5 * h) * k2));
  const State k4 = rhs(s + h, State(x + h * k3));
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Classical RK4 with step-doubling error control and local extrapolation.
///
/// Integrates dx/ds = rhs(s, x) from s0 to s1 (either direction). Every
/// output time in `outputs` (monotone in the direction of integration) is hit
/// exactly and recorded; when `record_all` is set every accepted step is
/// recorded as well. The initial point is always the first sample.
template <class State, class Rhs>
std::vector<Sample<State>> integrate_rk4(const Rhs& rhs, State x, double s0, double s1,
                                         const StepControl& ctl,
                                         std::span<const double> outputs = {},
                                         bool record_all = true) {
  std::vector<Sample<State>> out;
  out.push_back({s0, x});
  if (s1 == s0) return out;
  const double dir = s1 > s0 ? 1.0 : -1.0;
  double s = s0;
  double h = dir * std::min({ctl.h_init, std::abs(s1 - s0), ctl.h_max});
  std::size_t next_out = 0;
  while (next_out < outputs.size() && dir * (outputs[next_out] - s0) <= 0) ++next_out;

  for (std::size_t step = 0; step < ctl.max_steps; ++step) {
    if (dir * (s1 - s) <= 0) return out;
    double stop = s1;
    bool stop_is_output = false;
    if (next_out < outputs.size() && dir * (outputs[next_out] - s1) < 0) {
      stop = outputs[next_out];
      stop_is_output = true;
    }
    bool clamped = false;
    double h_try = h;
    if (dir * (s + h_try - stop) >= 0) {
      h_try = stop - s;
      clamped = true;
    }

    const State big = rk4_step(rhs, x, s, h_try);
    const State mid = rk4_step(rhs, x, s, 0.5 * h_try);
    const State small = rk4_step(rhs, mid, s + 0.5 * h_try, 0.5 * h_try);
    const double err = (small - big).norm() / 15.0;
    const double scale = ctl.atol + ctl.rtol * std::max(x.norm(), small.norm());
    const bool finite = std::isfinite(err) && std::isfinite(small.norm());
    const double h_floor = ctl.h_min * std::max(1.0, std::abs(s));

    if (finite && err <= scale) {
      State next = small + (small - big) / 15.0;
      const double nrm = next.norm();
      if (!std::isfinite(nrm) || nrm > ctl.blowup_norm)
        throw DivergenceError<State>("state norm exceeded blow-up limit", s, x);
      x = std::move(next);
      s = clamped ? stop : s + h_try;
      if (clamped && stop_is_output) {
        out.push_back({s, x});
        ++next_out;
      } else if (record_all || (clamped && stop == s1)) {
        out.push_back({s, x});
      }
      const double grow = err > 0 ? std::clamp(0.9 * std::pow(scale / err, 0.2), 0.2, 4.0) : 4.0;
      // keep the unclamped proposal so landing on an output does not shrink h
      const double base = clamped ? std::max(std::abs(h), std::abs(h_try)) : std::abs(h_try);
      h = dir * std::min(base * grow, ctl.h_max);
    } else {
      const double shrink = finite && err > 0 ? std::clamp(0.9 * std::pow(scale / err, 0.2), 0.1, 0.5) : 0.1;
      h = h_try * shrink;
      if (std::abs(h) < h_floor)
        throw DivergenceError<State>("step size underflow", s, x);
    }
  }
  throw DivergenceError<State>("step budget exhausted", s, x);
}

/// Geometrically spaced output times on [a, b] with a, b > 0.
inline std::vector<double> geometric_times(double a, double b, int n) {
  std::vector<double> t(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = a * std::pow(b / a, double(i) / (n - 1));
  t.back() = b;
  return t;
}

}  // namespace surgtri
