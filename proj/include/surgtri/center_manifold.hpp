#pragma once

// Cubic gradient flow on the center manifold C^3 at the degenerate flat
// connection, its three U(1)-invariant conserved quantities, and the
// stable-set classification.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "surgtri/common.hpp"
#include "surgtri/ode.hpp"

namespace surgtri::cm {

template <class T>
using Vec3c = Eigen::Matrix<std::complex<T>, 3, 1>;

template <class T>
struct CMState {
  Vec3c<T> z = Vec3c<T>::Zero();
  T s = T(0);
};

/// c1 = |z2|^2 - |z3|^2, c2 = |z1|^2 - |z2|^2 - |z3|^2, c3 = Im(z1 z2 conj(z3)).
template <class T>
struct ConservedTriple {
  T c1, c2, c3;

  std::array<T, 3> as_array() const { return {c1, c2, c3}; }
};

template <class T>
ConservedTriple<T> conserved(const Vec3c<T>& z) {
  const T n1 = std::norm(z(0)), n2 = std::norm(z(1)), n3 = std::norm(z(2));
  return {n2 - n3, n1 - n2 - n3, std::imag(z(0) * z(1) * std::conj(z(2)))};
}

/// dz/ds = (conj(z2) z3, conj(z1) z3 / 2, z1 z2 / 2).
template <class T>
Vec3c<T> vector_field(const Vec3c<T>& z) {
  Vec3c<T> d;
  d(0) = std::conj(z(1)) * z(2);
  d(1) = std::conj(z(0)) * z(2) / T(2);
  d(2) = z(0) * z(1) / T(2);
  return d;
}

/// Constant U(1) gauge action (z1, e^{ia} z2, e^{ia} z3).
template <class T>
Vec3c<T> gauge_rotate(const Vec3c<T>& z, T angle) {
  const std::complex<T> ph = std::polar(T(1), angle);
  return {z(0), ph * z(1), ph * z(2)};
}

/// The decaying family (-2/s, sqrt2 e^{i phi}/s, sqrt2 e^{i phi}/s).
template <class T>
Vec3c<T> exact_decaying(T s, T phi) {
  const std::complex<T> ph = std::polar(std::sqrt(T(2)), phi);
  return {std::complex<T>(-T(2) / s), ph / s, ph / s};
}

/// Pointwise residual |d/ds x - F(x)| of the decaying family at s.
template <class T>
T exact_family_residual(T s, T phi) {
  const std::complex<T> ph = std::polar(std::sqrt(T(2)), phi);
  const Vec3c<T> deriv{std::complex<T>(T(2) / (s * s)), -ph / (s * s), -ph / (s * s)};
  return (deriv - vector_field(exact_decaying(s, phi))).norm();
}

enum class StableClass { on_stable_cone, on_stable_general, off_stable };

template <class T>
struct Classification {
  StableClass kind;
  T a_inf_sq;  // |a_inf|^2 = c2 when on a stable set, else 0
  ConservedTriple<T> triple;
};

template <class T>
Classification<T> classify(const Vec3c<T>& z, T tol = T(1e-9)) {
  const auto c = conserved(z);
  const bool level = std::abs(c.c1) <= tol && std::abs(c.c3) <= tol;
  if (level && std::abs(c.c2) <= tol) return {StableClass::on_stable_cone, T(0), c};
  if (level && c.c2 >= -tol) return {StableClass::on_stable_general, c.c2, c};
  return {StableClass::off_stable, T(0), c};
}

inline const char* to_string(StableClass k) {
  switch (k) {
    case StableClass::on_stable_cone: return "on_stable_cone";
    case StableClass::on_stable_general: return "on_stable_general";
    default: return "off_stable";
  }
}

template <class T>
struct Trajectory {
  std::vector<Sample<Vec3c<T>>> samples;
  ConservedTriple<T> initial;
  std::array<T, 3> max_drift{};  // per conserved component, over all samples

  T drift() const { return std::max({max_drift[0], max_drift[1], max_drift[2]}); }
};

/// Integrates the center-manifold flow from x0 (at x0.s) to s_end.
/// Throws DivergenceError<Vec3c<T>> on blow-up.
template <class T>
Trajectory<T> integrate(const CMState<T>& x0, T s_end, const StepControl& ctl = {},
                        std::span<const double> outputs = {}, bool record_all = true) {
  auto rhs = [](double, const Vec3c<T>& z) { return vector_field(z); };
  Trajectory<T> tr;
  tr.samples = integrate_rk4(rhs, x0.z, x0.s, s_end, ctl, outputs, record_all);
  tr.initial = conserved(x0.z);
  const auto c0 = tr.initial.as_array();
  for (const auto& smp : tr.samples) {
    const auto c = conserved(smp.x).as_array();
    for (int i = 0; i < 3; ++i)
      tr.max_drift[std::size_t(i)] = std::max(tr.max_drift[std::size_t(i)], std::abs(c[std::size_t(i)] - c0[std::size_t(i)]));
  }
  return tr;
}

/// Least-squares slope of log|x(s)| against log|s|.
///
/// Requires at least two decades of |s| and a trajectory whose norm decreases
/// by at least a decade; anything else is not a decay and is rejected.
template <class T>
T fit_decay_exponent(const std::vector<Sample<Vec3c<T>>>& samples) {
  std::vector<T> xs, ys;
  for (const auto& smp : samples) {
    const T nrm = smp.x.norm();
    if (smp.s == 0 || !(nrm > 0)) continue;
    xs.push_back(std::log(std::abs(T(smp.s))));
    ys.push_back(std::log(nrm));
  }
  if (xs.size() < 3) throw CertificateError("decay fit: fewer than three usable samples");
  const auto [mn, mx] = std::minmax_element(xs.begin(), xs.end());
  if (*mx - *mn < std::log(T(100)) - T(1e-9))
    throw CertificateError("decay fit: trajectory spans less than two decades of s");
  if (ys.front() - ys.back() < std::log(T(10)))
    throw CertificateError("decay fit: trajectory is not decaying");
  const T n = T(xs.size());
  T sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace surgtri::cm
