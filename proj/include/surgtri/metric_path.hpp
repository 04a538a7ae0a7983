#pragma once

// Interpolating coframe phi1 = du + a(s) dv, phi2 = k dv, phi0 = ds on
// T^2 x R, its Levi-Civita connection matrix, scalar curvature 3 (a'/k)^2 and
// the Cartan structure-equation residual.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "surgtri/common.hpp"
#include "surgtri/smooth.hpp"

namespace surgtri::metric {

/// a(s) = a0 (1 - psi((s - eps) / (1 - 2 eps))): a0 on s <= eps, 0 on s >= 1 - eps.
template <class T>
struct MetricPath {
  T k = T(0.5);
  T a0 = T(0.5);
  T eps = T(0.05);

  void validate() const {
    if (!(k > T(0))) throw PreconditionError("metric path needs k > 0");
    if (!(eps > T(0) && eps < T(0.5))) throw PreconditionError("metric path needs eps in (0, 1/2)");
  }

  T a(T s) const { return a0 * (T(1) - smooth_step((s - eps) / (T(1) - T(2) * eps))); }
  T a_dot(T s) const { return -a0 * smooth_step_derivative((s - eps) / (T(1) - T(2) * eps)) / (T(1) - T(2) * eps); }

  /// Coframe normalization of the flat metric A^* (du^2 + dv^2) / c for
  /// A = [[p, q], [r, t]] in SL(2, Z), with c chosen so that d/du is a unit vector.
  static MetricPath from_sl2(int p, int q, int r, int t, T eps = T(0.05)) {
    if (p * t - q * r != 1) throw PreconditionError("change of basis must have determinant 1");
    const T c = T(p * p + r * r);
    const T F = T(p * q + r * t) / c, G = T(q * q + t * t) / c;
    MetricPath m;
    m.a0 = F;
    m.k = std::sqrt(G - F * F);
    m.eps = eps;
    return m;
  }
};

template <class T>
T scalar_curvature(const MetricPath<T>& m, T s) {
  const T r = m.a_dot(s) / m.k;
  return T(3) * r * r;
}

/// Gamma = sum_c coeff[c] phi_c with phi = (phi0, phi1, phi2); the pattern is
/// (a'/2k) [[0, phi2, phi1], [-phi2, 0, phi0], [-phi1, -phi0, 0]].
template <class T>
struct ConnectionMatrix {
  std::array<Eigen::Matrix<T, 3, 3>, 3> coeff;

  Eigen::Matrix<T, 3, 3> along(int c) const { return coeff[std::size_t(c)]; }
  bool antisymmetric() const {
    for (const auto& C : coeff)
      if ((C + C.transpose()).cwiseAbs().maxCoeff() != T(0)) return false;
    return true;
  }
};

template <class T>
ConnectionMatrix<T> connection_matrix(const MetricPath<T>& m, T s) {
  const T f = m.a_dot(s) / (T(2) * m.k);
  ConnectionMatrix<T> G;
  for (auto& C : G.coeff) C.setZero();
  G.coeff[2](0, 1) = f;
  G.coeff[2](1, 0) = -f;
  G.coeff[1](0, 2) = f;
  G.coeff[1](2, 0) = -f;
  G.coeff[0](1, 2) = f;
  G.coeff[0](2, 1) = -f;
  return G;
}

namespace detail {

/// 1-form coefficients in the (du, dv, ds) basis.
template <class T>
std::array<Eigen::Matrix<T, 3, 1>, 3> coframe(const MetricPath<T>& m, T s) {
  return {Eigen::Matrix<T, 3, 1>(0, 0, 1), Eigen::Matrix<T, 3, 1>(1, m.a(s), 0),
          Eigen::Matrix<T, 3, 1>(0, m.k, 0)};
}

/// alpha ^ beta in the (du^dv, du^ds, dv^ds) basis.
template <class T>
Eigen::Matrix<T, 3, 1> wedge(const Eigen::Matrix<T, 3, 1>& x, const Eigen::Matrix<T, 3, 1>& y) {
  return {x(0) * y(1) - x(1) * y(0), x(0) * y(2) - x(2) * y(0), x(1) * y(2) - x(2) * y(1)};
}

}  // namespace detail

/// Max over a uniform grid of n points on [0, 1] of |d phi - Gamma ^ phi|, with
/// d phi1 = a' ds ^ dv taken by central differences of a (step = grid spacing)
/// and Gamma from the analytic a'.
template <class T>
T cartan_residual(const MetricPath<T>& m, int n) {
  if (n < 2) throw PreconditionError("cartan_residual needs at least two grid points");
  const T h = T(1) / T(n - 1);
  T worst = 0;
  for (int i = 0; i < n; ++i) {
    const T s = h * T(i);
    const T a_fd = (m.a(s + h) - m.a(s - h)) / (T(2) * h);
    const auto phi = detail::coframe(m, s);
    const auto G = connection_matrix(m, s);
    for (int row = 0; row < 3; ++row) {
      Eigen::Matrix<T, 3, 1> dphi = Eigen::Matrix<T, 3, 1>::Zero();
      if (row == 1) dphi = a_fd * detail::wedge(phi[0], Eigen::Matrix<T, 3, 1>(0, 1, 0));
      Eigen::Matrix<T, 3, 1> gw = Eigen::Matrix<T, 3, 1>::Zero();
      for (int j = 0; j < 3; ++j)
        for (int c = 0; c < 3; ++c) {
          const T g = G.coeff[std::size_t(c)](row, j);
          if (g != T(0)) gw += g * detail::wedge(phi[std::size_t(c)], phi[std::size_t(j)]);
        }
      worst = std::max(worst, (dphi - gw).norm());
    }
  }
  return worst;
}

template <class T>
std::vector<std::pair<T, T>> curvature_profile(const MetricPath<T>& m, int n) {
  std::vector<std::pair<T, T>> out;
  for (int i = 0; i < n; ++i) {
    const T s = T(i) / T(n - 1);
    out.emplace_back(s, scalar_curvature(m, s));
  }
  return out;
}

}  // namespace surgtri::metric
