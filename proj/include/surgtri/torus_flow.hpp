#pragma once

// Fourier-truncated gradient flow of f(a, alpha, beta) = -Re <alpha, i dbar*_a beta>
// on the square torus R^2 / 2Z^2 (area form omega = dx dy / 4).
//
// Spinor mode p = (m, n) in the box |m|, |n| <= N carries the twisted
// multiplier lambda_p = (pi/2)((2m+1-u) + i(2n+1-v)). The connection
// fluctuation a01 lives on the nonconstant modes k of the same box and acts
// by convolution: (dbar_a alpha)_p = lambda_p alpha_p + sum_{p-q=k} a_k alpha_q.
// The constant connection mode is the holonomy, entering through
// a_0 = -(pi/2)(u + iv).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <complex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "surgtri/common.hpp"
#include "surgtri/ode.hpp"

namespace surgtri::torus {

template <class T>
using VecXc = Eigen::Matrix<std::complex<T>, Eigen::Dynamic, 1>;
template <class T>
using MatXc = Eigen::Matrix<std::complex<T>, Eigen::Dynamic, Eigen::Dynamic>;

/// Index arithmetic for the truncation box [-N, N]^2.
struct ModeBox {
  int N = 1;

  int side() const { return 2 * N + 1; }
  int size() const { return side() * side(); }
  bool contains(int m, int n) const { return std::abs(m) <= N && std::abs(n) <= N; }
  int index(int m, int n) const { return (m + N) * side() + (n + N); }
  int m_of(int i) const { return i / side() - N; }
  int n_of(int i) const { return i % side() - N; }
  int zero() const { return index(0, 0); }
};

template <class T>
std::complex<T> multiplier(T u, T v, int m, int n) {
  const T h = T(kPi) / T(2);
  return {h * (T(2 * m + 1) - u), h * (T(2 * n + 1) - v)};
}

template <class T>
struct TorusFieldState {
  int N = 1;
  T u = T(0), v = T(0);
  VecXc<T> a, alpha, beta;  // a(zero) is kept at 0

  static TorusFieldState zero(int N, T u, T v) {
    if (N < 1) throw PreconditionError("truncation N must be >= 1");
    TorusFieldState x;
    x.N = N;
    x.u = u;
    x.v = v;
    const int M = ModeBox{N}.size();
    x.a = VecXc<T>::Zero(M);
    x.alpha = VecXc<T>::Zero(M);
    x.beta = VecXc<T>::Zero(M);
    return x;
  }

  ModeBox box() const { return {N}; }
};

struct Mode {
  int m, n;
  std::complex<double> lambda;
};

struct HessianSpectrum {
  double u, v;
  int N;
  std::vector<Mode> multipliers;
  double gap;
  int argmin_m, argmin_n;
};

inline HessianSpectrum hessian_spectrum(double u, double v, int N) {
  if (N < 1) throw PreconditionError("truncation N must be >= 1");
  HessianSpectrum h{u, v, N, {}, INFINITY, 0, 0};
  for (int m = -N; m <= N; ++m)
    for (int n = -N; n <= N; ++n) {
      const auto l = multiplier(u, v, m, n);
      h.multipliers.push_back({m, n, l});
      if (std::abs(l) < h.gap) {
        h.gap = std::abs(l);
        h.argmin_m = m;
        h.argmin_n = n;
      }
    }
  return h;
}

/// dbar_a alpha.
template <class T>
VecXc<T> apply_dbar(const TorusFieldState<T>& x, const VecXc<T>& alpha) {
  const ModeBox b = x.box();
  VecXc<T> out(b.size());
  for (int p = 0; p < b.size(); ++p) {
    const int pm = b.m_of(p), pn = b.n_of(p);
    std::complex<T> acc = multiplier(x.u, x.v, pm, pn) * alpha(p);
    for (int q = 0; q < b.size(); ++q) {
      const int km = pm - b.m_of(q), kn = pn - b.n_of(q);
      if ((km || kn) && b.contains(km, kn)) acc += x.a(b.index(km, kn)) * alpha(q);
    }
    out(p) = acc;
  }
  return out;
}

/// dbar*_a beta, the adjoint of apply_dbar.
template <class T>
VecXc<T> apply_dbar_star(const TorusFieldState<T>& x, const VecXc<T>& beta) {
  const ModeBox b = x.box();
  VecXc<T> out(b.size());
  for (int q = 0; q < b.size(); ++q) {
    const int qm = b.m_of(q), qn = b.n_of(q);
    std::complex<T> acc = std::conj(multiplier(x.u, x.v, qm, qn)) * beta(q);
    for (int p = 0; p < b.size(); ++p) {
      const int km = b.m_of(p) - qm, kn = b.n_of(p) - qn;
      if ((km || kn) && b.contains(km, kn)) acc += std::conj(x.a(b.index(km, kn))) * beta(p);
    }
    out(q) = acc;
  }
  return out;
}

/// Dense matrix of dbar_a on the box; used as an independent oracle.
template <class T>
MatXc<T> dense_dbar(const TorusFieldState<T>& x) {
  const ModeBox b = x.box();
  MatXc<T> D = MatXc<T>::Zero(b.size(), b.size());
  for (int p = 0; p < b.size(); ++p) {
    D(p, p) = multiplier(x.u, x.v, b.m_of(p), b.n_of(p));
    for (int q = 0; q < b.size(); ++q) {
      const int km = b.m_of(p) - b.m_of(q), kn = b.n_of(p) - b.n_of(q);
      if ((km || kn) && b.contains(km, kn)) D(p, q) += x.a(b.index(km, kn));
    }
  }
  return D;
}

template <class T>
T eval_f(const TorusFieldState<T>& x) {
  const std::complex<T> I(0, 1);
  return -std::real(x.alpha.dot(I * apply_dbar_star(x, x.beta)));
}

/// Gradient for the real inner product Re <., .>. g0 is the component along
/// the constant connection mode a_0 = -(pi/2)(u + iv).
template <class T>
struct TorusGradient {
  VecXc<T> a, alpha, beta;
  std::complex<T> g0;

  T norm2() const {
    return a.squaredNorm() + alpha.squaredNorm() + beta.squaredNorm() + std::norm(g0);
  }
};

template <class T>
TorusGradient<T> grad_f(const TorusFieldState<T>& x) {
  const std::complex<T> I(0, 1);
  const ModeBox b = x.box();
  TorusGradient<T> g;
  g.alpha = -I * apply_dbar_star(x, x.beta);
  g.beta = I * apply_dbar(x, x.alpha);
  g.a = VecXc<T>::Zero(b.size());
  for (int p = 0; p < b.size(); ++p)
    for (int q = 0; q < b.size(); ++q) {
      const int km = b.m_of(p) - b.m_of(q), kn = b.n_of(p) - b.n_of(q);
      if ((km || kn) && b.contains(km, kn))
        g.a(b.index(km, kn)) += -I * std::conj(x.alpha(q)) * x.beta(p);
    }
  g.g0 = -I * x.alpha.dot(x.beta);
  return g;
}

/// max_k |F_a(k) - (i/2)(|alpha|^2 - |beta|^2)(k)| over the box, in units of omega.
template <class T>
T constraint_residual(const TorusFieldState<T>& x) {
  const std::complex<T> I(0, 1);
  const ModeBox b = x.box();
  T worst = 0;
  for (int k = 0; k < b.size(); ++k) {
    const int m = b.m_of(k), n = b.n_of(k);
    std::complex<T> F = 0;
    if (m || n) {
      const std::complex<T> Ak = x.a(k), Amk = x.a(b.index(-m, -n));
      F = -T(4 * kPi) * I * (std::complex<T>(T(n), T(m)) * Ak + std::complex<T>(T(-n), T(m)) * std::conj(Amk));
    }
    std::complex<T> rho = 0;
    for (int p = 0; p < b.size(); ++p) {
      const int qm = b.m_of(p) - m, qn = b.n_of(p) - n;
      if (!b.contains(qm, qn)) continue;
      const int q = b.index(qm, qn);
      rho += x.alpha(p) * std::conj(x.alpha(q)) - x.beta(p) * std::conj(x.beta(q));
    }
    worst = std::max(worst, std::abs(F - I / T(2) * rho));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// flow

/// Packing for the integrator: [a, alpha, beta, u + iv, (E, L)] where the last
/// slot accumulates E = int |grad f|^2 ds (real part) and L = int |grad f| ds.
template <class T>
VecXc<T> pack(const TorusFieldState<T>& x, std::complex<T> aux = 0) {
  const int M = x.box().size();
  VecXc<T> y(3 * M + 2);
  y << x.a, x.alpha, x.beta, std::complex<T>(x.u, x.v), aux;
  return y;
}

template <class T>
TorusFieldState<T> unpack(const VecXc<T>& y, int N) {
  TorusFieldState<T> x;
  const int M = ModeBox{N}.size();
  x.N = N;
  x.a = y.segment(0, M);
  x.alpha = y.segment(M, M);
  x.beta = y.segment(2 * M, M);
  x.u = std::real(y(3 * M));
  x.v = std::imag(y(3 * M));
  return x;
}

struct FlowDiagnostics {
  std::vector<double> s, f_values, grad_norm2, energy, length, spinor_norm, constraint;
  double loj_b = 1.0, loj_c = 0.5;
};

template <class T>
struct TorusTrajectory {
  std::vector<TorusFieldState<T>> states;
  FlowDiagnostics diag;
};

/// Integrates d/ds x = -grad f(x) from x0 over [0, s_end], recording at `outputs`
/// (or every accepted step if outputs is empty).
template <class T>
TorusTrajectory<T> flow(const TorusFieldState<T>& x0, T s_end, const StepControl& ctl = {},
                        std::span<const double> outputs = {}) {
  const int N = x0.N;
  const int M = x0.box().size();
  auto rhs = [N, M](double, const VecXc<T>& y) {
    const auto x = unpack<T>(y, N);
    const auto g = grad_f(x);
    VecXc<T> d(3 * M + 2);
    const T gn2 = g.norm2();
    d << -g.a, -g.alpha, -g.beta, T(2 / kPi) * g.g0, std::complex<T>(gn2, std::sqrt(gn2));
    d(x.box().zero()) = 0;
    return d;
  };
  TorusFieldState<T> start = x0;
  start.a(start.box().zero()) = 0;
  const auto samples = integrate_rk4(rhs, pack(start), 0.0, double(s_end), ctl, outputs, outputs.empty());
  TorusTrajectory<T> tr;
  for (const auto& smp : samples) {
    auto x = unpack<T>(smp.x, N);
    const std::complex<T> aux = smp.x(3 * M + 1);
    tr.diag.s.push_back(smp.s);
    tr.diag.f_values.push_back(double(eval_f(x)));
    tr.diag.grad_norm2.push_back(double(grad_f(x).norm2()));
    tr.diag.energy.push_back(double(std::real(aux)));
    tr.diag.length.push_back(double(std::imag(aux)));
    tr.diag.spinor_norm.push_back(double(std::sqrt(x.alpha.squaredNorm() + x.beta.squaredNorm())));
    tr.diag.constraint.push_back(double(constraint_residual(x)));
    tr.states.push_back(std::move(x));
  }
  return tr;
}

/// |Delta f - int |grad f|^2| / |Delta f| between first and last sample.
inline double energy_identity_error(const FlowDiagnostics& d) {
  const double df = d.f_values.front() - d.f_values.back();
  const double e = d.energy.back() - d.energy.front();
  if (df == 0.0) return e == 0.0 ? 0.0 : INFINITY;
  return std::abs(df - e) / std::abs(df);
}

/// Largest increase of f between consecutive samples (0 for a monotone flow).
inline double monotonicity_violation(const FlowDiagnostics& d) {
  double worst = 0;
  for (std::size_t i = 1; i < d.f_values.size(); ++i)
    worst = std::max(worst, d.f_values[i] - d.f_values[i - 1]);
  return worst;
}

/// Exponential rate from a least-squares fit of log |(alpha, beta)| on s >= s_from.
inline double fit_decay_rate(const FlowDiagnostics& d, double s_from) {
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < d.s.size(); ++i) {
    if (d.s[i] < s_from || !(d.spinor_norm[i] > 0)) continue;
    const double y = std::log(d.spinor_norm[i]);
    n += 1;
    sx += d.s[i];
    sy += y;
    sxx += d.s[i] * d.s[i];
    sxy += d.s[i] * y;
  }
  if (n < 3) throw CertificateError("decay fit: fewer than three samples in the window");
  return -(n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct LojReport {
  bool applicable = true;
  std::string reason;
  double length = 0, bound = 0, slack = 0;
  bool holds = true;
};

/// Finite-length check: length <= (4/c) |Delta f|^c.
inline LojReport loj_check(const FlowDiagnostics& d, double gap, double gap_threshold = 0.05) {
  LojReport r;
  if (gap < gap_threshold) {
    r.applicable = false;
    r.reason = "skipped: spectral gap " + std::to_string(gap) + " below threshold near the degenerate point";
    return r;
  }
  r.length = d.length.back() - d.length.front();
  r.bound = 4.0 / d.loj_c * std::pow(std::abs(d.f_values.front() - d.f_values.back()), d.loj_c);
  r.slack = r.bound - r.length;
  r.holds = r.length <= r.bound * (1 + 1e-12) + 1e-300;
  return r;
}

// ---------------------------------------------------------------------------
// seeded states

/// Uniform random coefficients in the unit disc scaled by amp (spinors) and a_amp (connection).
template <class T>
TorusFieldState<T> random_state(std::uint64_t seed, int N, T u, T v, T amp, T a_amp) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  auto x = TorusFieldState<T>::zero(N, u, v);
  const int M = x.box().size();
  for (int i = 0; i < M; ++i) {
    x.alpha(i) = amp * std::complex<T>(U(rng), U(rng));
    x.beta(i) = amp * std::complex<T>(U(rng), U(rng));
    x.a(i) = a_amp * std::complex<T>(U(rng), U(rng));
  }
  x.a(x.box().zero()) = 0;
  return x;
}

/// Random spinor in the positive eigenspace of the flat Hessian
/// (alpha_p = -i conj(lambda_p) beta_p / |lambda_p|), which the linearized
/// downward flow contracts; a = 0. Modes with |lambda| at the gap get modulus
/// amp, every other mode at most amp * tail_weight per component.
template <class T>
TorusFieldState<T> stable_spinor_state(std::uint64_t seed, int N, T u, T v, T amp,
                                       T tail_weight = T(1e-2)) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  auto x = TorusFieldState<T>::zero(N, u, v);
  const std::complex<T> I(0, 1);
  const ModeBox b = x.box();
  const double gap = hessian_spectrum(double(u), double(v), N).gap;
  for (int p = 0; p < b.size(); ++p) {
    const auto l = multiplier(u, v, b.m_of(p), b.n_of(p));
    const bool at_gap = std::abs(std::abs(l) - gap) <= 1e-12 * std::max(1.0, gap);
    const std::complex<T> r(U(rng), U(rng));
    // gap modes: modulus amp, random phase; tail: random in the square
    const std::complex<T> be = at_gap ? std::complex<T>(amp * std::polar(T(1), std::arg(r)))
                                      : std::complex<T>(amp * tail_weight * r);
    x.beta(p) = be;
    x.alpha(p) = std::abs(l) > 0 ? std::complex<T>(-I * std::conj(l) * be / std::abs(l)) : be;
  }
  return x;
}

/// Largest multiplier modulus in the box (growth rate of the unstable directions).
inline double max_multiplier(double u, double v, int N) {
  double best = 0;
  for (const auto& md : hessian_spectrum(u, v, N).multipliers) best = std::max(best, std::abs(md.lambda));
  return best;
}

/// Relative error between the central difference of f along a seeded random
/// direction (including the holonomy a_0) and Re <grad f, direction>.
template <class T>
T gradient_fd_error(const TorusFieldState<T>& x, std::uint64_t seed, T h = T(1e-6)) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const ModeBox b = x.box();
  const int M = b.size();
  auto rnd = [&] { return std::complex<T>(T(U(rng)), T(U(rng))); };
  VecXc<T> da(M), dal(M), dbe(M);
  for (int i = 0; i < M; ++i) {
    da(i) = i == b.zero() ? std::complex<T>(0) : rnd();
    dal(i) = rnd();
    dbe(i) = rnd();
  }
  const std::complex<T> d0 = rnd();
  auto shifted = [&](T t) {
    TorusFieldState<T> y = x;
    y.a += t * da;
    y.alpha += t * dal;
    y.beta += t * dbe;
    const std::complex<T> hol = std::complex<T>(y.u, y.v) - T(2 / kPi) * t * d0;
    y.u = std::real(hol);
    y.v = std::imag(hol);
    return y;
  };
  const T fd = (eval_f(shifted(h)) - eval_f(shifted(-h))) / (T(2) * h);
  const auto g = grad_f(x);
  const T an = std::real(g.a.dot(da) + g.alpha.dot(dal) + g.beta.dot(dbe) + std::conj(g.g0) * d0);
  return std::abs(fd - an) / std::max(std::abs(an), T(1e-300));
}

struct DecayRun {
  double gap, rate, s_end;
  FlowDiagnostics diag;
};

/// Flows a small stable-subspace spinor and fits its exponential rate on the
/// last two thirds of a window short enough that roundoff in the unstable
/// directions stays below 1e-4 relative.
inline DecayRun decay_run(std::uint64_t seed, double u, double v, int N = 4, double amp = 1e-8) {
  const double gap = hessian_spectrum(u, v, N).gap;
  if (!(gap > 0)) throw PreconditionError("decay run needs a positive spectral gap");
  const double s_end = std::min(25.0 / max_multiplier(u, v, N), 8.0 / gap);
  StepControl ctl;
  ctl.atol = amp * 1e-12;
  const auto ts = geometric_times(s_end / 200, s_end, 120);
  auto tr = flow(stable_spinor_state<double>(seed, N, u, v, amp), s_end, ctl, ts);
  DecayRun r{gap, fit_decay_rate(tr.diag, s_end / 3), s_end, std::move(tr.diag)};
  return r;
}

}  // namespace surgtri::torus
