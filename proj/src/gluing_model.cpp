#include "surgtri/gluing_model.hpp"
#include "surgtri/smooth.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <random>

namespace surgtri::glue {

namespace {

using Mat4 = Eigen::Matrix4d;
using Vec4 = Eigen::Vector4d;

Mat4 unit_symmetric(std::mt19937_64& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  Mat4 P;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j <= i; ++j) P(i, j) = P(j, i) = N(rng);
  return P / P.norm();
}

struct NeckCoefficients {
  Mat4 J, Q, PL, PR;
  double kappa, delta, r;

  Mat4 B(double s) const {
    return Q + kappa * (std::exp(-delta * (s + r)) * PL + std::exp(-delta * (r - s)) * PR);
  }
};

NeckCoefficients coefficients(const NeckModel& m) {
  NeckCoefficients c;
  c.J.setZero();
  c.J(0, 1) = -1;
  c.J(1, 0) = 1;
  c.J(2, 3) = -1;
  c.J(3, 2) = 1;
  c.Q = Vec4(0, 0, m.mu, -m.mu).asDiagonal();
  std::mt19937_64 rng(m.perturbation_seed);
  c.PL = unit_symmetric(rng);
  c.PR = unit_symmetric(rng);
  c.kappa = m.kappa;
  c.delta = m.delta;
  c.r = m.r;
  return c;
}

}  // namespace

double NeckModel::window() const { return std::min(mu / 2, kPi / (2 * r)); }

NeckPencil assemble_neck(const NeckModel& m, int elements) {
  if (!(m.r > 0) || elements < 2) throw PreconditionError("neck model needs r > 0 and at least two elements");
  const auto c = coefficients(m);
  const int nodes = elements + 1;
  const int full = 4 * nodes;
  const double h = 2 * m.r / elements;

  // reduced coordinates: 2 at each end, 4 at interior nodes
  const int reduced = full - 4;
  std::vector<Eigen::Triplet<double>> tt;
  tt.emplace_back(0, 0, std::cos(m.theta_left));
  tt.emplace_back(1, 0, std::sin(m.theta_left));
  tt.emplace_back(2, 1, 1.0);
  for (int i = 4; i < full - 4; ++i) tt.emplace_back(i, i - 2, 1.0);
  tt.emplace_back(full - 4, reduced - 2, std::cos(m.theta_right));
  tt.emplace_back(full - 3, reduced - 2, std::sin(m.theta_right));
  tt.emplace_back(full - 1, reduced - 1, 1.0);
  Eigen::SparseMatrix<double> T(full, reduced);
  T.setFromTriplets(tt.begin(), tt.end());

  const double gx[3] = {0.5 - std::sqrt(0.15), 0.5, 0.5 + std::sqrt(0.15)};
  const double gw[3] = {5.0 / 18, 8.0 / 18, 5.0 / 18};
  std::vector<Eigen::Triplet<double>> ta, tm;
  for (int e = 0; e < elements; ++e) {
    Eigen::Matrix<double, 8, 8> Ke = Eigen::Matrix<double, 8, 8>::Zero(), Me = Ke;
    for (int q = 0; q < 3; ++q) {
      const double xi = gx[q], s = -m.r + h * (e + xi);
      const Mat4 B = c.B(s);
      Eigen::Matrix<double, 4, 8> G, Nm;
      G << -c.J / h + (1 - xi) * B, c.J / h + xi * B;
      Nm << (1 - xi) * Mat4::Identity(), xi * Mat4::Identity();
      Ke += gw[q] * h * G.transpose() * G;
      Me += gw[q] * h * Nm.transpose() * Nm;
    }
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) {
        ta.emplace_back(4 * e + i, 4 * e + j, Ke(i, j));
        tm.emplace_back(4 * e + i, 4 * e + j, Me(i, j));
      }
  }
  Eigen::SparseMatrix<double> Af(full, full), Mf(full, full);
  Af.setFromTriplets(ta.begin(), ta.end());
  Mf.setFromTriplets(tm.begin(), tm.end());
  NeckPencil p;
  p.A = T.transpose() * Af * T;
  p.M = T.transpose() * Mf * T;
  p.elements = elements;
  return p;
}

int count_below(const NeckPencil& p, double t) {
  const Eigen::SparseMatrix<double> S = p.A - t * p.M;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::NaturalOrdering<int>> ldlt;
  ldlt.compute(S);
  if (ldlt.info() != Eigen::Success) throw CertificateError("inertia count: LDLT factorization failed");
  return int((ldlt.vectorD().array() < 0).count());
}

namespace {

std::vector<double> small_values(const NeckPencil& p, double window) {
  const double top = window * window;
  const int n = count_below(p, top);
  std::vector<double> out;
  double lo_prev = 0;
  for (int i = 0; i < n; ++i) {
    double lo = lo_prev, hi = top;
    while (hi - lo > 1e-12 * hi) {
      const double mid = 0.5 * (lo + hi);
      if (count_below(p, mid) >= i + 1) hi = mid;
      else lo = mid;
    }
    out.push_back(std::sqrt(0.5 * (lo + hi)));
    lo_prev = lo;
  }
  return out;
}

}  // namespace

SmallEigs glued_small_eigs(const NeckModel& m) {
  SmallEigs res;
  res.window = m.window();
  const int base = std::max(2, int(std::ceil(m.points_per_unit * 2 * m.r)));
  // linear elements converge at second order; compare Richardson-extrapolated
  // values of consecutive level pairs
  std::vector<double> raw_prev, extrap_prev;
  for (int level = 0; level <= m.max_levels; ++level) {
    const int elements = base << level;
    const auto raw = small_values(assemble_neck(m, elements), res.window);
    std::vector<double> extrap;
    if (level > 0 && raw.size() == raw_prev.size())
      for (std::size_t i = 0; i < raw.size(); ++i) extrap.push_back((4 * raw[i] - raw_prev[i]) / 3);
    if (!extrap.empty() && extrap.size() == extrap_prev.size()) {
      double change = 0;
      for (std::size_t i = 0; i < extrap.size(); ++i)
        change = std::max(change, std::abs(extrap[i] - extrap_prev[i]) / std::max(extrap[i], 1e-300));
      if (change < m.conv_tol) {
        res.values = extrap;
        res.count = int(extrap.size());
        res.levels = level;
        res.elements = elements;
        res.rel_change = change;
        return res;
      }
    }
    if (level > 0 && raw.empty() && raw_prev.empty()) {
      res.levels = level;
      res.elements = elements;
      return res;
    }
    raw_prev = raw;
    extrap_prev = extrap;
  }
  throw CertificateError("neck eigenvalues did not converge under grid refinement");
}

std::vector<double> dense_singular_values(const NeckModel& m, int elements) {
  const auto p = assemble_neck(m, elements);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(p.A), Eigen::MatrixXd(p.M));
  std::vector<double> out;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(std::sqrt(std::max(0.0, es.eigenvalues()(i))));
  return out;
}

std::vector<double> unperturbed_small_values(const NeckModel& m) {
  std::vector<double> out;
  const double d = m.theta_left - m.theta_right;
  const double w = m.window();
  for (int j = -int(std::ceil(std::abs(d) / kPi)) - 2; j <= int(std::ceil(std::abs(d) / kPi)) + 2; ++j) {
    const double l = std::abs(d + j * kPi) / (2 * m.r);
    if (l < w) out.push_back(l);
  }
  std::sort(out.begin(), out.end());
  return out;
}

double fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw PreconditionError("fit_loglog needs two or more points");
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = std::log(x[i]), b = std::log(y[i]);
    n += 1;
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---------------------------------------------------------------------------

double cutoff(double s) { return 1 - smooth_step((s + 1) / 2); }
double cutoff_derivative(double s) { return -0.5 * smooth_step_derivative((s + 1) / 2); }

PreGlueResult pre_glue(const PreGlueProfile& p, const std::function<double(double)>& tail,
                       double tail_bound, int samples) {
  PreGlueResult r;
  const double a = -2, b = 2, h = (b - a) / (samples - 1);
  double l2 = 0;
  for (int i = 0; i < samples; ++i) {
    const double s = a + h * i;
    const double t = tail(s + p.r);
    r.s.push_back(s);
    r.spliced.push_back(cutoff(s) * t);
    r.error.push_back(cutoff_derivative(s) * t);
    r.sup_error = std::max(r.sup_error, std::abs(r.error.back()));
    const double w = (i == 0 || i == samples - 1) ? 0.5 : 1.0;
    l2 += w * h * r.error.back() * r.error.back();
  }
  r.l2_error = std::sqrt(l2);
  r.bound = tail_bound * std::exp(-p.delta * (p.r - 2));
  r.certified = r.sup_error <= r.bound;
  return r;
}

// ---------------------------------------------------------------------------

std::optional<std::string> violated_inequality(const ContractionProblem& p) {
  if (!(p.lambda_gap > 0)) return "lambda_gap > 0";
  if (!(p.C_quad > 0)) return "C_quad > 0";
  if (!(p.eps_ball > 0)) return "eps_ball > 0";
  if (p.state_dim < 1) return "state_dim >= 1";
  if (!(p.sigma_norm >= 0)) return "sigma_norm >= 0";
  if (!(p.eps_ball < p.lambda_gap / (2 * p.C_quad))) return "eps_ball < lambda_gap/(2*C_quad)";
  if (!(p.sigma_norm <= p.C_quad * p.eps_ball * p.eps_ball)) return "sigma_norm <= C_quad*eps_ball^2";
  return std::nullopt;
}

ContractionCertificate contract_solve(const ContractionProblem& p, const VecMap& N_map,
                                      const Eigen::VectorXd& Sigma_vec, const VecMap& H_inv_map,
                                      double tol, int max_iter) {
  if (auto v = violated_inequality(p)) throw InadmissibleError(*v);
  if (Sigma_vec.size() != p.state_dim) throw PreconditionError("Sigma has the wrong dimension");
  auto T = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return -H_inv_map(N_map(x) + Sigma_vec); };
  ContractionCertificate c;
  c.factor_bound = 2 * p.C_quad * p.eps_ball / p.lambda_gap;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(p.state_dim);
  double prev_step = -1;
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::VectorXd next = T(x);
    const double step = (next - x).norm();
    c.step_norms.push_back(step);
    if (prev_step > 1e-13 && step > 1e-13) c.measured_factor = std::max(c.measured_factor, step / prev_step);
    x = next;
    c.iterations = it;
    if (!std::isfinite(step)) break;
    if (step <= tol) break;
    prev_step = step;
  }
  c.fixed_point = x;
  c.residual = (x - T(x)).norm();
  c.fixed_point_norm = x.norm();
  c.in_ball = c.fixed_point_norm <= p.eps_ball;
  if (!(c.residual < 1e-10)) {
    std::string trace;
    for (std::size_t i = c.step_norms.size() > 8 ? c.step_norms.size() - 8 : 0; i < c.step_norms.size(); ++i)
      trace += " " + std::to_string(c.step_norms[i]);
    throw CertificateError("contraction iteration did not converge; last steps:" + trace);
  }
  return c;
}

Eigen::VectorXd ContractionInstance::N(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = x.dot(B[std::size_t(i)] * x);
  return problem.C_quad * out;
}

Eigen::VectorXd ContractionInstance::H_inv(const Eigen::VectorXd& y) const { return H.ldlt().solve(y); }

ContractionInstance make_contraction_instance(std::uint64_t seed, const ContractionProblem& p) {
  if (p.state_dim < 1) throw PreconditionError("state_dim must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> G(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const int n = p.state_dim;
  ContractionInstance inst;
  inst.problem = p;

  Eigen::MatrixXd R(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) R(i, j) = G(rng);
  const Eigen::MatrixXd O = Eigen::HouseholderQR<Eigen::MatrixXd>(R).householderQ() * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd ev(n);
  for (int i = 0; i < n; ++i) ev(i) = (U(rng) < 0.5 ? -1 : 1) * p.lambda_gap * (1 + 2 * U(rng));
  ev(0) = std::copysign(p.lambda_gap, ev(0));  // attain the bound
  inst.H = O * ev.asDiagonal() * O.transpose();
  inst.H = 0.5 * (inst.H + inst.H.transpose());

  double fro = 0;
  inst.B.resize(std::size_t(n));
  for (auto& Bi : inst.B) {
    Bi.resize(n, n);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k <= j; ++k) Bi(j, k) = Bi(k, j) = G(rng);
    fro += Bi.squaredNorm();
  }
  for (auto& Bi : inst.B) Bi /= std::sqrt(fro);

  inst.Sigma.resize(n);
  for (int i = 0; i < n; ++i) inst.Sigma(i) = G(rng);
  inst.Sigma *= p.sigma_norm / inst.Sigma.norm();
  return inst;
}

ContractionCertificate contract_solve(const ContractionInstance& inst, double tol) {
  return contract_solve(
      inst.problem, [&](const Eigen::VectorXd& x) { return inst.N(x); }, inst.Sigma,
      [&](const Eigen::VectorXd& y) { return inst.H_inv(y); }, tol);
}

}  // namespace surgtri::glue
