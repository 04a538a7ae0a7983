#include "surgtri/grading.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <tuple>

namespace surgtri::grading {

namespace {

double reduce_pi(double x) { return x - kPi * std::round(x / kPi); }

double interp(const std::vector<double>& xs, const std::vector<double>& ys, double t) {
  if (t <= xs.front()) return ys.front();
  if (t >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), t);
  const std::size_t i = std::size_t(it - xs.begin()) - 1;
  const double w = (t - xs[i]) / (xs[i + 1] - xs[i]);
  return ys[i] + w * (ys[i + 1] - ys[i]);
}

Eigen::MatrixXd random_symmetric(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::MatrixXd A(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) A(i, j) = A(j, i) = N(rng);
  return A / std::sqrt(double(d));
}

Eigen::MatrixXd random_orthogonal(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::MatrixXd G(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) G(i, j) = N(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  return qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
}

double min_abs_eig(const Eigen::MatrixXd& A) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs().minCoeff();
}

/// (1 - t) A0 + t A1 + sin(pi t) S with A0, A1 bounded away from singular.
std::function<Eigen::MatrixXd(double)> random_operator_path(std::mt19937_64& rng, int d) {
  Eigen::MatrixXd A0, A1;
  do A0 = random_symmetric(rng, d); while (min_abs_eig(A0) < 0.05);
  do A1 = random_symmetric(rng, d); while (min_abs_eig(A1) < 0.05);
  const Eigen::MatrixXd S = 0.5 * random_symmetric(rng, d);
  return [A0, A1, S](double t) -> Eigen::MatrixXd { return (1 - t) * A0 + t * A1 + std::sin(kPi * t) * S; };
}

double smoothstep(double t) { return t * t * (3 - 2 * t); }

Eigen::MatrixXd direct_sum(const std::vector<Eigen::MatrixXd>& blocks) {
  int n = 0;
  for (const auto& b : blocks) n += int(b.rows());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  int o = 0;
  for (const auto& b : blocks) {
    out.block(o, o, b.rows(), b.cols()) = b;
    o += int(b.rows());
  }
  return out;
}

}  // namespace

LagLine LagLine::canonical(double theta) {
  double t = std::fmod(theta, kPi);
  if (t < 0) t += kPi;
  if (t >= kPi) t -= kPi;
  return {t};
}

LagPath LagPath::from_angles(std::vector<double> tau, const std::vector<double>& raw) {
  if (tau.size() != raw.size() || tau.size() < 2) throw PreconditionError("LagPath needs matching grids of size >= 2");
  LagPath p;
  p.tau = std::move(tau);
  p.theta.push_back(raw.front());
  for (std::size_t i = 1; i < raw.size(); ++i) {
    const double step = reduce_pi(raw[i] - raw[i - 1]);
    if (std::abs(step) > kPi / 2 - 1e-9) throw PreconditionError("LagPath lift is ambiguous: refine the sampling");
    p.theta.push_back(p.theta.back() + step);
  }
  return p;
}

LagPath LagPath::sample(const std::function<double(double)>& fn, int n) {
  std::vector<double> ts, raw;
  for (int i = 0; i <= n; ++i) {
    ts.push_back(double(i) / n);
    raw.push_back(fn(ts.back()));
  }
  for (std::size_t i = 0; i + 1 < ts.size();) {
    if (std::abs(reduce_pi(raw[i + 1] - raw[i])) > kPi / 4) {
      if (ts[i + 1] - ts[i] < 1e-12) throw PreconditionError("LagPath refinement failed: path is discontinuous");
      const double m = 0.5 * (ts[i] + ts[i + 1]);
      ts.insert(ts.begin() + std::ptrdiff_t(i) + 1, m);
      raw.insert(raw.begin() + std::ptrdiff_t(i) + 1, fn(m));
    } else {
      ++i;
    }
  }
  return from_angles(std::move(ts), raw);
}

LagPath LagPath::constant(double theta) { return {{0.0, 1.0}, {theta, theta}}; }

double LagPath::at(double t) const { return interp(tau, theta, t); }

LagPath LagPath::concat(const LagPath& other) const {
  const double jump = other.theta.front() - theta.back();
  if (std::abs(reduce_pi(jump)) > 1e-9) throw PreconditionError("concat: paths do not share the junction line");
  const double shift = -kPi * std::round(jump / kPi);
  LagPath p;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    p.tau.push_back(0.5 * tau[i]);
    p.theta.push_back(theta[i]);
  }
  for (std::size_t i = 1; i < other.tau.size(); ++i) {
    p.tau.push_back(0.5 + 0.5 * other.tau[i]);
    p.theta.push_back(other.theta[i] + shift);
  }
  return p;
}

LagPath LagPath::reparameterize(const std::function<double(double)>& g) const {
  LagPath p;
  const std::size_t n = std::max<std::size_t>(2 * tau.size(), 16);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = double(i) / double(n - 1);
    p.tau.push_back(t);
    p.theta.push_back(at(g(t)));
  }
  return p;
}

LagPath random_lag_path(std::uint64_t seed, double theta0, double theta1, int harmonics,
                        double amp, int n) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-amp, amp);
  std::vector<double> c(std::size_t(std::max(harmonics, 0)));
  for (auto& x : c) x = U(rng);
  return LagPath::sample(
      [=](double t) {
        double th = theta0 + (theta1 - theta0) * t;
        for (std::size_t j = 0; j < c.size(); ++j) th += c[j] * std::sin(double(j + 1) * kPi * t);
        return th;
      },
      n);
}

MaslovResult maslov(const LagPath& l1, const LagPath& l2, double endpoint_tol) {
  std::vector<double> grid = l1.tau;
  grid.insert(grid.end(), l2.tau.begin(), l2.tau.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  std::vector<double> d;
  for (double t : grid) d.push_back(l1.at(t) - l2.at(t));
  if (std::abs(reduce_pi(d.front())) < endpoint_tol || std::abs(reduce_pi(d.back())) < endpoint_tol)
    throw PreconditionError("maslov: endpoints are not transverse");

  MaslovResult r;
  for (std::size_t i = 1; i + 1 < d.size(); ++i) {
    if (std::abs(reduce_pi(d[i])) < 1e-12) {
      const double L = kPi * std::round(d[i] / kPi);
      if ((d[i - 1] - L) * (d[i + 1] - L) > 0)
        throw CertificateError("maslov: degenerate crossing at tau = " + std::to_string(grid[i]) +
                               " (refine the sampling or perturb the path)");
    }
  }
  for (std::size_t i = 0; i + 1 < d.size(); ++i) {
    const long f0 = long(std::floor(d[i] / kPi)), f1 = long(std::floor(d[i + 1] / kPi));
    auto locate = [&](double L) {
      const double w = (L - d[i]) / (d[i + 1] - d[i]);
      return grid[i] + w * (grid[i + 1] - grid[i]);
    };
    for (long j = f0 + 1; j <= f1; ++j) r.crossings.push_back({locate(kPi * double(j)), +1});
    for (long j = f0; j > f1; --j) r.crossings.push_back({locate(kPi * double(j)), -1});
  }
  for (const auto& c : r.crossings) r.index += c.sign;
  return r;
}

SymOpPath SymOpPath::sample(const std::function<Eigen::MatrixXd(double)>& fn, int n) {
  SymOpPath p;
  for (int i = 0; i <= n; ++i) {
    p.tau.push_back(double(i) / n);
    p.mats.push_back(fn(p.tau.back()));
  }
  return p;
}

SymOpPath SymOpPath::constant(const Eigen::MatrixXd& A) { return {{0.0, 1.0}, {A, A}}; }

SymOpPath SymOpPath::concat(const SymOpPath& other) const {
  if ((mats.back() - other.mats.front()).norm() > 1e-12 * std::max(1.0, mats.back().norm()))
    throw PreconditionError("concat: operator paths do not share the junction");
  SymOpPath p;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    p.tau.push_back(0.5 * tau[i]);
    p.mats.push_back(mats[i]);
  }
  for (std::size_t i = 1; i < other.tau.size(); ++i) {
    p.tau.push_back(0.5 + 0.5 * other.tau[i]);
    p.mats.push_back(other.mats[i]);
  }
  return p;
}

SpectralFlowResult spectral_flow(const SymOpPath& p, double eps_rel) {
  if (p.mats.size() < 2) throw PreconditionError("spectral_flow needs at least two samples");
  std::vector<Eigen::VectorXd> eigs;
  double scale = 1.0;
  for (const auto& A : p.mats) {
    if (A.rows() != A.cols() || A.rows() != p.mats.front().rows())
      throw PreconditionError("spectral_flow: matrices must be square of one size");
    if ((A - A.transpose()).norm() > 1e-12 * std::max(1.0, A.norm()))
      throw PreconditionError("spectral_flow: matrix is not symmetric");
    eigs.push_back(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A, Eigen::EigenvaluesOnly).eigenvalues());
    if (eigs.back().size()) scale = std::max(scale, eigs.back().cwiseAbs().maxCoeff());
  }
  SpectralFlowResult r;
  r.eps = eps_rel * scale;
  const double resolution = 1e-9 * scale;
  for (const auto* e : {&eigs.front(), &eigs.back()})
    for (Eigen::Index i = 0; i < e->size(); ++i)
      if (std::abs((*e)(i) + r.eps) < resolution)
        throw PreconditionError("spectral_flow: endpoint eigenvalue at the level -eps");
  auto below = [&](const Eigen::VectorXd& e) { return int((e.array() < -r.eps).count()); };
  for (std::size_t i = 0; i + 1 < eigs.size(); ++i) {
    r.per_interval.push_back(below(eigs[i]) - below(eigs[i + 1]));
    r.sf += r.per_interval.back();
  }
  return r;
}

// ---------------------------------------------------------------------------

SplittingInstance splitting_instance(std::uint64_t seed, const SplittingOptions& opt) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::uniform_int_distribution<int> dimd(1, 3);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const int d1 = dimd(rng), d2 = dimd(rng);
    const double a0 = kPi * U(rng), a1 = (2 * U(rng) - 1) * 1.4 * kPi, a2 = U(rng) - 0.5;
    const double b0 = kPi * U(rng), b1 = U(rng) - 0.5;
    const int extra = opt.extra_maslov;
    auto th1 = [=](double t) { return a0 + a1 * t + a2 * std::sin(2 * kPi * t) + extra * kPi * smoothstep(t); };
    auto th2 = [=](double t) { return b0 + b1 * std::sin(kPi * t); };
    SplittingInstance inst;
    inst.l1 = LagPath::sample(th1, opt.samples);
    inst.l2 = LagPath::sample(th2, opt.samples);
    // lift of d on the union grid, via the same interpolation maslov uses
    // acceptance depends on the base draw only, so inserting turns keeps the instance
    double dmax_base = 0;
    for (int i = 0; i <= 4 * opt.samples; ++i) {
      const double t = double(i) / (4 * opt.samples);
      dmax_base = std::max(dmax_base, std::abs(th1(t) - extra * kPi * smoothstep(t) - th2(t)));
    }
    if (std::abs(reduce_pi(th1(0) - th2(0))) < 0.1 || std::abs(reduce_pi(th1(1) - th2(1))) < 0.1) continue;
    const int K_base = int(std::ceil((dmax_base + 0.1) / kPi));
    if (d1 + d2 + 2 * K_base + 1 > opt.max_dim - 2 * std::max(1, std::abs(extra))) continue;
    double dmax = 0;
    for (double t : inst.l1.tau) dmax = std::max(dmax, std::abs(inst.l1.at(t) - inst.l2.at(t)));
    for (double t : inst.l2.tau) dmax = std::max(dmax, std::abs(inst.l1.at(t) - inst.l2.at(t)));
    inst.K = std::max(K_base + std::abs(extra), int(std::ceil(dmax / kPi)));
    const int dim = d1 + d2 + 2 * inst.K + 1;

    auto H1 = random_operator_path(rng, d1);
    auto H2 = random_operator_path(rng, d2);
    const Eigen::MatrixXd O = random_orthogonal(rng, dim);
    Eigen::MatrixXd R = random_symmetric(rng, dim);
    R /= R.norm();
    const double c = inst.c, kappa = opt.kappa;
    const int K = inst.K;
    const LagPath l1 = inst.l1, l2 = inst.l2;
    auto M = [=](double t) {
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2 * K + 1, 2 * K + 1);
      const double dt = l1.at(t) - l2.at(t);
      for (int j = -K; j <= K; ++j) m(j + K, j + K) = (dt + j * kPi) / c;
      return m;
    };
    inst.half1 = SymOpPath::sample(H1, opt.samples);
    inst.half2 = SymOpPath::sample(H2, opt.samples);
    inst.glued = SymOpPath::sample(
        [=](double t) -> Eigen::MatrixXd {
          Eigen::MatrixXd G = O * direct_sum({H1(t), M(t), H2(t)}) * O.transpose() + std::sin(kPi * t) * kappa * R;
          return 0.5 * (G + G.transpose());
        },
        opt.samples);
    return inst;
  }
  throw InfeasibleError("splitting generator: no instance within the dimension budget");
}

SplittingInstance trivial_splitting_instance() {
  SplittingInstance inst;
  inst.l1 = LagPath::constant(kPi / 3);
  inst.l2 = LagPath::constant(0.0);
  inst.K = 0;
  const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
  inst.half1 = SymOpPath::constant(one);
  inst.half2 = SymOpPath::constant(-one);
  inst.glued = SymOpPath::constant(direct_sum({one, one * (kPi / 3) / inst.c, -one}));
  return inst;
}

SplittingReport splitting_check(const SplittingInstance& inst) {
  SplittingReport r{};
  r.sf_glued = spectral_flow(inst.glued).sf;
  r.sf1 = spectral_flow(inst.half1).sf;
  r.sf2 = spectral_flow(inst.half2).sf;
  r.maslov = maslov(inst.l1, inst.l2).index;
  r.residual = r.sf_glued - (r.sf1 + r.maslov + r.sf2);
  return r;
}

// ---------------------------------------------------------------------------

TransferReport relative_degree_transfer(const TransferData& d, double theta_margin) {
  for (const auto& p : d.staircase_points)
    if (chi::theta_distance(p) < theta_margin)
      throw PreconditionError("transfer: staircase path data crosses the singular-lattice margin");
  TransferReport r{};
  r.y1 = d.y1;
  r.k = d.k;
  const int sf_v = spectral_flow(d.v_side).sf;
  r.maslov_staircase = maslov(d.moduli, d.staircase).index;
  r.maslov_target = maslov(d.moduli, LagPath::constant(d.target.theta)).index;
  r.deg_staircase = sf_v + r.maslov_staircase + spectral_flow(d.nu_staircase).sf;
  r.deg_target = sf_v + r.maslov_target + spectral_flow(d.nu_target).sf;
  r.difference = r.deg_staircase - r.deg_target;
  if (d.y1 || d.k == 0) r.holds = r.difference == 0;
  else r.holds = r.difference % (2 * d.k) == 0;
  return r;
}

std::pair<LagPath, std::vector<chi::CharPoint>> staircase_tangents(const chi::PerturbationCurve& pc,
                                                                   double u0, double u1, int n) {
  std::vector<double> ts, raw;
  std::vector<chi::CharPoint> pts;
  for (int i = 0; i <= n; ++i) {
    const double t = double(i) / n, u = u0 + t * (u1 - u0);
    ts.push_back(t);
    raw.push_back(std::atan(pc.slope(u)));
    pts.push_back(chi::canonicalize({u, pc.value(u)}));
  }
  return {LagPath::from_angles(ts, raw), pts};
}

namespace {

/// Random moduli tangent path whose endpoints keep `margin` from the arcs
/// between the staircase end tangents and the target line.
LagPath random_moduli_path(std::mt19937_64& rng, const LagPath& stair, double target, double margin = 0.05) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto bad = [&](double th, double a) {
    double x = std::fmod(th, kPi);
    if (x < 0) x += kPi;
    double lo = std::min(a, target), hi = std::max(a, target);
    return x > lo - margin && x < hi + margin;
  };
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const double a0 = kPi * U(rng), a1 = (2 * U(rng) - 1) * 2.5 * kPi, a2 = U(rng) - 0.5;
    auto fn = [=](double t) { return a0 + a1 * t + a2 * std::sin(kPi * t); };
    if (bad(fn(0), LagLine::canonical(stair.theta.front()).theta) || bad(fn(1), LagLine::canonical(stair.theta.back()).theta))
      continue;
    return LagPath::sample(fn, 128);
  }
  throw InfeasibleError("transfer generator: no admissible moduli path");
}

SymOpPath random_v_side(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const int d = 3;
  Eigen::VectorXd e0(d), e1(d);
  for (int i = 0; i < d; ++i) {
    e0(i) = U(rng) < 0 ? -0.5 - 0.5 * std::abs(U(rng)) : 0.5 + 0.5 * std::abs(U(rng));
    e1(i) = U(rng) < 0 ? -0.5 - 0.5 * std::abs(U(rng)) : 0.5 + 0.5 * std::abs(U(rng));
  }
  const Eigen::MatrixXd O = random_orthogonal(rng, d);
  return SymOpPath::sample(
      [=](double t) -> Eigen::MatrixXd {
        Eigen::MatrixXd A = O * ((1 - t) * e0 + t * e1).asDiagonal() * O.transpose();
        return 0.5 * (A + A.transpose());
      },
      32);
}

/// n eigenvalues moving from -1 to 1 (spectral flow n); identity when n = 0.
SymOpPath upward_path(int n) {
  if (n == 0) return SymOpPath::constant(Eigen::MatrixXd::Identity(1, 1));
  return SymOpPath::sample([n](double t) -> Eigen::MatrixXd { return (2 * t - 1) * Eigen::MatrixXd::Identity(n, n); }, 8);
}

}  // namespace

TransferData y1_transfer_instance(std::uint64_t seed, const chi::PerturbationCurve& pc) {
  std::mt19937_64 rng(seed);
  TransferData d;
  d.y1 = true;
  const double u0 = pc.center(0) + 1.5 * pc.width(), u1 = pc.center(1) - 1.5 * pc.width();
  std::tie(d.staircase, d.staircase_points) = staircase_tangents(pc, u0, u1);
  d.target = LagLine::canonical(kPi / 4);
  d.moduli = random_moduli_path(rng, d.staircase, d.target.theta);
  d.v_side = random_v_side(rng);
  d.nu_staircase = SymOpPath::constant(Eigen::MatrixXd::Identity(2, 2));
  d.nu_target = SymOpPath::constant(Eigen::MatrixXd::Identity(2, 2));
  return d;
}

TransferData y0_transfer_instance(std::uint64_t seed, const chi::PerturbationCurve& pc, int k, int wraps) {
  if (k < -pc.K() || k > pc.K()) throw PreconditionError("transfer: k outside the staircase range");
  std::mt19937_64 rng(seed);
  TransferData d;
  d.y1 = false;
  d.k = k;
  const double c = pc.center(k), w = pc.width();
  std::tie(d.staircase, d.staircase_points) = staircase_tangents(pc, c - 0.25 * w, c + 0.25 * w);
  d.target = LagLine::canonical(kPi / 2);
  d.moduli = random_moduli_path(rng, d.staircase, d.target.theta);
  d.v_side = random_v_side(rng);
  d.nu_staircase = upward_path(2 * std::abs(k) * wraps);
  d.nu_target = SymOpPath::constant(Eigen::MatrixXd::Identity(1, 1));
  return d;
}

TransferData identical_point_instance(const chi::PerturbationCurve& pc) {
  TransferData d;
  d.y1 = true;
  const double u = 0.5 * (pc.center(0) + pc.center(1));
  d.staircase = LagPath::constant(std::atan(pc.slope(u)));
  d.staircase_points = {chi::canonicalize({u, pc.value(u)})};
  d.target = LagLine::canonical(kPi / 4);
  d.moduli = LagPath::constant(0.0);
  d.v_side = SymOpPath::constant(Eigen::MatrixXd::Identity(3, 3));
  d.nu_staircase = SymOpPath::constant(Eigen::MatrixXd::Identity(2, 2));
  d.nu_target = SymOpPath::constant(Eigen::MatrixXd::Identity(2, 2));
  return d;
}

std::pair<int, int> staircase_vs_y1_maslov(const chi::PerturbationCurve& pc, double u0, double u1, double delta) {
  const auto [path, pts] = staircase_tangents(pc, u0, u1, 400);
  return {maslov(path, LagPath::constant(kPi / 4 + delta)).index,
          maslov(path, LagPath::constant(kPi / 4 - delta)).index};
}

}  // namespace surgtri::grading
