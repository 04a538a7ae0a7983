#pragma once

// Maslov index of pairs of Lagrangian-line paths in R^2, spectral flow of
// symmetric matrix paths through the level -eps, a direct-sum splitting model
// and relative-degree transfers along the staircase.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "surgtri/chi_geometry.hpp"
#include "surgtri/common.hpp"

namespace surgtri::grading {

/// Line through the origin at angle theta, canonical in [0, pi).
struct LagLine {
  double theta = 0.0;
  static LagLine canonical(double theta);
};

/// Sampled path of lines with a continuous lift theta(tau), tau in [0, 1].
struct LagPath {
  std::vector<double> tau;
  std::vector<double> theta;

  /// Samples fn (any representative mod pi) on n+1 uniform points, refining
  /// intervals until consecutive lifted angles differ by less than pi/4.
  static LagPath sample(const std::function<double(double)>& fn, int n = 64);
  /// Lift of raw angles (mod pi) on the given grid; throws if a step is ambiguous.
  static LagPath from_angles(std::vector<double> tau, const std::vector<double>& raw);
  static LagPath constant(double theta);

  double at(double t) const;  // piecewise-linear interpolation of the lift
  /// Path followed by other, each squeezed to half of [0, 1]. Lifts are joined
  /// at the shared endpoint, which must agree mod pi.
  LagPath concat(const LagPath& other) const;
  /// tau -> g(tau) with g a monotone bijection of [0, 1].
  LagPath reparameterize(const std::function<double(double)>& g) const;
};

/// Seeded path from theta0 to theta1: the linear lift plus `harmonics` sine
/// modes with coefficients uniform in [-amp, amp].
LagPath random_lag_path(std::uint64_t seed, double theta0, double theta1, int harmonics = 3,
                        double amp = 1.5, int n = 64);

struct Crossing {
  double tau;
  int sign;
};

struct MaslovResult {
  int index = 0;
  std::vector<Crossing> crossings;
};

/// Signed count of tau where theta1 = theta2 mod pi; upward crossings of
/// theta1 - theta2 count +1. Endpoints must be transverse.
MaslovResult maslov(const LagPath& l1, const LagPath& l2, double endpoint_tol = 1e-9);

/// Sampled path of real symmetric matrices.
struct SymOpPath {
  std::vector<double> tau;
  std::vector<Eigen::MatrixXd> mats;

  static SymOpPath sample(const std::function<Eigen::MatrixXd(double)>& fn, int n = 64);
  static SymOpPath constant(const Eigen::MatrixXd& A);
  int dim() const { return mats.empty() ? 0 : int(mats.front().rows()); }
  SymOpPath concat(const SymOpPath& other) const;
};

struct SpectralFlowResult {
  int sf = 0;
  double eps = 0;                // level is -eps
  std::vector<int> per_interval;  // net upward crossings on each sample interval
};

/// Net number of eigenvalues crossing -eps upward, eps = eps_rel * spectral
/// scale (max |eigenvalue| over the path, at least 1).
SpectralFlowResult spectral_flow(const SymOpPath& p, double eps_rel = 1e-6);

// ---------------------------------------------------------------------------
// splitting model

/// Glued path = O (H1 + M + H2) O^T + sin(pi tau) kappa R where M(tau) is the
/// diagonal (d(tau) + j pi) / c, j = -K..K, built from the Lagrangian pair
/// (d = theta1 - theta2), so that its spectral flow is the Maslov index.
struct SplittingInstance {
  SymOpPath half1, half2, glued;
  LagPath l1, l2;
  int K = 0;
  double c = 2.0;
};

struct SplittingOptions {
  int samples = 64;
  int extra_maslov = 0;  // added full turns of l1 (each shifts the index by +1)
  double kappa = 0.5;
  int max_dim = 12;
};

SplittingInstance splitting_instance(std::uint64_t seed, const SplittingOptions& opt = {});
SplittingInstance trivial_splitting_instance();

struct SplittingReport {
  int sf_glued, sf1, sf2, maslov, residual;
};

SplittingReport splitting_check(const SplittingInstance& inst);

// ---------------------------------------------------------------------------
// relative degree transfer

/// Data for comparing relative degrees of two marked points: the moduli-curve
/// tangent path, the staircase tangent path between the points together with
/// the staircase samples (for the singular-lattice check), the constant target
/// line (L_Y1 or L_Y0), and the V-side and nu-side operator paths.
struct TransferData {
  bool y1 = true;
  int k = 0;
  LagPath moduli;
  LagPath staircase;
  std::vector<chi::CharPoint> staircase_points;
  LagLine target;
  SymOpPath v_side;
  SymOpPath nu_staircase;
  SymOpPath nu_target;
};

struct TransferReport {
  bool y1;
  int k;
  int deg_staircase;
  int deg_target;
  int maslov_staircase;
  int maslov_target;
  int difference;  // deg_staircase - deg_target
  bool holds;      // equality (Y1) or congruence mod 2k (Y0(k))
};

TransferReport relative_degree_transfer(const TransferData& d, double theta_margin = 0.05);

/// Tangent path of the staircase over u in [u0, u1] plus its samples.
std::pair<LagPath, std::vector<chi::CharPoint>> staircase_tangents(const chi::PerturbationCurve& pc,
                                                                   double u0, double u1, int n = 200);

/// Y1 transfer instance on the slope-1 stretch between the k = 0 and k = 1 climbs.
TransferData y1_transfer_instance(std::uint64_t seed, const chi::PerturbationCurve& pc);
/// Y0(k) transfer instance on the climb at c_k; `wraps` extra periods of the
/// staircase path between the marked points.
TransferData y0_transfer_instance(std::uint64_t seed, const chi::PerturbationCurve& pc, int k,
                                  int wraps);
/// Both marked points equal: all paths constant.
TransferData identical_point_instance(const chi::PerturbationCurve& pc);

/// Maslov(staircase tangents over [u0, u1], L_Y1 tangent). The endpoints of the
/// staircase tangent path can coincide with the L_Y1 direction, so the line is
/// rotated by +delta and -delta; both results are returned.
std::pair<int, int> staircase_vs_y1_maslov(const chi::PerturbationCurve& pc, double u0, double u1,
                                           double delta = 1e-6);

}  // namespace surgtri::grading
