#pragma once

// One-dimensional surrogates for neck stretching: the operator J d/ds + Q + P(s)
// on [-r, r] with Lagrangian boundary data, the splice error of a cut-off
// decaying tail, and the contraction step of the gluing construction.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "surgtri/common.hpp"

namespace surgtri::glue {

/// Neck operator D = J d/ds + Q + P(s) on R^4 over [-r, r], with
/// J = diag(J2, J2), Q = diag(0, 0, mu, -mu) and an end-localized symmetric
/// perturbation P(s) = kappa (exp(-delta (s + r)) P_L + exp(-delta (r - s)) P_R).
/// Boundary data: w(-r) in span{(cos tL, sin tL, 0, 0), e3}, w(r) in
/// span{(cos tR, sin tR, 0, 0), e4}.
struct NeckModel {
  double mu = 2.0;
  double r = 10.0;
  double theta_left = 0.3;
  double theta_right = 1.5;
  double kappa = 0.3;
  double delta = 1.0;
  std::uint64_t perturbation_seed = 1;
  int points_per_unit = 40;
  int max_levels = 6;
  double conv_tol = 1e-6;

  int dim_ker_q() const { return 2; }
  /// Small-eigenvalue window: |sigma| < min(mu / 2, pi / (2 r)).
  double window() const;
};

/// Least-squares finite-element pencil (A, M): A is the form int |D w|^2 and M the
/// L2 mass, both restricted to the boundary subspaces. Eigenvalues of
/// A x = s M x are the squared singular values of D.
struct NeckPencil {
  Eigen::SparseMatrix<double> A, M;
  int elements = 0;
};

NeckPencil assemble_neck(const NeckModel& m, int elements);

/// Number of squared singular values below t (Sylvester inertia of A - t M).
int count_below(const NeckPencil& p, double t);

struct SmallEigs {
  std::vector<double> values;  // |sigma| in the window, ascending
  int count = 0;
  double window = 0;
  int levels = 0;  // grid doublings used
  int elements = 0;
  double rel_change = 0;
};

/// Small singular values of the neck operator, refined by grid doubling until
/// they change by less than conv_tol relative. Throws CertificateError on
/// non-convergence.
SmallEigs glued_small_eigs(const NeckModel& m);

/// Dense generalized eigensolve of the same pencil (oracle for small grids).
std::vector<double> dense_singular_values(const NeckModel& m, int elements);

/// Values (theta_left - theta_right + j pi) / (2 r) of the unperturbed kernel block.
std::vector<double> unperturbed_small_values(const NeckModel& m);

/// Least-squares slope of log y against log x.
double fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

// ---------------------------------------------------------------------------
// pre-gluing

struct PreGlueProfile {
  double delta = 1.0;
  double r = 10.0;
};

/// Cut-off: 1 on s <= -1, 0 on s >= 1, smooth, |rho'| <= 1.
double cutoff(double s);
double cutoff_derivative(double s);

struct PreGlueResult {
  std::vector<double> s, spliced, error;
  double sup_error = 0, l2_error = 0;
  double bound = 0;  // K exp(-delta (r - 2))
  bool certified = false;
};

/// Splices tail(s + r) by the cut-off over the window [-2, 2]; the splice error
/// is rho'(s) tail(s + r). tail_bound K is the constant in |tail(t)| <= K exp(-delta t).
PreGlueResult pre_glue(const PreGlueProfile& p, const std::function<double(double)>& tail,
                       double tail_bound, int samples = 4001);

// ---------------------------------------------------------------------------
// contraction

struct ContractionProblem {
  double lambda_gap = 0.1;
  double C_quad = 1.0;
  double sigma_norm = 0.0;
  double eps_ball = 0.04;
  int state_dim = 6;
};

class InadmissibleError : public PreconditionError {
 public:
  InadmissibleError(const std::string& inequality)
      : PreconditionError("inadmissible contraction problem: violates " + inequality), inequality(inequality) {}
  std::string inequality;
};

/// Name of the first violated hypothesis, if any.
std::optional<std::string> violated_inequality(const ContractionProblem& p);

using VecMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct ContractionCertificate {
  Eigen::VectorXd fixed_point;
  int iterations = 0;
  double residual = 0;          // |x - T(x)|
  double measured_factor = 0;   // max ratio of successive step lengths
  double factor_bound = 0;      // 2 C eps / lambda
  double fixed_point_norm = 0;
  bool in_ball = false;
  std::vector<double> step_norms;
};

/// Iterates T(x) = -H^{-1}(N(x) + Sigma) from 0.
ContractionCertificate contract_solve(const ContractionProblem& p, const VecMap& N_map,
                                      const Eigen::VectorXd& Sigma_vec, const VecMap& H_inv_map,
                                      double tol = 1e-13, int max_iter = 10000);

/// Generated instance: H symmetric with |eigenvalues| in [lambda, 3 lambda],
/// N(x) = C B(x, x) with a symmetric bilinear B of unit Frobenius norm, and
/// Sigma of norm sigma_norm.
struct ContractionInstance {
  ContractionProblem problem;
  Eigen::MatrixXd H;
  std::vector<Eigen::MatrixXd> B;  // B(x, y)_i = x^T B[i] y
  Eigen::VectorXd Sigma;

  Eigen::VectorXd N(const Eigen::VectorXd& x) const;
  Eigen::VectorXd H_inv(const Eigen::VectorXd& y) const;
};

ContractionInstance make_contraction_instance(std::uint64_t seed, const ContractionProblem& p);

ContractionCertificate contract_solve(const ContractionInstance& inst, double tol = 1e-13);

}  // namespace surgtri::glue
