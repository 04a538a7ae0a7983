#pragma once

// Geometry of the character-variety cylinder {(u, v) : v in [-1, 1)} with
// (u, -1) ~ (u, 1): surgery lines, the staircase perturbation curve
// v = f'(u), synthetic moduli curves and the triangle decomposition of the
// staircase intersections into L_Y1 and L_Y0(k) contributions.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "surgtri/common.hpp"

namespace surgtri::chi {

struct GeometryTolerances {
  double tol_pt = 1e-9;
  double tol_tan = 1e-6;  // radians
  double theta_margin = 0.05;
  double u_radius = 0.3;  // radius of the excluded balls U around line intersections
};

struct CharPoint {
  double u = 0.0;
  double v = 0.0;
};

/// Representative with v in [-1, 1); u unchanged.
CharPoint canonicalize(CharPoint p);

/// Euclidean distance on the cylinder (v taken mod 2).
double cylinder_distance(CharPoint a, CharPoint b);

bool same_point(CharPoint a, CharPoint b, double tol = 1e-9);

/// Distance from p to the lattice {(1 + 2j, 1 + 2l)} of singular points.
double theta_distance(CharPoint p);

enum class LineLabel { L_Y, L_Y1, L_Y0, chiV, custom };

/// The line a u + b v = c, read on the cylinder (all lifts v + 2j).
struct SurgeryLine {
  double a = 0.0, b = 0.0, c = 0.0;
  LineLabel label = LineLabel::custom;
  int k = 0;  // spin^c index for L_Y0

  static SurgeryLine L_Y();
  static SurgeryLine L_Y1();
  /// u = 2k for k != 0, u = eta for k = 0.
  static SurgeryLine L_Y0(int k, double eta);
  static SurgeryLine chiV();
  static SurgeryLine custom(double a, double b, double c);

  std::string name() const;
};

/// The staircase v = f'(u) = u + 1 + sum_k 2 sigma((u - c_k) / width),
/// c_0 = eta, c_k = 2k, with a logistic step sharp enough that outside
/// |u - c_k| >= width / 2 every step is within eps / 4 of 0 or 1.
class PerturbationCurve {
 public:
  PerturbationCurve(double eta, double eps, double width, int K, double theta_margin);

  double eta() const { return eta_; }
  double eps() const { return eps_; }
  double width() const { return width_; }
  int K() const { return K_; }
  double theta_margin() const { return theta_margin_; }
  /// Logistic scale in units of width.
  double step_scale() const { return tau_; }

  double center(int k) const { return k == 0 ? eta_ : 2.0 * k; }
  /// f'(u) (lifted, not reduced mod 2).
  double value(double u) const;
  /// f''(u) >= 1.
  double slope(double u) const;
  double max_slope() const;
  /// Index k with |u - c_k| <= width, if any.
  std::optional<int> climb_of(double u) const;
  /// u-range over which the curve is examined: all climbs plus one period of margin.
  double u_lo() const { return -2.0 * K_ - 3.0; }
  double u_hi() const { return 2.0 * K_ + 3.0; }

  /// Minimum cylinder distance from the curve to the singular lattice (sampled + refined).
  double min_theta_distance() const;

 private:
  double sigma(double t) const;
  double dsigma(double t) const;

  double eta_, eps_, width_;
  int K_;
  double theta_margin_;
  double tau_;
};

/// Validates parameters and returns the staircase; InfeasibleError names the
/// violated constraint.
PerturbationCurve build_staircase(double eta, double eps, double width, int K,
                                  double theta_margin = 0.05);

/// Piecewise-linear curves on the cylinder. Consecutive samples are joined by
/// the shortest lift (|dv| <= 1).
struct ModuliCurve {
  std::vector<std::vector<CharPoint>> segments;
  std::vector<CharPoint> end_points;  // open-end limits on the reducible circle u = 0
};

struct Intersection {
  CharPoint p;         // canonical
  bool transverse = true;
  double angle = 0.0;  // crossing angle in [0, pi/2]
  int polyline = -1;   // position along the first argument when it is a ModuliCurve
  int piece = -1;
  double t = 0.0;
};

std::vector<Intersection> intersections(const ModuliCurve& m, const SurgeryLine& l,
                                        const GeometryTolerances& tol = {});
std::vector<Intersection> intersections(const ModuliCurve& m, const PerturbationCurve& pc,
                                        const GeometryTolerances& tol = {});
std::vector<Intersection> intersections(const PerturbationCurve& pc, const SurgeryLine& l,
                                        const GeometryTolerances& tol = {});
std::vector<Intersection> intersections(const PerturbationCurve& a, const PerturbationCurve& b,
                                        const GeometryTolerances& tol = {});

/// Label of a triangle piece: L_Y1 or L_Y0(k).
struct TriangleLabel {
  bool y1 = true;
  int k = 0;

  std::string name() const;
  auto operator<=>(const TriangleLabel&) const = default;
};

struct LabelCount {
  TriangleLabel label;
  int staircase_count = 0;  // staircase points assigned to this label
  int line_count = 0;       // intersections with the label's line
};

struct Assignment {
  CharPoint staircase_point;
  TriangleLabel label;
  CharPoint line_point;  // its partner under the bijection
};

struct TriangleDecomposition {
  std::vector<LabelCount> counts;  // L_Y1 first, then L_Y0(-K..K)
  std::vector<Assignment> assignments;
  int total = 0;
};

/// Raised when the staircase intersections do not match the line intersections.
class DecompositionError : public CertificateError {
 public:
  DecompositionError(const std::string& what, CharPoint p) : CertificateError(what), point(p) {}
  CharPoint point;
};

/// Centers of the excluded neighbourhoods U: pairwise intersections of L_Y,
/// L_Y1 and the L_Y0(k) within the staircase range.
std::vector<CharPoint> u_centers(const PerturbationCurve& pc);

/// Throws PreconditionError if m comes within theta_margin of the singular
/// lattice or within u_radius of a line intersection.
void check_moduli_preconditions(const ModuliCurve& m, const PerturbationCurve& pc,
                                const GeometryTolerances& tol = {});

TriangleDecomposition decompose_triangle(const ModuliCurve& m, const PerturbationCurve& pc,
                                         const GeometryTolerances& tol = {});

struct SpincClass {
  int k = 0;
};

/// Spin^c index of a point lying on a climb of the staircase.
SpincClass spinc_of(CharPoint p, const PerturbationCurve& pc);

struct ModuliGenOptions {
  int min_vertices = 2;
  int max_vertices = 4;
  double u_extent = 5.5;
  double min_crossing_angle = 0.15;  // radians, against every label line
  double line_clearance = 0.05;      // vertices keep this distance from label lines
  int max_attempts = 10000;
};

/// Seeded synthetic moduli curve meeting the decomposition preconditions
/// with margin (transverse crossings, away from U and the singular lattice).
ModuliCurve random_moduli_curve(std::uint64_t seed, const PerturbationCurve& pc,
                                const GeometryTolerances& tol = {},
                                const ModuliGenOptions& opt = {});

/// Largest eps on the ladder eps_max * 2^-j (j = 0..levels-1) below which
/// every rung decomposes; nullopt if even the smallest rung fails.
std::optional<double> eps_threshold(const ModuliCurve& m, double eta, double width, int K,
                                    double eps_max = 0.2, int levels = 20,
                                    const GeometryTolerances& tol = {});

}  // namespace surgtri::chi
