#include "surgtri/chi_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

namespace surgtri::chi {

namespace {

double reduce_period2(double x) { return x - 2.0 * std::floor((x + 1.0) / 2.0); }

double crossing_angle(double du1, double dv1, double du2, double dv2) {
  const double cross = du1 * dv2 - dv1 * du2;
  const double dot = du1 * du2 + dv1 * dv2;
  return std::atan2(std::abs(cross), std::abs(dot));
}

struct LiftedSegment {
  double u0, v0, du, dv;
};

std::vector<LiftedSegment> lift(const std::vector<CharPoint>& poly) {
  std::vector<LiftedSegment> out;
  for (std::size_t i = 0; i + 1 < poly.size(); ++i) {
    const double du = poly[i + 1].u - poly[i].u;
    const double dv = reduce_period2(poly[i + 1].v - poly[i].v);
    out.push_back({poly[i].u, poly[i].v, du, dv});
  }
  return out;
}

double point_segment_distance(double pu, double pv, const LiftedSegment& s) {
  const double len2 = s.du * s.du + s.dv * s.dv;
  double t = len2 > 0 ? ((pu - s.u0) * s.du + (pv - s.v0) * s.dv) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(s.u0 + t * s.du - pu, s.v0 + t * s.dv - pv);
}

/// Distance on the cylinder from q to a lifted segment (q taken over all v-lifts).
double cylinder_segment_distance(CharPoint q, const LiftedSegment& s) {
  const double vmin = std::min(s.v0, s.v0 + s.dv), vmax = std::max(s.v0, s.v0 + s.dv);
  const int j0 = int(std::floor((vmin - q.v) / 2.0)) - 1;
  const int j1 = int(std::ceil((vmax - q.v) / 2.0)) + 1;
  double best = INFINITY;
  for (int j = j0; j <= j1; ++j) best = std::min(best, point_segment_distance(q.u, q.v + 2.0 * j, s));
  return best;
}

double bisect_root(const std::function<double(double)>& g, double a, double b) {
  double ga = g(a);
  for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
    const double m = 0.5 * (a + b);
    const double gm = g(m);
    if ((gm < 0) == (ga < 0)) {
      a = m;
      ga = gm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

/// Parameters t in (t0, t1] (or [t0, t1] when include_start) at which h(t)
/// passes a level period * j. dh is used to split at extrema so that each
/// piece is monotone.
std::vector<double> level_crossings(const std::function<double(double)>& h,
                                    const std::function<double(double)>& dh, double t0,
                                    double t1, int n, double period, bool include_start) {
  std::vector<double> out;
  std::vector<double> knots;
  for (int i = 0; i <= n; ++i) knots.push_back(t0 + (t1 - t0) * double(i) / n);
  std::vector<double> pieces{knots.front()};
  for (int i = 0; i < n; ++i) {
    const double a = knots[std::size_t(i)], b = knots[std::size_t(i) + 1];
    const double da = dh(a), db = dh(b);
    if ((da < 0 && db > 0) || (da > 0 && db < 0)) pieces.push_back(bisect_root(dh, a, b));
    pieces.push_back(b);
  }
  for (std::size_t i = 0; i + 1 < pieces.size(); ++i) {
    const double a = pieces[i], b = pieces[i + 1];
    if (!(b > a)) continue;
    const double ha = h(a), hb = h(b);
    const bool closed_left = include_start && i == 0;
    const double lo = std::min(ha, hb), hi = std::max(ha, hb);
    const long j0 = long(std::floor(lo / period)) - 1, j1 = long(std::ceil(hi / period)) + 1;
    for (long j = j0; j <= j1; ++j) {
      const double L = period * double(j);
      bool hit;
      if (hb > ha) hit = (closed_left ? ha <= L : ha < L) && L <= hb;
      else if (hb < ha) hit = hb <= L && (closed_left ? L <= ha : L < ha);
      else hit = false;
      if (!hit) continue;
      if (hb == L) {
        out.push_back(b);
      } else if (ha == L) {
        out.push_back(a);
      } else {
        out.push_back(bisect_root([&](double t) { return h(t) - L; }, a, b));
      }
    }
  }
  return out;
}

void sort_uv(std::vector<Intersection>& pts) {
  std::sort(pts.begin(), pts.end(), [](const Intersection& x, const Intersection& y) {
    if (x.p.u != y.p.u) return x.p.u < y.p.u;
    return x.p.v < y.p.v;
  });
}

}  // namespace

CharPoint canonicalize(CharPoint p) {
  double v = reduce_period2(p.v);
  if (v >= 1.0) v -= 2.0;
  if (v < -1.0) v += 2.0;
  return {p.u, v};
}

double cylinder_distance(CharPoint a, CharPoint b) {
  return std::hypot(a.u - b.u, reduce_period2(a.v - b.v));
}

bool same_point(CharPoint a, CharPoint b, double tol) { return cylinder_distance(a, b) <= tol; }

double theta_distance(CharPoint p) {
  const double du = p.u - (1.0 + 2.0 * std::round((p.u - 1.0) / 2.0));
  return std::hypot(du, reduce_period2(p.v - 1.0));
}

SurgeryLine SurgeryLine::L_Y() { return {0.0, 1.0, 0.0, LineLabel::L_Y, 0}; }
SurgeryLine SurgeryLine::L_Y1() { return {-1.0, 1.0, 1.0, LineLabel::L_Y1, 0}; }
SurgeryLine SurgeryLine::L_Y0(int k, double eta) {
  return {1.0, 0.0, k == 0 ? eta : 2.0 * k, LineLabel::L_Y0, k};
}
SurgeryLine SurgeryLine::chiV() { return {1.0, 0.0, 0.0, LineLabel::chiV, 0}; }
SurgeryLine SurgeryLine::custom(double a, double b, double c) {
  if (a == 0.0 && b == 0.0) throw PreconditionError("surgery line needs (a, b) != (0, 0)");
  return {a, b, c, LineLabel::custom, 0};
}

std::string SurgeryLine::name() const {
  switch (label) {
    case LineLabel::L_Y: return "L_Y";
    case LineLabel::L_Y1: return "L_Y1";
    case LineLabel::L_Y0: return "L_Y0(" + std::to_string(k) + ")";
    case LineLabel::chiV: return "chiV";
    default: {
      std::ostringstream os;
      os << "custom(" << a << "," << b << "," << c << ")";
      return os.str();
    }
  }
}

PerturbationCurve::PerturbationCurve(double eta, double eps, double width, int K,
                                     double theta_margin)
    : eta_(eta), eps_(eps), width_(width), K_(K), theta_margin_(theta_margin),
      tau_(1.0 / (2.0 * std::log(4.0 / eps - 1.0))) {}

double PerturbationCurve::sigma(double t) const {
  const double x = t / tau_;
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double PerturbationCurve::dsigma(double t) const {
  const double s = sigma(t);
  return s * (1.0 - s) / tau_;
}

double PerturbationCurve::value(double u) const {
  double v = u + 1.0;
  for (int k = -K_; k <= K_; ++k) v += 2.0 * sigma((u - center(k)) / width_);
  return v;
}

double PerturbationCurve::slope(double u) const {
  double d = 1.0;
  for (int k = -K_; k <= K_; ++k) d += 2.0 * dsigma((u - center(k)) / width_) / width_;
  return d;
}

double PerturbationCurve::max_slope() const { return 1.0 + 1.0 / (2.0 * tau_ * width_) * 1.001 + 1e-6; }

std::optional<int> PerturbationCurve::climb_of(double u) const {
  for (int k = -K_; k <= K_; ++k)
    if (std::abs(u - center(k)) <= width_) return k;
  return std::nullopt;
}

double PerturbationCurve::min_theta_distance() const {
  double best = INFINITY;
  double u = u_lo();
  while (u <= u_hi()) {
    best = std::min(best, theta_distance({u, value(u)}));
    const double s = slope(u);
    u += 0.005 / std::sqrt(1.0 + s * s);
  }
  return best;
}

PerturbationCurve build_staircase(double eta, double eps, double width, int K, double theta_margin) {
  if (!(eta > 0)) throw InfeasibleError("eta must be positive");
  if (!(eps > 0 && eps < 1)) throw InfeasibleError("eps must lie in (0, 1)");
  if (!(width > 0)) throw InfeasibleError("width must be positive");
  if (K < 0) throw InfeasibleError("k_range must be non-negative");
  if (!(theta_margin >= 0)) throw InfeasibleError("theta_margin must be non-negative");
  PerturbationCurve pc(eta, eps, width, K, theta_margin);
  std::vector<double> centers;
  for (int k = -K; k <= K; ++k) centers.push_back(pc.center(k));
  std::sort(centers.begin(), centers.end());
  for (std::size_t i = 0; i + 1 < centers.size(); ++i)
    if (centers[i + 1] - centers[i] <= 2.0 * width)
      throw InfeasibleError("overlapping climbs: width-neighbourhoods of climb centers intersect");
  for (double c : centers) {
    const double odd = 1.0 + 2.0 * std::round((c - 1.0) / 2.0);
    if (std::abs(c - odd) - width < theta_margin)
      throw InfeasibleError("theta margin violated: a climb passes too close to the singular lattice");
  }
  if (pc.min_theta_distance() < theta_margin)
    throw InfeasibleError("theta margin violated: curve passes too close to the singular lattice");
  return pc;
}

// ---------------------------------------------------------------------------
// intersections

std::vector<Intersection> intersections(const ModuliCurve& m, const SurgeryLine& l,
                                        const GeometryTolerances& tol) {
  std::vector<Intersection> out;
  for (std::size_t pi = 0; pi < m.segments.size(); ++pi) {
    const auto segs = lift(m.segments[pi]);
    for (std::size_t si = 0; si < segs.size(); ++si) {
      const auto& s = segs[si];
      const double g0 = l.a * s.u0 + l.b * s.v0 - l.c;
      const double g1 = g0 + l.a * s.du + l.b * s.dv;
      const bool first = si == 0;
      const double angle = crossing_angle(s.du, s.dv, -l.b, l.a);
      auto emit = [&](double t) {
        Intersection x;
        x.p = canonicalize({s.u0 + t * s.du, s.v0 + t * s.dv});
        x.angle = angle;
        x.transverse = angle >= tol.tol_tan;
        x.polyline = int(pi);
        x.piece = int(si);
        x.t = t;
        out.push_back(x);
      };
      if (g1 == g0) {
        // parallel: report an overlap as a single tangential contact
        const double period = std::abs(2.0 * l.b);
        const bool on = period > 0 ? std::abs(reduce_period2(g0 / period * 2.0)) < 1e-12 : g0 == 0.0;
        if (on) {
          emit(first ? 0.0 : 1.0);
          out.back().transverse = false;
          out.back().angle = 0.0;
        }
        continue;
      }
      auto h = [&](double t) { return g0 + t * (g1 - g0); };
      auto dh = [&](double) { return g1 - g0; };
      const double period = l.b != 0.0 ? std::abs(2.0 * l.b) : 0.0;
      if (period == 0.0) {
        const double t = -g0 / (g1 - g0);
        if ((first ? t >= 0.0 : t > 0.0) && t <= 1.0) emit(t);
        continue;
      }
      for (double t : level_crossings(h, dh, 0.0, 1.0, 1, period, first)) emit(t);
    }
  }
  sort_uv(out);
  return out;
}

std::vector<Intersection> intersections(const ModuliCurve& m, const PerturbationCurve& pc,
                                        const GeometryTolerances& tol) {
  std::vector<Intersection> out;
  const double ms = pc.max_slope();
  for (std::size_t pi = 0; pi < m.segments.size(); ++pi) {
    const auto segs = lift(m.segments[pi]);
    for (std::size_t si = 0; si < segs.size(); ++si) {
      const auto& s = segs[si];
      auto h = [&](double t) { return s.v0 + t * s.dv - pc.value(s.u0 + t * s.du); };
      auto dh = [&](double t) { return s.dv - pc.slope(s.u0 + t * s.du) * s.du; };
      const double variation = std::abs(s.dv) + std::abs(s.du) * ms;
      const int n = std::max(4, int(std::ceil(variation / 0.02)));
      for (double t : level_crossings(h, dh, 0.0, 1.0, n, 2.0, si == 0)) {
        const double u = s.u0 + t * s.du;
        Intersection x;
        x.p = canonicalize({u, s.v0 + t * s.dv});
        x.angle = crossing_angle(s.du, s.dv, 1.0, pc.slope(u));
        x.transverse = x.angle >= tol.tol_tan;
        x.polyline = int(pi);
        x.piece = int(si);
        x.t = t;
        out.push_back(x);
      }
    }
  }
  sort_uv(out);
  return out;
}

std::vector<Intersection> intersections(const PerturbationCurve& pc, const SurgeryLine& l,
                                        const GeometryTolerances& tol) {
  std::vector<Intersection> out;
  const double lo = pc.u_lo(), hi = pc.u_hi();
  if (l.b == 0.0) {
    const double u = l.c / l.a;
    if (u >= lo && u <= hi) {
      Intersection x;
      x.p = canonicalize({u, pc.value(u)});
      x.angle = crossing_angle(1.0, pc.slope(u), 0.0, 1.0);
      x.transverse = x.angle >= tol.tol_tan;
      x.t = u;
      out.push_back(x);
    }
    return out;
  }
  auto h = [&](double u) { return pc.value(u) - (l.c - l.a * u) / l.b; };
  auto dh = [&](double u) { return pc.slope(u) + l.a / l.b; };
  const double variation = (hi - lo) * (pc.max_slope() + std::abs(l.a / l.b));
  const int n = std::max(16, int(std::ceil(variation / 0.02)));
  for (double u : level_crossings(h, dh, lo, hi, n, 2.0, true)) {
    Intersection x;
    x.p = canonicalize({u, pc.value(u)});
    x.angle = crossing_angle(1.0, pc.slope(u), -l.b, l.a);
    x.transverse = x.angle >= tol.tol_tan;
    x.t = u;
    out.push_back(x);
  }
  sort_uv(out);
  return out;
}

std::vector<Intersection> intersections(const PerturbationCurve& a, const PerturbationCurve& b,
                                        const GeometryTolerances& tol) {
  std::vector<Intersection> out;
  const double lo = std::min(a.u_lo(), b.u_lo()), hi = std::max(a.u_hi(), b.u_hi());
  auto h = [&](double u) { return a.value(u) - b.value(u); };
  auto dh = [&](double u) { return a.slope(u) - b.slope(u); };
  const double variation = (hi - lo) * (a.max_slope() + b.max_slope());
  const int n = std::max(16, int(std::ceil(variation / 0.02)));
  for (double u : level_crossings(h, dh, lo, hi, n, 2.0, true)) {
    Intersection x;
    x.p = canonicalize({u, a.value(u)});
    x.angle = crossing_angle(1.0, a.slope(u), 1.0, b.slope(u));
    x.transverse = x.angle >= tol.tol_tan;
    x.t = u;
    out.push_back(x);
  }
  sort_uv(out);
  return out;
}

// ---------------------------------------------------------------------------
// triangle decomposition

std::string TriangleLabel::name() const { return y1 ? "L_Y1" : "L_Y0(" + std::to_string(k) + ")"; }

std::vector<CharPoint> u_centers(const PerturbationCurve& pc) {
  std::vector<CharPoint> out;
  for (int j = int(std::floor(pc.u_lo())); j <= int(std::ceil(pc.u_hi())); ++j)
    if (j % 2 != 0) out.push_back({double(j), 0.0});  // L_Y meets L_Y1 at odd u
  for (int k = -pc.K(); k <= pc.K(); ++k) {
    const double c = pc.center(k);
    out.push_back({c, 0.0});                         // L_Y with L_Y0(k)
    out.push_back(canonicalize({c, c + 1.0}));       // L_Y1 with L_Y0(k)
  }
  return out;
}

void check_moduli_preconditions(const ModuliCurve& m, const PerturbationCurve& pc,
                                const GeometryTolerances& tol) {
  const auto centers = u_centers(pc);
  for (const auto& poly : m.segments) {
    for (const auto& s : lift(poly)) {
      const double umin = std::min(s.u0, s.u0 + s.du) - 1.0, umax = std::max(s.u0, s.u0 + s.du) + 1.0;
      for (int j = int(std::floor(umin)); j <= int(std::ceil(umax)); ++j) {
        if (j % 2 == 0) continue;
        if (cylinder_segment_distance({double(j), 1.0}, s) < tol.theta_margin)
          throw PreconditionError("moduli curve violates the theta margin near (" + std::to_string(j) + ", 1)");
      }
      for (const auto& c : centers)
        if (cylinder_segment_distance(c, s) < tol.u_radius)
          throw PreconditionError("moduli curve enters the neighbourhood U of a line intersection");
    }
  }
}

TriangleDecomposition decompose_triangle(const ModuliCurve& m, const PerturbationCurve& pc,
                                         const GeometryTolerances& tol) {
  check_moduli_preconditions(m, pc, tol);

  struct Tagged {
    Intersection x;
    TriangleLabel label;
  };
  auto param_less = [](const Intersection& a, const Intersection& b) {
    if (a.polyline != b.polyline) return a.polyline < b.polyline;
    if (a.piece != b.piece) return a.piece < b.piece;
    return a.t < b.t;
  };

  std::vector<Tagged> stair;
  for (const auto& x : intersections(m, pc, tol)) {
    if (!x.transverse) throw DecompositionError("tangential intersection with the staircase", x.p);
    const auto k = pc.climb_of(x.p.u);
    stair.push_back({x, k ? TriangleLabel{false, *k} : TriangleLabel{true, 0}});
  }

  TriangleDecomposition dec;
  std::vector<TriangleLabel> labels{{true, 0}};
  for (int k = -pc.K(); k <= pc.K(); ++k) labels.push_back({false, k});

  for (const auto& lab : labels) {
    const SurgeryLine line = lab.y1 ? SurgeryLine::L_Y1() : SurgeryLine::L_Y0(lab.k, pc.eta());
    auto on_line = intersections(m, line, tol);
    for (const auto& x : on_line)
      if (!x.transverse) throw DecompositionError("tangential intersection with " + line.name(), x.p);
    std::vector<Intersection> mine;
    for (const auto& t : stair)
      if (t.label == lab) mine.push_back(t.x);
    std::sort(mine.begin(), mine.end(), param_less);
    std::sort(on_line.begin(), on_line.end(), param_less);
    const std::size_t n = std::min(mine.size(), on_line.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (cylinder_distance(mine[i].p, on_line[i].p) > 0.5)
        throw DecompositionError("staircase point has no partner on " + line.name(), mine[i].p);
      dec.assignments.push_back({mine[i].p, lab, on_line[i].p});
    }
    if (mine.size() > n) throw DecompositionError("unmatched staircase point for " + line.name(), mine[n].p);
    if (on_line.size() > n) throw DecompositionError("unmatched point of " + line.name(), on_line[n].p);
    dec.counts.push_back({lab, int(mine.size()), int(on_line.size())});
    dec.total += int(mine.size());
  }
  if (std::size_t(dec.total) != stair.size())
    throw DecompositionError("partition does not cover the staircase intersections",
                             stair.empty() ? CharPoint{} : stair.front().x.p);
  return dec;
}

SpincClass spinc_of(CharPoint p, const PerturbationCurve& pc) {
  const auto k = pc.climb_of(p.u);
  if (!k) throw PreconditionError("not-a-Y0-point: point lies on a slope-1 stretch of the staircase");
  return {*k};
}

// ---------------------------------------------------------------------------
// synthetic moduli curves

namespace {

bool clears_lines(CharPoint p, const PerturbationCurve& pc, double clearance) {
  if (std::abs(reduce_period2(p.v - p.u - 1.0)) / std::sqrt(2.0) < clearance) return false;
  for (int k = -pc.K(); k <= pc.K(); ++k)
    if (std::abs(p.u - pc.center(k)) < clearance) return false;
  return true;
}

}  // namespace

ModuliCurve random_moduli_curve(std::uint64_t seed, const PerturbationCurve& pc,
                                const GeometryTolerances& tol, const ModuliGenOptions& opt) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int attempt = 0; attempt < opt.max_attempts; ++attempt) {
    const int nv = opt.min_vertices + int(unit(rng) * (opt.max_vertices - opt.min_vertices + 1));
    std::vector<CharPoint> poly;
    CharPoint p{-opt.u_extent + 2.0 * opt.u_extent * unit(rng), -1.0 + 2.0 * unit(rng)};
    poly.push_back(p);
    bool ok = true;
    for (int i = 1; i < nv && ok; ++i) {
      const double len = 0.8 + 2.2 * unit(rng);
      const double ang = 2.0 * kPi * unit(rng);
      double du = len * std::cos(ang), dv = len * std::sin(ang);
      if (std::abs(dv) > 0.95) dv = std::copysign(0.95, dv);
      CharPoint q{p.u + du, p.v + dv};
      if (std::abs(q.u) > opt.u_extent) ok = false;
      p = canonicalize(q);
      poly.push_back(p);
    }
    if (!ok) continue;
    if (!std::all_of(poly.begin(), poly.end(), [&](CharPoint x) { return clears_lines(x, pc, opt.line_clearance); }))
      continue;
    ModuliCurve m;
    m.segments.push_back(poly);
    try {
      check_moduli_preconditions(m, pc, tol);
    } catch (const PreconditionError&) {
      continue;
    }
    int crossings = 0;
    bool robust = true;
    std::vector<SurgeryLine> lines{SurgeryLine::L_Y1()};
    for (int k = -pc.K(); k <= pc.K(); ++k) lines.push_back(SurgeryLine::L_Y0(k, pc.eta()));
    for (const auto& l : lines) {
      for (const auto& x : intersections(m, l, tol)) {
        ++crossings;
        if (x.angle < opt.min_crossing_angle) robust = false;
      }
    }
    for (const auto& x : intersections(m, pc, tol))
      if (x.angle < 0.5 * opt.min_crossing_angle) robust = false;
    if (robust && crossings > 0) return m;
  }
  throw InfeasibleError("could not generate a moduli curve meeting the preconditions");
}

std::optional<double> eps_threshold(const ModuliCurve& m, double eta, double width, int K,
                                    double eps_max, int levels, const GeometryTolerances& tol) {
  std::optional<double> best;
  for (int j = levels - 1; j >= 0; --j) {
    const double eps = eps_max * std::ldexp(1.0, -j);
    try {
      const auto pc = build_staircase(eta, eps, width, K, tol.theta_margin);
      decompose_triangle(m, pc, tol);
      best = eps;
    } catch (const std::runtime_error&) {
      break;
    }
  }
  return best;
}

}  // namespace surgtri::chi
