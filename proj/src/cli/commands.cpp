#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <random>
#include <thread>

#include "surgtri/center_manifold.hpp"
#include "surgtri/chi_geometry.hpp"
#include "surgtri/cli.hpp"
#include "surgtri/gluing_model.hpp"
#include "surgtri/grading.hpp"
#include "surgtri/metric_path.hpp"
#include "surgtri/torus_flow.hpp"

namespace surgtri::cli {

namespace {

namespace fs = std::filesystem;

/// Runs fn(i) for i in [0, n) on at most `threads` workers. Exceptions are
/// stored per index; results are whatever fn writes into caller-owned slots.
std::vector<std::exception_ptr> parallel_for(std::size_t n, int threads,
                                             const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t w = std::min<std::size_t>(std::size_t(std::max(threads, 1)), n);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < w; ++t) pool.emplace_back(worker);
  if (n > 0) worker();
  for (auto& t : pool) t.join();
  return errors;
}

std::string what_of(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const std::exception& ex) {
    return ex.what();
  } catch (...) {
    return "unknown error";
  }
}

std::string svg_num(double x, const char* fmt = "%.3f") {
  char buf[32];
  std::snprintf(buf, sizeof buf, fmt, x);
  return buf;
}

class Ctx {
 public:
  Ctx(const RunConfig& cfg, RunResult& res) : cfg(cfg), res_(res) {}

  const RunConfig& cfg;

  void write(const std::string& name, const std::string& content) {
    std::ofstream f(cfg.output_dir / name, std::ios::binary);
    if (!f) throw ConfigError("out", "cannot write " + (cfg.output_dir / name).string());
    f << content;
    res_.outputs.push_back(name);
  }
  void write(const std::string& name, const CsvWriter& csv) { write(name, csv.str()); }

  void check(const std::string& name, double value, const std::string& rel, double threshold,
             const std::string& note = "") {
    bool pass = false;
    if (rel == "<") pass = value < threshold;
    else if (rel == "<=") pass = value <= threshold;
    else if (rel == "==") pass = value == threshold;
    else if (rel == ">=") pass = value >= threshold;
    res_.certificates.push_back({name, value, threshold, rel, pass, note});
  }
  /// value in [lo, hi]; the stored threshold is hi, the note records lo.
  void check_range(const std::string& name, double value, double lo, double hi) {
    const bool pass = value >= lo && value <= hi;
    res_.certificates.push_back({name, value, hi, "in", pass, "[" + svg_num(lo, "%.6g") + ", " + svg_num(hi, "%.6g") + "]"});
  }

 private:
  RunResult& res_;
};

double max_of(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::isnan(x) ? INFINITY : x);
  return m;
}

// ---------------------------------------------------------------------------
// triangle


double wrap_v(double v) { return chi::canonicalize({0.0, v}).v; }

std::string triangle_svg(const chi::PerturbationCurve& pc, const chi::ModuliCurve& m,
                         const chi::TriangleDecomposition* dec) {
  const double u0 = pc.u_lo(), u1 = pc.u_hi();
  const double sx = 50, sy = 120, pad = 30;
  const double W = (u1 - u0) * sx + 2 * pad, H = 2 * sy + 2 * pad + 10;
  auto X = [&](double u) { return svg_num(pad + (u - u0) * sx); };
  auto Y = [&](double v) { return svg_num(pad + (1 - v) * sy); };

  // polyline through (u, v mod 2), broken where v wraps
  auto wrapped = [&](const std::vector<chi::CharPoint>& pts, const std::string& style) {
    std::string out, cur;
    int n = 0;
    double prev = 0;
    auto flush = [&] {
      if (n > 1) out += "<polyline " + style + " points=\"" + cur + "\"/>\n";
      cur.clear();
      n = 0;
    };
    for (const auto& p : pts) {
      const double v = wrap_v(p.v);
      if (n > 0 && std::abs(v - prev) > 1) flush();
      cur += (n ? " " : "") + X(p.u) + "," + Y(v);
      prev = v;
      ++n;
    }
    flush();
    return out;
  };

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + svg_num(W) + "\" height=\"" +
       svg_num(H) + "\" viewBox=\"0 0 " + svg_num(W) + " " + svg_num(H) + "\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + svg_num(W) + "\" height=\"" + svg_num(H) + "\" fill=\"white\"/>\n";
  s += "<rect x=\"" + X(u0) + "\" y=\"" + Y(1) + "\" width=\"" + svg_num((u1 - u0) * sx) + "\" height=\"" +
       svg_num(2 * sy) + "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";
  // singular lattice
  for (int j = int(std::floor(u0)); j <= int(std::ceil(u1)); ++j)
    if ((j % 2 + 2) % 2 == 1)
      for (double v : {-1.0, 1.0})
        s += "<circle cx=\"" + X(j) + "\" cy=\"" + Y(v) + "\" r=\"3\" fill=\"black\"/>\n";
  // L_Y: v = 0
  s += "<line x1=\"" + X(u0) + "\" y1=\"" + Y(0) + "\" x2=\"" + X(u1) + "\" y2=\"" + Y(0) +
       "\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>\n";
  // L_Y0(k): u = c_k
  for (int k = -pc.K(); k <= pc.K(); ++k)
    s += "<line x1=\"" + X(pc.center(k)) + "\" y1=\"" + Y(-1) + "\" x2=\"" + X(pc.center(k)) + "\" y2=\"" + Y(1) +
         "\" stroke=\"#d62728\" stroke-width=\"1.5\" stroke-dasharray=\"4,3\"/>\n";
  // staircase
  std::vector<chi::CharPoint> st;
  for (int i = 0; i <= 6000; ++i) {
    const double u = u0 + (u1 - u0) * i / 6000.0;
    st.push_back({u, pc.value(u)});
  }
  s += wrapped(st, "fill=\"none\" stroke=\"#9467bd\" stroke-width=\"3\" stroke-opacity=\"0.5\"");
  // L_Y1: v - u = 1
  std::vector<chi::CharPoint> ly1;
  for (int i = 0; i <= 2000; ++i) {
    const double u = u0 + (u1 - u0) * i / 2000.0;
    ly1.push_back({u, u + 1});
  }
  s += wrapped(ly1, "fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"");
  // moduli curve, each piece along its shortest lift
  for (const auto& seg : m.segments) {
    std::vector<chi::CharPoint> pts;
    for (std::size_t i = 0; i + 1 < seg.size(); ++i) {
      const double du = seg[i + 1].u - seg[i].u;
      double dv = wrap_v(seg[i + 1].v - seg[i].v);
      for (int j = 0; j < 50; ++j) pts.push_back({seg[i].u + du * j / 50.0, seg[i].v + dv * j / 50.0});
    }
    if (!seg.empty()) pts.push_back(seg.back());
    s += wrapped(pts, "fill=\"none\" stroke=\"#ff7f0e\" stroke-width=\"2\"");
  }
  if (dec)
    for (const auto& a : dec->assignments) {
      const std::string color = a.label.y1 ? "#2ca02c" : "#d62728";
      s += "<circle cx=\"" + X(a.staircase_point.u) + "\" cy=\"" + Y(wrap_v(a.staircase_point.v)) +
           "\" r=\"4\" fill=\"" + color + "\"/>\n";
      s += "<circle cx=\"" + X(a.line_point.u) + "\" cy=\"" + Y(wrap_v(a.line_point.v)) + "\" r=\"6\" fill=\"none\" stroke=\"" +
           color + "\" stroke-width=\"1.5\"/>\n";
    }
  const char* legend[][2] = {{"#1f77b4", "L_Y: v = 0"},     {"#2ca02c", "L_Y1: v - u = 1"},
                             {"#d62728", "L_Y0(k): u = c_k"}, {"#9467bd", "staircase v = f'(u)"},
                             {"#ff7f0e", "moduli curve"}};
  for (int i = 0; i < 5; ++i)
    s += "<text x=\"" + svg_num(pad + 170.0 * i) + "\" y=\"" + svg_num(H - 8) + "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" +
         legend[i][0] + "\">" + legend[i][1] + "</text>\n";
  s += "</svg>\n";
  return s;
}

void run_triangle(Ctx& c) {
  const auto& cfg = c.cfg;
  const double eta = cfg.real("eta"), eps = cfg.real("eps"), width = cfg.real("width");
  const int K = int(cfg.integer("K"));
  const int n = int(cfg.integer("curves"));
  if (n < 0) throw ConfigError("triangle.curves", "must be non-negative");
  const auto pc = chi::build_staircase(eta, eps, width, K);

  struct Item {
    std::uint64_t seed = 0;
    chi::ModuliCurve m;
    std::optional<chi::TriangleDecomposition> dec;
    std::string error;
    int pc_count = 0, line_total = 0;
    std::optional<double> threshold;
  };
  std::vector<Item> items(static_cast<std::size_t>(n));
  const auto errs = parallel_for(items.size(), cfg.threads, [&](std::size_t i) {
    Item& it = items[i];
    it.seed = derive_seed(cfg.seed, 1, i);
    it.m = chi::random_moduli_curve(it.seed, pc);
    // independent brute-force count of both sides
    it.pc_count = int(chi::intersections(it.m, pc).size());
    it.line_total = int(chi::intersections(it.m, chi::SurgeryLine::L_Y1()).size());
    for (int k = -K; k <= K; ++k)
      it.line_total += int(chi::intersections(it.m, chi::SurgeryLine::L_Y0(k, eta)).size());
    try {
      it.dec = chi::decompose_triangle(it.m, pc);
    } catch (const CertificateError& e) {
      it.error = e.what();
    }
    it.threshold = chi::eps_threshold(it.m, eta, width, K, cfg.real("eps_max"), int(cfg.integer("eps_levels")));
  });

  CsvWriter counts({"curve_id", "label", "staircase_count", "line_count", "match"});
  CsvWriter summary({"curve_id", "seed", "pc_intersections", "line_intersections", "count_equal", "decomposed",
                     "eps_threshold", "eps_below_threshold", "error"});
  CsvWriter assign({"curve_id", "label", "staircase_u", "staircase_v", "line_u", "line_v"});
  int count_fail = 0, bij_fail = 0, thr_fail = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    Item& it = items[i];
    if (errs[i]) {
      it.error = what_of(errs[i]);
      it.dec.reset();
    }
    bool bij = it.dec.has_value();
    if (it.dec) {
      for (const auto& lc : it.dec->counts) {
        counts.row() << int(i) << lc.label.name() << lc.staircase_count << lc.line_count
                     << (lc.staircase_count == lc.line_count);
        bij = bij && lc.staircase_count == lc.line_count;
      }
      for (const auto& a : it.dec->assignments)
        assign.row() << int(i) << a.label.name() << a.staircase_point.u << a.staircase_point.v << a.line_point.u
                     << a.line_point.v;
    }
    const bool eq = !errs[i] && it.pc_count == it.line_total;
    const bool below = it.threshold.has_value() && eps <= *it.threshold;
    count_fail += !eq;
    bij_fail += !bij;
    thr_fail += !below;
    summary.row() << int(i) << std::to_string(it.seed) << it.pc_count << it.line_total << eq << it.dec.has_value()
                  << (it.threshold ? *it.threshold : std::nan("")) << below << it.error;
  }
  c.write("triangle_counts.csv", counts);
  c.write("triangle_summary.csv", summary);
  c.write("triangle_assignments.csv", assign);

  const int shown = int(cfg.integer("svg_curve"));
  if (n > 0 && (shown < 0 || shown >= n)) throw ConfigError("triangle.svg_curve", "must index one of the curves");
  c.write("triangle.svg", triangle_svg(pc, n > 0 ? items[std::size_t(shown)].m : chi::ModuliCurve{},
                                       n > 0 && items[std::size_t(shown)].dec ? &*items[std::size_t(shown)].dec : nullptr));

  c.check("triangle.count_equality_failures", count_fail, "==", 0);
  c.check("triangle.bijection_failures", bij_fail, "==", 0);
  c.check("triangle.eps_threshold_failures", thr_fail, "==", 0, "eps must lie below the computed threshold");
}

// ---------------------------------------------------------------------------
// cmflow

void run_cmflow(Ctx& c) {
  using V = cm::Vec3c<double>;
  const auto& cfg = c.cfg;
  const std::string mode = cfg.text("mode");
  const double tol = cfg.real("drift_tol");
  const int samples = int(cfg.integer("samples"));
  if (samples < 3) throw ConfigError("cmflow.samples", "must be at least 3");

  if (mode == "single") {
    const auto re = cfg.reals("x0"), im = cfg.reals("x0_im");
    if (re.size() != 3) throw ConfigError("cmflow.x0", "needs three components");
    if (im.size() != 3) throw ConfigError("cmflow.x0_im", "needs three components");
    cm::CMState<double> x0;
    for (int i = 0; i < 3; ++i) x0.z(i) = {re[std::size_t(i)], im[std::size_t(i)]};
    x0.s = cfg.real("s0");
    const double s_end = cfg.real("s_end");
    if (s_end == x0.s) throw ConfigError("cmflow.s_end", "must differ from s0");
    std::vector<double> ts;
    for (double g : geometric_times(1e-3, 1.0, samples)) ts.push_back(x0.s + (s_end - x0.s) * g);

    std::vector<Sample<V>> traj;
    std::string status = "ok";
    try {
      traj = cm::integrate(x0, s_end, {}, ts, false).samples;
    } catch (const DivergenceError<V>& e) {
      status = std::string("diverged: ") + e.what();
      traj = {{x0.s, x0.z}, {e.last_s, e.last_state}};
    }
    const auto c0 = cm::conserved(x0.z).as_array();
    CsvWriter csv({"s", "re_z1", "im_z1", "re_z2", "im_z2", "re_z3", "im_z3", "norm", "c1", "c2", "c3", "drift"});
    double worst = 0;
    for (const auto& smp : traj) {
      const auto cc = cm::conserved(smp.x).as_array();
      double d = 0;
      for (int i = 0; i < 3; ++i) d = std::max(d, std::abs(cc[std::size_t(i)] - c0[std::size_t(i)]));
      worst = std::max(worst, d);
      csv.row() << smp.s;
      for (int i = 0; i < 3; ++i) csv << smp.x(i).real() << smp.x(i).imag();
      csv << smp.x.norm() << cc[0] << cc[1] << cc[2] << d;
    }
    c.write("cmflow_trajectory.csv", csv);
    const auto cls = cm::classify(x0.z);
    CsvWriter info({"quantity", "value"});
    info.row() << "classification" << cm::to_string(cls.kind);
    info.row() << "a_inf_sq" << cls.a_inf_sq;
    info.row() << "status" << status;
    c.write("cmflow_summary.csv", info);
    c.check("cmflow.completed", status == "ok", "==", 1, status);
    c.check("cmflow.max_drift", worst, "<", tol);
    return;
  }

  if (mode == "conservation") {
    const int n = int(cfg.integer("count"));
    if (n < 0) throw ConfigError("cmflow.count", "must be non-negative");
    const double R = cfg.real("radius"), horizon = cfg.real("horizon");
    struct Row {
      V z;
      std::string status = "ok";
      double s_reached = 0, drift = 0;
    };
    std::vector<Row> rows(static_cast<std::size_t>(n));
    const auto errs = parallel_for(rows.size(), cfg.threads, [&](std::size_t i) {
      std::mt19937_64 rng(derive_seed(cfg.seed, 2, i));
      std::normal_distribution<double> G(0, 1);
      std::uniform_real_distribution<double> U(0, 1);
      V z;
      for (int j = 0; j < 3; ++j) z(j) = {G(rng), G(rng)};
      z *= R * std::pow(U(rng), 1.0 / 6.0) / z.norm();
      Row& r = rows[i];
      r.z = z;
      const auto c0 = cm::conserved(z).as_array();
      try {
        const auto tr = cm::integrate(cm::CMState<double>{z, 0.0}, horizon);
        r.s_reached = tr.samples.back().s;
        r.drift = tr.drift();
      } catch (const DivergenceError<V>& e) {
        r.status = "diverged";
        r.s_reached = e.last_s;
        const auto cc = cm::conserved(e.last_state).as_array();
        for (int j = 0; j < 3; ++j) r.drift = std::max(r.drift, std::abs(cc[std::size_t(j)] - c0[std::size_t(j)]));
      }
    });
    CsvWriter csv({"id", "norm0", "c1", "c2", "c3", "classification", "status", "s_reached", "max_drift"});
    int diverged = 0;
    double worst = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      Row& r = rows[i];
      if (errs[i]) r.status = "error: " + what_of(errs[i]);
      const auto cc = cm::conserved(r.z).as_array();
      csv.row() << int(i) << r.z.norm() << cc[0] << cc[1] << cc[2] << cm::to_string(cm::classify(r.z).kind)
                << r.status << r.s_reached << r.drift;
      if (r.status == "ok") worst = std::max(worst, r.drift);
      else ++diverged;
    }
    c.write("cmflow_conservation.csv", csv);
    c.check("cmflow.conservation_incomplete", diverged, "==", 0,
            "trajectories that left the finite range before the horizon");
    c.check("cmflow.conservation_max_drift", worst, "<", tol, "over completed trajectories");
    return;
  }

  // decay
  const double phi = cfg.real("phi"), s_lo = cfg.real("s_lo"), s_hi = cfg.real("s_hi");
  if (!(s_lo > 0 && s_hi > s_lo)) throw ConfigError("cmflow.s_lo", "need 0 < s_lo < s_hi");
  const auto ts = geometric_times(s_lo, s_hi, samples);
  const auto tr = cm::integrate(cm::CMState<double>{cm::exact_decaying(s_lo, phi), s_lo}, s_hi, {}, ts, false);
  CsvWriter csv({"s", "norm_exact", "norm_numeric", "ode_residual", "rel_error"});
  double res = 0, rel = 0;
  for (const auto& smp : tr.samples) {
    const V ex = cm::exact_decaying(smp.s, phi);
    const double r = cm::exact_family_residual(smp.s, phi);
    const double e = (smp.x - ex).norm() / ex.norm();
    res = std::max(res, r);
    rel = std::max(rel, e);
    csv.row() << smp.s << ex.norm() << smp.x.norm() << r << e;
  }
  c.write("cmflow_decay.csv", csv);
  const double slope = cm::fit_decay_exponent(tr.samples);
  const double st = cfg.real("slope_tol");
  c.check("cmflow.exact_residual", res, "<", cfg.real("residual_tol"));
  c.check_range("cmflow.decay_slope", slope, -1 - st, -1 + st);
  c.check("cmflow.numeric_vs_exact", rel, "<", 1e-8, "diagnostic");
}

// ---------------------------------------------------------------------------
// torusflow

void run_torusflow(Ctx& c) {
  const auto& cfg = c.cfg;
  const int ne = int(cfg.integer("energy_runs")), nh = int(cfg.integer("holonomies")),
            ng = int(cfg.integer("grad_checks"));
  if (ne < 0 || nh < 0 || ng < 0) throw ConfigError("torusflow", "run counts must be non-negative");
  const int eN = int(cfg.integer("energy_N")), dN = int(cfg.integer("decay_N")), gN = int(cfg.integer("grad_N"));
  if (eN < 1) throw ConfigError("torusflow.energy_N", "must be >= 1");
  if (dN < 1) throw ConfigError("torusflow.decay_N", "must be >= 1");
  if (gN < 1) throw ConfigError("torusflow.grad_N", "must be >= 1");

  auto holonomy = [&](std::uint64_t stream, std::size_t i) {
    std::mt19937_64 rng(derive_seed(cfg.seed, stream, i));
    std::uniform_real_distribution<double> U(0, 1);
    const double u = 2 * U(rng), v = 2 * U(rng) - 1;
    return std::pair{u, v};
  };

  // energy identity
  struct ERow {
    double u = 0, v = 0, f0 = 0, f1 = 0, energy = 0, err = INFINITY, mono = 0, constraint = 0;
    std::string status = "ok";
    torus::FlowDiagnostics diag;
  };
  std::vector<ERow> er(static_cast<std::size_t>(ne));
  auto errs = parallel_for(er.size(), cfg.threads, [&](std::size_t i) {
    ERow& r = er[i];
    std::tie(r.u, r.v) = holonomy(3, i);
    const auto x0 = torus::random_state<double>(derive_seed(cfg.seed, 13, i), eN, r.u, r.v, cfg.real("energy_amp"),
                                                cfg.real("energy_a_amp"));
    auto tr = torus::flow(x0, cfg.real("energy_s_end"));
    r.diag = std::move(tr.diag);
    r.f0 = r.diag.f_values.front();
    r.f1 = r.diag.f_values.back();
    r.energy = r.diag.energy.back() - r.diag.energy.front();
    r.err = torus::energy_identity_error(r.diag);
    r.mono = torus::monotonicity_violation(r.diag);
    r.constraint = r.diag.constraint.back();
  });
  CsvWriter ecsv({"run", "u", "v", "f_start", "f_end", "energy", "rel_error", "monotonicity_violation",
                  "constraint_end", "status"});
  double e_worst = 0, m_worst = 0;
  for (std::size_t i = 0; i < er.size(); ++i) {
    if (errs[i]) er[i].status = what_of(errs[i]);
    const ERow& r = er[i];
    ecsv.row() << int(i) << r.u << r.v << r.f0 << r.f1 << r.energy << r.err << r.mono << r.constraint << r.status;
    e_worst = std::max(e_worst, r.status == "ok" ? r.err : INFINITY);
    m_worst = std::max(m_worst, r.mono);
  }
  c.write("torus_energy.csv", ecsv);
  if (!er.empty() && !errs[0]) {
    const auto& d = er[0].diag;
    CsvWriter t({"s", "f", "energy", "grad_norm2", "length", "spinor_norm", "constraint"});
    for (std::size_t k = 0; k < d.s.size(); ++k)
      t.row() << d.s[k] << d.f_values[k] << d.energy[k] << d.grad_norm2[k] << d.length[k] << d.spinor_norm[k]
              << d.constraint[k];
    c.write("torus_trajectory.csv", t);
  }

  // exponential decay at holonomies with a gap
  struct DRow {
    double u = 0, v = 0, gap = 0, rate = NAN, rel = INFINITY, s_end = 0;
    torus::LojReport loj;
    std::string status = "ok";
  };
  std::vector<DRow> dr(static_cast<std::size_t>(nh));
  {
    // holonomies are drawn sequentially so the accepted set does not depend on threads
    std::size_t attempt = 0;
    for (auto& r : dr) {
      do {
        std::tie(r.u, r.v) = holonomy(4, attempt++);
        r.gap = torus::hessian_spectrum(r.u, r.v, dN).gap;
      } while (r.gap < cfg.real("min_gap"));
    }
  }
  errs = parallel_for(dr.size(), cfg.threads, [&](std::size_t i) {
    DRow& r = dr[i];
    const auto run = torus::decay_run(derive_seed(cfg.seed, 14, i), r.u, r.v, dN, cfg.real("decay_amp"));
    r.rate = run.rate;
    r.rel = std::abs(run.rate - run.gap) / run.gap;
    r.s_end = run.s_end;
    r.loj = torus::loj_check(run.diag, run.gap);
  });
  CsvWriter dcsv({"id", "u", "v", "gap", "fitted_rate", "rel_error", "s_end", "loj_length", "loj_bound", "loj_holds",
                  "status"});
  double d_worst = 0;
  int loj_fail = 0;
  for (std::size_t i = 0; i < dr.size(); ++i) {
    if (errs[i]) dr[i].status = what_of(errs[i]);
    const DRow& r = dr[i];
    dcsv.row() << int(i) << r.u << r.v << r.gap << r.rate << r.rel << r.s_end << r.loj.length << r.loj.bound
               << r.loj.holds << r.status;
    d_worst = std::max(d_worst, r.status == "ok" ? r.rel : INFINITY);
    loj_fail += r.status == "ok" && r.loj.applicable && !r.loj.holds;
  }
  c.write("torus_decay.csv", dcsv);

  // gradient consistency
  std::vector<double> gerr(static_cast<std::size_t>(ng), INFINITY);
  std::vector<std::pair<double, double>> ghol(static_cast<std::size_t>(ng));
  errs = parallel_for(gerr.size(), cfg.threads, [&](std::size_t i) {
    ghol[i] = holonomy(5, i);
    const auto x = torus::random_state<double>(derive_seed(cfg.seed, 15, i), gN, ghol[i].first, ghol[i].second, 0.5, 0.3);
    gerr[i] = torus::gradient_fd_error(x, derive_seed(cfg.seed, 16, i));
  });
  CsvWriter gcsv({"id", "u", "v", "rel_error", "status"});
  for (std::size_t i = 0; i < gerr.size(); ++i)
    gcsv.row() << int(i) << ghol[i].first << ghol[i].second << gerr[i] << (errs[i] ? what_of(errs[i]) : "ok");
  c.write("torus_gradient.csv", gcsv);

  c.check("torus.energy_identity_max_rel_error", e_worst, "<", cfg.real("energy_tol"));
  c.check("torus.monotonicity_violation", m_worst, "<=", 1e-12, "largest increase of f between samples");
  c.check("torus.decay_rate_max_rel_error", d_worst, "<=", cfg.real("rate_tol"));
  c.check("torus.lojasiewicz_failures", loj_fail, "==", 0);
  c.check("torus.gradient_max_rel_error", max_of(gerr), "<", cfg.real("grad_tol"));
}

// ---------------------------------------------------------------------------
// maslov / specflow

double reduce_pi(double x) { return x - kPi * std::round(x / kPi); }

void write_splitting(Ctx& c, const std::string& prefix, int n, const grading::SplittingOptions& opt) {
  std::vector<grading::SplittingReport> rep(static_cast<std::size_t>(std::max(n, 0)));
  const auto errs = parallel_for(rep.size(), c.cfg.threads, [&](std::size_t i) {
    rep[i] = grading::splitting_check(grading::splitting_instance(derive_seed(c.cfg.seed, 6, i), opt));
  });
  CsvWriter csv({"instance_id", "SF_glued", "SF1", "SF2", "maslov", "residual", "status"});
  int worst = 0, failed = 0;
  for (std::size_t i = 0; i < rep.size(); ++i) {
    const auto& r = rep[i];
    if (errs[i]) {
      ++failed;
      csv.row() << int(i) << "" << "" << "" << "" << "" << what_of(errs[i]);
      continue;
    }
    csv.row() << int(i) << r.sf_glued << r.sf1 << r.sf2 << r.maslov << r.residual << "ok";
    worst = std::max(worst, std::abs(r.residual));
  }
  c.write(prefix + "_splitting.csv", csv);
  c.check(prefix + ".splitting_max_abs_residual", worst, "==", 0);
  c.check(prefix + ".splitting_errors", failed, "==", 0);
}

void run_maslov(Ctx& c) {
  const auto& cfg = c.cfg;
  const int n = int(cfg.integer("paths")), samples = int(cfg.integer("samples"));
  if (n < 0) throw ConfigError("maslov.paths", "must be non-negative");
  if (samples < 2) throw ConfigError("maslov.samples", "must be at least 2");

  struct PRow {
    int a = 0, b = 0, ab = 0, hom = 0, rep = 0;
    bool add_ok = false, hom_ok = false, rep_ok = false;
    std::string status = "ok";
  };
  std::vector<PRow> pr(static_cast<std::size_t>(n));
  auto errs = parallel_for(pr.size(), cfg.threads, [&](std::size_t i) {
    std::mt19937_64 rng(derive_seed(cfg.seed, 5, i));
    std::uniform_real_distribution<double> U(-2 * kPi, 2 * kPi);
    // endpoint angles of the two paths at tau = 0, 1/2, 1; transverse with margin
    double a[3], b[3];
    for (int j = 0; j < 3; ++j) do {
        a[j] = U(rng);
        b[j] = U(rng);
      } while (std::abs(reduce_pi(a[j] - b[j])) < 0.1);
    auto sd = [&] { return std::uint64_t(rng()); };
    const auto A1 = grading::random_lag_path(sd(), a[0], a[1], 3, 1.5, samples);
    const auto A2 = grading::random_lag_path(sd(), a[1], a[2], 3, 1.5, samples);
    const auto B1 = grading::random_lag_path(sd(), b[0], b[1], 3, 1.5, samples);
    const auto B2 = grading::random_lag_path(sd(), b[1], b[2], 3, 1.5, samples);
    const auto A1h = grading::random_lag_path(sd(), a[0], a[1], 4, 2.0, samples);
    PRow& r = pr[i];
    r.a = grading::maslov(A1, B1).index;
    r.b = grading::maslov(A2, B2).index;
    r.ab = grading::maslov(A1.concat(A2), B1.concat(B2)).index;
    r.add_ok = r.ab == r.a + r.b;
    r.hom = grading::maslov(A1h, B1).index;
    r.hom_ok = r.hom == r.a;
    auto g = [](double t) { return t * t * (3 - 2 * t); };
    r.rep = grading::maslov(A1.reparameterize(g), B1.reparameterize(g)).index;
    r.rep_ok = r.rep == r.a;
  });
  CsvWriter pcsv({"id", "maslov_first", "maslov_second", "maslov_concat", "additive", "maslov_homotopic",
                  "homotopy_invariant", "maslov_reparameterized", "reparameterization_invariant", "status"});
  int add_fail = 0, hom_fail = 0, nonzero = 0;
  for (std::size_t i = 0; i < pr.size(); ++i) {
    PRow& r = pr[i];
    if (errs[i]) r.status = what_of(errs[i]);
    pcsv.row() << int(i) << r.a << r.b << r.ab << r.add_ok << r.hom << r.hom_ok << r.rep << r.rep_ok << r.status;
    add_fail += !r.add_ok;
    hom_fail += !(r.hom_ok && r.rep_ok);
    nonzero += r.a != 0;
  }
  c.write("maslov_paths.csv", pcsv);

  const int K = int(cfg.integer("K"));
  const double eta = cfg.real("eta"), width = cfg.real("width");
  const auto pc = chi::build_staircase(eta, cfg.real("eps"), width, K);
  CsvWriter scsv({"k_from", "u0", "u1", "maslov_plus", "maslov_minus"});
  int st_worst = 0;
  for (int k = -K; k < K; ++k) {
    const double u0 = pc.center(k) + 1.5 * width, u1 = pc.center(k + 1) - 1.5 * width;
    const auto [p, m] = grading::staircase_vs_y1_maslov(pc, u0, u1);
    scsv.row() << k << u0 << u1 << p << m;
    st_worst = std::max({st_worst, std::abs(p), std::abs(m)});
  }
  c.write("maslov_staircase.csv", scsv);

  write_splitting(c, "maslov", int(cfg.integer("splitting")), {samples, 0, 0.5, 12});

  const int k = int(cfg.integer("y0_k")), wraps = int(cfg.integer("wraps"));
  if (k == 0) throw ConfigError("maslov.y0_k", "must be nonzero");
  if (wraps < 1) throw ConfigError("maslov.wraps", "must be >= 1");
  CsvWriter tcsv({"case", "y1", "k", "deg_staircase", "deg_target", "maslov_staircase", "maslov_target",
                  "difference", "expected_difference", "holds"});
  int y1_fail = 0, y0_fail = 0, wrap_fail = 0;
  auto emit = [&](const std::string& name, const grading::TransferReport& r, int expected) {
    tcsv.row() << name << r.y1 << r.k << r.deg_staircase << r.deg_target << r.maslov_staircase << r.maslov_target
               << r.difference << expected << r.holds;
  };
  for (int j = 0; j < 5; ++j) {
    const auto r = grading::relative_degree_transfer(grading::y1_transfer_instance(derive_seed(cfg.seed, 7, j), pc));
    emit("y1_" + std::to_string(j), r, 0);
    y1_fail += !(r.holds && r.difference == 0);
  }
  {
    const auto r = grading::relative_degree_transfer(grading::identical_point_instance(pc));
    emit("identical_points", r, 0);
    y1_fail += !(r.holds && r.difference == 0);
  }
  for (int j = 0; j < 5; ++j) {
    const auto r = grading::relative_degree_transfer(grading::y0_transfer_instance(derive_seed(cfg.seed, 8, j), pc, k, 0));
    emit("y0_" + std::to_string(j), r, 0);
    y0_fail += !(r.holds && r.difference % (2 * k) == 0);
  }
  const auto w = grading::relative_degree_transfer(grading::y0_transfer_instance(derive_seed(cfg.seed, 9, 0), pc, k, wraps));
  emit("y0_wrap", w, 2 * std::abs(k) * wraps);
  wrap_fail = !(w.holds && std::abs(w.difference) == 2 * std::abs(k) * wraps);
  c.write("maslov_transfer.csv", tcsv);

  c.check("maslov.additivity_failures", add_fail, "==", 0);
  c.check("maslov.homotopy_failures", hom_fail, "==", 0, "homotopy rel endpoints and reparameterization");
  c.check("maslov.nonzero_indices", nonzero, ">=", 1, "the random family exercises nonzero indices");
  c.check("maslov.staircase_vs_y1_max_abs", st_worst, "==", 0);
  c.check("maslov.y1_transfer_failures", y1_fail, "==", 0);
  c.check("maslov.y0_transfer_failures", y0_fail, "==", 0);
  c.check("maslov.y0_wrap_failures", wrap_fail, "==", 0);
}

void run_specflow(Ctx& c) {
  const auto& cfg = c.cfg;
  grading::SplittingOptions opt;
  opt.samples = int(cfg.integer("samples"));
  opt.extra_maslov = int(cfg.integer("extra_maslov"));
  opt.kappa = cfg.real("kappa");
  opt.max_dim = int(cfg.integer("max_dim"));
  if (opt.samples < 2) throw ConfigError("specflow.samples", "must be at least 2");
  write_splitting(c, "specflow", int(cfg.integer("instances")), opt);
}

// ---------------------------------------------------------------------------
// glue

void run_glue(Ctx& c) {
  const auto& cfg = c.cfg;
  const auto rs = cfg.reals("r_values");
  for (double r : rs)
    if (!(r > 0)) throw ConfigError("glue.r_values", "neck lengths must be positive");

  glue::NeckModel base;
  base.mu = cfg.real("mu");
  base.theta_left = cfg.real("theta_left");
  base.theta_right = cfg.real("theta_right");
  base.kappa = cfg.real("kappa");
  base.delta = cfg.real("delta");
  if (!(base.mu > 0)) throw ConfigError("glue.mu", "must be positive");
  if (std::abs(reduce_pi(base.theta_left - base.theta_right)) < 1e-6)
    throw ConfigError("glue.theta_right", "boundary data must be transverse (theta_left != theta_right mod pi)");

  std::vector<glue::SmallEigs> eig(rs.size());
  auto errs = parallel_for(rs.size(), cfg.threads, [&](std::size_t i) {
    glue::NeckModel m = base;
    m.r = rs[i];
    eig[i] = glue::glued_small_eigs(m);
  });
  std::vector<double> fit_r, fit_l;
  int count_fail = 0, below_total = 0;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    if (errs[i]) {
      ++count_fail;
      continue;
    }
    count_fail += eig[i].count != base.dim_ker_q();
    if (!eig[i].values.empty()) {
      fit_r.push_back(rs[i]);
      fit_l.push_back(eig[i].values.front());
    }
    for (double v : eig[i].values) below_total += v < std::pow(rs[i], -1.5);
  }
  const double slope = fit_r.size() >= 2 ? glue::fit_loglog(fit_r, fit_l) : NAN;
  CsvWriter ncsv({"r", "window", "count", "dim_ker_q", "lambda_min", "lambda_min_times_r", "below_r_pow_m1_5",
                  "levels", "elements", "rel_change", "fitted_slope", "status"});
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const auto& e = eig[i];
    const double lmin = e.values.empty() ? NAN : e.values.front();
    int below = 0;
    for (double v : e.values) below += v < std::pow(rs[i], -1.5);
    ncsv.row() << rs[i] << e.window << e.count << base.dim_ker_q() << lmin << lmin * rs[i] << below << e.levels
               << e.elements << e.rel_change << slope << (errs[i] ? what_of(errs[i]) : "ok");
  }
  c.write("glue_neck.csv", ncsv);
  c.check("glue.neck_count_mismatches", count_fail, "==", 0, "small-eigenvalue count against dim Ker(Q)");
  c.check_range("glue.neck_fitted_slope", slope, cfg.real("slope_lo"), cfg.real("slope_hi"));
  c.check("glue.neck_below_r_pow_m1_5", below_total, "==", 0);

  // contraction
  const int nc = int(cfg.integer("contraction_instances"));
  const int dim = int(cfg.integer("state_dim"));
  if (nc < 0) throw ConfigError("glue.contraction_instances", "must be non-negative");
  if (dim < 1) throw ConfigError("glue.state_dim", "must be >= 1");
  CsvWriter ccsv({"kind", "id", "lambda_gap", "C_quad", "eps_ball", "sigma_norm", "state_dim", "expected",
                  "outcome", "iterations", "residual", "measured_factor", "factor_bound", "fixed_point_norm",
                  "in_ball", "ok"});
  auto draw = [&](std::uint64_t stream, std::size_t i) {
    std::mt19937_64 rng(derive_seed(cfg.seed, stream, i));
    std::uniform_real_distribution<double> U(0, 1);
    glue::ContractionProblem p;
    p.lambda_gap = 0.05 + 0.45 * U(rng);
    p.C_quad = 0.5 + 1.5 * U(rng);
    p.eps_ball = (0.1 + 0.7 * U(rng)) * p.lambda_gap / (2 * p.C_quad);
    p.sigma_norm = (0.1 + 0.9 * U(rng)) * p.C_quad * p.eps_ball * p.eps_ball;
    p.state_dim = dim;
    return p;
  };
  std::vector<glue::ContractionCertificate> certs(static_cast<std::size_t>(nc));
  std::vector<glue::ContractionProblem> probs(static_cast<std::size_t>(nc));
  errs = parallel_for(certs.size(), cfg.threads, [&](std::size_t i) {
    probs[i] = draw(10, i);
    certs[i] = glue::contract_solve(glue::make_contraction_instance(derive_seed(cfg.seed, 11, i), probs[i]));
  });
  int adm_fail = 0;
  for (std::size_t i = 0; i < certs.size(); ++i) {
    const auto& p = probs[i];
    const auto& ct = certs[i];
    const bool ok = !errs[i] && ct.measured_factor <= ct.factor_bound && ct.residual < 1e-10;
    adm_fail += !ok;
    ccsv.row() << "admissible" << int(i) << p.lambda_gap << p.C_quad << p.eps_ball << p.sigma_norm << p.state_dim
               << "" << (errs[i] ? what_of(errs[i]) : "converged") << ct.iterations << ct.residual
               << ct.measured_factor << ct.factor_bound << ct.fixed_point_norm << ct.in_ball << ok;
  }
  using Mut = std::pair<std::string, std::function<void(glue::ContractionProblem&)>>;
  const std::vector<Mut> muts = {
      {"lambda_gap > 0", [](auto& p) { p.lambda_gap = 0; }},
      {"C_quad > 0", [](auto& p) { p.C_quad = -p.C_quad; }},
      {"eps_ball > 0", [](auto& p) { p.eps_ball = 0; }},
      {"state_dim >= 1", [](auto& p) { p.state_dim = 0; }},
      {"sigma_norm >= 0", [](auto& p) { p.sigma_norm = -p.sigma_norm; }},
      {"eps_ball < lambda_gap/(2*C_quad)", [](auto& p) { p.eps_ball = 1.25 * p.lambda_gap / (2 * p.C_quad); }},
      {"sigma_norm <= C_quad*eps_ball^2", [](auto& p) { p.sigma_norm = 2 * p.C_quad * p.eps_ball * p.eps_ball; }},
  };
  int inadm_fail = 0, id = 0;
  for (std::size_t j = 0; j < muts.size(); ++j)
    for (std::size_t rep = 0; rep < 3; ++rep, ++id) {
      auto p = draw(12, std::size_t(id));
      muts[j].second(p);
      std::string outcome = "accepted";
      try {
        const auto v = Eigen::VectorXd::Zero(std::max(p.state_dim, 0));
        auto zero = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(Eigen::VectorXd::Zero(x.size())); };
        glue::contract_solve(p, zero, v, zero);
      } catch (const glue::InadmissibleError& e) {
        outcome = e.inequality;
      }
      const bool ok = outcome == muts[j].first;
      inadm_fail += !ok;
      ccsv.row() << "inadmissible" << id << p.lambda_gap << p.C_quad << p.eps_ball << p.sigma_norm << p.state_dim
                 << muts[j].first << outcome << 0 << "" << "" << "" << "" << "" << ok;
    }
  c.write("glue_contraction.csv", ccsv);
  c.check("glue.contraction_admissible_failures", adm_fail, "==", 0);
  c.check("glue.contraction_inadmissible_failures", inadm_fail, "==", 0);

  // pre-gluing
  const auto prs = cfg.reals("preglue_r");
  const double delta = cfg.real("preglue_delta");
  if (!(delta > 0)) throw ConfigError("glue.preglue_delta", "must be positive");
  for (double r : prs)
    if (!(r > 2)) throw ConfigError("glue.preglue_r", "neck lengths must exceed the splice window");
  auto tail = [delta](double t) { return std::exp(-delta * t) * (1 + 0.5 * std::exp(-t)); };
  std::vector<double> lr, le;
  std::vector<glue::PreGlueResult> pg;
  int uncert = 0;
  for (double r : prs) {
    pg.push_back(glue::pre_glue({delta, r}, tail, 1.5));
    uncert += !pg.back().certified;
    lr.push_back(r);
    le.push_back(std::log(pg.back().sup_error));
  }
  double pslope = NAN;
  if (lr.size() >= 2) {
    double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lr.size(); ++i) {
      n += 1;
      sx += lr[i];
      sy += le[i];
      sxx += lr[i] * lr[i];
      sxy += lr[i] * le[i];
    }
    pslope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  CsvWriter pcsv({"r", "sup_error", "l2_error", "bound", "certified", "fitted_log_slope"});
  for (std::size_t i = 0; i < pg.size(); ++i)
    pcsv.row() << prs[i] << pg[i].sup_error << pg[i].l2_error << pg[i].bound << pg[i].certified << pslope;
  c.write("glue_preglue.csv", pcsv);
  const double tol = cfg.real("preglue_tol");
  c.check("glue.preglue_uncertified", uncert, "==", 0);
  c.check_range("glue.preglue_log_slope", pslope, -delta * (1 + tol), -delta * (1 - tol));
}

// ---------------------------------------------------------------------------
// metric

void run_metric(Ctx& c) {
  const auto& cfg = c.cfg;
  metric::MetricPath<double> m;
  m.k = cfg.real("k");
  m.a0 = cfg.real("a0");
  m.eps = cfg.real("eps");
  try {
    m.validate();
  } catch (const PreconditionError& e) {
    throw ConfigError("metric", e.what());
  }
  const int np = int(cfg.integer("profile_points")), grid = int(cfg.integer("grid"));
  if (np < 2) throw ConfigError("metric.profile_points", "must be at least 2");
  if (grid < 2) throw ConfigError("metric.grid", "must be at least 2");

  CsvWriter prof({"s", "a", "a_dot", "scalar_curvature", "a_dot_fd", "curvature_from_fd", "connection_coeff",
                  "antisymmetric"});
  double tails = 0, mincurv = INFINITY, spot = 0;
  int asym = 0;
  for (int i = 0; i < np; ++i) {
    const double s = double(i) / (np - 1);
    const double R = metric::scalar_curvature(m, s);
    const double h = 1e-3;
    // fourth-order central difference
    const double fd = (-m.a(s + 2 * h) + 8 * m.a(s + h) - 8 * m.a(s - h) + m.a(s - 2 * h)) / (12 * h);
    const double Rfd = 3 * (fd / m.k) * (fd / m.k);
    const auto G = metric::connection_matrix(m, s);
    prof.row() << s << m.a(s) << m.a_dot(s) << R << fd << Rfd << m.a_dot(s) / (2 * m.k) << G.antisymmetric();
    if (s <= m.eps || s >= 1 - m.eps) tails = std::max(tails, std::abs(R));
    mincurv = std::min(mincurv, R);
    spot = std::max(spot, std::abs(R - Rfd) / std::max(1.0, std::abs(R)));
    asym += !G.antisymmetric();
  }
  c.write("metric_profile.csv", prof);

  CsvWriter cart({"points", "spacing", "residual", "ratio_to_previous"});
  double prev = NAN, ratio = NAN, first = NAN;
  for (int level = 0, n = grid; level < 3; ++level, n = 2 * n - 1) {
    const double r = metric::cartan_residual(m, n);
    if (level == 0) first = r;
    const double q = std::isnan(prev) ? NAN : prev / r;
    if (level == 1) ratio = q;
    cart.row() << n << 1.0 / (n - 1) << r << q;
    prev = r;
  }
  c.write("metric_cartan.csv", cart);

  c.check("metric.tail_curvature_max", tails, "==", 0);
  c.check("metric.curvature_min", mincurv, ">=", 0);
  c.check("metric.curvature_vs_fd_derivative", spot, "<", 1e-6, "3 (a'/k)^2 against a fourth-order difference of a");
  c.check("metric.connection_not_antisymmetric", asym, "==", 0);
  c.check("metric.cartan_residual", first, "<", cfg.real("cartan_tol"));
  if (m.a0 != 0) c.check_range("metric.cartan_doubling_ratio", ratio, 3.6, 4.4);
}

// ---------------------------------------------------------------------------
// sweep

bool is_odd_integer(double x) {
  return std::floor(x) == x && std::fmod(std::abs(x), 2.0) == 1.0;
}

void run_sweep(Ctx& c) {
  const auto& cfg = c.cfg;
  const int nu = int(cfg.integer("u_n")), nv = int(cfg.integer("v_n")), N = int(cfg.integer("N"));
  if (nu < 0) throw ConfigError("sweep.u_n", "must be non-negative");
  if (nv < 0) throw ConfigError("sweep.v_n", "must be non-negative");
  if (N < 1) throw ConfigError("sweep.N", "must be >= 1");
  auto axis = [](double lo, double hi, int n, int i) { return n == 1 ? lo : lo + (hi - lo) * i / (n - 1); };
  const std::size_t total = std::size_t(nu) * std::size_t(nv);
  struct Row {
    double u, v, g1, g2;
  };
  std::vector<Row> rows(total);
  const auto errs = parallel_for(total, cfg.threads, [&](std::size_t k) {
    const int i = int(k / std::size_t(nv)), j = int(k % std::size_t(nv));
    Row& r = rows[k];
    r.u = axis(cfg.real("u_lo"), cfg.real("u_hi"), nu, i);
    r.v = axis(cfg.real("v_lo"), cfg.real("v_hi"), nv, j);
    r.g1 = torus::hessian_spectrum(r.u, r.v, N).gap;
    r.g2 = torus::hessian_spectrum(r.u, r.v, 2 * N).gap;
  });
  CsvWriter csv({"u_index", "v_index", "u", "v", "gap", "gap_2N", "abs_diff", "lattice_point", "status"});
  int zero_fail = 0, row_fail = 0;
  double inv = 0;
  for (std::size_t k = 0; k < total; ++k) {
    const Row& r = rows[k];
    const int i = int(k / std::size_t(nv)), j = int(k % std::size_t(nv));
    if (errs[k]) {
      ++row_fail;
      csv.row() << i << j << "" << "" << "" << "" << "" << "" << what_of(errs[k]);
      continue;
    }
    const bool lattice = is_odd_integer(r.u) && is_odd_integer(r.v);
    const bool ok = lattice ? r.g1 == 0 : r.g1 > 0;
    zero_fail += !ok;
    inv = std::max(inv, std::abs(r.g1 - r.g2));
    csv.row() << i << j << r.u << r.v << r.g1 << r.g2 << std::abs(r.g1 - r.g2) << lattice << (ok ? "ok" : "fail");
  }
  c.write("sweep_gap.csv", csv);
  c.check("sweep.row_errors", row_fail, "==", 0);
  c.check("sweep.zero_set_failures", zero_fail, "==", 0, "gap = 0 exactly at (1, 1) lattice nodes, > 0 elsewhere");
  c.check("sweep.truncation_invariance", inv, "<=", cfg.real("invariance_tol"));
}

}  // namespace

RunResult run(const RunConfig& cfg) {
  RunResult res;
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw ConfigError("out", "cannot create " + cfg.output_dir.string() + ": " + ec.message());
  Ctx c(cfg, res);
  static const std::map<std::string, void (*)(Ctx&)> table = {
      {"triangle", run_triangle}, {"cmflow", run_cmflow}, {"torusflow", run_torusflow}, {"maslov", run_maslov},
      {"specflow", run_specflow}, {"glue", run_glue},     {"metric", run_metric},       {"sweep", run_sweep}};
  auto it = table.find(cfg.subcommand);
  if (it == table.end()) throw ConfigError("subcommand", "unknown subcommand '" + cfg.subcommand + "'");
  it->second(c);

  bool ok = true;
  json certs = json::array();
  for (const auto& ct : res.certificates) {
    ok = ok && ct.pass;
    certs.push_back({{"name", ct.name},
                     {"value", ct.value},
                     {"threshold", ct.threshold},
                     {"relation", ct.relation},
                     {"pass", ct.pass},
                     {"note", ct.note}});
  }
  res.exit_code = ok ? kExitOk : kExitCertificate;
  std::vector<std::string> outs = res.outputs;
  std::sort(outs.begin(), outs.end());
  json params = json::object();
  for (const auto& [k, v] : cfg.params) params[k] = v;
  res.manifest = {{"subcommand", cfg.subcommand},
                  {"seed", cfg.seed},
                  {"threads", cfg.threads},
                  {"parameters", params},
                  {"outputs", outs},
                  {"certificates", certs},
                  {"status", ok ? "ok" : "certificate_failure"},
                  {"exit_code", res.exit_code}};
  std::ofstream f(cfg.output_dir / "manifest.json", std::ios::binary);
  f << res.manifest.dump(2) << "\n";
  return res;
}

}  // namespace surgtri::cli
