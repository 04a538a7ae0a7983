// Acceptance driver: runs one documented CLI invocation per criterion, re-checks
// the thresholds against the recorded certificate values and CSV tables, then
// repeats every invocation to compare outputs byte for byte.
//
// Usage: acceptance <runs-dir>
// Exit status is nonzero when a criterion fails that is not listed in
// kDocumentedUnattainable.

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::set<int> kDocumentedUnattainable = {1, 10};

struct Invocation {
  std::string tag;
  std::string args;
};

// one row per criterion; 3/4 and 8/9 share a run
const std::vector<Invocation> kRuns = {
    {"c1_cmflow_conservation", "cmflow --seed 1 --set mode=conservation --set count=100 --set radius=2 --set horizon=10"},
    {"c2_cmflow_decay", "cmflow --seed 1 --set mode=decay --set s_lo=1 --set s_hi=100 --set slope_tol=0.02"},
    {"c3_c4_torusflow", "torusflow --seed 1 --set energy_runs=20 --set holonomies=10 --set min_gap=0.5"},
    {"c5_sweep", "sweep --seed 1 --set kind=gap --set u_n=21 --set v_n=21 --set N=4"},
    {"c6_triangle", "triangle --seed 1 --set curves=50 --set K=3"},
    {"c7_maslov", "maslov --seed 1 --set paths=100 --set splitting=50 --set y0_k=2 --set wraps=1"},
    {"c8_c9_glue", "glue --seed 1 --set r_values=5,10,20,40,80 --set preglue_tol=0.05"},
    {"c10_metric", "metric --seed 1 --set grid=1000"},
};

int sh(const std::string& cmd) {
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

using Table = std::vector<std::map<std::string, std::string>>;

// RFC 4180 reader (quoted fields, CRLF)
Table read_csv(const fs::path& p) {
  const std::string s = slurp(p);
  std::vector<std::vector<std::string>> rows(1);
  std::string cell;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char ch = s[i];
    if (quoted) {
      if (ch == '"' && i + 1 < s.size() && s[i + 1] == '"') cell += '"', ++i;
      else if (ch == '"') quoted = false;
      else cell += ch;
      continue;
    }
    if (ch == '"') quoted = true, any = true;
    else if (ch == ',') rows.back().push_back(cell), cell.clear();
    else if (ch == '\r') continue;
    else if (ch == '\n') rows.back().push_back(cell), cell.clear(), rows.emplace_back();
    else cell += ch, any = true;
  }
  if (!cell.empty() || any) {
    if (!rows.back().empty() || !cell.empty()) rows.back().push_back(cell);
  }
  while (!rows.empty() && rows.back().empty()) rows.pop_back();
  Table t;
  if (rows.empty()) return t;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    std::map<std::string, std::string> m;
    for (std::size_t c = 0; c < rows[0].size() && c < rows[r].size(); ++c) m[rows[0][c]] = rows[r][c];
    t.push_back(std::move(m));
  }
  return t;
}

double num(const std::string& s) {
  if (s == "nan") return NAN;
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  return std::stod(s);
}

class Run {
 public:
  Run(fs::path dir, int exit_code) : dir_(std::move(dir)), exit_(exit_code) {
    if (fs::exists(dir_ / "manifest.json")) man_ = json::parse(slurp(dir_ / "manifest.json"));
  }
  bool ok() const { return !man_.is_null(); }
  int exit_code() const { return exit_; }
  /// certificate value, NaN if missing
  double cert(const std::string& name) const {
    if (!ok()) return NAN;
    for (const auto& c : man_["certificates"])
      if (c["name"] == name) return c["value"].is_number() ? c["value"].get<double>() : NAN;
    return NAN;
  }
  Table csv(const std::string& name) const { return fs::exists(dir_ / name) ? read_csv(dir_ / name) : Table{}; }

 private:
  fs::path dir_;
  int exit_;
  json man_;
};

struct Verdict {
  std::vector<std::string> failed;
  void need(bool cond, const std::string& what) {
    if (!cond) failed.push_back(what);
  }
};

std::string fmt(double x) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", x);
  return b;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "surgtri_acceptance";
  const std::string exe = SURGTRI_CLI_PATH;
  fs::remove_all(root);
  fs::create_directories(root);

  std::map<std::string, Run> runs;
  for (const auto& inv : kRuns)
    for (const char* pass : {"a", "b"}) {
      const fs::path dir = root / pass / inv.tag;
      const int code = sh(exe + " " + inv.args + " --out " + dir.string() + " > " + (root / pass).string() + "_" +
                          inv.tag + ".log 2>&1");
      if (std::string(pass) == "a") runs.emplace(inv.tag, Run(dir, code));
    }
  auto R = [&](const std::string& tag) -> const Run& { return runs.at(tag); };

  std::map<int, Verdict> v;

  {  // 1
    const Run& r = R("c1_cmflow_conservation");
    auto& x = v[1];
    const auto t = r.csv("cmflow_conservation.csv");
    x.need(t.size() == 100, "100 starts");
    int bad = 0;
    double worst = 0;
    for (const auto& row : t) {
      bad += row.at("status") != "ok" || !(num(row.at("norm0")) <= 2.0);
      if (row.at("status") == "ok") worst = std::max(worst, num(row.at("max_drift")));
    }
    x.need(bad == 0, std::to_string(bad) + "/100 trajectories did not complete s in [0, 10]");
    x.need(worst < 1e-8 && r.cert("cmflow.conservation_max_drift") < 1e-8,
           "drift " + fmt(worst) + " >= 1e-8");
  }
  {  // 2
    const Run& r = R("c2_cmflow_decay");
    auto& x = v[2];
    const auto t = r.csv("cmflow_decay.csv");
    double res = 0, smin = INFINITY, smax = -INFINITY;
    for (const auto& row : t) {
      res = std::max(res, num(row.at("ode_residual")));
      smin = std::min(smin, num(row.at("s")));
      smax = std::max(smax, num(row.at("s")));
    }
    x.need(!t.empty() && smin == 1.0 && smax == 100.0, "samples span s in [1, 100]");
    x.need(res < 1e-12 && r.cert("cmflow.exact_residual") < 1e-12, "ODE residual " + fmt(res));
    const double slope = r.cert("cmflow.decay_slope");
    x.need(std::abs(slope + 1.0) <= 0.02, "slope " + fmt(slope));
  }
  {  // 3
    const Run& r = R("c3_c4_torusflow");
    auto& x = v[3];
    const auto t = r.csv("torus_energy.csv");
    double worst = 0;
    for (const auto& row : t) worst = std::max(worst, row.at("status") == "ok" ? num(row.at("rel_error")) : INFINITY);
    x.need(t.size() == 20, "20 trajectories");
    x.need(worst < 1e-6 && r.cert("torus.energy_identity_max_rel_error") < 1e-6, "energy identity " + fmt(worst));
  }
  {  // 4
    const Run& r = R("c3_c4_torusflow");
    auto& x = v[4];
    const auto t = r.csv("torus_decay.csv");
    double worst = 0, gmin = INFINITY;
    for (const auto& row : t) {
      worst = std::max(worst, row.at("status") == "ok" ? num(row.at("rel_error")) : INFINITY);
      gmin = std::min(gmin, num(row.at("gap")));
    }
    x.need(t.size() == 10 && gmin >= 0.5, "10 holonomies with gap >= 0.5");
    x.need(worst <= 0.02, "decay rate error " + fmt(worst));
    const double g = r.cert("torus.gradient_max_rel_error");
    x.need(g < 1e-6, "gradient check " + fmt(g));
  }
  {  // 5
    const Run& r = R("c5_sweep");
    auto& x = v[5];
    const auto t = r.csv("sweep_gap.csv");
    int wrong = 0;
    double inv = 0;
    for (const auto& row : t) {
      const double u = num(row.at("u")), vv = num(row.at("v")), gap = num(row.at("gap"));
      const bool node = std::abs(u - 1) < 1e-12 && std::abs(std::abs(vv) - 1) < 1e-12;
      wrong += node ? gap != 0.0 : !(gap > 0.0);
      inv = std::max(inv, num(row.at("abs_diff")));
    }
    x.need(t.size() == 441, "21x21 grid");
    x.need(wrong == 0, std::to_string(wrong) + " zero-set mismatches");
    x.need(inv <= 1e-12, "N -> 2N difference " + fmt(inv));
  }
  {  // 6
    const Run& r = R("c6_triangle");
    auto& x = v[6];
    x.need(r.cert("triangle.count_equality_failures") == 0, "count equality");
    x.need(r.cert("triangle.bijection_failures") == 0, "bijection certificates");
    x.need(r.cert("triangle.eps_threshold_failures") == 0, "eps threshold");
    const auto t = r.csv("triangle_summary.csv");
    int unequal = 0;
    for (const auto& row : t) unequal += row.at("count_equal") != "true" || row.at("eps_below_threshold") != "true";
    x.need(t.size() == 50, "50 curves");
    x.need(unequal == 0, std::to_string(unequal) + " curves without count equality below the threshold");
  }
  {  // 7
    const Run& r = R("c7_maslov");
    auto& x = v[7];
    x.need(r.csv("maslov_paths.csv").size() == 100, "100 random paths");
    for (const char* n : {"maslov.additivity_failures", "maslov.homotopy_failures", "maslov.staircase_vs_y1_max_abs",
                          "maslov.splitting_max_abs_residual", "maslov.splitting_errors", "maslov.y1_transfer_failures",
                          "maslov.y0_transfer_failures", "maslov.y0_wrap_failures"})
      x.need(r.cert(n) == 0, n);
    x.need(r.csv("maslov_splitting.csv").size() == 50, "50 splitting instances");
    int wrap_ok = 0;
    for (const auto& row : r.csv("maslov_transfer.csv"))
      if (row.at("case") == "y0_wrap")
        wrap_ok += std::abs(num(row.at("difference"))) == 4 && row.at("holds") == "true";
    x.need(wrap_ok == 1, "wrap instance differs by exactly 2k");
  }
  {  // 8
    const Run& r = R("c8_c9_glue");
    auto& x = v[8];
    const auto t = r.csv("glue_neck.csv");
    x.need(t.size() == 5, "r in {5, 10, 20, 40, 80}");
    int mism = 0, below = 0;
    for (const auto& row : t) {
      mism += row.at("count") != row.at("dim_ker_q");
      below += row.at("below_r_pow_m1_5") != "0";
    }
    x.need(mism == 0, "count = dim Ker(Q)");
    x.need(below == 0, "none below r^-1.5");
    const double s = r.cert("glue.neck_fitted_slope");
    x.need(s >= -1.15 && s <= -0.85, "slope " + fmt(s));
  }
  {  // 9
    const Run& r = R("c8_c9_glue");
    auto& x = v[9];
    int adm = 0, adm_bad = 0, inadm = 0, inadm_bad = 0;
    for (const auto& row : r.csv("glue_contraction.csv")) {
      if (row.at("kind") == "admissible") {
        ++adm;
        adm_bad += !(num(row.at("residual")) < 1e-10 && num(row.at("measured_factor")) <= num(row.at("factor_bound")) &&
                     row.at("in_ball") == "true");
      } else {
        ++inadm;
        inadm_bad += row.at("outcome") != row.at("expected");
      }
    }
    x.need(adm > 0 && adm_bad == 0, std::to_string(adm_bad) + " admissible failures");
    x.need(inadm > 0 && inadm_bad == 0, std::to_string(inadm_bad) + " inadmissible misreports");
    const double s = r.cert("glue.preglue_log_slope"), delta = 1.0;
    x.need(std::abs(s + delta) <= 0.05 * delta, "pre-glue slope " + fmt(s));
  }
  {  // 10
    const Run& r = R("c10_metric");
    auto& x = v[10];
    x.need(r.cert("metric.tail_curvature_max") == 0, "flat tails");
    x.need(r.cert("metric.curvature_min") >= 0, "curvature >= 0");
    x.need(r.cert("metric.curvature_vs_fd_derivative") < 1e-6, "3 (a'/k)^2 spot check");
    x.need(r.cert("metric.connection_not_antisymmetric") == 0, "antisymmetric connection");
    const double res = r.cert("metric.cartan_residual");
    x.need(res < 1e-8, "Cartan residual " + fmt(res) + " at 1000 points (needs < 1e-8)");
    const double ratio = r.cert("metric.cartan_doubling_ratio");
    x.need(std::abs(ratio - 4.0) <= 0.4, "doubling ratio " + fmt(ratio));
  }
  {  // 11
    auto& x = v[11];
    int files = 0;
    for (const auto& inv : kRuns) {
      const fs::path a = root / "a" / inv.tag, b = root / "b" / inv.tag;
      std::set<std::string> na, nb;
      for (const auto& e : fs::directory_iterator(a)) na.insert(e.path().filename().string());
      for (const auto& e : fs::directory_iterator(b)) nb.insert(e.path().filename().string());
      x.need(na == nb, inv.tag + ": file sets differ");
      for (const auto& n : na) {
        ++files;
        if (nb.count(n)) x.need(slurp(a / n) == slurp(b / n), inv.tag + "/" + n + " differs");
      }
    }
    x.need(files > 0, "no outputs");
  }

  int unexpected = 0;
  std::ostringstream rep;
  for (int c = 1; c <= 11; ++c) {
    const auto& x = v[c];
    const bool pass = x.failed.empty();
    rep << "criterion " << c << ": " << (pass ? "PASS" : "FAIL");
    for (std::size_t i = 0; i < x.failed.size(); ++i) rep << (i ? "; " : " (") << x.failed[i];
    if (!pass) rep << ")";
    if (!pass && kDocumentedUnattainable.count(c)) rep << " [documented as unattainable]";
    rep << "\n";
    unexpected += !pass && !kDocumentedUnattainable.count(c);
  }
  for (const auto& inv : kRuns)
    rep << "  run " << inv.tag << ": exit " << R(inv.tag).exit_code() << "  surgtri " << inv.args << "\n";
  std::cout << rep.str();
  std::ofstream(root / "report.txt", std::ios::binary) << rep.str();
  return unexpected == 0 ? 0 : 1;
}
