#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "surgtri/cli.hpp"

using namespace surgtri;
using namespace surgtri::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("surgtri_test_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string field_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<no error>";
}

int shell(const std::string& args) {
  const std::string cmd = std::string(SURGTRI_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

RunConfig sweep_cfg(const fs::path& out, std::vector<std::string> sets = {}) {
  return resolve("sweep", {}, sets, std::nullopt, out);
}

}  // namespace

TEST_CASE("config file parsing") {
  const auto cf = parse_config("# comment\n[run]\nseed = 7\n\n[sweep]\nu_n = 3 ; trailing\nv_lo=-0.5\n");
  CHECK(cf.at("run").at("seed") == "7");
  CHECK(cf.at("sweep").at("u_n") == "3");
  CHECK(cf.at("sweep").at("v_lo") == "-0.5");
  CHECK(field_of([] { parse_config("[sweep]\nu_n = 1\nu_n = 2\n"); }) == "sweep.u_n");
  CHECK(field_of([] { parse_config("u_n = 1\n"); }) != "<no error>");
  CHECK(field_of([] { parse_config("[sweep\n"); }) != "<no error>");
  CHECK(field_of([] { parse_config("[sweep]\njunk\n"); }) != "<no error>");
}

TEST_CASE("unknown keys and bad values name the field") {
  CHECK(field_of([] { resolve("sweep", parse_config("[sweep]\nbogus = 1\n"), {}, std::nullopt, "x"); }) == "sweep.bogus");
  CHECK(field_of([] { resolve("sweep", {}, {"bogus=1"}, std::nullopt, "x"); }) == "sweep.bogus");
  CHECK(field_of([] { resolve("sweep", {}, {"u_n=abc"}, std::nullopt, "x"); }) == "sweep.u_n");
  CHECK(field_of([] { resolve("sweep", {}, {"run.threads=0"}, std::nullopt, "x"); }) == "run.threads");
  CHECK(field_of([] { resolve("sweep", {}, {"kind=other"}, std::nullopt, "x"); }) == "sweep.kind");
  CHECK(field_of([] { resolve("sweep", parse_config("[glue]\nnope = 1\n"), {}, std::nullopt, "x"); }) == "glue.nope");
  CHECK(field_of([] { resolve("nosuch", {}, {}, std::nullopt, "x"); }) == "subcommand");
  CHECK(field_of([] { resolve("sweep", {}, {}, std::nullopt, ""); }) == "out");
}

TEST_CASE("precedence: defaults < file < overrides < explicit seed") {
  const auto file = parse_config("[run]\nseed = 5\nthreads = 2\n[sweep]\nu_n = 3\nv_n = 4\n");
  auto cfg = resolve("sweep", file, {}, std::nullopt, "x");
  CHECK(cfg.integer("u_n") == 3);
  CHECK(cfg.integer("v_n") == 4);
  CHECK(cfg.integer("N") == 4);
  CHECK(cfg.seed == 5);
  CHECK(cfg.threads == 2);
  cfg = resolve("sweep", file, {"u_n=7", "sweep.v_n=8", "run.seed=6"}, std::nullopt, "x");
  CHECK(cfg.integer("u_n") == 7);
  CHECK(cfg.integer("v_n") == 8);
  CHECK(cfg.seed == 6);
  cfg = resolve("sweep", file, {"run.seed=6"}, 99, "x");
  CHECK(cfg.seed == 99);
  // other subcommands' sections are accepted and ignored
  CHECK_NOTHROW(resolve("sweep", parse_config("[glue]\nmu = 3\n"), {}, std::nullopt, "x"));
}

TEST_CASE("list parameters") {
  const auto cfg = resolve("glue", {}, {"r_values=1, 2.5,4"}, std::nullopt, "x");
  const auto r = cfg.reals("r_values");
  REQUIRE(r.size() == 3);
  CHECK(r[1] == 2.5);
}

TEST_CASE("CSV quoting and number format") {
  CsvWriter w({"a", "b,c"});
  w.row() << 0.1 << std::string("say \"hi\"");
  w.row() << 3 << std::string("line\nbreak");
  CHECK(w.rows() == 2);
  CHECK(w.str() == "a,\"b,c\"\r\n0.10000000000000001,\"say \"\"hi\"\"\"\r\n3,\"line\nbreak\"\r\n");
  CHECK(format_real(std::nan("")) == "nan");
  CHECK(format_real(-INFINITY) == "-inf");
}

TEST_CASE("derived seeds are deterministic and distinct") {
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 2, 4));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(2, 2, 3));
}

TEST_CASE("empty sweep grid writes a header-only table") {
  const auto out = scratch("empty");
  const auto res = run(sweep_cfg(out, {"u_n=0"}));
  CHECK(res.exit_code == kExitOk);
  CHECK(slurp(out / "sweep_gap.csv") == "u_index,v_index,u,v,gap,gap_2N,abs_diff,lattice_point,status\r\n");
  const auto man = json::parse(slurp(out / "manifest.json"));
  CHECK(man["status"] == "ok");
}

TEST_CASE("sweep gap vanishes exactly on the lattice nodes") {
  const auto out = scratch("gap");
  const auto res = run(sweep_cfg(out, {"u_n=3", "v_n=3", "u_lo=0", "u_hi=2", "v_lo=-1", "v_hi=1"}));
  CHECK(res.exit_code == kExitOk);
  std::istringstream in(slurp(out / "sweep_gap.csv"));
  std::string line;
  std::getline(in, line);
  int rows = 0, zeros = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
    REQUIRE(f.size() == 9);
    const double u = std::stod(f[2]), v = std::stod(f[3]), gap = std::stod(f[4]);
    const bool node = std::abs(u - 1) < 1e-12 && std::abs(std::abs(v) - 1) < 1e-12;
    CHECK((gap == 0.0) == node);
    zeros += gap == 0.0;
  }
  CHECK(rows == 9);
  CHECK(zeros == 2);
}

TEST_CASE("identical configuration gives identical bytes regardless of thread count") {
  const auto a = scratch("det_a"), b = scratch("det_b");
  run(resolve("maslov", {}, {"paths=12", "splitting=4", "run.threads=1"}, 3, a));
  run(resolve("maslov", {}, {"paths=12", "splitting=4", "run.threads=8"}, 3, b));
  for (const auto& e : fs::directory_iterator(a)) {
    const auto name = e.path().filename();
    if (name == "manifest.json") continue;  // records the thread count
    CAPTURE(name.string());
    CHECK(slurp(e.path()) == slurp(b / name));
  }
  const auto c = scratch("det_c");
  run(resolve("maslov", {}, {"paths=12", "splitting=4", "run.threads=1"}, 3, c));
  CHECK(slurp(a / "manifest.json") == slurp(c / "manifest.json"));
}

TEST_CASE("manifest records parameters, outputs and certificates") {
  const auto out = scratch("manifest");
  const auto res = run(sweep_cfg(out, {"u_n=2", "v_n=2"}));
  const auto man = json::parse(slurp(out / "manifest.json"));
  CHECK(man["subcommand"] == "sweep");
  CHECK(man["parameters"]["u_n"] == 2);
  CHECK(man["outputs"].size() == res.outputs.size());
  CHECK(man["certificates"].size() == res.certificates.size());
  CHECK(man["exit_code"] == 0);
}

TEST_CASE("executable exit codes") {
  const auto out = scratch("exe");
  CHECK(shell("sweep --out " + out.string() + " --set u_n=2 --set v_n=2") == kExitOk);
  CHECK(shell("sweep --out " + out.string() + " --set bogus=1") == kExitConfig);
  CHECK(shell("sweep --out " + out.string() + " --config /nonexistent/file.ini") == kExitConfig);
  CHECK(shell("sweep") == kExitConfig);
  CHECK(shell("--help") == kExitOk);
  CHECK(shell("metric --out " + out.string() + " --set k=-1") == kExitConfig);
  // tightened tolerance that the truncation check cannot meet
  CHECK(shell("metric --out " + out.string() + " --set cartan_tol=1e-30") == kExitCertificate);
}

TEST_CASE("cleanup") { fs::remove_all(scratch("").parent_path()); }
