#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "surgtri/cli.hpp"

namespace surgtri::cli {

namespace {

using P = ParamType;

const std::map<std::string, Schema>& all_schemas() {
  static const std::map<std::string, Schema> s = {
      {"triangle",
       {{"eta", {P::real, "0.1", "offset of the k = 0 climb"}},
        {"eps", {P::real, "0.01", "staircase closeness parameter"}},
        {"width", {P::real, "0.2", "climb width"}},
        {"K", {P::integer, "3", "climbs k = -K..K"}},
        {"curves", {P::integer, "50", "number of seeded moduli curves"}},
        {"eps_max", {P::real, "0.2", "top rung of the eps ladder"}},
        {"eps_levels", {P::integer, "20", "rungs eps_max 2^-j"}},
        {"svg_curve", {P::integer, "0", "curve drawn in triangle.svg"}}}},
      {"cmflow",
       {{"mode", {P::text, "single", "single | conservation | decay", {"single", "conservation", "decay"}}},
        {"x0", {P::real_list, "1.4142135623730951,1,1", "real parts of the initial point"}},
        {"x0_im", {P::real_list, "0,0,0", "imaginary parts of the initial point"}},
        {"s0", {P::real, "0", "initial time (single)"}},
        {"s_end", {P::real, "-100", "final time (single)"}},
        {"samples", {P::integer, "200", "output samples (single, decay)"}},
        {"count", {P::integer, "100", "random initial points (conservation)"}},
        {"radius", {P::real, "2", "norm bound of random initial points"}},
        {"horizon", {P::real, "10", "integration horizon (conservation)"}},
        {"drift_tol", {P::real, "1e-8", "bound on conserved-quantity drift"}},
        {"phi", {P::real, "0.7", "phase of the exact decaying family"}},
        {"s_lo", {P::real, "1", "decay window start"}},
        {"s_hi", {P::real, "100", "decay window end"}},
        {"residual_tol", {P::real, "1e-12", "bound on the exact-family residual"}},
        {"slope_tol", {P::real, "0.02", "allowed deviation of the fitted slope from -1"}}}},
      {"torusflow",
       {{"energy_runs", {P::integer, "20", "random trajectories for the energy identity"}},
        {"energy_N", {P::integer, "2", "truncation for energy runs"}},
        {"energy_amp", {P::real, "0.1", "spinor amplitude for energy runs"}},
        {"energy_a_amp", {P::real, "0.1", "connection amplitude for energy runs"}},
        {"energy_s_end", {P::real, "0.2", "horizon for energy runs"}},
        {"energy_tol", {P::real, "1e-6", "bound on the energy-identity error"}},
        {"holonomies", {P::integer, "10", "holonomies for the decay-rate check"}},
        {"min_gap", {P::real, "0.5", "minimum spectral gap of decay holonomies"}},
        {"decay_N", {P::integer, "4", "truncation for decay runs"}},
        {"decay_amp", {P::real, "1e-8", "initial spinor amplitude for decay runs"}},
        {"rate_tol", {P::real, "0.02", "relative tolerance of the fitted rate"}},
        {"grad_checks", {P::integer, "20", "random states for the gradient check"}},
        {"grad_N", {P::integer, "3", "truncation for the gradient check"}},
        {"grad_tol", {P::real, "1e-6", "relative tolerance of the gradient check"}}}},
      {"maslov",
       {{"paths", {P::integer, "100", "random path pairs"}},
        {"splitting", {P::integer, "50", "splitting instances"}},
        {"samples", {P::integer, "64", "samples per path"}},
        {"eta", {P::real, "0.1", "staircase offset"}},
        {"eps", {P::real, "0.01", "staircase closeness"}},
        {"width", {P::real, "0.2", "staircase climb width"}},
        {"K", {P::integer, "3", "staircase climbs"}},
        {"y0_k", {P::integer, "2", "spin^c index of the Y0 transfer"}},
        {"wraps", {P::integer, "1", "extra staircase periods in the wrap instance"}}}},
      {"specflow",
       {{"instances", {P::integer, "50", "splitting instances"}},
        {"samples", {P::integer, "64", "samples per operator path"}},
        {"kappa", {P::real, "0.5", "coupling of the glued perturbation"}},
        {"extra_maslov", {P::integer, "0", "added turns of the first Lagrangian path"}},
        {"max_dim", {P::integer, "12", "dimension budget"}}}},
      {"glue",
       {{"r_values", {P::real_list, "5,10,20,40,80", "neck half-lengths"}},
        {"mu", {P::real, "2", "nonzero eigenvalue of Q"}},
        {"theta_left", {P::real, "0.3", "left boundary angle"}},
        {"theta_right", {P::real, "1.5", "right boundary angle"}},
        {"kappa", {P::real, "0.3", "end perturbation strength"}},
        {"delta", {P::real, "1", "end perturbation decay rate"}},
        {"slope_lo", {P::real, "-1.15", "lower bound of the fitted slope"}},
        {"slope_hi", {P::real, "-0.85", "upper bound of the fitted slope"}},
        {"contraction_instances", {P::integer, "20", "admissible contraction instances"}},
        {"state_dim", {P::integer, "6", "contraction state dimension"}},
        {"preglue_r", {P::real_list, "10,15,20,25,30", "neck lengths for the pre-gluing error"}},
        {"preglue_delta", {P::real, "1", "decay rate of the spliced tail"}},
        {"preglue_tol", {P::real, "0.05", "relative tolerance of the pre-gluing slope"}}}},
      {"metric",
       {{"k", {P::real, "0.5", "coframe constant"}},
        {"a0", {P::real, "0.5", "initial off-diagonal coefficient"}},
        {"eps", {P::real, "0.05", "flat margin"}},
        {"grid", {P::integer, "1000", "Cartan residual grid points"}},
        {"profile_points", {P::integer, "201", "curvature profile samples"}},
        {"cartan_tol", {P::real, "1e-8", "bound on the Cartan residual"}}}},
      {"sweep",
       {{"kind", {P::text, "gap", "gap", {"gap"}}},
        {"u_lo", {P::real, "0", "first grid axis start"}},
        {"u_hi", {P::real, "2", "first grid axis end"}},
        {"u_n", {P::integer, "21", "first grid axis points"}},
        {"v_lo", {P::real, "-1", "second grid axis start"}},
        {"v_hi", {P::real, "1", "second grid axis end"}},
        {"v_n", {P::integer, "21", "second grid axis points"}},
        {"N", {P::integer, "4", "truncation (compared against 2N)"}},
        {"invariance_tol", {P::real, "1e-12", "bound on |gap(N) - gap(2N)|"}}}},
  };
  return s;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_real(const std::string& field, const std::string& s) {
  const std::string t = trim(s);
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(t.c_str(), &end);
  if (t.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(x))
    throw ConfigError(field, "expected a finite real, got '" + s + "'");
  return x;
}

long long parse_integer(const std::string& field, const std::string& s) {
  const std::string t = trim(s);
  char* end = nullptr;
  errno = 0;
  const long long x = std::strtoll(t.c_str(), &end, 10);
  if (t.empty() || *end != '\0' || errno == ERANGE)
    throw ConfigError(field, "expected an integer, got '" + s + "'");
  return x;
}

json typed_value(const std::string& field, const ParamSpec& spec, const std::string& raw) {
  switch (spec.type) {
    case P::integer: return parse_integer(field, raw);
    case P::real: return parse_real(field, raw);
    case P::real_list: {
      json arr = json::array();
      std::stringstream ss(raw);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!trim(item).empty()) arr.push_back(parse_real(field, item));
      return arr;
    }
    case P::text: {
      const std::string t = trim(raw);
      if (!spec.choices.empty() && std::find(spec.choices.begin(), spec.choices.end(), t) == spec.choices.end())
        throw ConfigError(field, "unknown value '" + t + "'");
      return t;
    }
  }
  return nullptr;
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"triangle", "cmflow", "torusflow", "maslov",
                                                 "specflow", "glue",   "metric",    "sweep"};
  return names;
}

const Schema& schema(const std::string& subcommand) {
  const auto& all = all_schemas();
  auto it = all.find(subcommand);
  if (it == all.end()) throw ConfigError("subcommand", "unknown subcommand '" + subcommand + "'");
  return it->second;
}

std::string subcommand_help(const std::string& subcommand) {
  std::string out = "parameters ([" + subcommand + "] section or --set key=value):\n";
  for (const auto& [k, spec] : schema(subcommand)) {
    out += "  " + k + " = " + spec.default_value;
    out += std::string(k.size() + spec.default_value.size() < 28 ? 28 - k.size() - spec.default_value.size() : 1, ' ');
    out += spec.help + "\n";
  }
  return out;
}

double RunConfig::real(const std::string& key) const { return params.at(key).get<double>(); }
long long RunConfig::integer(const std::string& key) const { return params.at(key).get<long long>(); }
std::string RunConfig::text(const std::string& key) const { return params.at(key).get<std::string>(); }
std::vector<double> RunConfig::reals(const std::string& key) const {
  return params.at(key).get<std::vector<double>>();
}

ConfigFile parse_config(const std::string& text) {
  ConfigFile cf;
  std::string section;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto c = line.find_first_of("#;");
    if (c != std::string::npos) line.erase(c);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where, "empty section name");
      cf[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where, "expected key = value");
    if (section.empty()) throw ConfigError(where, "key outside of a section");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where, "empty key");
    if (cf[section].count(key)) throw ConfigError(section + "." + key, "duplicate key");
    cf[section][key] = trim(line.substr(eq + 1));
  }
  return cf;
}

RunConfig resolve(const std::string& subcommand, const ConfigFile& file,
                  const std::vector<std::string>& overrides, std::optional<std::uint64_t> seed,
                  const std::filesystem::path& output_dir) {
  const Schema& sch = schema(subcommand);
  std::map<std::string, std::string> raw;
  for (const auto& [k, spec] : sch) raw[k] = spec.default_value;
  std::string seed_raw = "0", threads_raw = "4";

  auto assign = [&](const std::string& section, const std::string& key, const std::string& value) {
    const std::string field = section + "." + key;
    if (section == "run") {
      if (key == "seed") seed_raw = value;
      else if (key == "threads") threads_raw = value;
      else throw ConfigError(field, "unknown key");
    } else if (section == subcommand) {
      if (!sch.count(key)) throw ConfigError(field, "unknown key");
      raw[key] = value;
    } else {
      throw ConfigError(section, "unknown section for subcommand " + subcommand);
    }
  };

  for (const auto& [section, kv] : file) {
    if (section != "run" && section != subcommand) {
      // sections of other subcommands may share a file; their keys are still validated
      const Schema& other = schema(section);
      for (const auto& [k, v] : kv)
        if (!other.count(k)) throw ConfigError(section + "." + k, "unknown key");
      continue;
    }
    for (const auto& [k, v] : kv) assign(section, k, v);
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError(o, "override must be key=value");
    std::string key = trim(o.substr(0, eq));
    std::string section = subcommand;
    if (const auto dot = key.find('.'); dot != std::string::npos) {
      section = key.substr(0, dot);
      key = key.substr(dot + 1);
    }
    assign(section, key, o.substr(eq + 1));
  }

  RunConfig cfg;
  cfg.subcommand = subcommand;
  for (const auto& [k, spec] : sch) cfg.params[k] = typed_value(subcommand + "." + k, spec, raw[k]);
  const long long sd = parse_integer("run.seed", seed_raw);
  if (sd < 0) throw ConfigError("run.seed", "must be non-negative");
  cfg.seed = seed ? *seed : std::uint64_t(sd);
  const long long th = parse_integer("run.threads", threads_raw);
  if (th < 1 || th > 256) throw ConfigError("run.threads", "must lie in [1, 256]");
  cfg.threads = int(th);
  if (output_dir.empty()) throw ConfigError("out", "output directory is required");
  cfg.output_dir = output_dir;
  return cfg;
}

// ---------------------------------------------------------------------------

std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

CsvWriter& CsvWriter::row() {
  rows_.emplace_back();
  return *this;
}

CsvWriter& CsvWriter::operator<<(double x) { return *this << format_real(x); }

CsvWriter& CsvWriter::operator<<(long long x) { return *this << std::to_string(x); }

CsvWriter& CsvWriter::operator<<(const std::string& s) {
  if (rows_.empty()) rows_.emplace_back();
  rows_.back().push_back(s);
  return *this;
}

std::string CsvWriter::str() const {
  auto field = [](const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  };
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + field(cells[i]);
    return out + "\r\n";
  };
  std::string out = line(header_);
  for (const auto& r : rows_) out += line(r);
  return out;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  std::uint64_t z = base * 0x9E3779B97F4A7C15ULL + (stream << 32) + index + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace surgtri::cli
