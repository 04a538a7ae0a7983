#pragma once

// Run configuration, parameter schemas and subcommand runners behind the
// `surgtri` executable. Every run writes manifest.json plus CSV tables (and an
// SVG for `triangle`) into the output directory.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "surgtri/common.hpp"

namespace surgtri::cli {

using json = nlohmann::json;

enum class ParamType { integer, real, text, real_list };

struct ParamSpec {
  ParamSpec(ParamType t, std::string def, std::string h, std::vector<std::string> ch = {})
      : type(t), default_value(std::move(def)), help(std::move(h)), choices(std::move(ch)) {}

  ParamType type;
  std::string default_value;
  std::string help;
  std::vector<std::string> choices;  // text parameters only; empty = free
};

using Schema = std::map<std::string, ParamSpec>;

const std::vector<std::string>& subcommands();
const Schema& schema(const std::string& subcommand);
std::string subcommand_help(const std::string& subcommand);

struct RunConfig {
  std::string subcommand;
  std::map<std::string, json> params;  // resolved and typed
  std::uint64_t seed = 0;
  int threads = 4;
  std::filesystem::path output_dir;

  double real(const std::string& key) const;
  long long integer(const std::string& key) const;
  std::string text(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;
};

/// Sectioned key = value text. Sections: [run] (seed, threads) and one per
/// subcommand. '#' and ';' start comments.
using ConfigFile = std::map<std::string, std::map<std::string, std::string>>;
ConfigFile parse_config(const std::string& text);

/// Defaults, then the config file's [run] and [<subcommand>] sections, then
/// `overrides` ("key=value" or "section.key=value"), then an explicit seed.
/// Throws ConfigError naming the field.
RunConfig resolve(const std::string& subcommand, const ConfigFile& file,
                  const std::vector<std::string>& overrides, std::optional<std::uint64_t> seed,
                  const std::filesystem::path& output_dir);

struct Certificate {
  std::string name;
  double value;
  double threshold;
  std::string relation;  // "<", "<=", "==", ">=", "in"
  bool pass;
  std::string note;
};

struct RunResult {
  int exit_code = 0;
  std::vector<std::string> outputs;
  std::vector<Certificate> certificates;
  json manifest;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitCertificate = 3;

/// Runs the subcommand and writes its artifacts and manifest.json.
RunResult run(const RunConfig& cfg);

/// Entry point used by the executable (parses argv, maps errors to exit codes).
int main_entry(int argc, char** argv);

// ---------------------------------------------------------------------------
// output helpers

/// RFC 4180 table writer; reals are printed with %.17g.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  CsvWriter& row();
  CsvWriter& operator<<(double x);
  CsvWriter& operator<<(long long x);
  CsvWriter& operator<<(int x) { return *this << static_cast<long long>(x); }
  CsvWriter& operator<<(const std::string& s);
  CsvWriter& operator<<(const char* s) { return *this << std::string(s); }
  CsvWriter& operator<<(bool b) { return *this << std::string(b ? "true" : "false"); }
  std::string str() const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::string format_real(double x);

/// splitmix64 of (base, stream, index): independent deterministic sub-seeds.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

}  // namespace surgtri::cli
