#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "surgtri/cli.hpp"

namespace surgtri::cli {

namespace {

const std::map<std::string, std::string>& descriptions() {
  static const std::map<std::string, std::string> d = {
      {"triangle", "decompose staircase intersections of seeded moduli curves; SVG of the cylinder"},
      {"cmflow", "center-manifold flow: single trajectory, conservation batch or 1/s decay"},
      {"torusflow", "Fourier-truncated torus flow: energy identity, decay rates, gradient check"},
      {"maslov", "Maslov additivity and invariance, staircase index, splitting, degree transfers"},
      {"specflow", "spectral-flow splitting table"},
      {"glue", "neck small eigenvalues, contraction certificates, pre-gluing error"},
      {"metric", "metric path curvature profile and Cartan residuals"},
      {"sweep", "gridded parameter sweep on a bounded worker pool"},
  };
  return d;
}

std::string brief(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

}  // namespace

int main_entry(int argc, char** argv) {
  CLI::App app{"surgtri: numerical checks for surgery triangle models"};
  app.require_subcommand(1);
  app.footer(
      "Exit codes: 0 success, 2 configuration error, 3 certificate failure.\n"
      "Every run writes manifest.json and CSV tables into --out.\n"
      "Run `surgtri <subcommand> --help` to list its parameters and defaults.");

  struct Opts {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::string out;
  };
  std::map<std::string, Opts> opts;
  std::map<std::string, CLI::App*> subs;
  for (const auto& name : subcommands()) {
    auto* sub = app.add_subcommand(name, descriptions().at(name));
    Opts& o = opts[name];
    sub->add_option("--config,-c", o.config, "sectioned key = value configuration file");
    sub->add_option("--set,-s", o.sets, "override: key=value or section.key=value (repeatable)");
    sub->add_option("--seed", o.seed, "base seed (overrides [run] seed)");
    sub->add_option("--out,-o", o.out, "output directory")->required();
    sub->footer(subcommand_help(name));
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  std::string name;
  for (const auto& [n, sub] : subs)
    if (sub->parsed()) name = n;
  const Opts& o = opts[name];

  try {
    ConfigFile file;
    if (!o.config.empty()) {
      std::ifstream in(o.config);
      if (!in) throw ConfigError("config", "cannot read " + o.config);
      std::stringstream ss;
      ss << in.rdbuf();
      file = parse_config(ss.str());
    }
    const RunConfig cfg = resolve(name, file, o.sets, o.seed, o.out);
    const RunResult res = run(cfg);
    for (const auto& c : res.certificates)
      std::cout << (c.pass ? "ok   " : "FAIL ") << c.name << " = " << brief(c.value) << " ("
                << (c.relation == "in" ? "in " + c.note : c.relation + " " + brief(c.threshold) +
                                                             (c.note.empty() ? "" : "; " + c.note))
                << ")\n";
    std::cout << "wrote " << res.outputs.size() + 1 << " files to " << cfg.output_dir.string() << "\n";
    return res.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InfeasibleError& e) {
    std::cerr << "configuration error: infeasible parameters: " << e.what() << "\n";
    return kExitConfig;
  } catch (const PreconditionError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "certificate failure: " << e.what() << "\n";
    return kExitCertificate;
  }
}

}  // namespace surgtri::cli
