#pragma once

// Command-line front end: subcommands obstacle-conv, control-conv, dmp-audit and
// stationarity-check, a --config key=value file, and flag overrides.

#include "dgoc/study.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace dgoc {

inline int cli_main(int argc, const char* const* argv, std::ostream& log = std::cerr) {
  CLI::App app{"SIPG obstacle-control studies"};
  app.require_subcommand(1);
  std::string config_file, levels, benchmark, matching, out, mesh, source, reference_dir;
  std::optional<double> eta, nu;
  std::optional<int> n_ref;
  const char* names[] = {"obstacle-conv", "control-conv", "dmp-audit", "stationarity-check"};
  const char* help[] = {"energy and L2 rates against the exact tensor obstacle solution",
                        "control and state rates against a fine-mesh reference",
                        "patchwise discrete maximum principle audit",
                        "strong-stationarity residuals of the converged control"};
  for (int i = 0; i < 4; ++i) {
    CLI::App* sub = app.add_subcommand(names[i], help[i]);
    sub->add_option("--config", config_file, "key=value configuration file");
    sub->add_option("--eta", eta, "penalty parameter");
    sub->add_option("--nu", nu, "control regularization");
    sub->add_option("--levels", levels, "comma-separated mesh levels n");
    sub->add_option("--benchmark", benchmark, "tensor-obstacle or control");
    sub->add_option("--matching", matching, "global or local");
    sub->add_option("--out", out, "output directory");
    if (i == 1) {
      sub->add_option("--reference-dir", reference_dir, "reference cache directory");
      sub->add_option("--n-ref", n_ref, "reference mesh level");
    }
    if (i == 2) {
      sub->add_option("--mesh", mesh, "mesh file in the text dump format");
      sub->add_option("--source", source, "poisson or harmonic");
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitSuccess : kExitConfigError;
  }
  StudyConfig c;
  Command cmd{};
  try {
    cmd = parse_command(app.get_subcommands().front()->get_name());
    if (!config_file.empty()) apply_config_file(c, config_file);
    if (eta) c.eta = *eta;
    if (nu) c.nu = *nu;
    if (n_ref) c.n_ref = *n_ref;
    if (!levels.empty()) c.levels = parse_levels(levels);
    if (!benchmark.empty()) c.benchmark = benchmark;
    if (!matching.empty()) apply_setting(c, "matching", matching);
    if (!out.empty()) c.out = out;
    if (!reference_dir.empty()) c.reference_dir = reference_dir;
    if (!mesh.empty()) c.mesh = mesh;
    if (!source.empty()) c.source = source;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
  return run(c, cmd, log);
}

}  // namespace dgoc
