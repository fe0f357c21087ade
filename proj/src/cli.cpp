#include "chiralind/experiment.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace chiralind {

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bulk, edge and Lyapunov indices of disordered chiral chains"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_path;
  std::string format;
  int threads = 0;
  app.add_option("--config", config_path, "Experiment config (JSON)")->required();
  app.add_option("--seed", seed, "Base seed; overrides model.seed and run.base_seed");
  app.add_option("--out", out_path, "Output path (default: stdout)");
  app.add_option("--format", format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--threads", threads, "Worker threads for sweeps (fallback: CHIRALIND_THREADS)")
      ->check(CLI::PositiveNumber);

  auto* index = app.add_subcommand("index", "Every requested index method on one model");
  auto* bec = app.add_subcommand("bec-check", "Bulk, edge and Lyapunov agreement over seeds");
  auto* scan = app.add_subcommand("phase-scan", "One row per (grid point, seed)");
  auto* lyap = app.add_subcommand("lyapunov", "Lyapunov, dual and energy-resolved spectra");
  auto* wind = app.add_subcommand("winding", "Winding number and eigenvalue count of a clean model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    ExperimentConfig cfg = load_config(config_path);
    if (seed) {
      cfg.model.spec.seed = *seed;
      cfg.run.base_seed = *seed;
    }
    if (!out_path.empty()) cfg.run.output = out_path;
    if (!format.empty()) cfg.run.format = format == "json" ? OutputFormat::json : OutputFormat::csv;
    const int workers = threads > 0 ? threads : threads_from_env(1);

    CommandResult result;
    if (index->parsed()) {
      result = cmd_index(cfg);
    } else if (bec->parsed()) {
      result = cmd_bec_check(cfg, workers);
    } else if (scan->parsed()) {
      result = cmd_phase_scan(cfg, workers);
    } else if (lyap->parsed()) {
      result = cmd_lyapunov(cfg);
    } else if (wind->parsed()) {
      result = cmd_winding(cfg);
    }

    if (cfg.run.output.empty()) {
      out << result.output;
    } else {
      std::ofstream f(cfg.run.output, std::ios::binary);
      if (!f) throw ConfigError("cannot write output file '" + cfg.run.output + "'");
      f << result.output;
    }
    if (!result.summary.empty()) err << result.summary << "\n";
    return result.exit_code;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int run_cli(int argc, char** argv) { return run_cli(argc, argv, std::cout, std::cerr); }

}  // namespace chiralind
