// Experiment configuration, per-model index evaluation and the command-line entry points.
#pragma once

#include "chiralind/ensembles.hpp"
#include "chiralind/indices.hpp"
#include "chiralind/lyapunov.hpp"

#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace chiralind {

enum class Field { automatic, real, complex };
enum class EpsMode { automatic, fixed, adaptive };
enum class OutputFormat { json, csv };

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m = {"bulk_sigma", "bulk_fermi", "bulk_polar", "proj_pair",
                                             "edge_window", "edge_kernel", "lyapunov", "dual",
                                             "winding", "eigencount", "energy_resolved", "decay", "doubling"};
  return m;
}

struct BoundaryConfig {
  BoundaryKind kind = BoundaryKind::dirichlet_cut;
  std::optional<ComplexMatrix> A_boundary;
  std::optional<ComplexMatrix> B_boundary;
};

struct ModelConfig {
  DisorderSpec spec;  // structure, N, L, distributions, seed
  Field field = Field::automatic;
  BoundaryConfig edge_boundary;
};

struct SwitchConfig {
  std::optional<int> center;  // default: middle of the window
  SwitchProfile profile = SwitchProfile::sharp;
  int width = 1;
};

struct NumericsConfig {
  EpsMode eps_mode = EpsMode::automatic;
  double eps_zero = kDefaultEpsZero;
  double kappa_max = kDefaultKappaMax;
  int qr_period = kDefaultQrPeriod;
  long lyap_steps = 100000;
  SwitchConfig sw;
  std::optional<int> window_margin;  // half-width of the trace region beyond the step
  double rounding_threshold = kDefaultRoundingThreshold;
  double polar_delta = kDefaultPolarDelta;
};

struct SweepConfig {
  std::string parameter;  // mean_log_T, a, b, sigma; empty for a single point
  std::vector<double> values;
};

struct RunConfig {
  std::vector<std::string> methods = {"bulk_sigma", "bulk_fermi", "edge_window", "lyapunov", "winding"};
  std::vector<double> lambda_list;
  int seeds = 1;
  std::uint64_t base_seed = 0;
  std::optional<SweepConfig> sweep;
  std::string output;
  OutputFormat format = OutputFormat::csv;

  bool wants(const std::string& m) const;
};

struct ExperimentConfig {
  ModelConfig model;
  NumericsConfig numerics;
  RunConfig run;

  void validate() const;
};

bool operator==(const ExperimentConfig& x, const ExperimentConfig& y);

/// Parses a config document; errors carry the JSON location or the offending field path.
ExperimentConfig parse_config(const std::string& text);
std::string serialize_config(const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path);

/// Copy of the model spec with one sweep parameter applied.
DisorderSpec apply_parameter(const DisorderSpec& spec, const std::string& parameter, double value);

// ---------------------------------------------------------------------------
// Rows
// ---------------------------------------------------------------------------

struct ResultRow {
  std::uint64_t seed = 0;
  double point_value = 0.0;
  int L = 0;
  int N = 0;
  std::optional<double> bulk_raw;
  std::optional<int> bulk;
  std::optional<double> edge_raw;
  std::optional<int> edge;
  std::optional<int> lyap_count;
  std::optional<bool> lyap_confident;
  std::optional<int> winding;
  std::optional<double> min_abs_eig;
  std::optional<double> zero_gap_ratio;
  std::optional<double> mu_fit;
  std::optional<double> zero_margin;
  bool agree = false;
  std::string status;  // ok, nonconverged:<flags>, error:<message>

  bool failed() const { return status.rfind("error", 0) == 0; }
  bool converged() const { return status == "ok"; }
};

const std::vector<std::string>& csv_columns();
std::string csv_header();
std::string csv_line(const ResultRow& row);

/// Evaluates the requested methods on one model realization.
IndexReport evaluate_model(const ExperimentConfig& config, const DisorderSpec& spec, ResultRow* row = nullptr);

std::vector<ResultRow> run_sweep(const ExperimentConfig& config, int threads);

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct CommandResult {
  int exit_code = 0;
  std::string output;   // report text; written to --out or stdout
  std::string summary;  // one-line JSON digest, printed to stderr
};

int threads_from_env(int fallback = 1);

CommandResult cmd_index(const ExperimentConfig& config);
CommandResult cmd_bec_check(const ExperimentConfig& config, int threads);
CommandResult cmd_phase_scan(const ExperimentConfig& config, int threads);
CommandResult cmd_lyapunov(const ExperimentConfig& config);
CommandResult cmd_winding(const ExperimentConfig& config);

/// Full command-line entry point; returns the process exit code.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace chiralind
