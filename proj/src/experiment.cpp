#include "chiralind/experiment.hpp"
#include "chiralind/lyapunov.hpp"

#include <json.hpp>

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>

namespace chiralind {

using nlohmann::json;

namespace {

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

template <class T>
std::string cell(const std::optional<T>& v) {
  if (!v) return "";
  if constexpr (std::is_same_v<T, bool>) {
    return *v ? "true" : "false";
  } else if constexpr (std::is_integral_v<T>) {
    return std::to_string(*v);
  } else {
    return fmt(*v);
  }
}

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

/// Commas and line breaks would break the CSV row.
std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
  }
  return s;
}

template <ChiralScalar Scalar>
std::optional<Matrix<Scalar>> to_scalar(const std::optional<ComplexMatrix>& m) {
  if (!m) return std::nullopt;
  if constexpr (is_complex<Scalar>::value) {
    return *m;
  } else {
    if (m->imag().cwiseAbs().maxCoeff() > 0.0) throw ConfigError("complex boundary matrix in a real model");
    return Matrix<double>(m->real());
  }
}

template <ChiralScalar Scalar>
BoundarySpec<Scalar> edge_boundary(const BoundaryConfig& b) {
  if (b.kind == BoundaryKind::custom) {
    return BoundarySpec<Scalar>::custom(to_scalar<Scalar>(b.A_boundary), to_scalar<Scalar>(b.B_boundary));
  }
  return BoundarySpec<Scalar>::dirichlet();
}

bool use_complex(const ExperimentConfig& cfg, const DisorderSpec& spec) {
  switch (cfg.model.field) {
    case Field::real: return false;
    case Field::complex: return true;
    case Field::automatic: break;
  }
  if (spec.structure == Structure::full_random_gl) return true;
  for (const auto* m : {&spec.clean_A, &spec.clean_B}) {
    if (*m && (*m)->imag().cwiseAbs().maxCoeff() > 0.0) return true;
  }
  return false;
}

/// max_i |x_i + x_{n-1-i}| for a descending list: zero for a spectrum symmetric under sign flip.
double flip_asymmetry(const RealVector& desc) {
  double worst = 0.0;
  const Eigen::Index n = desc.size();
  for (Eigen::Index i = 0; i < n; ++i) worst = std::max(worst, std::abs(desc(i) + desc(n - 1 - i)));
  return worst;
}

template <ChiralScalar Scalar>
IndexReport evaluate_model_t(const ExperimentConfig& cfg, const DisorderSpec& spec, ResultRow* row) {
  const RunConfig& run = cfg.run;
  const NumericsConfig& num = cfg.numerics;
  IndexReport rep;
  std::vector<std::string> flags;
  std::vector<int> integers;

  const HoppingChain<Scalar> chain = generate<Scalar>(spec);
  const BasisMap basis = basis_of(chain);
  const int center = num.sw.center.value_or(chain.n_min + chain.length() / 2);
  if (!chain.contains(center)) throw ConfigError("numerics.switch.center: outside the window");
  const SwitchFunction sw = num.sw.profile == SwitchProfile::sharp
                                ? SwitchFunction::sharp(chain.n_min, chain.n_max, center)
                                : SwitchFunction::ramp(chain.n_min, chain.n_max, center, num.sw.width);
  std::optional<TraceRegion> region;
  if (num.window_margin) {
    region = TraceRegion{std::max(chain.n_min, center - *num.window_margin),
                         std::min(chain.n_max, center + sw.ramp_width() - 1 + *num.window_margin)};
  }
  const TraceRegion R = region.value_or(sw.default_region());
  rep.diagnostics["trace_region_first"] = R.first;
  rep.diagnostics["trace_region_last"] = R.last;

  // Bulk: ring closure of the window.
  std::optional<double> bulk_raw;
  if (run.wants("bulk_sigma") || run.wants("bulk_fermi") || run.wants("decay")) {
    const ChiralOperator<Scalar> op = build_operator(chain, BoundarySpec<Scalar>::periodic(), num.kappa_max);
    const SpectralData<Scalar> sd = diagonalize(op, num.eps_zero);
    rep.diagnostics["min_abs_eig"] = sd.min_abs_eigenvalue();
    if (row) row->min_abs_eig = sd.min_abs_eigenvalue();
    std::optional<double> s, f;
    try {
      if (run.wants("bulk_sigma")) {
        s = bulk_index_sigma(sd, op.pi, sw, basis, region);
        rep.diagnostics["bulk_sigma"] = *s;
      }
      if (run.wants("bulk_fermi")) {
        f = bulk_index_fermi(sd, op.pi, sw, basis, region);
        rep.diagnostics["bulk_fermi"] = *f;
        if (s) rep.diagnostics["sigma_fermi_diff"] = std::abs(*s - *f);
      }
    } catch (const AssumptionViolation&) {
      // A zero mode at the step: the other methods still run, the row is not converged.
      flags.push_back("bulk_zero_mode");
    }
    bulk_raw = s ? s : f;
    if (run.wants("decay")) {
      try {
        const DecayProfile dp =
            kernel_decay_profile(fermi_projection(sd, FermiSide::below, ZeroModePolicy::assign_by_sign), basis);
        rep.diagnostics["mu_fit"] = dp.mu_fit;
        rep.diagnostics["mu_fit_residual"] = dp.residual;
        if (row) row->mu_fit = dp.mu_fit;
      } catch (const InsufficientData& e) {
        flags.push_back("decay_fit");
      }
    }
  }
  if (run.wants("bulk_polar") || run.wants("proj_pair")) {
    const Matrix<Scalar> S = build_S(chain, BoundarySpec<Scalar>::periodic(), num.kappa_max);
    try {
      if (run.wants("bulk_polar")) {
        const double p = bulk_index_polar(S, sw, basis, region, num.polar_delta);
        rep.diagnostics["bulk_polar"] = p;
        if (!bulk_raw) bulk_raw = p;
      }
      if (run.wants("proj_pair")) {
        const double q = bulk_index_proj_pair(polar_unitary(S, num.polar_delta), center - 1, basis, region);
        rep.diagnostics["proj_pair"] = q;
        if (!bulk_raw) bulk_raw = q;
      }
    } catch (const GapClosed&) {
      // The polar forms need a spectral gap; under a mobility gap they are skipped.
      rep.diagnostics["polar_gap_closed"] = 1.0;
    }
  }
  if (bulk_raw) {
    rep.bulk_raw = *bulk_raw;
    rep.bulk = nearest_int(*bulk_raw);
    rep.bulk_residual = std::abs(*bulk_raw - rep.bulk);
    integers.push_back(rep.bulk);
    if (rep.bulk_residual >= num.rounding_threshold) flags.push_back("bulk_residual");
    if (row) {
      row->bulk_raw = rep.bulk_raw;
      row->bulk = rep.bulk;
    }
  }

  // Edge: hard cut on the left, configured boundary on the right.
  if (run.wants("edge_window")) {
    const ChiralOperator<Scalar> op = build_operator(chain, edge_boundary<Scalar>(cfg.model.edge_boundary), num.kappa_max);
    const SpectralData<Scalar> sd = diagonalize(op, num.eps_zero);
    const bool adaptive =
        num.eps_mode == EpsMode::adaptive || (num.eps_mode == EpsMode::automatic && spec.structure != Structure::clean);
    double eps = num.eps_zero;
    if (adaptive) {
      const AdaptiveEps ae = adaptive_eps_zero(sd, spec.channels);
      eps = ae.eps;
      rep.diagnostics["adaptive_gap_ratio"] = ae.gap_ratio;
    }
    const EdgeWindowResult e = edge_index_window(sd, op.pi, sw, basis, eps);
    rep.edge = e.rounded;
    rep.edge_window_raw = e.raw;
    rep.diagnostics["eps_zero_used"] = eps;
    rep.diagnostics["zero_rank"] = e.zero_rank;
    rep.diagnostics["zero_gap_ratio"] = e.gap_ratio;
    integers.push_back(e.rounded);
    if (!e.converged) flags.push_back("edge_unconverged");
    if (!e.separated) flags.push_back("zero_cluster");
    if (row) {
      row->edge_raw = e.raw;
      row->edge = e.rounded;
      row->zero_gap_ratio = e.gap_ratio;
    }
  }
  if (run.wants("edge_kernel")) {
    try {
      const int k = edge_index_kernel_svd(build_recursion_matrix(chain, num.kappa_max), spec.channels);
      rep.diagnostics["edge_kernel"] = k;
    } catch (const Undecidable&) {
      rep.diagnostics["edge_kernel_undecidable"] = 1.0;
    }
  }

  // Lyapunov: the window continued by fresh disorder to the left.
  const bool need_lyap = run.wants("lyapunov") || run.wants("dual") || run.wants("energy_resolved");
  if (need_lyap) {
    const long steps = num.lyap_steps;
    const int total = static_cast<int>(std::max<long>(spec.length, steps));
    const HoppingChain<Scalar> ext = generate_extended<Scalar>(spec, total);
    const TransferSequence<Scalar> ts = transfer_matrices(ext, num.kappa_max);
    std::optional<LyapunovSpectrum<Scalar>> primal;
    if (run.wants("lyapunov") || run.wants("dual")) {
      primal = lyapunov_spectrum(ts, steps, num.qr_period, false);
      for (Eigen::Index i = 0; i < primal->exponents.size(); ++i) {
        rep.diagnostics["chi_" + std::to_string(i + 1)] = primal->exponents(i);
      }
      rep.diagnostics["zero_margin"] = primal->zero_margin;
      rep.diagnostics["zero_margin_error"] = primal->zero_margin_error;
      if (row) row->zero_margin = primal->zero_margin;
    }
    if (run.wants("lyapunov")) {
      const NegativeCount nc = negative_count(*primal);
      rep.lyapunov_count = nc.count;
      integers.push_back(nc.count);
      if (!nc.confident) flags.push_back("lyap_unconfident");
      if (row) {
        row->lyap_count = nc.count;
        row->lyap_confident = nc.confident;
      }
    }
    if (run.wants("dual")) {
      const LyapunovSpectrum<Scalar> dual = dual_spectrum(ts, steps, num.qr_period, false);
      double worst = 0.0;
      const Eigen::Index n = dual.exponents.size();
      for (Eigen::Index i = 0; i < n; ++i) {
        worst = std::max(worst, std::abs(dual.exponents(i) + primal->exponents(n - 1 - i)));
      }
      rep.diagnostics["dual_asymmetry"] = worst;
    }
    if (run.wants("energy_resolved")) {
      for (std::size_t k = 0; k < run.lambda_list.size(); ++k) {
        const LyapunovSpectrum<Scalar> g = energy_resolved_spectrum(ext, run.lambda_list[k], steps, num.qr_period,
                                                                    num.kappa_max);
        rep.diagnostics["energy_flip_asymmetry_" + std::to_string(k)] = flip_asymmetry(g.exponents);
        rep.diagnostics["energy_min_abs_" + std::to_string(k)] = g.zero_margin;
      }
    }
  }

  // Window doubling: the same right end, twice the extent to the left.
  if (run.wants("doubling") && spec.length <= std::numeric_limits<int>::max() / 2) {
    const HoppingChain<Scalar> wide = generate_extended<Scalar>(spec, 2 * spec.length);
    const BasisMap wb = basis_of(wide);
    const SwitchFunction wsw = num.sw.profile == SwitchProfile::sharp
                                   ? SwitchFunction::centered(wide.n_min, wide.n_max)
                                   : SwitchFunction::ramp(wide.n_min, wide.n_max,
                                                          wide.n_min + wide.length() / 2, num.sw.width);
    if (bulk_raw) {
      const ChiralOperator<Scalar> op = build_operator(wide, BoundarySpec<Scalar>::periodic(), num.kappa_max);
      const double b2 = bulk_index_sigma(diagonalize(op, num.eps_zero), op.pi, wsw, wb);
      rep.diagnostics["bulk_doubled"] = b2;
      if (nearest_int(b2) != rep.bulk || std::abs(b2 - nearest_int(b2)) >= num.rounding_threshold) {
        flags.push_back("window_drift");
      }
    }
    if (run.wants("edge_window")) {
      const ChiralOperator<Scalar> op =
          build_operator(wide, edge_boundary<Scalar>(cfg.model.edge_boundary), num.kappa_max);
      const SpectralData<Scalar> sd = diagonalize(op, num.eps_zero);
      const double eps = rep.diagnostics.count("adaptive_gap_ratio") ? adaptive_eps_zero(sd, spec.channels).eps
                                                                     : num.eps_zero;
      const EdgeWindowResult e = edge_index_window(sd, op.pi, wsw, wb, eps);
      rep.diagnostics["edge_doubled"] = e.raw;
      if ((e.rounded != rep.edge || !e.converged) && std::find(flags.begin(), flags.end(), "window_drift") == flags.end()) {
        flags.push_back("window_drift");
      }
    }
  }

  // Translation-invariant indices, for clean chains only.
  if (spec.structure == Structure::clean && (run.wants("winding") || run.wants("eigencount"))) {
    const Matrix<Scalar>& A = chain.a(chain.n_max);
    const Matrix<Scalar>& B = chain.b(chain.n_max);
    try {
      if (run.wants("winding")) {
        const WindingResult w = winding_number(BlochSymbol::nearest_neighbor<Scalar>(A, B));
        rep.winding = w.index;
        rep.diagnostics["winding_residual"] = w.residual;
        integers.push_back(w.index);
        if (row) row->winding = w.index;
      }
      if (run.wants("eigencount")) {
        const int c = ti_index_eigencount(A, B, num.kappa_max);
        rep.diagnostics["eigencount"] = c;
        integers.push_back(c);
      }
    } catch (const GapClosed&) {
      flags.push_back("gap_closed");
    }
  }

  const bool same = std::all_of(integers.begin(), integers.end(), [&](int v) { return v == integers.front(); });
  rep.agree = same && !(bulk_raw && rep.bulk_residual >= num.rounding_threshold);
  if (row) {
    row->agree = rep.agree;
    if (flags.empty()) {
      row->status = "ok";
    } else {
      std::string s = "nonconverged:";
      for (std::size_t i = 0; i < flags.size(); ++i) s += (i ? "+" : "") + flags[i];
      row->status = s;
    }
  }
  rep.diagnostics["nonconverged"] = flags.empty() ? 0.0 : 1.0;
  return rep;
}

json report_to_json(const IndexReport& rep) {
  json diag = json::object();
  for (const auto& [k, v] : rep.diagnostics) diag[k] = v;
  return {{"bulk_raw", rep.bulk_raw},
          {"bulk", rep.bulk},
          {"bulk_residual", rep.bulk_residual},
          {"edge", rep.edge},
          {"edge_window_raw", rep.edge_window_raw},
          {"lyapunov_count", optional_json(rep.lyapunov_count)},
          {"winding", optional_json(rep.winding)},
          {"agree", rep.agree},
          {"diagnostics", diag}};
}

json row_to_json(const ResultRow& r) {
  return {{"seed", r.seed},
          {"point_value", r.point_value},
          {"L", r.L},
          {"N", r.N},
          {"bulk_raw", optional_json(r.bulk_raw)},
          {"bulk", optional_json(r.bulk)},
          {"edge_raw", optional_json(r.edge_raw)},
          {"edge", optional_json(r.edge)},
          {"lyap_count", optional_json(r.lyap_count)},
          {"lyap_confident", optional_json(r.lyap_confident)},
          {"winding", optional_json(r.winding)},
          {"min_abs_eig", optional_json(r.min_abs_eig)},
          {"zero_gap_ratio", optional_json(r.zero_gap_ratio)},
          {"mu_fit", optional_json(r.mu_fit)},
          {"zero_margin", optional_json(r.zero_margin)},
          {"agree", r.agree},
          {"status", r.status}};
}

std::string rows_csv(const std::vector<ResultRow>& rows) {
  std::string out = csv_header() + "\n";
  for (const auto& r : rows) out += csv_line(r) + "\n";
  return out;
}

json rows_json(const std::vector<ResultRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows) arr.push_back(row_to_json(r));
  return arr;
}

}  // namespace

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols = {
      "seed", "point_value", "L", "N", "bulk_raw", "bulk", "edge_raw", "edge", "lyap_count", "lyap_confident",
      "winding", "min_abs_eig", "zero_gap_ratio", "mu_fit", "zero_margin", "agree", "status"};
  return cols;
}

std::string csv_header() {
  std::string out;
  for (std::size_t i = 0; i < csv_columns().size(); ++i) out += (i ? "," : "") + csv_columns()[i];
  return out;
}

std::string csv_line(const ResultRow& r) {
  const std::vector<std::string> cells = {std::to_string(r.seed), fmt(r.point_value), std::to_string(r.L),
                                          std::to_string(r.N), cell(r.bulk_raw), cell(r.bulk), cell(r.edge_raw),
                                          cell(r.edge), cell(r.lyap_count), cell(r.lyap_confident), cell(r.winding),
                                          cell(r.min_abs_eig), cell(r.zero_gap_ratio), cell(r.mu_fit),
                                          cell(r.zero_margin), r.agree ? "true" : "false", sanitize(r.status)};
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
  return out;
}

IndexReport evaluate_model(const ExperimentConfig& config, const DisorderSpec& spec, ResultRow* row) {
  if (row) {
    row->seed = spec.seed;
    row->L = spec.length;
    row->N = spec.channels;
  }
  return use_complex(config, spec) ? evaluate_model_t<Complex>(config, spec, row)
                                   : evaluate_model_t<double>(config, spec, row);
}

std::vector<ResultRow> run_sweep(const ExperimentConfig& config, int threads) {
  SweepGrid grid;
  if (config.run.sweep) {
    grid.parameter = config.run.sweep->parameter;
    grid.values = config.run.sweep->values;
  } else {
    grid.values = {0.0};
  }
  grid.seeds_per_point = config.run.seeds;
  grid.base_seed = config.run.base_seed;

  const std::function<ResultRow(const SweepCell&)> fn = [&](const SweepCell& c) {
    DisorderSpec spec = apply_parameter(config.model.spec, grid.parameter, c.value);
    spec.seed = c.seed;
    ResultRow row;
    row.point_value = c.value;
    evaluate_model(config, spec, &row);
    return row;
  };
  const std::function<ResultRow(const SweepCell&, const std::string&)> on_error = [&](const SweepCell& c,
                                                                                        const std::string& what) {
    ResultRow row;
    row.seed = c.seed;
    row.point_value = c.value;
    row.L = config.model.spec.length;
    row.N = config.model.spec.channels;
    row.status = "error:" + what;
    return row;
  };
  return sweep<ResultRow>(grid, fn, on_error, threads);
}

int threads_from_env(int fallback) {
  if (const char* env = std::getenv("CHIRALIND_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
  }
  return fallback;
}

CommandResult cmd_index(const ExperimentConfig& config) {
  ResultRow row;
  row.point_value = 0.0;
  const IndexReport rep = evaluate_model(config, config.model.spec, &row);
  CommandResult out;
  if (config.run.format == OutputFormat::json) {
    json j = report_to_json(rep);
    j["status"] = row.status;
    out.output = j.dump(2) + "\n";
  } else {
    out.output = rows_csv({row});
  }
  out.exit_code = row.converged() ? (rep.agree ? 0 : 1) : 2;
  return out;
}

CommandResult cmd_bec_check(const ExperimentConfig& config, int threads) {
  const std::vector<ResultRow> rows = run_sweep(config, threads);
  int errors = 0, confident = 0, confident_agree = 0, converged = 0, converged_disagree = 0;
  double max_residual = 0.0, sum_residual = 0.0;
  int with_bulk = 0;
  for (const auto& r : rows) {
    if (r.failed()) {
      ++errors;
      continue;
    }
    if (r.lyap_confident.value_or(false)) {
      ++confident;
      if (r.agree) ++confident_agree;
    }
    if (r.converged()) {
      ++converged;
      if (!r.agree) ++converged_disagree;
    }
    if (r.bulk_raw && r.bulk) {
      const double res = std::abs(*r.bulk_raw - *r.bulk);
      max_residual = std::max(max_residual, res);
      sum_residual += res;
      ++with_bulk;
    }
  }
  json summary = {{"rows", rows.size()},
                  {"errors", errors},
                  {"confident", confident},
                  {"confident_agree", confident_agree},
                  {"agreement_fraction", confident ? static_cast<double>(confident_agree) / confident : 0.0},
                  {"converged", converged},
                  {"max_bulk_residual", max_residual},
                  {"mean_bulk_residual", with_bulk ? sum_residual / with_bulk : 0.0}};
  CommandResult out;
  if (config.run.format == OutputFormat::json) {
    out.output = json{{"rows", rows_json(rows)}, {"summary", summary}}.dump(2) + "\n";
  } else {
    out.output = rows_csv(rows);
  }
  out.summary = summary.dump();
  if (errors > 0 || converged_disagree > 0) {
    out.exit_code = 1;
  } else if (converged < static_cast<int>(rows.size())) {
    out.exit_code = 2;
  }
  return out;
}

CommandResult cmd_phase_scan(const ExperimentConfig& config, int threads) {
  if (!config.run.sweep) throw ConfigError("run.sweep: phase-scan needs a sweep grid");
  const std::vector<ResultRow> rows = run_sweep(config, threads);
  CommandResult out;
  out.output = config.run.format == OutputFormat::json ? rows_json(rows).dump(2) + "\n" : rows_csv(rows);
  return out;
}

namespace {

template <ChiralScalar Scalar>
CommandResult lyapunov_t(const ExperimentConfig& cfg) {
  const DisorderSpec& spec = cfg.model.spec;
  const NumericsConfig& num = cfg.numerics;
  const long steps = num.lyap_steps;
  const HoppingChain<Scalar> ext =
      generate_extended<Scalar>(spec, static_cast<int>(std::max<long>(spec.length, steps)));
  const TransferSequence<Scalar> ts = transfer_matrices(ext, num.kappa_max);
  const LyapunovSpectrum<Scalar> primal = lyapunov_spectrum(ts, steps, num.qr_period, false);
  const LyapunovSpectrum<Scalar> dual = dual_spectrum(ts, steps, num.qr_period, false);
  const NegativeCount nc = negative_count(primal);

  struct Line {
    std::string kind;
    double lambda;
    int index;
    double exponent;
    double error;
  };
  std::vector<Line> lines;
  for (Eigen::Index i = 0; i < primal.exponents.size(); ++i) {
    lines.push_back({"primal", 0.0, static_cast<int>(i + 1), primal.exponents(i), primal.errors(i)});
  }
  for (Eigen::Index i = 0; i < dual.exponents.size(); ++i) {
    lines.push_back({"dual", 0.0, static_cast<int>(i + 1), dual.exponents(i), dual.errors(i)});
  }
  for (double lam : cfg.run.lambda_list) {
    const LyapunovSpectrum<Scalar> g = energy_resolved_spectrum(ext, lam, steps, num.qr_period, num.kappa_max);
    for (Eigen::Index i = 0; i < g.exponents.size(); ++i) {
      lines.push_back({"energy", lam, static_cast<int>(i + 1), g.exponents(i), g.errors(i)});
    }
  }

  CommandResult out;
  if (cfg.run.format == OutputFormat::json) {
    json arr = json::array();
    for (const auto& l : lines) {
      arr.push_back({{"kind", l.kind}, {"lambda", l.lambda}, {"index", l.index}, {"exponent", l.exponent},
                     {"error", l.error}});
    }
    out.output = json{{"exponents", arr},
                      {"negative_count", nc.count},
                      {"confident", nc.confident},
                      {"zero_margin", primal.zero_margin},
                      {"zero_margin_error", primal.zero_margin_error},
                      {"steps", steps}}
                     .dump(2) +
                 "\n";
  } else {
    out.output = "kind,lambda,index,exponent,error\n";
    for (const auto& l : lines) {
      out.output += l.kind + "," + fmt(l.lambda) + "," + std::to_string(l.index) + "," + fmt(l.exponent) + "," +
                    fmt(l.error) + "\n";
    }
  }
  out.summary = json{{"negative_count", nc.count}, {"confident", nc.confident}}.dump();
  out.exit_code = nc.confident ? 0 : 2;
  return out;
}

template <ChiralScalar Scalar>
CommandResult winding_t(const ExperimentConfig& cfg) {
  if (cfg.model.spec.structure != Structure::clean) {
    throw ConfigError("model.structure: winding needs a clean (translation-invariant) model");
  }
  const HoppingChain<Scalar> chain = generate<Scalar>(cfg.model.spec);
  const Matrix<Scalar>& A = chain.a(chain.n_max);
  const Matrix<Scalar>& B = chain.b(chain.n_max);
  const WindingResult w = winding_number(BlochSymbol::nearest_neighbor<Scalar>(A, B));
  const int count = ti_index_eigencount(A, B, cfg.numerics.kappa_max);
  CommandResult out;
  if (cfg.run.format == OutputFormat::json) {
    out.output = json{{"index", w.index},
                      {"winding", w.winding},
                      {"residual", w.residual},
                      {"samples", w.samples},
                      {"min_abs_det", w.min_abs_det},
                      {"eigencount", count},
                      {"agree", count == w.index}}
                     .dump(2) +
                 "\n";
  } else {
    out.output = "index,winding,residual,samples,min_abs_det,eigencount,agree\n" + std::to_string(w.index) + "," +
                 fmt(w.winding) + "," + fmt(w.residual) + "," + std::to_string(w.samples) + "," +
                 fmt(w.min_abs_det) + "," + std::to_string(count) + "," + (count == w.index ? "true" : "false") +
                 "\n";
  }
  out.exit_code = count == w.index ? 0 : 1;
  return out;
}

}  // namespace

CommandResult cmd_lyapunov(const ExperimentConfig& config) {
  return use_complex(config, config.model.spec) ? lyapunov_t<Complex>(config) : lyapunov_t<double>(config);
}

CommandResult cmd_winding(const ExperimentConfig& config) {
  return use_complex(config, config.model.spec) ? winding_t<Complex>(config) : winding_t<double>(config);
}

}  // namespace chiralind
