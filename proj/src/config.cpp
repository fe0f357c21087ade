#include "chiralind/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace chiralind {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      fail(path + "." + key, "unknown field");
    }
  }
}

template <class T>
T get(const json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    fail(path, std::string("wrong type (") + e.what() + ")");
  }
}

template <class T>
void read(const json& parent, const char* key, const std::string& path, T& target) {
  if (parent.contains(key)) target = get<T>(parent.at(key), path + "." + key);
}

int read_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

// Real matrices are nested arrays of numbers; complex ones use [re, im] pairs.
ComplexMatrix matrix_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].is_array() ? j[0].size() : 0);
  if (cols == 0) fail(path, "rows must be non-empty arrays");
  ComplexMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) fail(rp, "ragged matrix row");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& e = row[static_cast<std::size_t>(c)];
      const std::string ep = rp + "[" + std::to_string(c) + "]";
      if (e.is_number()) {
        m(r, c) = Complex(e.get<double>(), 0.0);
      } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
        m(r, c) = Complex(e[0].get<double>(), e[1].get<double>());
      } else {
        fail(ep, "expected a number or a [re, im] pair");
      }
    }
  }
  return m;
}

json matrix_to_json(const ComplexMatrix& m) {
  const bool real = m.imag().cwiseAbs().maxCoeff() == 0.0;
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (real) {
        row.push_back(m(r, c).real());
      } else {
        row.push_back(json::array({m(r, c).real(), m(r, c).imag()}));
      }
    }
    out.push_back(row);
  }
  return out;
}

Distribution distribution_from_json(const json& j, const std::string& path) {
  if (j.is_number()) return Distribution::constant(j.get<double>());
  if (!j.is_object() || !j.contains("kind")) fail(path, "expected a number or an object with 'kind'");
  DistributionKind kind;
  try {
    kind = distribution_kind_from_string(get<std::string>(j.at("kind"), path + ".kind"));
  } catch (const ConfigError& e) {
    fail(path + ".kind", e.what());
  }
  auto num = [&](const char* key) {
    if (!j.contains(key)) fail(path, std::string("missing '") + key + "'");
    return get<double>(j.at(key), path + "." + key);
  };
  Distribution d;
  switch (kind) {
    case DistributionKind::constant:
      check_keys(j, path, {"kind", "value"});
      d = Distribution::constant(num("value"));
      break;
    case DistributionKind::uniform:
      check_keys(j, path, {"kind", "lo", "hi"});
      d = Distribution::uniform(num("lo"), num("hi"));
      break;
    case DistributionKind::log_uniform:
      check_keys(j, path, {"kind", "lo", "hi"});
      d = Distribution::log_uniform(num("lo"), num("hi"));
      break;
    case DistributionKind::log_normal:
      check_keys(j, path, {"kind", "mu", "sigma"});
      d = Distribution::log_normal(num("mu"), num("sigma"));
      break;
  }
  try {
    d.validate();
  } catch (const ModelError& e) {
    fail(path, e.what());
  }
  return d;
}

json distribution_to_json(const Distribution& d) {
  switch (d.kind) {
    case DistributionKind::constant:
      return {{"kind", "constant"}, {"value", d.p1}};
    case DistributionKind::uniform:
      return {{"kind", "uniform"}, {"lo", d.p1}, {"hi", d.p2}};
    case DistributionKind::log_uniform:
      return {{"kind", "log_uniform"}, {"lo", d.p1}, {"hi", d.p2}};
    case DistributionKind::log_normal:
      return {{"kind", "log_normal"}, {"mu", d.p1}, {"sigma", d.p2}};
  }
  return {};
}

Field field_from_string(const std::string& s, const std::string& path) {
  if (s == "auto") return Field::automatic;
  if (s == "real") return Field::real;
  if (s == "complex") return Field::complex;
  fail(path, "expected auto, real or complex");
}

std::string to_string(Field f) {
  switch (f) {
    case Field::automatic: return "auto";
    case Field::real: return "real";
    case Field::complex: return "complex";
  }
  return "?";
}

bool same_matrix(const std::optional<ComplexMatrix>& x, const std::optional<ComplexMatrix>& y) {
  if (x.has_value() != y.has_value()) return false;
  if (!x) return true;
  return x->rows() == y->rows() && x->cols() == y->cols() && *x == *y;
}

}  // namespace

bool RunConfig::wants(const std::string& m) const {
  return std::find(methods.begin(), methods.end(), m) != methods.end();
}

void ExperimentConfig::validate() const {
  try {
    model.spec.validate();
  } catch (const ModelError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  if (model.spec.length < 4) throw ConfigError("model.L: need at least 4 sites");
  const auto check_boundary = [&](const std::optional<ComplexMatrix>& m, const char* name) {
    if (m && (m->rows() != model.spec.channels || m->cols() != model.spec.channels)) {
      throw ConfigError(std::string("model.boundary.") + name + ": wrong shape");
    }
  };
  check_boundary(model.edge_boundary.A_boundary, "A");
  check_boundary(model.edge_boundary.B_boundary, "B");
  if (model.edge_boundary.kind == BoundaryKind::periodic) throw ConfigError("model.boundary.kind: edge runs need a cut");
  if (!(numerics.eps_zero > 0.0)) throw ConfigError("numerics.eps_zero: must be positive");
  if (!(numerics.kappa_max >= 1.0)) throw ConfigError("numerics.kappa_max: must be at least 1");
  if (numerics.qr_period < 1) throw ConfigError("numerics.qr_period: must be at least 1");
  if (numerics.lyap_steps < 1) throw ConfigError("numerics.lyap_steps: must be at least 1");
  if (numerics.sw.width < 1) throw ConfigError("numerics.switch.width: must be at least 1");
  if (numerics.window_margin && *numerics.window_margin < 1) throw ConfigError("numerics.window_margin: must be >= 1");
  if (!(numerics.rounding_threshold > 0.0 && numerics.rounding_threshold < 0.5)) {
    throw ConfigError("numerics.rounding_threshold: must lie in (0, 0.5)");
  }
  if (!(numerics.polar_delta > 0.0)) throw ConfigError("numerics.polar_delta: must be positive");
  if (run.methods.empty()) throw ConfigError("run.methods: must be non-empty");
  for (const auto& m : run.methods) {
    if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end()) {
      throw ConfigError("run.methods: unknown method '" + m + "'");
    }
  }
  if (run.seeds < 1) throw ConfigError("run.seeds: need at least one seed");
  if (run.sweep) {
    static const std::vector<std::string> params = {"mean_log_T", "a", "b", "sigma"};
    if (std::find(params.begin(), params.end(), run.sweep->parameter) == params.end()) {
      throw ConfigError("run.sweep.parameter: unknown parameter '" + run.sweep->parameter + "'");
    }
    if (run.sweep->values.empty()) throw ConfigError("run.sweep.values: must be non-empty");
  }
}

bool operator==(const ExperimentConfig& x, const ExperimentConfig& y) {
  const DisorderSpec& a = x.model.spec;
  const DisorderSpec& b = y.model.spec;
  const bool spec_eq = a.channels == b.channels && a.length == b.length && a.n_min == b.n_min &&
                       a.structure == b.structure && a.a_dist == b.a_dist && a.b_dist == b.b_dist &&
                       same_matrix(a.clean_A, b.clean_A) && same_matrix(a.clean_B, b.clean_B) && a.seed == b.seed &&
                       a.kappa_max == b.kappa_max && a.max_retries == b.max_retries;
  const bool model_eq = spec_eq && x.model.field == y.model.field &&
                        x.model.edge_boundary.kind == y.model.edge_boundary.kind &&
                        same_matrix(x.model.edge_boundary.A_boundary, y.model.edge_boundary.A_boundary) &&
                        same_matrix(x.model.edge_boundary.B_boundary, y.model.edge_boundary.B_boundary);
  const NumericsConfig& p = x.numerics;
  const NumericsConfig& q = y.numerics;
  const bool num_eq = p.eps_mode == q.eps_mode && p.eps_zero == q.eps_zero && p.kappa_max == q.kappa_max &&
                      p.qr_period == q.qr_period && p.lyap_steps == q.lyap_steps && p.sw.center == q.sw.center &&
                      p.sw.profile == q.sw.profile && p.sw.width == q.sw.width && p.window_margin == q.window_margin &&
                      p.rounding_threshold == q.rounding_threshold && p.polar_delta == q.polar_delta;
  const RunConfig& r = x.run;
  const RunConfig& s = y.run;
  const bool sweep_eq = r.sweep.has_value() == s.sweep.has_value() &&
                        (!r.sweep || (r.sweep->parameter == s.sweep->parameter && r.sweep->values == s.sweep->values));
  const bool run_eq = r.methods == s.methods && r.lambda_list == s.lambda_list && r.seeds == s.seeds &&
                      r.base_seed == s.base_seed && sweep_eq && r.output == s.output && r.format == s.format;
  return model_eq && num_eq && run_eq;
}

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  check_keys(root, "config", {"model", "numerics", "run"});
  ExperimentConfig cfg;

  if (root.contains("model")) {
    const json& m = root.at("model");
    check_keys(m, "model", {"structure", "N", "L", "n_min", "field", "a_dist", "b_dist", "clean_A", "clean_B",
                            "seed", "max_retries", "boundary"});
    DisorderSpec& spec = cfg.model.spec;
    if (m.contains("structure")) {
      try {
        spec.structure = structure_from_string(get<std::string>(m.at("structure"), "model.structure"));
      } catch (const ConfigError& e) {
        fail("model.structure", e.what());
      }
    }
    if (m.contains("N")) spec.channels = read_int(m.at("N"), "model.N");
    if (m.contains("L")) spec.length = read_int(m.at("L"), "model.L");
    if (m.contains("n_min")) spec.n_min = read_int(m.at("n_min"), "model.n_min");
    if (m.contains("field")) cfg.model.field = field_from_string(get<std::string>(m.at("field"), "model.field"), "model.field");
    if (m.contains("a_dist")) spec.a_dist = distribution_from_json(m.at("a_dist"), "model.a_dist");
    if (m.contains("b_dist")) spec.b_dist = distribution_from_json(m.at("b_dist"), "model.b_dist");
    if (m.contains("clean_A")) spec.clean_A = matrix_from_json(m.at("clean_A"), "model.clean_A");
    if (m.contains("clean_B")) spec.clean_B = matrix_from_json(m.at("clean_B"), "model.clean_B");
    read(m, "seed", "model", spec.seed);
    if (m.contains("max_retries")) spec.max_retries = read_int(m.at("max_retries"), "model.max_retries");
    if (m.contains("boundary")) {
      const json& b = m.at("boundary");
      check_keys(b, "model.boundary", {"kind", "A", "B"});
      const std::string kind = b.contains("kind") ? get<std::string>(b.at("kind"), "model.boundary.kind") : "dirichlet";
      if (kind == "dirichlet") {
        cfg.model.edge_boundary.kind = BoundaryKind::dirichlet_cut;
      } else if (kind == "custom") {
        cfg.model.edge_boundary.kind = BoundaryKind::custom;
      } else {
        fail("model.boundary.kind", "expected dirichlet or custom");
      }
      if (b.contains("A")) cfg.model.edge_boundary.A_boundary = matrix_from_json(b.at("A"), "model.boundary.A");
      if (b.contains("B")) cfg.model.edge_boundary.B_boundary = matrix_from_json(b.at("B"), "model.boundary.B");
    }
  }

  if (root.contains("numerics")) {
    const json& n = root.at("numerics");
    check_keys(n, "numerics", {"eps_zero", "kappa_max", "qr_period", "lyap_steps", "switch", "window_margin",
                               "rounding_threshold", "polar_delta"});
    NumericsConfig& num = cfg.numerics;
    if (n.contains("eps_zero")) {
      const json& e = n.at("eps_zero");
      if (e.is_number()) {
        num.eps_mode = EpsMode::fixed;
        num.eps_zero = e.get<double>();
      } else if (e.is_string() && e.get<std::string>() == "auto") {
        num.eps_mode = EpsMode::automatic;
      } else if (e.is_string() && e.get<std::string>() == "adaptive") {
        num.eps_mode = EpsMode::adaptive;
      } else if (e.is_object()) {
        check_keys(e, "numerics.eps_zero", {"mode", "value"});
        const std::string mode = e.contains("mode") ? get<std::string>(e.at("mode"), "numerics.eps_zero.mode") : "fixed";
        if (mode == "auto") {
          num.eps_mode = EpsMode::automatic;
        } else if (mode == "adaptive") {
          num.eps_mode = EpsMode::adaptive;
        } else if (mode == "fixed") {
          num.eps_mode = EpsMode::fixed;
        } else {
          fail("numerics.eps_zero.mode", "expected auto, fixed or adaptive");
        }
        read(e, "value", "numerics.eps_zero", num.eps_zero);
      } else {
        fail("numerics.eps_zero", "expected a number, \"auto\", \"adaptive\" or {mode, value}");
      }
    }
    read(n, "kappa_max", "numerics", num.kappa_max);
    if (n.contains("qr_period")) num.qr_period = read_int(n.at("qr_period"), "numerics.qr_period");
    if (n.contains("lyap_steps")) {
      if (!n.at("lyap_steps").is_number_integer()) fail("numerics.lyap_steps", "expected an integer");
      num.lyap_steps = n.at("lyap_steps").get<long>();
    }
    if (n.contains("switch")) {
      const json& s = n.at("switch");
      check_keys(s, "numerics.switch", {"center", "profile", "width"});
      if (s.contains("center") && !s.at("center").is_null()) num.sw.center = read_int(s.at("center"), "numerics.switch.center");
      if (s.contains("profile")) {
        const std::string p = get<std::string>(s.at("profile"), "numerics.switch.profile");
        if (p == "sharp") {
          num.sw.profile = SwitchProfile::sharp;
        } else if (p == "ramp") {
          num.sw.profile = SwitchProfile::ramp;
        } else {
          fail("numerics.switch.profile", "expected sharp or ramp");
        }
      }
      if (s.contains("width")) num.sw.width = read_int(s.at("width"), "numerics.switch.width");
    }
    if (n.contains("window_margin") && !n.at("window_margin").is_null()) {
      num.window_margin = read_int(n.at("window_margin"), "numerics.window_margin");
    }
    read(n, "rounding_threshold", "numerics", num.rounding_threshold);
    read(n, "polar_delta", "numerics", num.polar_delta);
  }
  cfg.model.spec.kappa_max = cfg.numerics.kappa_max;

  if (root.contains("run")) {
    const json& r = root.at("run");
    check_keys(r, "run", {"methods", "lambda_list", "seeds", "base_seed", "sweep", "output", "format"});
    RunConfig& run = cfg.run;
    read(r, "methods", "run", run.methods);
    read(r, "lambda_list", "run", run.lambda_list);
    if (r.contains("seeds")) run.seeds = read_int(r.at("seeds"), "run.seeds");
    read(r, "base_seed", "run", run.base_seed);
    if (r.contains("sweep") && !r.at("sweep").is_null()) {
      const json& s = r.at("sweep");
      check_keys(s, "run.sweep", {"parameter", "values"});
      SweepConfig sw;
      read(s, "parameter", "run.sweep", sw.parameter);
      read(s, "values", "run.sweep", sw.values);
      run.sweep = sw;
    }
    read(r, "output", "run", run.output);
    if (r.contains("format")) {
      const std::string f = get<std::string>(r.at("format"), "run.format");
      if (f == "csv") {
        run.format = OutputFormat::csv;
      } else if (f == "json") {
        run.format = OutputFormat::json;
      } else {
        fail("run.format", "expected json or csv");
      }
    }
  }
  cfg.validate();
  return cfg;
}

std::string serialize_config(const ExperimentConfig& cfg) {
  const DisorderSpec& spec = cfg.model.spec;
  json model = {{"structure", to_string(spec.structure)},
                {"N", spec.channels},
                {"L", spec.length},
                {"n_min", spec.n_min},
                {"field", to_string(cfg.model.field)},
                {"a_dist", distribution_to_json(spec.a_dist)},
                {"b_dist", distribution_to_json(spec.b_dist)},
                {"seed", spec.seed},
                {"max_retries", spec.max_retries}};
  if (spec.clean_A) model["clean_A"] = matrix_to_json(*spec.clean_A);
  if (spec.clean_B) model["clean_B"] = matrix_to_json(*spec.clean_B);
  json boundary = {{"kind", cfg.model.edge_boundary.kind == BoundaryKind::custom ? "custom" : "dirichlet"}};
  if (cfg.model.edge_boundary.A_boundary) boundary["A"] = matrix_to_json(*cfg.model.edge_boundary.A_boundary);
  if (cfg.model.edge_boundary.B_boundary) boundary["B"] = matrix_to_json(*cfg.model.edge_boundary.B_boundary);
  model["boundary"] = boundary;

  const NumericsConfig& n = cfg.numerics;
  const char* mode = n.eps_mode == EpsMode::fixed ? "fixed" : n.eps_mode == EpsMode::adaptive ? "adaptive" : "auto";
  json sw = {{"center", n.sw.center ? json(*n.sw.center) : json(nullptr)},
             {"profile", n.sw.profile == SwitchProfile::sharp ? "sharp" : "ramp"},
             {"width", n.sw.width}};
  json numerics = {{"eps_zero", {{"mode", mode}, {"value", n.eps_zero}}},
                   {"kappa_max", n.kappa_max},
                   {"qr_period", n.qr_period},
                   {"lyap_steps", n.lyap_steps},
                   {"switch", sw},
                   {"window_margin", n.window_margin ? json(*n.window_margin) : json(nullptr)},
                   {"rounding_threshold", n.rounding_threshold},
                   {"polar_delta", n.polar_delta}};

  const RunConfig& r = cfg.run;
  json run = {{"methods", r.methods},
              {"lambda_list", r.lambda_list},
              {"seeds", r.seeds},
              {"base_seed", r.base_seed},
              {"output", r.output},
              {"format", r.format == OutputFormat::csv ? "csv" : "json"}};
  if (r.sweep) {
    run["sweep"] = {{"parameter", r.sweep->parameter}, {"values", r.sweep->values}};
  } else {
    run["sweep"] = nullptr;
  }
  return json{{"model", model}, {"numerics", numerics}, {"run", run}}.dump(2);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

DisorderSpec apply_parameter(const DisorderSpec& spec, const std::string& parameter, double value) {
  DisorderSpec out = spec;
  if (parameter.empty()) return out;
  auto shift = [](Distribution& d, double delta) {
    switch (d.kind) {
      case DistributionKind::constant:
      case DistributionKind::uniform:
      case DistributionKind::log_uniform:
        d.p1 *= std::exp(delta);
        d.p2 *= std::exp(delta);
        break;
      case DistributionKind::log_normal:
        d.p1 += delta;
        break;
    }
  };
  if (parameter == "mean_log_T") {
    // E log|T| = E log b - E log a for scalar couplings; only b is moved.
    shift(out.b_dist, value - (out.b_dist.mean_log() - out.a_dist.mean_log()));
  } else if (parameter == "a") {
    out.a_dist = Distribution::constant(value);
  } else if (parameter == "b") {
    out.b_dist = Distribution::constant(value);
  } else if (parameter == "sigma") {
    for (Distribution* d : {&out.a_dist, &out.b_dist}) {
      if (d->kind != DistributionKind::log_normal) throw ConfigError("sweep over sigma needs log-normal couplings");
      d->p2 = value;
    }
  } else {
    throw ConfigError("unknown sweep parameter '" + parameter + "'");
  }
  return out;
}

}  // namespace chiralind
