#include "chiralind/experiment.hpp"

#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

using namespace chiralind;

namespace {

std::string write_temp(const std::string& name, const std::string& text) {
  const std::string path = "cli_test_" + name + ".json";
  std::ofstream(path) << text;
  return path;
}

int run(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  args.insert(args.begin(), "chiralind");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

ExperimentConfig random_config(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, 1 << 20);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  ExperimentConfig c;
  c.model.spec.structure = static_cast<Structure>(pick(rng) % 3);
  c.model.spec.channels = 1 + pick(rng) % 3;
  c.model.spec.length = 10 + pick(rng) % 100;
  c.model.spec.n_min = pick(rng) % 7 - 3;
  c.model.spec.seed = rng();
  const double lo = u(rng);
  c.model.spec.a_dist = pick(rng) % 2 ? Distribution::log_uniform(lo, lo + u(rng))
                                      : Distribution::log_normal(u(rng) - 1.0, u(rng));
  c.model.spec.b_dist = pick(rng) % 2 ? Distribution::constant(u(rng)) : Distribution::uniform(lo, lo + 1.0);
  if (pick(rng) % 2) {
    ComplexMatrix A = ComplexMatrix::Identity(c.model.spec.channels, c.model.spec.channels);
    A(0, 0) = Complex(u(rng), pick(rng) % 2 ? u(rng) : 0.0);
    c.model.spec.clean_A = A;
  }
  c.model.field = static_cast<Field>(pick(rng) % 3);
  if (pick(rng) % 2) {
    c.model.edge_boundary.kind = BoundaryKind::custom;
    c.model.edge_boundary.B_boundary = ComplexMatrix::Zero(c.model.spec.channels, c.model.spec.channels);
  }
  c.numerics.eps_mode = static_cast<EpsMode>(pick(rng) % 3);
  c.numerics.eps_zero = u(rng) * 1e-9;
  c.numerics.kappa_max = 1e6 + pick(rng);
  c.model.spec.kappa_max = c.numerics.kappa_max;
  c.numerics.qr_period = 1 + pick(rng) % 20;
  c.numerics.lyap_steps = 1 + pick(rng);
  if (pick(rng) % 2) c.numerics.sw.center = pick(rng) % 10;
  c.numerics.sw.profile = pick(rng) % 2 ? SwitchProfile::sharp : SwitchProfile::ramp;
  c.numerics.sw.width = 1 + pick(rng) % 5;
  if (pick(rng) % 2) c.numerics.window_margin = 1 + pick(rng) % 30;
  c.numerics.rounding_threshold = 0.01 + 0.2 * u(rng) / 2.0;
  c.run.methods.clear();
  for (const auto& m : known_methods())
    if (pick(rng) % 2) c.run.methods.push_back(m);
  if (c.run.methods.empty()) c.run.methods.push_back("winding");
  for (int i = 0; i < pick(rng) % 4; ++i) c.run.lambda_list.push_back(u(rng));
  c.run.seeds = 1 + pick(rng) % 50;
  c.run.base_seed = rng();
  if (pick(rng) % 2) c.run.sweep = SweepConfig{"mean_log_T", {-0.5, 0.0, 0.5}};
  c.run.output = pick(rng) % 2 ? "" : "out.csv";
  c.run.format = pick(rng) % 2 ? OutputFormat::csv : OutputFormat::json;
  return c;
}

const char* kCleanConfig = R"({
  "model": {"structure": "clean", "N": 1, "L": 120, "a_dist": 1.0, "b_dist": 0.5},
  "numerics": {"lyap_steps": 5000},
  "run": {"methods": ["bulk_sigma", "bulk_fermi", "bulk_polar", "proj_pair", "edge_window", "edge_kernel",
                      "lyapunov", "dual", "winding", "eigencount", "decay", "doubling"],
          "format": "json"}
})";

}  // namespace

TEST_CASE("config round trip on random configs") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    const ExperimentConfig c = random_config(rng);
    const std::string text = serialize_config(c);
    const ExperimentConfig back = parse_config(text);
    CHECK(back == c);
    CHECK(serialize_config(back) == text);
  }
}

TEST_CASE("config diagnostics") {
  CHECK_THROWS_WITH_AS(parse_config("{\"model\": {"), doctest::Contains("malformed JSON"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"model": {"L": "ten"}})"), doctest::Contains("model.L"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"model": {"Ll": 10}})"), doctest::Contains("model.Ll"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"model": {"L": 20}, "run": {"methods": []}})"), doctest::Contains("run.methods"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"model": {"L": 20}, "run": {"seeds": 0}})"), doctest::Contains("run.seeds"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"model": {"b_dist": {"kind": "uniform", "lo": 0, "hi": 1}}})"),
                       doctest::Contains("model.b_dist"), ConfigError);
}

TEST_CASE("sweep parameters") {
  DisorderSpec spec;
  spec.a_dist = Distribution::log_normal(0.0, 1.0);
  spec.b_dist = Distribution::log_normal(-0.5, 1.0);
  const auto s = apply_parameter(spec, "mean_log_T", 0.3);
  CHECK(s.b_dist.mean_log() - s.a_dist.mean_log() == doctest::Approx(0.3));
  const auto u = apply_parameter(spec, "sigma", 0.2);
  CHECK(u.a_dist.p2 == 0.2);
  CHECK(apply_parameter(spec, "b", 0.7).b_dist == Distribution::constant(0.7));
  spec.b_dist = Distribution::log_uniform(0.1, 1.0);
  CHECK(apply_parameter(spec, "mean_log_T", -0.2).b_dist.mean_log() == doctest::Approx(-0.2));
}

TEST_CASE("index command on a clean gapped chain") {
  const std::string path = write_temp("clean", kCleanConfig);
  std::string out;
  CHECK(run({"index", "--config", path}, &out) == 0);
  CHECK(out.find("\"agree\": true") != std::string::npos);
  CHECK(out.find("\"winding\": 1") != std::string::npos);
  CHECK(out.find("\"lyapunov_count\": 1") != std::string::npos);
  CHECK(out.find("\"edge\": 1") != std::string::npos);
  CHECK(out.find("\"bulk\": 1") != std::string::npos);

  CHECK(run({"index", "--config", path, "--format", "csv"}, &out) == 0);
  CHECK(out.rfind(csv_header() + "\n", 0) == 0);
  std::remove(path.c_str());
}

TEST_CASE("index command at the transition exits 2") {
  const std::string path = write_temp("critical", R"({
    "model": {"structure": "scalar_diag", "L": 100,
              "a_dist": {"kind": "log_normal", "mu": 0, "sigma": 1},
              "b_dist": {"kind": "log_normal", "mu": 0, "sigma": 1}, "seed": 3},
    "numerics": {"lyap_steps": 20000},
    "run": {"methods": ["lyapunov"]}})");
  std::string out;
  CHECK(run({"index", "--config", path}, &out) == 2);
  CHECK(out.find("lyap_unconfident") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("usage errors exit 1") {
  CHECK(run({"index", "--config", "does_not_exist.json"}) == 1);
  const std::string bad = write_temp("bad", "{ not json");
  std::string err;
  CHECK(run({"index", "--config", bad}, nullptr, &err) == 1);
  CHECK(err.find("malformed JSON") != std::string::npos);
  const std::string empty = write_temp("empty_seeds", R"({"model": {"L": 20}, "run": {"seeds": 0}})");
  CHECK(run({"bec-check", "--config", empty}, nullptr, &err) == 1);
  CHECK(err.find("run.seeds") != std::string::npos);
  CHECK(run({"frobnicate"}) == 1);
  std::remove(bad.c_str());
  std::remove(empty.c_str());
}

TEST_CASE("winding-only phase scan steps at t = 1") {
  const std::string path = write_temp("scan", R"({
    "model": {"structure": "clean", "L": 20, "a_dist": 1.0, "b_dist": 0.5},
    "run": {"methods": ["winding"], "sweep": {"parameter": "b", "values": [0.1, 0.5, 0.9, 1.1, 1.5, 2.0]}}})");
  std::string out;
  CHECK(run({"phase-scan", "--config", path}, &out) == 0);
  std::istringstream lines(out);
  std::string line;
  std::getline(lines, line);
  std::vector<int> winding;
  while (std::getline(lines, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    winding.push_back(std::stoi(cells[10]));
  }
  CHECK(winding == std::vector<int>{1, 1, 1, 0, 0, 0});
  std::remove(path.c_str());
}

TEST_CASE("single-point bec-check and thread independence") {
  const std::string path = write_temp("bec", R"({
    "model": {"structure": "scalar_diag", "L": 60,
              "a_dist": {"kind": "log_normal", "mu": 0, "sigma": 0.5},
              "b_dist": {"kind": "log_normal", "mu": -1, "sigma": 0.5}},
    "numerics": {"lyap_steps": 5000},
    "run": {"methods": ["bulk_sigma", "edge_window", "lyapunov"], "seeds": 6}})");
  std::string one, four, err;
  CHECK(run({"bec-check", "--config", path, "--threads", "1", "--seed", "9"}, &one, &err) == 0);
  CHECK(err.find("\"agreement_fraction\":1.0") != std::string::npos);
  CHECK(run({"bec-check", "--config", path, "--threads", "4", "--seed", "9"}, &four) == 0);
  CHECK(one == four);
  std::string other;
  run({"bec-check", "--config", path, "--threads", "1", "--seed", "10"}, &other);
  CHECK(other != one);
  std::remove(path.c_str());
}

TEST_CASE("lyapunov and winding commands") {
  const std::string path = write_temp("lyap", R"({
    "model": {"structure": "clean", "L": 20, "a_dist": 1.0, "b_dist": 0.5},
    "numerics": {"lyap_steps": 2000},
    "run": {"lambda_list": [0.0, 0.3]}})");
  std::string out;
  CHECK(run({"lyapunov", "--config", path}, &out) == 0);
  CHECK(out.rfind("kind,lambda,index,exponent,error\n", 0) == 0);
  CHECK(out.find("primal,0,1,-0.69314718056") != std::string::npos);
  CHECK(out.find("dual,0,1,0.69314718056") != std::string::npos);
  CHECK(run({"winding", "--config", path, "--format", "json"}, &out) == 0);
  CHECK(out.find("\"index\": 1") != std::string::npos);
  CHECK(out.find("\"eigencount\": 1") != std::string::npos);
  std::remove(path.c_str());
}
