#include "chiralind/ensembles.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

namespace chiralind {

double Distribution::mean_log() const {
  switch (kind) {
    case DistributionKind::constant:
      return std::log(p1);
    case DistributionKind::log_uniform:
      return 0.5 * (std::log(p1) + std::log(p2));
    case DistributionKind::log_normal:
      return p1;
    case DistributionKind::uniform:
      // E log x for x uniform on [lo, hi].
      if (p1 == p2) return std::log(p1);
      return (p2 * std::log(p2) - p1 * std::log(p1)) / (p2 - p1) - 1.0;
  }
  return 0.0;
}

void Distribution::validate() const {
  switch (kind) {
    case DistributionKind::constant:
      if (!(p1 > 0.0) || !std::isfinite(p1)) throw ModelError("constant coupling must be positive");
      break;
    case DistributionKind::uniform:
    case DistributionKind::log_uniform:
      if (!(p1 > 0.0) || !(p2 >= p1) || !std::isfinite(p2)) {
        throw ModelError("interval distribution needs 0 < lo <= hi");
      }
      break;
    case DistributionKind::log_normal:
      if (!std::isfinite(p1) || !(p2 >= 0.0) || !std::isfinite(p2)) {
        throw ModelError("log-normal distribution needs finite mu and sigma >= 0");
      }
      break;
  }
}

std::string to_string(DistributionKind kind) {
  switch (kind) {
    case DistributionKind::constant: return "constant";
    case DistributionKind::uniform: return "uniform";
    case DistributionKind::log_uniform: return "log_uniform";
    case DistributionKind::log_normal: return "log_normal";
  }
  return "?";
}

DistributionKind distribution_kind_from_string(const std::string& name) {
  if (name == "constant") return DistributionKind::constant;
  if (name == "uniform") return DistributionKind::uniform;
  if (name == "log_uniform") return DistributionKind::log_uniform;
  if (name == "log_normal") return DistributionKind::log_normal;
  throw ConfigError("unknown distribution '" + name + "'");
}

std::string to_string(Structure s) {
  switch (s) {
    case Structure::clean: return "clean";
    case Structure::scalar_diag: return "scalar_diag";
    case Structure::full_random_gl: return "full_random_gl";
  }
  return "?";
}

Structure structure_from_string(const std::string& name) {
  if (name == "clean") return Structure::clean;
  if (name == "scalar_diag") return Structure::scalar_diag;
  if (name == "full_random_gl") return Structure::full_random_gl;
  throw ConfigError("unknown structure '" + name + "'");
}

void DisorderSpec::validate() const {
  if (channels < 1) throw ModelError("channels must be positive");
  if (length < 1) throw ModelError("length must be positive");
  if (max_retries < 0) throw ModelError("max_retries must be non-negative");
  for (const auto* m : {&clean_A, &clean_B}) {
    if (*m && ((*m)->rows() != channels || (*m)->cols() != channels)) {
      throw ModelError("clean matrix does not match the channel count");
    }
  }
  if (!(structure == Structure::clean && clean_A)) a_dist.validate();
  if (!(structure == Structure::clean && clean_B)) b_dist.validate();
}

double standard_normal(std::mt19937_64& rng) {
  // 1 - u lies in (0, 1], so the log is finite.
  const double u1 = 1.0 - unit_uniform(rng);
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double draw(const Distribution& d, std::mt19937_64& rng) {
  switch (d.kind) {
    case DistributionKind::constant:
      return d.p1;
    case DistributionKind::uniform:
      return d.p1 + (d.p2 - d.p1) * unit_uniform(rng);
    case DistributionKind::log_uniform: {
      const double lo = std::log(d.p1);
      const double hi = std::log(d.p2);
      return std::exp(lo + (hi - lo) * unit_uniform(rng));
    }
    case DistributionKind::log_normal:
      return std::exp(d.p1 + d.p2 * standard_normal(rng));
  }
  return d.p1;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t point, std::uint64_t replica) {
  return splitmix64(splitmix64(splitmix64(base) ^ point) ^ replica);
}

void SweepGrid::validate() const {
  if (values.empty()) throw ConfigError("sweep grid has no values");
  if (seeds_per_point < 1) throw ConfigError("seeds_per_point must be at least 1");
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& task) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(std::min(workers, count));
  for (std::size_t w = 0; w < std::min(workers, count); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) task(i);
    });
  }
}

}  // namespace chiralind
