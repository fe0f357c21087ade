// Seeded generators for clean and disordered hopping chains, and parameter sweeps.
//
// Draws are made site by site from the right end of the window leftward, so a
// longer chain generated from the same spec extends the shorter one to the left.
#pragma once

#include "chiralind/core_model.hpp"

#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace chiralind {

enum class DistributionKind { constant, uniform, log_uniform, log_normal };

/// Positive scalar distribution. Parameters: constant(value), uniform(lo, hi),
/// log_uniform(lo, hi) with log x uniform on [log lo, log hi], log_normal(mu, sigma) of log x.
struct Distribution {
  DistributionKind kind = DistributionKind::constant;
  double p1 = 1.0;
  double p2 = 0.0;

  static Distribution constant(double v) { return {DistributionKind::constant, v, 0.0}; }
  static Distribution uniform(double lo, double hi) { return {DistributionKind::uniform, lo, hi}; }
  static Distribution log_uniform(double lo, double hi) { return {DistributionKind::log_uniform, lo, hi}; }
  static Distribution log_normal(double mu, double sigma) { return {DistributionKind::log_normal, mu, sigma}; }

  /// E log x, where it is finite in closed form.
  double mean_log() const;
  void validate() const;
  bool operator==(const Distribution&) const = default;
};

std::string to_string(DistributionKind kind);
DistributionKind distribution_kind_from_string(const std::string& name);

enum class Structure { clean, scalar_diag, full_random_gl };

std::string to_string(Structure s);
Structure structure_from_string(const std::string& name);

struct DisorderSpec {
  int channels = 1;
  int length = 1;
  int n_min = 0;
  Structure structure = Structure::scalar_diag;
  Distribution a_dist = Distribution::constant(1.0);
  Distribution b_dist = Distribution::constant(0.5);
  // Optional explicit matrices for a clean multichannel chain.
  std::optional<ComplexMatrix> clean_A;
  std::optional<ComplexMatrix> clean_B;
  std::uint64_t seed = 0;
  double kappa_max = kDefaultKappaMax;
  int max_retries = 100;

  int n_max() const { return n_min + length - 1; }
  void validate() const;
};

/// Uniform double in [0, 1) from the top 53 bits: identical on every platform.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Standard normal by Box-Muller on unit_uniform draws (the std distributions are not portable).
double standard_normal(std::mt19937_64& rng);

double draw(const Distribution& d, std::mt19937_64& rng);

/// SplitMix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

/// Stream seed for one (point, replica) cell of a sweep.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t point, std::uint64_t replica);

namespace detail {

template <ChiralScalar Scalar>
struct SiteDrawer {
  const DisorderSpec& spec;
  std::mt19937_64 rng;

  explicit SiteDrawer(const DisorderSpec& s) : spec(s), rng(s.seed) {}

  Matrix<Scalar> clean_matrix(const std::optional<ComplexMatrix>& m, const Distribution& d) {
    const int N = spec.channels;
    if (m) {
      if constexpr (is_complex<Scalar>::value) {
        return *m;
      } else {
        if (m->imag().cwiseAbs().maxCoeff() > 0.0) throw ModelError("complex clean matrix in a real model");
        return m->real();
      }
    }
    return Matrix<Scalar>::Identity(N, N) * Scalar(d.p1);
  }

  Matrix<Scalar> ginibre(const Distribution& scale) {
    const int N = spec.channels;
    for (int attempt = 0; attempt <= spec.max_retries; ++attempt) {
      Matrix<Scalar> m(N, N);
      for (int j = 0; j < N; ++j) {
        for (int i = 0; i < N; ++i) {
          if constexpr (is_complex<Scalar>::value) {
            const double re = standard_normal(rng);
            const double im = standard_normal(rng);
            m(i, j) = Scalar(re, im) / std::sqrt(2.0 * N);
          } else {
            m(i, j) = standard_normal(rng) / std::sqrt(static_cast<double>(N));
          }
        }
      }
      m *= Scalar(draw(scale, rng));
      if (condition_number(m) <= spec.kappa_max) return m;
    }
    throw ModelError("random matrix generation exceeded " + std::to_string(spec.max_retries) +
                     " retries for cond <= " + std::to_string(spec.kappa_max));
  }

  std::pair<Matrix<Scalar>, Matrix<Scalar>> next() {
    const int N = spec.channels;
    switch (spec.structure) {
      case Structure::clean:
        return {clean_matrix(spec.clean_A, spec.a_dist), clean_matrix(spec.clean_B, spec.b_dist)};
      case Structure::scalar_diag: {
        Matrix<Scalar> a = Matrix<Scalar>::Zero(N, N);
        Matrix<Scalar> b = Matrix<Scalar>::Zero(N, N);
        for (int i = 0; i < N; ++i) a(i, i) = Scalar(draw(spec.a_dist, rng));
        for (int i = 0; i < N; ++i) b(i, i) = Scalar(draw(spec.b_dist, rng));
        return {a, b};
      }
      case Structure::full_random_gl: {
        Matrix<Scalar> a = ginibre(spec.a_dist);
        Matrix<Scalar> b = ginibre(spec.b_dist);
        return {a, b};
      }
    }
    throw ModelError("unknown structure");
  }
};

}  // namespace detail

/// Chain on [n_min - (total - length), n_max]: the spec's window plus `total - length`
/// further sites on the left. Sites are drawn right to left.
template <ChiralScalar Scalar>
HoppingChain<Scalar> generate_extended(const DisorderSpec& spec, int total) {
  spec.validate();
  if (total < 1) throw ModelError("chain length must be positive");
  detail::SiteDrawer<Scalar> drawer(spec);
  HoppingChain<Scalar> chain;
  chain.n_max = spec.n_max();
  chain.n_min = chain.n_max - total + 1;
  chain.channels = spec.channels;
  chain.A.resize(static_cast<std::size_t>(total));
  chain.B.resize(static_cast<std::size_t>(total));
  for (int k = 0; k < total; ++k) {
    auto [a, b] = drawer.next();
    const auto idx = static_cast<std::size_t>(total - 1 - k);
    chain.A[idx] = std::move(a);
    chain.B[idx] = std::move(b);
  }
  chain.validate(spec.kappa_max);
  return chain;
}

template <ChiralScalar Scalar>
HoppingChain<Scalar> generate(const DisorderSpec& spec) {
  return generate_extended<Scalar>(spec, spec.length);
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct SweepGrid {
  std::string parameter;
  std::vector<double> values;
  int seeds_per_point = 1;
  std::uint64_t base_seed = 0;

  void validate() const;
  std::size_t rows() const { return values.size() * static_cast<std::size_t>(seeds_per_point); }
};

struct SweepCell {
  std::size_t point = 0;
  int replica = 0;
  double value = 0.0;
  std::uint64_t seed = 0;
};

/// Runs `fn` for every (point, replica) on `threads` workers. Results land in
/// preallocated slots in (point, replica) order; a throwing cell is handed to
/// `on_error` together with the exception message.
template <class Row>
std::vector<Row> sweep(const SweepGrid& grid, const std::function<Row(const SweepCell&)>& fn,
                       const std::function<Row(const SweepCell&, const std::string&)>& on_error, int threads = 1);

/// Non-template core of `sweep`: calls task(i) for i in [0, count) on a worker pool.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& task);

template <class Row>
std::vector<Row> sweep(const SweepGrid& grid, const std::function<Row(const SweepCell&)>& fn,
                       const std::function<Row(const SweepCell&, const std::string&)>& on_error, int threads) {
  grid.validate();
  std::vector<Row> rows(grid.rows());
  const auto per = static_cast<std::size_t>(grid.seeds_per_point);
  parallel_for(rows.size(), threads, [&](std::size_t i) {
    SweepCell cell;
    cell.point = i / per;
    cell.replica = static_cast<int>(i % per);
    cell.value = grid.values[cell.point];
    cell.seed = derive_seed(grid.base_seed, cell.point, static_cast<std::uint64_t>(cell.replica));
    try {
      rows[i] = fn(cell);
    } catch (const std::exception& e) {
      rows[i] = on_error(cell, e.what());
    }
  });
  return rows;
}

}  // namespace chiralind
