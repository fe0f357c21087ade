// Transfer matrices of S psi+ = 0 and their Lyapunov spectra.
//
// Orientation: psi+_{n-1} = T_n psi+_n with T_n = -A_n^{-1} B_n. A sequence
// starts at a reference site r and step j applies the matrix of site r - j,
// so products run leftward from the reference.
#pragma once

#include "chiralind/core_model.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace chiralind {

inline constexpr int kDefaultQrPeriod = 10;

template <ChiralScalar Scalar>
struct TransferSequence {
  std::vector<Matrix<Scalar>> T;  // T[j] belongs to site reference_site - j
  int reference_site = 0;
  int channels = 1;

  int size() const { return static_cast<int>(T.size()); }
  /// Matrix used at step j; sequences shorter than the run are reused cyclically.
  const Matrix<Scalar>& step(long j) const { return T[static_cast<std::size_t>(j % static_cast<long>(T.size()))]; }
};

template <ChiralScalar Scalar>
TransferSequence<Scalar> transfer_matrices(const HoppingChain<Scalar>& chain, double kappa_max = kDefaultKappaMax) {
  if (chain.length() <= 0) throw ModelError("empty chain");
  TransferSequence<Scalar> ts;
  ts.reference_site = chain.n_max;
  ts.channels = chain.channels;
  ts.T.reserve(static_cast<std::size_t>(chain.length()));
  for (int n = chain.n_max; n >= chain.n_min; --n) {
    const double kappa = condition_number(chain.a(n));
    if (!(kappa <= kappa_max)) {
      throw ModelError("A at site " + std::to_string(n) + " is singular or ill-conditioned (cond " +
                       std::to_string(kappa) + ")");
    }
    ts.T.push_back(-(chain.a(n).partialPivLu().solve(chain.b(n))));
  }
  return ts;
}

template <ChiralScalar Scalar>
struct LyapunovSpectrum {
  RealVector exponents;   // descending
  RealVector errors;      // standard error per exponent
  // filtration[i] spans V_{chi_i}: the N - i slowest directions at the reference site.
  std::vector<Matrix<Scalar>> filtration;
  long steps_used = 0;
  double zero_margin = 0.0;        // min_i |chi_i|
  double zero_margin_error = 0.0;  // error bar of that exponent
};

namespace detail {

inline constexpr int kMaxBatches = 64;

/// Forward QR accumulation. Returns per-batch log growth for each column.
inline constexpr double kMaxBlockSpread = 32.0;  // nats of singular-value spread allowed between QRs

/// Caps the QR period so that a block of steps cannot spread the singular values
/// past kMaxBlockSpread; the per-step bound is log cond over a pilot of the sequence.
template <ChiralScalar Scalar>
int safe_qr_period(const TransferSequence<Scalar>& ts, int qr_period) {
  if (ts.channels == 1 || qr_period == 1) return qr_period;
  double worst = 0.0;
  const std::size_t pilot = std::min<std::size_t>(ts.size(), 1000);
  for (std::size_t j = 0; j < pilot; ++j) worst = std::max(worst, std::log(condition_number(ts.T[j])));
  if (!(worst > 0.0)) return qr_period;
  return std::clamp(static_cast<int>(kMaxBlockSpread / worst), 1, qr_period);
}

template <ChiralScalar Scalar>
std::vector<RealVector> qr_batches(const TransferSequence<Scalar>& ts, long n_steps, int requested_period,
                                   RealVector& total) {
  const int N = ts.channels;
  const int qr_period = safe_qr_period(ts, requested_period);
  const long blocks = (n_steps + qr_period - 1) / qr_period;
  const long per_batch = std::max<long>(1, (blocks + kMaxBatches - 1) / kMaxBatches);

  Matrix<Scalar> Q = Matrix<Scalar>::Identity(N, N);
  total = RealVector::Zero(N);
  std::vector<RealVector> batches;
  RealVector batch = RealVector::Zero(N);
  long in_batch = 0;
  long batch_steps = 0;

  for (long j = 0; j < n_steps; ++j) {
    Q = ts.step(j) * Q;
    ++batch_steps;
    const bool last = j + 1 == n_steps;
    if ((j + 1) % qr_period != 0 && !last) continue;
    if (!Q.allFinite()) {
      throw OverflowError("transfer product overflowed before re-orthogonalization at step " + std::to_string(j));
    }
    Eigen::HouseholderQR<Matrix<Scalar>> qr(Q);
    const Matrix<Scalar> R = qr.matrixQR().template triangularView<Eigen::Upper>();
    Q = qr.householderQ() * Matrix<Scalar>::Identity(N, N);
    for (int i = 0; i < N; ++i) {
      const double r = std::abs(R(i, i));
      if (!(r > 0.0) || !std::isfinite(r)) {
        throw OverflowError("degenerate R factor at step " + std::to_string(j));
      }
      const double lr = std::log(r);
      total(i) += lr;
      batch(i) += lr;
    }
    if (++in_batch == per_batch || last) {
      batches.push_back(batch / static_cast<double>(batch_steps));
      batch.setZero();
      in_batch = 0;
      batch_steps = 0;
    }
  }
  return batches;
}

}  // namespace detail

/// Exponents from periodic QR re-orthogonalization of the leftward product,
/// filtration from the QR frame of the adjoint product swept back to the reference.
template <ChiralScalar Scalar>
LyapunovSpectrum<Scalar> lyapunov_spectrum(const TransferSequence<Scalar>& ts, long n_steps,
                                           int qr_period = kDefaultQrPeriod, bool with_filtration = true) {
  if (ts.size() == 0) throw ModelError("empty transfer sequence");
  if (n_steps < 1) throw ModelError("lyapunov run needs at least one step");
  if (qr_period < 1) throw ModelError("qr_period must be at least 1");
  const int N = ts.channels;

  RealVector total;
  const std::vector<RealVector> batches = detail::qr_batches(ts, n_steps, qr_period, total);
  const RealVector raw = total / static_cast<double>(n_steps);
  RealVector raw_err(N);
  const auto B = static_cast<double>(batches.size());
  for (int i = 0; i < N; ++i) {
    if (batches.size() < 2) {
      raw_err(i) = std::numeric_limits<double>::infinity();
      continue;
    }
    double mean = 0.0;
    for (const auto& b : batches) mean += b(i);
    mean /= B;
    double ss = 0.0;
    for (const auto& b : batches) ss += (b(i) - mean) * (b(i) - mean);
    raw_err(i) = std::sqrt(ss / (B - 1.0)) / std::sqrt(B);
  }

  std::vector<int> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return raw(x) > raw(y); });

  LyapunovSpectrum<Scalar> out;
  out.steps_used = n_steps;
  out.exponents.resize(N);
  out.errors.resize(N);
  for (int i = 0; i < N; ++i) {
    out.exponents(i) = raw(order[static_cast<std::size_t>(i)]);
    out.errors(i) = raw_err(order[static_cast<std::size_t>(i)]);
  }
  Eigen::Index imin = 0;
  out.zero_margin = out.exponents.cwiseAbs().minCoeff(&imin);
  out.zero_margin_error = out.errors(imin);

  if (with_filtration) {
    // Q of the QR of T(n)* has its leading columns along the fastest directions.
    const int period = detail::safe_qr_period(ts, qr_period);
    Matrix<Scalar> Q = Matrix<Scalar>::Identity(N, N);
    for (long j = n_steps - 1; j >= 0; --j) {
      Q = ts.step(j).adjoint() * Q;
      if (j % period == 0) {
        if (!Q.allFinite()) throw OverflowError("adjoint product overflowed at step " + std::to_string(j));
        Eigen::HouseholderQR<Matrix<Scalar>> qr(Q);
        Q = qr.householderQ() * Matrix<Scalar>::Identity(N, N);
      }
    }
    out.filtration.reserve(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) out.filtration.push_back(Q.rightCols(N - i));
  }
  return out;
}

struct NegativeCount {
  int count = 0;
  bool confident = false;
};

/// Number of negative exponents; confident when the smallest |chi| exceeds three error bars.
template <ChiralScalar Scalar>
NegativeCount negative_count(const LyapunovSpectrum<Scalar>& spec) {
  NegativeCount out;
  for (Eigen::Index i = 0; i < spec.exponents.size(); ++i) {
    if (spec.exponents(i) < 0.0) ++out.count;
  }
  out.confident = spec.zero_margin > 3.0 * spec.zero_margin_error;
  return out;
}

/// T -> (T*)^{-1}, the transfer matrices of the dual recursion.
template <ChiralScalar Scalar>
TransferSequence<Scalar> dual_sequence(const TransferSequence<Scalar>& ts) {
  TransferSequence<Scalar> out;
  out.reference_site = ts.reference_site;
  out.channels = ts.channels;
  out.T.reserve(ts.T.size());
  for (const auto& T : ts.T) {
    Matrix<Scalar> Ta = T.adjoint();
    auto lu = Ta.fullPivLu();
    if (!lu.isInvertible()) throw ModelError("transfer matrix is not invertible; B must be invertible for the dual");
    out.T.push_back(lu.inverse());
  }
  return out;
}

template <ChiralScalar Scalar>
LyapunovSpectrum<Scalar> dual_spectrum(const TransferSequence<Scalar>& ts, long n_steps,
                                       int qr_period = kDefaultQrPeriod, bool with_filtration = true) {
  return lyapunov_spectrum(dual_sequence(ts), n_steps, qr_period, with_filtration);
}

// ---------------------------------------------------------------------------
// Finite-n Oseledets approximant
// ---------------------------------------------------------------------------

template <ChiralScalar Scalar>
struct OseledetsApproximant {
  Matrix<Scalar> matrix;  // (T(n)* T(n))^{1/2n}
  RealVector log_eigenvalues;  // descending
  Matrix<Scalar> eigenvectors; // columns match log_eigenvalues
};

inline constexpr int kNaiveOseledetsMax = 200;

/// (T(n)* T(n))^{1/2n}. Up to 200 steps the product is formed explicitly; longer
/// runs keep T(n) = U diag(e^l) V* and refresh it by QR plus per-cluster SVDs.
template <ChiralScalar Scalar>
OseledetsApproximant<Scalar> oseledets_matrix(const TransferSequence<Scalar>& ts, long n, bool log_domain = false) {
  if (n < 1) throw ModelError("oseledets_matrix needs n >= 1");
  const int N = ts.channels;
  RealVector l;
  Matrix<Scalar> V;
  if (!log_domain && n <= kNaiveOseledetsMax) {
    Matrix<Scalar> P = Matrix<Scalar>::Identity(N, N);
    for (long j = 0; j < n; ++j) P = ts.step(j) * P;
    if (!P.allFinite()) {
      throw OverflowError("explicit transfer product overflowed at n = " + std::to_string(n) +
                          "; use the log-domain mode");
    }
    Eigen::JacobiSVD<Matrix<Scalar>> svd(P, Eigen::ComputeFullV);
    l = svd.singularValues().array().log();
    if (!l.allFinite()) {
      throw OverflowError("transfer product underflowed at n = " + std::to_string(n) + "; use the log-domain mode");
    }
    V = svd.matrixV();
  } else {
    constexpr double kClusterGap = 18.0;  // nats; beyond this cross terms are below round-off
    Matrix<Scalar> U = Matrix<Scalar>::Identity(N, N);
    V = Matrix<Scalar>::Identity(N, N);
    l = RealVector::Zero(N);
    for (long j = 0; j < n; ++j) {
      Eigen::HouseholderQR<Matrix<Scalar>> qr(ts.step(j) * U);
      const Matrix<Scalar> Q = qr.householderQ() * Matrix<Scalar>::Identity(N, N);
      const Matrix<Scalar> R = qr.matrixQR().template triangularView<Eigen::Upper>();
      // l is kept descending; clusters are maximal runs without a large gap.
      Matrix<Scalar> Wc = Matrix<Scalar>::Identity(N, N);
      Matrix<Scalar> Zc = Matrix<Scalar>::Identity(N, N);
      RealVector lnew(N);
      int start = 0;
      while (start < N) {
        int end = start + 1;
        while (end < N && l(end - 1) - l(end) < kClusterGap) ++end;
        const int m = end - start;
        const double lp = l(start);
        Matrix<Scalar> blk = R.block(start, start, m, m);
        for (int c = 0; c < m; ++c) blk.col(c) *= std::exp(l(start + c) - lp);
        Eigen::JacobiSVD<Matrix<Scalar>> svd(blk, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Wc.block(start, start, m, m) = svd.matrixU();
        Zc.block(start, start, m, m) = svd.matrixV();
        for (int c = 0; c < m; ++c) lnew(start + c) = std::log(svd.singularValues()(c)) + lp;
        start = end;
      }
      U = Q * Wc;
      V = V * Zc;
      // Re-sort in case clusters crossed.
      std::vector<int> order(static_cast<std::size_t>(N));
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return lnew(x) > lnew(y); });
      Matrix<Scalar> U2(N, N), V2(N, N);
      for (int c = 0; c < N; ++c) {
        const int src = order[static_cast<std::size_t>(c)];
        l(c) = lnew(src);
        U2.col(c) = U.col(src);
        V2.col(c) = V.col(src);
      }
      U = U2;
      V = V2;
      if (!l.allFinite()) throw OverflowError("log-domain accumulation failed at step " + std::to_string(j));
    }
  }
  OseledetsApproximant<Scalar> out;
  out.log_eigenvalues = l / static_cast<double>(n);
  out.eigenvectors = V;
  out.matrix = V * out.log_eigenvalues.array().exp().matrix().template cast<Scalar>().asDiagonal() * V.adjoint();
  return out;
}

// ---------------------------------------------------------------------------
// Energy-resolved exponents
// ---------------------------------------------------------------------------

/// 2N x 2N matrix taking w_n = (psi+_n, A_{n+1}* psi-_{n+1}) to w_{n-1} for (H - lambda) psi = 0.
/// At lambda = 0 it is diag(T_n, (T_n*)^{-1}).
template <ChiralScalar Scalar>
Matrix<Scalar> energy_transfer_matrix(const Matrix<Scalar>& A, const Matrix<Scalar>& B, double lambda) {
  const Eigen::Index N = A.rows();
  const Matrix<Scalar> Bia = B.adjoint().partialPivLu().inverse();  // B^{-*}
  const auto luA = A.partialPivLu();
  const Matrix<Scalar> Aa = A.adjoint();
  Matrix<Scalar> M(2 * N, 2 * N);
  M.topLeftCorner(N, N) = luA.solve(Matrix<Scalar>(lambda * lambda * Bia - B));
  M.topRightCorner(N, N) = luA.solve(Matrix<Scalar>(-lambda * Bia));
  M.bottomLeftCorner(N, N) = lambda * Aa * Bia;
  M.bottomRightCorner(N, N) = -Aa * Bia;
  return M;
}

/// 2N exponents of the zero-energy-shifted recursion; symmetric under sign flip.
template <ChiralScalar Scalar>
LyapunovSpectrum<Scalar> energy_resolved_spectrum(const HoppingChain<Scalar>& chain, double lambda, long n_steps,
                                                  int qr_period = kDefaultQrPeriod,
                                                  double kappa_max = kDefaultKappaMax) {
  chain.validate(kappa_max);
  TransferSequence<Scalar> ts;
  ts.reference_site = chain.n_max;
  ts.channels = 2 * chain.channels;
  ts.T.reserve(static_cast<std::size_t>(chain.length()));
  for (int n = chain.n_max; n >= chain.n_min; --n) ts.T.push_back(energy_transfer_matrix(chain.a(n), chain.b(n), lambda));
  return lyapunov_spectrum(ts, n_steps, qr_period, false);
}

}  // namespace chiralind
