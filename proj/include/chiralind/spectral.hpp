// Hermitian eigendecomposition of chiral operators and the spectral objects
// derived from it: Fermi projections, sign operator, zero-mode projection and
// the kernel decay diagnostic of the Fermi projection.
#pragma once

#include "chiralind/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

namespace chiralind {

inline constexpr double kDefaultEpsZero = 1e-8;

template <ChiralScalar Scalar>
struct SpectralData {
  RealVector eigenvalues;         // ascending
  Matrix<Scalar> eigenvectors;    // columns, unitary
  RealVector branch;              // +-1: sign used when near-zero modes are assigned by sign
  double eps_zero = kDefaultEpsZero;

  int dim() const { return static_cast<int>(eigenvalues.size()); }
  double spectral_norm() const {
    return dim() == 0 ? 0.0 : std::max(std::abs(eigenvalues(0)), std::abs(eigenvalues(dim() - 1)));
  }
  double min_abs_eigenvalue() const {
    return dim() == 0 ? 0.0 : eigenvalues.cwiseAbs().minCoeff();
  }

  /// max_i ||H v_i - lambda_i v_i||.
  double max_residual(const Matrix<Scalar>& H) const {
    Matrix<Scalar> r = H * eigenvectors - eigenvectors * eigenvalues.template cast<Scalar>().asDiagonal();
    return r.colwise().norm().maxCoeff();
  }
  double unitarity_residual() const {
    return max_abs(eigenvectors.adjoint() * eigenvectors -
                   Matrix<Scalar>::Identity(dim(), dim()));
  }
};

namespace detail {

/// First component above a relative threshold is made real positive.
template <ChiralScalar Scalar>
void fix_phases(Matrix<Scalar>& vecs) {
  for (Eigen::Index j = 0; j < vecs.cols(); ++j) {
    auto col = vecs.col(j);
    const double scale = col.cwiseAbs().maxCoeff();
    if (!(scale > 0.0)) continue;
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      const double mag = std::abs(col(i));
      if (mag > 1e-12 * scale) {
        col *= conj_of(col(i)) / mag;
        if constexpr (is_complex<Scalar>::value) col(i) = Scalar(mag, 0.0);
        break;
      }
    }
  }
}

}  // namespace detail

/// Full eigendecomposition of H through the singular value decomposition of S:
/// for S = W diag(s) V*, the eigenpairs are (+-s_i, (v_i, +-w_i) / sqrt 2).
/// Exact zero singular values still yield chiral pairs, so Pi maps the
/// branch +1 eigenvectors onto the branch -1 ones.
template <ChiralScalar Scalar>
SpectralData<Scalar> diagonalize(const ChiralOperator<Scalar>& op, double eps_zero = kDefaultEpsZero) {
  const BasisMap& basis = op.basis;
  const int N = basis.channels;
  const int k = basis.k_dim();
  if (op.S.rows() != k || op.S.cols() != k) throw SolverError("diagonalize: S does not match basis");
  if (!op.S.allFinite()) throw SolverError("diagonalize: S has non-finite entries");

  Eigen::BDCSVD<Matrix<Scalar>> svd(op.S, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "singular value decomposition failed (size " << k << ", max|S| = " << max_abs(op.S) << ")";
    throw SolverError(msg.str());
  }
  const RealVector& s = svd.singularValues();  // descending
  const Matrix<Scalar>& W = svd.matrixU();     // (-) sector
  const Matrix<Scalar>& V = svd.matrixV();     // (+) sector

  SpectralData<Scalar> sd;
  sd.eps_zero = eps_zero;
  sd.eigenvalues.resize(2 * k);
  sd.branch.resize(2 * k);
  sd.eigenvectors = Matrix<Scalar>::Zero(basis.dim(), 2 * k);
  const double r = 1.0 / std::sqrt(2.0);

  // Negative branch in order -s_0 <= ... <= -s_{k-1}, then +s_{k-1} <= ... <= +s_0.
  for (int j = 0; j < k; ++j) {
    const int neg = j;
    const int pos = 2 * k - 1 - j;
    sd.eigenvalues(neg) = -s(j);
    sd.eigenvalues(pos) = s(j);
    sd.branch(neg) = -1.0;
    sd.branch(pos) = 1.0;
    for (int site = 0; site < basis.sites; ++site) {
      const int plus = site * 2 * N;
      const int minus = plus + N;
      sd.eigenvectors.col(neg).segment(plus, N) = r * V.col(j).segment(site * N, N);
      sd.eigenvectors.col(neg).segment(minus, N) = -r * W.col(j).segment(site * N, N);
      sd.eigenvectors.col(pos).segment(plus, N) = r * V.col(j).segment(site * N, N);
      sd.eigenvectors.col(pos).segment(minus, N) = r * W.col(j).segment(site * N, N);
    }
  }
  detail::fix_phases(sd.eigenvectors);
  return sd;
}

/// Generic dense Hermitian eigendecomposition; near-zero modes are assigned by the sign of lambda.
template <ChiralScalar Scalar>
SpectralData<Scalar> diagonalize_dense(const Matrix<Scalar>& H, double eps_zero = kDefaultEpsZero) {
  if (H.rows() != H.cols()) throw SolverError("diagonalize_dense: matrix is not square");
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(H);
  if (es.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "Hermitian eigensolver failed (size " << H.rows() << ", max|H| = " << max_abs(H)
        << ", hermiticity residual = " << max_abs(H - H.adjoint()) << ")";
    throw SolverError(msg.str());
  }
  SpectralData<Scalar> sd;
  sd.eps_zero = eps_zero;
  sd.eigenvalues = es.eigenvalues();
  sd.eigenvectors = es.eigenvectors();
  sd.branch.resize(sd.eigenvalues.size());
  for (Eigen::Index i = 0; i < sd.eigenvalues.size(); ++i) sd.branch(i) = sd.eigenvalues(i) < 0.0 ? -1.0 : 1.0;
  detail::fix_phases(sd.eigenvectors);
  return sd;
}

template <ChiralScalar Scalar>
SpectralData<Scalar> diagonalize_dense(const ChiralOperator<Scalar>& op, double eps_zero = kDefaultEpsZero) {
  return diagonalize_dense<Scalar>(op.H, eps_zero);
}

// ---------------------------------------------------------------------------
// Projections
// ---------------------------------------------------------------------------

enum class FermiSide { below, above };

enum class ZeroModePolicy {
  exclude,         // |lambda| < eps_zero belongs to neither side
  assign_by_sign,  // every mode to one side by its branch sign; P- + P+ = 1 exactly
  strict,          // throw if any |lambda| < eps_zero
};

/// Column indices of the eigenvectors spanning the requested Fermi projection.
template <ChiralScalar Scalar>
std::vector<int> fermi_modes(const SpectralData<Scalar>& sd, FermiSide side,
                             ZeroModePolicy policy = ZeroModePolicy::exclude) {
  if (policy == ZeroModePolicy::strict) {
    std::vector<double> offending;
    for (int i = 0; i < sd.dim(); ++i) {
      if (std::abs(sd.eigenvalues(i)) < sd.eps_zero) offending.push_back(sd.eigenvalues(i));
    }
    if (!offending.empty()) {
      std::ostringstream msg;
      msg << "zero is (numerically) an eigenvalue: " << offending.size() << " eigenvalue(s) with |lambda| < "
          << sd.eps_zero << ":";
      for (double x : offending) msg << ' ' << x;
      throw AssumptionViolation(msg.str());
    }
  }
  std::vector<int> idx;
  for (int i = 0; i < sd.dim(); ++i) {
    const double lam = sd.eigenvalues(i);
    bool take = false;
    if (policy == ZeroModePolicy::assign_by_sign) {
      take = side == FermiSide::below ? sd.branch(i) < 0.0 : sd.branch(i) > 0.0;
    } else {
      take = side == FermiSide::below ? lam < -sd.eps_zero : lam > sd.eps_zero;
    }
    if (take) idx.push_back(i);
  }
  return idx;
}

/// Rows [row_first, row_first + row_count) of the projector onto the given eigenvector columns.
template <ChiralScalar Scalar>
Matrix<Scalar> projector_rows(const SpectralData<Scalar>& sd, const std::vector<int>& modes, int row_first,
                              int row_count) {
  Matrix<Scalar> Vsel(sd.eigenvectors.rows(), static_cast<Eigen::Index>(modes.size()));
  for (std::size_t j = 0; j < modes.size(); ++j) Vsel.col(static_cast<Eigen::Index>(j)) = sd.eigenvectors.col(modes[j]);
  Matrix<Scalar> out(row_count, sd.eigenvectors.rows());
  out.noalias() = Vsel.middleRows(row_first, row_count) * Vsel.adjoint();
  return out;
}

template <ChiralScalar Scalar>
Matrix<Scalar> fermi_projection(const SpectralData<Scalar>& sd, FermiSide side,
                                ZeroModePolicy policy = ZeroModePolicy::exclude) {
  return projector_rows(sd, fermi_modes(sd, side, policy), 0, sd.dim());
}

/// Sigma = sgn H = P+ - P- with near-zero modes assigned by sign.
template <ChiralScalar Scalar>
Matrix<Scalar> sign_operator(const SpectralData<Scalar>& sd) {
  return sd.eigenvectors * sd.branch.template cast<Scalar>().asDiagonal() * sd.eigenvectors.adjoint();
}

template <ChiralScalar Scalar>
struct ZeroProjection {
  Matrix<Scalar> P;
  Matrix<Scalar> modes;   // orthonormal columns spanning im P
  int rank = 0;
  double eps_used = 0.0;
  double gap_ratio = std::numeric_limits<double>::infinity();  // first excluded / last included |lambda|
  bool separated = true;  // gap_ratio >= 10
};

inline constexpr double kZeroClusterMinRatio = 10.0;

/// Projection onto the eigenvectors with |lambda| < eps_zero.
template <ChiralScalar Scalar>
ZeroProjection<Scalar> zero_projection(const SpectralData<Scalar>& sd, double eps_zero) {
  std::vector<int> idx;
  double last_in = 0.0;
  double first_out = std::numeric_limits<double>::infinity();
  for (int i = 0; i < sd.dim(); ++i) {
    const double mag = std::abs(sd.eigenvalues(i));
    if (mag < eps_zero) {
      idx.push_back(i);
      last_in = std::max(last_in, mag);
    } else {
      first_out = std::min(first_out, mag);
    }
  }
  ZeroProjection<Scalar> zp;
  zp.rank = static_cast<int>(idx.size());
  zp.eps_used = eps_zero;
  zp.modes.resize(sd.eigenvectors.rows(), zp.rank);
  for (int j = 0; j < zp.rank; ++j) zp.modes.col(j) = sd.eigenvectors.col(idx[static_cast<std::size_t>(j)]);
  zp.P = zp.modes * zp.modes.adjoint();
  // Exact zeros are measured against the round-off floor so the ratio stays finite.
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, sd.spectral_norm());
  const double denom = zp.rank == 0 ? eps_zero : std::max(last_in, floor);
  zp.gap_ratio = denom > 0.0 ? first_out / denom : std::numeric_limits<double>::infinity();
  zp.separated = zp.gap_ratio >= kZeroClusterMinRatio;
  return zp;
}

struct AdaptiveEps {
  double eps = 0.0;
  double gap_ratio = 0.0;
  int cluster_size = 0;
};

/// Zero-cluster threshold placed at the largest relative gap among the 4N smallest |lambda|.
/// A non-empty cluster is taken when its gap ratio reaches 10; otherwise the cluster is
/// empty and the cut sits between the round-off floor 64 eps_mach ||H|| and the smallest |lambda|.
template <ChiralScalar Scalar>
AdaptiveEps adaptive_eps_zero(const SpectralData<Scalar>& sd, int channels) {
  std::vector<double> mags(static_cast<std::size_t>(sd.dim()));
  for (int i = 0; i < sd.dim(); ++i) mags[static_cast<std::size_t>(i)] = std::abs(sd.eigenvalues(i));
  std::sort(mags.begin(), mags.end());
  const std::size_t count = std::min(mags.size(), static_cast<std::size_t>(4 * channels));
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, sd.spectral_norm());
  if (count == 0) return {floor, std::numeric_limits<double>::infinity(), 0};

  AdaptiveEps best{0.0, -1.0, 0};
  for (std::size_t k = 1; k < count; ++k) {
    const double below = std::max(mags[k - 1], floor);
    const double ratio = mags[k] / below;
    if (ratio > best.gap_ratio) best = {std::sqrt(below * std::max(mags[k], below)), ratio, static_cast<int>(k)};
  }
  if (best.gap_ratio < kZeroClusterMinRatio) {
    best = {std::sqrt(floor * std::max(mags[0], floor)), mags[0] / floor, 0};
  }
  return best;
}

// ---------------------------------------------------------------------------
// Kernel decay
// ---------------------------------------------------------------------------

struct DecayProfile {
  double mu_fit = 0.0;   // +inf when no off-diagonal kernel is present
  double residual = 0.0; // rms of the log-linear fit
  std::vector<double> band_norms;  // index = |n - n'|
  int fit_first = 0;
  int fit_last = -1;
};

/// Mean trace norm of the blocks P(n, n +- d) over the central half of the
/// window, and a log-linear fit of their decay on the upper half of the
/// distances that stay above the round-off floor.
template <ChiralScalar Scalar>
DecayProfile kernel_decay_profile(const Matrix<Scalar>& P, const BasisMap& basis) {
  if (P.rows() != basis.dim() || P.cols() != basis.dim()) throw ModelError("decay profile: P does not match basis");
  const int L = basis.sites;
  const int d2 = 2 * basis.channels;
  const int row_first = L / 4;
  const int row_last = row_first + L / 2 - 1;
  const int dmax = std::min(row_first, L - 1 - row_last);

  DecayProfile out;
  out.band_norms.assign(static_cast<std::size_t>(std::max(dmax, 0) + 1), 0.0);
  const int rows = row_last - row_first + 1;
  for (int d = 0; d <= dmax; ++d) {
    double total = 0.0;
    for (int n = row_first; n <= row_last; ++n) {
      total += trace_norm(P.block(n * d2, (n - d) * d2, d2, d2));
      if (d > 0) total += trace_norm(P.block(n * d2, (n + d) * d2, d2, d2));
    }
    out.band_norms[static_cast<std::size_t>(d)] = total / (d > 0 ? 2.0 * rows : 1.0 * rows);
  }

  const double floor = 1e-12 * std::max(out.band_norms.empty() ? 0.0 : out.band_norms[0], 1e-300);
  int populated = 0;
  while (populated + 1 <= dmax && out.band_norms[static_cast<std::size_t>(populated + 1)] > floor) ++populated;
  if (populated == 0) {
    out.mu_fit = std::numeric_limits<double>::infinity();
    return out;
  }
  if (populated < 5) {
    throw InsufficientData("kernel decay fit needs at least 5 distances above the round-off floor, have " +
                           std::to_string(populated));
  }
  const int count = std::max(5, (populated + 1) / 2);
  out.fit_last = populated;
  out.fit_first = populated - count + 1;

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int d = out.fit_first; d <= out.fit_last; ++d) {
    const double y = std::log(out.band_norms[static_cast<std::size_t>(d)]);
    sx += d;
    sy += y;
    sxx += static_cast<double>(d) * d;
    sxy += d * y;
  }
  const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / count;
  double ss = 0.0;
  for (int d = out.fit_first; d <= out.fit_last; ++d) {
    const double e = std::log(out.band_norms[static_cast<std::size_t>(d)]) - (intercept + slope * d);
    ss += e * e;
  }
  out.mu_fit = -slope;
  out.residual = std::sqrt(ss / count);
  return out;
}

}  // namespace chiralind
