// Bulk, edge and translation-invariant indices of chiral chains.
//
// On a finite window the full traces of commutators with a switch function
// vanish identically, so bulk formulas are evaluated as local traces over a
// TraceRegion around the step (see SwitchFunction::default_region). Bulk
// windows are normally closed into a ring so that no cut produces edge modes.
#pragma once

#include "chiralind/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <cstdio>
#include <map>
#include <numbers>
#include <optional>
#include <string>

namespace chiralind {

inline constexpr double kDefaultRoundingThreshold = 0.05;
inline constexpr double kDefaultPolarDelta = 1e-8;
inline constexpr double kDefaultDecayFactor = 10.0;

struct IndexReport {
  double bulk_raw = 0.0;
  int bulk = 0;
  double bulk_residual = 0.0;
  int edge = 0;
  double edge_window_raw = 0.0;
  std::optional<int> lyapunov_count;
  std::optional<int> winding;
  bool agree = false;
  std::map<std::string, double> diagnostics;
};

/// S(z) = sum_m S_m z^{-m} with finite support.
struct BlochSymbol {
  std::map<int, ComplexMatrix> coefficients;

  static BlochSymbol nearest_neighbor(const ComplexMatrix& A, const ComplexMatrix& B) {
    BlochSymbol s;
    s.coefficients[1] = A;
    s.coefficients[0] = B;
    return s;
  }
  template <ChiralScalar Scalar>
  static BlochSymbol nearest_neighbor(const Matrix<Scalar>& A, const Matrix<Scalar>& B) {
    return nearest_neighbor(ComplexMatrix(A.template cast<Complex>()), ComplexMatrix(B.template cast<Complex>()));
  }

  int channels() const {
    if (coefficients.empty()) throw ModelError("Bloch symbol has no coefficients");
    return static_cast<int>(coefficients.begin()->second.rows());
  }
  ComplexMatrix at(Complex z) const {
    const int N = channels();
    ComplexMatrix out = ComplexMatrix::Zero(N, N);
    for (const auto& [m, Sm] : coefficients) out += Sm * std::pow(z, -m);
    return out;
  }
  double coefficient_norm() const {
    double total = 0.0;
    for (const auto& [m, Sm] : coefficients) total += Sm.norm();
    return total;
  }
};

namespace detail {

/// Sum over rows i in `region` of sum_k (lam_k - lam_i) w_i X_ik conj(Y_ik).
/// With Hermitian X, Y this is sum_i w_i (X [Lambda, Y])_ii restricted to the region.
template <ChiralScalar Scalar>
double local_commutator_trace(const Matrix<Scalar>& X_rows, const Matrix<Scalar>& Y_rows, int row_first,
                              const RealVector& lam, const RealVector* weights) {
  double total = 0.0;
  for (Eigen::Index r = 0; r < X_rows.rows(); ++r) {
    const Eigen::Index i = row_first + r;
    double row = 0.0;
    for (Eigen::Index k = 0; k < X_rows.cols(); ++k) {
      const double d = lam(k) - lam(i);
      if (d == 0.0) continue;
      row += d * real_part(X_rows(r, k) * conj_of(Y_rows(r, k)));
    }
    total += weights ? (*weights)(i) * row : row;
  }
  return total;
}

inline void check_region(const TraceRegion& region, const BasisMap& basis) {
  if (region.sites() <= 0 || region.first < basis.n_min || region.last > basis.n_max()) {
    throw ModelError("trace region [" + std::to_string(region.first) + ", " + std::to_string(region.last) +
                     "] is not inside the window");
  }
}

inline std::string fmt_sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", std::abs(x));
  return buf;
}

inline constexpr double kSignResolution = 1e4;  // in units of eps_mach * ||H||

/// Throws when a mode too close to zero for its sign to be resolved carries more
/// than 1% of its weight inside the region. Near-zero modes above that floor are
/// assigned by sign: the chiral pairing (v, +-w) is accurate to eps ||S|| / s.
template <ChiralScalar Scalar>
void check_zero_modes_outside(const SpectralData<Scalar>& sd, const BasisMap& basis, const TraceRegion& region) {
  const int d2 = 2 * basis.channels;
  const int first = (region.first - basis.n_min) * d2;
  const int rows = region.sites() * d2;
  const double floor = std::min(sd.eps_zero, kSignResolution * std::numeric_limits<double>::epsilon() *
                                                 std::max(1.0, sd.spectral_norm()));
  for (int i = 0; i < sd.dim(); ++i) {
    const double lam = sd.eigenvalues(i);
    if (std::abs(lam) >= floor) continue;
    const double w = sd.eigenvectors.col(i).segment(first, rows).squaredNorm();
    if (w > 0.01) {
      throw AssumptionViolation("unresolved zero mode (|lambda| = " + fmt_sci(lam) + ") carries weight " +
                                std::to_string(w) + " inside the trace region");
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Bulk index under a mobility gap
// ---------------------------------------------------------------------------

/// 1/2 tr(Pi Sigma [Lambda, Sigma]) over the trace region, Sigma = sgn H.
template <ChiralScalar Scalar>
double bulk_index_sigma(const SpectralData<Scalar>& sd, const RealVector& pi, const SwitchFunction& lambda,
                        const BasisMap& basis, std::optional<TraceRegion> region = std::nullopt) {
  const TraceRegion R = region.value_or(lambda.default_region());
  detail::check_region(R, basis);
  detail::check_zero_modes_outside(sd, basis, R);
  const int d2 = 2 * basis.channels;
  const int first = (R.first - basis.n_min) * d2;
  const int rows = R.sites() * d2;

  Matrix<Scalar> sigma_rows(rows, sd.dim());
  sigma_rows.noalias() = sd.eigenvectors.middleRows(first, rows) * sd.branch.template cast<Scalar>().asDiagonal() *
                         sd.eigenvectors.adjoint();
  const RealVector lam = lambda.lifted(basis);
  return 0.5 * detail::local_commutator_trace(sigma_rows, sigma_rows, first, lam, &pi);
}

/// -tr(Pi P+ [Lambda, P-]) - tr(Pi P- [Lambda, P+]) over the trace region.
template <ChiralScalar Scalar>
double bulk_index_fermi(const SpectralData<Scalar>& sd, const RealVector& pi, const SwitchFunction& lambda,
                        const BasisMap& basis, std::optional<TraceRegion> region = std::nullopt) {
  const TraceRegion R = region.value_or(lambda.default_region());
  detail::check_region(R, basis);
  detail::check_zero_modes_outside(sd, basis, R);
  const int d2 = 2 * basis.channels;
  const int first = (R.first - basis.n_min) * d2;
  const int rows = R.sites() * d2;

  const Matrix<Scalar> Pm = projector_rows(sd, fermi_modes(sd, FermiSide::below, ZeroModePolicy::assign_by_sign),
                                           first, rows);
  const Matrix<Scalar> Pp = projector_rows(sd, fermi_modes(sd, FermiSide::above, ZeroModePolicy::assign_by_sign),
                                           first, rows);
  const RealVector lam = lambda.lifted(basis);
  return -detail::local_commutator_trace(Pp, Pm, first, lam, &pi) -
         detail::local_commutator_trace(Pm, Pp, first, lam, &pi);
}

// ---------------------------------------------------------------------------
// Edge index
// ---------------------------------------------------------------------------

struct EdgeWindowResult {
  double raw = 0.0;
  int rounded = 0;
  int zero_rank = 0;
  double gap_ratio = 0.0;
  bool separated = true;
  bool converged = true;  // |raw - rounded| <= 0.1
  double eps_used = 0.0;
};

/// tr(Pi Lambda_a P_0) on a half-line window; Lambda_a vanishes near the far cut.
template <ChiralScalar Scalar>
EdgeWindowResult edge_index_window(const SpectralData<Scalar>& sd_edge, const RealVector& pi,
                                   const SwitchFunction& lambda_a, const BasisMap& basis, double eps_zero) {
  const ZeroProjection<Scalar> zp = zero_projection(sd_edge, eps_zero);
  const RealVector lam = lambda_a.lifted(basis);
  double raw = 0.0;
  for (int j = 0; j < zp.rank; ++j) {
    for (Eigen::Index i = 0; i < zp.modes.rows(); ++i) raw += pi(i) * lam(i) * std::norm(Complex(zp.modes(i, j)));
  }
  EdgeWindowResult out;
  out.raw = raw;
  out.rounded = nearest_int(raw);
  out.zero_rank = zp.rank;
  out.gap_ratio = zp.gap_ratio;
  out.separated = zp.separated;
  out.converged = std::abs(raw - out.rounded) <= 0.1;
  out.eps_used = eps_zero;
  return out;
}

/// Number of decaying (toward the left) kernel directions of the recursion matrix
/// on [b, a]; `channels` is N and the kernel must be exactly N-dimensional.
template <ChiralScalar Scalar>
int edge_index_kernel_svd(const Matrix<Scalar>& S_rect, int channels, double eps_sv = 1e-10,
                          double rho = kDefaultDecayFactor) {
  const int N = channels;
  const Eigen::Index cols = S_rect.cols();
  if (N <= 0 || cols % N != 0 || S_rect.rows() != cols - N) {
    throw ModelError("kernel index needs an N(L-1) x NL recursion matrix");
  }
  const int L = static_cast<int>(cols / N);
  Eigen::BDCSVD<Matrix<Scalar>> svd(S_rect, Eigen::ComputeFullV);
  const RealVector& s = svd.singularValues();
  const double scale = s.size() ? s(0) : 0.0;
  if (s.size() && s(s.size() - 1) < eps_sv * std::max(1.0, scale)) {
    throw AssumptionViolation("recursion matrix has kernel dimension above N (smallest singular value " +
                              std::to_string(s(s.size() - 1)) + ")");
  }
  Matrix<Scalar> K = svd.matrixV().rightCols(N);

  const int block = std::max(1, L / 10);
  // Rotate so the left-block components are orthogonal; decaying directions then separate.
  Eigen::JacobiSVD<Matrix<Scalar>> rot(K.topRows(block * N), Eigen::ComputeFullV);
  K = K * rot.matrixV();

  int decaying = 0;
  for (int j = 0; j < N; ++j) {
    const double left = K.col(j).head(block * N).norm();
    const double right = K.col(j).tail(block * N).norm();
    const double ratio = left > 0.0 ? right / left : std::numeric_limits<double>::infinity();
    if (ratio >= rho) {
      ++decaying;
    } else if (ratio > 1.0 / rho) {
      throw Undecidable("kernel vector " + std::to_string(j) + " has right/left norm ratio " + std::to_string(ratio) +
                        ", inside [1/rho, rho]");
    }
  }
  return decaying;
}

// ---------------------------------------------------------------------------
// Spectral-gap forms
// ---------------------------------------------------------------------------

/// Unitary factor U = S (S*S)^{-1/2} = W V* of the polar decomposition.
template <ChiralScalar Scalar>
Matrix<Scalar> polar_unitary(const Matrix<Scalar>& S, double delta = kDefaultPolarDelta) {
  if (S.rows() != S.cols()) throw ModelError("polar decomposition needs a square S");
  Eigen::BDCSVD<Matrix<Scalar>> svd(S, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const RealVector& s = svd.singularValues();
  if (s.size() == 0) throw ModelError("empty S");
  if (!(s(s.size() - 1) > delta)) {
    throw GapClosed("smallest singular value of S is " + std::to_string(s(s.size() - 1)) + " <= delta = " +
                    std::to_string(delta) + "; the polar form needs a spectral gap");
  }
  return svd.matrixU() * svd.matrixV().adjoint();
}

/// tr U*[Lambda, U] over the trace region, U the polar factor of S (S-space basis).
template <ChiralScalar Scalar>
double bulk_index_polar(const Matrix<Scalar>& S, const SwitchFunction& lambda, const BasisMap& basis,
                        std::optional<TraceRegion> region = std::nullopt, double delta = kDefaultPolarDelta) {
  if (S.rows() != basis.k_dim()) throw ModelError("S does not match the basis");
  const Matrix<Scalar> U = polar_unitary(S, delta);
  const TraceRegion R = region.value_or(lambda.default_region());
  detail::check_region(R, basis);
  const RealVector lam = lambda.lifted(basis, false);
  const int N = basis.channels;
  double total = 0.0;
  for (int i = (R.first - basis.n_min) * N; i < (R.last - basis.n_min + 1) * N; ++i) {
    for (Eigen::Index k = 0; k < U.rows(); ++k) total += (lam(k) - lam(i)) * std::norm(Complex(U(k, i)));
  }
  return total;
}

/// -tr(U* chi_a U - chi_a) over the trace region, chi_a the projection onto sites <= a.
template <ChiralScalar Scalar>
double bulk_index_proj_pair(const Matrix<Scalar>& U, int a, const BasisMap& basis,
                            std::optional<TraceRegion> region = std::nullopt) {
  if (U.rows() != basis.k_dim() || U.cols() != basis.k_dim()) throw ModelError("U does not match the basis");
  const double unitarity = max_abs(U.adjoint() * U - Matrix<Scalar>::Identity(U.rows(), U.cols()));
  if (unitarity > 1e-10) throw ModelError("U is not unitary (residual " + std::to_string(unitarity) + ")");
  const TraceRegion R =
      region.value_or(SwitchFunction::sharp(basis.n_min, basis.n_max(), a + 1).default_region());
  detail::check_region(R, basis);
  const int N = basis.channels;
  double total = 0.0;
  for (int i = (R.first - basis.n_min) * N; i < (R.last - basis.n_min + 1) * N; ++i) {
    double diag = 0.0;  // (U* chi_a U)_ii
    for (Eigen::Index k = 0; k < U.rows(); ++k) {
      if (basis.k_site_of(static_cast<int>(k)) <= a) diag += std::norm(Complex(U(k, i)));
    }
    const double chi = basis.k_site_of(i) <= a ? 1.0 : 0.0;
    total -= diag - chi;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Translation-invariant indices
// ---------------------------------------------------------------------------

struct WindingResult {
  int index = 0;           // minus the winding of det S(z)
  double winding = 0.0;    // accumulated argument / 2 pi
  double residual = 0.0;   // |winding - round(winding)|
  int samples = 0;
  double min_abs_det = 0.0;
};

/// Winding of z -> det S(z) around |z| = 1 by phase-increment summation.
inline WindingResult winding_number(const BlochSymbol& sym, int n_samples = 64, int max_samples = 1 << 20) {
  const int N = sym.channels();
  const double threshold = 1e-13 * std::pow(std::max(1.0, sym.coefficient_norm()), N);
  int n = std::max(8, n_samples);
  for (;;) {
    WindingResult out;
    out.samples = n;
    out.min_abs_det = std::numeric_limits<double>::infinity();
    double total = 0.0;
    bool fine = true;
    const Complex d0 = sym.at(Complex(1.0, 0.0)).determinant();
    Complex prev = d0;
    for (int j = 1; j <= n; ++j) {
      const double theta = 2.0 * std::numbers::pi * j / n;
      const Complex d = j == n ? d0 : sym.at(std::polar(1.0, theta)).determinant();
      out.min_abs_det = std::min(out.min_abs_det, std::abs(d));
      if (std::abs(d) < threshold) {
        throw GapClosed("det S(z) = " + std::to_string(std::abs(d)) + " nearly vanishes at arg z = " +
                        std::to_string(theta));
      }
      const double step = std::arg(d / prev);
      if (std::abs(step) >= std::numbers::pi / 2) fine = false;
      total += step;
      prev = d;
    }
    if (fine || n >= max_samples) {
      if (!fine) throw SolverError("winding: phase increments did not resolve at " + std::to_string(n) + " samples");
      out.winding = total / (2.0 * std::numbers::pi);
      out.index = -nearest_int(out.winding);
      out.residual = std::abs(out.winding - std::round(out.winding));
      return out;
    }
    n *= 2;
  }
}

/// Number of eigenvalues of T = -A^{-1} B strictly inside the unit disk.
template <ChiralScalar Scalar>
int ti_index_eigencount(const Matrix<Scalar>& A, const Matrix<Scalar>& B, double kappa_max = kDefaultKappaMax) {
  if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows()) {
    throw ModelError("eigencount needs square A, B of equal size");
  }
  const double kappa = condition_number(A);
  if (!(kappa <= kappa_max)) throw ModelError("A is singular or ill-conditioned (cond " + std::to_string(kappa) + ")");
  const ComplexMatrix T = -(A.template cast<Complex>().partialPivLu().solve(B.template cast<Complex>()));
  Eigen::ComplexEigenSolver<ComplexMatrix> es(T, false);
  if (es.info() != Eigen::Success) throw SolverError("eigensolver failed for T = -A^-1 B");
  int inside = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double m = std::abs(es.eigenvalues()(i));
    if (std::abs(m - 1.0) < 1e-9) {
      throw GapClosed("T has an eigenvalue of modulus " + std::to_string(m) + " on the unit circle");
    }
    if (m < 1.0) ++inside;
  }
  return inside;
}

}  // namespace chiralind
