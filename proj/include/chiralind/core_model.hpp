// Finite-volume chiral operators built from sequences of hopping matrices.
//
// The model lives on dimers n = n_min..n_max, each carrying N channels on two
// sublattices. The off-diagonal block S maps the (+) sublattice to the (-)
// sublattice,
//
//     (S psi+)_n = A_n psi+_{n-1} + B_n psi+_n,
//
// and H = [[0, S*], [S, 0]] anticommutes with the grading Pi = diag(+1, -1).
// Flat indices of H are dimer-ordered: (n - n_min) * 2N + sublattice * N + channel,
// with sublattice 0 the (+) component. Indices of S (and of the space S acts on)
// drop the sublattice: (n - n_min) * N + channel.
#pragma once

#include "chiralind/linalg.hpp"

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace chiralind {

inline constexpr double kDefaultKappaMax = 1e8;

template <ChiralScalar Scalar>
struct HoppingChain {
  int n_min = 0;
  int n_max = -1;
  int channels = 1;
  std::vector<Matrix<Scalar>> A;  // A[n - n_min]
  std::vector<Matrix<Scalar>> B;  // B[n - n_min]
  // Site whose matrices may be singular (custom boundary at the right edge).
  std::optional<int> boundary_site;

  int length() const { return n_max - n_min + 1; }
  bool contains(int n) const { return n >= n_min && n <= n_max; }
  const Matrix<Scalar>& a(int n) const { return A[static_cast<std::size_t>(n - n_min)]; }
  const Matrix<Scalar>& b(int n) const { return B[static_cast<std::size_t>(n - n_min)]; }

  /// Throws ModelError if sequence lengths or block shapes are off, or if a
  /// bulk matrix has condition number above `kappa_max`.
  void validate(double kappa_max = kDefaultKappaMax) const {
    if (channels <= 0) throw ModelError("channel count must be positive");
    if (n_max < n_min) throw ModelError("empty chain window");
    const auto len = static_cast<std::size_t>(length());
    if (A.size() != len || B.size() != len) {
      throw ModelError("hopping sequences have " + std::to_string(A.size()) + "/" +
                       std::to_string(B.size()) + " entries, window needs " + std::to_string(len));
    }
    for (int n = n_min; n <= n_max; ++n) {
      for (const auto* m : {&a(n), &b(n)}) {
        if (m->rows() != channels || m->cols() != channels) {
          throw ModelError("hopping matrix at site " + std::to_string(n) + " is not " +
                           std::to_string(channels) + "x" + std::to_string(channels));
        }
      }
      if (boundary_site && *boundary_site == n) continue;
      const double ka = condition_number(a(n));
      const double kb = condition_number(b(n));
      if (!(ka <= kappa_max) || !(kb <= kappa_max)) {
        throw ModelError("hopping matrix at site " + std::to_string(n) +
                         " is singular or ill-conditioned (cond A = " + std::to_string(ka) +
                         ", cond B = " + std::to_string(kb) + ")");
      }
    }
  }
};

/// Translation-invariant chain with the same (A, B) on every site.
template <ChiralScalar Scalar>
HoppingChain<Scalar> constant_chain(const Matrix<Scalar>& A, const Matrix<Scalar>& B, int length,
                                    int n_min = 0) {
  if (length <= 0) throw ModelError("chain length must be positive");
  if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows()) {
    throw ModelError("constant chain needs square A, B of equal size");
  }
  HoppingChain<Scalar> chain;
  chain.n_min = n_min;
  chain.n_max = n_min + length - 1;
  chain.channels = static_cast<int>(A.rows());
  chain.A.assign(static_cast<std::size_t>(length), A);
  chain.B.assign(static_cast<std::size_t>(length), B);
  return chain;
}

/// Scalar (N = 1) convenience overload.
template <ChiralScalar Scalar>
HoppingChain<Scalar> constant_chain(Scalar a, Scalar b, int length, int n_min = 0) {
  return constant_chain<Scalar>(Matrix<Scalar>::Constant(1, 1, a), Matrix<Scalar>::Constant(1, 1, b),
                                length, n_min);
}

enum class BoundaryKind {
  dirichlet_cut,  // hard cut: the window simply ends
  custom,         // replaced A/B at the right boundary site, may be singular
  periodic,       // ring closure, A_{n_min} couples back to n_max (bulk windows)
};

template <ChiralScalar Scalar>
struct BoundarySpec {
  BoundaryKind kind = BoundaryKind::dirichlet_cut;
  std::optional<Matrix<Scalar>> A_boundary;
  std::optional<Matrix<Scalar>> B_boundary;

  static BoundarySpec dirichlet() { return {}; }
  static BoundarySpec periodic() { return {BoundaryKind::periodic, std::nullopt, std::nullopt}; }
  static BoundarySpec custom(std::optional<Matrix<Scalar>> a, std::optional<Matrix<Scalar>> b) {
    return {BoundaryKind::custom, std::move(a), std::move(b)};
  }
};

struct BasisMap {
  int n_min = 0;
  int channels = 1;
  int sites = 0;

  int dim() const { return 2 * channels * sites; }
  int k_dim() const { return channels * sites; }
  int flat(int site, int sublattice, int channel) const {
    return (site - n_min) * 2 * channels + sublattice * channels + channel;
  }
  int k_index(int site, int channel) const { return (site - n_min) * channels + channel; }
  int site_of(int flat_index) const { return n_min + flat_index / (2 * channels); }
  int sublattice_of(int flat_index) const { return (flat_index / channels) % 2; }
  int k_site_of(int k) const { return n_min + k / channels; }
  int n_max() const { return n_min + sites - 1; }
};

template <ChiralScalar Scalar>
BasisMap basis_of(const HoppingChain<Scalar>& chain) {
  return {chain.n_min, chain.channels, chain.length()};
}

template <ChiralScalar Scalar>
struct ChiralOperator {
  Matrix<Scalar> S;
  Matrix<Scalar> H;
  RealVector pi;  // diagonal of the grading, +1 on (+), -1 on (-)
  BasisMap basis;

  double hermiticity_residual() const { return max_abs(H - H.adjoint()); }
  double anticommutator_residual() const {
    return max_abs(H * pi.asDiagonal() + pi.asDiagonal() * H);
  }
};

namespace detail {

template <ChiralScalar Scalar>
void check_boundary_block(const std::optional<Matrix<Scalar>>& m, int channels, const char* name) {
  if (m && (m->rows() != channels || m->cols() != channels)) {
    throw ModelError(std::string("boundary matrix ") + name + " has wrong shape");
  }
}

}  // namespace detail

/// Matrix of S on the chain window, with the boundary closure `bc`.
template <ChiralScalar Scalar>
Matrix<Scalar> build_S(const HoppingChain<Scalar>& chain, const BoundarySpec<Scalar>& bc = {},
                       double kappa_max = kDefaultKappaMax) {
  HoppingChain<Scalar> checked = chain;
  const int N = chain.channels;
  if (bc.kind == BoundaryKind::custom) {
    detail::check_boundary_block(bc.A_boundary, N, "A");
    detail::check_boundary_block(bc.B_boundary, N, "B");
    checked.boundary_site = chain.n_max;
  }
  checked.validate(kappa_max);

  const BasisMap basis = basis_of(chain);
  Matrix<Scalar> S = Matrix<Scalar>::Zero(basis.k_dim(), basis.k_dim());
  for (int n = chain.n_min; n <= chain.n_max; ++n) {
    const bool edge_row = bc.kind == BoundaryKind::custom && n == chain.n_max;
    const Matrix<Scalar>& a = edge_row && bc.A_boundary ? *bc.A_boundary : chain.a(n);
    const Matrix<Scalar>& b = edge_row && bc.B_boundary ? *bc.B_boundary : chain.b(n);
    const int row = basis.k_index(n, 0);
    S.block(row, row, N, N) += b;
    if (n > chain.n_min) {
      S.block(row, basis.k_index(n - 1, 0), N, N) += a;
    } else if (bc.kind == BoundaryKind::periodic) {
      S.block(row, basis.k_index(chain.n_max, 0), N, N) += a;
    }
  }
  return S;
}

/// Recursion matrix of (S psi+)_n = 0 for rows n_min+1..n_max and all columns:
/// no left boundary row, so its kernel has dimension exactly N.
template <ChiralScalar Scalar>
Matrix<Scalar> build_recursion_matrix(const HoppingChain<Scalar>& chain,
                                      double kappa_max = kDefaultKappaMax) {
  chain.validate(kappa_max);
  if (chain.length() < 2) throw ModelError("recursion matrix needs at least two sites");
  const int N = chain.channels;
  const BasisMap basis = basis_of(chain);
  Matrix<Scalar> M = Matrix<Scalar>::Zero(basis.k_dim() - N, basis.k_dim());
  for (int n = chain.n_min + 1; n <= chain.n_max; ++n) {
    const int row = basis.k_index(n, 0) - N;
    M.block(row, basis.k_index(n - 1, 0), N, N) = chain.a(n);
    M.block(row, basis.k_index(n, 0), N, N) = chain.b(n);
  }
  return M;
}

/// H = [[0, S*], [S, 0]] in the dimer-ordered basis.
template <ChiralScalar Scalar>
ChiralOperator<Scalar> build_H(const Matrix<Scalar>& S, const BasisMap& basis) {
  if (S.rows() != S.cols()) throw ModelError("build_H requires a square S");
  if (S.rows() != basis.k_dim()) throw ModelError("S does not match the basis map");
  const int N = basis.channels;
  const int L = basis.sites;
  ChiralOperator<Scalar> op;
  op.S = S;
  op.basis = basis;
  op.H = Matrix<Scalar>::Zero(basis.dim(), basis.dim());
  for (int n = 0; n < L; ++n) {
    for (int m = 0; m < L; ++m) {
      const auto blk = S.block(n * N, m * N, N, N);
      if (blk.isZero(0.0)) continue;
      const int minus_row = basis.flat(basis.n_min + n, 1, 0);
      const int plus_col = basis.flat(basis.n_min + m, 0, 0);
      op.H.block(minus_row, plus_col, N, N) = blk;
      op.H.block(plus_col, minus_row, N, N) = blk.adjoint();
    }
  }
  op.pi.resize(basis.dim());
  for (int i = 0; i < basis.dim(); ++i) op.pi(i) = basis.sublattice_of(i) == 0 ? 1.0 : -1.0;
  return op;
}

/// Overload for a bare S in the single-site-per-channel layout (basis starting at 0).
template <ChiralScalar Scalar>
ChiralOperator<Scalar> build_H(const Matrix<Scalar>& S, int channels = 1) {
  if (S.rows() != S.cols()) throw ModelError("build_H requires a square S");
  if (channels <= 0 || S.rows() % channels != 0) throw ModelError("S size is not a multiple of N");
  return build_H<Scalar>(S, BasisMap{0, channels, static_cast<int>(S.rows()) / channels});
}

template <ChiralScalar Scalar>
ChiralOperator<Scalar> build_operator(const HoppingChain<Scalar>& chain,
                                      const BoundarySpec<Scalar>& bc = {},
                                      double kappa_max = kDefaultKappaMax) {
  return build_H<Scalar>(build_S(chain, bc, kappa_max), basis_of(chain));
}

/// Sub-chain on [n_min, a]. Custom boundary matrices are written into site a,
/// which is then exempt from the invertibility invariant.
template <ChiralScalar Scalar>
HoppingChain<Scalar> truncate(const HoppingChain<Scalar>& chain, int a,
                              const BoundarySpec<Scalar>& bc = {}) {
  if (!chain.contains(a)) {
    throw ModelError("truncation site " + std::to_string(a) + " outside window [" +
                     std::to_string(chain.n_min) + ", " + std::to_string(chain.n_max) + "]");
  }
  if (bc.kind == BoundaryKind::periodic) throw ModelError("a half-line truncation cannot be periodic");
  HoppingChain<Scalar> out;
  out.n_min = chain.n_min;
  out.n_max = a;
  out.channels = chain.channels;
  const auto keep = static_cast<std::size_t>(a - chain.n_min + 1);
  out.A.assign(chain.A.begin(), chain.A.begin() + static_cast<std::ptrdiff_t>(keep));
  out.B.assign(chain.B.begin(), chain.B.begin() + static_cast<std::ptrdiff_t>(keep));
  if (bc.kind == BoundaryKind::custom) {
    detail::check_boundary_block(bc.A_boundary, chain.channels, "A");
    detail::check_boundary_block(bc.B_boundary, chain.channels, "B");
    if (bc.A_boundary) out.A.back() = *bc.A_boundary;
    if (bc.B_boundary) out.B.back() = *bc.B_boundary;
    out.boundary_site = a;
  } else if (chain.boundary_site && *chain.boundary_site <= a) {
    out.boundary_site = chain.boundary_site;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Switch functions
// ---------------------------------------------------------------------------

enum class SwitchProfile { sharp, ramp };

/// Contiguous range of sites [first, last] over which local traces are taken.
struct TraceRegion {
  int first = 0;
  int last = -1;
  bool contains(int n) const { return n >= first && n <= last; }
  int sites() const { return last - first + 1; }
};

/// Monotone step from 0 to 1 on the window [n_min, n_max]. Lambda(n) = 0 for
/// n < step_center; a ramp of `width` sites reaches 1 at step_center + width - 1.
struct SwitchFunction {
  int n_min = 0;
  int n_max = 0;
  int step_center = 0;
  SwitchProfile profile = SwitchProfile::sharp;
  int width = 1;

  static SwitchFunction sharp(int n_min, int n_max, int center) {
    return {n_min, n_max, center, SwitchProfile::sharp, 1};
  }
  static SwitchFunction ramp(int n_min, int n_max, int center, int width) {
    if (width < 1) throw ModelError("switch ramp width must be at least 1");
    return {n_min, n_max, center, SwitchProfile::ramp, width};
  }
  /// Sharp step in the middle of the window.
  static SwitchFunction centered(int n_min, int n_max) {
    return sharp(n_min, n_max, n_min + (n_max - n_min + 1) / 2);
  }

  int ramp_width() const { return profile == SwitchProfile::sharp ? 1 : width; }

  double value(int n) const {
    if (n < step_center) return 0.0;
    const int w = ramp_width();
    if (w == 1) return 1.0;
    return std::min(1.0, static_cast<double>(n - step_center + 1) / w);
  }

  RealVector site_values() const {
    RealVector v(n_max - n_min + 1);
    for (int n = n_min; n <= n_max; ++n) v(n - n_min) = value(n);
    return v;
  }

  /// Values lifted to a flat basis (H space when `with_sublattice`, else S space).
  RealVector lifted(const BasisMap& basis, bool with_sublattice = true) const {
    const int dim = with_sublattice ? basis.dim() : basis.k_dim();
    RealVector v(dim);
    for (int i = 0; i < dim; ++i) v(i) = value(with_sublattice ? basis.site_of(i) : basis.k_site_of(i));
    return v;
  }

  /// Sites around the variation, extending half the distance to the nearer window end.
  TraceRegion default_region() const {
    const int last_varying = step_center + ramp_width() - 1;
    const int room = std::min(step_center - n_min, n_max - last_varying);
    const int half = std::max(1, room / 2);
    return {std::max(n_min, step_center - half), std::min(n_max, last_varying + half)};
  }
};

/// tr(Pi Lambda) for arbitrary per-site values; vanishes dimer by dimer.
inline double chirality_trace_check(const RealVector& pi, const RealVector& site_values,
                                    const BasisMap& basis) {
  if (pi.size() != basis.dim() || site_values.size() != basis.sites) {
    throw ModelError("chirality trace: dimension mismatch");
  }
  double total = 0.0;
  for (int i = 0; i < basis.dim(); ++i) total += pi(i) * site_values(basis.site_of(i) - basis.n_min);
  return total;
}

}  // namespace chiralind
