// Dense type aliases, error types and small matrix utilities shared by every
// module. All numerics are templated on the scalar type, which is either
// `double` or `std::complex<double>`.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace chiralind {

template <class T>
struct is_complex : std::false_type {};
template <class T>
struct is_complex<std::complex<T>> : std::true_type {};

template <class Scalar>
concept ChiralScalar = std::is_same_v<Scalar, double> || std::is_same_v<Scalar, std::complex<double>>;

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using RealVector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using Complex = std::complex<double>;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The hopping data does not define a valid model (dimensions, singular bulk matrices).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// A mobility-gap assumption is violated at finite volume (zero modes where none are allowed).
class AssumptionViolation : public Error {
 public:
  using Error::Error;
};

/// A spectral-gap-only formula was applied to a gapless operator.
class GapClosed : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class OverflowError : public Error {
 public:
  using Error::Error;
};

/// A kernel vector could not be classified as decaying or growing.
class Undecidable : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Utilities
// ---------------------------------------------------------------------------

/// 2-norm condition number; +inf for singular or empty input.
template <class Derived>
double condition_number(const Eigen::MatrixBase<Derived>& m) {
  using Plain = typename Derived::PlainObject;
  if (m.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::JacobiSVD<Plain> svd(m.eval());
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

/// Trace norm (sum of singular values) of a small block.
template <class Derived>
double trace_norm(const Eigen::MatrixBase<Derived>& m) {
  using Plain = typename Derived::PlainObject;
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Plain> svd(m.eval());
  return svd.singularValues().sum();
}

template <class Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

template <class Scalar>
inline Scalar conj_of(const Scalar& x) {
  if constexpr (is_complex<Scalar>::value) {
    return std::conj(x);
  } else {
    return x;
  }
}

inline double real_part(double x) { return x; }
inline double real_part(const Complex& x) { return x.real(); }
inline double imag_part(double) { return 0.0; }
inline double imag_part(const Complex& x) { return x.imag(); }

/// Nearest integer as `int`, with halves rounded away from zero.
inline int nearest_int(double x) { return static_cast<int>(std::lround(x)); }

}  // namespace chiralind
