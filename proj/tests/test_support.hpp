// Shared fixtures for the unit tests.
#pragma once

#include "chiralind/core_model.hpp"

#include <random>

namespace testing_support {

using namespace chiralind;

inline ComplexMatrix random_complex(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  ComplexMatrix m(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) m(i, j) = Complex(g(rng), g(rng));
  return m;
}

inline Eigen::MatrixXd random_real(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) m(i, j) = g(rng);
  return m;
}

/// Random chain with well-conditioned blocks: identity plus a small perturbation.
inline HoppingChain<Complex> random_chain(int N, int L, std::mt19937_64& rng, int n_min = 0) {
  HoppingChain<Complex> c;
  c.n_min = n_min;
  c.n_max = n_min + L - 1;
  c.channels = N;
  for (int i = 0; i < L; ++i) {
    c.A.push_back(ComplexMatrix::Identity(N, N) + 0.3 * random_complex(N, rng));
    c.B.push_back(0.6 * ComplexMatrix::Identity(N, N) + 0.3 * random_complex(N, rng));
  }
  return c;
}

}  // namespace testing_support
