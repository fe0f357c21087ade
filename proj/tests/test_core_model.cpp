#include "chiralind/core_model.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace chiralind;
using testing_support::random_chain;

TEST_CASE("S assembled entry by entry matches build_S") {
  std::mt19937_64 rng(7);
  const auto chain = random_chain(2, 6, rng, -3);
  const auto S = build_S(chain);
  const int N = 2;
  // (S psi)_n = A_n psi_{n-1} + B_n psi_n, written out one coefficient at a time.
  ComplexMatrix ref = ComplexMatrix::Zero(12, 12);
  for (int n = -3; n <= 2; ++n) {
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) {
        const int row = (n + 3) * N + i;
        ref(row, (n + 3) * N + j) = chain.b(n)(i, j);
        if (n > -3) ref(row, (n + 2) * N + j) = chain.a(n)(i, j);
      }
    }
  }
  CHECK((S - ref).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("periodic closure adds A_{n_min} in the corner") {
  std::mt19937_64 rng(8);
  const auto chain = random_chain(1, 5, rng);
  const auto S_open = build_S(chain);
  const auto S_ring = build_S(chain, BoundarySpec<Complex>::periodic());
  ComplexMatrix diff = S_ring - S_open;
  CHECK(std::abs(diff(0, 4) - chain.a(0)(0, 0)) == 0.0);
  diff(0, 4) = 0.0;
  CHECK(diff.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("H is Hermitian and anticommutes with Pi; sublattice blocks are S and S*") {
  std::mt19937_64 rng(9);
  const auto chain = random_chain(3, 5, rng);
  const auto op = build_operator(chain);
  CHECK(op.hermiticity_residual() < 1e-14);
  CHECK(op.anticommutator_residual() < 1e-14);
  const BasisMap& b = op.basis;
  for (int n = 0; n < 5; ++n)
    for (int m = 0; m < 5; ++m)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          CHECK(op.H(b.flat(n, 1, i), b.flat(m, 0, j)) == op.S(b.k_index(n, i), b.k_index(m, j)));
          CHECK(op.H(b.flat(n, 0, i), b.flat(m, 0, j)) == Complex(0.0));
        }
}

TEST_CASE("basis map round trip") {
  const BasisMap b{-2, 3, 4};
  CHECK(b.dim() == 24);
  for (int n = -2; n <= 1; ++n)
    for (int s = 0; s < 2; ++s)
      for (int c = 0; c < 3; ++c) {
        const int f = b.flat(n, s, c);
        CHECK(b.site_of(f) == n);
        CHECK(b.sublattice_of(f) == s);
      }
  CHECK(b.k_site_of(b.k_index(1, 2)) == 1);
  CHECK(b.n_max() == 1);
}

TEST_CASE("singular bulk matrices are rejected, the boundary site is exempt") {
  auto chain = constant_chain<double>(1.0, 0.5, 6);
  chain.A[3](0, 0) = 0.0;
  CHECK_THROWS_AS(chain.validate(), ModelError);
  const auto clean = constant_chain<double>(1.0, 0.5, 6);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 1);
  const auto cut = truncate(clean, 4, BoundarySpec<double>::custom(zero, std::nullopt));
  CHECK_NOTHROW(cut.validate());
  CHECK(cut.boundary_site == 4);
  CHECK(cut.length() == 5);
  CHECK(cut.a(4)(0, 0) == 0.0);
  CHECK_THROWS_AS(truncate(clean, 9), ModelError);
  CHECK_THROWS_AS(truncate(clean, 3, BoundarySpec<double>::periodic()), ModelError);
}

TEST_CASE("custom boundary in build_S replaces the last row only") {
  const auto chain = constant_chain<double>(1.0, 0.5, 5);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 1);
  const auto S = build_S(chain, BoundarySpec<double>::custom(std::nullopt, zero));
  CHECK(S(4, 4) == 0.0);
  CHECK(S(4, 3) == 1.0);
  CHECK(S(3, 3) == 0.5);
}

TEST_CASE("recursion matrix annihilates the geometric zero mode") {
  const auto chain = constant_chain<double>(1.0, 0.5, 10);
  const auto M = build_recursion_matrix(chain);
  CHECK(M.rows() == 9);
  CHECK(M.cols() == 10);
  Eigen::VectorXd v(10);
  for (int n = 0; n < 10; ++n) v(n) = std::pow(-0.5, 9 - n);  // (-B/A)^{a-n}
  CHECK((M * v).norm() < 1e-14);
}

TEST_CASE("switch functions") {
  const auto s = SwitchFunction::sharp(0, 9, 4);
  CHECK(s.value(3) == 0.0);
  CHECK(s.value(4) == 1.0);
  const auto r = SwitchFunction::ramp(0, 19, 5, 4);
  CHECK(r.value(4) == 0.0);
  CHECK(r.value(5) == doctest::Approx(0.25));
  CHECK(r.value(8) == 1.0);
  CHECK(r.value(19) == 1.0);
  const TraceRegion reg = SwitchFunction::centered(0, 99).default_region();
  CHECK(reg.first == 26);
  CHECK(reg.last == 74);
  CHECK_THROWS_AS(SwitchFunction::ramp(0, 9, 3, 0), ModelError);
}

TEST_CASE("tr(Pi Lambda) vanishes dimer by dimer") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const BasisMap b{0, 2, 30};
  RealVector pi(b.dim());
  for (int i = 0; i < b.dim(); ++i) pi(i) = b.sublattice_of(i) == 0 ? 1.0 : -1.0;
  RealVector vals(30);
  for (int n = 0; n < 30; ++n) vals(n) = u(rng);
  CHECK(std::abs(chirality_trace_check(pi, vals, b)) < 1e-12);
}
