#include "batchcast/corrmodel.hpp"
#include "batchcast/linalg.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"

namespace batchcast::linalg {
namespace {

SymMatrix from_dense(const oracle::Dense& d, std::size_t n) { return SymMatrix(n, d); }

TEST(Cholesky, IdentityFactorsToIdentity) {
  const auto f = cholesky(SymMatrix::identity(3), 0.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(f(i, j), i == j ? 1.0 : 0.0);
}

TEST(Cholesky, TwoByTwoHandFactor) {
  const auto f = cholesky(SymMatrix{{4, 2}, {2, 3}});
  EXPECT_DOUBLE_EQ(f(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(f(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(f(1, 0), 1.0);
  EXPECT_NEAR(f(1, 1), 1.414214, 1e-6);
  const auto back = reconstruct(f);
  EXPECT_NEAR(back(1, 1), 3.0, 1e-14);
}

TEST(Cholesky, IndefiniteRaises) {
  try {
    cholesky(SymMatrix{{1, 2}, {2, 1}});
    FAIL() << "expected NotPositiveDefinite";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "NotPositiveDefinite");
    EXPECT_EQ(e.kind(), ErrorKind::Numerical);
  }
}

TEST(Cholesky, JitterEscalationRescuesSemidefinite) {
  // Rank-one PSD matrix: exact pivot is zero.
  const auto f = cholesky(SymMatrix{{1, 1}, {1, 1}});
  EXPECT_GT(f.jitter(), 0.0);
  EXPECT_LE(f.jitter(), 1e-6);
  EXPECT_GT(f(1, 1), 0.0);
}

TEST(Cholesky, RejectsAsymmetricInput) { EXPECT_THROW(SymMatrix(2, {1.0, 0.5, 0.4, 1.0}), Error); }

TEST(Cholesky, ReconstructionWithinRelativeFrobenius) {
  std::mt19937_64 rng(11);
  for (std::size_t n : {1u, 3u, 8u, 16u, 48u}) {
    const auto d = oracle::random_spd(n, rng);
    const auto s = from_dense(d, n);
    const auto back = reconstruct(cholesky(s));
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        num += std::pow(back(i, j) - s(i, j), 2);
        den += s(i, j) * s(i, j);
      }
    EXPECT_LT(std::sqrt(num / den), 1e-10) << "n=" << n;
  }
}

TEST(CholSolve, IdentityAndTwoByTwo) {
  const auto x = chol_solve(cholesky(SymMatrix::identity(2)), std::vector<double>{5, -1});
  EXPECT_EQ(x, (std::vector<double>{5, -1}));
  const auto y = chol_solve(cholesky(SymMatrix{{4, 2}, {2, 3}}), std::vector<double>{2, 3});
  EXPECT_NEAR(y[0], 0.0, 1e-15);
  EXPECT_NEAR(y[1], 1.0, 1e-15);
}

TEST(CholSolve, DimensionMismatch) {
  const auto f = cholesky(SymMatrix::identity(3));
  try {
    chol_solve(f, std::vector<double>{1, 2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "DimensionMismatch");
  }
  EXPECT_THROW(quad_form(f, std::vector<double>{1}), Error);
}

// Property: agreement with an explicit Gauss-Jordan inverse on random PD systems.
TEST(CholSolve, MatchesExplicitInverseOracle) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + std::size_t(trial % 16);
    const auto d = oracle::random_spd(n, rng);
    std::vector<double> b(n);
    for (double& v : b) v = nd(rng);
    const auto x = chol_solve(cholesky(from_dense(d, n)), b);
    const auto ref = oracle::matvec(oracle::inverse(d, n), b);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      num += std::pow(x[i] - ref[i], 2);
      den += ref[i] * ref[i];
    }
    EXPECT_LT(std::sqrt(num / den), 1e-9) << "trial " << trial;
    // Residual check.
    const auto bx = oracle::matvec(d, x);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(bx[i], b[i], 1e-9 * (1.0 + std::abs(b[i])));
  }
}

TEST(LogDet, KnownValues) {
  EXPECT_EQ(log_det(cholesky(SymMatrix::identity(4))), 0.0);
  EXPECT_NEAR(log_det(cholesky(SymMatrix{{4, 2}, {2, 3}})), 2.079442, 1e-6);
  EXPECT_NEAR(log_det(cholesky(SymMatrix{{4, 2}, {2, 3}})), std::log(8.0), 1e-14);
}

TEST(LogDet, MatchesEigenvalueProductOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = oracle::random_spd(6, rng);
    EXPECT_NEAR(log_det(cholesky(from_dense(d, 6))), oracle::log_det_eigen(d, 6), 1e-9);
  }
}

TEST(QuadForm, KnownValues) {
  EXPECT_DOUBLE_EQ(quad_form(cholesky(SymMatrix::identity(2)), std::vector<double>{3, 4}), 25.0);
  EXPECT_NEAR(quad_form(cholesky(SymMatrix{{4, 2}, {2, 3}}), std::vector<double>{2, 3}), 3.0, 1e-14);
  EXPECT_EQ(quad_form(cholesky(SymMatrix{{4, 2}, {2, 3}}), std::vector<double>{0, 0}), 0.0);
}

TEST(QuadForm, PositiveForNonzeroVectors) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + std::size_t(trial % 10);
    const auto f = cholesky(from_dense(oracle::random_spd(n, rng), n));
    std::vector<double> r(n);
    for (double& v : r) v = nd(rng);
    EXPECT_GT(quad_form(f, r), 0.0);
  }
}

// Hadamard: a unit-diagonal PD matrix has log det <= 0.
TEST(LogDet, HadamardBoundOnKernelMixtures) {
  std::mt19937_64 rng(9);
  const auto bank = build_kernel_bank(24);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = mix_correlation(bank, MixWeights{oracle::random_simplex(bank.size(), rng)});
    EXPECT_LE(log_det(cholesky(c.matrix())), 1e-12);
  }
}

TEST(CholInverse, MatchesOracle) {
  std::mt19937_64 rng(13);
  const auto d = oracle::random_spd(7, rng);
  const auto inv = chol_inverse(cholesky(from_dense(d, 7)));
  const auto ref = oracle::inverse(d, 7);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 7; ++j) EXPECT_NEAR(inv(i, j), ref[i * 7 + j], 1e-9);
}

}  // namespace
}  // namespace batchcast::linalg
