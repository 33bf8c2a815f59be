#include "batchcast/corrmodel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"

namespace batchcast {
namespace {

// A single-kernel bank whose lag-1 value is exactly rho.
KernelBank rho_bank(std::size_t d, double rho) { return KernelBank(d, {1.0 / std::sqrt(-std::log(rho))}); }

TEST(KernelBank, DefaultHasFourKernels) {
  const auto bank = build_kernel_bank(5);
  EXPECT_EQ(bank.size(), 4u);
  EXPECT_EQ(bank.identity_index(), 3u);
  EXPECT_EQ(bank.horizon(), 5u);
}

TEST(KernelBank, Entries) {
  const auto bank = build_kernel_bank(6);
  EXPECT_NEAR(bank.entry(2, 0, 2), 0.641180, 1e-6);
  EXPECT_NEAR(bank.entry(2, 4, 2), std::exp(-4.0 / 9.0), 1e-15);
  for (std::size_t m = 0; m < bank.size(); ++m)
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(bank.entry(m, i, i), 1.0);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      if (i != j) {
        EXPECT_EQ(bank.entry(3, i, j), 0.0);
      }
}

TEST(KernelBank, KernelsArePositiveDefinite) {
  const auto bank = build_kernel_bank(24);
  for (std::size_t m = 0; m < bank.size(); ++m) {
    const auto k = bank.kernel(m);
    oracle::Dense d(24 * 24);
    for (std::size_t i = 0; i < 24; ++i)
      for (std::size_t j = 0; j < 24; ++j) d[i * 24 + j] = k(i, j);
    EXPECT_GT(oracle::eigenvalues(d, 24).minCoeff(), 0.0) << "kernel " << m;
  }
}

TEST(KernelBank, RejectsBadInput) {
  try {
    build_kernel_bank(4, {1.0, -2.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "InvalidLengthscale");
  }
  EXPECT_THROW(build_kernel_bank(4, {0.0}), Error);
  EXPECT_THROW(build_kernel_bank(1), Error);
}

TEST(MixCorrelation, OneHotIdentityGivesIdentity) {
  const auto bank = build_kernel_bank(4);
  const auto c = mix_correlation(bank, MixWeights::one_hot(4, bank.identity_index()));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(c(i, j), i == j ? 1.0 : 0.0);
}

TEST(MixCorrelation, LagOneEntries) {
  const auto bank = build_kernel_bank(4);
  EXPECT_NEAR(mix_correlation(bank, MixWeights{{0, 0, 0.7, 0.3}})(1, 0), 0.626387, 1e-6);
  EXPECT_NEAR(mix_correlation(bank, MixWeights{{1, 0, 0, 0}})(2, 3), 0.367879, 1e-6);
}

TEST(MixCorrelation, UnitDiagonalAndSymmetric) {
  std::mt19937_64 rng(1);
  const auto bank = build_kernel_bank(10);
  for (int trial = 0; trial < 30; ++trial) {
    const auto c = mix_correlation(bank, MixWeights{oracle::random_simplex(4, rng)});
    for (std::size_t i = 0; i < 10; ++i) {
      EXPECT_EQ(c(i, i), 1.0);
      for (std::size_t j = 0; j < 10; ++j) EXPECT_EQ(c(i, j), c(j, i));
    }
  }
}

TEST(MixCorrelation, ValidatesWeights) {
  const auto bank = build_kernel_bank(4);
  try {
    mix_correlation(bank, MixWeights{{0.5, 0.5}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "WeightDimensionMismatch");
  }
  try {
    mix_correlation(bank, MixWeights{{0.5, 0.5, 0.1, 0.0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "InvalidSimplex");
  }
  EXPECT_THROW(mix_correlation(bank, MixWeights{{1.2, -0.2, 0, 0}}), Error);
  EXPECT_NO_THROW(mix_correlation(bank, MixWeights{{0.25, 0.25, 0.25, 0.2500005}}));
}

TEST(AssembleCovariance, ScalesByOuterSigma) {
  const auto bank = build_kernel_bank(3);
  const auto c = mix_correlation(bank, MixWeights{{0.2, 0.3, 0.4, 0.1}});
  const std::vector<double> s{0.5, 2.0, 1.5};
  const auto cov = assemble_covariance(s, c);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(cov(i, j), s[i] * s[j] * c(i, j));
  try {
    assemble_covariance(std::vector<double>{1.0, 0.0, 1.0}, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "NonpositiveSigma");
  }
}

TEST(Conditional, IdentityIgnoresObservations) {
  const auto bank = build_kernel_bank(5);
  const auto c = mix_correlation(bank, MixWeights::one_hot(4, 3));
  const auto g = conditional_error_dist(c, std::vector<double>{3.0, -1.0, 2.0, 0.5});
  EXPECT_NEAR(g.mean, 0.0, 1e-15);
  EXPECT_NEAR(g.variance, 1.0, 1e-15);
}

TEST(Conditional, TwoByTwoSchur) {
  const auto c = mix_correlation(rho_bank(2, 0.5), MixWeights{{1.0, 0.0}});
  ASSERT_NEAR(c(0, 1), 0.5, 1e-15);
  const auto g = conditional_error_dist(c, std::vector<double>{1.0});
  EXPECT_NEAR(g.mean, 0.5, 1e-12);
  EXPECT_NEAR(g.variance, 0.75, 1e-12);
}

TEST(Conditional, MatchesSchurOracleOnRandomMixtures) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> nd;
  const std::size_t d = 6;
  const auto bank = build_kernel_bank(d);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = mix_correlation(bank, MixWeights{oracle::random_simplex(4, rng)});
    oracle::Dense dense(d * d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) dense[i * d + j] = c(i, j);
    std::vector<double> eps(d - 1);
    for (double& v : eps) v = nd(rng);
    std::vector<std::size_t> obs{0, 1, 2, 3, 4};
    const auto ref = oracle::schur_condition(dense, d, std::vector<double>(d, 0.0), d - 1, obs, eps);
    const auto g = conditional_error_dist(c, eps);
    EXPECT_NEAR(g.mean, ref.mean, 1e-8);
    EXPECT_NEAR(g.variance, ref.variance, 1e-8);
    EXPECT_GT(g.variance, 0.0);
    EXPECT_LE(g.variance, 1.0 + 1e-12);
  }
}

TEST(Conditional, PartialHistoryUsesTrailingBlock) {
  std::mt19937_64 rng(8);
  const std::size_t d = 6;
  const auto c = mix_correlation(build_kernel_bank(d), MixWeights{oracle::random_simplex(4, rng)});
  oracle::Dense dense(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) dense[i * d + j] = c(i, j);
  const std::vector<double> eps{0.3, -1.1};
  const auto ref = oracle::schur_condition(dense, d, std::vector<double>(d, 0.0), d - 1, {3, 4}, eps);
  const auto g = conditional_error_dist(c, eps);
  EXPECT_NEAR(g.mean, ref.mean, 1e-10);
  EXPECT_NEAR(g.variance, ref.variance, 1e-10);

  const auto none = conditional_error_dist(c, std::vector<double>{});
  EXPECT_EQ(none.mean, 0.0);
  EXPECT_EQ(none.variance, 1.0);
  EXPECT_THROW(conditional_error_dist(c, std::vector<double>(6, 0.0)), Error);
}

TEST(Conditional, PinnedAr1Matrix) {
  const std::size_t d = 4;
  const double phi = 0.8;
  SymMatrix m(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= i; ++j) m.set(i, j, std::pow(phi, double(i - j)));
  const auto c = CorrelationMix::from_matrix(m);
  // Markov: only the newest residual matters.
  const auto g = conditional_error_dist(c, std::vector<double>{5.0, -3.0, 1.0});
  EXPECT_NEAR(g.mean, phi, 1e-12);
  EXPECT_NEAR(g.variance, 1.0 - phi * phi, 1e-12);
  SymMatrix bad(2);
  bad.set(0, 0, 2.0);
  bad.set(1, 1, 1.0);
  EXPECT_THROW(CorrelationMix::from_matrix(bad), Error);
}

}  // namespace
}  // namespace batchcast
