#pragma once

// Kernel-mixture correlation model for normalized errors within a mini-batch.
//
// A fixed bank of Toeplitz squared-exponential kernels (plus the identity) is
// mixed with simplex weights into a correlation matrix C; the target
// covariance is diag(sigma) C diag(sigma). The conditional law of the newest
// normalized error given the preceding ones drives forecast calibration.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "batchcast/error.hpp"
#include "batchcast/linalg.hpp"

namespace batchcast {

using linalg::SymMatrix;
using linalg::Vector;

inline const std::vector<double>& default_lengthscales() {
  static const std::vector<double> ls{1.0, 2.0, 3.0};
  return ls;
}

/// M = lengthscales.size() + 1 base correlation matrices of size D x D.
/// Kernel m has entry exp(-(i-j)^2 / l_m^2); the final kernel is the identity.
class KernelBank {
 public:
  KernelBank(std::size_t horizon, std::vector<double> lengthscales)
      : horizon_(horizon), lengthscales_(std::move(lengthscales)) {
    if (horizon_ < 2) throw config_error("InvalidHorizon", "kernel bank requires D >= 2");
    if (lengthscales_.empty()) throw config_error("InvalidLengthscale", "at least one lengthscale is required");
    for (double l : lengthscales_)
      if (!(l > 0.0) || !std::isfinite(l))
        throw config_error("InvalidLengthscale", "lengthscale must be positive, got " + std::to_string(l));
    // Kernels are Toeplitz, so only the lag profile per kernel is stored.
    lag_profile_.assign(size(), std::vector<double>(horizon_, 0.0));
    for (std::size_t m = 0; m < lengthscales_.size(); ++m) {
      const double l2 = lengthscales_[m] * lengthscales_[m];
      for (std::size_t k = 0; k < horizon_; ++k) lag_profile_[m][k] = std::exp(-double(k * k) / l2);
    }
    lag_profile_.back()[0] = 1.0;
  }

  std::size_t horizon() const noexcept { return horizon_; }
  /// Number of base kernels M (including the identity).
  std::size_t size() const noexcept { return lengthscales_.size() + 1; }
  const std::vector<double>& lengthscales() const noexcept { return lengthscales_; }
  std::size_t identity_index() const noexcept { return lengthscales_.size(); }

  /// Entry (i, j) of kernel m.
  double entry(std::size_t m, std::size_t i, std::size_t j) const noexcept {
    return lag_profile_[m][i > j ? i - j : j - i];
  }
  /// Kernel value at lag |i - j| = k.
  double at_lag(std::size_t m, std::size_t k) const noexcept { return lag_profile_[m][k]; }

  SymMatrix kernel(std::size_t m) const {
    SymMatrix k(horizon_);
    for (std::size_t i = 0; i < horizon_; ++i)
      for (std::size_t j = 0; j <= i; ++j) k.set(i, j, entry(m, i, j));
    return k;
  }

 private:
  std::size_t horizon_;
  std::vector<double> lengthscales_;
  std::vector<std::vector<double>> lag_profile_;
};

inline KernelBank build_kernel_bank(std::size_t horizon, std::vector<double> lengthscales = default_lengthscales()) {
  return KernelBank(horizon, std::move(lengthscales));
}

/// Component weights on the probability simplex.
struct MixWeights {
  std::vector<double> w;

  std::size_t size() const noexcept { return w.size(); }
  double operator[](std::size_t m) const noexcept { return w[m]; }

  static MixWeights one_hot(std::size_t m_total, std::size_t hot) {
    MixWeights out{std::vector<double>(m_total, 0.0)};
    out.w[hot] = 1.0;
    return out;
  }
  static MixWeights uniform(std::size_t m_total) {
    return MixWeights{std::vector<double>(m_total, 1.0 / double(m_total))};
  }
};

/// A valid correlation matrix: symmetric, unit diagonal.
class CorrelationMix {
 public:
  /// Wraps an arbitrary correlation matrix (e.g. a pinned AR(1) structure).
  static CorrelationMix from_matrix(SymMatrix c) {
    for (std::size_t i = 0; i < c.dim(); ++i)
      if (std::abs(c(i, i) - 1.0) > 1e-12) throw config_error("NotCorrelation", "diagonal must be 1");
    return CorrelationMix(std::move(c));
  }

  const SymMatrix& matrix() const noexcept { return c_; }
  std::size_t dim() const noexcept { return c_.dim(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return c_(i, j); }

 private:
  friend CorrelationMix mix_correlation(const KernelBank&, const MixWeights&);
  explicit CorrelationMix(SymMatrix c) : c_(std::move(c)) {}
  SymMatrix c_;
};

/// C = sum_m w_m K_m.
inline CorrelationMix mix_correlation(const KernelBank& bank, const MixWeights& weights) {
  if (weights.size() != bank.size())
    throw config_error("WeightDimensionMismatch", "got " + std::to_string(weights.size()) + " weights for " +
                                                      std::to_string(bank.size()) + " kernels");
  double total = 0.0;
  for (double v : weights.w) {
    if (!(v >= 0.0)) throw config_error("InvalidSimplex", "negative or NaN component weight");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-6)
    throw config_error("InvalidSimplex", "weights sum to " + std::to_string(total));

  const std::size_t d = bank.horizon();
  std::vector<double> profile(d, 0.0);
  for (std::size_t m = 0; m < bank.size(); ++m)
    for (std::size_t k = 0; k < d; ++k) profile[k] += weights[m] * bank.at_lag(m, k);
  // Every kernel has unit diagonal; pin it exactly.
  profile[0] = 1.0;

  SymMatrix c(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= i; ++j) c.set(i, j, profile[i - j]);
  return CorrelationMix(std::move(c));
}

/// Sigma_ij = sigma_i sigma_j C_ij.
inline SymMatrix assemble_covariance(std::span<const double> sigma, const CorrelationMix& c) {
  if (sigma.size() != c.dim())
    throw config_error("DimensionMismatch", "sigma length " + std::to_string(sigma.size()) + " vs D " +
                                                std::to_string(c.dim()));
  for (double s : sigma)
    if (!(s > 0.0)) throw numerical_error("NonpositiveSigma", "sigma must be strictly positive");
  SymMatrix out(c.dim());
  for (std::size_t i = 0; i < c.dim(); ++i)
    for (std::size_t j = 0; j <= i; ++j) out.set(i, j, sigma[i] * sigma[j] * c(i, j));
  return out;
}

/// Law of a standardized Gaussian error conditioned on observed neighbours.
struct ConditionalGaussian {
  double mean = 0.0;
  double variance = 1.0;
};

/// Conditions element `target` of a correlated standard-normal vector on the
/// elements listed in `observed` (values in `eps_obs`, same order).
inline ConditionalGaussian condition_on(const SymMatrix& c, std::size_t target, std::span<const std::size_t> observed,
                                        std::span<const double> eps_obs) {
  if (observed.size() != eps_obs.size())
    throw config_error("DimensionMismatch", "observed index / value length mismatch");
  const std::size_t k = observed.size();
  if (k == 0) return {0.0, c(target, target)};
  SymMatrix c_obs(k);
  Vector c_star(k);
  for (std::size_t a = 0; a < k; ++a) {
    c_star[a] = c(target, observed[a]);
    for (std::size_t b = 0; b <= a; ++b) c_obs.set(a, b, c(observed[a], observed[b]));
  }
  const auto factor = linalg::cholesky(c_obs);
  const Vector alpha = linalg::chol_solve(factor, eps_obs);
  const double mean = linalg::dot(c_star, alpha);
  double var = c(target, target) - linalg::quad_form(factor, c_star);
  if (var < 0.0) var = 0.0;
  return {mean, var};
}

/// Conditional law of the final error of the window given the k <= D-1
/// residuals preceding it (oldest to newest). With k < D-1 the trailing
/// (k+1) x (k+1) block of C is used.
inline ConditionalGaussian conditional_error_dist(const CorrelationMix& c, std::span<const double> eps_obs) {
  const std::size_t d = c.dim();
  if (eps_obs.size() + 1 > d)
    throw config_error("DimensionMismatch", std::to_string(eps_obs.size()) + " residuals exceed D-1 = " +
                                                std::to_string(d - 1));
  const std::size_t k = eps_obs.size();
  std::vector<std::size_t> idx(k);
  for (std::size_t a = 0; a < k; ++a) idx[a] = d - 1 - k + a;
  return condition_on(c.matrix(), d - 1, idx, eps_obs);
}

}  // namespace batchcast
