#pragma once

// Gaussian negative log-likelihoods with closed-form partial derivatives.

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "batchcast/corrmodel.hpp"
#include "batchcast/error.hpp"
#include "batchcast/linalg.hpp"

namespace batchcast {

inline constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

/// Loss and its partials with respect to (mu, sigma, w) for one mini-batch.
struct GlsGrad {
  double loss = 0.0;
  std::vector<double> dmu;
  std::vector<double> dsigma;
  std::vector<double> dw;
};

struct IidGrad {
  double loss = 0.0;
  double dmu = 0.0;
  double dsigma = 0.0;
};

/// Per-point i.i.d. Gaussian NLL: eps^2/2 + ln sigma + ln(2 pi)/2.
inline IidGrad backprop_iid(double mu, double sigma, double z) {
  if (!(sigma > 0.0)) throw numerical_error("NonpositiveSigma", "sigma must be strictly positive");
  const double eps = (z - mu) / sigma;
  return {0.5 * eps * eps + std::log(sigma) + 0.5 * kLog2Pi, -eps / sigma, (1.0 - eps * eps) / sigma};
}

/// Multivariate Gaussian NLL of z ~ N(mu, diag(sigma) C(w) diag(sigma)).
///
/// With r = z - mu and G = dloss/dSigma = (Sigma^-1 - Sigma^-1 r r^T Sigma^-1) / 2:
///   dmu     = -Sigma^-1 r
///   dsigma_k = (2 / sigma_k) sum_j G_kj Sigma_kj
///   dw_m    = sum_ij G_ij sigma_i sigma_j K_m,ij
inline GlsGrad backprop_gls(std::span<const double> mu, std::span<const double> sigma, const MixWeights& w,
                            std::span<const double> z, const KernelBank& bank) {
  const std::size_t d = bank.horizon();
  if (mu.size() != d || sigma.size() != d || z.size() != d)
    throw config_error("DimensionMismatch", "mu/sigma/z must have length D = " + std::to_string(d));
  const CorrelationMix c = mix_correlation(bank, w);
  const SymMatrix cov = assemble_covariance(sigma, c);
  const auto factor = linalg::cholesky(cov);

  std::vector<double> r(d);
  for (std::size_t i = 0; i < d; ++i) r[i] = z[i] - mu[i];
  const std::vector<double> alpha = linalg::chol_solve(factor, r);

  GlsGrad out;
  out.loss = 0.5 * linalg::log_det(factor) + 0.5 * linalg::dot(r, alpha) + 0.5 * double(d) * kLog2Pi;

  out.dmu.resize(d);
  for (std::size_t i = 0; i < d; ++i) out.dmu[i] = -alpha[i];

  const SymMatrix inv = linalg::chol_inverse(factor);
  std::vector<double> g(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) g[i * d + j] = 0.5 * (inv(i, j) - alpha[i] * alpha[j]);

  out.dsigma.assign(d, 0.0);
  for (std::size_t k = 0; k < d; ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += g[k * d + j] * cov(k, j);
    out.dsigma[k] = 2.0 * acc / sigma[k];
  }

  // dw_m = sum_ij G_ij sigma_i sigma_j K_m(|i-j|); group by lag.
  std::vector<double> lag_sum(d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) lag_sum[i > j ? i - j : j - i] += g[i * d + j] * sigma[i] * sigma[j];
  out.dw.assign(bank.size(), 0.0);
  for (std::size_t m = 0; m < bank.size(); ++m)
    for (std::size_t k = 0; k < d; ++k) out.dw[m] += lag_sum[k] * bank.at_lag(m, k);
  return out;
}

}  // namespace batchcast
