#pragma once

// Probabilistic and point-forecast metrics: CRPS (closed-form Gaussian and
// sample-based), normalized aggregation, rho-risk, MSE and residual ACF.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "batchcast/error.hpp"

namespace batchcast::metrics {

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// CRPS of N(mu, sigma^2) at y: sigma * [u (2 Phi(u) - 1) + 2 phi(u) - 1/sqrt(pi)], u = (y - mu) / sigma.
inline double crps_gaussian(double mu, double sigma, double y) {
  if (!(sigma > 0.0)) throw numerical_error("NonpositiveSigma", "crps_gaussian requires sigma > 0");
  const double u = (y - mu) / sigma;
  return sigma * (u * (2.0 * normal_cdf(u) - 1.0) + 2.0 * normal_pdf(u) - 1.0 / std::sqrt(std::numbers::pi));
}

/// E|Y - y| - E|Y - Y'| / 2 with both expectations taken over the sample
/// (the second over all n^2 ordered pairs, evaluated in O(n log n)).
inline double crps_empirical(std::span<const double> samples, double y) {
  if (samples.size() < 2) throw config_error("TooFewSamples", "crps_empirical needs at least 2 samples");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double n = double(s.size());
  double abs_dev = 0.0, pair = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    abs_dev += std::abs(s[i] - y);
    // sum_{i,j} |x_i - x_j| = 2 sum_i x_(i) (2i - n - 1), 1-based i.
    pair += s[i] * (2.0 * double(i + 1) - n - 1.0);
  }
  return abs_dev / n - pair / (n * n);
}

/// Mean and standard deviation (n - 1 denominator) of a sample.
struct GaussianFit {
  double mean = 0.0;
  double std = 0.0;
};

inline GaussianFit fit_gaussian(std::span<const double> samples) {
  if (samples.empty()) throw config_error("TooFewSamples", "cannot fit an empty sample");
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= double(samples.size());
  if (samples.size() < 2) return {mean, 0.0};
  double var = 0.0;
  for (double v : samples) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / double(samples.size() - 1))};
}

/// CRPS from a Gaussian fitted to the samples; a degenerate (zero-spread)
/// sample is a point mass with CRPS |y - mean|.
inline double crps_sample_fit(std::span<const double> samples, double y) {
  const GaussianFit f = fit_gaussian(samples);
  if (!(f.std > 0.0)) return std::abs(y - f.mean);
  return crps_gaussian(f.mean, f.std, y);
}

/// sum CRPS / sum |obs|.
inline double aggregate_crps(std::span<const double> crps, std::span<const double> obs) {
  if (crps.size() != obs.size()) throw config_error("LengthMismatch", "crps and observation lengths differ");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < crps.size(); ++i) {
    num += crps[i];
    den += std::abs(obs[i]);
  }
  if (!(den > 0.0)) throw numerical_error("ZeroDenominator", "sum of |observations| is zero");
  return num / den;
}

/// 2 (zhat - z) ((1 - rho) 1[zhat > z] - rho 1[zhat <= z]).
inline double quantile_loss(double z, double zhat, double rho) {
  return 2.0 * (zhat - z) * ((zhat > z ? 1.0 - rho : 0.0) - (zhat <= z ? rho : 0.0));
}

/// sum quantile_loss / sum z.
inline double rho_risk(std::span<const double> obs, std::span<const double> quantiles, double rho) {
  if (obs.size() != quantiles.size()) throw config_error("LengthMismatch", "observation and quantile lengths differ");
  if (!(rho > 0.0 && rho < 1.0)) throw config_error("InvalidRho", "rho must lie in (0, 1)");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    num += quantile_loss(obs[i], quantiles[i], rho);
    den += obs[i];
  }
  if (den == 0.0) throw numerical_error("ZeroDenominator", "sum of observations is zero");
  return num / den;
}

inline double mse(std::span<const double> obs, std::span<const double> pred) {
  if (obs.size() != pred.size()) throw config_error("LengthMismatch", "observation and forecast lengths differ");
  if (obs.empty()) throw config_error("LengthMismatch", "mse of empty vectors");
  double acc = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) acc += (obs[i] - pred[i]) * (obs[i] - pred[i]);
  return acc / double(obs.size());
}

struct AcfResult {
  std::vector<double> values;  // lags 0..max_lag
  double band = 0.0;           // 95% half-width 1.96 / sqrt(n)
};

inline AcfResult acf(std::span<const double> e, std::size_t max_lag) {
  if (max_lag < 1 || e.size() <= max_lag)
    throw data_error("SeriesTooShort", "acf needs n > max_lag >= 1 (n = " + std::to_string(e.size()) + ")");
  const double n = double(e.size());
  double mean = 0.0;
  for (double v : e) mean += v;
  mean /= n;
  double denom = 0.0;
  for (double v : e) denom += (v - mean) * (v - mean);
  AcfResult r;
  r.band = 1.96 / std::sqrt(n);
  r.values.assign(max_lag + 1, 0.0);
  r.values[0] = 1.0;
  if (denom == 0.0) return r;
  for (std::size_t k = 1; k <= max_lag; ++k) {
    double acc = 0.0;
    for (std::size_t t = 0; t + k < e.size(); ++t) acc += (e[t] - mean) * (e[t + k] - mean);
    r.values[k] = acc / denom;
  }
  return r;
}

/// ACF of several residual series pooled: each series is centred on its own
/// mean and lag products never cross series boundaries.
inline AcfResult acf_pooled(const std::vector<std::vector<double>>& series, std::size_t max_lag) {
  if (max_lag < 1) throw data_error("SeriesTooShort", "acf needs max_lag >= 1");
  std::vector<double> num(max_lag + 1, 0.0);
  double denom = 0.0;
  std::size_t n = 0;
  for (const auto& e : series) {
    if (e.size() <= max_lag) continue;
    double mean = 0.0;
    for (double v : e) mean += v;
    mean /= double(e.size());
    for (double v : e) denom += (v - mean) * (v - mean);
    for (std::size_t k = 1; k <= max_lag; ++k)
      for (std::size_t t = 0; t + k < e.size(); ++t) num[k] += (e[t] - mean) * (e[t + k] - mean);
    n += e.size();
  }
  if (n == 0) throw data_error("SeriesTooShort", "no residual series longer than max_lag");
  AcfResult r;
  r.band = 1.96 / std::sqrt(double(n));
  r.values.assign(max_lag + 1, 0.0);
  r.values[0] = 1.0;
  if (denom == 0.0) return r;
  for (std::size_t k = 1; k <= max_lag; ++k) r.values[k] = num[k] / denom;
  return r;
}

}  // namespace batchcast::metrics
