#pragma once

// Rolling multi-step sampling with optional conditional calibration of each
// step's normalized error on the trailing residual history.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "batchcast/corrmodel.hpp"
#include "batchcast/data.hpp"
#include "batchcast/error.hpp"
#include "batchcast/net.hpp"
#include "batchcast/parallel.hpp"

namespace batchcast {

enum class ResidualSource { Observed, Sampled };

/// The most recent (up to) D-1 normalized residuals, oldest first.
class ResidualBuffer {
 public:
  explicit ResidualBuffer(std::size_t capacity = 0) : capacity_(capacity) {}

  void push(double eps, ResidualSource src) {
    if (capacity_ == 0) return;
    if (values_.size() == capacity_) {
      values_.pop_front();
      sources_.pop_front();
    }
    values_.push_back(eps);
    sources_.push_back(src);
  }

  std::size_t size() const noexcept { return values_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  std::vector<double> values() const { return {values_.begin(), values_.end()}; }
  ResidualSource source(std::size_t i) const { return sources_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  std::size_t capacity_;
  std::deque<double> values_;
  std::deque<ResidualSource> sources_;
};

/// Final-step outputs of a window run from a zero state (the training layout).
inline GaussianStepParams predict_window(const Model& model, std::span<const StepInput> inputs) {
  if (inputs.empty()) throw config_error("EmptyWindow", "window must contain at least one step");
  HiddenState st = HiddenState::zeros(model.config());
  for (std::size_t k = 0; k + 1 < inputs.size(); ++k) model.forward_step(st, inputs[k]);
  return model.forward_step(st, inputs.back());
}

/// Residual history at a forecast origin.
struct TeacherForced {
  ResidualBuffer buffer;
  /// Last observed value, the lag input of the first forecast step.
  double last_value = 0.0;
  /// Model outputs for the residual positions, oldest first.
  std::vector<double> mu, sigma, z;
};

/// Normalized residuals (z - mu) / sigma of the D-1 observed steps before
/// `origin`. Each step is predicted from its own P + 1 step window.
inline TeacherForced teacher_forced_residuals(const Model& model, const TimeSeriesDataset& ds, const FeatureTable& ft,
                                              std::size_t series, std::size_t origin, std::size_t p, std::size_t d) {
  const std::size_t need = std::max(p, d - 1) + 1;
  if (origin < need || origin > ds.series[series].size())
    throw data_error("HistoryTooShort", "history of " + std::to_string(origin) + " steps, need at least " +
                                            std::to_string(need));
  const auto& vals = ds.series[series].values;
  TeacherForced out;
  out.buffer = ResidualBuffer(d - 1);
  for (std::size_t s = origin - (d - 1); s < origin; ++s) {
    const auto inputs = window_inputs(ds, ft, series, s, std::min(p + 1, s + 1));
    const GaussianStepParams g = predict_window(model, inputs);
    out.buffer.push((vals[s] - g.mu) / g.sigma, ResidualSource::Observed);
    out.mu.push_back(g.mu);
    out.sigma.push_back(g.sigma);
    out.z.push_back(vals[s]);
  }
  out.last_value = vals[origin - 1];
  return out;
}

struct CalibratedStep {
  double mu_bar = 0.0;
  double var_bar = 0.0;
  ConditionalGaussian error;
};

/// mu_bar = mu + sigma m, var_bar = sigma^2 v with (m, v) the conditional law
/// of the next normalized error given the buffered residuals.
inline CalibratedStep calibrated_step(double mu, double sigma, const MixWeights& w, std::span<const double> buf,
                                      const KernelBank& bank) {
  const ConditionalGaussian cond = conditional_error_dist(mix_correlation(bank, w), buf);
  return {mu + sigma * cond.mean, sigma * sigma * cond.variance, cond};
}

enum class ForecastMode { Iid, Calibrated };

inline std::string to_string(ForecastMode m) { return m == ForecastMode::Iid ? "iid" : "calibrated"; }
inline ForecastMode parse_forecast_mode(std::string_view s) {
  if (s == "iid") return ForecastMode::Iid;
  if (s == "calibrated") return ForecastMode::Calibrated;
  throw config_error("InvalidMode", "forecast mode must be iid or calibrated, got '" + std::string(s) + "'");
}

struct ForecastConfig {
  std::size_t P = 24;
  std::size_t D = 24;
  std::size_t Q = 24;
  std::size_t n_samples = 100;
  ForecastMode mode = ForecastMode::Calibrated;
  std::uint64_t seed = 0;
  /// Condition only on the observed residuals (no sampled ones); the
  /// default slides the window over sampled residuals.
  bool anchored = false;
  /// Every trajectory starts from the teacher-forced residual buffer. When
  /// false trajectories start from an empty buffer.
  bool reset_buffer_per_sample = true;
  /// Replace the weight head's output by a one-hot on the identity kernel.
  bool pin_identity = false;
  std::size_t threads = 0;
};

inline const std::vector<double>& default_quantile_levels() {
  static const std::vector<double> levels{0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5,
                                          0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95};
  return levels;
}

/// Type-7 (linear interpolation) quantile of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw config_error("EmptyInput", "quantile of empty sample");
  const double h = (double(sorted.size()) - 1.0) * p;
  const std::size_t lo = std::size_t(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - double(lo)) * (sorted[hi] - sorted[lo]);
}

struct ForecastResult {
  std::size_t series = 0;
  std::size_t origin = 0;
  Timestamp start;
  /// samples[i][q], original units.
  std::vector<std::vector<double>> samples;
  /// Per trajectory and step predictive mean / variance, original units.
  std::vector<std::vector<double>> mu_bar, var_bar;
  /// weights[i][q] component weights used at each step.
  std::vector<std::vector<std::vector<double>>> weights;
  std::vector<double> quantile_levels;
  /// quantiles[q][j] for quantile_levels[j], original units.
  std::vector<std::vector<double>> quantiles;

  std::size_t horizon() const noexcept { return samples.empty() ? 0 : samples[0].size(); }

  /// Sample mean at step q.
  double mean(std::size_t q) const {
    double acc = 0.0;
    for (const auto& s : samples) acc += s[q];
    return acc / double(samples.size());
  }

  std::vector<double> step_samples(std::size_t q) const {
    std::vector<double> out(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) out[i] = samples[i][q];
    return out;
  }

  /// Mean of the component weights across trajectories at step q.
  std::vector<double> mean_weights(std::size_t q) const {
    std::vector<double> out(weights.empty() ? 0 : weights[0][q].size(), 0.0);
    for (const auto& traj : weights)
      for (std::size_t m = 0; m < out.size(); ++m) out[m] += traj[q][m];
    for (double& v : out) v /= double(weights.size());
    return out;
  }
};

/// Independent random stream per (seed, series, origin, trajectory).
inline std::mt19937_64 trajectory_rng(std::uint64_t seed, std::size_t series, std::size_t origin, std::size_t traj) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(series), std::uint32_t(origin),
                    std::uint32_t(traj)};
  return std::mt19937_64(seq);
}

/// Samples `n_samples` trajectories of length Q from `origin`, feeding each
/// sampled value back as the next lag input.
inline ForecastResult rolling_forecast(const Model& model, const KernelBank& bank, const TimeSeriesDataset& ds,
                                       const FeatureTable& ft, const Scaler& scaler, std::size_t series,
                                       std::size_t origin, const ForecastConfig& cfg) {
  if (cfg.Q == 0 || cfg.n_samples == 0) throw config_error("InvalidForecastConfig", "Q and n_samples must be >= 1");
  if (cfg.mode == ForecastMode::Calibrated && bank.horizon() != cfg.D)
    throw config_error("DimensionMismatch", "kernel bank horizon differs from D");
  const TeacherForced tf = teacher_forced_residuals(model, ds, ft, series, origin, cfg.P, std::max<std::size_t>(cfg.D, 1));
  const std::vector<double> observed = tf.buffer.values();

  ForecastResult res;
  res.series = series;
  res.origin = origin;
  const auto& s = ds.series[series];
  res.start = origin < s.size() ? s.timestamps[origin] : next_timestamp(s.timestamps.back(), ds.granularity);
  res.samples.assign(cfg.n_samples, std::vector<double>(cfg.Q));
  res.mu_bar = res.samples;
  res.var_bar = res.samples;
  res.weights.assign(cfg.n_samples, std::vector<std::vector<double>>(cfg.Q));

  // Covariates for every step a forecast window can touch.
  const std::size_t base = origin - cfg.P - 1;
  std::vector<CovariateCodes> codes(cfg.P + cfg.Q + 1);
  for (std::size_t j = 0; j < codes.size(); ++j) codes[j] = ft.at(ds, series, base + 1 + j);
  const auto& vals = ds.series[series].values;

  parallel_for(cfg.n_samples, cfg.threads ? cfg.threads : worker_count(), [&](std::size_t i) {
    auto rng = trajectory_rng(cfg.seed, series, origin, i);
    std::normal_distribution<double> normal(0.0, 1.0);
    ResidualBuffer buf(cfg.D > 0 ? cfg.D - 1 : 0);
    if (cfg.reset_buffer_per_sample)
      for (double e : observed) buf.push(e, ResidualSource::Observed);
    // path[j] is the (observed or sampled) value at time base + j.
    std::vector<double> path(vals.begin() + std::ptrdiff_t(base), vals.begin() + std::ptrdiff_t(origin));
    std::vector<StepInput> window(cfg.P + 1);
    for (std::size_t q = 0; q < cfg.Q; ++q) {
      for (std::size_t k = 0; k <= cfg.P; ++k) {
        const CovariateCodes& c = codes[q + k];
        window[k] = StepInput{path[q + k], c.hour, c.dow, series};
      }
      GaussianStepParams g = predict_window(model, window);
      if (cfg.pin_identity) g.weights = MixWeights::one_hot(model.n_kernels(), model.n_kernels() - 1);
      double m = 0.0, v = 1.0;
      if (cfg.mode == ForecastMode::Calibrated) {
        const CorrelationMix c = mix_correlation(bank, g.weights);
        ConditionalGaussian cond;
        if (cfg.anchored) {
          // Observed residual j sits q + (k - j) steps before the target.
          std::vector<std::size_t> idx;
          std::vector<double> vals;
          const std::size_t k = cfg.reset_buffer_per_sample ? observed.size() : 0;
          for (std::size_t j = 0; j < k; ++j) {
            const std::size_t lag_steps = q + (k - j);
            if (lag_steps <= cfg.D - 1) {
              idx.push_back(cfg.D - 1 - lag_steps);
              vals.push_back(observed[j]);
            }
          }
          cond = condition_on(c.matrix(), cfg.D - 1, idx, vals);
        } else {
          cond = conditional_error_dist(c, buf.values());
        }
        m = cond.mean;
        v = cond.variance;
      }
      const double eps = m + std::sqrt(v) * normal(rng);
      const double z = g.mu + g.sigma * eps;
      buf.push(eps, ResidualSource::Sampled);
      path.push_back(z);
      const double mb = g.mu + g.sigma * m;
      res.samples[i][q] = scaler.inverse(z);
      res.mu_bar[i][q] = scaler.inverse(mb);
      res.var_bar[i][q] = g.sigma * g.sigma * v * scaler.std * scaler.std;
      res.weights[i][q] = g.weights.w;
    }
  });

  res.quantile_levels = default_quantile_levels();
  res.quantiles.assign(cfg.Q, std::vector<double>(res.quantile_levels.size()));
  for (std::size_t q = 0; q < cfg.Q; ++q) {
    auto col = res.step_samples(q);
    std::sort(col.begin(), col.end());
    for (std::size_t j = 0; j < res.quantile_levels.size(); ++j)
      res.quantiles[q][j] = quantile_sorted(col, res.quantile_levels[j]);
  }
  return res;
}

/// One-step-ahead residuals over targets [lo, hi) of a series, each target
/// predicted from its own teacher-forced window of P + 1 steps (the training
/// layout). Calibrated residuals use (z - mu_bar) / sigma_bar with the
/// preceding D - 1 window residuals as conditioning set.
struct OneStepResiduals {
  std::vector<double> iid;         // (z - mu) / sigma
  std::vector<double> calibrated;  // (z - mu_bar) / sigma_bar
  std::vector<double> variance_ratio;  // sigma_bar^2 / sigma^2
  std::vector<std::vector<double>> weights;
};

inline OneStepResiduals one_step_residuals(const Model& model, const KernelBank& bank, const TimeSeriesDataset& ds,
                                           const FeatureTable& ft, std::size_t series, std::size_t lo, std::size_t hi,
                                           std::size_t p, std::size_t d, std::size_t threads = 0) {
  if (hi <= lo) return {};
  const std::size_t first = lo >= d - 1 ? lo - (d - 1) : 0;
  const std::size_t n = hi - first;
  std::vector<GaussianStepParams> out(n);
  const auto& vals = ds.series[series].values;
  parallel_for(n, threads ? threads : worker_count(), [&](std::size_t i) {
    const std::size_t target = first + i;
    const std::size_t len = std::min(p + 1, target + 1);
    const auto inputs = window_inputs(ds, ft, series, target, len);
    out[i] = predict_window(model, inputs);
  });
  std::vector<double> eps(n);
  for (std::size_t i = 0; i < n; ++i) eps[i] = (vals[first + i] - out[i].mu) / out[i].sigma;

  OneStepResiduals r;
  for (std::size_t target = lo; target < hi; ++target) {
    const std::size_t i = target - first;
    const auto& g = out[i];
    r.iid.push_back(eps[i]);
    const std::size_t k = std::min(i, d - 1);
    std::span<const double> buf(eps.data() + (i - k), k);
    const CalibratedStep cs = calibrated_step(g.mu, g.sigma, g.weights, buf, bank);
    r.calibrated.push_back((vals[target] - cs.mu_bar) / std::sqrt(cs.var_bar));
    r.variance_ratio.push_back(cs.error.variance);
    r.weights.push_back(g.weights.w);
  }
  return r;
}

}  // namespace batchcast
