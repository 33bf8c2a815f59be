#pragma once

// Adam optimizer, mini-batch objectives for both training modes, and the
// epoch loop with early stopping on validation loss.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "batchcast/corrmodel.hpp"
#include "batchcast/data.hpp"
#include "batchcast/error.hpp"
#include "batchcast/likelihood.hpp"
#include "batchcast/net.hpp"
#include "batchcast/parallel.hpp"
#include "batchcast/params.hpp"

namespace batchcast {

enum class TrainMode { Iid, Gls };

inline std::string to_string(TrainMode m) { return m == TrainMode::Iid ? "iid" : "gls"; }
inline TrainMode parse_train_mode(std::string_view s) {
  if (s == "iid") return TrainMode::Iid;
  if (s == "gls") return TrainMode::Gls;
  throw config_error("InvalidMode", "training mode must be iid or gls, got '" + std::string(s) + "'");
}

struct TrainConfig {
  TrainMode mode = TrainMode::Gls;
  std::size_t P = 24;
  std::size_t D = 24;
  std::size_t Q = 24;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 100;
  std::size_t max_batches_per_epoch = 100;
  double lr = 0.001;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  std::size_t stride = 1;
  double clip_norm = 10.0;
  double sigma_floor = 1e-4;
  /// Forces C = I in gls mode (the weight head receives no gradient).
  bool pin_identity = false;
  /// 0 means worker_count().
  std::size_t threads = 0;

  void validate() const {
    if (P == 0 || D == 0 || Q == 0) throw config_error("InvalidTrainConfig", "P, D and Q must be positive");
    if (mode == TrainMode::Gls && D < 2) throw config_error("InvalidTrainConfig", "gls mode requires D >= 2");
    if (batch_size == 0 || max_batches_per_epoch == 0 || max_epochs == 0)
      throw config_error("InvalidTrainConfig", "batch_size, max_batches_per_epoch and max_epochs must be positive");
    if (!(lr > 0.0)) throw config_error("InvalidTrainConfig", "lr must be positive");
    if (stride == 0) throw config_error("InvalidTrainConfig", "stride must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Adam

struct OptState {
  GradSet m;
  GradSet v;
  std::uint64_t step = 0;

  static OptState for_params(const ParamSet& p) { return OptState{p.zeros_like(), p.zeros_like(), 0}; }
};

/// Bias-corrected Adam update in place.
inline void adam_step(ParamSet& params, const GradSet& grads, OptState& opt, double lr, double beta1 = 0.9,
                      double beta2 = 0.999, double eps = 1e-8) {
  params.require_congruent(grads);
  params.require_congruent(opt.m);
  params.require_congruent(opt.v);
  ++opt.step;
  const double bc1 = 1.0 - std::pow(beta1, double(opt.step));
  const double bc2 = 1.0 - std::pow(beta2, double(opt.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].data;
    const auto& g = grads[i].data;
    auto& m = opt.m[i].data;
    auto& v = opt.v[i].data;
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
      v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Mini-batch objective

/// Forward outputs of the D windows of one mini-batch (final step of each).
struct MiniBatchForward {
  std::vector<double> mu, sigma, z;
  std::vector<MixWeights> weights;
  std::vector<WindowTrace> traces;
};

inline MiniBatchForward forward_minibatch(const Model& model, const TimeSeriesDataset& ds, const FeatureTable& ft,
                                          const MiniBatch& mb, std::size_t p, std::size_t d, bool record_trace) {
  MiniBatchForward f;
  f.mu.resize(d);
  f.sigma.resize(d);
  f.z.resize(d);
  f.weights.resize(d);
  if (record_trace) f.traces.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t target = mb.t + 1 + k - d;
    const auto inputs = window_inputs(ds, ft, mb.series, target, p + 1);
    WindowOutput w = unroll_window(model, inputs, HiddenState::zeros(model.config()), record_trace);
    const auto& last = w.steps.back();
    f.mu[k] = last.mu;
    f.sigma[k] = last.sigma;
    f.weights[k] = last.weights;
    f.z[k] = ds.series[mb.series].values[target];
    if (record_trace) f.traces[k] = std::move(w.trace);
  }
  return f;
}

/// Loss of one mini-batch and, if `grads` is non-null, its parameter
/// gradient accumulated into `grads`.
///
/// iid: sum over the D targets of the per-point Gaussian NLL.
/// gls: joint NLL with C built from the newest window's weights.
inline double minibatch_objective(const Model& model, const KernelBank& bank, const TimeSeriesDataset& ds,
                                  const FeatureTable& ft, const MiniBatch& mb, const TrainConfig& cfg,
                                  GradSet* grads) {
  const std::size_t d = cfg.D;
  MiniBatchForward f = forward_minibatch(model, ds, ft, mb, cfg.P, d, grads != nullptr);

  std::vector<double> sig(d);
  std::vector<bool> floored(d);
  for (std::size_t k = 0; k < d; ++k) {
    floored[k] = f.sigma[k] < cfg.sigma_floor;
    sig[k] = floored[k] ? cfg.sigma_floor : f.sigma[k];
  }

  std::vector<StepPartials> last(d);
  double loss = 0.0;
  if (cfg.mode == TrainMode::Iid) {
    for (std::size_t k = 0; k < d; ++k) {
      const IidGrad g = backprop_iid(f.mu[k], sig[k], f.z[k]);
      loss += g.loss;
      last[k].dmu = g.dmu;
      last[k].dsigma = floored[k] ? 0.0 : g.dsigma;
    }
  } else {
    if (bank.horizon() != d) throw config_error("DimensionMismatch", "kernel bank horizon differs from D");
    const MixWeights w = cfg.pin_identity ? MixWeights::one_hot(bank.size(), bank.identity_index()) : f.weights[d - 1];
    const GlsGrad g = backprop_gls(f.mu, sig, w, f.z, bank);
    loss = g.loss;
    for (std::size_t k = 0; k < d; ++k) {
      last[k].dmu = g.dmu[k];
      last[k].dsigma = floored[k] ? 0.0 : g.dsigma[k];
    }
    if (!cfg.pin_identity) last[d - 1].dw = g.dw;
  }

  if (grads) {
    std::vector<StepPartials> partials(cfg.P + 1);
    for (std::size_t k = 0; k < d; ++k) {
      partials.back() = last[k];
      model.backward(f.traces[k], partials, *grads);
    }
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Early stopping

/// Tracks the best validation loss; `update` returns true when training
/// should stop (no improvement for `patience` consecutive epochs).
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  bool update(std::size_t epoch, double val_loss) {
    if (val_loss < best_loss_) {
      best_loss_ = val_loss;
      best_epoch_ = epoch;
      improved_ = true;
    } else {
      improved_ = false;
    }
    return epoch - best_epoch_ >= patience_;
  }

  bool improved() const noexcept { return improved_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best_loss() const noexcept { return best_loss_; }

 private:
  std::size_t patience_;
  std::size_t best_epoch_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
  bool improved_ = false;
};

// ---------------------------------------------------------------------------
// Training loop

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  std::size_t batches = 0;
  std::size_t clipped = 0;
};

struct TrainResult {
  Model model;  // restored best-validation parameters
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
};

/// Standardized data plus everything derived from it that training and
/// evaluation share.
struct PreparedData {
  TimeSeriesDataset ds;
  ScalerTable scalers;
  FeatureTable features;
  std::vector<MiniBatch> train_batches;
  std::vector<MiniBatch> val_batches;
};

/// Standardizes `raw` (splits must be set) and enumerates train/validation
/// mini-batches for (P, D).
inline PreparedData prepare_data(const TimeSeriesDataset& raw, std::size_t p, std::size_t d, std::size_t stride) {
  auto [ds, scalers] = standardize(raw);
  FeatureTable ft(ds);
  std::vector<MiniBatch> train, val;
  for (std::size_t i = 0; i < ds.n_series(); ++i) {
    const auto& s = ds.series[i];
    auto tr = make_minibatches(i, s.train_end, p, d, stride);
    train.insert(train.end(), tr.begin(), tr.end());
    auto va = make_minibatches(i, s.train_end, s.val_end, p, d, 1);
    val.insert(val.end(), va.begin(), va.end());
  }
  if (val.empty())
    throw data_error("SeriesTooShort", "validation span shorter than D = " + std::to_string(d));
  return PreparedData{std::move(ds), std::move(scalers), std::move(ft), std::move(train), std::move(val)};
}

/// Mean objective over `batches` without gradients.
inline double mean_objective(const Model& model, const KernelBank& bank, const PreparedData& data,
                             std::span<const MiniBatch> batches, const TrainConfig& cfg) {
  std::vector<double> losses(batches.size());
  parallel_for(batches.size(), cfg.threads ? cfg.threads : worker_count(), [&](std::size_t i) {
    losses[i] = minibatch_objective(model, bank, data.ds, data.features, batches[i], cfg, nullptr);
  });
  double total = 0.0;
  for (double l : losses) total += l;
  return total / double(batches.size());
}

/// Mean loss over a batch and its gradient. Per-mini-batch gradients are
/// summed in index order so the result does not depend on the worker count.
inline double batch_gradient(const Model& model, const KernelBank& bank, const PreparedData& data,
                             std::span<const MiniBatch> batch, const TrainConfig& cfg, GradSet& grad) {
  std::vector<GradSet> parts(batch.size());
  std::vector<double> losses(batch.size());
  parallel_for(batch.size(), cfg.threads ? cfg.threads : worker_count(), [&](std::size_t i) {
    parts[i] = model.params().zeros_like();
    losses[i] = minibatch_objective(model, bank, data.ds, data.features, batch[i], cfg, &parts[i]);
  });
  grad.set_zero();
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    grad.axpy(1.0, parts[i]);
    total += losses[i];
  }
  const double inv = 1.0 / double(batch.size());
  grad.scale(inv);
  return total * inv;
}

using EpochCallback = std::function<void(const EpochRecord&)>;

inline TrainResult train(const TrainConfig& cfg, const ModelConfig& model_cfg, const PreparedData& data,
                         const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (data.train_batches.empty()) throw data_error("SeriesTooShort", "no training mini-batches");
  const KernelBank bank = build_kernel_bank(std::max<std::size_t>(cfg.D, 2), model_cfg.lengthscales);

  Model model = Model::init(model_cfg, cfg.seed);
  OptState opt = OptState::for_params(model.params());
  GradSet grad = model.params().zeros_like();
  EarlyStopping stopper(cfg.patience);
  TrainResult result;
  ParamSet best = model.params();

  std::vector<std::size_t> order(data.train_batches.size());
  std::vector<MiniBatch> batch;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL + epoch);
    std::shuffle(order.begin(), order.end(), rng);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = cfg.lr;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size() && rec.batches < cfg.max_batches_per_epoch;
         start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(data.train_batches[order[i]]);
      const double loss = batch_gradient(model, bank, data, batch, cfg, grad);
      if (!std::isfinite(loss) || !grad.all_finite())
        throw numerical_error("DivergedLoss", "non-finite training loss at epoch " + std::to_string(epoch) +
                                                  ", batch " + std::to_string(rec.batches + 1));
      const double norm = std::sqrt(grad.squared_norm());
      if (norm > cfg.clip_norm) {
        grad.scale(cfg.clip_norm / norm);
        ++rec.clipped;
      }
      adam_step(model.params(), grad, opt, cfg.lr);
      loss_sum += loss;
      ++rec.batches;
    }
    rec.train_loss = loss_sum / double(rec.batches);
    rec.val_loss = mean_objective(model, bank, data, data.val_batches, cfg);
    if (!std::isfinite(rec.val_loss))
      throw numerical_error("DivergedLoss", "non-finite validation loss at epoch " + std::to_string(epoch));
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    const bool stop = stopper.update(epoch, rec.val_loss);
    if (stopper.improved()) best = model.params();
    if (stop) break;
  }
  result.best_epoch = stopper.best_epoch();
  result.best_val_loss = stopper.best_loss();
  result.model = Model::from_params(model_cfg, std::move(best));
  return result;
}

}  // namespace batchcast
