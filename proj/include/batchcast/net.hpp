#pragma once

// Autoregressive base forecaster: covariate embeddings, a stack of gated
// recurrent units, a Gaussian head (mu, sigma) and a component-weight head
// (hidden linear + ELU + linear + softmax) producing mixture weights.
//
// The reverse pass (compute_gradients) is hand-written backpropagation
// through time over a recorded trace.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "batchcast/corrmodel.hpp"
#include "batchcast/error.hpp"
#include "batchcast/params.hpp"

namespace batchcast {

inline constexpr std::size_t kHoursPerDay = 24;
inline constexpr std::size_t kDaysPerWeek = 7;

struct ModelConfig {
  std::size_t n_series = 1;
  std::size_t hidden = 40;
  std::size_t layers = 3;
  std::size_t series_emb = 8;
  std::size_t hour_emb = 4;
  std::size_t dow_emb = 3;
  std::size_t weight_hidden = 16;
  bool use_hour = true;
  bool use_dow = true;
  std::vector<double> lengthscales = default_lengthscales();

  std::size_t n_kernels() const noexcept { return lengthscales.size() + 1; }
  std::size_t input_dim() const noexcept {
    return series_emb + (use_hour ? hour_emb : 0) + (use_dow ? dow_emb : 0) + 1;
  }
};

/// One network input: lagged target plus covariate codes. A code of -1 means
/// the covariate is absent for this granularity.
struct StepInput {
  double lag = 0.0;
  int hour = -1;
  int dow = -1;
  std::size_t series_id = 0;
};

/// Per-layer hidden vectors.
struct HiddenState {
  std::vector<std::vector<double>> layers;

  static HiddenState zeros(const ModelConfig& cfg) {
    return HiddenState{std::vector<std::vector<double>>(cfg.layers, std::vector<double>(cfg.hidden, 0.0))};
  }
  bool operator==(const HiddenState&) const = default;
};

struct GaussianStepParams {
  double mu = 0.0;
  double sigma = 1.0;
  MixWeights weights;
};

inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline MixWeights softmax(std::span<const double> v) {
  if (v.empty()) throw config_error("EmptyInput", "softmax of an empty vector");
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  std::vector<double> out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return MixWeights{std::move(out)};
}

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }

/// Intermediates of one recurrent layer at one step.
struct LayerTrace {
  std::vector<double> h_prev, r, u, n, rh;
};

/// Everything compute_gradients needs for one forward step.
struct StepTrace {
  StepInput input;
  std::vector<double> x;
  std::vector<LayerTrace> layers;
  std::vector<double> h_top;
  double sigma_pre = 0.0;
  std::vector<double> w_pre, w_act;
  std::vector<double> weights;
};

struct WindowTrace {
  std::vector<StepTrace> steps;
};

/// Upstream partials of the scalar loss with respect to one step's outputs.
/// `dw` is with respect to the softmax outputs; empty means zero.
struct StepPartials {
  double dmu = 0.0;
  double dsigma = 0.0;
  std::vector<double> dw;
};

class Model {
 public:
  Model() = default;

  /// Builds parameters with uniform(+-1/sqrt(fan_in)) matrices and zero biases.
  static Model init(const ModelConfig& cfg, std::uint64_t seed) {
    Model m(cfg);
    std::mt19937_64 rng(seed);
    for (auto& t : m.params_) {
      if (t.shape.size() < 2) continue;
      const double bound = 1.0 / std::sqrt(double(t.shape[1]));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (double& v : t.data) v = dist(rng);
    }
    return m;
  }

  /// Adopts an existing parameter set (e.g. from a checkpoint).
  static Model from_params(const ModelConfig& cfg, ParamSet params) {
    Model m(cfg);
    m.params_.require_congruent(params, ErrorKind::Compatibility);
    m.params_ = std::move(params);
    return m;
  }

  const ModelConfig& config() const noexcept { return cfg_; }
  const ParamSet& params() const noexcept { return params_; }
  ParamSet& params() noexcept { return params_; }

  void validate(const StepInput& in) const {
    if (in.series_id >= cfg_.n_series)
      throw data_error("InvalidCovariate", "series_id " + std::to_string(in.series_id) + " out of range (" +
                                               std::to_string(cfg_.n_series) + " series)");
    if (cfg_.use_hour && (in.hour < 0 || in.hour >= int(kHoursPerDay)))
      throw data_error("InvalidCovariate", "hour code " + std::to_string(in.hour) + " out of range");
    if (cfg_.use_dow && (in.dow < 0 || in.dow >= int(kDaysPerWeek)))
      throw data_error("InvalidCovariate", "day-of-week code " + std::to_string(in.dow) + " out of range");
  }

  /// One transition plus heads. If `trace` is non-null the intermediates are
  /// recorded for the reverse pass.
  GaussianStepParams forward_step(HiddenState& state, const StepInput& in, StepTrace* trace = nullptr) const {
    validate(in);
    if (state.layers.size() != cfg_.layers)
      throw config_error("ShapeMismatch", "hidden state has " + std::to_string(state.layers.size()) + " layers");
    const std::size_t hsz = cfg_.hidden;

    std::vector<double> x = embed(in);
    if (trace) {
      trace->input = in;
      trace->x = x;
      trace->layers.resize(cfg_.layers);
    }

    std::vector<double> gates(3 * hsz), rh(hsz);
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      auto& h = state.layers[l];
      if (h.size() != hsz) throw config_error("ShapeMismatch", "hidden size mismatch in layer " + std::to_string(l));
      const Tensor& w = params_[idx_.gru_w[l]];
      const Tensor& u = params_[idx_.gru_u[l]];
      const Tensor& b = params_[idx_.gru_b[l]];
      const std::size_t in_dim = x.size();
      // gates = W x + b for all three blocks; recurrent part for r, u only.
      for (std::size_t g = 0; g < 3 * hsz; ++g) {
        const double* wr = &w.data[g * in_dim];
        double acc = b.data[g];
        for (std::size_t k = 0; k < in_dim; ++k) acc += wr[k] * x[k];
        gates[g] = acc;
      }
      for (std::size_t g = 0; g < 2 * hsz; ++g) {
        const double* ur = &u.data[g * hsz];
        double acc = 0.0;
        for (std::size_t k = 0; k < hsz; ++k) acc += ur[k] * h[k];
        gates[g] += acc;
      }
      std::vector<double> r(hsz), z(hsz), n(hsz), hnew(hsz);
      for (std::size_t k = 0; k < hsz; ++k) {
        r[k] = sigmoid(gates[k]);
        z[k] = sigmoid(gates[hsz + k]);
        rh[k] = r[k] * h[k];
      }
      for (std::size_t k = 0; k < hsz; ++k) {
        const double* ur = &u.data[(2 * hsz + k) * hsz];
        double acc = gates[2 * hsz + k];
        for (std::size_t j = 0; j < hsz; ++j) acc += ur[j] * rh[j];
        n[k] = std::tanh(acc);
        hnew[k] = (1.0 - z[k]) * n[k] + z[k] * h[k];
      }
      if (trace) {
        auto& lt = trace->layers[l];
        lt.h_prev = h;
        lt.r = r;
        lt.u = z;
        lt.n = n;
        lt.rh = rh;
      }
      h = hnew;
      x = std::move(hnew);
    }

    const std::vector<double>& top = state.layers.back();
    GaussianStepParams out;
    const Tensor& mu_w = params_[idx_.mu_w];
    const Tensor& sg_w = params_[idx_.sigma_w];
    double mu = params_[idx_.mu_b].data[0];
    double sp = params_[idx_.sigma_b].data[0];
    for (std::size_t k = 0; k < hsz; ++k) {
      mu += mu_w.data[k] * top[k];
      sp += sg_w.data[k] * top[k];
    }
    out.mu = mu;
    out.sigma = softplus(sp);

    const std::size_t wh = cfg_.weight_hidden, mk = cfg_.n_kernels();
    const Tensor& w1 = params_[idx_.w1_w];
    const Tensor& b1 = params_[idx_.w1_b];
    const Tensor& w2 = params_[idx_.w2_w];
    const Tensor& b2 = params_[idx_.w2_b];
    std::vector<double> pre(wh), act(wh), logits(mk);
    for (std::size_t i = 0; i < wh; ++i) {
      double acc = b1.data[i];
      for (std::size_t k = 0; k < hsz; ++k) acc += w1.data[i * hsz + k] * top[k];
      pre[i] = acc;
      act[i] = elu(acc);
    }
    for (std::size_t m = 0; m < mk; ++m) {
      double acc = b2.data[m];
      for (std::size_t i = 0; i < wh; ++i) acc += w2.data[m * wh + i] * act[i];
      logits[m] = acc;
    }
    out.weights = softmax(logits);

    if (trace) {
      trace->h_top = top;
      trace->sigma_pre = sp;
      trace->w_pre = std::move(pre);
      trace->w_act = std::move(act);
      trace->weights = out.weights.w;
    }
    return out;
  }

  /// Reverse pass over one window trace. Accumulates d(loss)/d(param) into
  /// `grads`, given per-step upstream partials (same length as the trace).
  void backward(const WindowTrace& trace, std::span<const StepPartials> partials, GradSet& grads) const {
    if (partials.size() != trace.steps.size())
      throw config_error("ShapeMismatch", "partials length " + std::to_string(partials.size()) + " vs trace length " +
                                              std::to_string(trace.steps.size()));
    params_.require_congruent(grads);
    const std::size_t hsz = cfg_.hidden, wh = cfg_.weight_hidden, mk = cfg_.n_kernels();
    std::vector<std::vector<double>> dh_carry(cfg_.layers, std::vector<double>(hsz, 0.0));
    std::vector<double> dh(hsz), dx, dlogits(mk), dact(wh);

    for (std::size_t t = trace.steps.size(); t-- > 0;) {
      const StepTrace& st = trace.steps[t];
      const StepPartials& p = partials[t];
      if (st.layers.size() != cfg_.layers || st.h_top.size() != hsz)
        throw config_error("ShapeMismatch", "malformed step trace at position " + std::to_string(t));

      // Heads.
      std::fill(dh.begin(), dh.end(), 0.0);
      if (p.dmu != 0.0) {
        auto& g_w = grads[idx_.mu_w].data;
        grads[idx_.mu_b].data[0] += p.dmu;
        const auto& w = params_[idx_.mu_w].data;
        for (std::size_t k = 0; k < hsz; ++k) {
          g_w[k] += p.dmu * st.h_top[k];
          dh[k] += p.dmu * w[k];
        }
      }
      if (p.dsigma != 0.0) {
        const double da = p.dsigma * sigmoid(st.sigma_pre);
        auto& g_w = grads[idx_.sigma_w].data;
        grads[idx_.sigma_b].data[0] += da;
        const auto& w = params_[idx_.sigma_w].data;
        for (std::size_t k = 0; k < hsz; ++k) {
          g_w[k] += da * st.h_top[k];
          dh[k] += da * w[k];
        }
      }
      if (!p.dw.empty()) {
        if (p.dw.size() != mk) throw config_error("ShapeMismatch", "dw length mismatch");
        double wdot = 0.0;
        for (std::size_t m = 0; m < mk; ++m) wdot += st.weights[m] * p.dw[m];
        for (std::size_t m = 0; m < mk; ++m) dlogits[m] = st.weights[m] * (p.dw[m] - wdot);
        auto& g_w2 = grads[idx_.w2_w].data;
        auto& g_b2 = grads[idx_.w2_b].data;
        const auto& w2 = params_[idx_.w2_w].data;
        std::fill(dact.begin(), dact.end(), 0.0);
        for (std::size_t m = 0; m < mk; ++m) {
          g_b2[m] += dlogits[m];
          for (std::size_t i = 0; i < wh; ++i) {
            g_w2[m * wh + i] += dlogits[m] * st.w_act[i];
            dact[i] += dlogits[m] * w2[m * wh + i];
          }
        }
        auto& g_w1 = grads[idx_.w1_w].data;
        auto& g_b1 = grads[idx_.w1_b].data;
        const auto& w1 = params_[idx_.w1_w].data;
        for (std::size_t i = 0; i < wh; ++i) {
          const double dpre = dact[i] * (st.w_pre[i] > 0.0 ? 1.0 : std::exp(st.w_pre[i]));
          g_b1[i] += dpre;
          for (std::size_t k = 0; k < hsz; ++k) {
            g_w1[i * hsz + k] += dpre * st.h_top[k];
            dh[k] += dpre * w1[i * hsz + k];
          }
        }
      }

      // Recurrent stack, top layer first.
      for (std::size_t l = cfg_.layers; l-- > 0;) {
        const LayerTrace& lt = st.layers[l];
        for (std::size_t k = 0; k < hsz; ++k) dh[k] += dh_carry[l][k];
        const std::vector<double> layer_in = layer_input(st, l);
        const std::size_t in_dim = layer_in.size();
        const auto& w = params_[idx_.gru_w[l]].data;
        const auto& u = params_[idx_.gru_u[l]].data;
        auto& gw = grads[idx_.gru_w[l]].data;
        auto& gu = grads[idx_.gru_u[l]].data;
        auto& gb = grads[idx_.gru_b[l]].data;

        std::vector<double> da(3 * hsz), dh_prev(hsz, 0.0), drh(hsz, 0.0);
        for (std::size_t k = 0; k < hsz; ++k) {
          const double dn = dh[k] * (1.0 - lt.u[k]);
          const double du = dh[k] * (lt.h_prev[k] - lt.n[k]);
          dh_prev[k] += dh[k] * lt.u[k];
          da[2 * hsz + k] = dn * (1.0 - lt.n[k] * lt.n[k]);
          da[hsz + k] = du * lt.u[k] * (1.0 - lt.u[k]);
        }
        // Candidate block: recurrent input is r * h_prev.
        for (std::size_t k = 0; k < hsz; ++k) {
          const double g = da[2 * hsz + k];
          if (g == 0.0) continue;
          const double* ur = &u[(2 * hsz + k) * hsz];
          double* gur = &gu[(2 * hsz + k) * hsz];
          for (std::size_t j = 0; j < hsz; ++j) {
            gur[j] += g * lt.rh[j];
            drh[j] += g * ur[j];
          }
        }
        for (std::size_t k = 0; k < hsz; ++k) {
          dh_prev[k] += drh[k] * lt.r[k];
          da[k] = drh[k] * lt.h_prev[k] * lt.r[k] * (1.0 - lt.r[k]);
        }
        // Reset and update blocks: recurrent input is h_prev.
        for (std::size_t g = 0; g < 2 * hsz; ++g) {
          const double dg = da[g];
          if (dg == 0.0) continue;
          const double* ur = &u[g * hsz];
          double* gur = &gu[g * hsz];
          for (std::size_t j = 0; j < hsz; ++j) {
            gur[j] += dg * lt.h_prev[j];
            dh_prev[j] += dg * ur[j];
          }
        }
        // Input weights and biases for all blocks.
        dx.assign(in_dim, 0.0);
        for (std::size_t g = 0; g < 3 * hsz; ++g) {
          const double dg = da[g];
          gb[g] += dg;
          if (dg == 0.0) continue;
          const double* wr = &w[g * in_dim];
          double* gwr = &gw[g * in_dim];
          for (std::size_t k = 0; k < in_dim; ++k) {
            gwr[k] += dg * layer_in[k];
            dx[k] += dg * wr[k];
          }
        }
        dh_carry[l] = std::move(dh_prev);
        if (l > 0) dh = dx;
      }
      scatter_embedding_grad(st.input, dx, grads);
    }
  }

  std::size_t n_kernels() const noexcept { return cfg_.n_kernels(); }

 private:
  struct Index {
    std::size_t emb_series = 0, emb_hour = 0, emb_dow = 0;
    std::vector<std::size_t> gru_w, gru_u, gru_b;
    std::size_t mu_w = 0, mu_b = 0, sigma_w = 0, sigma_b = 0;
    std::size_t w1_w = 0, w1_b = 0, w2_w = 0, w2_b = 0;
  };

  explicit Model(const ModelConfig& cfg) : cfg_(cfg) {
    if (cfg.hidden == 0 || cfg.layers == 0 || cfg.n_series == 0 || cfg.weight_hidden == 0)
      throw config_error("InvalidModelConfig", "hidden, layers, n_series and weight_hidden must be positive");
    const std::size_t h = cfg.hidden;
    idx_.emb_series = params_.add(Tensor::zeros("emb.series", {cfg.n_series, cfg.series_emb}));
    if (cfg.use_hour) idx_.emb_hour = params_.add(Tensor::zeros("emb.hour", {kHoursPerDay, cfg.hour_emb}));
    if (cfg.use_dow) idx_.emb_dow = params_.add(Tensor::zeros("emb.dow", {kDaysPerWeek, cfg.dow_emb}));
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      const std::size_t in = l == 0 ? cfg.input_dim() : h;
      const std::string p = "gru" + std::to_string(l);
      idx_.gru_w.push_back(params_.add(Tensor::zeros(p + ".W", {3 * h, in})));
      idx_.gru_u.push_back(params_.add(Tensor::zeros(p + ".U", {3 * h, h})));
      idx_.gru_b.push_back(params_.add(Tensor::zeros(p + ".b", {3 * h})));
    }
    idx_.mu_w = params_.add(Tensor::zeros("head.mu.w", {1, h}));
    idx_.mu_b = params_.add(Tensor::zeros("head.mu.b", {1}));
    idx_.sigma_w = params_.add(Tensor::zeros("head.sigma.w", {1, h}));
    idx_.sigma_b = params_.add(Tensor::zeros("head.sigma.b", {1}));
    idx_.w1_w = params_.add(Tensor::zeros("head.weights.w1", {cfg.weight_hidden, h}));
    idx_.w1_b = params_.add(Tensor::zeros("head.weights.b1", {cfg.weight_hidden}));
    idx_.w2_w = params_.add(Tensor::zeros("head.weights.w2", {cfg.n_kernels(), cfg.weight_hidden}));
    idx_.w2_b = params_.add(Tensor::zeros("head.weights.b2", {cfg.n_kernels()}));
  }

  std::vector<double> embed(const StepInput& in) const {
    std::vector<double> x;
    x.reserve(cfg_.input_dim());
    auto append_row = [&](std::size_t tensor, std::size_t row, std::size_t width) {
      const auto& d = params_[tensor].data;
      x.insert(x.end(), d.begin() + std::ptrdiff_t(row * width), d.begin() + std::ptrdiff_t((row + 1) * width));
    };
    append_row(idx_.emb_series, in.series_id, cfg_.series_emb);
    if (cfg_.use_hour) append_row(idx_.emb_hour, std::size_t(in.hour), cfg_.hour_emb);
    if (cfg_.use_dow) append_row(idx_.emb_dow, std::size_t(in.dow), cfg_.dow_emb);
    x.push_back(in.lag);
    return x;
  }

  std::vector<double> layer_input(const StepTrace& st, std::size_t l) const {
    if (l == 0) return st.x;
    // Output of layer l-1 at this step: (1-u) n + u h_prev.
    const LayerTrace& below = st.layers[l - 1];
    std::vector<double> h(cfg_.hidden);
    for (std::size_t k = 0; k < cfg_.hidden; ++k)
      h[k] = (1.0 - below.u[k]) * below.n[k] + below.u[k] * below.h_prev[k];
    return h;
  }

  void scatter_embedding_grad(const StepInput& in, std::span<const double> dx, GradSet& grads) const {
    std::size_t off = 0;
    auto scatter = [&](std::size_t tensor, std::size_t row, std::size_t width) {
      auto& g = grads[tensor].data;
      for (std::size_t k = 0; k < width; ++k) g[row * width + k] += dx[off + k];
      off += width;
    };
    scatter(idx_.emb_series, in.series_id, cfg_.series_emb);
    if (cfg_.use_hour) scatter(idx_.emb_hour, std::size_t(in.hour), cfg_.hour_emb);
    if (cfg_.use_dow) scatter(idx_.emb_dow, std::size_t(in.dow), cfg_.dow_emb);
  }

  ModelConfig cfg_;
  ParamSet params_;
  Index idx_;
};

/// Outputs of a teacher-forced pass over one window.
struct WindowOutput {
  std::vector<GaussianStepParams> steps;
  WindowTrace trace;
  HiddenState final_state;
};

/// Runs the model over `inputs` starting from `init` (teacher forcing: the
/// lag values inside `inputs` are the observed targets).
inline WindowOutput unroll_window(const Model& model, std::span<const StepInput> inputs, HiddenState init,
                                  bool record_trace = true) {
  if (inputs.empty()) throw config_error("EmptyWindow", "window must contain at least one step");
  WindowOutput out;
  out.steps.reserve(inputs.size());
  if (record_trace) out.trace.steps.resize(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t)
    out.steps.push_back(model.forward_step(init, inputs[t], record_trace ? &out.trace.steps[t] : nullptr));
  out.final_state = std::move(init);
  return out;
}

/// Exact reverse-mode gradients of a window, returned as a fresh GradSet.
inline GradSet compute_gradients(const Model& model, const WindowTrace& trace, std::span<const StepPartials> partials) {
  GradSet g = model.params().zeros_like();
  model.backward(trace, partials, g);
  return g;
}

}  // namespace batchcast
