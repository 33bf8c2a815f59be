#pragma once

// Experiment driver shared by the command-line tool: flat JSON configuration,
// the synth / train / evaluate / acf workflows, and their file artifacts.
//
// Checksums in run-manifest.json use OpenSSL's SHA-256, so targets including
// this header must link OpenSSL::Crypto.

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "batchcast/checkpoint.hpp"
#include "batchcast/data.hpp"
#include "batchcast/error.hpp"
#include "batchcast/forecast.hpp"
#include "batchcast/metrics.hpp"
#include "batchcast/training.hpp"

namespace batchcast {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

struct ExperimentConfig {
  std::string dataset;
  std::string format = "long-csv";
  std::string granularity;  // empty: inferred from the data
  std::uint64_t seed = 0;

  SynthConfig synth;
  ModelConfig model;
  TrainConfig train;

  std::size_t n_samples = 100;
  std::size_t rolling_starts = 7;
  std::string eval_mode = "calibrated";  // calibrated | iid | seasonal-naive
  bool anchored = false;
  bool reset_buffer_per_sample = true;
  std::size_t season = 0;  // 0: from granularity
  std::size_t acf_max_lag = 24;
  std::string checkpoint;  // empty: <out>/checkpoint.json

  /// Every key with its effective value, as recorded in run manifests.
  json resolved;
};

/// Defaults for every recognised key. P and D of 0 mean "equal to Q".
inline json default_config_json() {
  const ExperimentConfig d;
  return json{
      {"dataset", d.dataset},
      {"format", d.format},
      {"granularity", d.granularity},
      {"seed", d.seed},
      {"n_series", d.synth.n_series},
      {"length", d.synth.length},
      {"phi", d.synth.phi},
      {"amplitude", d.synth.amplitude},
      {"period", d.synth.period},
      {"noise_scale", d.synth.noise_scale},
      {"level", d.synth.level},
      {"level_spread", d.synth.level_spread},
      {"start", format_rfc3339(d.synth.start)},
      {"hidden", d.model.hidden},
      {"layers", d.model.layers},
      {"series_emb", d.model.series_emb},
      {"hour_emb", d.model.hour_emb},
      {"dow_emb", d.model.dow_emb},
      {"weight_hidden", d.model.weight_hidden},
      {"lengthscales", d.model.lengthscales},
      {"mode", to_string(d.train.mode)},
      {"P", 0},
      {"D", 0},
      {"Q", d.train.Q},
      {"batch_size", d.train.batch_size},
      {"max_epochs", d.train.max_epochs},
      {"max_batches_per_epoch", d.train.max_batches_per_epoch},
      {"lr", d.train.lr},
      {"patience", d.train.patience},
      {"stride", d.train.stride},
      {"clip_norm", d.train.clip_norm},
      {"sigma_floor", d.train.sigma_floor},
      {"pin_identity", d.train.pin_identity},
      {"threads", 0},
      {"n_samples", d.n_samples},
      {"rolling_starts", d.rolling_starts},
      {"eval_mode", d.eval_mode},
      {"anchored", d.anchored},
      {"reset_buffer_per_sample", d.reset_buffer_per_sample},
      {"season", d.season},
      {"acf_max_lag", d.acf_max_lag},
      {"checkpoint", d.checkpoint},
  };
}

/// Parses the right-hand side of `--set key=value`: JSON if it parses,
/// otherwise a plain string.
inline json parse_override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return json(text);
  }
}

inline void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw config_error("InvalidOverride", "expected key=value, got '" + assignment + "'");
  cfg[assignment.substr(0, eq)] = parse_override_value(assignment.substr(eq + 1));
}

namespace detail {

template <typename T>
T get_key(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw config_error("InvalidConfigValue", std::string("config key '") + key + "' has an invalid value: " +
                                                 j.at(key).dump());
  }
}

inline std::size_t get_count(const json& j, const char* key) {
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw config_error("InvalidConfigValue", std::string("config key '") + key + "' must be a non-negative integer, got " +
                                                 v.dump());
  return v.get<std::size_t>();
}

}  // namespace detail

/// Validates keys and types of a merged configuration document.
inline ExperimentConfig config_from_json(const json& user) {
  if (!user.is_object()) throw config_error("InvalidConfig", "configuration must be a JSON object");
  json j = default_config_json();
  for (const auto& [key, value] : user.items()) {
    if (!j.contains(key)) throw config_error("UnknownConfigKey", "unknown config key '" + key + "'");
    j[key] = value;
  }
  using detail::get_count;
  using detail::get_key;

  ExperimentConfig c;
  c.dataset = get_key<std::string>(j, "dataset");
  c.format = get_key<std::string>(j, "format");
  parse_csv_format(c.format);
  c.granularity = get_key<std::string>(j, "granularity");
  if (!c.granularity.empty()) parse_granularity(c.granularity);
  c.seed = get_count(j, "seed");

  c.synth.n_series = get_count(j, "n_series");
  c.synth.length = get_count(j, "length");
  c.synth.phi = get_key<double>(j, "phi");
  c.synth.amplitude = get_key<double>(j, "amplitude");
  c.synth.period = get_count(j, "period");
  c.synth.noise_scale = get_key<double>(j, "noise_scale");
  c.synth.level = get_key<double>(j, "level");
  c.synth.level_spread = get_key<double>(j, "level_spread");
  c.synth.seed = c.seed;
  const auto start = parse_timestamp(get_key<std::string>(j, "start"));
  if (!start || start->is_step) throw config_error("InvalidConfigValue", "start must be an RFC 3339 timestamp");
  c.synth.start = start->value;
  c.synth.granularity = c.granularity.empty() ? Granularity::Hourly : parse_granularity(c.granularity);

  c.model.hidden = get_count(j, "hidden");
  c.model.layers = get_count(j, "layers");
  c.model.series_emb = get_count(j, "series_emb");
  c.model.hour_emb = get_count(j, "hour_emb");
  c.model.dow_emb = get_count(j, "dow_emb");
  c.model.weight_hidden = get_count(j, "weight_hidden");
  c.model.lengthscales = get_key<std::vector<double>>(j, "lengthscales");

  c.train.mode = parse_train_mode(get_key<std::string>(j, "mode"));
  c.train.Q = get_count(j, "Q");
  c.train.P = get_count(j, "P");
  c.train.D = get_count(j, "D");
  if (c.train.P == 0) c.train.P = c.train.Q;
  if (c.train.D == 0) c.train.D = c.train.Q;
  c.train.batch_size = get_count(j, "batch_size");
  c.train.max_epochs = get_count(j, "max_epochs");
  c.train.max_batches_per_epoch = get_count(j, "max_batches_per_epoch");
  c.train.lr = get_key<double>(j, "lr");
  c.train.patience = get_count(j, "patience");
  c.train.stride = get_count(j, "stride");
  c.train.clip_norm = get_key<double>(j, "clip_norm");
  c.train.sigma_floor = get_key<double>(j, "sigma_floor");
  c.train.pin_identity = get_key<bool>(j, "pin_identity");
  c.train.threads = get_count(j, "threads");
  c.train.seed = c.seed;
  c.train.validate();

  c.n_samples = get_count(j, "n_samples");
  c.rolling_starts = get_count(j, "rolling_starts");
  c.eval_mode = get_key<std::string>(j, "eval_mode");
  if (c.eval_mode != "calibrated" && c.eval_mode != "iid" && c.eval_mode != "seasonal-naive")
    throw config_error("InvalidMode", "eval_mode must be calibrated, iid or seasonal-naive, got '" + c.eval_mode + "'");
  c.anchored = get_key<bool>(j, "anchored");
  c.reset_buffer_per_sample = get_key<bool>(j, "reset_buffer_per_sample");
  c.season = get_count(j, "season");
  c.acf_max_lag = get_count(j, "acf_max_lag");
  c.checkpoint = get_key<std::string>(j, "checkpoint");
  if (c.n_samples == 0 || c.rolling_starts == 0)
    throw config_error("InvalidConfigValue", "n_samples and rolling_starts must be positive");

  c.resolved = j;
  c.resolved["P"] = c.train.P;
  c.resolved["D"] = c.train.D;
  return c;
}

inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw config_error("FileNotFound", "cannot open config '" + path + "'");
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw config_error("InvalidConfig", "config '" + path + "' is not valid JSON: " + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(j, o);
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Artifacts

inline std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("FileNotFound", "cannot read '" + path.string() + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), std::streamsize(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), std::size_t(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

/// Shortest round-trip text for a double.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw config_error("FileNotWritable", "cannot write '" + path.string() + "'");
  return out;
}

inline void write_manifest(const std::filesystem::path& out_dir, const std::string& command,
                           const ExperimentConfig& cfg, const std::vector<std::string>& artifacts) {
  json m;
  m["command"] = command;
  m["seed"] = cfg.seed;
  m["config"] = cfg.resolved;
  json sums = json::object();
  for (const auto& a : artifacts) sums[a] = sha256_file(out_dir / a);
  m["artifacts"] = sums;
  open_output(out_dir / "run-manifest.json") << m.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Data loading

/// Loads the configured dataset and marks validation / test spans of
/// Q + rolling_starts - 1 steps each.
inline TimeSeriesDataset load_experiment_data(const ExperimentConfig& cfg) {
  if (cfg.dataset.empty()) throw config_error("MissingDataset", "config key 'dataset' is required");
  std::optional<Granularity> g;
  if (!cfg.granularity.empty()) g = parse_granularity(cfg.granularity);
  TimeSeriesDataset ds = load_dataset(cfg.dataset, parse_csv_format(cfg.format), g);
  set_splits(ds, test_span_length(cfg.train.Q, cfg.rolling_starts));
  return ds;
}

inline std::size_t default_season(Granularity g) {
  switch (g) {
    case Granularity::Hourly: return 24;
    case Granularity::FiveMin: return 288;
    case Granularity::Daily: return 7;
    case Granularity::Workday: return 5;
    case Granularity::Quarterly: return 4;
  }
  return 1;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalReport {
  double crps = 0.0;            // sample-fit Gaussian CRPS, normalized
  double crps_empirical = 0.0;  // sample-based estimator, normalized
  double risk_05 = 0.0;
  double risk_09 = 0.0;
  double mse = 0.0;
  std::size_t n_points = 0;
  std::map<std::string, double> crps_per_series;

  json to_json() const {
    json j{{"crps", crps},       {"crps_empirical", crps_empirical}, {"risk_0.5", risk_05},
           {"risk_0.9", risk_09}, {"mse", mse},                       {"n_points", n_points}};
    j["crps_per_series"] = crps_per_series;
    return j;
  }
};

struct EvalOutput {
  EvalReport report;
  std::vector<ForecastResult> forecasts;  // empty for seasonal-naive
  /// Point forecasts and observations in evaluation order (series, start, step).
  std::vector<double> point, observed;
};

/// Index into a ForecastResult's quantile table.
inline std::size_t quantile_index(const ForecastResult& r, double rho) {
  for (std::size_t j = 0; j < r.quantile_levels.size(); ++j)
    if (std::abs(r.quantile_levels[j] - rho) < 1e-9) return j;
  throw config_error("InvalidRho", "quantile level " + fmt(rho) + " not in table");
}

/// Rolling evaluation: Q-step forecasts from each of the `rolling_starts`
/// origins at the start of the test span, for every series. Metrics are on
/// original units and aggregated over all series and origins.
inline EvalOutput evaluate_rolling(const Model& model, const TimeSeriesDataset& raw, const ScalerTable& scalers,
                                   const ExperimentConfig& cfg) {
  const std::size_t p = cfg.train.P, d = cfg.train.D, q = cfg.train.Q;
  const bool naive = cfg.eval_mode == "seasonal-naive";
  const TimeSeriesDataset ds = naive ? raw : apply_scalers(raw, scalers);
  const FeatureTable ft(ds);
  const KernelBank bank = build_kernel_bank(std::max<std::size_t>(d, 2), model.config().lengthscales);

  ForecastConfig fc;
  fc.P = p;
  fc.D = std::max<std::size_t>(d, 2);
  fc.Q = q;
  fc.n_samples = cfg.n_samples;
  fc.mode = cfg.eval_mode == "iid" ? ForecastMode::Iid : ForecastMode::Calibrated;
  fc.seed = cfg.seed;
  fc.anchored = cfg.anchored;
  fc.reset_buffer_per_sample = cfg.reset_buffer_per_sample;
  fc.pin_identity = cfg.train.pin_identity;
  fc.threads = cfg.train.threads;

  EvalOutput out;
  std::vector<double> crps, crps_emp, q05, q09;
  for (std::size_t i = 0; i < raw.n_series(); ++i) {
    const auto& s = raw.series[i];
    double series_crps = 0.0, series_abs = 0.0;
    for (std::size_t r = 0; r < cfg.rolling_starts; ++r) {
      const std::size_t origin = s.val_end + r;
      if (naive) {
        const std::size_t season = cfg.season ? cfg.season : default_season(raw.granularity);
        if (origin < season) throw data_error("HistoryTooShort", "seasonal-naive needs one season of history");
        for (std::size_t k = 0; k < q; ++k) {
          const double pred = s.values[origin - season + k % season];
          const double y = s.values[origin + k];
          out.point.push_back(pred);
          out.observed.push_back(y);
          crps.push_back(std::abs(y - pred));
          crps_emp.push_back(std::abs(y - pred));
          q05.push_back(pred);
          q09.push_back(pred);
          series_crps += crps.back();
          series_abs += std::abs(y);
        }
        continue;
      }
      ForecastResult fr = rolling_forecast(model, bank, ds, ft, scalers.per_series[i], i, origin, fc);
      const std::size_t j05 = quantile_index(fr, 0.5), j09 = quantile_index(fr, 0.9);
      for (std::size_t k = 0; k < q; ++k) {
        const double y = s.values[origin + k];
        const auto col = fr.step_samples(k);
        out.point.push_back(fr.mean(k));
        out.observed.push_back(y);
        crps.push_back(metrics::crps_sample_fit(col, y));
        crps_emp.push_back(metrics::crps_empirical(col, y));
        q05.push_back(fr.quantiles[k][j05]);
        q09.push_back(fr.quantiles[k][j09]);
        series_crps += crps.back();
        series_abs += std::abs(y);
      }
      out.forecasts.push_back(std::move(fr));
    }
    out.report.crps_per_series[s.name] = series_abs > 0.0 ? series_crps / series_abs : 0.0;
  }
  out.report.crps = metrics::aggregate_crps(crps, out.observed);
  out.report.crps_empirical = metrics::aggregate_crps(crps_emp, out.observed);
  out.report.risk_05 = metrics::rho_risk(out.observed, q05, 0.5);
  out.report.risk_09 = metrics::rho_risk(out.observed, q09, 0.9);
  out.report.mse = metrics::mse(out.observed, out.point);
  out.report.n_points = out.observed.size();
  return out;
}

/// One-step residuals of every series over all targets with a full window.
struct ResidualSet {
  std::vector<std::vector<double>> iid, calibrated;
};

inline ResidualSet series_residuals(const Model& model, const TimeSeriesDataset& raw, const ScalerTable& scalers,
                                    std::size_t p, std::size_t d, std::size_t threads, std::size_t hi_offset = 0) {
  const TimeSeriesDataset ds = apply_scalers(raw, scalers);
  const FeatureTable ft(ds);
  const std::size_t dd = std::max<std::size_t>(d, 2);
  const KernelBank bank = build_kernel_bank(dd, model.config().lengthscales);
  ResidualSet out;
  for (std::size_t i = 0; i < ds.n_series(); ++i) {
    const std::size_t lo = std::max(p, dd - 1) + 1;
    const std::size_t hi = ds.series[i].size() - std::min(hi_offset, ds.series[i].size());
    auto r = one_step_residuals(model, bank, ds, ft, i, lo, hi, p, dd, threads);
    out.iid.push_back(std::move(r.iid));
    out.calibrated.push_back(std::move(r.calibrated));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands

namespace fs = std::filesystem;

inline fs::path checkpoint_path(const ExperimentConfig& cfg, const fs::path& out_dir) {
  return cfg.checkpoint.empty() ? out_dir / "checkpoint.json" : fs::path(cfg.checkpoint);
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw config_error("FileNotWritable", "cannot create output directory '" + dir.string() + "'");
}

inline void cmd_synth(const ExperimentConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  ensure_dir(out_dir);
  const TimeSeriesDataset ds = synth_ar(cfg.synth);
  const fs::path file = cfg.dataset.empty() ? out_dir / "synth.csv" : out_dir / fs::path(cfg.dataset).filename();
  {
    auto out = open_output(file);
    write_long_csv(out, ds);
  }
  log << "wrote " << file.string() << ": " << ds.n_series() << " series x " << cfg.synth.length << " steps (phi "
      << cfg.synth.phi << ", seed " << cfg.seed << ")\n";
  write_manifest(out_dir, "synth", cfg, {file.filename().string()});
}

inline Checkpoint make_checkpoint(const ExperimentConfig& cfg, const ModelConfig& mc, const TimeSeriesDataset& raw,
                                  const PreparedData& data, const TrainResult& r) {
  Checkpoint c;
  c.model_config = mc;
  c.mode = cfg.train.mode;
  c.P = cfg.train.P;
  c.D = cfg.train.D;
  c.Q = cfg.train.Q;
  c.granularity = raw.granularity;
  for (const auto& s : raw.series) c.series_names.push_back(s.name);
  c.scalers = data.scalers;
  c.params = r.model.params();
  c.best_epoch = r.best_epoch;
  c.best_val_loss = r.best_val_loss;
  return c;
}

inline ModelConfig model_config_for(const ExperimentConfig& cfg, const TimeSeriesDataset& ds) {
  ModelConfig mc = cfg.model;
  mc.n_series = ds.n_series();
  mc.use_hour = has_hour_covariate(ds.granularity);
  mc.use_dow = has_dow_covariate(ds.granularity);
  return mc;
}

inline TrainResult cmd_train(const ExperimentConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  ensure_dir(out_dir);
  const TimeSeriesDataset raw = load_experiment_data(cfg);
  const PreparedData data = prepare_data(raw, cfg.train.P, cfg.train.D, cfg.train.stride);
  const ModelConfig mc = model_config_for(cfg, raw);
  auto hist = open_output(out_dir / "history.csv");
  hist << "epoch,train_loss,val_loss,lr,clipped\n";
  const TrainResult r = train(cfg.train, mc, data, [&](const EpochRecord& e) {
    hist << e.epoch << ',' << fmt(e.train_loss) << ',' << fmt(e.val_loss) << ',' << fmt(e.lr) << ',' << e.clipped
         << '\n';
    hist.flush();
    log << "epoch " << e.epoch << "  train " << e.train_loss << "  val " << e.val_loss
        << (e.clipped ? "  clipped " + std::to_string(e.clipped) : "") << '\n';
  });
  hist.close();
  const fs::path ckpt = checkpoint_path(cfg, out_dir);
  save_checkpoint(ckpt.string(), make_checkpoint(cfg, mc, raw, data, r));
  log << "best epoch " << r.best_epoch << " (val " << r.best_val_loss << "), checkpoint " << ckpt.string() << '\n';
  std::vector<std::string> artifacts{"history.csv"};
  if (ckpt.parent_path() == out_dir) artifacts.push_back(ckpt.filename().string());
  write_manifest(out_dir, "train", cfg, artifacts);
  return r;
}

/// Loads the checkpoint and checks it against the configuration and data.
inline std::pair<Checkpoint, Model> load_compatible(const ExperimentConfig& cfg, const fs::path& out_dir,
                                                    const TimeSeriesDataset& raw) {
  Checkpoint c = load_checkpoint(checkpoint_path(cfg, out_dir).string());
  if (c.P != cfg.train.P || c.D != cfg.train.D || c.Q != cfg.train.Q)
    throw compat_error("HorizonMismatch", "checkpoint was trained with P/D/Q = " + std::to_string(c.P) + "/" +
                                              std::to_string(c.D) + "/" + std::to_string(c.Q) + ", config has " +
                                              std::to_string(cfg.train.P) + "/" + std::to_string(cfg.train.D) + "/" +
                                              std::to_string(cfg.train.Q));
  std::vector<std::string> names;
  for (const auto& s : raw.series) names.push_back(s.name);
  if (names != c.series_names)
    throw compat_error("SeriesMismatch", "dataset series ids differ from the checkpoint's");
  ModelConfig expect = model_config_for(cfg, raw);
  // Report the first tensor whose shape the configuration would change.
  const Model probe = Model::init(expect, 0);
  probe.params().require_congruent(c.params, ErrorKind::Compatibility);
  Model m = model_from_checkpoint(c);
  return {std::move(c), std::move(m)};
}

inline EvalReport cmd_evaluate(const ExperimentConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  ensure_dir(out_dir);
  const TimeSeriesDataset raw = load_experiment_data(cfg);
  std::optional<std::pair<Checkpoint, Model>> loaded;
  ScalerTable scalers;
  Model model;
  if (cfg.eval_mode != "seasonal-naive") {
    loaded = load_compatible(cfg, out_dir, raw);
    scalers = loaded->first.scalers;
    model = loaded->second;
  }
  const EvalOutput ev = evaluate_rolling(model, raw, scalers, cfg);

  std::vector<std::string> artifacts{"report.json"};
  json report = ev.report.to_json();
  report["meta"] = {{"eval_mode", cfg.eval_mode}, {"seed", cfg.seed},   {"n_samples", cfg.n_samples},
                    {"rolling_starts", cfg.rolling_starts}, {"Q", cfg.train.Q}, {"anchored", cfg.anchored}};
  if (loaded) report["meta"]["train_mode"] = to_string(loaded->first.mode);
  open_output(out_dir / "report.json") << report.dump(2) << '\n';

  if (!ev.forecasts.empty()) {
    auto fcsv = open_output(out_dir / "forecasts.csv");
    auto qcsv = open_output(out_dir / "quantiles.csv");
    auto wcsv = open_output(out_dir / "weights.csv");
    fcsv << "series_id,start,step,sample_idx,value\n";
    qcsv << "series_id,start,step,rho,value\n";
    wcsv << "series_id,start,step";
    for (std::size_t m = 0; m < model.n_kernels(); ++m) wcsv << ",w_" << m;
    wcsv << '\n';
    for (const auto& fr : ev.forecasts) {
      const std::string& id = raw.series[fr.series].name;
      const std::string start = format_timestamp(fr.start);
      for (std::size_t k = 0; k < fr.horizon(); ++k) {
        for (std::size_t i = 0; i < fr.samples.size(); ++i)
          fcsv << id << ',' << start << ',' << k + 1 << ',' << i << ',' << fmt(fr.samples[i][k]) << '\n';
        for (std::size_t j = 0; j < fr.quantile_levels.size(); ++j)
          qcsv << id << ',' << start << ',' << k + 1 << ',' << std::to_string(fr.quantile_levels[j]).substr(0, 4) << ','
               << fmt(fr.quantiles[k][j]) << '\n';
        wcsv << id << ',' << start << ',' << k + 1;
        for (double w : fr.mean_weights(k)) wcsv << ',' << fmt(w);
        wcsv << '\n';
      }
    }
    artifacts.insert(artifacts.end(), {"forecasts.csv", "quantiles.csv", "weights.csv"});
  }
  log << "crps " << ev.report.crps << "  risk_0.5 " << ev.report.risk_05 << "  risk_0.9 " << ev.report.risk_09
      << "  mse " << ev.report.mse << "  (" << ev.report.n_points << " points, " << cfg.eval_mode << ")\n";
  write_manifest(out_dir, "evaluate", cfg, artifacts);
  return ev.report;
}

inline void cmd_acf(const ExperimentConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  ensure_dir(out_dir);
  const TimeSeriesDataset raw = load_experiment_data(cfg);
  const auto [ckpt, model] = load_compatible(cfg, out_dir, raw);
  const ResidualSet res = series_residuals(model, raw, ckpt.scalers, cfg.train.P, cfg.train.D, cfg.train.threads);

  auto out = open_output(out_dir / "acf.csv");
  out << "series_id,residual,lag,acf,band\n";
  auto emit = [&](const std::string& id, const char* kind, const metrics::AcfResult& a) {
    for (std::size_t k = 0; k < a.values.size(); ++k)
      out << id << ',' << kind << ',' << k << ',' << fmt(a.values[k]) << ',' << fmt(a.band) << '\n';
  };
  for (std::size_t i = 0; i < raw.n_series(); ++i) {
    emit(raw.series[i].name, "iid", metrics::acf(res.iid[i], cfg.acf_max_lag));
    emit(raw.series[i].name, "calibrated", metrics::acf(res.calibrated[i], cfg.acf_max_lag));
  }
  const auto pi = metrics::acf_pooled(res.iid, cfg.acf_max_lag);
  const auto pc = metrics::acf_pooled(res.calibrated, cfg.acf_max_lag);
  emit("all", "iid", pi);
  emit("all", "calibrated", pc);
  out.close();
  log << "pooled lag-1 acf: iid " << pi.values[1] << ", calibrated " << pc.values[1] << " (band " << pi.band << ")\n";
  write_manifest(out_dir, "acf", cfg, {"acf.csv"});
}

}  // namespace batchcast
