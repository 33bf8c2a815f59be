#pragma once

// Text checkpoint: a JSON document holding model hyperparameters, the
// standardization table and every parameter tensor (name, shape, flat data).
// Doubles are written in shortest round-trip form, so save -> load is exact.

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "batchcast/data.hpp"
#include "batchcast/error.hpp"
#include "batchcast/net.hpp"
#include "batchcast/training.hpp"

namespace batchcast {

inline constexpr const char* kCheckpointVersion = "batchcast-ckpt-v1";

struct Checkpoint {
  ModelConfig model_config;
  TrainMode mode = TrainMode::Gls;
  std::size_t P = 0, D = 0, Q = 0;
  Granularity granularity = Granularity::Hourly;
  std::vector<std::string> series_names;
  ScalerTable scalers;
  ParamSet params;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
};

inline nlohmann::json checkpoint_to_json(const Checkpoint& c) {
  using nlohmann::json;
  json j;
  j["version"] = kCheckpointVersion;
  const auto& m = c.model_config;
  j["model"] = {{"n_series", m.n_series},         {"hidden", m.hidden},       {"layers", m.layers},
                {"series_emb", m.series_emb},     {"hour_emb", m.hour_emb},   {"dow_emb", m.dow_emb},
                {"weight_hidden", m.weight_hidden}, {"use_hour", m.use_hour}, {"use_dow", m.use_dow},
                {"lengthscales", m.lengthscales}};
  j["train"] = {{"mode", to_string(c.mode)}, {"P", c.P}, {"D", c.D}, {"Q", c.Q},
                {"best_epoch", c.best_epoch}, {"best_val_loss", c.best_val_loss}};
  j["granularity"] = to_string(c.granularity);
  json sc = json::array();
  for (std::size_t i = 0; i < c.scalers.per_series.size(); ++i)
    sc.push_back({{"series_id", i < c.series_names.size() ? c.series_names[i] : std::to_string(i)},
                  {"mean", c.scalers.per_series[i].mean},
                  {"std", c.scalers.per_series[i].std}});
  j["scalers"] = std::move(sc);
  json ps = json::array();
  for (const auto& t : c.params) ps.push_back({{"name", t.name}, {"shape", t.shape}, {"data", t.data}});
  j["params"] = std::move(ps);
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<std::string>() != kCheckpointVersion)
      throw compat_error("CheckpointVersion", "unsupported checkpoint version '" + j.at("version").get<std::string>() + "'");
    Checkpoint c;
    const auto& m = j.at("model");
    c.model_config.n_series = m.at("n_series");
    c.model_config.hidden = m.at("hidden");
    c.model_config.layers = m.at("layers");
    c.model_config.series_emb = m.at("series_emb");
    c.model_config.hour_emb = m.at("hour_emb");
    c.model_config.dow_emb = m.at("dow_emb");
    c.model_config.weight_hidden = m.at("weight_hidden");
    c.model_config.use_hour = m.at("use_hour");
    c.model_config.use_dow = m.at("use_dow");
    c.model_config.lengthscales = m.at("lengthscales").get<std::vector<double>>();
    const auto& t = j.at("train");
    c.mode = parse_train_mode(t.at("mode").get<std::string>());
    c.P = t.at("P");
    c.D = t.at("D");
    c.Q = t.at("Q");
    c.best_epoch = t.value("best_epoch", std::size_t{0});
    c.best_val_loss = t.value("best_val_loss", 0.0);
    c.granularity = parse_granularity(j.at("granularity").get<std::string>());
    for (const auto& s : j.at("scalers")) {
      c.series_names.push_back(s.at("series_id").get<std::string>());
      c.scalers.per_series.push_back(Scaler{s.at("mean"), s.at("std")});
    }
    for (const auto& p : j.at("params"))
      c.params.add(Tensor{p.at("name"), p.at("shape").get<std::vector<std::size_t>>(),
                          p.at("data").get<std::vector<double>>()});
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw compat_error("CheckpointFormat", std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream out(path);
  if (!out) throw config_error("FileNotWritable", "cannot write checkpoint '" + path + "'");
  out << checkpoint_to_json(c).dump(1) << '\n';
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("FileNotFound", "cannot open checkpoint '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw compat_error("CheckpointFormat", std::string("checkpoint is not valid JSON: ") + e.what());
  }
  return checkpoint_from_json(j);
}

/// Rebuilds the model; mismatched tensor shapes raise a Compatibility error
/// naming the tensor.
inline Model model_from_checkpoint(const Checkpoint& c) { return Model::from_params(c.model_config, c.params); }

}  // namespace batchcast
