#include "batchcast/checkpoint.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

namespace batchcast {
namespace {

namespace fs = std::filesystem;

fs::path temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "batchcast_checkpoint_test";
  fs::create_directories(dir);
  return dir / name;
}

TimeSeriesDataset fixture_raw() {
  SynthConfig sc;
  sc.n_series = 2;
  sc.length = 400;
  sc.seed = 8;
  auto raw = synth_ar(sc);
  set_splits(raw, 24);
  return raw;
}

struct Fixture {
  TimeSeriesDataset raw = fixture_raw();
  PreparedData data = prepare_data(raw, 6, 4, 1);
  TrainConfig cfg;
  ModelConfig mcfg;

  Fixture() {
    cfg.P = 6;
    cfg.D = 4;
    cfg.Q = 4;
    cfg.batch_size = 8;
    cfg.max_batches_per_epoch = 4;
    cfg.max_epochs = 2;
    cfg.lr = 1e-2;
    cfg.threads = 1;
    mcfg.n_series = 2;
    mcfg.hidden = 5;
    mcfg.layers = 2;
  }
};

Fixture make_fixture() { return Fixture(); }

Checkpoint to_checkpoint(const Fixture& f, const TrainResult& r) {
  Checkpoint c;
  c.model_config = f.mcfg;
  c.mode = f.cfg.mode;
  c.P = f.cfg.P;
  c.D = f.cfg.D;
  c.Q = f.cfg.Q;
  c.granularity = f.raw.granularity;
  for (const auto& s : f.raw.series) c.series_names.push_back(s.name);
  c.scalers = f.data.scalers;
  c.params = r.model.params();
  c.best_epoch = r.best_epoch;
  c.best_val_loss = r.best_val_loss;
  return c;
}

TEST(Checkpoint, RoundTripPreservesValidationLoss) {
  const auto f = make_fixture();
  const auto r = train(f.cfg, f.mcfg, f.data);
  const auto path = temp_path("roundtrip.json");
  save_checkpoint(path.string(), to_checkpoint(f, r));
  const Checkpoint back = load_checkpoint(path.string());
  const Model m = model_from_checkpoint(back);
  const auto bank = build_kernel_bank(4);
  const double before = mean_objective(r.model, bank, f.data, f.data.val_batches, f.cfg);
  const double after = mean_objective(m, bank, f.data, f.data.val_batches, f.cfg);
  EXPECT_NEAR(before, after, 1e-12);
  for (std::size_t i = 0; i < m.params().size(); ++i) EXPECT_EQ(m.params()[i].data, r.model.params()[i].data);
  EXPECT_EQ(back.series_names, (std::vector<std::string>{"0", "1"}));
  EXPECT_EQ(back.scalers.per_series[1].std, f.data.scalers.per_series[1].std);
  EXPECT_EQ(back.best_val_loss, r.best_val_loss);
  EXPECT_EQ(back.mode, TrainMode::Gls);
}

TEST(Checkpoint, ShapeMismatchNamesTensor) {
  const auto f = make_fixture();
  auto c = to_checkpoint(f, TrainResult{Model::init(f.mcfg, 0), {}, 0, 0.0});
  c.model_config.hidden = 7;
  try {
    model_from_checkpoint(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Compatibility);
    EXPECT_EQ(e.exit_code(), 5);
    EXPECT_NE(std::string(e.what()).find("gru0"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, RejectsForeignFiles) {
  const auto path = temp_path("bad.json");
  {
    std::ofstream(path) << "{\"version\": \"other\"}";
  }
  try {
    load_checkpoint(path.string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "CheckpointVersion");
  }
  {
    std::ofstream(path) << "not json";
  }
  EXPECT_THROW(load_checkpoint(path.string()), Error);
  {
    std::ofstream(path) << "{\"version\": \"batchcast-ckpt-v1\"}";
  }
  try {
    load_checkpoint(path.string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "CheckpointFormat");
  }
  try {
    load_checkpoint((temp_path("missing") / "x.json").string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "FileNotFound");
  }
}

}  // namespace
}  // namespace batchcast
