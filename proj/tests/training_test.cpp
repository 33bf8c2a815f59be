#include "batchcast/training.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"

namespace batchcast {
namespace {

ModelConfig tiny_model(std::size_t n_series) {
  ModelConfig m;
  m.n_series = n_series;
  m.hidden = 6;
  m.layers = 2;
  m.series_emb = 2;
  m.hour_emb = 2;
  m.dow_emb = 2;
  m.weight_hidden = 4;
  return m;
}

PreparedData small_data(std::size_t n_series = 2, std::size_t length = 480, std::size_t p = 6, std::size_t d = 4) {
  SynthConfig sc;
  sc.n_series = n_series;
  sc.length = length;
  sc.seed = 3;
  auto raw = synth_ar(sc);
  set_splits(raw, 24);
  return prepare_data(raw, p, d, 1);
}

TrainConfig small_train(TrainMode mode) {
  TrainConfig c;
  c.mode = mode;
  c.P = 6;
  c.D = 4;
  c.Q = 4;
  c.batch_size = 8;
  c.max_batches_per_epoch = 5;
  c.max_epochs = 3;
  c.lr = 1e-2;
  c.seed = 11;
  c.threads = 1;
  return c;
}

TEST(Adam, ZeroGradientLeavesParams) {
  ParamSet p;
  p.add(Tensor{"a", {3}, {1.0, -2.0, 0.5}});
  const ParamSet before = p;
  auto opt = OptState::for_params(p);
  for (int i = 0; i < 5; ++i) adam_step(p, p.zeros_like(), opt, 1e-3);
  EXPECT_EQ(p[0].data, before[0].data);
  EXPECT_EQ(opt.step, 5u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamSet p;
  p.add(Tensor{"a", {4}, {0.0, 0.0, 0.0, 0.0}});
  GradSet g;
  g.add(Tensor{"a", {4}, {3.0, -0.01, 1e3, -7.5}});
  auto opt = OptState::for_params(p);
  adam_step(p, g, opt, 1e-3);
  for (std::size_t k = 0; k < 4; ++k) {
    const double gk = g[0].data[k];
    EXPECT_NEAR(p[0].data[k], -1e-3 * gk / (std::abs(gk) + 1e-8), 1e-12);
    EXPECT_NEAR(std::abs(p[0].data[k]), 1e-3, 1e-8);
  }
}

TEST(Adam, ShapeMismatch) {
  ParamSet p;
  p.add(Tensor{"a", {2}, {0, 0}});
  GradSet g;
  g.add(Tensor{"a", {3}, {0, 0, 0}});
  auto opt = OptState::for_params(p);
  try {
    adam_step(p, g, opt, 1e-3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "ShapeMismatch");
  }
}

TEST(EarlyStopping, WorseningAfterEpochThree) {
  EarlyStopping es(10);
  const double vals[] = {5.0, 4.0, 3.0};
  std::size_t stop_epoch = 0;
  for (std::size_t epoch = 1; epoch <= 100; ++epoch) {
    const double v = epoch <= 3 ? vals[epoch - 1] : 3.0 + double(epoch - 3);
    if (es.update(epoch, v)) {
      stop_epoch = epoch;
      break;
    }
  }
  EXPECT_EQ(stop_epoch, 13u);
  EXPECT_EQ(es.best_epoch(), 3u);
  EXPECT_EQ(es.best_loss(), 3.0);
}

TEST(EarlyStopping, TiesDoNotCountAsImprovement) {
  EarlyStopping es(2);
  EXPECT_FALSE(es.update(1, 1.0));
  EXPECT_FALSE(es.update(2, 1.0));
  EXPECT_TRUE(es.update(3, 1.0));
  EXPECT_EQ(es.best_epoch(), 1u);
}

TEST(Objective, IidEqualsPinnedIdentityGls) {
  const auto data = small_data();
  const auto model = Model::init(tiny_model(2), 1);
  const auto bank = build_kernel_bank(4);
  auto iid = small_train(TrainMode::Iid);
  auto gls = small_train(TrainMode::Gls);
  gls.pin_identity = true;
  for (std::size_t i = 0; i < data.train_batches.size(); i += 37) {
    GradSet ga = model.params().zeros_like(), gb = model.params().zeros_like();
    const double la = minibatch_objective(model, bank, data.ds, data.features, data.train_batches[i], iid, &ga);
    const double lb = minibatch_objective(model, bank, data.ds, data.features, data.train_batches[i], gls, &gb);
    EXPECT_NEAR(la, lb, 1e-10);
    for (std::size_t t = 0; t < ga.size(); ++t)
      for (std::size_t k = 0; k < ga[t].size(); ++k) ASSERT_NEAR(ga[t].data[k], gb[t].data[k], 1e-10) << ga[t].name;
  }
}

TEST(Objective, GlsGradientMatchesFiniteDifferences) {
  const auto data = small_data();
  auto model = Model::init(tiny_model(2), 2);
  const auto bank = build_kernel_bank(4);
  const auto cfg = small_train(TrainMode::Gls);
  const MiniBatch mb = data.train_batches[50];
  GradSet g = model.params().zeros_like();
  minibatch_objective(model, bank, data.ds, data.features, mb, cfg, &g);
  std::mt19937_64 rng(5);
  for (std::size_t ti = 0; ti < model.params().size(); ++ti) {
    auto& t = model.params()[ti];
    std::uniform_int_distribution<std::size_t> pick(0, t.size() - 1);
    for (int rep = 0; rep < 4; ++rep) {
      const std::size_t c = pick(rng);
      const double fd = oracle::central_diff(
          [&] { return minibatch_objective(model, bank, data.ds, data.features, mb, cfg, nullptr); }, t.data[c], 1e-5);
      // Embedding rows not touched by this mini-batch have exactly zero gradient.
      EXPECT_LT(oracle::rel_err(g[ti].data[c], fd, 1e-6), 1e-4) << t.name << "[" << c << "]";
    }
  }
}

TEST(Objective, UsesNewestWindowWeights) {
  const auto data = small_data();
  const auto model = Model::init(tiny_model(2), 3);
  const auto bank = build_kernel_bank(4);
  const auto cfg = small_train(TrainMode::Gls);
  const MiniBatch mb = data.train_batches[10];
  const auto f = forward_minibatch(model, data.ds, data.features, mb, cfg.P, cfg.D, false);
  const auto ref = backprop_gls(f.mu, f.sigma, f.weights.back(), f.z, bank);
  EXPECT_NEAR(minibatch_objective(model, bank, data.ds, data.features, mb, cfg, nullptr), ref.loss, 1e-12);
  EXPECT_EQ(f.z[3], data.ds.series[mb.series].values[mb.t]);
  EXPECT_EQ(f.z[0], data.ds.series[mb.series].values[mb.t - 3]);
}

TEST(PrepareData, BatchesStayInsideSplits) {
  const auto data = small_data();
  for (const auto& mb : data.train_batches) {
    EXPECT_LT(mb.t, data.ds.series[mb.series].train_end);
    EXPECT_GE(mb.t + 1, 4u + 6u);
  }
  for (const auto& mb : data.val_batches) {
    EXPECT_GE(mb.t + 1 - 4, data.ds.series[mb.series].train_end);
    EXPECT_LT(mb.t, data.ds.series[mb.series].val_end);
  }
  EXPECT_EQ(data.train_batches.size(), 2u * (432u - 10u + 1u));
}

TEST(Train, BatchCapAndHistory) {
  const auto data = small_data();
  auto cfg = small_train(TrainMode::Gls);
  std::size_t seen = 0;
  const auto r = train(cfg, tiny_model(2), data, [&](const EpochRecord&) { ++seen; });
  ASSERT_EQ(r.history.size(), 3u);
  EXPECT_EQ(seen, 3u);
  for (const auto& h : r.history) {
    EXPECT_LE(h.batches, 5u);
    EXPECT_TRUE(std::isfinite(h.train_loss));
    EXPECT_EQ(h.lr, 1e-2);
  }
}

TEST(Train, RestoresBestParameters) {
  const auto data = small_data();
  auto cfg = small_train(TrainMode::Gls);
  cfg.max_epochs = 6;
  const auto r = train(cfg, tiny_model(2), data);
  const auto bank = build_kernel_bank(4);
  EXPECT_NEAR(mean_objective(r.model, bank, data, data.val_batches, cfg), r.best_val_loss, 1e-12);
  double best = 1e300;
  for (const auto& h : r.history) best = std::min(best, h.val_loss);
  EXPECT_EQ(best, r.best_val_loss);
}

TEST(Train, DeterministicAcrossRunsAndThreads) {
  const auto data = small_data();
  auto cfg = small_train(TrainMode::Gls);
  const auto a = train(cfg, tiny_model(2), data);
  const auto b = train(cfg, tiny_model(2), data);
  cfg.threads = 3;
  const auto c = train(cfg, tiny_model(2), data);
  for (std::size_t i = 0; i < a.model.params().size(); ++i) {
    EXPECT_EQ(a.model.params()[i].data, b.model.params()[i].data);
    EXPECT_EQ(a.model.params()[i].data, c.model.params()[i].data);
  }
  for (std::size_t e = 0; e < a.history.size(); ++e) EXPECT_EQ(a.history[e].val_loss, c.history[e].val_loss);
}

TEST(Train, LossDecreasesOverFiftySteps) {
  const auto data = small_data(1, 480);
  auto cfg = small_train(TrainMode::Iid);
  cfg.max_epochs = 10;
  cfg.patience = 100;
  const auto r = train(cfg, tiny_model(1), data);
  ASSERT_EQ(r.history.size(), 10u);
  EXPECT_LT(r.history.back().train_loss, r.history.front().train_loss);
  EXPECT_LT(r.best_val_loss, r.history.front().val_loss);
}

TEST(Train, DivergedLossIsReported) {
  auto data = small_data();
  data.ds.series[0].values[100] = std::numeric_limits<double>::infinity();
  auto cfg = small_train(TrainMode::Iid);
  cfg.max_batches_per_epoch = 1000;
  cfg.max_epochs = 1;
  try {
    train(cfg, tiny_model(2), data);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "DivergedLoss");
    EXPECT_EQ(e.kind(), ErrorKind::Numerical);
  }
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.D = 1;
  EXPECT_THROW(c.validate(), Error);
  c.mode = TrainMode::Iid;
  EXPECT_NO_THROW(c.validate());
  EXPECT_THROW(parse_train_mode("mle"), Error);
}

}  // namespace
}  // namespace batchcast
