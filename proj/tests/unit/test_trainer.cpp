// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "param_vec.hpp"
#include "test_util.hpp"
#include "rfclip/trainer.hpp"

namespace rfclip {
namespace {

using testing::error_code;
using testing::TestRng;

SampleSet small_data(std::uint64_t seed, std::size_t n = 288) {
  SynthConfig c;
  c.n_samples = n;
  c.latent_dim = 4;
  c.dim_image = 6;
  c.dim_text = 6;
  c.attributes = {{"g", 2, {0.6, 0.4}, {1.0, 2.0}, {}}, {"one", 1, {1.0}, {}, {}}};
  c.seed = seed;
  return generate_synthetic(c);
}

struct Splits {
  SampleSet train, val, test;
};

Splits small_splits(std::uint64_t seed) {
  const SampleSet all = small_data(seed);
  const std::vector<std::size_t> sizes{192, 48, 48};
  auto parts = split_sampleset(all, sizes);
  return {parts[0], parts[1], parts[2]};
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 16;
  cfg.adam.lr = 1e-2;
  cfg.lambda = 1e-2;
  cfg.eps = 1e-2;
  cfg.fairness_attribute = "g";
  cfg.embed_dim = 4;
  cfg.init_seed = 5;
  cfg.batch_seed = 6;
  return cfg;
}

TEST(Config, Defaults) {
  const TrainConfig cfg;
  EXPECT_EQ(cfg.epochs, 10);
  EXPECT_EQ(cfg.batch_size, 32u);
  EXPECT_EQ(cfg.adam.lr, 1e-5);
  EXPECT_EQ(cfg.adam.beta1, 0.1);
  EXPECT_EQ(cfg.adam.beta2, 0.1);
  EXPECT_EQ(cfg.adam.weight_decay, 6e-5);
  EXPECT_EQ(cfg.lambda, 1e-7);
  EXPECT_EQ(cfg.eps, 1e-4);
  EXPECT_EQ(cfg.alpha, 3.0);
  EXPECT_EQ(cfg.beta, 3.0);
}

TEST(Config, JsonRoundTrip) {
  TrainConfig cfg = small_config();
  cfg.dbpm_decision = DecisionVariable::kHistoricalMean;
  cfg.sinkhorn_grad = FairGradMode::kFiniteDifference;
  cfg.adam.lr = 0.1 + 0.2;
  cfg.init_seed = 0xFFFFFFFFFFFFFFFFull;
  const auto text = config_to_json(cfg).dump();
  EXPECT_EQ(config_from_json(nlohmann::json::parse(text)), cfg);
}

TEST(Config, PartialJsonOverlaysBase) {
  const TrainConfig cfg = config_from_json(nlohmann::json{{"epochs", 3}, {"dbpm", false}});
  EXPECT_EQ(cfg.epochs, 3);
  EXPECT_FALSE(cfg.dbpm);
  EXPECT_EQ(cfg.lambda, TrainConfig{}.lambda);
}

TEST(Config, BadInputsRejected) {
  EXPECT_EQ(error_code([] { config_from_json(nlohmann::json{{"epoch", 3}}); }), Errc::kConfig);
  EXPECT_EQ(error_code([] { config_from_json(nlohmann::json{{"epochs", "three"}}); }),
            Errc::kConfig);
  EXPECT_EQ(error_code([] { config_from_json(nlohmann::json::array()); }), Errc::kConfig);
  EXPECT_EQ(error_code([] { config_from_json(nlohmann::json{{"dbpm_decision", "median"}}); }),
            Errc::kConfig);
  TrainConfig cfg = small_config();
  cfg.eps = 0.0;
  EXPECT_EQ(error_code([&] { cfg.validate(); }), Errc::kConfig);
  cfg = small_config();
  cfg.fairness_attribute.clear();
  EXPECT_EQ(error_code([&] { cfg.validate(); }), Errc::kConfig);
  cfg.fairness = false;
  EXPECT_NO_THROW(cfg.validate());
}

Checkpoint sample_checkpoint() {
  Checkpoint ck;
  ck.params = init_params(3, 2, 2, 11);
  ck.params.log_temp = 2.0 / 3.0;
  ck.adam = AdamState::zeros_like(ck.params, AdamHyper{});
  TestRng rng(1);
  for (double& x : ck.adam.m_img.values()) x = rng.normal() * 1e-7;
  for (double& x : ck.adam.v_txt.values()) x = rng.uniform() / 3.0;
  ck.adam.step = 17;
  ck.adam.m_s = -1.0 / 7.0;
  ck.epoch = 3;
  LossHistory h(2);
  for (std::size_t e = 1; e <= 3; ++e) {
    h.record(0, e, 1.0 / static_cast<double>(e + 2));
    h.record(1, e, std::sqrt(static_cast<double>(e)));
  }
  ck.history = h;
  ck.val_auc = 0.1 * 7;
  return ck;
}

TEST(Checkpoint, FileRoundTripIsExact) {
  const testing::TempDir dir("ckpt");
  const Checkpoint ck = sample_checkpoint();
  checkpoint_save(ck, dir / "c.json");
  EXPECT_EQ(checkpoint_load(dir / "c.json"), ck);
}

TEST(Checkpoint, VersionZeroRejected) {
  auto j = checkpoint_to_json(sample_checkpoint());
  j["version"] = 0;
  EXPECT_EQ(error_code([&] { checkpoint_from_json(nlohmann::json::parse(j.dump())); }),
            Errc::kVersion);
}

TEST(Checkpoint, TruncatedFileRejected) {
  const testing::TempDir dir("ckpt");
  const std::string text = checkpoint_to_json(sample_checkpoint()).dump();
  std::ofstream(dir / "t.json") << text.substr(0, text.size() / 2);
  EXPECT_EQ(error_code([&] { checkpoint_load(dir / "t.json"); }), Errc::kIntegrity);
  auto j = nlohmann::json::parse(text);
  j["w_img"].erase(0);
  EXPECT_EQ(error_code([&] { checkpoint_from_json(j); }), Errc::kIntegrity);
  EXPECT_EQ(error_code([&] { checkpoint_load(dir / "absent.json"); }), Errc::kIo);
}

TEST(CheckpointProperty, RandomRoundTrips) {
  TestRng rng(2);
  for (int t = 0; t < 50; ++t) {
    Checkpoint ck;
    ck.params = init_params(1 + rng.below(5), 1 + rng.below(5), 1 + rng.below(4), rng.next());
    ck.params.log_temp = rng.uniform(-5, 4.6);
    ck.adam = AdamState::zeros_like(ck.params, AdamHyper{rng.uniform(), 0.5, 0.25, 1e-9, 0.0});
    for (double& x : ck.adam.v_img.values()) x = std::ldexp(rng.uniform(), -static_cast<int>(rng.below(900)));
    ck.epoch = static_cast<int>(rng.below(10));
    if (t % 2) ck.val_auc = rng.uniform();
    const auto j = nlohmann::json::parse(checkpoint_to_json(ck).dump());
    ASSERT_EQ(checkpoint_from_json(j), ck);
  }
}

struct StepInstance {
  EncoderParams params;
  Matrix img, txt;
  std::vector<int> codes;
};

StepInstance random_step(TestRng& rng) {
  const std::size_t b = 3 + rng.below(6), m = 2 + rng.below(5), n = 2 + rng.below(5),
                    k = 2 + rng.below(3);
  StepInstance in{init_params(m, n, k, rng.next()), Matrix(b, m), Matrix(b, n), {}};
  in.params.log_temp = rng.uniform(-0.5, 1.0);
  for (double& x : in.img.values()) x = rng.normal();
  for (double& x : in.txt.values()) x = rng.normal();
  for (std::size_t i = 0; i < b; ++i) in.codes.push_back(static_cast<int>(i % 2 ? rng.below(3) : 0));
  return in;
}

TEST(Step, FullGradientMatchesFiniteDifferences) {
  TestRng rng(3);
  TrainConfig cfg = small_config();
  cfg.lambda = 0.5;
  cfg.eps = 1e-2;
  cfg.sinkhorn_tol = 1e-13;
  cfg.sinkhorn_max_iter = 20000;
  for (int t = 0; t < 20; ++t) {
    const StepInstance in = random_step(rng);
    const double w = rng.uniform(0.05, 1.0);
    const StepResult r = batch_step(in.params, in.img, in.txt, in.codes, w, cfg);
    const auto fd = testing::central_differences(
        [&](const std::vector<double>& x) {
          return batch_step(testing::unflatten(x, in.params), in.img, in.txt, in.codes, w, cfg,
                            false)
              .l3;
        },
        testing::flatten(in.params), 1e-5);
    ASSERT_LT(testing::max_relative_error(testing::flatten(r.grads), fd, 1e-6), 1e-3)
        << "instance " << t;
  }
}

TEST(Step, WeightScalesOnlyContrastivePart) {
  TestRng rng(4);
  TrainConfig cfg = small_config();
  cfg.fairness = false;
  const StepInstance in = random_step(rng);
  const StepResult one = batch_step(in.params, in.img, in.txt, {}, 1.0, cfg);
  const StepResult quarter = batch_step(in.params, in.img, in.txt, {}, 0.25, cfg);
  EXPECT_EQ(one.l1, quarter.l1);
  EXPECT_EQ(quarter.l3, 0.25 * quarter.l1);
  EXPECT_EQ(quarter.fairness, 0.0);
  const auto a = testing::flatten(one.grads), b = testing::flatten(quarter.grads);
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(b[i], 0.25 * a[i], 1e-15 + 1e-12 * std::abs(a[i]));
}

TEST(Step, ThirdLossAddsNonNegativeFairness) {
  TestRng rng(5);
  const TrainConfig cfg = small_config();
  for (int t = 0; t < 50; ++t) {
    const StepInstance in = random_step(rng);
    const double w = rng.uniform(0.0, 1.0);
    const StepResult r = batch_step(in.params, in.img, in.txt, in.codes, w, cfg, false);
    ASSERT_GE(r.fairness, 0.0);
    ASSERT_GE(r.l3, w * r.l1 - 1e-12);
  }
}

TEST(Train, LearningRateZeroFreezesParams) {
  const Splits d = small_splits(1);
  TrainConfig cfg = small_config();
  cfg.adam.lr = 0.0;
  const RunArtifacts run = train(cfg, d.train, d.val);
  EXPECT_EQ(run.final_params, init_params(6, 6, 4, cfg.init_seed));
  for (const EpochCurve& c : run.curves) EXPECT_EQ(c.l1_mean, run.curves[0].l1_mean);
}

TEST(Train, CurveLengthAndEpochOneWeights) {
  const Splits d = small_splits(2);
  for (bool dbpm : {true, false}) {
    for (bool fair : {true, false}) {
      TrainConfig cfg = small_config();
      cfg.dbpm = dbpm;
      cfg.fairness = fair;
      const RunArtifacts run = train(cfg, d.train, d.val);
      ASSERT_EQ(run.curves.size(), 4u);
      ASSERT_EQ(run.checkpoints.size(), 4u);
      EXPECT_EQ(run.audit.size(), 4u * run.plan.batches.size());
      for (const AuditRecord& a : run.audit) {
        if (a.epoch == 1) {
          EXPECT_EQ(a.weight, 1.0);
          EXPECT_FALSE(a.stats.has_value());
        }
        if (!dbpm) {
          EXPECT_EQ(a.weight, 1.0);
        }
      }
      for (const EpochCurve& c : run.curves) {
        EXPECT_LE(c.l2_mean, c.l1_mean + 1e-12);
        EXPECT_GE(c.l3_mean, c.l2_mean - 1e-12);
        if (!fair) {
          EXPECT_EQ(c.fair_mean, 0.0);
        }
      }
    }
  }
}

TEST(Train, AblationIdentity) {
  const Splits d = small_splits(3);
  TrainConfig cfg = small_config();
  cfg.dbpm = false;
  cfg.fairness = false;
  const RunArtifacts run = train(cfg, d.train, d.val);
  for (const EpochCurve& c : run.curves) {
    EXPECT_EQ(c.l2_mean, c.l1_mean);
    EXPECT_EQ(c.l3_mean, c.l1_mean);
    EXPECT_EQ(c.fair_mean, 0.0);
  }
}

TEST(Train, ZeroLambdaMatchesPlainTrajectory) {
  const Splits d = small_splits(4);
  TrainConfig plain = small_config();
  plain.dbpm = false;
  plain.fairness = false;
  TrainConfig zero = plain;
  zero.fairness = true;
  zero.lambda = 0.0;
  const RunArtifacts a = train(plain, d.train, d.val);
  const RunArtifacts b = train(zero, d.train, d.val);
  for (std::size_t e = 0; e < a.checkpoints.size(); ++e)
    EXPECT_EQ(a.checkpoints[e].params, b.checkpoints[e].params);
  EXPECT_EQ(a.final_adam, b.final_adam);
}

TEST(Train, Deterministic) {
  const Splits d = small_splits(5);
  const TrainConfig cfg = small_config();
  const RunArtifacts a = train(cfg, d.train, d.val);
  const RunArtifacts b = train(cfg, d.train, d.val);
  EXPECT_EQ(a.final_params, b.final_params);
  EXPECT_EQ(a.curves, b.curves);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.best, b.best);
}

TEST(Train, BestCheckpointHasHighestValidationAuc) {
  const Splits d = small_splits(6);
  const RunArtifacts run = train(small_config(), d.train, d.val);
  ASSERT_TRUE(run.best.has_value());
  for (const Checkpoint& ck : run.checkpoints) EXPECT_LE(*ck.val_auc, *run.best->val_auc);
}

TEST(Train, ResumeEqualsUninterrupted) {
  const Splits d = small_splits(7);
  TrainConfig cfg = small_config();
  cfg.epochs = 6;
  const RunArtifacts full = train(cfg, d.train, d.val);
  TrainConfig first = cfg;
  first.epochs = 3;
  const RunArtifacts head = train(first, d.train, d.val);

  const testing::TempDir dir("resume");
  checkpoint_save(head.checkpoints.back(), dir / "epoch_3.json");
  const RunArtifacts tail = train(cfg, d.train, d.val, checkpoint_load(dir / "epoch_3.json"));
  EXPECT_EQ(tail.final_params, full.final_params);
  EXPECT_EQ(tail.final_adam, full.final_adam);
  EXPECT_EQ(tail.history, full.history);
  ASSERT_EQ(tail.curves.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(tail.curves[i], full.curves[i + 3]);
}

TEST(Train, ResumeWithoutHistoryRejected) {
  const Splits d = small_splits(8);
  TrainConfig cfg = small_config();
  cfg.epochs = 1;
  Checkpoint ck = train(cfg, d.train, d.val).checkpoints.back();
  ck.history.reset();
  cfg.epochs = 2;
  EXPECT_EQ(error_code([&] { train(cfg, d.train, d.val, ck); }), Errc::kConfig);
}

TEST(Train, MissingAttributeRejected) {
  const Splits d = small_splits(9);
  TrainConfig cfg = small_config();
  cfg.fairness_attribute = "race";
  EXPECT_EQ(error_code([&] { train(cfg, d.train, d.val); }), Errc::kSchema);
}

TEST(Train, DegenerateBatchReportsDivergence) {
  Splits d = small_splits(10);
  for (double& x : d.train.samples[0].image) x = 0.0;
  TrainConfig cfg = small_config();
  try {
    train(cfg, d.train, d.val);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kDiverged);
    EXPECT_NE(std::string(e.what()).find("last good checkpoint: epoch 0"), std::string::npos);
  }
}

TEST(Evaluate, SingleGroupAttribute) {
  const Splits d = small_splits(11);
  const EncoderParams p = init_params(6, 6, 4, 1);
  const auto ev = evaluate(p, d.test, {"one", "g"}, fit_prototypes(p, d.train));
  const MetricsReport& r = *ev.at("one").report;
  EXPECT_EQ(r.dpd, 0.0);
  EXPECT_EQ(r.deodds, 0.0);
  EXPECT_EQ(r.es_auc, r.auc);
  EXPECT_TRUE(ev.at("g").report.has_value());
}

TEST(Evaluate, FailuresStayPerAttribute) {
  const Splits d = small_splits(12);
  const EncoderParams p = init_params(6, 6, 4, 1);
  const auto ev = evaluate(p, d.test, {"race", "g"}, fit_prototypes(p, d.train));
  EXPECT_FALSE(ev.at("race").report.has_value());
  EXPECT_FALSE(ev.at("race").error.empty());
  EXPECT_TRUE(ev.at("g").report.has_value());
}

TEST(Evaluate, TestOrderDoesNotMatter) {
  const Splits d = small_splits(13);
  const EncoderParams p = init_params(6, 6, 4, 2);
  const Prototypes proto = fit_prototypes(p, d.train);
  SampleSet shuffled = d.test;
  TestRng rng(14);
  for (std::size_t i = shuffled.samples.size(); i > 1; --i)
    std::swap(shuffled.samples[i - 1], shuffled.samples[rng.below(i)]);
  const auto a = evaluate(p, d.test, {"g"}, proto);
  const auto b = evaluate(p, shuffled, {"g"}, proto);
  const MetricsReport &ra = *a.at("g").report, &rb = *b.at("g").report;
  EXPECT_NEAR(ra.auc, rb.auc, 1e-12);
  EXPECT_NEAR(ra.es_auc, rb.es_auc, 1e-12);
  EXPECT_EQ(ra.dpd, rb.dpd);
  EXPECT_EQ(ra.deodds, rb.deodds);
  for (const auto& [g, v] : ra.group_auc) EXPECT_NEAR(v, rb.group_auc.at(g), 1e-12);
}

TEST(Evaluate, RandomModelOnLabelNoiseIsChance) {
  // Labels carry no signal, so a random encoder can only score at chance.
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SynthConfig c;
    c.n_samples = 3000;
    c.dim_image = 8;
    c.dim_text = 8;
    c.label_signal = 0.0;
    c.attributes = {{"g", 2, {0.5, 0.5}, {}, {}}};
    c.seed = 300 + seed;
    const auto parts = split_sampleset(generate_synthetic(c), std::vector<std::size_t>{1000, 2000});
    const EncoderParams p = init_params(8, 8, 8, seed);
    const auto ev = evaluate(p, parts[1], {"g"}, fit_prototypes(p, parts[0]));
    const double a = ev.at("g").report->auc;
    EXPECT_NEAR(a, 0.5, 0.05) << "seed " << seed;
    total += a;
  }
  EXPECT_NEAR(total / 20.0, 0.5, 0.02);
}

}  // namespace
}  // namespace rfclip
