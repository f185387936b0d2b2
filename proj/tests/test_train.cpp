#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "gsp/train.hpp"
#include "support.hpp"

using namespace gsp;
using gsp::testing::toy_setup;

TEST(Schedule, RisesThenDecaysAsInverseSqrt) {
  const std::size_t d = 16, w = 100;
  for (std::size_t s = 1; s < w; ++s) EXPECT_LT(noam_rate(s, d, w), noam_rate(s + 1, d, w));
  for (std::size_t s = w; s < 4 * w; ++s) EXPECT_GT(noam_rate(s, d, w), noam_rate(s + 1, d, w));
  EXPECT_NEAR(noam_rate(400, d, w) / noam_rate(1600, d, w), 2.0, 1e-12);
  EXPECT_NEAR(noam_rate(w, d, w), 1.0 / (4.0 * 10.0), 1e-15);
  EXPECT_NEAR(noam_rate(50, d, w, 0.5), 0.5 * noam_rate(50, d, w), 1e-15);
  EXPECT_DOUBLE_EQ(noam_rate(0, d, w), noam_rate(1, d, w));
}

TEST(Adam, MatchesHandComputedSteps) {
  nn::ParameterStore store;
  auto& p = store.add("w", 1, 2);
  p.value.data() = {1.0, -2.0};
  Adam opt(0.9, 0.999, 1e-8);
  // first step moves each coordinate by lr * sign(g)
  p.grad.data() = {0.3, -4.0};
  opt.step(store.all(), 0.1);
  EXPECT_NEAR(p.value.data()[0], 0.9, 1e-7);
  EXPECT_NEAR(p.value.data()[1], -1.9, 1e-7);
  const double after_first = p.value.data()[0];
  p.grad.data() = {0.1, 0.0};
  opt.step(store.all(), 0.1);
  const double m = 0.9 * 0.1 * 0.3 + 0.1 * 0.1;
  const double v = 0.999 * 0.001 * 0.09 + 0.001 * 0.01;
  const double upd = 0.1 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
  EXPECT_NEAR(p.value.data()[0], after_first - upd, 1e-12);
  EXPECT_EQ(opt.steps(), 2u);
}

TEST(Adam, FrozenParametersUntouched) {
  nn::ParameterStore store;
  auto& p = store.add("w", 1, 1);
  p.trainable = false;
  p.value.data() = {3.0};
  p.grad.data() = {1.0};
  Adam opt(0.9, 0.999, 1e-9);
  opt.step(store.all(), 1.0);
  EXPECT_EQ(p.value.data()[0], 3.0);
}

TEST(UnkReplace, NeverTouchesSummaryToken) {
  std::vector<TokenFeatures> f(6);
  for (auto& x : f) x.lemma = x.pos = x.ner = 7;
  Rng rng(4);
  auto all = unk_replace(f, 1.0, rng);
  EXPECT_EQ(all[0].lemma, 7u);
  EXPECT_EQ(all[0].pos, 7u);
  EXPECT_EQ(all[0].ner, 7u);
  for (std::size_t i = 1; i < all.size(); ++i) EXPECT_EQ(all[i].lemma, Vocab::kUnk);
  auto none = unk_replace(f, 0.0, rng);
  for (const auto& x : none) EXPECT_EQ(x.lemma, 7u);

  std::vector<TokenFeatures> many(20001);
  for (auto& x : many) x.lemma = x.pos = x.ner = 7;
  auto some = unk_replace(many, 0.33, rng);
  std::size_t hit = 0;
  for (std::size_t i = 1; i < some.size(); ++i) hit += some[i].lemma == Vocab::kUnk;
  EXPECT_NEAR(hit / 20000.0, 0.33, 0.015);
}

TEST(TrainConfig, PresetsAndRoundTrip) {
  EXPECT_EQ(TrainConfig::for_model("reference").warmup, 2000u);
  EXPECT_EQ(TrainConfig::for_model("toy").lr_scale, 0.5);
  auto c = TrainConfig::for_model("toy");
  c.order = OrderStrategy::Kind::Combined;
  c.seed = 9;
  auto back = TrainConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_THROW(TrainConfig::from_json({{"unk_rate", 1.5}}), DataError);
  EXPECT_THROW(TrainConfig::from_json({{"batch", 0}}), DataError);
}

TEST(Train, LossFallsOverFirstEpochs) {
  auto setup = toy_setup(20, 1);
  auto cfg = TrainConfig::for_model("toy");
  cfg.epochs = 10;
  cfg.stop_at_perfect = false;
  auto r = train(*setup.model, setup.corpus, {}, cfg);
  ASSERT_EQ(r.history.size(), 10u);
  for (std::size_t e = 1; e < r.history.size(); ++e)
    EXPECT_LT(r.history[e].loss.total(), r.history[e - 1].loss.total()) << "epoch " << e + 1;
  EXPECT_FALSE(r.diverged);
}

TEST(Train, DeterministicForSeed) {
  auto run = [] {
    auto setup = toy_setup(6, 2);
    auto cfg = TrainConfig::for_model("toy");
    cfg.epochs = 3;
    auto r = train(*setup.model, setup.corpus, {}, cfg);
    std::vector<double> losses;
    for (const auto& h : r.history) losses.push_back(h.loss.total());
    return losses;
  };
  EXPECT_EQ(run(), run());
}

TEST(Train, NonFiniteLossRestoresLastGoodParameters) {
  auto setup = toy_setup(4, 2);
  auto cfg = TrainConfig::for_model("toy");
  cfg.epochs = 2;
  auto* p = setup.model->params().all().front();
  p->value.fill(std::numeric_limits<double>::quiet_NaN());
  auto r = train(*setup.model, setup.corpus, {}, cfg);
  EXPECT_TRUE(r.diverged);
  EXPECT_TRUE(std::isnan(p->value.data()[0]));
  for (auto* q : setup.model->params().all())
    if (q != p) {
      for (double x : q->value.data()) ASSERT_TRUE(std::isfinite(x));
    }
}

TEST(Train, StopsWhenDevStalls) {
  auto setup = toy_setup(4, 3);
  auto cfg = TrainConfig::for_model("toy");
  cfg.lr_scale = 0.0;  // nothing moves, so dev never improves after the first epoch
  cfg.epochs = 50;
  cfg.patience = 3;
  auto r = train(*setup.model, setup.corpus, setup.corpus, cfg);
  EXPECT_TRUE(r.stopped_early);
  EXPECT_EQ(r.best_epoch, 1u);
  EXPECT_EQ(r.history.size(), 4u);
  ASSERT_TRUE(r.history.back().dev.has_value());
}

TEST(Train, EmptyTrainingSetRejected) {
  auto setup = toy_setup(1);
  EXPECT_THROW(train(*setup.model, {}, {}, TrainConfig{}), DataError);
}

TEST(Evaluate, GoldDecodesScorePerfectly) {
  auto setup = toy_setup(5, 4);
  auto cfg = TrainConfig::for_model("toy");
  cfg.epochs = 300;
  cfg.patience = 0;
  auto r = train(*setup.model, setup.corpus, setup.corpus, cfg);
  auto s = evaluate(*setup.model, setup.corpus);
  EXPECT_NEAR(s.mean_smatch, r.best_dev, 1e-12);
  EXPECT_GE(s.mean_smatch, 0.95);
  EXPECT_GE(s.root_accuracy, s.complete_match);
}
