#include <gtest/gtest.h>

#include <cmath>

#include "gsp/decode.hpp"
#include "support.hpp"

using namespace gsp;
using gsp::testing::gold_actions;
using gsp::testing::toy_setup;

TEST(ArcDecision, FirstStepHasNoParents) { EXPECT_TRUE(choose_parents({1.0}).empty()); }

TEST(ArcDecision, ThresholdKeepsEveryHeadPeak) {
  // pooled max of one head peaking on node 2 and another on node 5
  std::vector<double> head_a{0.05, 0.0, 0.9, 0.05, 0.0, 0.0};
  std::vector<double> head_b{0.1, 0.0, 0.0, 0.1, 0.0, 0.8};
  std::vector<double> pooled(6);
  for (std::size_t j = 0; j < 6; ++j) pooled[j] = std::max(head_a[j], head_b[j]);
  EXPECT_EQ(choose_parents(pooled), (std::vector<std::size_t>{2, 5}));
}

TEST(ArcDecision, DummyMassFallsBackToArgmax) {
  EXPECT_EQ(choose_parents({0.9, 0.04, 0.06}), (std::vector<std::size_t>{2}));
  EXPECT_EQ(choose_parents({1.0, 0.0, 0.0, 0.0}), (std::vector<std::size_t>{1}));
}

TEST(ArcDecision, DummyNeverChosen) {
  for (const auto& arc : std::vector<std::vector<double>>{{0.6, 0.4}, {0.5, 0.5, 0.5}, {0.99, 0.005, 0.005}}) {
    auto p = choose_parents(arc);
    EXPECT_FALSE(p.empty());
    for (auto j : p) EXPECT_NE(j, 0u);
  }
}

TEST(LabelDecision, SkipsPadAndUnk) {
  EXPECT_EQ(choose_label({0.5, 0.3, 0.1, 0.1}), 2u);
  EXPECT_EQ(choose_label({0.1, 0.1, 0.2, 0.6}), 3u);
  EXPECT_EQ(choose_label({0.3, 0.7}), Vocab::kUnk);
}

TEST(Ranking, ExcludesSpecialsAndIsStable) {
  const std::vector<double> p{0.5, 0.4, 0.02, 0.03, 0.03, 0.02};
  EXPECT_EQ(ranked_concepts(p, 3), (std::vector<std::size_t>{3, 4, 2}));
  EXPECT_EQ(ranked_concepts(p, 10).size(), 4u);
}

TEST(Greedy, RandomModelYieldsValidGraphs) {
  auto setup = toy_setup(12, 5);
  for (const auto& ex : setup.corpus) {
    auto r = decode_greedy(*setup.model, setup.model->context(ex.sentence));
    ASSERT_FALSE(r.actions.empty());
    EXPECT_TRUE(r.actions.back().is_stop());
    EXPECT_LE(r.actions.size(), 3 * ex.sentence.size() + 11);  // cap plus the closing stop
    if (r.ok()) {
      EXPECT_NO_THROW(validate(*r.graph));
      EXPECT_EQ(r.graph->metadata.at("decode"), "greedy");
      EXPECT_EQ(r.truncated, r.graph->metadata.count("truncated") == 1);
    } else {
      EXPECT_TRUE(r.empty);
    }
  }
}

TEST(Greedy, StepCapTruncates) {
  auto setup = toy_setup(4, 5);
  DecodeOptions opt;
  opt.step_cap = 2;
  for (const auto& ex : setup.corpus) {
    auto r = decode_greedy(*setup.model, setup.model->context(ex.sentence), opt);
    EXPECT_LE(r.actions.size(), 3u);
    if (r.actions.size() == 3) {
      EXPECT_TRUE(r.truncated);
    }
  }
}

TEST(Beam, WidthOneEqualsGreedy) {
  auto setup = toy_setup(20, 8);
  DecodeOptions one;
  one.beam = 1;
  for (const auto& ex : setup.corpus) {
    auto ctx = setup.model->context(ex.sentence);
    auto g = decode_greedy(*setup.model, ctx);
    auto b = beam_search(*setup.model, ctx, one);
    EXPECT_EQ(g.actions, b.actions);
    EXPECT_DOUBLE_EQ(g.logp, b.logp);
  }
}

TEST(Beam, ScoreMatchesTeacherForcedRescoring) {
  auto setup = toy_setup(10, 12);
  for (std::size_t k : {1u, 4u}) {
    DecodeOptions opt;
    opt.beam = k;
    for (const auto& ex : setup.corpus) {
      auto ctx = setup.model->context(ex.sentence);
      auto r = decode(*setup.model, ctx, opt);
      if (!r.ok() || r.truncated) continue;
      EXPECT_NEAR(score_actions(*setup.model, ctx, r.actions), r.logp, 1e-5);
    }
  }
}

TEST(Beam, ZeroWidthRejected) {
  auto setup = toy_setup(1);
  DecodeOptions opt;
  opt.beam = 0;
  EXPECT_THROW(beam_search(*setup.model, setup.model->context(setup.corpus[0].sentence), opt), DataError);
}

TEST(Beam, ExhaustiveSearchOnThreeConcepts) {
  const auto corpus = gsp::testing::three_concept_corpus();
  const VocabBundle vocab = build_vocabularies(corpus);
  ASSERT_EQ(vocab.concepts.size(), 6u);  // pad, unk, stop and the three concepts
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    GspModel model(ModelConfig::toy(), vocab, seed);
    auto ctx = model.context(corpus[0].sentence);
    const std::size_t cap = 4;
    auto all = gsp::testing::enumerate_sequences(model, ctx, cap);
    ASSERT_GT(all.finished, 50u);
    DecodeOptions opt;
    opt.beam = 5000;  // exceeds the number of sequences
    opt.step_cap = cap;
    auto r = beam_search(model, ctx, opt);
    EXPECT_NEAR(r.logp, all.best, 1e-9) << "seed " << seed;
    EXPECT_EQ(r.actions, all.actions) << "seed " << seed;
  }
}

TEST(Rebuild, DecodedGraphsAreConnected) {
  auto setup = toy_setup(30, 17);
  DecodeOptions opt;
  opt.beam = 3;
  for (const auto& ex : setup.corpus) {
    auto r = decode(*setup.model, setup.model->context(ex.sentence), opt);
    if (!r.ok()) {
      EXPECT_TRUE(r.empty);
      continue;
    }
    auto d = root_distances(*r.graph);
    for (int x : d) EXPECT_GE(x, 0);
  }
}

TEST(Beam, WiderBeamNeverScoresBelowGreedy) {
  for (std::uint64_t seed : {2u, 5u, 6u}) {
    auto setup = toy_setup(30, seed);
    DecodeOptions eight;
    eight.beam = 8;
    for (const auto& ex : setup.corpus) {
      auto ctx = setup.model->context(ex.sentence);
      auto g = decode_greedy(*setup.model, ctx);
      auto b = beam_search(*setup.model, ctx, eight);
      if (b.truncated == g.truncated) {
        EXPECT_GE(b.logp, g.logp - 1e-12) << ex.sentence.id;
      }
      if (!g.truncated) {
        EXPECT_FALSE(b.truncated);
      }
    }
  }
}
