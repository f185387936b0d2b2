#include <gtest/gtest.h>

#include <random>

#include "gsp/linearize.hpp"
#include "gsp/penman.hpp"
#include "gsp/random_graph.hpp"
#include "gsp/smatch.hpp"

using namespace gsp;

TEST(Linearize, SingleNode) {
  auto acts = linearize(parse_penman("(a / cat)")[0], OrderStrategy::random(), 0);
  ASSERT_EQ(acts.size(), 2u);
  EXPECT_EQ(acts[0], (SpanningAction{1, "cat", {{0, ":root"}}}));
  EXPECT_EQ(acts[1], (SpanningAction{2, kStopConcept, {}}));
}

TEST(Linearize, Chain) {
  auto acts = linearize(parse_penman("(a / go-01 :ARG0 (b / boy))")[0], OrderStrategy::relation_freq({}), 0);
  ASSERT_EQ(acts.size(), 3u);
  EXPECT_EQ(acts[1], (SpanningAction{2, "boy", {{1, ":ARG0"}}}));
}

TEST(Linearize, ReentrantNodeGetsBothParents) {
  auto g = parse_penman("(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-01 :ARG0 b))")[0];
  auto acts = linearize(g, OrderStrategy::relation_freq({}), 0);
  // BFS: want(1); siblings by relation name: boy(2, :ARG0), go(3, :ARG1)
  ASSERT_EQ(acts.size(), 4u);
  EXPECT_EQ(acts[1], (SpanningAction{2, "boy", {{1, ":ARG0"}}}));
  // go-01 is emitted after boy, so its arc to boy is re-expressed as :ARG0-of
  EXPECT_EQ(acts[2], (SpanningAction{3, "go-01", {{1, ":ARG1"}, {2, ":ARG0-of"}}}));
}

TEST(Linearize, ReentrantLeafWithTwoEmittedParents) {
  // c is discovered under a, and b (already emitted) also points to it
  auto g = parse_penman("(r / and :op1 (a / eat-01 :ARG0 (c / cat)) :op2 (b / sleep-01 :ARG0 c))")[0];
  auto acts = linearize(g, OrderStrategy::relation_freq({}), 0);
  ASSERT_EQ(acts.size(), 5u);
  EXPECT_EQ(acts[3], (SpanningAction{4, "cat", {{2, ":ARG0"}, {3, ":ARG0"}}}));
}

TEST(Linearize, RelationFrequencyOrdersSiblings) {
  auto g = parse_penman("(s / strike-01 :time (t / time) :ARG0 (e / earthquake))")[0];
  auto acts = linearize(g, OrderStrategy::relation_freq({{":time", 10}, {":ARG0", 1}}), 0);
  EXPECT_EQ(acts[1].label, "time");
  acts = linearize(g, OrderStrategy::relation_freq({{":time", 1}, {":ARG0", 3}}), 0);
  EXPECT_EQ(acts[1].label, "earthquake");
}

TEST(Linearize, ConstantsAreQuotedTokens) {
  auto acts = linearize(parse_penman("(g / go-01 :polarity -)")[0], OrderStrategy::relation_freq({}), 0);
  EXPECT_EQ(acts[1].label, "\"-\"");
  auto g = rebuild(acts);
  EXPECT_TRUE(g.nodes[1].is_constant);
  EXPECT_EQ(g.nodes[1].label, "-");
}

TEST(RelationFrequencyTable, Counts) {
  EXPECT_TRUE(relation_frequency_table({}).empty());
  auto one = relation_frequency_table(parse_penman("(a / go-01 :ARG0 (b / boy))"));
  EXPECT_EQ(one, (RelationFrequency{{":ARG0", 1}}));
  auto corpus = parse_penman(
      "(a / go-01 :ARG0 (b / boy) :time (t / time))\n\n(a / see-01 :ARG0 (b / boy))\n\n(x / eat-01 :ARG0 (y / cat))");
  auto table = relation_frequency_table(corpus);
  EXPECT_EQ(table[":ARG0"], 3);
  EXPECT_EQ(table[":time"], 1);
  auto acts = linearize(corpus[0], OrderStrategy::relation_freq(table), 0);
  EXPECT_EQ(acts[1].label, "boy");
}

TEST(Rebuild, Errors) {
  EXPECT_THROW(rebuild({}), StructureError);
  EXPECT_THROW(rebuild({{1, "cat", {{0, ":root"}}}}), StructureError);  // missing stop
  EXPECT_THROW(rebuild({{1, "cat", {{0, ":root"}}}, {2, "dog", {{2, ":mod"}}}, {3, kStopConcept, {}}}),
               StructureError);
  EXPECT_THROW(rebuild({{1, "cat", {}}, {2, "dog", {}}, {3, kStopConcept, {}}}), StructureError);
}

TEST(Rebuild, SingleConceptAndStop) {
  auto g = rebuild({{1, "cat", {{0, ":root"}}}, {2, kStopConcept, {}}});
  ASSERT_EQ(g.nodes.size(), 1u);
  EXPECT_EQ(g.root, 0u);
  EXPECT_EQ(g.nodes[0].label, "cat");
}

TEST(Rebuild, InverseArcsComeBackCanonical) {
  auto g = rebuild({{1, "boy", {{0, ":root"}}}, {2, "want-01", {{1, ":ARG0-of"}}}, {3, kStopConcept, {}}});
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_EQ(g.edges[0], (Edge{1, 0, ":ARG0"}));
}

class RoundTrip : public ::testing::TestWithParam<OrderStrategy::Kind> {};

TEST_P(RoundTrip, RebuildOfLinearizeIsIsomorphic) {
  std::mt19937_64 rng(3);
  std::vector<AmrGraph> corpus;
  for (int i = 0; i < 300; ++i) corpus.push_back(random_graph(rng, {.min_nodes = 1, .max_nodes = 15}));
  OrderStrategy strategy{GetParam(), relation_frequency_table(corpus)};
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto acts = linearize(corpus[i], strategy, i);
    // BFS layering
    auto dist = root_distances(corpus[i]);
    auto back = rebuild(acts);
    auto back_dist = root_distances(back);
    for (std::size_t t = 1; t < back_dist.size(); ++t) ASSERT_LE(back_dist[t - 1], back_dist[t]);
    for (const auto& a : acts)
      for (const auto& [p, rel] : a.parents)
        if (p > 0) {
          ASSERT_LE(back_dist[static_cast<std::size_t>(p - 1)], back_dist[static_cast<std::size_t>(a.step - 1)]);
        }
    ASSERT_DOUBLE_EQ(smatch(back, corpus[i], 4, i).f1, 1.0) << serialize_penman(corpus[i]);
  }
}

INSTANTIATE_TEST_SUITE_P(Strategies, RoundTrip,
                         ::testing::Values(OrderStrategy::Kind::Random, OrderStrategy::Kind::RelationFreq,
                                           OrderStrategy::Kind::Combined));

TEST(Linearize, RelationFreqIsDeterministic) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    auto g = random_graph(rng);
    auto s = OrderStrategy::relation_freq({{":ARG0", 5}, {":mod", 2}});
    EXPECT_EQ(format_actions(linearize(g, s, 1)), format_actions(linearize(g, s, 999)));
  }
}

TEST(ActionRecords, FormatAndParse) {
  std::vector<SpanningAction> acts{{1, "want-01", {{0, ":root"}}}, {2, "boy", {{1, ":ARG0"}}},
                                   {3, "go-01", {{1, ":ARG1"}, {2, ":ARG0-of"}}}, {4, kStopConcept, {}}};
  auto text = format_actions(acts);
  EXPECT_EQ(text, "1\twant-01\t0::root\n2\tboy\t1::ARG0\n3\tgo-01\t1::ARG1,2::ARG0-of\n4\t<stop>\t\n");
  EXPECT_EQ(parse_actions(text), acts);
}
