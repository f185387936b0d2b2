#include <gtest/gtest.h>

#include <random>

#include "gsp/penman.hpp"
#include "gsp/random_graph.hpp"
#include "gsp/smatch.hpp"

using namespace gsp;

TEST(ParsePenman, SingleNode) {
  auto gs = parse_penman("(a / cat)");
  ASSERT_EQ(gs.size(), 1u);
  EXPECT_EQ(gs[0].nodes.size(), 1u);
  EXPECT_EQ(gs[0].nodes[0].label, "cat");
  EXPECT_TRUE(gs[0].edges.empty());
}

TEST(ParsePenman, StrikeEarthquake) {
  auto g = parse_penman("(s / strike-01 :ARG2 (e / earthquake))")[0];
  ASSERT_EQ(g.nodes.size(), 2u);
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_EQ(g.edges[0].relation, ":ARG2");
  EXPECT_EQ(g.nodes[g.edges[0].child].label, "earthquake");
}

TEST(ParsePenman, ReentrancyMapsToOneNode) {
  auto g = parse_penman("(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-01 :ARG0 b))")[0];
  ASSERT_EQ(g.nodes.size(), 3u);
  ASSERT_EQ(g.edges.size(), 3u);
  int parents_of_boy = 0;
  for (const auto& e : g.edges) parents_of_boy += g.nodes[e.child].label == "boy";
  EXPECT_EQ(parents_of_boy, 2);
}

TEST(ParsePenman, ReferenceBeforeDefinition) {
  auto g = parse_penman("(w / want-01 :ARG1 (g / go-01 :ARG0 b) :ARG0 (b / boy))")[0];
  EXPECT_EQ(g.nodes.size(), 3u);
  EXPECT_EQ(g.edges.size(), 3u);
}

TEST(ParsePenman, ConstantsAndMetadata) {
  auto gs = parse_penman(
      "# ::id s1 ::date 2019\n# ::snt John did not go .\n"
      "(g / go-01 :polarity - :ARG0 (p / person :name (n / name :op1 \"John\")) :quant 5)\n");
  ASSERT_EQ(gs.size(), 1u);
  const auto& g = gs[0];
  EXPECT_EQ(*g.meta("id"), "s1");
  EXPECT_EQ(*g.meta("date"), "2019");
  EXPECT_EQ(*g.meta("snt"), "John did not go .");
  int constants = 0;
  for (const auto& n : g.nodes) constants += n.is_constant;
  EXPECT_EQ(constants, 3);
  validate(g);
}

TEST(ParsePenman, MultipleBlocks) {
  auto gs = parse_penman("# AMR release header\n\n(a / cat)\n\n\n# ::id 2\n(b / dog)\n");
  ASSERT_EQ(gs.size(), 2u);
  EXPECT_EQ(*gs[1].meta("id"), "2");
}

TEST(ParsePenman, Errors) {
  try {
    parse_penman("(a / cat\n  :mod (b / big)");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_penman("(a / cat))"), ParseError);
  EXPECT_THROW(parse_penman("(a / cat :mod (a / big))"), ParseError);
  try {
    parse_penman("(a / cat)\n\n# ::id lonely\n\n(b / dog)");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(SerializePenman, SingleNode) { EXPECT_EQ(serialize_penman(parse_penman("(x / cat)")[0]), "(c / cat)"); }

TEST(SerializePenman, ReentrantMentionIsBareVariable) {
  auto g = parse_penman("(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-01 :ARG0 b))")[0];
  EXPECT_EQ(serialize_penman(g), "(w / want-01\n    :ARG0 (b / boy)\n    :ARG1 (g / go-01\n        :ARG0 b))");
}

TEST(SerializePenman, VariableNamesDisambiguate) {
  auto g = parse_penman("(s / see-01 :ARG0 (x / sun) :ARG1 (y / sky))")[0];
  auto text = serialize_penman(g);
  EXPECT_NE(text.find("(s2 / sun)"), std::string::npos);
  EXPECT_NE(text.find("(s3 / sky)"), std::string::npos);
}

TEST(SerializePenman, RoundTripIsIsomorphic) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    auto g = random_graph(rng, {.min_nodes = 1, .max_nodes = 12});
    g.metadata["id"] = "g" + std::to_string(trial);
    auto back = parse_penman(serialize_penman(g));
    ASSERT_EQ(back.size(), 1u);
    ASSERT_EQ(back[0].nodes.size(), g.nodes.size());
    EXPECT_EQ(*back[0].meta("id"), *g.meta("id"));
    auto m = smatch(back[0], g, 4, trial);
    ASSERT_DOUBLE_EQ(m.f1, 1.0) << serialize_penman(g);
    // deterministic
    ASSERT_EQ(serialize_penman(back[0]), serialize_penman(parse_penman(serialize_penman(back[0]))[0]));
  }
}
