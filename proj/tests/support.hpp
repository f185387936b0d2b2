#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "gsp/decode.hpp"
#include "gsp/model.hpp"
#include "gsp/synthetic.hpp"

namespace gsp::testing {

struct ToySetup {
  std::vector<Example> corpus;
  std::unique_ptr<GspModel> model;
};

inline ToySetup toy_setup(std::size_t count = 8, std::uint64_t seed = 3, ModelConfig cfg = ModelConfig::toy()) {
  ToySetup s;
  s.corpus = synthetic_corpus(count, seed);
  s.model = std::make_unique<GspModel>(cfg, build_vocabularies(s.corpus), seed);
  return s;
}

inline std::vector<SpanningAction> gold_actions(const AmrGraph& g) {
  return linearize(g, OrderStrategy{}, 0);
}

struct Enumeration {
  double best = -1e300;
  std::vector<SpanningAction> actions;
  std::size_t finished = 0;
};

// Scores every concept sequence of at most `cap` steps, attaching each node
// with the decoder's own arc and label rule.
inline Enumeration enumerate_sequences(const GspModel& model, const SentenceContext& ctx, std::size_t cap) {
  Matrix sent;
  {
    Tape t(false);
    sent = model.encode_sentence(t, ctx.features).value();
  }
  Enumeration out;
  std::function<void(const GraphMemory&, const std::vector<SpanningAction>&, double)> walk =
      [&](const GraphMemory& mem, const std::vector<SpanningAction>& acts, double lp) {
        const std::size_t t = acts.size() + 1;
        if (t > cap) return;
        StepView v = step_view(model, sent, mem, ctx.candidates);
        std::optional<Attachment> att;
        for (std::size_t cand = 0; cand < ctx.candidates.size(); ++cand) {
          if (cand == Vocab::kPad || cand == Vocab::kUnk) continue;
          const std::string tok = ctx.candidates.token(cand, model.vocab().concepts);
          const double score = lp + safe_log(v.concept_probs[cand]);
          auto next = acts;
          if (tok == kStopConcept) {
            next.push_back(SpanningAction{static_cast<int>(t), tok, {}});
            ++out.finished;
            if (score > out.best) {
              out.best = score;
              out.actions = next;
            }
            continue;
          }
          if (!att) att = attach(model, v);
          next.push_back(SpanningAction{static_cast<int>(t), tok, att->parents});
          GraphMemory m2 = mem;
          model.graph_encoder().append(m2, tok);
          walk(m2, next, score + att->logp);
        }
      };
  walk(model.graph_encoder().start(), {}, 0.0);
  return out;
}

// One token, three concepts: the smallest model whose search space can be
// listed exhaustively.
inline std::vector<Example> three_concept_corpus() {
  std::vector<Example> corpus(1);
  corpus[0].sentence = fallback_annotation("tiny", {"walk"});
  AmrGraph& g = corpus[0].graph;
  auto a = g.add_node("a", "walk-01", false);
  auto b = g.add_node("b", "dog", false);
  auto c = g.add_node("c", "fast", false);
  g.root = a;
  g.add_edge(a, b, ":ARG0");
  g.add_edge(a, c, ":manner");
  corpus[0].alignment = {{0, "a"}};
  return corpus;
}

}  // namespace gsp::testing
