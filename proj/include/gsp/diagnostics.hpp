#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "gsp/gradcheck.hpp"
#include "gsp/model.hpp"
#include "gsp/synthetic.hpp"

namespace gsp {

struct ModelGradCheck {
  nn::GradCheckReport report;
  std::size_t parameters = 0;
  std::size_t step = 0;  // index of the checked expansion step
  double seconds = 0.0;
};

// Finite-difference check of the loss of one expansion step (concept, arc
// and label terms through both encoders) on a synthetic sentence. The step
// with the most gold parents is used. per_param = 0 checks every coordinate.
inline ModelGradCheck model_gradcheck(const ModelConfig& cfg, std::uint64_t seed, std::size_t per_param = 0,
                                      double h = 1e-5) {
  const auto start = std::chrono::steady_clock::now();
  ModelConfig c = cfg;
  c.dropout = 0.0;
  const auto corpus = synthetic_corpus(4, seed);
  // the reentrant "wants to" template exercises multi-parent arcs when present
  std::size_t pick = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (corpus[i].graph.edges.size() > corpus[pick].graph.edges.size()) pick = i;
  GspModel model(c, build_vocabularies(corpus), seed);
  const SentenceContext ctx = model.context(corpus[pick].sentence);
  const auto actions = linearize(corpus[pick].graph, OrderStrategy{}, seed);
  ModelGradCheck out;
  out.step = 1;
  for (std::size_t r = 2; r < actions.size(); ++r)
    if (actions[r].parents.size() > actions[out.step].parents.size()) out.step = r;
  out.parameters = model.params().scalar_count();
  out.report = nn::grad_check(
      model.params(), [&](Tape& t) { return model.step_loss(t, ctx, actions, out.step); }, h, per_param, seed);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace gsp
