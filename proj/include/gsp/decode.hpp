#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gsp/model.hpp"

namespace gsp {

inline constexpr double kArcThreshold = 0.5;

// Distributions produced by one expansion step over the current memory.
struct StepView {
  std::vector<double> concept_probs;                // over the candidate table
  std::vector<double> arc;                      // pooled, over nodes 0..t-1
  std::vector<std::vector<double>> arc_heads;   // per head, over nodes 0..t-1
  std::vector<double> mode;                     // copy, map, gen
  std::vector<double> alignment;                // over tokens
  std::vector<std::vector<double>> labels;      // labels[j] for node j >= 1
};

inline std::vector<double> row_of(const Matrix& m, std::size_t r) { return {m.row(r).begin(), m.row(r).end()}; }

inline StepView step_view(const GspModel& model, const Matrix& sentence_states, const GraphMemory& mem,
                          const CandidateTable& cand) {
  Tape t(false);
  Var sent = t.constant(sentence_states);
  Var nodes = t.constant(mem.states());
  ExpandOutputs o = model.expand(t, sent, nodes, 1, cand);
  StepView v;
  v.concept_probs = row_of(o.concept_probs.value(), 0);
  v.arc = row_of(o.arc.value(), 0);
  for (const auto& h : o.arc_heads) v.arc_heads.push_back(row_of(h.value(), 0));
  v.mode = row_of(o.mode.value(), 0);
  v.alignment = row_of(o.alignment.value(), 0);
  const std::size_t t_nodes = mem.size();
  v.labels.resize(t_nodes);
  if (t_nodes > 1) {
    std::vector<std::size_t> hr(t_nodes - 1, 0), nr(t_nodes - 1);
    for (std::size_t j = 1; j < t_nodes; ++j) nr[j - 1] = j;
    Matrix lp = model.label_probs(t, o.h, nodes, hr, nr).value();
    for (std::size_t j = 1; j < t_nodes; ++j) v.labels[j] = row_of(lp, j - 1);
  }
  return v;
}

inline double safe_log(double p) { return std::log(std::max(p, kProbFloor)); }

// Parents j >= 1 with pooled probability >= 0.5; the best one when none
// passes and the graph is non-empty. Nothing at the first step.
inline std::vector<std::size_t> choose_parents(const std::vector<double>& arc) {
  std::vector<std::size_t> out;
  if (arc.size() <= 1) return out;
  for (std::size_t j = 1; j < arc.size(); ++j)
    if (arc[j] >= kArcThreshold) out.push_back(j);
  if (out.empty()) {
    std::size_t best = 1;
    for (std::size_t j = 2; j < arc.size(); ++j)
      if (arc[j] > arc[best]) best = j;
    out.push_back(best);
  }
  return out;
}

// Most probable real label; pad and UNK are skipped when any other exists.
inline std::size_t choose_label(const std::vector<double>& probs) {
  std::size_t best = probs.size() > 2 ? 2 : Vocab::kUnk;
  for (std::size_t k = best + 1; k < probs.size(); ++k)
    if (probs[k] > probs[best]) best = k;
  return best;
}

// Candidate indices by descending probability (stable), without pad and UNK.
inline std::vector<std::size_t> ranked_concepts(const std::vector<double>& probs, std::size_t k) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (i != Vocab::kPad && i != Vocab::kUnk) idx.push_back(i);
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), [&](std::size_t a, std::size_t b) {
    return probs[a] > probs[b] || (probs[a] == probs[b] && a < b);
  });
  idx.resize(k);
  return idx;
}

// Arcs and labels chosen for a non-stop concept, with their log-probability.
struct Attachment {
  std::vector<std::pair<int, std::string>> parents;
  double logp = 0.0;
};

inline Attachment attach(const GspModel& model, const StepView& v) {
  Attachment a;
  for (std::size_t j : choose_parents(v.arc)) {
    const std::size_t lab = choose_label(v.labels[j]);
    std::string rel = model.vocab().relation.token(lab);
    if (lab == Vocab::kUnk) rel = ":mod";
    a.parents.emplace_back(static_cast<int>(j), rel);
    a.logp += safe_log(v.arc[j]) + safe_log(v.labels[j][lab]);
  }
  return a;
}

struct DecodeOptions {
  std::size_t beam = 1;
  std::size_t step_cap = 0;  // 0: 3n + 10
};

struct DecodeResult {
  std::vector<SpanningAction> actions;  // always ends with the stop concept
  std::optional<AmrGraph> graph;
  double logp = 0.0;
  bool truncated = false;
  bool empty = false;
  std::string error;

  bool ok() const { return graph.has_value(); }
};

inline std::size_t step_cap_for(const DecodeOptions& opt, std::size_t tokens) {
  return opt.step_cap ? opt.step_cap : 3 * tokens + 10;
}

inline void finalize(DecodeResult& r, const SentenceContext& ctx, const std::string& mode) {
  if (r.actions.empty() || !r.actions.back().is_stop())
    r.actions.push_back(SpanningAction{static_cast<int>(r.actions.size()) + 1, kStopConcept, {}});
  if (r.actions.size() == 1) {
    r.empty = true;
    r.error = "stop concept generated at the first step";
    return;
  }
  try {
    AmrGraph g = rebuild(r.actions);
    validate(g);
    root_distances(g);
    g.metadata["id"] = ctx.sentence.id;
    g.metadata["snt"] = ctx.sentence.text;
    g.metadata["decode"] = mode;
    g.metadata["arc-rule"] = "threshold-0.5+argmax-fallback";
    std::ostringstream lp;
    lp.precision(6);
    lp << std::fixed << r.logp;
    g.metadata["logp"] = lp.str();
    if (r.truncated) g.metadata["truncated"] = "true";
    r.graph = std::move(g);
  } catch (const std::exception& e) {
    r.error = e.what();
  }
}

inline DecodeResult decode_greedy(const GspModel& model, const SentenceContext& ctx, const DecodeOptions& opt = {}) {
  Matrix sent;
  {
    Tape t(false);
    sent = model.encode_sentence(t, ctx.features).value();
  }
  GraphMemory mem = model.graph_encoder().start();
  DecodeResult r;
  const std::size_t cap = step_cap_for(opt, ctx.sentence.size());
  bool finished = false;
  for (std::size_t t = 1; t <= cap; ++t) {
    StepView v = step_view(model, sent, mem, ctx.candidates);
    const std::size_t c = ranked_concepts(v.concept_probs, 1).at(0);
    const std::string tok = ctx.candidates.token(c, model.vocab().concepts);
    r.logp += safe_log(v.concept_probs[c]);
    SpanningAction a{static_cast<int>(t), tok, {}};
    if (tok == kStopConcept) {
      r.actions.push_back(std::move(a));
      finished = true;
      break;
    }
    Attachment att = attach(model, v);
    a.parents = std::move(att.parents);
    r.logp += att.logp;
    r.actions.push_back(std::move(a));
    model.graph_encoder().append(mem, tok);
  }
  r.truncated = !finished;
  finalize(r, ctx, "greedy");
  return r;
}

inline DecodeResult beam_search(const GspModel& model, const SentenceContext& ctx, const DecodeOptions& opt) {
  if (opt.beam == 0) throw DataError("beam size must be at least 1");
  Matrix sent;
  {
    Tape t(false);
    sent = model.encode_sentence(t, ctx.features).value();
  }
  struct Hyp {
    GraphMemory mem;
    std::vector<SpanningAction> actions;
    double logp = 0.0;
    bool finished = false;
  };
  struct Candidate {
    std::size_t hyp;
    std::size_t cand;
    double score;
    bool finished;
    Attachment att;
  };
  const std::size_t K = opt.beam;
  const std::size_t cap = step_cap_for(opt, ctx.sentence.size());
  std::vector<Hyp> beam{Hyp{model.graph_encoder().start(), {}, 0.0, false}};
  for (std::size_t t = 1; t <= cap; ++t) {
    std::vector<Candidate> pool;
    for (std::size_t i = 0; i < beam.size(); ++i) {
      if (beam[i].finished) {
        pool.push_back(Candidate{i, 0, beam[i].logp, true, {}});
        continue;
      }
      StepView v = step_view(model, sent, beam[i].mem, ctx.candidates);
      std::optional<Attachment> att;
      for (std::size_t c : ranked_concepts(v.concept_probs, K)) {
        const bool stop = ctx.candidates.token(c, model.vocab().concepts) == kStopConcept;
        double score = beam[i].logp + safe_log(v.concept_probs[c]);
        Attachment a;
        if (!stop) {
          if (!att) att = attach(model, v);
          a = *att;
          score += a.logp;
        }
        pool.push_back(Candidate{i, c, score, stop, std::move(a)});
      }
    }
    std::stable_sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
    if (pool.size() > K) pool.resize(K);
    std::vector<Hyp> next;
    bool all_finished = true;
    for (auto& c : pool) {
      const Hyp& src = beam[c.hyp];
      if (src.finished) {
        next.push_back(src);
        continue;
      }
      Hyp h{src.mem, src.actions, c.score, c.finished};
      const std::string tok = ctx.candidates.token(c.cand, model.vocab().concepts);
      h.actions.push_back(SpanningAction{static_cast<int>(t), tok, std::move(c.att.parents)});
      if (!c.finished) {
        model.graph_encoder().append(h.mem, tok);
        all_finished = false;
      }
      next.push_back(std::move(h));
    }
    beam = std::move(next);
    if (all_finished) break;
  }
  // beam is sorted by score; prefer the best finished hypothesis
  const Hyp* best = nullptr;
  for (const auto& h : beam)
    if (h.finished) {
      best = &h;
      break;
    }
  DecodeResult r;
  if (!best) {
    best = &beam.front();
    r.truncated = true;
  }
  r.actions = best->actions;
  r.logp = best->logp;
  if (K > 1) {
    // the greedy path can fall off the beam; keep it as a candidate
    DecodeResult g = decode_greedy(model, ctx, opt);
    if ((r.truncated && !g.truncated) || (r.truncated == g.truncated && g.logp > r.logp)) {
      r.actions = std::move(g.actions);
      r.logp = g.logp;
      r.truncated = g.truncated;
    }
  }
  finalize(r, ctx, "beam-" + std::to_string(K));
  return r;
}

inline DecodeResult decode(const GspModel& model, const SentenceContext& ctx, const DecodeOptions& opt = {}) {
  return opt.beam <= 1 ? decode_greedy(model, ctx, opt) : beam_search(model, ctx, opt);
}

// Teacher-forced log-probability of an action sequence.
inline double score_actions(const GspModel& model, const SentenceContext& ctx, const std::vector<SpanningAction>& actions) {
  return model.log_likelihood(ctx, actions);
}

}  // namespace gsp
