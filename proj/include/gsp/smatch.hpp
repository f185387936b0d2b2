#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "gsp/amr.hpp"
#include "gsp/error.hpp"

namespace gsp {

struct Triple {
  enum class Kind { Instance, Relation, Top };
  Kind kind = Kind::Instance;
  std::string relation;  // "instance", the role (normalized, no inverse), or "TOP"
  std::string arg1;      // node id
  std::string arg2;      // node id for relations, concept for instance and top triples
  double weight = 1.0;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct MatchResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double matched = 0.0;     // matched triple count (or weight mass)
  double pred_total = 0.0;
  double gold_total = 0.0;
  std::vector<long> mapping;  // pred node index -> gold node index, -1 if unmapped
};

inline MatchResult make_match_result(double matched, double pred_total, double gold_total, std::vector<long> mapping) {
  MatchResult r;
  r.matched = matched;
  r.pred_total = pred_total;
  r.gold_total = gold_total;
  r.precision = pred_total > 0 ? matched / pred_total : 0.0;
  r.recall = gold_total > 0 ? matched / gold_total : 0.0;
  r.f1 = (r.precision + r.recall) > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  r.mapping = std::move(mapping);
  return r;
}

// Linear decay in root distance, clamped to [0, 1].
inline double triple_weight(int d, int d_thr) {
  return std::max(0.0, std::min(static_cast<double>(d_thr - d), 1.0));
}

namespace smatch_detail {

// Index-based triple tables for one graph.
struct TripleTable {
  std::size_t vars = 0;
  std::vector<std::string> label;  // per var
  std::vector<double> inst_weight;   // per var
  long root = -1;
  double top_weight = 0.0;
  struct Rel {
    int rel;
    std::size_t a, b;
    double w;
  };
  std::vector<Rel> rels;
  double total = 0.0;
};

class RelationInterner {
 public:
  int id(const std::string& r) {
    auto [it, fresh] = ids_.try_emplace(r, static_cast<int>(ids_.size()));
    return it->second;
  }

 private:
  std::map<std::string, int> ids_;
};

inline TripleTable build_table(const AmrGraph& g, RelationInterner& interner, int d_thr /* <=0: unweighted */) {
  TripleTable t;
  t.vars = g.nodes.size();
  if (g.nodes.empty()) return t;
  std::vector<int> dist;
  if (d_thr > 0) dist = root_distances(g);
  auto w_of = [&](int d) { return d_thr > 0 ? triple_weight(d, d_thr) : 1.0; };
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    t.label.push_back(g.nodes[i].label);
    t.inst_weight.push_back(w_of(d_thr > 0 ? dist[i] : 0));
    t.total += t.inst_weight.back();
  }
  t.root = static_cast<long>(g.root);
  t.top_weight = w_of(0);
  t.total += t.top_weight;
  std::set<std::tuple<int, std::size_t, std::size_t>> seen;
  for (const auto& e : g.edges) {
    std::size_t a = e.head, b = e.child;
    std::string rel = e.relation;
    if (is_inverse_relation(rel)) {
      rel = toggle_inverse(rel);
      std::swap(a, b);
    }
    int rid = interner.id(rel);
    if (!seen.emplace(rid, a, b).second) continue;
    double w = w_of(d_thr > 0 ? std::min(dist[a], dist[b]) : 0);
    t.rels.push_back({rid, a, b, w});
    t.total += w;
  }
  return t;
}

inline std::uint64_t rel_key(int rel, std::size_t a, std::size_t b) {
  return (static_cast<std::uint64_t>(rel) << 42) ^ (static_cast<std::uint64_t>(a) << 21) ^ b;
}

class Scorer {
 public:
  Scorer(const TripleTable& pred, const TripleTable& gold) : pred_(pred), gold_(gold), touching_(pred.vars) {
    for (const auto& r : gold.rels) gold_rels_[rel_key(r.rel, r.a, r.b)] = r.w;
    for (std::size_t i = 0; i < pred.rels.size(); ++i) {
      touching_[pred.rels[i].a].push_back(i);
      touching_[pred.rels[i].b].push_back(i);
    }
  }

  double instance(std::size_t p, long g) const {
    if (g < 0 || pred_.label[p] != gold_.label[static_cast<std::size_t>(g)]) return 0.0;
    return std::min(pred_.inst_weight[p], gold_.inst_weight[static_cast<std::size_t>(g)]);
  }
  double top(std::size_t p, long g) const {
    if (static_cast<long>(p) != pred_.root || g != gold_.root) return 0.0;
    if (pred_.label[p] != gold_.label[static_cast<std::size_t>(g)]) return 0.0;
    return std::min(pred_.top_weight, gold_.top_weight);
  }
  double relation(std::size_t i, const std::vector<long>& m) const {
    const auto& r = pred_.rels[i];
    if (m[r.a] < 0 || m[r.b] < 0) return 0.0;
    auto it = gold_rels_.find(rel_key(r.rel, static_cast<std::size_t>(m[r.a]), static_cast<std::size_t>(m[r.b])));
    return it == gold_rels_.end() ? 0.0 : std::min(r.w, it->second);
  }

  double total(const std::vector<long>& m) const {
    double s = 0.0;
    for (std::size_t p = 0; p < pred_.vars; ++p) s += instance(p, m[p]) + top(p, m[p]);
    for (std::size_t i = 0; i < pred_.rels.size(); ++i) s += relation(i, m);
    return s;
  }

  // Score change when vars p1 (and optionally p2) take new targets.
  double delta(std::vector<long>& m, std::size_t p1, long g1, long p2 = -1, long g2 = -1) const {
    double before = instance(p1, m[p1]) + top(p1, m[p1]);
    double after = instance(p1, g1) + top(p1, g1);
    if (p2 >= 0) {
      auto q = static_cast<std::size_t>(p2);
      before += instance(q, m[q]) + top(q, m[q]);
      after += instance(q, g2) + top(q, g2);
    }
    auto rel_sum = [&] {
      double s = 0.0;
      for (std::size_t i : touching_[p1]) s += relation(i, m);
      if (p2 >= 0)
        for (std::size_t i : touching_[static_cast<std::size_t>(p2)]) {
          const auto& r = pred_.rels[i];
          if (r.a != p1 && r.b != p1) s += relation(i, m);
        }
      return s;
    };
    before += rel_sum();
    long old1 = m[p1], old2 = p2 >= 0 ? m[static_cast<std::size_t>(p2)] : -1;
    m[p1] = g1;
    if (p2 >= 0) m[static_cast<std::size_t>(p2)] = g2;
    after += rel_sum();
    m[p1] = old1;
    if (p2 >= 0) m[static_cast<std::size_t>(p2)] = old2;
    return after - before;
  }

 private:
  const TripleTable& pred_;
  const TripleTable& gold_;
  std::unordered_map<std::uint64_t, double> gold_rels_;
  std::vector<std::vector<std::size_t>> touching_;
};

// Steepest-ascent over single reassignments and pairwise swaps.
inline double hill_climb(const Scorer& scorer, std::vector<long>& m, std::size_t gold_vars) {
  const std::size_t pv = m.size();
  double score = scorer.total(m);
  std::vector<char> used(gold_vars, 0);
  for (long g : m)
    if (g >= 0) used[static_cast<std::size_t>(g)] = 1;
  constexpr double kEps = 1e-12;
  while (true) {
    double best = kEps;
    std::size_t bp1 = 0;
    long bg1 = -1, bp2 = -1, bg2 = -1;
    for (std::size_t p = 0; p < pv; ++p) {
      for (std::size_t g = 0; g < gold_vars; ++g) {
        if (used[g]) continue;
        double d = scorer.delta(m, p, static_cast<long>(g));
        if (d > best) {
          best = d;
          bp1 = p;
          bg1 = static_cast<long>(g);
          bp2 = -1;
        }
      }
    }
    for (std::size_t p = 0; p < pv; ++p) {
      for (std::size_t q = p + 1; q < pv; ++q) {
        if (m[p] == m[q]) continue;  // both unmapped
        double d = scorer.delta(m, p, m[q], static_cast<long>(q), m[p]);
        if (d > best) {
          best = d;
          bp1 = p;
          bg1 = m[q];
          bp2 = static_cast<long>(q);
          bg2 = m[p];
        }
      }
    }
    if (best <= kEps) break;
    if (bp2 < 0) {
      if (m[bp1] >= 0) used[static_cast<std::size_t>(m[bp1])] = 0;
      used[static_cast<std::size_t>(bg1)] = 1;
      m[bp1] = bg1;
    } else {
      m[bp1] = bg1;
      m[static_cast<std::size_t>(bp2)] = bg2;
    }
    score += best;
  }
  return scorer.total(m);  // re-sum to avoid drift
}

inline MatchResult match(const AmrGraph& pred, const AmrGraph& gold, int d_thr, int restarts, std::uint64_t seed) {
  RelationInterner interner;
  auto pt = build_table(pred, interner, d_thr);
  auto gt = build_table(gold, interner, d_thr);
  if (pt.vars == 0 || gt.vars == 0) return make_match_result(0.0, pt.total, gt.total, std::vector<long>(pt.vars, -1));
  Scorer scorer(pt, gt);

  std::vector<long> best_map(pt.vars, -1);
  double best = -1.0;
  auto consider = [&](std::vector<long> m) {
    double s = hill_climb(scorer, m, gt.vars);
    if (s > best + 1e-12) {
      best = s;
      best_map = std::move(m);
    }
  };

  // concept-seeded start
  {
    std::vector<long> m(pt.vars, -1);
    std::vector<char> used(gt.vars, 0);
    if (pt.label[static_cast<std::size_t>(pt.root)] == gt.label[static_cast<std::size_t>(gt.root)]) {
      m[static_cast<std::size_t>(pt.root)] = gt.root;
      used[static_cast<std::size_t>(gt.root)] = 1;
    }
    for (std::size_t p = 0; p < pt.vars; ++p) {
      if (m[p] >= 0) continue;
      for (std::size_t g = 0; g < gt.vars; ++g) {
        if (!used[g] && pt.label[p] == gt.label[g]) {
          m[p] = static_cast<long>(g);
          used[g] = 1;
          break;
        }
      }
    }
    consider(std::move(m));
  }
  std::mt19937_64 rng(seed);
  std::vector<long> golds(gt.vars);
  std::iota(golds.begin(), golds.end(), 0L);
  for (int r = 0; r < restarts; ++r) {
    std::shuffle(golds.begin(), golds.end(), rng);
    std::vector<long> m(pt.vars, -1);
    for (std::size_t p = 0; p < pt.vars && p < golds.size(); ++p) m[p] = golds[p];
    consider(std::move(m));
  }
  return make_match_result(best, pt.total, gt.total, std::move(best_map));
}

}  // namespace smatch_detail

// One instance triple per node, one relation triple per edge (inverse roles
// normalized), one top triple. Weights are 1 unless d_thr > 0.
inline std::vector<Triple> to_triples(const AmrGraph& g, int d_thr = 0) {
  std::vector<Triple> out;
  if (g.nodes.empty()) return out;
  std::vector<int> dist;
  if (d_thr > 0) dist = root_distances(g);
  auto w = [&](int d) { return d_thr > 0 ? triple_weight(d, d_thr) : 1.0; };
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    out.push_back({Triple::Kind::Instance, "instance", g.nodes[i].id, g.nodes[i].label, w(d_thr > 0 ? dist[i] : 0)});
  out.push_back({Triple::Kind::Top, "TOP", g.nodes[g.root].id, g.nodes[g.root].label, w(0)});
  for (const auto& e : g.edges) {
    std::size_t a = e.head, b = e.child;
    std::string rel = e.relation;
    if (is_inverse_relation(rel)) {
      rel = toggle_inverse(rel);
      std::swap(a, b);
    }
    out.push_back({Triple::Kind::Relation, rel, g.nodes[a].id, g.nodes[b].id, w(d_thr > 0 ? std::min(dist[a], dist[b]) : 0)});
  }
  return out;
}

inline constexpr int kDefaultRestarts = 4;
inline constexpr int kDefaultWeightThreshold = 5;
inline constexpr int kDefaultCoreDepth = 4;

// Hill-climbing Smatch: one concept-seeded start plus `restarts` random starts.
inline MatchResult smatch(const AmrGraph& pred, const AmrGraph& gold, int restarts = kDefaultRestarts,
                          std::uint64_t seed = 0) {
  return smatch_detail::match(pred, gold, 0, std::max(restarts, 1), seed);
}

inline MatchResult smatch_weighted(const AmrGraph& pred, const AmrGraph& gold, int d_thr = kDefaultWeightThreshold,
                                   int restarts = kDefaultRestarts, std::uint64_t seed = 0) {
  return smatch_detail::match(pred, gold, std::max(d_thr, 1), std::max(restarts, 1), seed);
}

inline MatchResult smatch_core(const AmrGraph& pred, const AmrGraph& gold, int d_max = kDefaultCoreDepth,
                               int restarts = kDefaultRestarts, std::uint64_t seed = 0) {
  AmrGraph p = pred.empty() ? pred : cut_graph(pred, d_max);
  AmrGraph g = gold.empty() ? gold : cut_graph(gold, d_max);
  return smatch(p, g, restarts, seed);
}

inline constexpr std::size_t kBruteForceLimit = 8;

// Exact optimum over injective mappings; d_thr > 0 selects weighted scoring.
inline MatchResult smatch_bruteforce(const AmrGraph& pred, const AmrGraph& gold, int d_thr = 0) {
  using namespace smatch_detail;
  if (std::min(pred.size(), gold.size()) > kBruteForceLimit)
    throw SizeError("brute-force matching needs min(|pred|, |gold|) <= " + std::to_string(kBruteForceLimit));
  RelationInterner interner;
  auto pt = build_table(pred, interner, d_thr);
  auto gt = build_table(gold, interner, d_thr);
  if (pt.vars == 0 || gt.vars == 0) return make_match_result(0.0, pt.total, gt.total, std::vector<long>(pt.vars, -1));
  Scorer scorer(pt, gt);

  // Assign every variable on the smaller side; extra mappings never lower the score.
  const bool pred_small = pt.vars <= gt.vars;
  const std::size_t small = pred_small ? pt.vars : gt.vars;
  const std::size_t large = pred_small ? gt.vars : pt.vars;
  std::vector<long> assign(small, -1);
  std::vector<char> used(large, 0);
  std::vector<long> m(pt.vars, -1), best_map(pt.vars, -1);
  double best = -1.0;

  auto to_mapping = [&] {
    std::fill(m.begin(), m.end(), -1);
    for (std::size_t s = 0; s < small; ++s) {
      if (pred_small) {
        m[s] = assign[s];
      } else if (assign[s] >= 0) {
        m[static_cast<std::size_t>(assign[s])] = static_cast<long>(s);
      }
    }
  };
  auto dfs = [&](auto&& self, std::size_t i) -> void {
    if (i == small) {
      to_mapping();
      double s = scorer.total(m);
      if (s > best + 1e-12) {
        best = s;
        best_map = m;
      }
      return;
    }
    for (std::size_t l = 0; l < large; ++l) {
      if (used[l]) continue;
      used[l] = 1;
      assign[i] = static_cast<long>(l);
      self(self, i + 1);
      used[l] = 0;
    }
    assign[i] = -1;
  };
  dfs(dfs, 0);
  return make_match_result(best, pt.total, gt.total, std::move(best_map));
}

struct PairScore {
  MatchResult ordinary, weighted, core;
  bool root_match = false;
  bool complete_match = false;
};

struct CorpusReport {
  std::vector<PairScore> pairs;
  MatchResult ordinary, weighted, core;  // micro-averaged (mapping unused)
  double root_accuracy = 0.0;
  double complete_match = 0.0;
};

struct EvalOptions {
  int d_thr = kDefaultWeightThreshold;
  int d_max = kDefaultCoreDepth;
  int restarts = kDefaultRestarts;
  std::uint64_t seed = 0;
};

inline PairScore score_pair(const AmrGraph& pred, const AmrGraph& gold, const EvalOptions& opt = {}) {
  PairScore s;
  s.ordinary = smatch(pred, gold, opt.restarts, opt.seed);
  s.weighted = smatch_weighted(pred, gold, opt.d_thr, opt.restarts, opt.seed);
  s.core = smatch_core(pred, gold, opt.d_max, opt.restarts, opt.seed);
  s.root_match = !pred.empty() && !gold.empty() && pred.nodes[pred.root].label == gold.nodes[gold.root].label;
  s.complete_match = s.ordinary.matched == s.ordinary.pred_total && s.ordinary.matched == s.ordinary.gold_total &&
                     s.ordinary.gold_total > 0;
  return s;
}

// Per-pair scores in input order plus micro-averaged corpus scores, RA and CM.
inline CorpusReport corpus_scores(const std::vector<std::pair<AmrGraph, AmrGraph>>& pairs, const EvalOptions& opt = {}) {
  CorpusReport rep;
  double om = 0, op = 0, og = 0, wm = 0, wp = 0, wg = 0, cm = 0, cp = 0, cg = 0;
  std::size_t roots = 0, complete = 0;
  for (const auto& [pred, gold] : pairs) {
    PairScore s = score_pair(pred, gold, opt);
    om += s.ordinary.matched, op += s.ordinary.pred_total, og += s.ordinary.gold_total;
    wm += s.weighted.matched, wp += s.weighted.pred_total, wg += s.weighted.gold_total;
    cm += s.core.matched, cp += s.core.pred_total, cg += s.core.gold_total;
    roots += s.root_match;
    complete += s.complete_match;
    rep.pairs.push_back(std::move(s));
  }
  rep.ordinary = make_match_result(om, op, og, {});
  rep.weighted = make_match_result(wm, wp, wg, {});
  rep.core = make_match_result(cm, cp, cg, {});
  if (!pairs.empty()) {
    rep.root_accuracy = static_cast<double>(roots) / static_cast<double>(pairs.size());
    rep.complete_match = static_cast<double>(complete) / static_cast<double>(pairs.size());
  }
  return rep;
}

// Number of nodes at each root distance across the corpus.
inline std::map<int, long> root_distance_histogram(const std::vector<AmrGraph>& corpus) {
  std::map<int, long> hist;
  for (const auto& g : corpus)
    for (int d : root_distances(g)) ++hist[d];
  return hist;
}

}  // namespace gsp
