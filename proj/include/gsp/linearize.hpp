#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "gsp/amr.hpp"
#include "gsp/error.hpp"

namespace gsp {

inline const std::string kStopConcept = "<stop>";
inline const std::string kRootRelation = ":root";

// One expansion step: the new concept plus its arcs from already emitted nodes.
// Parent index 0 is the dummy node and only appears as (0, :root) at step 1.
struct SpanningAction {
  int step = 0;
  std::string label;
  std::vector<std::pair<int, std::string>> parents;

  bool is_stop() const { return label == kStopConcept; }
  friend bool operator==(const SpanningAction&, const SpanningAction&) = default;
};

using RelationFrequency = std::map<std::string, long>;

struct OrderStrategy {
  enum class Kind { Random, RelationFreq, Combined };
  Kind kind = Kind::RelationFreq;
  RelationFrequency frequency;

  static OrderStrategy random() { return {Kind::Random, {}}; }
  static OrderStrategy relation_freq(RelationFrequency f) { return {Kind::RelationFreq, std::move(f)}; }
  static OrderStrategy combined(RelationFrequency f) { return {Kind::Combined, std::move(f)}; }
};

inline OrderStrategy::Kind parse_order_kind(std::string_view s) {
  if (s == "random") return OrderStrategy::Kind::Random;
  if (s == "relation-freq") return OrderStrategy::Kind::RelationFreq;
  if (s == "combined") return OrderStrategy::Kind::Combined;
  throw DataError("unknown sibling order '" + std::string(s) + "'");
}

inline std::string to_string(OrderStrategy::Kind k) {
  switch (k) {
    case OrderStrategy::Kind::Random: return "random";
    case OrderStrategy::Kind::RelationFreq: return "relation-freq";
    case OrderStrategy::Kind::Combined: return "combined";
  }
  return "?";
}

inline RelationFrequency relation_frequency_table(const std::vector<AmrGraph>& corpus) {
  RelationFrequency table;
  for (const auto& g : corpus)
    for (const auto& e : g.edges) ++table[e.relation];
  return table;
}

// Action-sequence spelling of a node's label: constants are quoted.
inline std::string concept_token(const Node& n) {
  return n.is_constant ? "\"" + n.label + "\"" : n.label;
}

inline bool is_constant_token(std::string_view token) {
  return token.size() >= 2 && token.front() == '"' && token.back() == '"';
}

inline Node node_from_token(std::string id, std::string_view token) {
  if (is_constant_token(token)) return Node{std::move(id), std::string(token.substr(1, token.size() - 2)), true};
  return Node{std::move(id), std::string(token), false};
}

// Breadth-first oracle order from the root. Every emitted arc runs from an
// already emitted node to the new one; edges pointing the other way are
// re-expressed with the inverse relation.
inline std::vector<SpanningAction> linearize(const AmrGraph& g, const OrderStrategy& strategy, std::uint64_t seed) {
  validate(g);
  root_distances(g);  // connectivity
  std::mt19937_64 rng(seed);
  bool use_random = strategy.kind == OrderStrategy::Kind::Random;
  if (strategy.kind == OrderStrategy::Kind::Combined) use_random = std::bernoulli_distribution(0.5)(rng);

  const auto adj = g.adjacency();
  auto action_relation = [&](NodeIndex from, std::size_t e) {
    const Edge& ed = g.edges[e];
    return ed.head == from ? ed.relation : toggle_inverse(ed.relation);
  };
  auto freq = [&](const std::string& rel) {
    auto it = strategy.frequency.find(rel);
    return it == strategy.frequency.end() ? 0L : it->second;
  };

  std::vector<int> step_of(g.nodes.size(), 0);
  std::vector<NodeIndex> order{g.root};
  step_of[g.root] = 1;
  std::deque<NodeIndex> queue{g.root};
  while (!queue.empty()) {
    NodeIndex u = queue.front();
    queue.pop_front();
    struct Sibling {
      NodeIndex node;
      std::string rel;
    };
    std::vector<Sibling> sibs;
    for (auto [v, e] : adj[u]) {
      if (step_of[v] != 0) continue;
      std::string rel = action_relation(u, e);
      auto it = std::find_if(sibs.begin(), sibs.end(), [&](const Sibling& s) { return s.node == v; });
      if (it == sibs.end()) {
        sibs.push_back({v, rel});
      } else if (std::make_tuple(-freq(rel), rel) < std::make_tuple(-freq(it->rel), it->rel)) {
        it->rel = rel;
      }
    }
    std::sort(sibs.begin(), sibs.end(), [&](const Sibling& a, const Sibling& b) {
      return std::make_tuple(-freq(a.rel), std::cref(a.rel), std::cref(g.nodes[a.node].label), a.node) <
             std::make_tuple(-freq(b.rel), std::cref(b.rel), std::cref(g.nodes[b.node].label), b.node);
    });
    if (use_random) std::shuffle(sibs.begin(), sibs.end(), rng);
    for (const auto& s : sibs) {
      step_of[s.node] = static_cast<int>(order.size()) + 1;
      order.push_back(s.node);
      queue.push_back(s.node);
    }
  }

  std::vector<SpanningAction> actions;
  actions.reserve(order.size() + 1);
  for (NodeIndex n : order) {
    SpanningAction a;
    a.step = step_of[n];
    a.label = concept_token(g.nodes[n]);
    if (a.step == 1) {
      a.parents.emplace_back(0, kRootRelation);
    } else {
      for (auto [v, e] : adj[n])
        if (step_of[v] < a.step) a.parents.emplace_back(step_of[v], action_relation(v, e));
      std::sort(a.parents.begin(), a.parents.end());
      a.parents.erase(std::unique(a.parents.begin(), a.parents.end()), a.parents.end());
    }
    actions.push_back(std::move(a));
  }
  actions.push_back(SpanningAction{static_cast<int>(order.size()) + 1, kStopConcept, {}});
  return actions;
}

// Inverse of linearize up to isomorphism; edges come back in canonical
// direction (inverse relations un-toggled).
inline AmrGraph rebuild(const std::vector<SpanningAction>& actions) {
  if (actions.empty()) throw StructureError("empty action sequence");
  if (!actions.back().is_stop()) throw StructureError("action sequence does not end with the stop concept");
  if (!actions.back().parents.empty()) throw StructureError("stop action must not carry parents");
  if (actions.size() == 1) throw StructureError("action sequence yields an empty graph");
  AmrGraph g;
  for (std::size_t i = 0; i + 1 < actions.size(); ++i) {
    const auto& a = actions[i];
    const int t = static_cast<int>(i) + 1;
    if (a.step != t) throw StructureError("action " + std::to_string(i) + " has step " + std::to_string(a.step));
    if (a.is_stop()) throw StructureError("stop concept before the final action");
    if (a.label.empty()) throw StructureError("empty concept at step " + std::to_string(t));
    Node n = node_from_token("n" + std::to_string(t), a.label);
    g.nodes.push_back(std::move(n));
    const NodeIndex self = g.nodes.size() - 1;
    if (t == 1) {
      for (const auto& [p, rel] : a.parents)
        if (p != 0) throw StructureError("root action may only attach to the dummy node");
      continue;
    }
    if (a.parents.empty()) throw StructureError("step " + std::to_string(t) + " has no parents");
    for (const auto& [p, rel] : a.parents) {
      if (p < 1 || p >= t)
        throw StructureError("step " + std::to_string(t) + " refers to parent " + std::to_string(p));
      if (rel.size() < 2 || rel[0] != ':') throw StructureError("bad relation '" + rel + "'");
      const NodeIndex parent = static_cast<NodeIndex>(p - 1);
      NodeIndex head = parent, child = self;
      std::string label = rel;
      bool flip = is_inverse_relation(rel);
      if (flip && g.nodes[self].is_constant) flip = false;
      if (!flip && g.nodes[parent].is_constant && !g.nodes[self].is_constant) flip = true;
      if (flip) {
        head = self;
        child = parent;
        label = toggle_inverse(rel);
      }
      if (g.nodes[head].is_constant) g.nodes[head].is_constant = false;
      g.add_edge(head, child, label);
    }
  }
  g.root = 0;
  return g;
}

// Debug records: t<TAB>label<TAB>parent:relation,...
inline std::string format_actions(const std::vector<SpanningAction>& actions) {
  std::ostringstream out;
  for (const auto& a : actions) {
    out << a.step << '\t' << a.label << '\t';
    for (std::size_t i = 0; i < a.parents.size(); ++i) {
      if (i) out << ',';
      out << a.parents[i].first << ':' << a.parents[i].second;
    }
    out << '\n';
  }
  return out.str();
}

inline std::vector<SpanningAction> parse_actions(std::string_view text) {
  std::vector<SpanningAction> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw ParseError("expected three tab-separated fields", lineno);
    SpanningAction a;
    a.step = std::stoi(line.substr(0, t1));
    a.label = line.substr(t1 + 1, t2 - t1 - 1);
    std::string rest = line.substr(t2 + 1);
    std::istringstream items(rest);
    std::string item;
    while (std::getline(items, item, ',')) {
      // "p::rel" splits at the first ':'
      auto colon = item.find(':');
      if (colon == std::string::npos) throw ParseError("bad parent entry '" + item + "'", lineno);
      a.parents.emplace_back(std::stoi(item.substr(0, colon)), item.substr(colon + 1));
    }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace gsp
