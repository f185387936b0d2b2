#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "gsp/amr.hpp"

namespace gsp {

// Random well-formed AMR graphs for property tests and metric checks.
struct RandomGraphOptions {
  std::size_t min_nodes = 1;
  std::size_t max_nodes = 8;
  double constant_prob = 0.15;
  double inverse_prob = 0.15;
  double reentrancy_prob = 0.3;
  std::vector<std::string> concepts{"want-01", "go-01", "see-01", "boy", "girl", "cat", "dog", "big",
                                    "city", "name", "person", "strike-01", "earthquake", "time"};
  std::vector<std::string> relations{":ARG0", ":ARG1", ":ARG2", ":mod", ":time", ":location", ":manner"};
  std::vector<std::string> constants{"-", "5", "12", "John", "Paris"};
};

template <typename Rng>
AmrGraph random_graph(Rng& rng, const RandomGraphOptions& opt = {}) {
  auto pick = [&](const std::vector<std::string>& v) -> const std::string& {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = std::uniform_int_distribution<std::size_t>(opt.min_nodes, opt.max_nodes)(rng);
  AmrGraph g;
  g.add_node("v0", pick(opt.concepts));
  g.root = 0;
  std::vector<NodeIndex> variables{0};
  for (std::size_t i = 1; i < n; ++i) {
    NodeIndex parent = variables[std::uniform_int_distribution<std::size_t>(0, variables.size() - 1)(rng)];
    const std::string& rel = pick(opt.relations);
    if (unit(rng) < opt.constant_prob) {
      NodeIndex c = g.add_node("c" + std::to_string(i), pick(opt.constants), true);
      g.add_edge(parent, c, rel);
      continue;
    }
    NodeIndex v = g.add_node("v" + std::to_string(i), pick(opt.concepts));
    variables.push_back(v);
    if (unit(rng) < opt.inverse_prob) {
      g.add_edge(v, parent, toggle_inverse(rel));
    } else {
      g.add_edge(parent, v, rel);
    }
  }
  if (variables.size() >= 2 && unit(rng) < opt.reentrancy_prob) {
    std::uniform_int_distribution<std::size_t> any(0, variables.size() - 1);
    NodeIndex a = variables[any(rng)], b = variables[any(rng)];
    if (a != b) g.add_edge(a, b, pick(opt.relations));
  }
  return g;
}

// Small edits: relabel concepts/relations, drop a leaf, or graft a node.
template <typename Rng>
AmrGraph perturb_graph(const AmrGraph& g, Rng& rng, const RandomGraphOptions& opt = {}) {
  AmrGraph out = g;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto pick = [&](const std::vector<std::string>& v) -> const std::string& {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  for (auto& n : out.nodes)
    if (!n.is_constant && unit(rng) < 0.2) n.label = pick(opt.concepts);
  for (auto& e : out.edges)
    if (unit(rng) < 0.15 && !is_inverse_relation(e.relation)) {
      std::string r = pick(opt.relations);
      Edge probe{e.head, e.child, r};
      bool dup = false;
      for (const auto& other : out.edges) dup = dup || other == probe;
      if (!dup) e.relation = r;
    }
  if (out.nodes.size() > 1 && unit(rng) < 0.3) {
    // drop one degree-1 non-root node
    std::vector<int> degree(out.nodes.size(), 0);
    for (const auto& e : out.edges) ++degree[e.head], ++degree[e.child];
    for (NodeIndex i = out.nodes.size(); i-- > 0;) {
      if (i != out.root && degree[i] == 1) {
        std::vector<Edge> kept;
        for (const auto& e : out.edges)
          if (e.head != i && e.child != i) {
            Edge f = e;
            if (f.head > i) --f.head;
            if (f.child > i) --f.child;
            kept.push_back(f);
          }
        out.edges = std::move(kept);
        out.nodes.erase(out.nodes.begin() + static_cast<std::ptrdiff_t>(i));
        if (out.root > i) --out.root;
        break;
      }
    }
  }
  if (unit(rng) < 0.3) {
    NodeIndex parent = std::uniform_int_distribution<std::size_t>(0, out.nodes.size() - 1)(rng);
    if (!out.nodes[parent].is_constant) {
      NodeIndex v = out.add_node("p" + std::to_string(out.nodes.size()), pick(opt.concepts));
      out.add_edge(parent, v, pick(opt.relations));
    }
  }
  return out;
}

}  // namespace gsp
