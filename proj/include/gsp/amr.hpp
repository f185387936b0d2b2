#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "gsp/error.hpp"

namespace gsp {

using NodeIndex = std::size_t;

struct Node {
  std::string id;       // PENMAN variable, or a synthetic id for constants
  std::string label;  // frame, bare label, or literal (unquoted)
  bool is_constant = false;
};

struct Edge {
  NodeIndex head = 0;
  NodeIndex child = 0;
  std::string relation;  // always starts with ':'

  friend bool operator==(const Edge&, const Edge&) = default;
};

// Roles whose "-of" suffix is part of the name rather than an inversion marker.
inline bool is_lexical_of_role(std::string_view rel) {
  return rel == ":consist-of" || rel == ":prep-out-of" || rel == ":prep-on-behalf-of";
}

inline bool is_inverse_relation(std::string_view rel) {
  if (is_lexical_of_role(rel)) return false;
  return rel.size() > 3 && rel.substr(rel.size() - 3) == "-of";
}

// Involution: :ARG0 <-> :ARG0-of, :consist-of <-> :consist-of-of.
inline std::string toggle_inverse(std::string_view rel) {
  if (is_inverse_relation(rel)) return std::string(rel.substr(0, rel.size() - 3));
  return std::string(rel) + "-of";
}

// True when the literal would be read back as a bare (unquoted) PENMAN constant.
inline bool is_bare_constant_literal(std::string_view s) {
  if (s == "-" || s == "+") return true;
  if (s.empty()) return false;
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) return false;
  bool digit = false, dot = false;
  for (; i < s.size(); ++i) {
    if (s[i] >= '0' && s[i] <= '9') {
      digit = true;
    } else if (s[i] == '.' && !dot) {
      dot = true;
    } else {
      return false;
    }
  }
  return digit;
}

class AmrGraph {
 public:
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  NodeIndex root = 0;
  std::map<std::string, std::string> metadata;

  std::size_t size() const { return nodes.size(); }
  bool empty() const { return nodes.empty(); }

  NodeIndex add_node(std::string id, std::string label, bool is_constant = false) {
    nodes.push_back(Node{std::move(id), std::move(label), is_constant});
    return nodes.size() - 1;
  }

  // Returns false (and adds nothing) for a duplicate (head, child, relation).
  bool add_edge(NodeIndex head, NodeIndex child, std::string relation) {
    Edge e{head, child, std::move(relation)};
    if (std::find(edges.begin(), edges.end(), e) != edges.end()) return false;
    edges.push_back(std::move(e));
    return true;
  }

  std::optional<std::string> meta(const std::string& key) const {
    auto it = metadata.find(key);
    if (it == metadata.end()) return std::nullopt;
    return it->second;
  }

  // Undirected adjacency: for each node, (neighbor, edge index).
  std::vector<std::vector<std::pair<NodeIndex, std::size_t>>> adjacency() const {
    std::vector<std::vector<std::pair<NodeIndex, std::size_t>>> adj(nodes.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
      adj[edges[e].head].emplace_back(edges[e].child, e);
      adj[edges[e].child].emplace_back(edges[e].head, e);
    }
    return adj;
  }
};

// Throws IntegrityError on any broken invariant.
inline void validate(const AmrGraph& g) {
  if (g.nodes.empty()) throw IntegrityError("graph has no nodes");
  if (g.root >= g.nodes.size()) throw IntegrityError("root index out of range");
  std::set<std::string> ids;
  for (const auto& n : g.nodes) {
    if (n.label.empty()) throw IntegrityError("node '" + n.id + "' has an empty label");
    if (!ids.insert(n.id).second) throw IntegrityError("duplicate node id '" + n.id + "'");
  }
  std::set<std::tuple<NodeIndex, NodeIndex, std::string>> seen;
  for (const auto& e : g.edges) {
    if (e.head >= g.nodes.size() || e.child >= g.nodes.size())
      throw IntegrityError("edge endpoint out of range");
    if (e.head == e.child) throw IntegrityError("self-loop on '" + g.nodes[e.head].id + "'");
    if (e.relation.size() < 2 || e.relation[0] != ':')
      throw IntegrityError("relation '" + e.relation + "' must start with ':'");
    if (g.nodes[e.head].is_constant)
      throw IntegrityError("constant '" + g.nodes[e.head].label + "' has an outgoing edge");
    if (!seen.emplace(e.head, e.child, e.relation).second)
      throw IntegrityError("duplicate edge " + e.relation);
  }
  // reachability is checked by root_distances
}

// Breadth-first hop count from the root, ignoring edge direction.
inline std::vector<int> root_distances(const AmrGraph& g) {
  if (g.nodes.empty()) return {};
  if (g.root >= g.nodes.size()) throw IntegrityError("root index out of range");
  std::vector<int> dist(g.nodes.size(), -1);
  const auto adj = g.adjacency();
  std::deque<NodeIndex> queue{g.root};
  dist[g.root] = 0;
  while (!queue.empty()) {
    NodeIndex u = queue.front();
    queue.pop_front();
    for (auto [v, e] : adj[u]) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  for (std::size_t i = 0; i < dist.size(); ++i)
    if (dist[i] < 0) throw IntegrityError("node '" + g.nodes[i].id + "' is unreachable from the root");
  return dist;
}

inline int graph_depth(const AmrGraph& g) {
  auto d = root_distances(g);
  return d.empty() ? 0 : *std::max_element(d.begin(), d.end());
}

// Keeps nodes within d_max hops of the root and the edges among them.
inline AmrGraph cut_graph(const AmrGraph& g, int d_max) {
  const auto dist = root_distances(g);
  AmrGraph out;
  out.metadata = g.metadata;
  std::vector<NodeIndex> remap(g.nodes.size(), std::numeric_limits<NodeIndex>::max());
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (dist[i] <= d_max) {
      remap[i] = out.nodes.size();
      out.nodes.push_back(g.nodes[i]);
    }
  }
  if (!g.nodes.empty()) out.root = remap[g.root];
  for (const auto& e : g.edges) {
    if (dist[e.head] <= d_max && dist[e.child] <= d_max)
      out.edges.push_back(Edge{remap[e.head], remap[e.child], e.relation});
  }
  return out;
}

}  // namespace gsp
