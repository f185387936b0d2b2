#pragma once

#include <algorithm>
#include <map>
#include <regex>
#include <string>
#include <vector>

#include "json.hpp"

#include "gsp/amr.hpp"

namespace gsp {

// Sense and wiki statistics gathered from training graphs.
struct PostprocessTables {
  std::map<std::string, std::map<std::string, long>> senses;  // bare label -> suffix ("" or "-NN") -> count
  std::map<std::string, std::map<std::string, long>> wiki;    // name string -> wiki value -> count
  bool wikify = false;                                        // training graphs carried :wiki

  nlohmann::json to_json() const { return {{"senses", senses}, {"wiki", wiki}, {"wikify", wikify}}; }
  static PostprocessTables from_json(const nlohmann::json& j) {
    PostprocessTables t;
    t.senses = j.at("senses").get<decltype(t.senses)>();
    t.wiki = j.at("wiki").get<decltype(t.wiki)>();
    t.wikify = j.at("wikify").get<bool>();
    return t;
  }
};

// "strike-01" -> ("strike", "-01"); "boy" -> ("boy", "").
inline std::pair<std::string, std::string> split_sense(const std::string& label) {
  static const std::regex re(R"(^(.+)(-\d\d)$)");
  std::smatch m;
  if (std::regex_match(label, m, re)) return {m[1].str(), m[2].str()};
  return {label, ""};
}

inline std::string majority(const std::map<std::string, long>& counts) {
  std::string best;
  long n = -1;
  for (const auto& [k, c] : counts)
    if (c > n) best = k, n = c;
  return best;
}

// Space-joined :op literals under a name node.
inline std::string name_string(const AmrGraph& g, NodeIndex name_node) {
  std::vector<std::pair<std::string, std::string>> ops;
  for (const auto& e : g.edges)
    if (e.head == name_node && e.relation.rfind(":op", 0) == 0) ops.emplace_back(e.relation, g.nodes[e.child].label);
  std::sort(ops.begin(), ops.end());
  std::string out;
  for (const auto& [r, s] : ops) out += (out.empty() ? "" : " ") + s;
  return out;
}

inline PostprocessTables build_postprocess_tables(const std::vector<AmrGraph>& corpus) {
  PostprocessTables t;
  for (const auto& g : corpus) {
    for (const auto& n : g.nodes) {
      if (n.is_constant) continue;
      auto [bare, sense] = split_sense(n.label);
      ++t.senses[bare][sense];
    }
    for (const auto& e : g.edges) {
      if (e.relation != ":wiki") continue;
      t.wikify = true;
      for (const auto& e2 : g.edges)
        if (e2.head == e.head && e2.relation == ":name") ++t.wiki[name_string(g, e2.child)][g.nodes[e.child].label];
    }
  }
  return t;
}

inline bool looks_like_predicate(const AmrGraph& g, NodeIndex n) {
  static const std::regex arg(R"(^:ARG\d$)");
  static const std::regex arg_of(R"(^:ARG\d-of$)");
  for (const auto& e : g.edges) {
    if (e.head == n && std::regex_match(e.relation, arg)) return true;
    if (e.child == n && std::regex_match(e.relation, arg_of)) return true;
  }
  return false;
}

// Bare labels take their majority training sense; unseen bare predicates get
// -01. Named nodes get :wiki (default "-") when the training data had it.
inline AmrGraph postprocess(AmrGraph g, const PostprocessTables& t) {
  for (NodeIndex i = 0; i < g.nodes.size(); ++i) {
    auto& n = g.nodes[i];
    if (n.is_constant) continue;
    auto [bare, sense] = split_sense(n.label);
    if (!sense.empty()) continue;
    if (auto it = t.senses.find(bare); it != t.senses.end()) {
      n.label = bare + majority(it->second);
    } else if (looks_like_predicate(g, i)) {
      n.label = bare + "-01";
    }
  }
  if (t.wikify) {
    const std::size_t edges = g.edges.size();
    for (std::size_t k = 0; k < edges; ++k) {
      const Edge e = g.edges[k];
      if (e.relation != ":name") continue;
      bool has = false;
      for (const auto& e2 : g.edges) has = has || (e2.head == e.head && e2.relation == ":wiki");
      if (has) continue;
      std::string value = "-";
      if (auto it = t.wiki.find(name_string(g, e.child)); it != t.wiki.end()) value = majority(it->second);
      NodeIndex c = g.add_node("_wiki" + std::to_string(g.nodes.size()), value, true);
      g.add_edge(e.head, c, ":wiki");
    }
  }
  return g;
}

}  // namespace gsp
