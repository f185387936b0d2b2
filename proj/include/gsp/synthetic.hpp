#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "gsp/corpus.hpp"
#include "gsp/penman.hpp"

namespace gsp {

// Small template grammar producing sentence/AMR/alignment triples whose
// mapping is learnable from a handful of examples.
struct SyntheticOptions {
  std::size_t max_tokens = 8;
};

namespace synth_detail {

struct Verb {
  std::string frame;
  std::vector<std::string> forms;  // inflected forms; the last is the base form
};

inline const std::vector<std::string>& nouns() {
  static const std::vector<std::string> v{"boy", "girl", "cat", "dog", "bird", "teacher", "book", "apple", "car", "house"};
  return v;
}
inline const std::vector<std::string>& adjectives() {
  static const std::vector<std::string> v{"big", "small", "old", "red"};
  return v;
}
inline const std::vector<std::pair<std::string, std::string>>& names() {
  static const std::vector<std::pair<std::string, std::string>> v{
      {"John", "person"}, {"Mary", "person"}, {"Paris", "city"}, {"London", "city"}};
  return v;
}
inline const std::vector<Verb>& transitive() {
  static const std::vector<Verb> v{{"see-01", {"sees", "saw", "see"}},   {"like-01", {"likes", "like"}},
                                   {"eat-01", {"eats", "ate", "eat"}},   {"chase-01", {"chases", "chased", "chase"}},
                                   {"find-01", {"finds", "found", "find"}}, {"visit-01", {"visits", "visited", "visit"}}};
  return v;
}
inline const std::vector<Verb>& intransitive() {
  static const std::vector<Verb> v{{"sleep-01", {"sleeps", "slept", "sleep"}},
                                   {"run-02", {"runs", "ran", "run"}},
                                   {"sing-01", {"sings", "sang", "sing"}},
                                   {"live-01", {"lives", "lived", "live"}}};
  return v;
}

class Builder {
 public:
  AmrGraph g;
  Alignment alignment;
  std::vector<std::string> tokens;

  NodeIndex node(const std::string& label, bool constant = false) {
    std::string id = constant ? "_" + std::to_string(g.nodes.size()) : var_for(label);
    return g.add_node(id, label, constant);
  }
  void word(const std::string& w) { tokens.push_back(w); }
  void word(const std::string& w, NodeIndex aligned) {
    alignment.emplace_back(tokens.size(), g.nodes[aligned].id);
    tokens.push_back(w);
  }

 private:
  std::string var_for(const std::string& label) {
    char c = label.empty() ? 'x' : label[0];
    int k = ++counts_[c];
    return k == 1 ? std::string(1, c) : std::string(1, c) + std::to_string(k);
  }
  std::map<char, int> counts_;
};

template <typename T, typename R>
const T& pick(const std::vector<T>& v, R& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

template <typename R>
NodeIndex noun_phrase(Builder& b, R& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < 0.25) {
    const auto& [name, type] = pick(names(), rng);
    NodeIndex head = b.node(type);
    NodeIndex nm = b.node("name");
    NodeIndex lit = b.node(name, true);
    b.g.add_edge(head, nm, ":name");
    b.g.add_edge(nm, lit, ":op1");
    b.word(name, head);
    return head;
  }
  const std::string& noun = pick(nouns(), rng);
  b.word("the");
  if (u(rng) < 0.3) {
    const std::string& adj = pick(adjectives(), rng);
    NodeIndex a = b.node(adj);
    b.word(adj, a);
    NodeIndex n = b.node(noun);
    b.g.add_edge(n, a, ":mod");
    b.word(noun, n);
    return n;
  }
  NodeIndex n = b.node(noun);
  b.word(noun, n);
  return n;
}

template <typename R>
Builder sentence(R& rng) {
  Builder b;
  const int kind = std::uniform_int_distribution<int>(0, 4)(rng);
  auto inflected = [&](const Verb& v) -> const std::string& {
    return v.forms[std::uniform_int_distribution<std::size_t>(0, v.forms.size() - 2)(rng)];
  };
  switch (kind) {
    case 0: {  // NP V NP
      const Verb& v = pick(transitive(), rng);
      NodeIndex root = b.node(v.frame);
      b.g.root = root;
      NodeIndex a0 = noun_phrase(b, rng);
      b.word(inflected(v), root);
      NodeIndex a1 = noun_phrase(b, rng);
      b.g.add_edge(root, a0, ":ARG0");
      b.g.add_edge(root, a1, ":ARG1");
      break;
    }
    case 1: {  // NP V
      const Verb& v = pick(intransitive(), rng);
      NodeIndex root = b.node(v.frame);
      b.g.root = root;
      NodeIndex a0 = noun_phrase(b, rng);
      b.word(inflected(v), root);
      b.g.add_edge(root, a0, ":ARG0");
      break;
    }
    case 2: {  // NP wants to V NP
      const Verb& v = pick(transitive(), rng);
      NodeIndex want = b.node("want-01");
      b.g.root = want;
      NodeIndex a0 = noun_phrase(b, rng);
      b.word("wants", want);
      b.word("to");
      NodeIndex inner = b.node(v.frame);
      b.word(v.forms.back(), inner);
      NodeIndex a1 = noun_phrase(b, rng);
      b.g.add_edge(want, a0, ":ARG0");
      b.g.add_edge(want, inner, ":ARG1");
      b.g.add_edge(inner, a0, ":ARG0");
      b.g.add_edge(inner, a1, ":ARG1");
      break;
    }
    case 3: {  // NP did not V NP
      const Verb& v = pick(transitive(), rng);
      NodeIndex root = b.node(v.frame);
      b.g.root = root;
      NodeIndex a0 = noun_phrase(b, rng);
      b.word("did");
      NodeIndex neg = b.node("-", true);
      b.word("not", neg);
      b.word(v.forms.back(), root);
      NodeIndex a1 = noun_phrase(b, rng);
      b.g.add_edge(root, a0, ":ARG0");
      b.g.add_edge(root, a1, ":ARG1");
      b.g.add_edge(root, neg, ":polarity");
      break;
    }
    default: {  // NP V in NP
      const Verb& v = pick(intransitive(), rng);
      NodeIndex root = b.node(v.frame);
      b.g.root = root;
      NodeIndex a0 = noun_phrase(b, rng);
      b.word(inflected(v), root);
      b.word("in");
      NodeIndex loc = noun_phrase(b, rng);
      b.g.add_edge(root, a0, ":ARG0");
      b.g.add_edge(root, loc, ":location");
      break;
    }
  }
  return b;
}

}  // namespace synth_detail

template <typename R>
Example synthetic_example(R& rng, const std::string& id, const SyntheticOptions& opt = {}) {
  for (;;) {
    auto b = synth_detail::sentence(rng);
    if (b.tokens.size() > opt.max_tokens) continue;
    Example ex;
    ex.sentence = fallback_annotation(id, b.tokens);
    b.g.metadata["id"] = id;
    b.g.metadata["snt"] = ex.sentence.text;
    // the graph as a reader of the serialized file will see it, so that
    // alignments to constants use the parser's node ids
    ex.graph = parse_penman(serialize_penman(b.g, true, true)).at(0);
    for (auto [tok, node] : b.alignment) {
      const auto old = std::find_if(b.g.nodes.begin(), b.g.nodes.end(), [&](const Node& n) { return n.id == node; });
      if (old != b.g.nodes.end() && old->is_constant) {
        const auto oi = static_cast<NodeIndex>(old - b.g.nodes.begin());
        for (const auto& e : b.g.edges)
          if (e.child == oi)
            for (const auto& e2 : ex.graph.edges)
              if (e2.relation == e.relation && ex.graph.nodes[e2.head].id == b.g.nodes[e.head].id &&
                  ex.graph.nodes[e2.child].label == old->label)
                node = ex.graph.nodes[e2.child].id;
      }
      ex.alignment.emplace_back(tok, node);
    }
    return ex;
  }
}

inline std::vector<Example> synthetic_corpus(std::size_t count, std::uint64_t seed, const SyntheticOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  std::vector<Example> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(synthetic_example(rng, "synth-" + std::to_string(i + 1), opt));
  return out;
}

}  // namespace gsp
