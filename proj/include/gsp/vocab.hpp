#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "gsp/corpus.hpp"
#include "gsp/linearize.hpp"

namespace gsp {

inline const std::string kPadToken = "<pad>";
inline const std::string kUnkToken = "<unk>";
inline const std::string kBosToken = "<bos>";

class Vocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  Vocab() : Vocab(std::vector<std::string>{}) {}
  explicit Vocab(const std::vector<std::string>& extra_specials) {
    add(kPadToken);
    add(kUnkToken);
    for (const auto& s : extra_specials) add(s);
  }

  std::size_t add(const std::string& s) {
    auto [it, inserted] = stoi_.emplace(s, itos_.size());
    if (inserted) itos_.push_back(s);
    return it->second;
  }

  std::size_t id(const std::string& s) const {
    auto it = stoi_.find(s);
    return it == stoi_.end() ? kUnk : it->second;
  }
  bool contains(const std::string& s) const { return stoi_.count(s) > 0; }
  const std::string& token(std::size_t i) const { return itos_.at(i); }
  std::size_t size() const { return itos_.size(); }
  const std::vector<std::string>& tokens() const { return itos_; }

  // Adds entries with count >= min_count, most frequent first, ties by string.
  void add_counted(const std::map<std::string, long>& counts, long min_count) {
    std::vector<std::pair<std::string, long>> items(counts.begin(), counts.end());
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (const auto& [s, c] : items)
      if (c >= min_count) add(s);
  }

  nlohmann::json to_json() const { return itos_; }
  static Vocab from_json(const nlohmann::json& j) {
    Vocab v;
    v.itos_.clear();
    v.stoi_.clear();
    for (const auto& s : j) v.add(s.get<std::string>());
    return v;
  }

 private:
  std::vector<std::string> itos_;
  std::unordered_map<std::string, std::size_t> stoi_;
};

struct VocabBundle {
  Vocab concepts{{kStopConcept}};
  Vocab lemma{{kBosToken}};
  Vocab pos{{kBosToken}};
  Vocab ner{{kBosToken}};
  Vocab chars{{kBosToken}};
  Vocab relation;
  std::map<std::string, std::string> map_table;  // lowercased word -> concept token

  // m(w): the aligned concept, or the lemma when the word was never aligned.
  std::string mapped_concept(const std::string& token, const std::string& lemma) const {
    auto it = map_table.find(lowercase(token));
    return it == map_table.end() ? lemma : it->second;
  }

  nlohmann::json to_json() const {
    return {{"concept", concepts.to_json()}, {"lemma", lemma.to_json()}, {"pos", pos.to_json()},
            {"ner", ner.to_json()},         {"chars", chars.to_json()}, {"relation", relation.to_json()},
            {"map_table", map_table}};
  }
  static VocabBundle from_json(const nlohmann::json& j) {
    VocabBundle v;
    v.concepts = Vocab::from_json(j.at("concept"));
    v.lemma = Vocab::from_json(j.at("lemma"));
    v.pos = Vocab::from_json(j.at("pos"));
    v.ner = Vocab::from_json(j.at("ner"));
    v.chars = Vocab::from_json(j.at("chars"));
    v.relation = Vocab::from_json(j.at("relation"));
    v.map_table = j.at("map_table").get<std::map<std::string, std::string>>();
    return v;
  }
};

struct VocabOptions {
  long min_concept_count = 1;
  long min_lemma_count = 1;
};

// UTF-8 code points as separate characters.
inline std::vector<std::string> split_chars(const std::string& s) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < s.size();) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 1;
    len = std::min(len, s.size() - i);
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

inline VocabBundle build_vocabularies(const std::vector<Example>& corpus, const VocabOptions& opt = {}) {
  if (corpus.empty()) throw DataError("cannot build vocabularies from an empty corpus");
  VocabBundle v;
  std::map<std::string, long> concepts, lemmas, pos, ner, chars, relations;
  std::map<std::string, std::map<std::string, long>> aligned;
  for (const auto& ex : corpus) {
    const auto& s = ex.sentence;
    for (std::size_t i = 0; i < s.size(); ++i) {
      ++lemmas[s.lemmas[i]];
      ++pos[s.pos[i]];
      ++ner[s.ner[i]];
      for (const auto& c : split_chars(s.tokens[i])) ++chars[c];
    }
    for (const auto& n : ex.graph.nodes) {
      const std::string tok = concept_token(n);
      ++concepts[tok];
      for (const auto& c : split_chars(tok)) ++chars[c];
    }
    for (const auto& e : ex.graph.edges) {
      ++relations[e.relation];
      ++relations[toggle_inverse(e.relation)];
    }
    for (const auto& [ti, node_id] : ex.alignment) {
      for (const auto& n : ex.graph.nodes)
        if (n.id == node_id) ++aligned[lowercase(s.tokens.at(ti))][concept_token(n)];
    }
  }
  v.concepts.add_counted(concepts, opt.min_concept_count);
  v.lemma.add_counted(lemmas, opt.min_lemma_count);
  v.pos.add_counted(pos, 1);
  v.ner.add_counted(ner, 1);
  v.chars.add_counted(chars, 1);
  v.relation.add_counted(relations, 1);
  for (const auto& [word, counts] : aligned) {
    // most frequent, ties to the smaller string (map order)
    const auto best = std::max_element(counts.begin(), counts.end(),
                                       [](const auto& a, const auto& b) { return a.second < b.second; });
    v.map_table[word] = best->first;
  }
  return v;
}

struct CoverageReport {
  std::size_t concepts = 0;
  std::size_t uncovered = 0;
  std::vector<std::string> examples;  // "<id>: <concept>"
};

// A gold concept is covered when the vocabulary, a copied token or a mapped
// token can produce it.
inline CoverageReport coverage_scan(const std::vector<Example>& corpus, const VocabBundle& v) {
  CoverageReport rep;
  for (const auto& ex : corpus) {
    const auto& s = ex.sentence;
    for (const auto& n : ex.graph.nodes) {
      const std::string tok = concept_token(n);
      ++rep.concepts;
      bool ok = v.concepts.contains(tok);
      for (std::size_t i = 0; i < s.size() && !ok; ++i)
        ok = tok == "\"" + s.tokens[i] + "\"" || tok == v.mapped_concept(s.tokens[i], s.lemmas[i]);
      if (!ok) {
        ++rep.uncovered;
        if (rep.examples.size() < 20) rep.examples.push_back(s.id + ": " + tok);
      }
    }
  }
  return rep;
}

struct TokenFeatures {
  std::size_t lemma = Vocab::kPad, pos = Vocab::kPad, ner = Vocab::kPad;
  std::vector<std::size_t> chars;
};

// Encoder input; position 0 is the summary token.
inline std::vector<TokenFeatures> featurize(const AnnotatedSentence& s, const VocabBundle& v) {
  std::vector<TokenFeatures> out;
  const std::size_t bos_l = v.lemma.id(kBosToken);
  out.push_back({bos_l, v.pos.id(kBosToken), v.ner.id(kBosToken), {v.chars.id(kBosToken)}});
  for (std::size_t i = 0; i < s.size(); ++i) {
    TokenFeatures f;
    f.lemma = v.lemma.id(s.lemmas[i]);
    f.pos = v.pos.id(s.pos[i]);
    f.ner = v.ner.id(s.ner[i]);
    for (const auto& c : split_chars(s.tokens[i])) f.chars.push_back(v.chars.id(c));
    out.push_back(std::move(f));
  }
  return out;
}

inline std::vector<std::size_t> concept_chars(const std::string& token, const VocabBundle& v) {
  std::vector<std::size_t> out;
  for (const auto& c : split_chars(token)) out.push_back(v.chars.id(c));
  return out;
}

}  // namespace gsp
