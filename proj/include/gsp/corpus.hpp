#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gsp/amr.hpp"
#include "gsp/error.hpp"
#include "gsp/penman.hpp"

namespace gsp {

struct AnnotatedSentence {
  std::string id;
  std::string text;
  std::vector<std::string> tokens, lemmas, pos, ner;

  std::size_t size() const { return tokens.size(); }
};

// (token index, node id) pairs.
using Alignment = std::vector<std::pair<std::size_t, std::string>>;

struct Example {
  AnnotatedSentence sentence;
  AmrGraph graph;
  Alignment alignment;
};

inline std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline std::vector<std::string> split_whitespace(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

inline void check_annotation(const AnnotatedSentence& s) {
  if (s.tokens.empty()) throw DataError("sentence '" + s.id + "' has no tokens");
  const std::size_t n = s.tokens.size();
  if (s.lemmas.size() != n || s.pos.size() != n || s.ner.size() != n)
    throw DataError("sentence '" + s.id + "': tokens/lemmas/pos/ner lengths differ");
}

// Lowercased tokens as lemmas, POS X, NER O.
inline AnnotatedSentence fallback_annotation(std::string id, const std::vector<std::string>& tokens) {
  AnnotatedSentence s;
  s.id = std::move(id);
  s.tokens = tokens;
  for (const auto& t : tokens) s.lemmas.push_back(lowercase(t));
  s.pos.assign(tokens.size(), "X");
  s.ner.assign(tokens.size(), "O");
  for (std::size_t i = 0; i < tokens.size(); ++i) s.text += (i ? " " : "") + tokens[i];
  return s;
}

// Records carrying only id and tokens (or only text) go through the
// fallback annotator.
inline AnnotatedSentence annotation_from_json(const nlohmann::json& j) {
  AnnotatedSentence s;
  if (j.is_object() && !j.contains("lemmas") && !j.contains("pos") && !j.contains("ner")) {
    try {
      const auto id = j.at("id").get<std::string>();
      const auto tokens = j.contains("tokens") ? j.at("tokens").get<std::vector<std::string>>()
                                               : split_whitespace(j.at("text").get<std::string>());
      s = fallback_annotation(id, tokens);
      if (j.contains("text")) s.text = j.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("sentence record: ") + e.what());
    }
    check_annotation(s);
    return s;
  }
  try {
    s.id = j.at("id").get<std::string>();
    s.tokens = j.at("tokens").get<std::vector<std::string>>();
    s.lemmas = j.at("lemmas").get<std::vector<std::string>>();
    s.pos = j.at("pos").get<std::vector<std::string>>();
    s.ner = j.at("ner").get<std::vector<std::string>>();
    if (j.contains("text")) s.text = j.at("text").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("annotation record: ") + e.what());
  }
  if (s.text.empty())
    for (std::size_t i = 0; i < s.tokens.size(); ++i) s.text += (i ? " " : "") + s.tokens[i];
  check_annotation(s);
  return s;
}

inline nlohmann::json annotation_to_json(const AnnotatedSentence& s) {
  return {{"id", s.id}, {"tokens", s.tokens}, {"lemmas", s.lemmas}, {"pos", s.pos}, {"ner", s.ner}};
}

inline std::vector<AnnotatedSentence> parse_annotations(const std::string& text) {
  std::vector<AnnotatedSentence> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(e.what(), lineno);
    }
    out.push_back(annotation_from_json(j));
  }
  return out;
}

// Blocks introduced by "# ::id <id>", then lines "token_index<TAB>node_id".
inline std::map<std::string, Alignment> parse_alignments(const std::string& text) {
  std::map<std::string, Alignment> out;
  std::istringstream in(text);
  std::string line, current;
  bool have = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("# ::id ", 0) == 0) {
      current = line.substr(7);
      out[current];
      have = true;
      continue;
    }
    if (line[0] == '#') continue;
    if (!have) throw ParseError("alignment line before any '# ::id' header", lineno);
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("expected token_index<TAB>node_id", lineno);
    std::size_t idx = 0;
    try {
      idx = std::stoul(line.substr(0, tab));
    } catch (const std::exception&) {
      throw ParseError("bad token index '" + line.substr(0, tab) + "'", lineno);
    }
    out[current].emplace_back(idx, line.substr(tab + 1));
  }
  return out;
}

inline std::string format_alignments(const std::vector<Example>& corpus) {
  std::ostringstream out;
  for (const auto& ex : corpus) {
    out << "# ::id " << ex.sentence.id << '\n';
    for (const auto& [i, node] : ex.alignment) out << i << '\t' << node << '\n';
    out << '\n';
  }
  return out.str();
}

inline std::string graph_id(const AmrGraph& g, std::size_t position) {
  if (auto id = g.meta("id")) return *id;
  return "#" + std::to_string(position + 1);
}

// Tokens from "# ::tok", else whitespace-split "# ::snt".
inline std::vector<std::string> graph_tokens(const AmrGraph& g) {
  if (auto tok = g.meta("tok")) return split_whitespace(*tok);
  if (auto snt = g.meta("snt")) return split_whitespace(*snt);
  return {};
}

// Joins graphs with annotations by id; without annotations the fallback
// annotator runs over each graph's own sentence metadata.
inline std::vector<Example> ingest(const std::vector<AmrGraph>& graphs,
                                   const std::optional<std::vector<AnnotatedSentence>>& annotations,
                                   const std::map<std::string, Alignment>& alignments = {}) {
  std::vector<Example> out;
  std::map<std::string, const AnnotatedSentence*> by_id;
  if (annotations)
    for (const auto& a : *annotations) by_id[a.id] = &a;
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const std::string id = graph_id(graphs[i], i);
    Example ex;
    ex.graph = graphs[i];
    if (annotations) {
      auto it = by_id.find(id);
      if (it == by_id.end()) {
        missing.push_back(id);
        continue;
      }
      ex.sentence = *it->second;
    } else {
      auto toks = graph_tokens(graphs[i]);
      if (toks.empty()) throw DataError("graph '" + id + "' has no '# ::snt' or '# ::tok' metadata");
      ex.sentence = fallback_annotation(id, toks);
    }
    check_annotation(ex.sentence);
    if (auto it = alignments.find(id); it != alignments.end()) {
      for (const auto& [tok, node] : it->second) {
        if (tok >= ex.sentence.size())
          throw DataError("alignment for '" + id + "' refers to token " + std::to_string(tok));
        bool found = std::any_of(ex.graph.nodes.begin(), ex.graph.nodes.end(), [&](const Node& n) { return n.id == node; });
        if (!found) throw DataError("alignment for '" + id + "' refers to unknown node '" + node + "'");
      }
      ex.alignment = it->second;
    }
    out.push_back(std::move(ex));
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw DataError("no annotation for graph id(s): " + list);
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << content;
}

}  // namespace gsp
