#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gsp/amr.hpp"
#include "gsp/error.hpp"

namespace gsp {

namespace penman_detail {

enum class Tok { LParen, RParen, Slash, Role, String, Symbol };

struct Token {
  Tok kind;
  std::string text;
  std::size_t line;
};

inline std::vector<Token> tokenize(const std::vector<std::pair<std::size_t, std::string>>& lines) {
  std::vector<Token> out;
  for (const auto& [lineno, line] : lines) {
    std::size_t i = 0;
    while (i < line.size()) {
      char c = line[i];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
      } else if (c == '(') {
        out.push_back({Tok::LParen, "(", lineno});
        ++i;
      } else if (c == ')') {
        out.push_back({Tok::RParen, ")", lineno});
        ++i;
      } else if (c == '/') {
        out.push_back({Tok::Slash, "/", lineno});
        ++i;
      } else if (c == '"') {
        std::string s;
        ++i;
        bool closed = false;
        while (i < line.size()) {
          if (line[i] == '\\' && i + 1 < line.size()) {
            s += line[i + 1];
            i += 2;
          } else if (line[i] == '"') {
            closed = true;
            ++i;
            break;
          } else {
            s += line[i++];
          }
        }
        if (!closed) throw ParseError("unterminated string literal", lineno);
        out.push_back({Tok::String, std::move(s), lineno});
      } else {
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])) && line[j] != '(' &&
               line[j] != ')' && line[j] != '"' && (line[j] != '/' || c == ':'))
          ++j;
        // roles may not contain '/', but stop there anyway so "a/b" splits
        std::string text = line.substr(i, j - i);
        if (c == ':') {
          auto slash = text.find('/');
          if (slash != std::string::npos) {
            j = i + slash;
            text = text.substr(0, slash);
          }
        }
        out.push_back({c == ':' ? Tok::Role : Tok::Symbol, std::move(text), lineno});
        i = j;
      }
    }
  }
  return out;
}

struct PendingEdge {
  NodeIndex head;
  std::string relation;
  std::string symbol;  // unresolved bare symbol (variable or constant)
  std::size_t line;
};

class BlockParser {
 public:
  BlockParser(std::vector<Token> toks, std::size_t block_line) : toks_(std::move(toks)), block_line_(block_line) {}

  AmrGraph parse() {
    if (toks_.empty()) throw ParseError("empty block", block_line_);
    if (toks_[0].kind != Tok::LParen) throw ParseError("expected '(' to open a graph", toks_[0].line);
    graph_.root = parse_node();
    if (pos_ < toks_.size()) {
      if (toks_[pos_].kind == Tok::RParen) throw ParseError("unbalanced parentheses: extra ')'", toks_[pos_].line);
      throw ParseError("unexpected content after graph: '" + toks_[pos_].text + "'", toks_[pos_].line);
    }
    resolve();
    return std::move(graph_);
  }

 private:
  const Token& peek() {
    if (pos_ >= toks_.size())
      throw ParseError("unbalanced parentheses: unexpected end of block",
                       toks_.empty() ? block_line_ : toks_.back().line);
    return toks_[pos_];
  }
  const Token& next() {
    const Token& t = peek();
    ++pos_;
    return t;
  }

  NodeIndex parse_node() {
    const Token& open = next();  // '('
    const Token& var = next();
    if (var.kind != Tok::Symbol) throw ParseError("expected a variable after '('", var.line);
    if (vars_.count(var.text)) throw ParseError("duplicate variable definition '" + var.text + "'", var.line);
    const Token& slash = next();
    if (slash.kind != Tok::Slash) throw ParseError("expected '/' after variable '" + var.text + "'", slash.line);
    const Token& label = next();
    if (label.kind != Tok::Symbol && label.kind != Tok::String)
      throw ParseError("expected a concept after '/'", label.line);
    NodeIndex self = graph_.add_node(var.text, label.text, false);
    vars_[var.text] = self;
    while (true) {
      const Token& t = peek();
      if (t.kind == Tok::RParen) {
        ++pos_;
        return self;
      }
      if (t.kind != Tok::Role) throw ParseError("expected a role or ')' but found '" + t.text + "'", t.line);
      std::string role = next().text;
      if (role.size() < 2) throw ParseError("empty role name", t.line);
      const Token& v = peek();
      if (v.kind == Tok::LParen) {
        NodeIndex child = parse_node();
        graph_.edges.push_back(Edge{self, child, role});
      } else if (v.kind == Tok::String) {
        ++pos_;
        NodeIndex c = add_constant(v.text);
        graph_.edges.push_back(Edge{self, c, role});
      } else if (v.kind == Tok::Symbol) {
        ++pos_;
        pending_.push_back({self, role, v.text, v.line});
      } else {
        throw ParseError("expected a value after role " + role, v.line);
      }
    }
    (void)open;
  }

  NodeIndex add_constant(const std::string& literal) {
    std::string id;
    do {
      id = "_" + std::to_string(++const_counter_);
    } while (vars_.count(id));
    return graph_.add_node(id, literal, true);
  }

  void resolve() {
    for (const auto& p : pending_) {
      auto it = vars_.find(p.symbol);
      NodeIndex target = (it != vars_.end()) ? it->second : add_constant(p.symbol);
      if (target == p.head) throw ParseError("self-loop on variable '" + p.symbol + "'", p.line);
      graph_.edges.push_back(Edge{p.head, target, p.relation});
    }
    // constant ids were picked before all variables were known
    std::set<std::string> ids;
    for (auto& n : graph_.nodes) {
      if (!ids.insert(n.id).second) {
        std::string id;
        do {
          id = "_" + std::to_string(++const_counter_);
        } while (ids.count(id) || vars_.count(id));
        n.id = id;
        ids.insert(id);
      }
    }
    std::vector<Edge> dedup;
    for (auto& e : graph_.edges)
      if (std::find(dedup.begin(), dedup.end(), e) == dedup.end()) dedup.push_back(std::move(e));
    graph_.edges = std::move(dedup);
  }

  std::vector<Token> toks_;
  std::size_t block_line_;
  std::size_t pos_ = 0;
  std::size_t const_counter_ = 0;
  AmrGraph graph_;
  std::map<std::string, NodeIndex> vars_;
  std::vector<PendingEdge> pending_;
};

inline void parse_metadata(std::string_view line, std::map<std::string, std::string>& meta) {
  // "# ::id foo ::date bar"
  std::size_t pos = line.find("::");
  while (pos != std::string_view::npos) {
    std::size_t next = line.find(" ::", pos + 2);
    std::string_view field = line.substr(pos + 2, next == std::string_view::npos ? line.npos : next - pos - 2);
    std::size_t sp = field.find_first_of(" \t");
    std::string key(field.substr(0, sp));
    std::string value;
    if (sp != std::string_view::npos) {
      auto v = field.substr(sp + 1);
      auto b = v.find_first_not_of(" \t");
      auto e = v.find_last_not_of(" \t\r");
      if (b != std::string_view::npos) value = std::string(v.substr(b, e - b + 1));
    }
    if (!key.empty()) meta[key] = value;
    pos = (next == std::string_view::npos) ? next : next + 1;
  }
}

inline std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

inline bool needs_quoting(std::string_view label) {
  if (label.empty()) return true;
  for (char c : label)
    if (std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == '"' || c == '/' || c == ':')
      return true;
  return false;
}

}  // namespace penman_detail

// Parses every blank-line-separated PENMAN block in `text`.
inline std::vector<AmrGraph> parse_penman(std::string_view text) {
  using namespace penman_detail;
  std::vector<AmrGraph> graphs;
  std::vector<std::pair<std::size_t, std::string>> body;
  std::map<std::string, std::string> meta;
  bool has_meta = false;
  std::size_t block_line = 0;

  auto flush = [&] {
    if (body.empty()) {
      if (has_meta) throw ParseError("empty block (metadata without a graph)", block_line);
    } else {
      AmrGraph g = BlockParser(tokenize(body), block_line).parse();
      g.metadata = meta;
      graphs.push_back(std::move(g));
    }
    body.clear();
    meta.clear();
    has_meta = false;
    block_line = 0;
  };

  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(start, end - start));
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) {
      flush();
    } else {
      if (block_line == 0) block_line = lineno;
      if (line[first] == '#') {
        if (line.find("::", first) != std::string::npos) {
          parse_metadata(std::string_view(line).substr(first), meta);
          has_meta = true;
        }
      } else {
        body.emplace_back(lineno, line);
      }
    }
    if (end == text.size()) break;
    start = end + 1;
  }
  flush();
  return graphs;
}

// Deterministic PENMAN text: children ordered by (relation, child label),
// variables named by first concept letter plus a counter, or kept from the
// node ids when keep_ids is set and the ids are usable.
inline std::string serialize_penman(const AmrGraph& g, bool with_metadata = true, bool keep_ids = false) {
  using namespace penman_detail;
  std::ostringstream out;
  if (with_metadata) {
    for (const char* key : {"id", "snt"}) {
      if (auto v = g.meta(key)) out << "# ::" << key << " " << *v << "\n";
    }
    for (const auto& [k, v] : g.metadata)
      if (k != "id" && k != "snt") out << "# ::" << k << " " << v << "\n";
  }
  if (g.empty()) {
    out << "()";
    return out.str();
  }

  std::vector<std::string> names(g.nodes.size());
  std::map<char, int> letter_count;
  std::vector<bool> edge_done(g.edges.size(), false);
  const auto adj = g.adjacency();

  std::set<std::string> used;
  if (keep_ids) {
    for (const auto& n : g.nodes) {
      if (n.is_constant) continue;
      bool ok = !n.id.empty() && std::isalpha(static_cast<unsigned char>(n.id[0]));
      for (char ch : n.id) ok = ok && (std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-');
      if (!ok || !used.insert(n.id).second) {
        keep_ids = false;
        break;
      }
    }
  }
  auto name_for = [&](NodeIndex n) {
    if (keep_ids) return g.nodes[n].id;
    char c = g.nodes[n].label.empty() ? 'x' : static_cast<char>(std::tolower(static_cast<unsigned char>(g.nodes[n].label[0])));
    if (c < 'a' || c > 'z') c = 'x';
    int k = ++letter_count[c];
    return k == 1 ? std::string(1, c) : std::string(1, c) + std::to_string(k);
  };
  auto literal = [&](NodeIndex n) {
    const auto& s = g.nodes[n].label;
    return is_bare_constant_literal(s) ? s : quote(s);
  };

  // Nodes reachable along forward edges are defined under a forward edge;
  // inverse roles are only used to reach the rest.
  std::vector<bool> forward_reachable(g.nodes.size(), false);
  {
    std::vector<NodeIndex> stack{g.root};
    forward_reachable[g.root] = true;
    while (!stack.empty()) {
      NodeIndex u = stack.back();
      stack.pop_back();
      for (const auto& e : g.edges)
        if (e.head == u && !forward_reachable[e.child]) {
          forward_reachable[e.child] = true;
          stack.push_back(e.child);
        }
    }
  }

  auto emit = [&](auto&& self, NodeIndex u, int depth) -> void {
    names[u] = name_for(u);
    const auto& label = g.nodes[u].label;
    out << "(" << names[u] << " / " << (needs_quoting(label) ? quote(label) : label);
    struct Child {
      std::string rel;
      NodeIndex node;
      std::size_t edge;
    };
    std::vector<Child> kids;
    for (auto [v, e] : adj[u]) {
      if (edge_done[e]) continue;
      const Edge& ed = g.edges[e];
      if (ed.head == u) {
        kids.push_back({ed.relation, ed.child, e});
      } else if (forward_reachable[ed.head] && names[ed.head].empty()) {
        continue;  // printed later from the head's side
      } else {
        kids.push_back({toggle_inverse(ed.relation), ed.head, e});
      }
    }
    std::sort(kids.begin(), kids.end(), [&](const Child& a, const Child& b) {
      return std::tie(a.rel, g.nodes[a.node].label, a.node, a.edge) <
             std::tie(b.rel, g.nodes[b.node].label, b.node, b.edge);
    });
    for (const auto& k : kids) {
      if (edge_done[k.edge]) continue;  // consumed deeper in the traversal
      edge_done[k.edge] = true;
      out << "\n" << std::string(static_cast<std::size_t>(depth + 1) * 4, ' ') << k.rel << " ";
      if (g.nodes[k.node].is_constant) {
        out << literal(k.node);
      } else if (!names[k.node].empty()) {
        out << names[k.node];
      } else {
        self(self, k.node, depth + 1);
      }
    }
    out << ")";
  };
  if (g.nodes[g.root].is_constant) {
    // a lone constant cannot be written as a bare literal at the top
    out << "(x / " << quote(g.nodes[g.root].label) << ")";
    return out.str();
  }
  emit(emit, g.root, 0);
  return out.str();
}

inline std::string serialize_penman(const std::vector<AmrGraph>& graphs) {
  std::string out;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    if (i) out += "\n\n";
    out += serialize_penman(graphs[i]);
  }
  out += "\n";
  return out;
}

}  // namespace gsp
