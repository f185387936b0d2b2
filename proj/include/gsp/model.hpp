#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "gsp/encoders.hpp"
#include "gsp/linearize.hpp"

namespace gsp {

struct ModelConfig {
  EncoderDims enc;
  std::size_t focus_layers = 3;
  std::size_t arc_heads = 8;
  std::size_t rel_dim = 100;
  double dropout = 0.2;
  bool arc_sink = true;  // heads without a gold parent are trained toward the dummy

  // Table sizes of the reference setup.
  static ModelConfig reference() { return ModelConfig{}; }

  // Every size divided by a common factor, for single-core runs.
  static ModelConfig desk() {
    ModelConfig c;
    c.enc.model_dim = 64;
    c.enc.heads = 4;
    c.enc.ff_dim = 128;
    c.enc.char_dim = 8;
    c.enc.char_filters = 32;
    c.enc.char_out = 16;
    c.enc.lemma_dim = 24;
    c.enc.pos_dim = 4;
    c.enc.ner_dim = 4;
    c.enc.concept_dim = 40;
    c.enc.sentence_layers = 2;
    c.enc.graph_layers = 1;
    c.focus_layers = 2;
    c.arc_heads = 4;
    c.rel_dim = 16;
    return c;
  }

  static ModelConfig toy() {
    ModelConfig c;
    c.enc.model_dim = 16;
    c.enc.heads = 2;
    c.enc.ff_dim = 32;
    c.enc.char_dim = 4;
    c.enc.char_filters = 8;
    c.enc.char_out = 8;
    c.enc.lemma_dim = 16;
    c.enc.pos_dim = 4;
    c.enc.ner_dim = 4;
    c.enc.concept_dim = 16;
    c.enc.sentence_layers = 1;
    c.enc.graph_layers = 1;
    c.focus_layers = 1;
    c.arc_heads = 2;
    c.rel_dim = 8;
    c.dropout = 0.0;
    return c;
  }

  static ModelConfig named(const std::string& name) {
    if (name == "reference") return reference();
    if (name == "desk") return desk();
    if (name == "toy") return toy();
    throw DataError("unknown model config '" + name + "' (expected reference, desk or toy)");
  }

  nlohmann::json to_json() const {
    return {{"model_dim", enc.model_dim},
            {"heads", enc.heads},
            {"ff_dim", enc.ff_dim},
            {"char_dim", enc.char_dim},
            {"char_filters", enc.char_filters},
            {"char_width", enc.char_width},
            {"char_out", enc.char_out},
            {"lemma_dim", enc.lemma_dim},
            {"pos_dim", enc.pos_dim},
            {"ner_dim", enc.ner_dim},
            {"concept_dim", enc.concept_dim},
            {"sentence_layers", enc.sentence_layers},
            {"graph_layers", enc.graph_layers},
            {"graph_positions", enc.graph_positions},
            {"focus_layers", focus_layers},
            {"arc_heads", arc_heads},
            {"rel_dim", rel_dim},
            {"dropout", dropout},
            {"arc_sink", arc_sink}};
  }

  // Missing keys keep the values already in `base`.
  static ModelConfig from_json(const nlohmann::json& j) { return from_json(j, ModelConfig{}); }
  static ModelConfig from_json(const nlohmann::json& j, ModelConfig base) {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("model_dim", base.enc.model_dim);
    get("heads", base.enc.heads);
    get("ff_dim", base.enc.ff_dim);
    get("char_dim", base.enc.char_dim);
    get("char_filters", base.enc.char_filters);
    get("char_width", base.enc.char_width);
    get("char_out", base.enc.char_out);
    get("lemma_dim", base.enc.lemma_dim);
    get("pos_dim", base.enc.pos_dim);
    get("ner_dim", base.enc.ner_dim);
    get("concept_dim", base.enc.concept_dim);
    get("sentence_layers", base.enc.sentence_layers);
    get("graph_layers", base.enc.graph_layers);
    get("graph_positions", base.enc.graph_positions);
    get("focus_layers", base.focus_layers);
    get("arc_heads", base.arc_heads);
    get("rel_dim", base.rel_dim);
    get("dropout", base.dropout);
    get("arc_sink", base.arc_sink);
    return base;
  }
};

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return s;
}

// Concept vocabulary followed by per-sentence extras: copied tokens and
// mapped concepts that the vocabulary lacks.
struct CandidateTable {
  std::size_t vocab_size = 0;
  std::vector<std::string> extra;
  std::vector<std::size_t> copy_index;  // per token
  std::vector<std::size_t> map_index;   // per token

  std::size_t size() const { return vocab_size + extra.size(); }

  std::size_t index_of(const std::string& token, const Vocab& concepts) const {
    if (concepts.contains(token)) return concepts.id(token);
    for (std::size_t i = 0; i < extra.size(); ++i)
      if (extra[i] == token) return vocab_size + i;
    return Vocab::kUnk;
  }

  std::string token(std::size_t i, const Vocab& concepts) const {
    return i < vocab_size ? concepts.token(i) : extra.at(i - vocab_size);
  }
};

inline CandidateTable make_candidates(const AnnotatedSentence& s, const VocabBundle& v) {
  CandidateTable c;
  c.vocab_size = v.concepts.size();
  auto place = [&](const std::string& tok) {
    if (v.concepts.contains(tok)) return v.concepts.id(tok);
    for (std::size_t i = 0; i < c.extra.size(); ++i)
      if (c.extra[i] == tok) return c.vocab_size + i;
    c.extra.push_back(tok);
    return c.vocab_size + c.extra.size() - 1;
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    c.copy_index.push_back(place("\"" + s.tokens[i] + "\""));
    c.map_index.push_back(place(v.mapped_concept(s.tokens[i], s.lemmas[i])));
  }
  return c;
}

// Everything about one sentence that stays fixed during decoding.
struct SentenceContext {
  AnnotatedSentence sentence;
  std::vector<TokenFeatures> features;
  CandidateTable candidates;
};

// P(c) = P(copy) sum_{i: copy_i = c} a_i + P(map) sum_{i: map_i = c} a_i + P(gen) g(c)
// over the candidate table; alignment is rows x tokens, mode rows x 3, gen
// rows x vocabulary.
inline Var concept_mixture(Var alignment, Var mode, Var gen, const CandidateTable& cand) {
  const std::size_t C = cand.size();
  Var copy = nn::scatter_cols(alignment, cand.copy_index, C);
  Var map = nn::scatter_cols(alignment, cand.map_index, C);
  std::vector<Var> terms{nn::scale_rows(copy, nn::slice_cols(mode, 0, 1)),
                         nn::scale_rows(map, nn::slice_cols(mode, 1, 1)),
                         nn::scale_rows(nn::pad_cols(gen, C), nn::slice_cols(mode, 2, 1))};
  return nn::add_n(terms);
}

// Outputs of the expansion step for a block of query rows.
struct ExpandOutputs {
  Var h;                      // final parser states
  std::vector<Var> arc_heads;  // per-head distributions over graph nodes
  Var arc;                    // max over heads
  Var alignment;              // attention over tokens
  Var mode;                   // copy, map, gen
  Var gen;                    // vocabulary softmax
  Var concept_probs;              // mixture over the candidate table
};

struct LossParts {
  double concepts = 0.0, arc = 0.0, label = 0.0;
  std::size_t clamped = 0;
  double total() const { return concepts + arc + label; }
};

inline constexpr double kProbFloor = 1e-12;

class GspModel {
 public:
  GspModel(ModelConfig cfg, VocabBundle vocab, std::uint64_t seed) : cfg_(std::move(cfg)), vocab_(std::move(vocab)) {
    Rng rng(seed);
    const auto& e = cfg_.enc;
    const std::size_t d = e.model_dim;
    if (cfg_.arc_heads == 0 || d % cfg_.arc_heads != 0)
      throw DimensionError("model dim must be divisible by the arc head count");
    sentence_ = SentenceEncoder(store_, e, vocab_, rng);
    graph_ = GraphEncoder(store_, e, vocab_, rng);
    for (std::size_t l = 0; l < cfg_.focus_layers; ++l) {
      const std::string n = "focus." + std::to_string(l);
      focus_.push_back(FocusLayer{nn::MultiHeadAttention(store_, n + ".sent", d, e.heads, rng),
                                  nn::LayerNorm(store_, n + ".ln1", d),
                                  nn::MultiHeadAttention(store_, n + ".graph", d, e.heads, rng),
                                  nn::LayerNorm(store_, n + ".ln2", d),
                                  nn::FeedForward(store_, n + ".ffn", d, e.ff_dim, rng)});
    }
    arc_q_ = nn::Linear(store_, "arc.q", d, d, rng);
    arc_k_ = nn::Linear(store_, "arc.k", d, d, rng, false);
    arc_update_ = nn::Linear(store_, "arc.update", d, d, rng, false);
    arc_ln_ = nn::LayerNorm(store_, "arc.ln", d);
    conc_q_ = nn::Linear(store_, "concept.q", d, d, rng);
    conc_k_ = nn::Linear(store_, "concept.k", d, d, rng, false);
    conc_update_ = nn::Linear(store_, "concept.update", d, d, rng, false);
    conc_ln_ = nn::LayerNorm(store_, "concept.ln", d);
    mode_ = nn::Linear(store_, "concept.mode", d, 3, rng);
    gen_ = nn::Linear(store_, "concept.gen", d, vocab_.concepts.size(), rng, false);
    rel_ = nn::Biaffine(store_, "relation", d, d, cfg_.rel_dim, vocab_.relation.size(), rng);
  }

  GspModel(const GspModel&) = delete;
  GspModel& operator=(const GspModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  const VocabBundle& vocab() const { return vocab_; }
  ParameterStore& params() { return store_; }
  const SentenceEncoder& sentence_encoder() const { return sentence_; }
  const GraphEncoder& graph_encoder() const { return graph_; }

  SentenceContext context(const AnnotatedSentence& s) const {
    return SentenceContext{s, featurize(s, vocab_), make_candidates(s, vocab_)};
  }

  // One expansion step for every query row at once. Row r sees graph nodes
  // 0..r + (nodes - rows); s0 is broadcast as the initial state.
  ExpandOutputs expand(Tape& t, Var sentence_states, Var nodes, std::size_t rows, const CandidateTable& cand) const {
    const std::size_t n = sentence_states.rows() - 1;
    std::vector<std::size_t> token_rows(n);
    for (std::size_t i = 0; i < n; ++i) token_rows[i] = i + 1;
    Var tokens = nn::gather_rows(sentence_states, token_rows);
    Var h = nn::gather_rows(sentence_states, std::vector<std::size_t>(rows, 0));

    for (const auto& f : focus_) {
      Var x1 = f.ln1(t, nn::add(h, f.sent(t, h, tokens).output));
      Var x2 = f.ln2(t, nn::add(x1, f.graph(t, x1, nodes, true).output));
      h = f.ffn(t, x2);
    }

    ExpandOutputs out;
    const long off = nn::causal_offset(rows, nodes.rows());
    Var q = arc_q_(t, h), k = arc_k_(t, nodes);
    const std::size_t dh = q.cols() / cfg_.arc_heads;
    for (std::size_t i = 0; i < cfg_.arc_heads; ++i) {
      Var s = nn::scale(nn::matmul_t(nn::slice_cols(q, i * dh, dh), nn::slice_cols(k, i * dh, dh)),
                        1.0 / std::sqrt(static_cast<double>(dh)));
      out.arc_heads.push_back(nn::softmax_rows(s, off));
    }
    out.arc = cfg_.arc_heads == 1 ? out.arc_heads[0] : nn::max_elementwise(out.arc_heads);
    h = arc_ln_(t, nn::add(h, arc_update_(t, nn::matmul(out.arc, nodes))));

    auto att = nn::scaled_dot_attention(conc_q_(t, h), conc_k_(t, tokens), tokens);
    out.alignment = att.weights;
    h = conc_ln_(t, nn::add(h, conc_update_(t, att.output)));
    out.h = h;

    out.mode = nn::softmax_rows(mode_(t, h));
    out.gen = nn::softmax_rows(gen_(t, h));
    out.concept_probs = concept_mixture(out.alignment, out.mode, out.gen, cand);
    return out;
  }

  // Label distributions for (state row, node row) pairs.
  Var label_probs(Tape& t, Var h, Var nodes, std::vector<std::size_t> h_rows, std::vector<std::size_t> node_rows) const {
    Var hs = nn::gather_rows(h, std::move(h_rows));
    Var vs = nn::gather_rows(nodes, std::move(node_rows));
    return nn::softmax_rows(rel_(t, hs, vs));
  }

  Var encode_sentence(Tape& t, const std::vector<TokenFeatures>& feats, Rng* rng = nullptr) const {
    return sentence_(t, feats, rng ? cfg_.dropout : 0.0, rng);
  }

  // Negative log-likelihood of an action sequence under teacher forcing.
  // With rng set, dropout is active.
  Var loss(Tape& t, const SentenceContext& ctx, const std::vector<SpanningAction>& actions, Rng* rng = nullptr,
           LossParts* parts = nullptr, const std::vector<TokenFeatures>* features = nullptr) const {
    if (actions.empty() || !actions.back().is_stop()) throw StructureError("action sequence must end with the stop concept");
    return rows_loss(t, ctx, actions, 0, rng, parts, features ? *features : ctx.features, cfg_.arc_sink);
  }

  // Log-probability of an action sequence as the decoder scores it: chosen
  // concepts, pooled arcs and labels.
  double log_likelihood(const SentenceContext& ctx, const std::vector<SpanningAction>& actions) const {
    if (actions.empty() || !actions.back().is_stop()) throw StructureError("action sequence must end with the stop concept");
    Tape t(false);
    return -rows_loss(t, ctx, actions, 0, nullptr, nullptr, ctx.features, false).scalar();
  }

  // Loss of the single expansion step that emits actions[step] given the
  // gold prefix before it.
  Var step_loss(Tape& t, const SentenceContext& ctx, const std::vector<SpanningAction>& actions, std::size_t step,
                LossParts* parts = nullptr) const {
    if (step >= actions.size()) throw StructureError("step index out of range");
    std::vector<SpanningAction> prefix(actions.begin(), actions.begin() + static_cast<std::ptrdiff_t>(step) + 1);
    return rows_loss(t, ctx, prefix, step, nullptr, parts, ctx.features, cfg_.arc_sink);
  }

 private:
  // Loss terms for query rows first..end of `actions`.
  Var rows_loss(Tape& t, const SentenceContext& ctx, const std::vector<SpanningAction>& actions, std::size_t first,
                Rng* rng, LossParts* parts, const std::vector<TokenFeatures>& features, bool sink) const {
    const double drop = rng ? cfg_.dropout : 0.0;
    Var sent = sentence_(t, features, drop, rng);
    std::vector<std::string> concepts;
    for (std::size_t i = 0; i + 1 < actions.size(); ++i) concepts.push_back(actions[i].label);
    Var nodes = graph_.encode(t, concepts, drop, rng);
    const std::size_t steps = actions.size();
    ExpandOutputs o = expand(t, sent, nodes, steps - first, ctx.candidates);

    // With arc_sink, each gold parent is explained by its own head (greedy
    // matching on current probabilities) and the remaining heads by the dummy.
    const std::size_t H = cfg_.arc_heads;
    std::vector<std::pair<std::size_t, std::size_t>> concept_cells, arc_cells, label_cells;
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> head_cells(H);
    std::vector<std::size_t> h_rows, node_rows;
    for (std::size_t r = first; r < steps; ++r) {
      const std::size_t q = r - first;
      concept_cells.emplace_back(q, ctx.candidates.index_of(actions[r].label, vocab_.concepts));
      if (r == 0 || actions[r].is_stop()) continue;
      std::vector<std::size_t> parents;
      for (const auto& [p, rel] : actions[r].parents) {
        if (p < 1 || static_cast<std::size_t>(p) > r) throw StructureError("parent index out of range");
        parents.push_back(static_cast<std::size_t>(p));
        h_rows.push_back(q);
        node_rows.push_back(static_cast<std::size_t>(p));
        label_cells.emplace_back(label_cells.size(), vocab_.relation.id(rel));
      }
      if (!sink) {
        for (std::size_t j : parents) arc_cells.emplace_back(q, j);
        continue;
      }
      std::vector<bool> head_used(H, false), parent_done(parents.size(), false);
      for (std::size_t round = 0; round < std::min(H, parents.size()); ++round) {
        std::size_t bi = 0, bp = 0;
        double bv = -1.0;
        for (std::size_t i = 0; i < H; ++i)
          for (std::size_t k = 0; k < parents.size(); ++k)
            if (!head_used[i] && !parent_done[k] && o.arc_heads[i].value()(q, parents[k]) > bv) {
              bv = o.arc_heads[i].value()(q, parents[k]);
              bi = i;
              bp = k;
            }
        head_used[bi] = parent_done[bp] = true;
        head_cells[bi].emplace_back(q, parents[bp]);
      }
      for (std::size_t k = 0; k < parents.size(); ++k)
        if (!parent_done[k]) arc_cells.emplace_back(q, parents[k]);
      for (std::size_t i = 0; i < H; ++i)
        if (!head_used[i]) head_cells[i].emplace_back(q, 0);
    }
    std::size_t clamped = 0;
    auto nll = [&](Var probs, const std::vector<std::pair<std::size_t, std::size_t>>& cells) {
      return nn::scale(nn::sum(nn::log_clamped(nn::pick(probs, cells), kProbFloor, &clamped)), -1.0);
    };
    Var concept_nll = nll(o.concept_probs, concept_cells);
    std::vector<Var> terms{concept_nll};
    double arc_v = 0.0, label_v = 0.0;
    if (!h_rows.empty()) {
      std::vector<Var> arc_terms;
      if (!arc_cells.empty()) arc_terms.push_back(nll(o.arc, arc_cells));
      for (std::size_t i = 0; i < H; ++i)
        if (!head_cells[i].empty()) arc_terms.push_back(nll(o.arc_heads[i], head_cells[i]));
      Var arc_nll = nn::add_n(arc_terms);
      Var label_nll = nll(label_probs(t, o.h, nodes, h_rows, node_rows), label_cells);
      arc_v = arc_nll.scalar();
      label_v = label_nll.scalar();
      terms.push_back(arc_nll);
      terms.push_back(label_nll);
    }
    if (parts) *parts = LossParts{concept_nll.scalar(), arc_v, label_v, clamped};
    return nn::add_n(terms);
  }

  struct FocusLayer {
    nn::MultiHeadAttention sent;
    nn::LayerNorm ln1;
    nn::MultiHeadAttention graph;
    nn::LayerNorm ln2;
    nn::FeedForward ffn;
  };

  ModelConfig cfg_;
  VocabBundle vocab_;
  ParameterStore store_;
  SentenceEncoder sentence_;
  GraphEncoder graph_;
  std::vector<FocusLayer> focus_;
  nn::Linear arc_q_, arc_k_, arc_update_;
  nn::LayerNorm arc_ln_;
  nn::Linear conc_q_, conc_k_, conc_update_;
  nn::LayerNorm conc_ln_;
  nn::Linear mode_, gen_;
  nn::Biaffine rel_;
};

}  // namespace gsp
