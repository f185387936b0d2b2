#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "gsp/layers.hpp"
#include "gsp/vocab.hpp"

namespace gsp {

using nn::Matrix;
using nn::Parameter;
using nn::ParameterStore;
using nn::Tape;
using nn::Var;

using Rng = std::mt19937_64;

struct EncoderDims {
  std::size_t model_dim = 512, heads = 8, ff_dim = 1024;
  std::size_t char_dim = 32, char_filters = 256, char_width = 3, char_out = 128;
  std::size_t lemma_dim = 200, pos_dim = 32, ner_dim = 16, concept_dim = 300;
  std::size_t sentence_layers = 4, graph_layers = 1;
  bool graph_positions = true;
};

inline Var maybe_dropout(Var x, double rate, Rng* rng) {
  if (!rng || rate <= 0.0) return x;
  return nn::dropout(x, rate, *rng);
}

// Token features -> states s_0..s_n (row 0 is the summary token).
class SentenceEncoder {
 public:
  SentenceEncoder() = default;
  SentenceEncoder(ParameterStore& store, const EncoderDims& d, const VocabBundle& v, Rng& rng) : dim_(d.model_dim) {
    lemma_ = &store.add("sent.lemma", v.lemma.size(), d.lemma_dim);
    pos_ = &store.add("sent.pos", v.pos.size(), d.pos_dim);
    ner_ = &store.add("sent.ner", v.ner.size(), d.ner_dim);
    for (Parameter* p : {lemma_, pos_, ner_}) nn::init_normal(*p, rng, 0.02);
    cnn_ = nn::CharCnn(store, "sent.char", v.chars.size(), d.char_dim, d.char_filters, d.char_width, d.char_out, rng);
    in_ = nn::Linear(store, "sent.in", d.lemma_dim + d.pos_dim + d.ner_dim + d.char_out, d.model_dim, rng);
    enc_ = nn::TransformerEncoder(store, "sent.enc", d.sentence_layers, d.model_dim, d.heads, d.ff_dim, rng);
  }

  Var operator()(Tape& t, const std::vector<TokenFeatures>& feats, double dropout = 0.0, Rng* rng = nullptr) const {
    if (feats.size() < 2) throw DataError("cannot encode an empty sentence");
    std::vector<std::size_t> lemma, pos, ner;
    std::vector<Var> chars;
    for (const auto& f : feats) {
      lemma.push_back(f.lemma);
      pos.push_back(f.pos);
      ner.push_back(f.ner);
      chars.push_back(cnn_(t, f.chars));
    }
    std::vector<Var> parts{nn::embedding_rows(t, *lemma_, lemma), nn::embedding_rows(t, *pos_, pos),
                           nn::embedding_rows(t, *ner_, ner), nn::concat_rows(chars)};
    Var x = in_(t, nn::concat_cols(parts));
    x = nn::add(x, t.constant(nn::sinusoidal_positions(0, feats.size(), dim_)));
    x = maybe_dropout(x, dropout, rng);
    return enc_(t, x, false);
  }

 private:
  std::size_t dim_ = 0;
  Parameter *lemma_ = nullptr, *pos_ = nullptr, *ner_ = nullptr;
  nn::CharCnn cnn_;
  nn::Linear in_;
  nn::TransformerEncoder enc_;
};

// Per-layer inputs of every node so far; the last entry holds the node states.
struct GraphMemory {
  std::vector<std::string> concepts;  // c_1..c_{t-1}; the dummy is implicit
  std::vector<Matrix> layers;

  std::size_t size() const { return layers.empty() ? 0 : layers.back().rows(); }
  const Matrix& states() const { return layers.back(); }
};

// Causal Transformer over the dummy node followed by the generated concepts.
class GraphEncoder {
 public:
  GraphEncoder() = default;
  GraphEncoder(ParameterStore& store, const EncoderDims& d, const VocabBundle& v, Rng& rng)
      : dim_(d.model_dim), positions_(d.graph_positions), vocab_(&v) {
    embed_ = &store.add("graph.concept", v.concepts.size(), d.concept_dim);
    nn::init_normal(*embed_, rng, 0.02);
    dummy_ = &store.add("graph.dummy", 1, d.model_dim);
    nn::init_normal(*dummy_, rng, 0.02);
    cnn_ = nn::CharCnn(store, "graph.char", v.chars.size(), d.char_dim, d.char_filters, d.char_width, d.char_out, rng);
    in_ = nn::Linear(store, "graph.in", d.concept_dim + d.char_out, d.model_dim, rng);
    for (std::size_t l = 0; l < d.graph_layers; ++l)
      layers_.emplace_back(store, "graph.enc." + std::to_string(l), d.model_dim, d.heads, d.ff_dim, rng);
  }

  std::size_t num_layers() const { return layers_.size(); }

  // Input rows for concepts placed at positions first, first+1, ...
  Var inputs(Tape& t, const std::vector<std::string>& concepts, std::size_t first, double dropout, Rng* rng) const {
    std::vector<std::size_t> ids;
    std::vector<Var> chars;
    for (const auto& c : concepts) {
      ids.push_back(vocab_->concepts.id(c));
      chars.push_back(cnn_(t, concept_chars(c, *vocab_)));
    }
    std::vector<Var> parts{nn::embedding_rows(t, *embed_, ids), nn::concat_rows(chars)};
    Var x = in_(t, nn::concat_cols(parts));
    if (positions_) x = nn::add(x, t.constant(nn::sinusoidal_positions(first, concepts.size(), dim_)));
    return maybe_dropout(x, dropout, rng);
  }

  Var dummy_input(Tape& t) const {
    Var d = t.param(*dummy_);
    return positions_ ? nn::add(d, t.constant(nn::sinusoidal_positions(0, 1, dim_))) : d;
  }

  // States v_0..v_m for the dummy plus all concepts at once.
  Var encode(Tape& t, const std::vector<std::string>& concepts, double dropout = 0.0, Rng* rng = nullptr) const {
    Var x = dummy_input(t);
    if (!concepts.empty()) {
      std::vector<Var> rows{x, inputs(t, concepts, 1, dropout, rng)};
      x = nn::concat_rows(rows);
    }
    for (const auto& layer : layers_) x = layer(t, x, x, true);
    return x;
  }

  GraphMemory start() const {
    Tape t(false);
    GraphMemory m;
    m.layers.push_back(dummy_input(t).value());
    extend_layers(m, t);
    return m;
  }

  // Appends one concept; rows already in the memory are left untouched.
  void append(GraphMemory& m, const std::string& concept_token) const {
    Tape t(false);
    m.concepts.push_back(concept_token);
    Var x = inputs(t, {concept_token}, m.layers[0].rows(), 0.0, nullptr);
    m.layers[0].append_rows(x.value());
    extend_layers(m, t);
  }

 private:
  // Computes the newest row of every layer above the input layer.
  void extend_layers(GraphMemory& m, Tape& t) const {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Matrix& in = m.layers[l];
      Var mem = t.constant(in);
      Var query = t.constant(in.slice_rows(in.rows() - 1, 1));
      Matrix out = layers_[l](t, query, mem, true).value();
      if (m.layers.size() <= l + 1) m.layers.emplace_back(0, out.cols());
      m.layers[l + 1].append_rows(out);
    }
  }

  std::size_t dim_ = 0;
  bool positions_ = true;
  const VocabBundle* vocab_ = nullptr;
  Parameter *embed_ = nullptr, *dummy_ = nullptr;
  nn::CharCnn cnn_;
  nn::Linear in_;
  std::vector<nn::TransformerLayer> layers_;
};

}  // namespace gsp
