#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "gsp/tensor.hpp"

namespace gsp::nn {

struct Linear {
  Parameter* weight = nullptr;  // in x out
  Parameter* bias = nullptr;    // 1 x out, optional

  Linear() = default;
  template <typename Rng>
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng, bool with_bias = true) {
    weight = &store.add(name + ".w", in, out);
    init_xavier(*weight, rng);
    if (with_bias) bias = &store.add(name + ".b", 1, out);
  }

  std::size_t in_dim() const { return weight->value.rows(); }
  std::size_t out_dim() const { return weight->value.cols(); }

  Var operator()(Tape& t, Var x) const {
    Var y = matmul(x, t.param(*weight));
    return bias ? add(y, t.param(*bias)) : y;
  }
};

struct LayerNorm {
  Parameter* gain = nullptr;
  Parameter* bias = nullptr;

  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, std::size_t dim) {
    gain = &store.add(name + ".g", 1, dim);
    gain->value.fill(1.0);
    bias = &store.add(name + ".b", 1, dim);
  }

  Var operator()(Tape& t, Var x) const { return layer_norm(x, t.param(*gain), t.param(*bias)); }
};

// max(x W1 + b1, 0) W2 + b2
struct FeedForward {
  Linear inner, outer;

  FeedForward() = default;
  template <typename Rng>
  FeedForward(ParameterStore& store, const std::string& name, std::size_t dim, std::size_t hidden, Rng& rng)
      : inner(store, name + ".w1", dim, hidden, rng), outer(store, name + ".w2", hidden, dim, rng) {}

  Var operator()(Tape& t, Var x) const { return outer(t, relu(inner(t, x))); }
};

struct AttentionOutput {
  Var output;
  Var weights;  // rows x keys distribution
};

// a = softmax(K q / sqrt(d)), output = a V, one row per query.
inline AttentionOutput scaled_dot_attention(Var q, Var k, Var v, long causal_offset = -1) {
  require(q.cols() == k.cols(), "attention: query/key dims differ");
  require(k.rows() == v.rows() && k.rows() >= 1, "attention: key/value rows differ");
  Var scores = scale(matmul_t(q, k), 1.0 / std::sqrt(static_cast<double>(q.cols())));
  Var a = softmax_rows(scores, causal_offset);
  return {matmul(a, v), a};
}

// Key j is visible to query row r iff j <= r + (keys - rows); -1 disables masking.
inline long causal_offset(std::size_t query_rows, std::size_t key_rows) {
  return static_cast<long>(key_rows) - static_cast<long>(query_rows);
}

struct MultiHeadOutput {
  Var output;
  std::vector<Var> heads;  // per-head attention distributions
};

struct MultiHeadAttention {
  std::size_t heads = 1;
  Linear q, k, v, o;

  MultiHeadAttention() = default;
  template <typename Rng>
  MultiHeadAttention(ParameterStore& store, const std::string& name, std::size_t dim, std::size_t num_heads, Rng& rng,
                     std::size_t key_dim = 0)
      : heads(num_heads) {
    if (num_heads == 0 || dim % num_heads != 0) throw DimensionError("model dim must be divisible by the head count");
    if (key_dim == 0) key_dim = dim;
    q = Linear(store, name + ".q", dim, dim, rng);
    k = Linear(store, name + ".k", key_dim, dim, rng, false);
    v = Linear(store, name + ".v", key_dim, dim, rng);
    o = Linear(store, name + ".o", dim, dim, rng);
  }

  // x: queries (rows x dim); y: memory (m x key_dim).
  MultiHeadOutput operator()(Tape& t, Var x, Var y, bool causal = false) const {
    Var Q = q(t, x), K = k(t, y), V = v(t, y);
    const std::size_t dh = Q.cols() / heads;
    const long off = causal ? causal_offset(x.rows(), y.rows()) : -1;
    MultiHeadOutput out;
    std::vector<Var> parts;
    for (std::size_t h = 0; h < heads; ++h) {
      auto r = scaled_dot_attention(slice_cols(Q, h * dh, dh), slice_cols(K, h * dh, dh), slice_cols(V, h * dh, dh), off);
      parts.push_back(r.output);
      out.heads.push_back(r.weights);
    }
    out.output = o(t, heads == 1 ? parts[0] : concat_cols(parts));
    return out;
  }
};

// Post-norm block: x = LN(x + MHA(x, x)); x = LN(x + FFN(x)).
struct TransformerLayer {
  MultiHeadAttention attn;
  LayerNorm ln1, ln2;
  FeedForward ffn;

  TransformerLayer() = default;
  template <typename Rng>
  TransformerLayer(ParameterStore& store, const std::string& name, std::size_t dim, std::size_t heads, std::size_t ff,
                   Rng& rng)
      : attn(store, name + ".attn", dim, heads, rng),
        ln1(store, name + ".ln1", dim),
        ln2(store, name + ".ln2", dim),
        ffn(store, name + ".ffn", dim, ff, rng) {}

  // Queries are the last rows of `memory` when query_rows < memory rows.
  Var operator()(Tape& t, Var queries, Var memory, bool causal) const {
    Var x = ln1(t, add(queries, attn(t, queries, memory, causal).output));
    return ln2(t, add(x, ffn(t, x)));
  }
};

struct TransformerEncoder {
  std::vector<TransformerLayer> layers;

  TransformerEncoder() = default;
  template <typename Rng>
  TransformerEncoder(ParameterStore& store, const std::string& name, std::size_t num_layers, std::size_t dim,
                     std::size_t heads, std::size_t ff, Rng& rng) {
    for (std::size_t l = 0; l < num_layers; ++l)
      layers.emplace_back(store, name + "." + std::to_string(l), dim, heads, ff, rng);
  }

  Var operator()(Tape& t, Var x, bool causal) const {
    require(x.rows() >= 1, "encoder: empty sequence");
    for (const auto& layer : layers) x = layer(t, x, x, causal);
    return x;
  }
};

inline Matrix sinusoidal_positions(std::size_t first, std::size_t count, std::size_t dim) {
  Matrix pe(count, dim);
  for (std::size_t r = 0; r < count; ++r) {
    const double pos = static_cast<double>(first + r);
    for (std::size_t i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      pe(r, i) = (i % 2 == 0) ? std::sin(pos * rate) : std::cos(pos * rate);
    }
  }
  return pe;
}

// Character embeddings -> width-w convolution -> max over time -> projection.
struct CharCnn {
  Parameter* embed = nullptr;
  Linear conv;  // (width * char_dim) x filters
  Linear proj;  // filters x out
  std::size_t width = 3;

  CharCnn() = default;
  template <typename Rng>
  CharCnn(ParameterStore& store, const std::string& name, std::size_t vocab, std::size_t char_dim, std::size_t filters,
          std::size_t width_, std::size_t out, Rng& rng)
      : width(width_) {
    embed = &store.add(name + ".emb", vocab, char_dim);
    init_normal(*embed, rng, 0.02);
    conv = Linear(store, name + ".conv", width * char_dim, filters, rng);
    proj = Linear(store, name + ".proj", filters, out, rng);
  }

  std::size_t out_dim() const { return proj.out_dim(); }

  // Words shorter than the filter are padded with id 0.
  Var operator()(Tape& t, std::vector<std::size_t> chars) const {
    if (chars.size() < width) chars.resize(width, 0);
    Var e = embedding_rows(t, *embed, chars);
    const std::size_t positions = chars.size() - width + 1;
    std::vector<Var> cols;
    for (std::size_t k = 0; k < width; ++k) {
      std::vector<std::size_t> idx(positions);
      for (std::size_t p = 0; p < positions; ++p) idx[p] = p + k;
      cols.push_back(gather_rows(e, std::move(idx)));
    }
    Var unfolded = concat_cols(cols);  // positions x (width * char_dim)
    Var feat = max_over_rows(relu(conv(t, unfolded)));
    return proj(t, feat);
  }
};

// Projects both inputs to rel_dim, then e = h'W v' + U h' + V v' + b per label.
struct Biaffine {
  Linear head_proj, dep_proj;
  Parameter* bilinear_w = nullptr;  // labels x (r * r)
  Linear head_lin;                  // r x labels, no bias
  Linear dep_lin;                   // r x labels, with the shared bias b

  Biaffine() = default;
  template <typename Rng>
  Biaffine(ParameterStore& store, const std::string& name, std::size_t h_dim, std::size_t v_dim, std::size_t rel_dim,
           std::size_t labels, Rng& rng) {
    head_proj = Linear(store, name + ".hp", h_dim, rel_dim, rng);
    dep_proj = Linear(store, name + ".vp", v_dim, rel_dim, rng);
    bilinear_w = &store.add(name + ".W", labels, rel_dim * rel_dim);
    init_normal(*bilinear_w, rng, 1.0 / static_cast<double>(rel_dim));
    head_lin = Linear(store, name + ".U", rel_dim, labels, rng, false);
    dep_lin = Linear(store, name + ".V", rel_dim, labels, rng, true);
  }

  // h: pairs x h_dim (child side), v: pairs x v_dim (head concept side).
  Var operator()(Tape& t, Var h, Var v) const {
    Var hp = head_proj(t, h);
    Var vp = dep_proj(t, v);
    Var s = bilinear(hp, t.param(*bilinear_w), vp);
    return add(add(s, head_lin(t, hp)), dep_lin(t, vp));
  }
};

}  // namespace gsp::nn
