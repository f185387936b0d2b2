#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gsp/gradcheck.hpp"
#include "gsp/layers.hpp"

using namespace gsp::nn;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (auto& v : m.data()) v = n(rng);
  return m;
}

// Straight-line reference: a = softmax(K q / sqrt(d)), out = a V.
std::pair<std::vector<double>, std::vector<double>> reference_attention(const Matrix& q, const Matrix& K,
                                                                          const Matrix& V) {
  const std::size_t m = K.rows(), d = q.cols();
  std::vector<double> s(m), a(m), out(V.cols(), 0.0);
  double mx = -1e300;
  for (std::size_t i = 0; i < m; ++i) {
    double dot = 0;
    for (std::size_t j = 0; j < d; ++j) dot += K(i, j) * q(0, j);
    s[i] = dot / std::sqrt(static_cast<double>(d));
    mx = std::max(mx, s[i]);
  }
  double z = 0;
  for (std::size_t i = 0; i < m; ++i) z += (a[i] = std::exp(s[i] - mx));
  for (std::size_t i = 0; i < m; ++i) a[i] /= z;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < V.cols(); ++j) out[j] += a[i] * V(i, j);
  return {a, out};
}

// Sum of elementwise products with a fixed random matrix: a generic scalar loss.
Var probe_loss(Tape& t, Var x, const Matrix& w) { return sum(mul(x, t.constant(w))); }

}  // namespace

TEST(Attention, SingleKeyReturnsValue) {
  std::mt19937_64 rng(1);
  Tape t(false);
  Var q = t.constant(random_matrix(1, 4, rng));
  Var k = t.constant(random_matrix(1, 4, rng));
  Var v = t.constant(random_matrix(1, 4, rng));
  auto r = scaled_dot_attention(q, k, v);
  EXPECT_DOUBLE_EQ(r.weights.value()(0, 0), 1.0);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(r.output.value()(0, j), v.value()(0, j));
}

TEST(Attention, ZeroScoresAreUniform) {
  std::mt19937_64 rng(2);
  Tape t(false);
  Var q = t.constant(Matrix(1, 4, 0.0));
  Var k = t.constant(random_matrix(4, 4, rng));
  Var v = t.constant(random_matrix(4, 4, rng));
  auto r = scaled_dot_attention(q, k, v);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(r.weights.value()(0, j), 0.25);
}

TEST(Attention, MatchesScalarReference) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Tape t(false);
    Matrix q = random_matrix(1, 4, rng), K = random_matrix(3, 4, rng), V = random_matrix(3, 4, rng);
    auto r = scaled_dot_attention(t.constant(q), t.constant(K), t.constant(V));
    auto [a, out] = reference_attention(q, K, V);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(r.weights.value()(0, i), a[i], 1e-12);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(r.output.value()(0, j), out[j], 1e-12);
  }
}

TEST(Attention, CausalMaskHidesFutureKeys) {
  std::mt19937_64 rng(4);
  Tape t(false);
  Var x = t.constant(random_matrix(4, 4, rng));
  auto r = scaled_dot_attention(x, x, x, causal_offset(4, 4));
  const Matrix& a = r.weights.value();
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      if (j > i) {
        EXPECT_EQ(a(i, j), 0.0);
      }
      s += a(i, j);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  // one query against all keys sees everything
  Var last = t.constant(x.value().slice_rows(3, 1));
  auto r2 = scaled_dot_attention(last, x, x, causal_offset(1, 4));
  for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(r2.weights.value()(0, j), a(3, j));
}

TEST(MultiHead, SingleKeyAndZeroProjections) {
  std::mt19937_64 rng(5);
  ParameterStore store;
  MultiHeadAttention mha(store, "mha", 8, 2, rng);
  Tape t(false);
  Var x = t.constant(random_matrix(1, 8, rng));
  Var y = t.constant(random_matrix(1, 8, rng));
  auto r = mha(t, x, y);
  ASSERT_EQ(r.heads.size(), 2u);
  for (auto& h : r.heads) EXPECT_DOUBLE_EQ(h.value()(0, 0), 1.0);
  EXPECT_EQ(r.output.cols(), 8u);

  for (Parameter* p : store.all()) p->value.fill(0.0);
  mha.o.bias->value = Matrix::row_vector({1, 2, 3, 4, 5, 6, 7, 8});
  Tape t2(false);
  auto z = mha(t2, t2.constant(random_matrix(1, 8, rng)), t2.constant(random_matrix(5, 8, rng)));
  for (std::size_t j = 0; j < 8; ++j) EXPECT_DOUBLE_EQ(z.output.value()(0, j), static_cast<double>(j + 1));
  EXPECT_THROW(MultiHeadAttention(store, "bad", 6, 4, rng), gsp::DimensionError);
}

TEST(LayerNorm, Examples) {
  ParameterStore store;
  LayerNorm ln(store, "ln", 2);
  Tape t(false);
  auto flat = ln(t, t.constant(Matrix::row_vector({1, 1}))).value();
  EXPECT_DOUBLE_EQ(flat[0], 0.0);
  EXPECT_DOUBLE_EQ(flat[1], 0.0);
  auto pm = ln(t, t.constant(Matrix::row_vector({-1, 1}))).value();
  const double expected = 1.0 / std::sqrt(1.0 + 1e-5);
  EXPECT_NEAR(pm[0], -expected, 1e-15);
  EXPECT_NEAR(pm[1], expected, 1e-15);
}

TEST(FeedForward, ZeroWeightsAndNegativePreactivation) {
  std::mt19937_64 rng(6);
  ParameterStore store;
  FeedForward ff(store, "ff", 3, 4, rng);
  for (Parameter* p : store.all()) p->value.fill(0.0);
  ff.outer.bias->value = Matrix::row_vector({0.5, -1, 2});
  Tape t(false);
  auto y = ff(t, t.constant(random_matrix(1, 3, rng))).value();
  EXPECT_DOUBLE_EQ(y[0], 0.5);
  EXPECT_DOUBLE_EQ(y[1], -1.0);
  EXPECT_DOUBLE_EQ(y[2], 2.0);
  // negative inner pre-activation contributes nothing
  ff.inner.bias->value.fill(-100.0);
  ff.outer.weight->value.fill(3.0);
  auto y2 = ff(t, t.constant(Matrix::row_vector({0.1, 0.2, 0.3}))).value();
  EXPECT_DOUBLE_EQ(y2[0], 0.5);
}

TEST(Encoder, CausalOutputIgnoresSuffix) {
  std::mt19937_64 rng(7);
  ParameterStore store;
  TransformerEncoder enc(store, "enc", 2, 8, 2, 16, rng);
  Matrix x = random_matrix(5, 8, rng);
  Tape t(false);
  Matrix y = enc(t, t.constant(x), true).value();
  Matrix x2 = x;
  for (std::size_t j = 0; j < 8; ++j) x2(4, j) += 1.0, x2(3, j) -= 0.5;
  Tape t2(false);
  Matrix y2 = enc(t2, t2.constant(x2), true).value();
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(y(r, j), y2(r, j));
  EXPECT_NE(y(3, 0), y2(3, 0));
}

TEST(Encoder, NonCausalIsPermutationEquivariant) {
  std::mt19937_64 rng(8);
  ParameterStore store;
  TransformerEncoder enc(store, "enc", 1, 8, 2, 16, rng);
  Matrix x = random_matrix(4, 8, rng);
  std::vector<std::size_t> perm{2, 0, 3, 1};
  Matrix xp(4, 8);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t j = 0; j < 8; ++j) xp(r, j) = x(perm[r], j);
  Tape t(false);
  Matrix y = enc(t, t.constant(x), false).value();
  Matrix yp = enc(t, t.constant(xp), false).value();
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(yp(r, j), y(perm[r], j), 1e-12);
  // a single element attends to itself
  Tape t1(false);
  EXPECT_EQ(enc(t1, t1.constant(x.slice_rows(0, 1)), false).rows(), 1u);
}

TEST(CharCnn, OutputSizeIndependentOfLength) {
  std::mt19937_64 rng(9);
  ParameterStore store;
  CharCnn cnn(store, "cnn", 20, 4, 6, 3, 5, rng);
  Tape t(false);
  EXPECT_EQ(cnn(t, {3}).cols(), 5u);
  EXPECT_EQ(cnn(t, {3, 4, 5, 6, 7, 8, 9}).cols(), 5u);
  EXPECT_EQ(cnn(t, {}).cols(), 5u);
}

TEST(Biaffine, ZeroAndAdditiveCases) {
  std::mt19937_64 rng(10);
  ParameterStore store;
  Biaffine bi(store, "bi", 6, 5, 3, 4, rng);
  Matrix h = random_matrix(2, 6, rng), v = random_matrix(2, 5, rng);
  // W = 0: score(h, v) - score(h, v') - score(h', v) + score(h', v') = 0
  bi.bilinear_w->value.fill(0.0);
  Tape t(false);
  auto score = [&](std::size_t hi, std::size_t vi) {
    return bi(t, t.constant(h.slice_rows(hi, 1)), t.constant(v.slice_rows(vi, 1))).value();
  };
  auto s00 = score(0, 0), s01 = score(0, 1), s10 = score(1, 0), s11 = score(1, 1);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(s00[k] - s01[k] - s10[k] + s11[k], 0.0, 1e-12);
  for (Parameter* p : store.all()) p->value.fill(0.0);
  bi.dep_lin.bias->value = Matrix::row_vector({1, 2, 3, 4});
  auto z = score(0, 1);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(z[k], static_cast<double>(k + 1));
}

TEST(GradCheck, LinearMap) {
  std::mt19937_64 rng(11);
  ParameterStore store;
  Linear lin(store, "lin", 4, 3, rng);
  Matrix x = random_matrix(2, 4, rng), w = random_matrix(2, 3, rng);
  auto rep = grad_check(store, [&](Tape& t) { return probe_loss(t, lin(t, t.constant(x)), w); });
  EXPECT_LT(rep.max_rel_error, 1e-9) << rep.worst_param;
  EXPECT_EQ(rep.checked, 15u);
}

TEST(GradCheck, SoftmaxCrossEntropy) {
  std::mt19937_64 rng(12);
  ParameterStore store;
  Linear lin(store, "lin", 5, 6, rng);
  Matrix x = random_matrix(3, 5, rng);
  auto rep = grad_check(store, [&](Tape& t) {
    Var p = softmax_rows(lin(t, t.constant(x)));
    return scale(sum(log_clamped(pick(p, {{0, 1}, {1, 4}, {2, 0}}))), -1.0);
  });
  EXPECT_LT(rep.max_rel_error, 1e-6) << rep.worst_param;
}

TEST(GradCheck, Blocks) {
  std::mt19937_64 rng(13);
  ParameterStore store;
  MultiHeadAttention mha(store, "mha", 8, 2, rng);
  LayerNorm ln(store, "ln", 8);
  FeedForward ff(store, "ff", 8, 12, rng);
  TransformerLayer layer(store, "layer", 8, 2, 12, rng);
  CharCnn cnn(store, "cnn", 10, 3, 5, 3, 8, rng);
  Biaffine bi(store, "bi", 8, 8, 4, 3, rng);
  for (auto& v : ln.gain->value.data()) v = 1.0 + 0.1 * std::normal_distribution<double>()(rng);
  for (auto& v : ln.bias->value.data()) v = 0.1 * std::normal_distribution<double>()(rng);
  Matrix x = random_matrix(3, 8, rng), y = random_matrix(4, 8, rng);
  Matrix w1 = random_matrix(3, 8, rng), w2 = random_matrix(1, 8, rng), w3 = random_matrix(3, 3, rng);
  auto rep = grad_check(store, [&](Tape& t) {
    Var X = t.constant(x);
    Var a = mha(t, X, t.constant(y)).output;
    Var b = ff(t, ln(t, a));
    Var c = layer(t, b, b, true);
    Var chars = cnn(t, {1, 2, 3, 4, 5});
    Var d = add(c, chars);
    Var e = softmax_rows(bi(t, d, X));
    return add(add(probe_loss(t, d, w1), probe_loss(t, chars, w2)), probe_loss(t, e, w3));
  });
  EXPECT_LT(rep.max_rel_error, 1e-4) << rep.worst_param << "[" << rep.worst_index << "] " << rep.worst_analytic
                                     << " vs " << rep.worst_numeric;
}

TEST(Backward, IsLinearInTheLoss) {
  std::mt19937_64 rng(14);
  ParameterStore store;
  TransformerLayer layer(store, "layer", 8, 2, 12, rng);
  Matrix x = random_matrix(3, 8, rng), w1 = random_matrix(3, 8, rng), w2 = random_matrix(3, 8, rng);
  auto grads = [&](bool first, bool second) {
    store.zero_grad();
    Tape t;
    Var y = layer(t, t.constant(x), t.constant(x), false);
    Var l = first && second ? add(probe_loss(t, y, w1), probe_loss(t, y, w2))
            : first         ? probe_loss(t, y, w1)
                            : probe_loss(t, y, w2);
    t.backward(l);
    std::vector<double> g;
    for (Parameter* p : store.all()) g.insert(g.end(), p->grad.data().begin(), p->grad.data().end());
    return g;
  };
  auto ga = grads(true, false), gb = grads(false, true), gab = grads(true, true);
  for (std::size_t i = 0; i < gab.size(); ++i) EXPECT_NEAR(gab[i], ga[i] + gb[i], 1e-10);
}

TEST(Ops, PoolingScatterAndDeterminism) {
  Tape t(false);
  Var a = t.constant(Matrix(1, 3, std::vector<double>{0.2, 0.7, 0.1}));
  Var b = t.constant(Matrix(1, 3, std::vector<double>{0.5, 0.1, 0.4}));
  std::vector<Var> both{a, b};
  auto m = max_elementwise(both).value();
  EXPECT_DOUBLE_EQ(m[0], 0.5);
  EXPECT_DOUBLE_EQ(m[1], 0.7);
  EXPECT_DOUBLE_EQ(m[2], 0.4);
  auto s = scatter_cols(a, {2, 0, 2}, 4).value();
  EXPECT_DOUBLE_EQ(s[0], 0.7);
  EXPECT_DOUBLE_EQ(s[1], 0.0);
  EXPECT_DOUBLE_EQ(s[2], 0.30000000000000004);
  EXPECT_THROW(matmul(a, b), gsp::DimensionError);

  auto build = [] {
    std::mt19937_64 rng(99);
    ParameterStore store;
    TransformerEncoder enc(store, "e", 1, 8, 2, 8, rng);
    Tape tt(false);
    return enc(tt, tt.constant(sinusoidal_positions(0, 3, 8)), false).value().data();
  };
  EXPECT_EQ(build(), build());
}
