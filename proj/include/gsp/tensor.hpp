#pragma once

// Dense row-major matrices and a tape-based reverse-mode differentiator.
// Every value is a 2-D matrix; vectors are 1 x n rows.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gsp/error.hpp"

namespace gsp::nn {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) throw DimensionError("matrix data size does not match shape");
  }

  static Matrix row_vector(std::vector<double> v) {
    const std::size_t n = v.size();
    return Matrix(1, n, std::move(v));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const double& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  Matrix& operator+=(const Matrix& o) {
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  // Append the rows of `o` (same column count).
  void append_rows(const Matrix& o) {
    if (rows_ == 0 && cols_ == 0) cols_ = o.cols_;
    if (o.cols_ != cols_) throw DimensionError("append_rows column mismatch");
    data_.insert(data_.end(), o.data_.begin(), o.data_.end());
    rows_ += o.rows_;
  }

  Matrix slice_rows(std::size_t begin, std::size_t count) const {
    Matrix out(count, cols_);
    std::copy(data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_),
              data_.begin() + static_cast<std::ptrdiff_t>((begin + count) * cols_), out.data_.begin());
    return out;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;
};

// Owns every parameter of a model; names are unique.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Parameter& add(const std::string& name, std::size_t rows, std::size_t cols) {
    if (by_name_.count(name)) throw DimensionError("duplicate parameter name '" + name + "'");
    auto p = std::make_unique<Parameter>(Parameter{name, Matrix(rows, cols), Matrix(rows, cols), true});
    by_name_[name] = p.get();
    params_.push_back(std::move(p));
    return *params_.back();
  }

  Parameter& get(const std::string& name) {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw DimensionError("no parameter named '" + name + "'");
    return *it->second;
  }
  bool contains(const std::string& name) const { return by_name_.count(name) > 0; }

  std::vector<Parameter*> all() const {
    std::vector<Parameter*> out;
    for (const auto& p : params_) out.push_back(p.get());
    return out;
  }

  void zero_grad() {
    for (auto& p : params_) p->grad.fill(0.0);
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, Parameter*> by_name_;
};

// Xavier-uniform for projections.
template <typename Rng>
void init_xavier(Parameter& p, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& v : p.value.data()) v = u(rng);
}

template <typename Rng>
void init_normal(Parameter& p, Rng& rng, double stddev) {
  std::normal_distribution<double> n(0.0, stddev);
  for (auto& v : p.value.data()) v = n(rng);
}

class Tape;

// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double scalar() const { return value()[0]; }
};

// Records values and backward closures; backward() walks the record in
// reverse creation order, which is a reverse topological order.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Matrix m) { return push(std::move(m), false, nullptr); }

  // Leaf bound to a parameter; gradients flow into p.grad after backward().
  Var param(Parameter& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Var{this, it->second};
    Var v = push(Matrix(), grad_enabled_ && p.trainable, nullptr);
    nodes_[v.id].external = &p.value;
    param_nodes_[&p] = v.id;
    return v;
  }

  Var record(Matrix value, bool needs_grad, Backward backward) {
    needs_grad = needs_grad && grad_enabled_;
    return push(std::move(value), needs_grad, needs_grad ? std::move(backward) : nullptr);
  }

  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }
  const Matrix& value(std::size_t id) const {
    const auto& n = nodes_[id];
    return n.external ? *n.external : n.value;
  }
  Matrix& grad(std::size_t id) {
    auto& n = nodes_[id];
    const Matrix& v = value(id);
    if (!n.grad.same_shape(v)) n.grad = Matrix(v.rows(), v.cols());
    return n.grad;
  }
  bool has_grad(std::size_t id) const { return nodes_[id].grad.size() > 0; }

  // Seeds d(root)/d(root) = 1 for every element of root (normally 1x1).
  void backward(Var root) {
    if (!nodes_[root.id].needs_grad) return;
    grad(root.id).fill(1.0);
    for (std::size_t i = root.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.needs_grad || !has_grad(i)) continue;
      if (n.backward) n.backward(*this, i);
    }
    for (auto [p, id] : param_nodes_)
      if (nodes_[id].needs_grad && has_grad(id)) p->grad += nodes_[id].grad;
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool needs_grad = false;
    const Matrix* external = nullptr;
  };

  Var push(Matrix value, bool needs_grad, Backward backward) {
    nodes_.push_back(Node{std::move(value), Matrix(), std::move(backward), needs_grad, nullptr});
    return Var{this, nodes_.size() - 1};
  }

  bool grad_enabled_;
  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, std::size_t> param_nodes_;
};

inline const Matrix& Var::value() const { return tape->value(id); }

// ---- operations ---------------------------------------------------------

inline void require(bool ok, const char* what) {
  if (!ok) throw DimensionError(what);
}

// a (r x k) * b (k x c)
inline Var matmul(Var a, Var b) {
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  require(A.cols() == B.rows(), "matmul: inner dimensions differ");
  const std::size_t R = A.rows(), K = A.cols(), C = B.cols();
  Matrix out(R, C);
  for (std::size_t r = 0; r < R; ++r) {
    double* o = &out(r, 0);
    for (std::size_t k = 0; k < K; ++k) {
      const double av = A(r, k);
      if (av == 0.0) continue;
      const double* brow = &B(k, 0);
      for (std::size_t c = 0; c < C; ++c) o[c] += av * brow[c];
    }
  }
  Tape& t = *a.tape;
  return t.record(std::move(out), t.needs_grad(a) || t.needs_grad(b), [a, b](Tape& t, std::size_t self) {
    const Matrix& G = t.grad(self);
    const Matrix& A = t.value(a.id);
    const Matrix& B = t.value(b.id);
    const std::size_t R = A.rows(), K = A.cols(), C = B.cols();
    if (t.needs_grad(a)) {
      Matrix& ga = t.grad(a.id);
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t k = 0; k < K; ++k) {
          double s = 0.0;
          const double* g = &G(r, 0);
          const double* brow = &B(k, 0);
          for (std::size_t c = 0; c < C; ++c) s += g[c] * brow[c];
          ga(r, k) += s;
        }
    }
    if (t.needs_grad(b)) {
      Matrix& gb = t.grad(b.id);
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t k = 0; k < K; ++k) {
          const double av = A(r, k);
          if (av == 0.0) continue;
          const double* g = &G(r, 0);
          double* gbrow = &gb(k, 0);
          for (std::size_t c = 0; c < C; ++c) gbrow[c] += av * g[c];
        }
    }
  });
}

// a (r x d) * b^T where b is (m x d)
inline Var matmul_t(Var a, Var b) {
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  require(A.cols() == B.cols(), "matmul_t: feature dimensions differ");
  const std::size_t R = A.rows(), M = B.rows(), D = A.cols();
  Matrix out(R, M);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t m = 0; m < M; ++m) {
      double s = 0.0;
      const double* x = &A(r, 0);
      const double* y = &B(m, 0);
      for (std::size_t d = 0; d < D; ++d) s += x[d] * y[d];
      out(r, m) = s;
    }
  Tape& t = *a.tape;
  return t.record(std::move(out), t.needs_grad(a) || t.needs_grad(b), [a, b](Tape& t, std::size_t self) {
    const Matrix& G = t.grad(self);
    const Matrix& A = t.value(a.id);
    const Matrix& B = t.value(b.id);
    const std::size_t R = A.rows(), M = B.rows(), D = A.cols();
    const bool ga_on = t.needs_grad(a), gb_on = t.needs_grad(b);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t m = 0; m < M; ++m) {
        const double g = G(r, m);
        if (g == 0.0) continue;
        if (ga_on) {
          double* ga = &t.grad(a.id)(r, 0);
          const double* y = &B(m, 0);
          for (std::size_t d = 0; d < D; ++d) ga[d] += g * y[d];
        }
        if (gb_on) {
          double* gb = &t.grad(b.id)(m, 0);
          const double* x = &A(r, 0);
          for (std::size_t d = 0; d < D; ++d) gb[d] += g * x[d];
        }
      }
  });
}

// Elementwise sum; b may be a single row broadcast over a's rows.
inline Var add(Var a, Var b) {
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  const bool broadcast = B.rows() == 1 && A.rows() != 1;
  require(A.cols() == B.cols() && (A.rows() == B.rows() || broadcast), "add: shape mismatch");
  Matrix out = A;
  for (std::size_t r = 0; r < A.rows(); ++r) {
    auto o = out.row(r);
    auto br = B.row(broadcast ? 0 : r);
    for (std::size_t c = 0; c < A.cols(); ++c) o[c] += br[c];
  }
  Tape& t = *a.tape;
  return t.record(std::move(out), t.needs_grad(a) || t.needs_grad(b), [a, b, broadcast](Tape& t, std::size_t self) {
    const Matrix& G = t.grad(self);
    if (t.needs_grad(a)) t.grad(a.id) += G;
    if (t.needs_grad(b)) {
      Matrix& gb = t.grad(b.id);
      if (!broadcast) {
        gb += G;
      } else {
        for (std::size_t r = 0; r < G.rows(); ++r)
          for (std::size_t c = 0; c < G.cols(); ++c) gb(0, c) += G(r, c);
      }
    }
  });
}

inline Var add_n(std::span<const Var> xs) {
  require(!xs.empty(), "add_n: no operands");
  Var acc = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
  return acc;
}

inline Var mul(Var a, Var b) {
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  require(A.same_shape(B), "mul: shape mismatch");
  Matrix out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
  Tape& t = *a.tape;
  return t.record(std::move(out), t.needs_grad(a) || t.needs_grad(b), [a, b](Tape& t, std::size_t self) {
    const Matrix& G = t.grad(self);
    const Matrix& A = t.value(a.id);
    const Matrix& B = t.value(b.id);
    if (t.needs_grad(a)) {
      Matrix& ga = t.grad(a.id);
      for (std::size_t i = 0; i < G.size(); ++i) ga[i] += G[i] * B[i];
    }
    if (t.needs_grad(b)) {
      Matrix& gb = t.grad(b.id);
      for (std::size_t i = 0; i < G.size(); ++i) gb[i] += G[i] * A[i];
    }
  });
}

inline Var scale(Var a, double s) {
  Matrix out = a.value();
  for (auto& v : out.data()) v *= s;
  Tape& t = *a.tape;
  return t.record(std::move(out), t.needs_grad(a), [a, s](Tape& t, std::size_t self) {
    const Matrix& G = t.grad(self);
    Matrix& ga = t.grad(a.id);
    for (std::size_t i = 0; i < G.size(); ++i) ga[i] += s * G[i];
  });
}

inline Var relu(Var a) {
  Matrix out = a.value();
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  Tape& t = *a.tape;
  return t.record(std::move(out), t.needs_grad(a), [a](Tape& t, std::size_t self) {
    const Matrix& G = t.grad(self);
    const Matrix& A = t.value(a.id);
    Matrix& ga = t.grad(a.id);
    for (std::size_t i = 0; i < G.size(); ++i)
      if (A[i] > 0.0) ga[i] += G[i];
  });
}

// Row-wise softmax. With causal_offset >= 0, entry (r, j) is masked to zero
// whenever j > r + causal_offset.
inline Var softmax_rows(Var a, long causal_offset = -1) {
  const Matrix& A = a.value();
  Matrix out(A.rows(), A.cols());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    std::size_t limit = A.cols();
    if (causal_offset >= 0) limit = std::min<std::size_t>(A.cols(), r + static_cast<std::size_t>(causal_offset) + 1);
    require(limit > 0, "softmax_rows: row has no unmasked entries");
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < limit; ++c) mx = std::max(mx, A(r, c));
    double sum = 0.0;
    for (std::size_t c = 0; c < limit; ++c) sum += (out(r, c) = std::exp(A(r, c) - mx));
    for (std::size_t c = 0; c < limit; ++c) out(r, c) /= sum;
  }
  Tape& t = *a.tape;
  return t.record(std::move(out), t.needs_grad(a), [a](Tape& t, std::size_t self) {
    const Matrix& G = t.grad(self);
    const Matrix& Y = t.value(self);
    Matrix& ga = t.grad(a.id);
    for (std::size_t r = 0; r < Y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < Y.cols(); ++c) dot += G(r, c) * Y(r, c);
      for (std::size_t c = 0; c < Y.cols(); ++c) ga(r, c) += Y(r, c) * (G(r, c) - dot);
    }
  });
}

inline constexpr double kLayerNormEps = 1e-5;

// Per-row normalization with gain and bias rows.
inline Var layer_norm(Var x, Var gain, Var bias, double eps = kLayerNormEps) {
  const Matrix& X = x.value();
  const Matrix& Gn = gain.value();
  const Matrix& Bs = bias.value();
  require(Gn.rows() == 1 && Gn.cols() == X.cols() && Bs.same_shape(Gn), "layer_norm: gain/bias shape");
  const std::size_t R = X.rows(), C = X.cols();
  Matrix out(R, C), xhat(R, C);
  std::vector<double> inv_std(R);
  for (std::size_t r = 0; r < R; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < C; ++c) mean += X(r, c);
    mean /= static_cast<double>(C);
    double var = 0.0;
    for (std::size_t c = 0; c < C; ++c) var += (X(r, c) - mean) * (X(r, c) - mean);
    var /= static_cast<double>(C);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < C; ++c) {
      xhat(r, c) = (X(r, c) - mean) * inv_std[r];
      out(r, c) = xhat(r, c) * Gn(0, c) + Bs(0, c);
    }
  }
  Tape& t = *x.tape;
  const bool need = t.needs_grad(x) || t.needs_grad(gain) || t.needs_grad(bias);
  return t.record(std::move(out), need,
                  [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
                    const Matrix& G = t.grad(self);
                    const Matrix& Gn = t.value(gain.id);
                    const std::size_t R = G.rows(), C = G.cols();
                    if (t.needs_grad(gain) || t.needs_grad(bias)) {
                      for (std::size_t r = 0; r < R; ++r)
                        for (std::size_t c = 0; c < C; ++c) {
                          if (t.needs_grad(gain)) t.grad(gain.id)(0, c) += G(r, c) * xhat(r, c);
                          if (t.needs_grad(bias)) t.grad(bias.id)(0, c) += G(r, c);
                        }
                    }
                    if (t.needs_grad(x)) {
                      Matrix& gx = t.grad(x.id);
                      for (std::size_t r = 0; r < R; ++r) {
                        double s1 = 0.0, s2 = 0.0;
                        for (std::size_t c = 0; c < C; ++c) {
                          const double dxh = G(r, c) * Gn(0, c);
                          s1 += dxh;
                          s2 += dxh * xhat(r, c);
                        }
                        const double n = static_cast<double>(C);
                        for (std::size_t c = 0; c < C; ++c) {
                          const double dxh = G(r, c) * Gn(0, c);
                          gx(r, c) += inv_std[r] * (dxh - s1 / n - xhat(r, c) * s2 / n);
                        }
                      }
                    }
                  });
}

inline Var concat_cols(std::span<const Var> xs) {
  require(!xs.empty(), "concat_cols: no operands");
  const std::size_t R = xs[0].rows();
  std::size_t C = 0;
  bool need = false;
  for (const auto& x : xs) {
    require(x.rows() == R, "concat_cols: row counts differ");
    C += x.cols();
    need = need || x.tape->needs_grad(x);
  }
  Matrix out(R, C);
  std::size_t off = 0;
  for (const auto& x : xs) {
    const Matrix& X = x.value();
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < X.cols(); ++c) out(r, off + c) = X(r, c);
    off += X.cols();
  }
  std::vector<Var> parts(xs.begin(), xs.end());
  Tape& t = *xs[0].tape;
  return t.record(std::move(out), need, [parts = std::move(parts)](Tape& t, std::size_t self) {
    const Matrix& G = t.grad(self);
    std::size_t off = 0;
    for (const auto& x : parts) {
      const std::size_t xc = t.value(x.id).cols();
      if (t.needs_grad(x)) {
        Matrix& gx = t.grad(x.id);
        for (std::size_t r = 0; r < G.rows(); ++r)
          for (std::size_t c = 0; c < xc; ++c) gx(r, c) += G(r, off + c);
      }
      off += xc;
    }
  });
}

inline Var concat_rows(std::span<const Var> xs) {
  require(!xs.empty(), "concat_rows: no operands");
  const std::size_t C = xs[0].cols();
  bool need = false;
  Matrix out(0, C);
  for (const auto& x : xs) {
    require(x.cols() == C, "concat_rows: column counts differ");
    out.append_rows(x.value());
    need = need || x.tape->needs_grad(x);
  }
  std::vector<Var> parts(xs.begin(), xs.end());
  Tape& t = *xs[0].tape;
  return t.record(std::move(out), need, [parts = std::move(parts)](Tape& t, std::size_t self) {
    const Matrix& G = t.grad(self);
    std::size_t off = 0;
    for (const auto& x : parts) {
      const std::size_t xr = t.value(x.id).rows();
      if (t.needs_grad(x)) {
        Matrix& gx = t.grad(x.id);
        for (std::size_t r = 0; r < xr; ++r)
          for (std::size_t c = 0; c < G.cols(); ++c) gx(r, c) += G(off + r, c);
      }
      off += xr;
    }
  });
}

inline Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Matrix& A = a.value();
  require(begin + count <= A.cols(), "slice_cols: out of range");
  Matrix out(A.rows(), count);
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = A(r, begin + c);
  Tape& t = *a.tape;
  return t.record(std::move(out), t.needs_grad(a), [a, begin, count](Tape& t, std::size_t self) {
    const Matrix& G = t.grad(self);
    Matrix& ga = t.grad(a.id);
    for (std::size_t r = 0; r < G.rows(); ++r)
      for (std::size_t c = 0; c < count; ++c) ga(r, begin + c) += G(r, c);
  });
}

inline Var gather_rows(Var a, std::vector<std::size_t> idx) {
  const Matrix& A = a.value();
  Matrix out(idx.size(), A.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] < A.rows(), "gather_rows: index out of range");
    std::copy(A.row(idx[i]).begin(), A.row(idx[i]).end(), out.row(i).begin());
  }
  Tape& t = *a.tape;
  return t.record(std::move(out), t.needs_grad(a), [a, idx = std::move(idx)](Tape& t, std::size_t self) {
    const Matrix& G = t.grad(self);
    Matrix& ga = t.grad(a.id);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < G.cols(); ++c) ga(idx[i], c) += G(i, c);
  });
}

// Rows of an embedding table; the gradient is scattered straight into p.grad.
inline Var embedding_rows(Tape& t, Parameter& p, std::span<const std::size_t> ids) {
  Matrix out(ids.size(), p.value.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] < p.value.rows(), "embedding_rows: id out of range");
    std::copy(p.value.row(ids[i]).begin(), p.value.row(ids[i]).end(), out.row(i).begin());
  }
  std::vector<std::size_t> copy(ids.begin(), ids.end());
  return t.record(std::move(out), p.trainable, [pp = &p, copy = std::move(copy)](Tape& t, std::size_t self) {
    const Matrix& G = t.grad(self);
    for (std::size_t i = 0; i < copy.size(); ++i)
      for (std::size_t c = 0; c < G.cols(); ++c) pp->grad(copy[i], c) += G(i, c);
  });
}

inline Var repeat_rows(Var a, std::size_t n) {
  require(a.rows() == 1, "repeat_rows: expects a single row");
  return gather_rows(a, std::vector<std::size_t>(n, 0));
}

// Column-wise maximum over rows -> 1 x cols (max-over-time pooling).
inline Var max_over_rows(Var a) {
  const Matrix& A = a.value();
  require(A.rows() > 0, "max_over_rows: empty input");
  Matrix out(1, A.cols());
  std::vector<std::size_t> arg(A.cols(), 0);
  for (std::size_t c = 0; c < A.cols(); ++c) {
    double best = A(0, c);
    for (std::size_t r = 1; r < A.rows(); ++r)
      if (A(r, c) > best) best = A(r, c), arg[c] = r;
    out(0, c) = best;
  }
  Tape& t = *a.tape;
  return t.record(std::move(out), t.needs_grad(a), [a, arg = std::move(arg)](Tape& t, std::size_t self) {
    const Matrix& G = t.grad(self);
    Matrix& ga = t.grad(a.id);
    for (std::size_t c = 0; c < G.cols(); ++c) ga(arg[c], c) += G(0, c);
  });
}

// Elementwise maximum across same-shaped operands (ties go to the first).
inline Var max_elementwise(std::span<const Var> xs) {
  require(!xs.empty(), "max_elementwise: no operands");
  const Matrix& first = xs[0].value();
  Matrix out = first;
  std::vector<std::size_t> arg(first.size(), 0);
  bool need = xs[0].tape->needs_grad(xs[0]);
  for (std::size_t k = 1; k < xs.size(); ++k) {
    const Matrix& X = xs[k].value();
    require(X.same_shape(first), "max_elementwise: shape mismatch");
    need = need || xs[k].tape->needs_grad(xs[k]);
    for (std::size_t i = 0; i < X.size(); ++i)
      if (X[i] > out[i]) out[i] = X[i], arg[i] = k;
  }
  std::vector<Var> parts(xs.begin(), xs.end());
  Tape& t = *xs[0].tape;
  return t.record(std::move(out), need, [parts = std::move(parts), arg = std::move(arg)](Tape& t, std::size_t self) {
    const Matrix& G = t.grad(self);
    for (std::size_t i = 0; i < G.size(); ++i) {
      const Var& src = parts[arg[i]];
      if (t.needs_grad(src)) t.grad(src.id)[i] += G[i];
    }
  });
}

// Multiplies row r of a by s(r, 0).
inline Var scale_rows(Var a, Var s) {
  const Matrix& A = a.value();
  const Matrix& S = s.value();
  require(S.cols() == 1 && S.rows() == A.rows(), "scale_rows: scale must be rows x 1");
  Matrix out = A;
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (auto& v : out.row(r)) v *= S(r, 0);
  Tape& t = *a.tape;
  return t.record(std::move(out), t.needs_grad(a) || t.needs_grad(s), [a, s](Tape& t, std::size_t self) {
    const Matrix& G = t.grad(self);
    const Matrix& A = t.value(a.id);
    const Matrix& S = t.value(s.id);
    for (std::size_t r = 0; r < G.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < G.cols(); ++c) {
        dot += G(r, c) * A(r, c);
        if (t.needs_grad(a)) t.grad(a.id)(r, c) += G(r, c) * S(r, 0);
      }
      if (t.needs_grad(s)) t.grad(s.id)(r, 0) += dot;
    }
  });
}

// out(r, targets[j]) += a(r, j): sums attention mass into candidate columns.
inline Var scatter_cols(Var a, std::vector<std::size_t> targets, std::size_t out_cols) {
  const Matrix& A = a.value();
  require(targets.size() == A.cols(), "scatter_cols: one target per column");
  Matrix out(A.rows(), out_cols);
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t j = 0; j < targets.size(); ++j) {
      require(targets[j] < out_cols, "scatter_cols: target out of range");
      out(r, targets[j]) += A(r, j);
    }
  Tape& t = *a.tape;
  return t.record(std::move(out), t.needs_grad(a), [a, targets = std::move(targets)](Tape& t, std::size_t self) {
    const Matrix& G = t.grad(self);
    Matrix& ga = t.grad(a.id);
    for (std::size_t r = 0; r < G.rows(); ++r)
      for (std::size_t j = 0; j < targets.size(); ++j) ga(r, j) += G(r, targets[j]);
  });
}

// Zero-extends the column count.
inline Var pad_cols(Var a, std::size_t cols) {
  const Matrix& A = a.value();
  require(cols >= A.cols(), "pad_cols: cannot shrink");
  std::vector<std::size_t> targets(A.cols());
  for (std::size_t j = 0; j < targets.size(); ++j) targets[j] = j;
  return scatter_cols(a, std::move(targets), cols);
}

// Gathers single entries -> k x 1.
inline Var pick(Var a, std::vector<std::pair<std::size_t, std::size_t>> cells) {
  const Matrix& A = a.value();
  Matrix out(cells.size(), 1);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    require(cells[i].first < A.rows() && cells[i].second < A.cols(), "pick: index out of range");
    out(i, 0) = A(cells[i].first, cells[i].second);
  }
  Tape& t = *a.tape;
  return t.record(std::move(out), t.needs_grad(a), [a, cells = std::move(cells)](Tape& t, std::size_t self) {
    const Matrix& G = t.grad(self);
    Matrix& ga = t.grad(a.id);
    for (std::size_t i = 0; i < cells.size(); ++i) ga(cells[i].first, cells[i].second) += G(i, 0);
  });
}

// log(max(x, floor)); entries below the floor get zero gradient and are counted.
// NaN passes through.
inline Var log_clamped(Var a, double floor = 1e-12, std::size_t* clamped = nullptr) {
  Matrix out = a.value();
  for (auto& v : out.data()) {
    if (v < floor) {
      if (clamped) ++*clamped;
      v = std::log(floor);
    } else {
      v = std::log(v);
    }
  }
  Tape& t = *a.tape;
  return t.record(std::move(out), t.needs_grad(a), [a, floor](Tape& t, std::size_t self) {
    const Matrix& G = t.grad(self);
    const Matrix& A = t.value(a.id);
    Matrix& ga = t.grad(a.id);
    for (std::size_t i = 0; i < G.size(); ++i)
      if (A[i] >= floor) ga[i] += G[i] / A[i];
  });
}

inline Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  Tape& t = *a.tape;
  return t.record(Matrix(1, 1, s), t.needs_grad(a), [a](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    Matrix& ga = t.grad(a.id);
    for (auto& v : ga.data()) v += g;
  });
}

// out(p, k) = h_p^T W_k v_p with W stored as K x (r*r), row-major per label.
inline Var bilinear(Var h, Var w, Var v) {
  const Matrix& H = h.value();
  const Matrix& W = w.value();
  const Matrix& V = v.value();
  const std::size_t P = H.rows(), R = H.cols(), K = W.rows();
  require(V.rows() == P && V.cols() == R && W.cols() == R * R, "bilinear: shape mismatch");
  Matrix out(P, K);
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t k = 0; k < K; ++k) {
      double s = 0.0;
      for (std::size_t a = 0; a < R; ++a) {
        double inner = 0.0;
        const double* wr = &W(k, a * R);
        for (std::size_t b = 0; b < R; ++b) inner += wr[b] * V(p, b);
        s += H(p, a) * inner;
      }
      out(p, k) = s;
    }
  Tape& t = *h.tape;
  const bool need = t.needs_grad(h) || t.needs_grad(w) || t.needs_grad(v);
  return t.record(std::move(out), need, [h, w, v](Tape& t, std::size_t self) {
    const Matrix& G = t.grad(self);
    const Matrix& H = t.value(h.id);
    const Matrix& W = t.value(w.id);
    const Matrix& V = t.value(v.id);
    const std::size_t P = H.rows(), R = H.cols(), K = W.rows();
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t k = 0; k < K; ++k) {
        const double g = G(p, k);
        if (g == 0.0) continue;
        for (std::size_t a = 0; a < R; ++a) {
          const double* wr = &W(k, a * R);
          double inner = 0.0;
          for (std::size_t b = 0; b < R; ++b) {
            inner += wr[b] * V(p, b);
            if (t.needs_grad(w)) t.grad(w.id)(k, a * R + b) += g * H(p, a) * V(p, b);
            if (t.needs_grad(v)) t.grad(v.id)(p, b) += g * H(p, a) * wr[b];
          }
          if (t.needs_grad(h)) t.grad(h.id)(p, a) += g * inner;
        }
      }
  });
}

// Inverted dropout; identity when rate == 0.
template <typename Rng>
Var dropout(Var a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix mask(a.rows(), a.cols());
  for (auto& m : mask.data()) m = keep(rng) ? 1.0 / (1.0 - rate) : 0.0;
  return mul(a, a.tape->constant(std::move(mask)));
}

}  // namespace gsp::nn
