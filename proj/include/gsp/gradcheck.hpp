#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gsp/tensor.hpp"

namespace gsp::nn {

// Builds the loss on the given tape.
using LossFn = std::function<Var(Tape&)>;

struct GradCheckReport {
  double max_tensor_error = 0.0;  // ||a - n|| / max(||a||, ||n||) per parameter
  std::string worst_tensor;
  double max_rel_error = 0.0;  // per coordinate
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

inline double relative_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
}

inline double evaluate_loss(const LossFn& loss) {
  Tape t(false);
  return loss(t).scalar();
}

// Central differences for every coordinate (or a seeded sample of at most
// `per_param` coordinates of each parameter when per_param > 0).
inline GradCheckReport grad_check(ParameterStore& store, const LossFn& loss, double h = 1e-5, std::size_t per_param = 0,
                                  std::uint64_t seed = 0) {
  store.zero_grad();
  {
    Tape t(true);
    Var l = loss(t);
    t.backward(l);
  }
  std::mt19937_64 rng(seed);
  GradCheckReport rep;
  for (Parameter* p : store.all()) {
    if (!p->trainable) continue;
    std::vector<std::size_t> coords(p->value.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (per_param > 0 && coords.size() > per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(per_param);
      std::sort(coords.begin(), coords.end());
    }
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i : coords) {
      const double orig = p->value[i];
      p->value[i] = orig + h;
      const double up = evaluate_loss(loss);
      p->value[i] = orig - h;
      const double down = evaluate_loss(loss);
      p->value[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad[i];
      const double err = relative_error(analytic, numeric);
      diff2 += (analytic - numeric) * (analytic - numeric);
      a2 += analytic * analytic;
      n2 += numeric * numeric;
      ++rep.checked;
      if (err > rep.max_rel_error) {
        rep.max_rel_error = err;
        rep.worst_param = p->name;
        rep.worst_index = i;
        rep.worst_analytic = analytic;
        rep.worst_numeric = numeric;
      }
    }
    const double terr = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-8});
    if (terr > rep.max_tensor_error) {
      rep.max_tensor_error = terr;
      rep.worst_tensor = p->name;
    }
  }
  store.zero_grad();
  return rep;
}

}  // namespace gsp::nn
