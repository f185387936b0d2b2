#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "gsp/decode.hpp"
#include "gsp/smatch.hpp"

namespace gsp {

struct TrainConfig {
  double unk_rate = 0.33;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-9;
  std::size_t warmup = 2000;
  double lr_scale = 1.0;
  std::size_t batch = 1;  // graphs per update
  std::size_t epochs = 100;
  std::size_t patience = 10;  // epochs without dev improvement
  std::size_t eval_every = 1;
  OrderStrategy::Kind order = OrderStrategy::Kind::RelationFreq;
  std::uint64_t seed = 1;
  bool stop_at_perfect = true;
  int eval_restarts = kDefaultRestarts;

  nlohmann::json to_json() const {
    return {{"unk_rate", unk_rate}, {"beta1", beta1},         {"beta2", beta2},     {"adam_eps", adam_eps},
            {"warmup", warmup},     {"lr_scale", lr_scale},   {"batch", batch},     {"epochs", epochs},
            {"patience", patience}, {"eval_every", eval_every}, {"order", to_string(order)}, {"seed", seed},
            {"stop_at_perfect", stop_at_perfect}};
  }

  static TrainConfig from_json(const nlohmann::json& j) { return from_json(j, TrainConfig{}); }
  static TrainConfig from_json(const nlohmann::json& j, TrainConfig c) {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("unk_rate", c.unk_rate);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("adam_eps", c.adam_eps);
    get("warmup", c.warmup);
    get("lr_scale", c.lr_scale);
    get("batch", c.batch);
    get("epochs", c.epochs);
    get("patience", c.patience);
    get("eval_every", c.eval_every);
    get("seed", c.seed);
    get("stop_at_perfect", c.stop_at_perfect);
    if (j.contains("order")) c.order = parse_order_kind(j.at("order").get<std::string>());
    c.validate();
    return c;
  }

  // Schedule defaults per model preset; small models want a gentler peak rate.
  static TrainConfig for_model(const std::string& preset) {
    TrainConfig c;
    if (preset != "reference") {
      c.warmup = 1000;
      c.lr_scale = 0.5;
    }
    return c;
  }

  void validate() const {
    if (unk_rate < 0 || unk_rate > 1) throw DataError("unk_rate must lie in [0, 1]");
    if (warmup < 1) throw DataError("warmup must be at least 1");
    if (batch < 1) throw DataError("batch must be at least 1");
  }
};

// d^-0.5 * min(step^-0.5, step * warmup^-1.5), times a scale factor.
inline double noam_rate(std::size_t step, std::size_t model_dim, std::size_t warmup, double scale = 1.0) {
  const double s = static_cast<double>(std::max<std::size_t>(step, 1));
  const double w = static_cast<double>(warmup);
  return scale / std::sqrt(static_cast<double>(model_dim)) * std::min(1.0 / std::sqrt(s), s * std::pow(w, -1.5));
}

class Adam {
 public:
  Adam(double beta1, double beta2, double eps) : b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(const std::vector<Parameter*>& params, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (Parameter* p : params) {
      if (!p->trainable) continue;
      auto& st = state_[p];
      if (st.m.size() != p->value.size()) {
        st.m.assign(p->value.size(), 0.0);
        st.v.assign(p->value.size(), 0.0);
      }
      auto& val = p->value.data();
      const auto& g = p->grad.data();
      for (std::size_t i = 0; i < val.size(); ++i) {
        st.m[i] = b1_ * st.m[i] + (1 - b1_) * g[i];
        st.v[i] = b2_ * st.v[i] + (1 - b2_) * g[i] * g[i];
        val[i] -= lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + eps_);
      }
    }
  }

  std::size_t steps() const { return t_; }

 private:
  struct State {
    std::vector<double> m, v;
  };
  double b1_, b2_, eps_;
  std::size_t t_ = 0;
  std::unordered_map<Parameter*, State> state_;
};

// Replaces lemma/POS/NER ids (never the summary token) with UNK at `rate`.
inline std::vector<TokenFeatures> unk_replace(std::vector<TokenFeatures> f, double rate, Rng& rng) {
  if (rate <= 0.0) return f;
  std::bernoulli_distribution flip(rate);
  for (std::size_t i = 1; i < f.size(); ++i) {
    if (flip(rng)) f[i].lemma = Vocab::kUnk;
    if (flip(rng)) f[i].pos = Vocab::kUnk;
    if (flip(rng)) f[i].ner = Vocab::kUnk;
  }
  return f;
}

struct DevScores {
  double mean_smatch = 0.0;   // mean of per-pair F1
  double corpus_smatch = 0.0;  // micro-averaged
  double complete_match = 0.0;
  double root_accuracy = 0.0;
  std::size_t failures = 0;    // empty or unbuildable decodes
};

inline DevScores evaluate(const GspModel& model, const std::vector<Example>& data, const DecodeOptions& dopt = {},
                          int restarts = kDefaultRestarts, std::uint64_t seed = 0) {
  DevScores s;
  if (data.empty()) return s;
  double matched = 0, pred_total = 0, gold_total = 0;
  for (const auto& ex : data) {
    DecodeResult r = decode(model, model.context(ex.sentence), dopt);
    AmrGraph pred = r.graph ? *r.graph : AmrGraph{};
    if (!r.graph) ++s.failures;
    MatchResult m = smatch(pred, ex.graph, restarts, seed);
    s.mean_smatch += m.f1;
    matched += m.matched;
    pred_total += m.pred_total;
    gold_total += m.gold_total;
    if (m.gold_total > 0 && m.matched == m.gold_total && m.matched == m.pred_total) s.complete_match += 1;
    if (!pred.empty() && pred.nodes[pred.root].label == ex.graph.nodes[ex.graph.root].label) s.root_accuracy += 1;
  }
  const double n = static_cast<double>(data.size());
  s.mean_smatch /= n;
  s.complete_match /= n;
  s.root_accuracy /= n;
  s.corpus_smatch = make_match_result(matched, pred_total, gold_total, {}).f1;
  return s;
}

struct EpochRecord {
  std::size_t epoch = 0;
  LossParts loss;  // summed over the epoch
  double lr = 0.0;
  std::size_t steps = 0;
  std::optional<DevScores> dev;
  double seconds = 0.0;
};

inline nlohmann::json to_json(const EpochRecord& r) {
  nlohmann::json j{{"epoch", r.epoch},
                   {"loss", r.loss.total()},
                   {"concept_loss", r.loss.concepts},
                   {"arc_loss", r.loss.arc},
                   {"label_loss", r.loss.label},
                   {"clamped", r.loss.clamped},
                   {"lr", r.lr},
                   {"steps", r.steps},
                   {"seconds", r.seconds}};
  if (r.dev) {
    j["dev_smatch"] = r.dev->mean_smatch;
    j["dev_corpus_smatch"] = r.dev->corpus_smatch;
    j["dev_complete_match"] = r.dev->complete_match;
    j["dev_root_accuracy"] = r.dev->root_accuracy;
    j["dev_failures"] = r.dev->failures;
    j["dev_metric"] = "smatch/greedy";
  }
  return j;
}

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_dev = -1.0;
  bool diverged = false;
  bool stopped_early = false;
};

inline std::vector<std::vector<double>> snapshot(ParameterStore& store) {
  std::vector<std::vector<double>> s;
  for (Parameter* p : store.all()) s.push_back(p->value.data());
  return s;
}

inline void restore(ParameterStore& store, const std::vector<std::vector<double>>& s) {
  auto ps = store.all();
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value.data() = s[i];
}

inline bool all_finite_grads(const std::vector<Parameter*>& params) {
  for (const Parameter* p : params)
    for (double g : p->grad.data())
      if (!std::isfinite(g)) return false;
  return true;
}

// Teacher-forced maximum likelihood with per-epoch greedy dev evaluation;
// the best dev parameters are restored at the end.
inline TrainResult train(GspModel& model, const std::vector<Example>& train_set, const std::vector<Example>& dev_set,
                         const TrainConfig& cfg, const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  if (train_set.empty()) throw DataError("empty training set");
  Rng rng(cfg.seed);
  std::vector<AmrGraph> graphs;
  for (const auto& ex : train_set) graphs.push_back(ex.graph);
  const RelationFrequency freq = relation_frequency_table(graphs);
  OrderStrategy strategy{cfg.order, freq};

  std::vector<SentenceContext> contexts;
  std::vector<std::vector<SpanningAction>> fixed_actions;
  for (const auto& ex : train_set) {
    contexts.push_back(model.context(ex.sentence));
    fixed_actions.push_back(linearize(ex.graph, strategy, cfg.seed));
  }

  Adam adam(cfg.beta1, cfg.beta2, cfg.adam_eps);
  auto params = model.params().all();
  TrainResult result;
  auto best = snapshot(model.params());
  auto last_good = best;
  std::size_t since_best = 0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    std::shuffle(order.begin(), order.end(), rng);
    model.params().zero_grad();
    std::size_t in_batch = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const std::size_t i = order[k];
      const std::vector<SpanningAction>* actions = &fixed_actions[i];
      std::vector<SpanningAction> resampled;
      if (cfg.order != OrderStrategy::Kind::RelationFreq) {
        resampled = linearize(train_set[i].graph, strategy, cfg.seed ^ (epoch * 1000003ULL + i * 7919ULL));
        actions = &resampled;
      }
      auto feats = unk_replace(contexts[i].features, cfg.unk_rate, rng);
      LossParts parts;
      {
        Tape t;
        Var l = model.loss(t, contexts[i], *actions, &rng, &parts, &feats);
        bool finite = std::isfinite(l.scalar());
        if (finite) {
          t.backward(l);
          finite = all_finite_grads(params);
        }
        if (!finite) {
          restore(model.params(), last_good);
          result.diverged = true;
          result.history.push_back(rec);
          return result;
        }
      }
      rec.loss.concepts += parts.concepts;
      rec.loss.arc += parts.arc;
      rec.loss.label += parts.label;
      rec.loss.clamped += parts.clamped;
      if (++in_batch == cfg.batch || k + 1 == order.size()) {
        if (in_batch > 1)
          for (Parameter* p : params)
            for (auto& g : p->grad.data()) g /= static_cast<double>(in_batch);
        rec.lr = noam_rate(adam.steps() + 1, model.config().enc.model_dim, cfg.warmup, cfg.lr_scale);
        adam.step(params, rec.lr);
        model.params().zero_grad();
        in_batch = 0;
        ++rec.steps;
      }
    }
    last_good = snapshot(model.params());
    bool stop = false;
    if (!dev_set.empty() && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs)) {
      rec.dev = evaluate(model, dev_set, {}, cfg.eval_restarts, cfg.seed);
      const double score = rec.dev->mean_smatch;
      if (score > result.best_dev) {
        result.best_dev = score;
        result.best_epoch = epoch;
        best = last_good;
        since_best = 0;
      } else {
        since_best += cfg.eval_every;
      }
      if (cfg.stop_at_perfect && rec.dev->complete_match >= 1.0) stop = true;
      if (cfg.patience > 0 && since_best >= cfg.patience) {
        stop = true;
        result.stopped_early = true;
      }
    } else if (dev_set.empty()) {
      best = last_good;
      result.best_epoch = epoch;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (stop) break;
  }
  restore(model.params(), best);
  return result;
}

}  // namespace gsp
