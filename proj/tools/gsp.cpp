#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gsp/checkpoint.hpp"
#include "gsp/diagnostics.hpp"
#include "gsp/penman.hpp"
#include "gsp/postprocess.hpp"
#include "gsp/smatch.hpp"
#include "gsp/synthetic.hpp"
#include "gsp/train.hpp"

namespace {

using namespace gsp;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

// Writes to a file, or stdout for "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path != "-") {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw DataError("cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::vector<Example> load_corpus(const std::string& amr, const std::string& annotations, const std::string& alignments) {
  auto graphs = parse_penman(read_file(amr));
  std::optional<std::vector<AnnotatedSentence>> ann;
  if (!annotations.empty()) ann = parse_annotations(read_file(annotations));
  std::map<std::string, Alignment> align;
  if (!alignments.empty()) align = parse_alignments(read_file(alignments));
  return ingest(graphs, ann, align);
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

json match_json(const MatchResult& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
          {"matched", m.matched},     {"pred_total", m.pred_total}, {"gold_total", m.gold_total}};
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string train, annotations, alignments, dev, dev_annotations, out, log = "-";
  std::string preset = "toy", model_config, train_config, order;
  std::optional<std::size_t> epochs, patience, warmup, batch;
  std::optional<double> lr_scale, unk_rate;
  std::uint64_t seed = 1;
};

int run_train(const TrainArgs& a) {
  auto train_set = load_corpus(a.train, a.annotations, a.alignments);
  std::vector<Example> dev_set;
  if (!a.dev.empty()) dev_set = load_corpus(a.dev, a.dev_annotations, "");

  ModelConfig mc = ModelConfig::named(a.preset);
  if (!a.model_config.empty()) mc = ModelConfig::from_json(json::parse(read_file(a.model_config)), mc);
  TrainConfig tc = TrainConfig::for_model(a.preset);
  if (!a.train_config.empty()) tc = TrainConfig::from_json(json::parse(read_file(a.train_config)), tc);
  tc.seed = a.seed;
  if (a.epochs) tc.epochs = *a.epochs;
  if (a.patience) tc.patience = *a.patience;
  if (a.warmup) tc.warmup = *a.warmup;
  if (a.batch) tc.batch = *a.batch;
  if (a.lr_scale) tc.lr_scale = *a.lr_scale;
  if (a.unk_rate) tc.unk_rate = *a.unk_rate;
  if (!a.order.empty()) tc.order = parse_order_kind(a.order);
  tc.validate();

  VocabBundle vocab = build_vocabularies(train_set);
  const CoverageReport cov = coverage_scan(train_set, vocab);
  if (cov.uncovered > 0) {
    std::cerr << "warning: " << cov.uncovered << " of " << cov.concepts << " gold concepts unreachable\n";
    for (const auto& e : cov.examples) std::cerr << "  " << e << "\n";
  }
  std::vector<AmrGraph> graphs;
  for (const auto& ex : train_set) graphs.push_back(ex.graph);
  const PostprocessTables tables = build_postprocess_tables(graphs);

  GspModel model(mc, std::move(vocab), a.seed);
  std::cerr << "model " << a.preset << " (" << config_hash(mc) << "), " << model.params().scalar_count()
            << " parameters, " << train_set.size() << " training graphs\n";
  Output log(a.log);
  TrainResult res = train(model, train_set, dev_set, tc, [&](const EpochRecord& r) {
    log.stream() << to_json(r).dump() << "\n";
    log.stream().flush();
  });
  json extra{{"train_config", tc.to_json()},
             {"best_epoch", res.best_epoch},
             {"best_dev_smatch", res.best_dev},
             {"epochs_run", res.history.size()},
             {"diverged", res.diverged}};
  save_checkpoint(a.out, model, tables, extra);
  std::cerr << "saved " << a.out << " (best epoch " << res.best_epoch << ")\n";
  if (res.diverged) {
    std::cerr << "error: loss became non-finite; saved the last good parameters\n";
    return kData;
  }
  return kOk;
}

// ---------------------------------------------------------------- parse

struct ParseArgs {
  std::string checkpoint, input, output = "-";
  std::size_t beam = 8, step_cap = 0;
  bool raw = false;
  std::uint64_t seed = 1;
};

int run_parse(const ParseArgs& a) {
  Checkpoint ck = load_checkpoint(a.checkpoint);
  const auto sentences = parse_annotations(read_file(a.input));
  Output out(a.output);
  DecodeOptions opt;
  opt.beam = a.beam;
  opt.step_cap = a.step_cap;
  std::size_t failures = 0;
  for (const auto& s : sentences) {
    DecodeResult r = decode(*ck.model, ck.model->context(s), opt);
    AmrGraph g;
    if (r.graph) {
      g = a.raw ? *r.graph : postprocess(*r.graph, ck.tables);
    } else {
      // keeps pred/gold files aligned; scores zero against any gold graph
      ++failures;
      g.add_node("e", "empty-graph", false);
      g.root = 0;
      g.metadata["id"] = s.id;
      g.metadata["snt"] = s.text;
      g.metadata["error"] = r.error;
      std::cerr << "warning: " << s.id << ": " << r.error << "\n";
    }
    out.stream() << serialize_penman(g) << "\n\n";
  }
  if (failures) std::cerr << failures << " of " << sentences.size() << " sentences produced no graph\n";
  return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string pred, gold, metric = "all", report, format = "table";
  int d_thr = kDefaultWeightThreshold, d_max = kDefaultCoreDepth, restarts = kDefaultRestarts;
  std::uint64_t seed = 1;
};

int run_eval(const EvalArgs& a) {
  const auto pred = parse_penman(read_file(a.pred));
  const auto gold = parse_penman(read_file(a.gold));
  if (pred.size() != gold.size())
    throw DataError("prediction file has " + std::to_string(pred.size()) + " graphs, gold has " +
                    std::to_string(gold.size()));
  std::vector<std::pair<AmrGraph, AmrGraph>> pairs;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    auto pid = pred[i].meta("id"), gid = gold[i].meta("id");
    if (pid && gid && *pid != *gid) throw DataError("graph " + std::to_string(i + 1) + ": id '" + *pid + "' vs '" + *gid + "'");
    pairs.emplace_back(pred[i], gold[i]);
  }
  EvalOptions opt{a.d_thr, a.d_max, a.restarts, a.seed};
  const CorpusReport rep = corpus_scores(pairs, opt);
  const bool all = a.metric == "all";

  std::vector<std::string> lines;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = rep.pairs[i];
    json j{{"type", "pair"}, {"index", i}, {"id", graph_id(gold[i], i)}};
    if (all || a.metric == "ordinary") j["ordinary"] = match_json(p.ordinary);
    if (all || a.metric == "weighted") j["weighted"] = match_json(p.weighted);
    if (all || a.metric == "core") j["core"] = match_json(p.core);
    j["root_match"] = p.root_match;
    j["complete_match"] = p.complete_match;
    lines.push_back(j.dump());
  }
  json corpus{{"type", "corpus"},
              {"pairs", pairs.size()},
              {"d_thr", a.d_thr},
              {"d_max", a.d_max},
              {"restarts", a.restarts},
              {"seed", a.seed},
              {"weighted_pr_convention", "mass"},
              {"root_accuracy", rep.root_accuracy},
              {"complete_match", rep.complete_match}};
  if (all || a.metric == "ordinary") corpus["ordinary"] = match_json(rep.ordinary);
  if (all || a.metric == "weighted") corpus["weighted"] = match_json(rep.weighted);
  if (all || a.metric == "core") corpus["core"] = match_json(rep.core);
  lines.push_back(corpus.dump());

  if (a.format == "table") {
    std::cout << std::left << std::setw(22) << "metric" << std::right << std::setw(10) << "P" << std::setw(10) << "R"
              << std::setw(10) << "F1" << "\n";
    auto row = [](const std::string& name, const MatchResult& m) {
      std::cout << std::left << std::setw(22) << name << std::right << std::setw(10) << fixed(m.precision)
                << std::setw(10) << fixed(m.recall) << std::setw(10) << fixed(m.f1) << "\n";
    };
    if (all || a.metric == "ordinary") row("smatch", rep.ordinary);
    if (all || a.metric == "weighted") row("smatch-weighted(" + std::to_string(a.d_thr) + ")", rep.weighted);
    if (all || a.metric == "core") row("smatch-core(" + std::to_string(a.d_max) + ")", rep.core);
    std::cout << std::left << std::setw(22) << "root accuracy" << std::right << std::setw(30) << fixed(rep.root_accuracy)
              << "\n"
              << std::left << std::setw(22) << "complete match" << std::right << std::setw(30)
              << fixed(rep.complete_match) << "\n";
  } else {
    for (const auto& l : lines) std::cout << l << "\n";
  }
  if (!a.report.empty()) {
    Output out(a.report);
    for (const auto& l : lines) out.stream() << l << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------- linearize / stats / synth

struct LinearizeArgs {
  std::string input, output = "-", order = "relation-freq";
  std::uint64_t seed = 1;
};

int run_linearize(const LinearizeArgs& a) {
  const auto graphs = parse_penman(read_file(a.input));
  const auto freq = relation_frequency_table(graphs);
  OrderStrategy strategy{parse_order_kind(a.order), freq};
  Output out(a.output);
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    validate(graphs[i]);
    out.stream() << "# ::id " << graph_id(graphs[i], i) << "\n"
                 << format_actions(linearize(graphs[i], strategy, a.seed + i)) << "\n";
  }
  return kOk;
}

struct StatsArgs {
  std::string input, format = "table";
  std::uint64_t seed = 1;
};

int run_stats(const StatsArgs& a) {
  const auto graphs = parse_penman(read_file(a.input));
  const auto hist = root_distance_histogram(graphs);
  std::size_t nodes = 0, edges = 0, reentrant = 0;
  int depth = 0;
  for (const auto& g : graphs) {
    nodes += g.nodes.size();
    edges += g.edges.size();
    depth = std::max(depth, graph_depth(g));
    std::vector<int> indeg(g.nodes.size(), 0);
    for (const auto& e : g.edges) ++indeg[e.child];
    for (int d : indeg) reentrant += d > 1;
  }
  if (a.format == "json") {
    json h = json::object();
    for (const auto& [d, c] : hist) h[std::to_string(d)] = c;
    std::cout << json{{"graphs", graphs.size()}, {"nodes", nodes},         {"edges", edges},
                      {"reentrant_nodes", reentrant}, {"max_depth", depth}, {"root_distance", h}}
                     .dump()
              << "\n";
    return kOk;
  }
  std::cout << "graphs " << graphs.size() << "\nnodes " << nodes << "\nedges " << edges << "\nreentrant nodes "
            << reentrant << "\nmax depth " << depth << "\n\ndistance  nodes  share\n";
  long max_count = 1;
  for (const auto& [d, c] : hist) max_count = std::max(max_count, c);
  for (const auto& [d, c] : hist) {
    const double share = nodes ? static_cast<double>(c) / static_cast<double>(nodes) : 0.0;
    std::cout << std::setw(8) << d << std::setw(7) << c << std::setw(7) << fixed(share, 3) << "  "
              << std::string(static_cast<std::size_t>(40 * c / max_count), '#') << "\n";
  }
  return kOk;
}

struct SynthArgs {
  std::size_t count = 20, max_tokens = 8;
  std::string amr_out = "-", annotations_out, alignments_out;
  std::uint64_t seed = 1;
};

int run_synth(const SynthArgs& a) {
  SyntheticOptions opt;
  opt.max_tokens = a.max_tokens;
  const auto corpus = synthetic_corpus(a.count, a.seed, opt);
  Output out(a.amr_out);
  for (const auto& ex : corpus) out.stream() << serialize_penman(ex.graph, true, true) << "\n\n";
  if (!a.annotations_out.empty()) {
    Output ann(a.annotations_out);
    for (const auto& ex : corpus) ann.stream() << annotation_to_json(ex.sentence).dump() << "\n";
  }
  if (!a.alignments_out.empty()) Output(a.alignments_out).stream() << format_alignments(corpus);
  return kOk;
}

struct GradArgs {
  std::string preset = "toy";
  std::size_t per_param = 0;
  double h = 1e-5, tolerance = 1e-4;
  std::uint64_t seed = 1;
};

int run_gradcheck(const GradArgs& a) {
  const ModelGradCheck r = model_gradcheck(ModelConfig::named(a.preset), a.seed, a.per_param, a.h);
  const auto& rep = r.report;
  std::cout << "parameters       " << r.parameters << " (" << rep.checked << " coordinates checked)\n"
            << "step             " << r.step << "\n"
            << "max rel error    " << rep.max_tensor_error << " (per tensor, worst " << rep.worst_tensor << ")\n"
            << "max coord error  " << rep.max_rel_error << " at " << rep.worst_param << "[" << rep.worst_index
            << "] analytic " << rep.worst_analytic << " numeric " << rep.worst_numeric << "\n"
            << "seconds          " << fixed(r.seconds, 2) << "\n";
  const bool ok = rep.max_tensor_error < a.tolerance;
  std::cout << (ok ? "ok" : "FAILED") << "\n";
  return ok ? kOk : kInternal;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GSP top-down AMR parser and core-semantics Smatch"};
  app.require_subcommand(1);
  app.set_version_flag("--version", [] {
    std::ostringstream s;
    s << "gsp " << kVersion;
    for (const char* p : {"reference", "desk", "toy"}) s << "\nconfig " << p << " " << config_hash(ModelConfig::named(p));
    return s.str();
  });

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "train a parser and write a checkpoint");
  train_cmd->add_option("--train", ta.train, "training graphs (PENMAN)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--annotations", ta.annotations, "annotation JSON-lines for the training graphs");
  train_cmd->add_option("--alignments", ta.alignments, "token/node alignments for the map table");
  train_cmd->add_option("--dev", ta.dev, "development graphs (PENMAN)");
  train_cmd->add_option("--dev-annotations", ta.dev_annotations, "annotation JSON-lines for the dev graphs");
  train_cmd->add_option("--out", ta.out, "checkpoint path")->required();
  train_cmd->add_option("--log", ta.log, "training log (JSON-lines, - for stdout)");
  train_cmd->add_option("--preset", ta.preset, "model size")->check(CLI::IsMember({"reference", "desk", "toy"}));
  train_cmd->add_option("--model-config", ta.model_config, "JSON overrides for the model config");
  train_cmd->add_option("--train-config", ta.train_config, "JSON overrides for the training config");
  train_cmd->add_option("--epochs", ta.epochs);
  train_cmd->add_option("--patience", ta.patience, "epochs without dev improvement (0 disables)");
  train_cmd->add_option("--warmup", ta.warmup);
  train_cmd->add_option("--batch", ta.batch);
  train_cmd->add_option("--lr-scale", ta.lr_scale);
  train_cmd->add_option("--unk-rate", ta.unk_rate);
  train_cmd->add_option("--order", ta.order, "sibling order")->check(CLI::IsMember({"relation-freq", "random", "combined"}));
  train_cmd->add_option("--seed", ta.seed);

  ParseArgs pa;
  auto* parse_cmd = app.add_subcommand("parse", "parse sentences with a trained checkpoint");
  parse_cmd->add_option("--checkpoint", pa.checkpoint)->required()->check(CLI::ExistingFile);
  parse_cmd->add_option("--input", pa.input, "sentence JSON-lines")->required()->check(CLI::ExistingFile);
  parse_cmd->add_option("--output", pa.output, "PENMAN output (- for stdout)");
  parse_cmd->add_option("--beam", pa.beam, "beam size (1 = greedy)")->check(CLI::PositiveNumber);
  parse_cmd->add_option("--step-cap", pa.step_cap, "maximum expansion steps (0 = 3n+10)");
  parse_cmd->add_flag("--raw", pa.raw, "skip sense and wiki post-processing");
  parse_cmd->add_option("--seed", pa.seed);

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "score predicted graphs against gold graphs");
  eval_cmd->add_option("--pred", ea.pred)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--gold", ea.gold)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--metric", ea.metric)->check(CLI::IsMember({"all", "ordinary", "weighted", "core"}));
  eval_cmd->add_option("--d-thr", ea.d_thr, "weighted Smatch threshold")->check(CLI::NonNegativeNumber);
  eval_cmd->add_option("--d-max", ea.d_max, "core Smatch depth")->check(CLI::NonNegativeNumber);
  eval_cmd->add_option("--restarts", ea.restarts, "hill-climbing restarts")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--report", ea.report, "write the JSON-lines report here");
  eval_cmd->add_option("--format", ea.format, "stdout format")->check(CLI::IsMember({"table", "json"}));
  eval_cmd->add_option("--seed", ea.seed);

  LinearizeArgs la;
  auto* lin_cmd = app.add_subcommand("linearize", "print spanning action sequences");
  lin_cmd->add_option("--input", la.input)->required()->check(CLI::ExistingFile);
  lin_cmd->add_option("--output", la.output);
  lin_cmd->add_option("--order", la.order)->check(CLI::IsMember({"relation-freq", "random", "combined"}));
  lin_cmd->add_option("--seed", la.seed);

  StatsArgs sa;
  auto* stats_cmd = app.add_subcommand("stats", "corpus statistics and root-distance histogram");
  stats_cmd->add_option("--input", sa.input)->required()->check(CLI::ExistingFile);
  stats_cmd->add_option("--format", sa.format)->check(CLI::IsMember({"table", "json"}));
  stats_cmd->add_option("--seed", sa.seed);

  GradArgs ga;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of the model loss");
  grad_cmd->add_option("--preset", ga.preset)->check(CLI::IsMember({"reference", "desk", "toy"}));
  grad_cmd->add_option("--per-param", ga.per_param, "coordinates sampled per tensor (0 = all)");
  grad_cmd->add_option("--step", ga.h, "finite-difference step");
  grad_cmd->add_option("--tolerance", ga.tolerance);
  grad_cmd->add_option("--seed", ga.seed);

  SynthArgs ya;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus");
  synth_cmd->add_option("--count", ya.count)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--max-tokens", ya.max_tokens)->check(CLI::Range(4, 64));
  synth_cmd->add_option("--amr", ya.amr_out, "PENMAN output (- for stdout)");
  synth_cmd->add_option("--annotations", ya.annotations_out);
  synth_cmd->add_option("--alignments", ya.alignments_out);
  synth_cmd->add_option("--seed", ya.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*train_cmd) return run_train(ta);
    if (*parse_cmd) return run_parse(pa);
    if (*eval_cmd) return run_eval(ea);
    if (*lin_cmd) return run_linearize(la);
    if (*stats_cmd) return run_stats(sa);
    if (*grad_cmd) return run_gradcheck(ga);
    if (*synth_cmd) return run_synth(ya);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const IntegrityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const StructureError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const SizeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
