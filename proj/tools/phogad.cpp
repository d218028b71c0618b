// phogad: command-line front end for the anomaly-detection pipeline.
// Exit codes: 0 success, 2 usage error, 1 runtime error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "phogad/error.hpp"
#include "phogad/graph_io.hpp"
#include "phogad/log.hpp"
#include "phogad/pipeline.hpp"

namespace fs = std::filesystem;
using namespace phogad;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by every subcommand that can start from a manifest.
struct Overrides {
  std::string manifest;
  std::string out;
  // dataset
  std::string input, schema, ham, spam, graph;
  std::optional<std::size_t> vocab;
  bool synthetic = false;
  bool no_normalize = false;
  std::optional<double> anomaly_prop;
  std::optional<std::uint64_t> sampling_seed;
  // ph
  std::optional<double> alpha, quantile;
  std::optional<std::size_t> max_points;
  std::string rule;
  std::optional<std::uint64_t> ph_seed;
  // train
  std::optional<std::size_t> epochs, patience;
  std::optional<double> lr, dropout, train_fraction, val_fraction;
  std::optional<std::uint64_t> train_seed, init_seed;
  bool no_weights = false, no_disentangle = false;
  std::optional<double> delta, gamma;
  bool standard_focal = false;
};

void add_dataset_flags(CLI::App* app, Overrides& o) {
  app->add_option("--input", o.input, "flow CSV");
  app->add_option("--schema", o.schema, "flow schema JSON");
  app->add_option("--ham", o.ham, "directory of normal e-mails");
  app->add_option("--spam", o.spam, "directory of spam e-mails");
  app->add_option("--vocab", o.vocab, "e-mail vocabulary size");
  app->add_flag("--synthetic", o.synthetic, "generate the synthetic ring dataset");
  app->add_flag("--no-normalize", o.no_normalize, "keep raw flow feature scales");
  app->add_option("--anomaly-prop", o.anomaly_prop, "target anomaly proportion after down-sampling");
  app->add_option("--sampling-seed,--seed", o.sampling_seed, "down-sampling seed");
}

void add_ph_flags(CLI::App* app, Overrides& o, bool with_seed_alias) {
  app->add_option("--alpha", o.alpha, "attribute optimization weight in [0, 1]");
  app->add_option("--quantile", o.quantile, "pairwise-distance quantile used as the filtration cutoff");
  app->add_option("--max-points", o.max_points, "subsample size for the point cloud");
  app->add_option("--rule", o.rule, "mean_plus_std or top_fraction:<f>");
  if (with_seed_alias)
    app->add_option("--ph-seed,--seed", o.ph_seed, "point-cloud subsampling seed");
  else
    app->add_option("--ph-seed", o.ph_seed, "point-cloud subsampling seed");
}

void add_train_flags(CLI::App* app, Overrides& o, bool with_seed_alias) {
  app->add_option("--epochs", o.epochs);
  app->add_option("--patience", o.patience, "early stopping patience on validation F1");
  app->add_option("--lr", o.lr, "Adam learning rate");
  app->add_option("--dropout", o.dropout);
  app->add_option("--train-fraction", o.train_fraction);
  app->add_option("--val-fraction", o.val_fraction);
  if (with_seed_alias)
    app->add_option("--train-seed,--seed", o.train_seed, "split and dropout seed");
  else
    app->add_option("--train-seed", o.train_seed, "split and dropout seed");
  app->add_option("--init-seed", o.init_seed, "parameter initialization seed");
  app->add_flag("--no-weights", o.no_weights, "treat every adjacency weight as 1");
  app->add_flag("--no-disentangle", o.no_disentangle, "replace the self part by the neighbor part");
  app->add_option("--delta", o.delta, "focal loss class weight");
  app->add_option("--gamma", o.gamma, "focal loss focusing exponent");
  app->add_flag("--standard-focal", o.standard_focal, "use the non-negative normal-class focal term");
}

RunManifest build_manifest(const Overrides& o, bool dataset_required) {
  RunManifest m;
  if (!o.manifest.empty()) {
    if (!fs::exists(o.manifest)) throw UsageError("--manifest: file not found: " + o.manifest);
    m = RunManifest::load(o.manifest);
  }
  auto& d = m.dataset;
  if (!o.graph.empty()) {
    d = DatasetSpec{};
    d.kind = DatasetSpec::Kind::graph;
    d.input = o.graph;
    m.base_dir = ".";
  } else if (o.synthetic) {
    d.kind = DatasetSpec::Kind::synthetic;
  } else if (!o.ham.empty() || !o.spam.empty()) {
    if (o.ham.empty()) throw UsageError("--ham is required together with --spam");
    if (o.spam.empty()) throw UsageError("--spam is required together with --ham");
    d = DatasetSpec{};
    d.kind = DatasetSpec::Kind::email;
    d.ham = o.ham;
    d.spam = o.spam;
    m.base_dir = ".";
  } else if (!o.input.empty() || !o.schema.empty()) {
    if (o.schema.empty()) throw UsageError("--schema is required for flow input");
    if (o.input.empty()) throw UsageError("--input is required for flow input");
    d = DatasetSpec{};
    d.kind = DatasetSpec::Kind::flow;
    d.input = o.input;
    d.schema = o.schema;
    m.base_dir = ".";
  } else if (o.manifest.empty() && dataset_required) {
    throw UsageError("no dataset: pass --schema with --input, --ham with --spam, --synthetic, or --manifest");
  }
  if (o.vocab) d.vocab = *o.vocab;
  if (o.no_normalize) d.normalize = false;
  if (o.anomaly_prop) m.sampling = SamplingSpec{*o.anomaly_prop, o.sampling_seed.value_or(m.sampling ? m.sampling->seed : 0)};
  else if (o.sampling_seed && m.sampling) m.sampling->seed = *o.sampling_seed;

  if (o.alpha) m.ph.alpha = *o.alpha;
  if (o.quantile) m.ph.max_scale_quantile = *o.quantile;
  if (o.max_points) m.ph.max_points = *o.max_points;
  if (o.ph_seed) m.ph.seed = *o.ph_seed;
  try {
    if (!o.rule.empty()) m.ph.rule = SelectionRule::parse(o.rule);
    m.ph.validate();
  } catch (const Error& ex) {
    throw UsageError(ex.what());
  }

  if (o.epochs) m.train.epochs = *o.epochs;
  if (o.patience) m.train.early_stop_patience = *o.patience;
  if (o.lr) m.train.learning_rate = *o.lr;
  if (o.dropout) m.train.dropout = *o.dropout;
  if (o.train_fraction) m.train.train_fraction = *o.train_fraction;
  if (o.val_fraction) m.train.val_fraction = *o.val_fraction;
  if (o.train_seed) m.train.seed = *o.train_seed;
  if (o.init_seed) m.init_seed = *o.init_seed;
  if (o.no_weights) m.train.flags.use_weights = false;
  if (o.no_disentangle) m.train.flags.use_disentangle = false;
  if (o.delta) m.focal.delta = *o.delta;
  if (o.gamma) m.focal.gamma = *o.gamma;
  if (o.standard_focal) m.focal.standard_focal = true;
  try {
    m.train.validate();
  } catch (const Error& ex) {
    throw UsageError(ex.what());
  }
  if (m.focal.gamma < 0.0) throw UsageError("--gamma must be non-negative");
  if (!o.out.empty()) {
    // --out is taken relative to the working directory, not the manifest.
    m.output = fs::absolute(o.out).lexically_normal().string();
  }
  return m;
}

fs::path require_out(const Overrides& o) {
  if (o.out.empty()) throw UsageError("--out is required");
  return o.out;
}

BehaviorGraph load_graph_arg(const std::string& dir) {
  if (dir.empty()) throw UsageError("--graph is required");
  return read_graph_dir(dir);
}

int run(int argc, char** argv) {
  CLI::App app{"PhoGAD: persistent-homology-guided anomalous edge detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "phogad 1.0.0");
  Overrides o;
  std::string checkpoint, split = "val";

  auto* ingest = app.add_subcommand("ingest", "parse a dataset into a behavior graph directory");
  ingest->add_option("--manifest", o.manifest, "run manifest JSON");
  ingest->add_option("--out", o.out, "output graph directory");
  add_dataset_flags(ingest, o);

  auto* ph = app.add_subcommand("ph", "persistence diagram, selection and attribute optimization");
  ph->add_option("--manifest", o.manifest);
  ph->add_option("--graph", o.graph, "graph directory")->required();
  ph->add_option("--out", o.out, "output directory")->required();
  add_ph_flags(ph, o, true);

  auto* train = app.add_subcommand("train", "train the edge embedding network");
  train->add_option("--manifest", o.manifest);
  train->add_option("--graph", o.graph, "graph directory (usually the optimized one)")->required();
  train->add_option("--out", o.out, "output directory")->required();
  add_train_flags(train, o, true);

  auto* eval = app.add_subcommand("eval", "score a checkpoint on a graph");
  eval->add_option("--checkpoint", checkpoint, "checkpoint.json from train")->required();
  eval->add_option("--graph", o.graph, "graph directory")->required();
  eval->add_option("--split", split, "train, val, test or all")->check(CLI::IsMember({"train", "val", "test", "all"}));
  eval->add_option("--out", o.out, "write the report here instead of stdout");

  auto* run_cmd = app.add_subcommand("run", "ingest, ph, train and evaluate from one manifest");
  run_cmd->add_option("--manifest", o.manifest)->required();
  run_cmd->add_option("--out", o.out, "override the manifest output directory");

  auto* ablate = app.add_subcommand("ablate", "the five-row mechanism ablation");
  ablate->add_option("--manifest", o.manifest)->required();
  ablate->add_option("--out", o.out, "override the manifest output directory");
  add_train_flags(ablate, o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    return app.exit(ex) == 0 ? 0 : 2;
  }

  if (ingest->parsed()) {
    const auto m = build_manifest(o, true);
    const fs::path out = o.out.empty() ? m.output_dir() / "graph" : fs::path(o.out);
    const auto g = cmd_ingest(m, out);
    std::cout << out.string() << ": " << g.node_count() << " nodes, " << g.edge_count() << " edges, anomaly proportion "
              << anomaly_proportion(g) << '\n';
  } else if (ph->parsed()) {
    const auto m = build_manifest(o, false);
    const auto g = load_graph_arg(o.graph);
    const auto out = require_out(o);
    const auto r = cmd_ph(m, g, out);
    std::cout << out.string() << ": " << r.diagram.features.size() << " bars, " << r.selected.size()
              << " edges selected\n";
  } else if (train->parsed()) {
    const auto m = build_manifest(o, false);
    const auto g = load_graph_arg(o.graph);
    const auto out = require_out(o);
    const auto r = cmd_train(m, g, out);
    std::cout << out.string() << ": best validation F1 " << r.history.at(r.best_epoch).val.f1 << " at epoch "
              << r.best_epoch << '\n';
  } else if (eval->parsed()) {
    if (!fs::exists(checkpoint)) throw UsageError("--checkpoint: file not found: " + checkpoint);
    const auto g = load_graph_arg(o.graph);
    const auto report = cmd_eval(checkpoint, g, parse_eval_split(split));
    auto j = report.to_json();
    j["split"] = split;
    if (o.out.empty())
      std::cout << j.dump(2) << '\n';
    else
      write_json(j, o.out);
  } else if (run_cmd->parsed()) {
    const auto m = build_manifest(o, true);
    const auto report = cmd_run(m);
    std::cout << (m.output_dir() / "report.json").string() << ": F1 " << report.at("f1").get<double>() << '\n';
  } else if (ablate->parsed()) {
    const auto m = build_manifest(o, true);
    const auto rows = cmd_ablate(m);
    for (const auto& r : rows) std::cout << r.name << ": F1 " << r.report.f1 << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& ex) {
    log::error(ex.what());
    std::cerr << "Run with --help for usage.\n";
    return 2;
  } catch (const std::exception& ex) {
    log::error(ex.what());
    return 1;
  }
}
