#include "phogad/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>

#include "phogad/error.hpp"
#include "phogad/graph_io.hpp"
#include "phogad/log.hpp"

namespace phogad {
namespace fs = std::filesystem;
using nlohmann::json;

DatasetSpec::Kind DatasetSpec::parse_kind(std::string_view text) {
  if (text == "flow") return Kind::flow;
  if (text == "email") return Kind::email;
  if (text == "synthetic") return Kind::synthetic;
  if (text == "graph") return Kind::graph;
  throw Error(Errc::invalid_argument, "unknown dataset kind '" + std::string(text) + "'");
}

std::string DatasetSpec::kind_name(Kind kind) {
  switch (kind) {
    case Kind::flow: return "flow";
    case Kind::email: return "email";
    case Kind::synthetic: return "synthetic";
    case Kind::graph: return "graph";
  }
  return "flow";
}

RunManifest RunManifest::from_json(const json& j, const fs::path& base_dir) {
  RunManifest m;
  m.base_dir = base_dir;
  try {
    const json& d = j.at("dataset");
    m.dataset.kind = DatasetSpec::parse_kind(d.at("kind").get<std::string>());
    m.dataset.input = d.value("input", "");
    m.dataset.schema = d.value("schema", "");
    m.dataset.ham = d.value("ham", "");
    m.dataset.spam = d.value("spam", "");
    m.dataset.vocab = d.value("vocab", m.dataset.vocab);
    m.dataset.normalize = d.value("normalize", m.dataset.normalize);
    if (d.contains("synthetic")) m.dataset.synthetic = SyntheticSpec::from_json(d.at("synthetic"));
    if (j.contains("sampling") && !j.at("sampling").is_null()) {
      SamplingSpec s;
      s.target_anomaly_proportion = j.at("sampling").at("anomaly_proportion").get<double>();
      s.seed = j.at("sampling").value("seed", std::uint64_t{0});
      m.sampling = s;
    }
    if (j.contains("ph")) m.ph = PhoConfig::from_json(j.at("ph"));
    if (j.contains("train")) m.train = TrainConfig::from_json(j.at("train"));
    if (j.contains("focal")) m.focal = FocalConfig::from_json(j.at("focal"));
    m.init_seed = j.value("init_seed", m.init_seed);
    m.output = j.value("output", m.output);
  } catch (const json::exception& ex) {
    throw Error(Errc::bad_format, std::string("manifest: ") + ex.what());
  }
  switch (m.dataset.kind) {
    case DatasetSpec::Kind::flow:
      if (m.dataset.input.empty() || m.dataset.schema.empty())
        throw Error(Errc::invalid_argument, "flow datasets need dataset.input and dataset.schema");
      break;
    case DatasetSpec::Kind::email:
      if (m.dataset.ham.empty() || m.dataset.spam.empty())
        throw Error(Errc::invalid_argument, "email datasets need dataset.ham and dataset.spam");
      break;
    case DatasetSpec::Kind::graph:
      if (m.dataset.input.empty()) throw Error(Errc::invalid_argument, "graph datasets need dataset.input");
      break;
    case DatasetSpec::Kind::synthetic: break;
  }
  return m;
}

RunManifest RunManifest::load(const fs::path& path) {
  return from_json(read_json(path), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

json RunManifest::to_json() const {
  json d{{"kind", DatasetSpec::kind_name(dataset.kind)}};
  switch (dataset.kind) {
    case DatasetSpec::Kind::flow:
      d["input"] = dataset.input;
      d["schema"] = dataset.schema;
      d["normalize"] = dataset.normalize;
      break;
    case DatasetSpec::Kind::email:
      d["ham"] = dataset.ham;
      d["spam"] = dataset.spam;
      d["vocab"] = dataset.vocab;
      break;
    case DatasetSpec::Kind::synthetic: d["synthetic"] = dataset.synthetic.to_json(); break;
    case DatasetSpec::Kind::graph: d["input"] = dataset.input; break;
  }
  json j{{"dataset", d},
         {"ph", ph.to_json()},
         {"train", train.to_json()},
         {"focal", focal.to_json()},
         {"init_seed", init_seed},
         {"output", output}};
  j["sampling"] = sampling ? json{{"anomaly_proportion", sampling->target_anomaly_proportion}, {"seed", sampling->seed}}
                           : json(nullptr);
  return j;
}

fs::path RunManifest::resolve(const std::string& p) const {
  const fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

void RunManifest::check_paths() const {
  auto need = [&](const std::string& p, const char* field) {
    if (!fs::exists(resolve(p))) throw Error(Errc::io_error, std::string(field) + " not found: " + resolve(p).string());
  };
  switch (dataset.kind) {
    case DatasetSpec::Kind::flow:
      need(dataset.input, "dataset.input");
      need(dataset.schema, "dataset.schema");
      break;
    case DatasetSpec::Kind::email:
      need(dataset.ham, "dataset.ham");
      need(dataset.spam, "dataset.spam");
      break;
    case DatasetSpec::Kind::graph: need(dataset.input, "dataset.input"); break;
    case DatasetSpec::Kind::synthetic: break;
  }
}

std::string file_fingerprint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot read " + path.string());
  try {
    return json::parse(std::string(std::istreambuf_iterator<char>(in), {}));
  } catch (const json::parse_error& ex) {
    throw Error(Errc::bad_format, path.string() + ": " + ex.what());
  }
}

void write_manifest_snapshot(const RunManifest& m, const fs::path& dir) {
  fs::create_directories(dir);
  write_json(m.to_json(), dir / "manifest.json");
}

namespace {

// Fingerprints of every regular file below a directory, keyed by relative path.
json directory_fingerprints(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  json out = json::object();
  for (const auto& f : files) out[fs::relative(f, dir).generic_string()] = file_fingerprint(f);
  return out;
}

}  // namespace

IngestResult ingest_dataset(const RunManifest& m) {
  m.check_paths();
  IngestResult r;
  json sources = json::object();
  std::vector<FlowRecord> records;
  switch (m.dataset.kind) {
    case DatasetSpec::Kind::graph: {
      r.graph = read_graph_dir(m.resolve(m.dataset.input));
      r.provenance = {{"kind", "graph"}, {"sources", directory_fingerprints(m.resolve(m.dataset.input))}};
      if (m.sampling) log::warn("sampling is ignored for an already built graph");
      r.provenance["anomaly_proportion"] = anomaly_proportion(r.graph);
      return r;
    }
    case DatasetSpec::Kind::flow: {
      const auto schema = FlowSchema::load(m.resolve(m.dataset.schema));
      records = parse_flow_csv(m.resolve(m.dataset.input), schema);
      sources[m.dataset.input] = file_fingerprint(m.resolve(m.dataset.input));
      sources[m.dataset.schema] = file_fingerprint(m.resolve(m.dataset.schema));
      break;
    }
    case DatasetSpec::Kind::email: {
      auto corpus = parse_email_corpus(m.resolve(m.dataset.ham), m.resolve(m.dataset.spam), m.dataset.vocab);
      records = std::move(corpus.records);
      sources[m.dataset.ham] = directory_fingerprints(m.resolve(m.dataset.ham));
      sources[m.dataset.spam] = directory_fingerprints(m.resolve(m.dataset.spam));
      r.provenance["vocabulary_size"] = corpus.vocabulary.size();
      break;
    }
    case DatasetSpec::Kind::synthetic: records = make_synthetic_records(m.dataset.synthetic); break;
  }
  const std::size_t before = records.size();
  const double proportion_before = anomaly_proportion(records);
  if (m.sampling) records = downsample_anomalies(records, *m.sampling);
  if (m.dataset.kind == DatasetSpec::Kind::flow && m.dataset.normalize) records = normalize_features(std::move(records)).records;
  r.graph = records_to_graph(records);

  r.provenance["kind"] = DatasetSpec::kind_name(m.dataset.kind);
  r.provenance["sources"] = sources;
  r.provenance["records_before_sampling"] = before;
  r.provenance["anomaly_proportion_before_sampling"] = proportion_before;
  r.provenance["records"] = records.size();
  r.provenance["sampling"] = m.sampling ? json{{"target", m.sampling->target_anomaly_proportion}, {"seed", m.sampling->seed}}
                                        : json(nullptr);
  r.provenance["anomaly_proportion"] = anomaly_proportion(records);
  log::info("ingested ", records.size(), " records into ", r.graph.node_count(), " nodes; anomaly proportion ",
            r.provenance["anomaly_proportion"].get<double>());
  return r;
}

BehaviorGraph cmd_ingest(const RunManifest& m, const fs::path& out) {
  auto r = ingest_dataset(m);
  write_graph_dir(r.graph, out);
  write_json(r.provenance, out / "provenance.json");
  write_manifest_snapshot(m, out);
  return std::move(r.graph);
}

PhOutcome cmd_ph(const RunManifest& m, const BehaviorGraph& g, const fs::path& out) {
  auto ph = run_persistent_homology(g, m.ph);
  fs::create_directories(out);
  write_diagram_csv(ph.diagram, out / "diagram.csv");
  json meta = diagram_metadata(ph.diagram);
  meta["rule"] = m.ph.rule.to_string();
  meta["config"] = m.ph.to_json();
  meta["selected_edges"] = ph.selected.size();
  write_json(meta, out / "diagram.json");

  json comp{{"selected_edges", ph.selected.size()}, {"global_anomaly_fraction", anomaly_proportion(g)}};
  if (ph.selected.empty()) {
    log::warn("no persistent structure selected; attributes left unchanged");
    comp["anomalous"] = 0;
    comp["normal"] = 0;
    comp["anomaly_fraction"] = nullptr;
    comp["normal_fraction"] = nullptr;
  } else {
    const auto c = structure_composition(g, ph.selected);
    comp["anomalous"] = c.anomalous;
    comp["normal"] = c.normal;
    comp["anomaly_fraction"] = c.anomaly_fraction;
    comp["normal_fraction"] = c.normal_fraction;
  }
  write_json(comp, out / "composition.json");
  write_graph_dir(ph.optimized, out / "graph-opt", json{{"alpha", m.ph.alpha}});
  write_manifest_snapshot(m, out);
  write_manifest_snapshot(m, out / "graph-opt");
  log::info("persistence: ", ph.diagram.features.size(), " bars, ", ph.selected.size(), " edges selected");
  return ph;
}

namespace {

json training_meta(const RunManifest& m, const TrainResult& r, const BehaviorGraph& g) {
  return json{{"train", m.train.to_json()},
              {"focal", m.focal.to_json()},
              {"init_seed", m.init_seed},
              {"best_epoch", r.best_epoch},
              {"epochs_run", r.history.size()},
              {"edge_count", g.edge_count()}};
}

}  // namespace

TrainResult cmd_train(const RunManifest& m, const BehaviorGraph& g, const fs::path& out) {
  const auto adj = EdgeAdjacency::build(g);
  const auto w = compute_adjacency_weights(g, adj);
  auto r = train(g, adj, w, m.init_seed, m.train, m.focal);
  fs::create_directories(out);
  save_checkpoint(r.net, out / "checkpoint.json", training_meta(m, r, g));
  write_history_csv(r.history, out / "history.csv");
  json report{{"best_epoch", r.best_epoch},
              {"validation", r.history.at(r.best_epoch).val.to_json()},
              {"test", evaluate(r.net, g, adj, w, r.split.test).to_json()}};
  write_json(report, out / "report.json");
  write_manifest_snapshot(m, out);
  log::info("trained ", r.history.size(), " epochs; best validation F1 ", r.history.at(r.best_epoch).val.f1, " at epoch ",
            r.best_epoch);
  return r;
}

EvalSplit parse_eval_split(std::string_view text) {
  if (text == "train") return EvalSplit::train;
  if (text == "val") return EvalSplit::val;
  if (text == "test") return EvalSplit::test;
  if (text == "all") return EvalSplit::all;
  throw Error(Errc::invalid_argument, "split must be train, val, test or all");
}

EvalReport cmd_eval(const fs::path& checkpoint, const BehaviorGraph& g, EvalSplit which) {
  json meta;
  const auto net = load_checkpoint(checkpoint, &meta);
  if (net.input_dim() != g.edge_dim())
    throw Error(Errc::dimension_mismatch, "checkpoint expects " + std::to_string(net.input_dim()) +
                                              " edge attributes, graph has " + std::to_string(g.edge_dim()));
  const auto adj = EdgeAdjacency::build(g);
  const auto w = compute_adjacency_weights(g, adj);
  std::vector<EdgeId> ids;
  if (which == EvalSplit::all) {
    for (const auto& e : g.edges()) ids.push_back(e.id);
  } else {
    if (!meta.contains("train")) throw Error(Errc::bad_format, "checkpoint carries no split metadata");
    const auto cfg = TrainConfig::from_json(meta.at("train"));
    const auto split = stratified_split(g, cfg.train_fraction, cfg.val_fraction, cfg.seed);
    ids = which == EvalSplit::train ? split.train : which == EvalSplit::val ? split.val : split.test;
  }
  return evaluate(net, g, adj, w, ids);
}

namespace {

struct Staged {
  BehaviorGraph graph;
  PhOutcome ph;
};

Staged ingest_and_ph(const RunManifest& m) {
  const fs::path out = m.output_dir();
  fs::create_directories(out);
  Staged s;
  s.graph = cmd_ingest(m, out / "graph");
  s.ph = cmd_ph(m, s.graph, out / "ph");
  return s;
}

}  // namespace

json cmd_run(const RunManifest& m) {
  const fs::path out = m.output_dir();
  const auto staged = ingest_and_ph(m);
  const auto trained = cmd_train(m, staged.ph.optimized, out / "train");
  const auto adj = EdgeAdjacency::build(staged.ph.optimized);
  const auto w = compute_adjacency_weights(staged.ph.optimized, adj);
  const auto test = evaluate(trained.net, staged.ph.optimized, adj, w, trained.split.test);
  json report = test.to_json();
  report["split"] = "test";
  report["edges"] = trained.split.test.size();
  report["best_epoch"] = trained.best_epoch;
  report["selected_edges"] = staged.ph.selected.size();
  write_json(report, out / "report.json");
  write_manifest_snapshot(m, out);
  return report;
}

std::vector<AblationRow> cmd_ablate(const RunManifest& m) {
  const fs::path out = m.output_dir();
  const auto staged = ingest_and_ph(m);
  auto rows = run_ablation(staged.graph, staged.ph, m.init_seed, m.train, m.focal);
  write_ablation_csv(rows, out / "ablation.csv");
  write_manifest_snapshot(m, out);
  return rows;
}

}  // namespace phogad
