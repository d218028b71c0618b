#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "phogad/graph.hpp"
#include "phogad/homology.hpp"
#include "phogad/ingest.hpp"
#include "phogad/synthetic.hpp"
#include "phogad/train_eval.hpp"

namespace phogad {

struct DatasetSpec {
  enum class Kind { flow, email, synthetic, graph };
  Kind kind = Kind::flow;
  std::string input;   // flow CSV, or a graph directory for kind graph
  std::string schema;  // flow schema JSON
  std::string ham, spam;
  std::size_t vocab = 500;
  bool normalize = true;  // min-max scaling of flow features
  SyntheticSpec synthetic;

  static Kind parse_kind(std::string_view text);
  static std::string kind_name(Kind kind);
};

// Everything one pipeline run needs. Paths are kept as written and resolved
// against `base_dir` (the manifest's directory) when used, so snapshots stay
// free of machine-specific prefixes.
struct RunManifest {
  DatasetSpec dataset;
  std::optional<SamplingSpec> sampling;  // no down-sampling when absent
  PhoConfig ph;
  TrainConfig train;
  FocalConfig focal;
  std::uint64_t init_seed = 0;
  std::string output = "out";
  std::filesystem::path base_dir = ".";

  static RunManifest from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
  static RunManifest load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  std::filesystem::path resolve(const std::string& p) const;
  std::filesystem::path output_dir() const { return resolve(output); }
  // Throws io_error naming the first referenced input that does not exist.
  void check_paths() const;
};

// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_fingerprint(const std::filesystem::path& path);

// Writes manifest.json into dir.
void write_manifest_snapshot(const RunManifest& m, const std::filesystem::path& dir);
void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

struct IngestResult {
  BehaviorGraph graph;
  nlohmann::json provenance;
};

IngestResult ingest_dataset(const RunManifest& m);

// Each stage writes its artifacts plus the manifest snapshot into `out`.
BehaviorGraph cmd_ingest(const RunManifest& m, const std::filesystem::path& out);
PhOutcome cmd_ph(const RunManifest& m, const BehaviorGraph& g, const std::filesystem::path& out);
TrainResult cmd_train(const RunManifest& m, const BehaviorGraph& g, const std::filesystem::path& out);

enum class EvalSplit { train, val, test, all };
EvalSplit parse_eval_split(std::string_view text);

// Rebuilds the split recorded in the checkpoint and scores it.
EvalReport cmd_eval(const std::filesystem::path& checkpoint, const BehaviorGraph& g, EvalSplit split);

// ingest -> ph -> train -> test-split evaluation. Writes <output>/report.json.
nlohmann::json cmd_run(const RunManifest& m);
// ingest -> ph -> the five ablation rows. Writes <output>/ablation.csv.
std::vector<AblationRow> cmd_ablate(const RunManifest& m);

}  // namespace phogad
