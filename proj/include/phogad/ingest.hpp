#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "phogad/graph.hpp"

namespace phogad {

struct FlowRecord {
  std::string src_key;
  std::string dst_key;
  std::vector<double> features;
  Label label = Label::normal;
};

// Which columns of a flow CSV feed the graph. Numeric columns come first in the
// feature vector, then one one-hot block per categorical column in file order.
// Values outside a declared vocabulary encode as an all-zero block.
struct FlowSchema {
  std::string key_a;
  std::string key_b;
  std::string label;
  std::vector<std::string> anomaly_values;
  std::vector<std::string> numeric;
  std::vector<std::pair<std::string, std::vector<std::string>>> categorical;

  static FlowSchema from_json(const nlohmann::ordered_json& j);
  static FlowSchema load(const std::filesystem::path& path);
  nlohmann::ordered_json to_json() const;
  std::size_t feature_count() const;
};

std::vector<FlowRecord> parse_flow_csv(const std::filesystem::path& path, const FlowSchema& schema);

struct EmailCorpus {
  std::vector<FlowRecord> records;
  std::vector<std::string> vocabulary;
};

// Ham files are normal, spam files anomalous; files are read in name order,
// ham first. Sender/recipient come from the From and first To address.
EmailCorpus parse_email_corpus(const std::filesystem::path& ham_dir, const std::filesystem::path& spam_dir,
                               std::size_t vocab_size);

// Lowercased alphanumeric runs.
std::vector<std::string> tokenize(std::string_view text);

struct FeatureRange {
  double min = 0.0;
  double max = 0.0;
};

struct NormalizedRecords {
  std::vector<FlowRecord> records;
  std::vector<FeatureRange> ranges;
};

// Per-dimension min-max scaling to [0, 1]; constant dimensions map to 0.
NormalizedRecords normalize_features(std::vector<FlowRecord> records);
// Reuses stored ranges (e.g. on held-out data); results are clamped to [0, 1].
void apply_normalization(std::vector<FlowRecord>& records, std::span<const FeatureRange> ranges);

struct SamplingSpec {
  double target_anomaly_proportion = 0.1;
  std::uint64_t seed = 0;
};

// Largest anomaly count whose proportion does not exceed the target.
std::size_t max_anomalies_for(std::size_t normal_count, double target);

// Keeps every normal record and a seeded uniform subset of anomalies, in
// original order. Throws TargetUnreachable when not even one anomaly fits.
std::vector<FlowRecord> downsample_anomalies(const std::vector<FlowRecord>& records, const SamplingSpec& spec);

double anomaly_proportion(std::span<const FlowRecord> records);

// Nodes are the distinct keys in order of first appearance; node attributes
// are derived from incident edges.
BehaviorGraph records_to_graph(const std::vector<FlowRecord>& records);

}  // namespace phogad
