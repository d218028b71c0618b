#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "phogad/graph.hpp"
#include "phogad/ingest.hpp"

namespace phogad {

// Ring of entities cut into equal arcs. Normal flows join nearby entities of
// the same arc and carry attributes from that arc's Gaussian cluster; anomalous
// flows join entities of different arcs and carry uniform [0, 1] attributes.
struct SyntheticSpec {
  std::size_t node_count = 300;
  std::size_t normal_edges = 2000;
  double anomaly_proportion = 0.10;  // of all edges
  std::size_t edge_dim = 64;
  std::size_t clusters = 3;
  double cluster_std = 0.05;
  std::size_t ring_window = 4;  // normal edges reach at most this many steps along the ring
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static SyntheticSpec from_json(const nlohmann::json& j);
};

std::size_t synthetic_anomaly_count(const SyntheticSpec& spec);

std::vector<FlowRecord> make_synthetic_records(const SyntheticSpec& spec);
BehaviorGraph make_synthetic_graph(const SyntheticSpec& spec);

// Flow CSV plus the schema that reads it back.
void write_synthetic_csv(const std::vector<FlowRecord>& records, const std::filesystem::path& csv_path,
                         const std::filesystem::path& schema_path);

}  // namespace phogad
