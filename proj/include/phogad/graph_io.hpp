#pragma once

#include <filesystem>

#include <json.hpp>

#include "phogad/graph.hpp"

namespace phogad {

// Directory layout: nodes.csv (entity_key, attr...), edges.csv
// (key_a, key_b, label, attr...), meta.json (dims and counts). Floats are
// written with 17 significant digits so a reload is bit-exact.
void write_graph_dir(const BehaviorGraph& g, const std::filesystem::path& dir,
                     const nlohmann::json& extra_meta = nlohmann::json::object());
BehaviorGraph read_graph_dir(const std::filesystem::path& dir);

nlohmann::json graph_meta(const BehaviorGraph& g);

double anomaly_proportion(const BehaviorGraph& g);

}  // namespace phogad
