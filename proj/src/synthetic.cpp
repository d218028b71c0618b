#include "phogad/synthetic.hpp"

#include <cmath>
#include <fstream>

#include "phogad/csv.hpp"
#include "phogad/error.hpp"
#include "phogad/random.hpp"

namespace phogad {
using nlohmann::json;

void SyntheticSpec::validate() const {
  if (clusters < 2 || node_count < 2 * clusters)
    throw Error(Errc::invalid_argument, "synthetic graph needs at least two clusters of two nodes");
  if (normal_edges == 0 || edge_dim == 0) throw Error(Errc::invalid_argument, "synthetic graph needs edges and attributes");
  if (!(anomaly_proportion >= 0.0 && anomaly_proportion < 1.0))
    throw Error(Errc::invalid_argument, "anomaly proportion must lie in [0, 1)");
  if (!(cluster_std >= 0.0)) throw Error(Errc::invalid_argument, "cluster_std must be non-negative");
  if (ring_window == 0 || ring_window >= node_count / clusters)
    throw Error(Errc::invalid_argument, "ring_window must be positive and shorter than an arc");
}

json SyntheticSpec::to_json() const {
  return json{{"node_count", node_count},     {"normal_edges", normal_edges}, {"anomaly_proportion", anomaly_proportion},
              {"edge_dim", edge_dim},         {"clusters", clusters},         {"cluster_std", cluster_std},
              {"ring_window", ring_window},   {"seed", seed}};
}

SyntheticSpec SyntheticSpec::from_json(const json& j) {
  SyntheticSpec s;
  s.node_count = j.value("node_count", s.node_count);
  s.normal_edges = j.value("normal_edges", s.normal_edges);
  s.anomaly_proportion = j.value("anomaly_proportion", s.anomaly_proportion);
  s.edge_dim = j.value("edge_dim", s.edge_dim);
  s.clusters = j.value("clusters", s.clusters);
  s.cluster_std = j.value("cluster_std", s.cluster_std);
  s.ring_window = j.value("ring_window", s.ring_window);
  s.seed = j.value("seed", s.seed);
  s.validate();
  return s;
}

std::size_t synthetic_anomaly_count(const SyntheticSpec& spec) {
  return static_cast<std::size_t>(std::llround(spec.anomaly_proportion * static_cast<double>(spec.normal_edges) /
                                               (1.0 - spec.anomaly_proportion)));
}

std::vector<FlowRecord> make_synthetic_records(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, 0));
  const std::size_t n = spec.node_count;
  auto arc_of = [&](std::size_t v) { return std::min(spec.clusters - 1, v * spec.clusters / n); };
  auto key = [](std::size_t v) { return "h" + std::to_string(v); };

  std::vector<std::vector<double>> centers(spec.clusters, std::vector<double>(spec.edge_dim));
  for (auto& c : centers)
    for (auto& x : c) x = rng.uniform(0.2, 0.8);

  std::vector<FlowRecord> records;
  records.reserve(spec.normal_edges + synthetic_anomaly_count(spec));
  for (std::size_t i = 0; i < spec.normal_edges; ++i) {
    // Redraw until both ends sit in the same arc.
    std::size_t u = 0, v = 0;
    do {
      u = rng.below(n);
      v = (u + 1 + rng.below(spec.ring_window)) % n;
    } while (arc_of(u) != arc_of(v));
    FlowRecord r{key(u), key(v), std::vector<double>(spec.edge_dim), Label::normal};
    const auto& c = centers[arc_of(u)];
    for (std::size_t k = 0; k < spec.edge_dim; ++k) r.features[k] = c[k] + spec.cluster_std * rng.normal();
    records.push_back(std::move(r));
  }
  const std::size_t anomalies = synthetic_anomaly_count(spec);
  for (std::size_t i = 0; i < anomalies; ++i) {
    std::size_t u = 0, v = 0;
    do {
      u = rng.below(n);
      v = rng.below(n);
    } while (arc_of(u) == arc_of(v));
    FlowRecord r{key(u), key(v), std::vector<double>(spec.edge_dim), Label::anomalous};
    for (auto& x : r.features) x = rng.uniform();
    records.push_back(std::move(r));
  }
  // Interleave so anomalies are not all at the end of the edge list.
  rng.shuffle(records);
  return records;
}

BehaviorGraph make_synthetic_graph(const SyntheticSpec& spec) { return records_to_graph(make_synthetic_records(spec)); }

void write_synthetic_csv(const std::vector<FlowRecord>& records, const std::filesystem::path& csv_path,
                         const std::filesystem::path& schema_path) {
  const std::size_t dim = records.empty() ? 0 : records.front().features.size();
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + csv_path.string());
  nlohmann::ordered_json schema{{"key_a", "src"}, {"key_b", "dst"}, {"label", "label"}, {"anomaly_values", {"1"}}};
  std::vector<std::string> header{"src", "dst", "label"};
  for (std::size_t k = 0; k < dim; ++k) {
    header.push_back("f" + std::to_string(k));
    schema["numeric"].push_back(header.back());
  }
  out << csv::join(header) << '\n';
  for (const auto& r : records) {
    std::vector<std::string> row{r.src_key, r.dst_key, r.label == Label::anomalous ? "1" : "0"};
    for (double x : r.features) row.push_back(csv::format_double(x));
    out << csv::join(row) << '\n';
  }
  std::ofstream s(schema_path, std::ios::binary);
  if (!s) throw Error(Errc::io_error, "cannot write " + schema_path.string());
  s << schema.dump(2) << '\n';
}

}  // namespace phogad
