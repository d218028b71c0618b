#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "phogad/graph.hpp"

namespace phogad {

// Edge attributes viewed as points in Euclidean space; ids[i] is the edge
// that point i came from.
struct PointCloud {
  std::vector<EdgeId> ids;
  std::vector<std::vector<double>> points;

  std::size_t size() const noexcept { return points.size(); }
  std::size_t dim() const noexcept { return points.empty() ? 0 : points.front().size(); }
};

struct SelectionRule {
  enum class Kind { mean_plus_std, top_fraction };
  Kind kind = Kind::mean_plus_std;
  double fraction = 0.1;  // used by top_fraction only

  // "mean_plus_std" or "top_fraction:<f>".
  static SelectionRule parse(const std::string& text);
  std::string to_string() const;
};

struct PhoConfig {
  double alpha = 0.7;
  std::size_t max_points = 2000;
  double max_scale_quantile = 0.5;
  SelectionRule rule;
  std::vector<int> dims{0, 1};
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static PhoConfig from_json(const nlohmann::json& j);
};

// Uniformly subsamples (seeded) down to max_points. Throws TooFewEdges.
PointCloud build_point_cloud(const BehaviorGraph& g, const PhoConfig& cfg);

double euclidean(std::span<const double> x, std::span<const double> y);

// The given quantile (nearest-rank) of all pairwise distances.
double default_max_scale(const PointCloud& pc, double quantile);

struct Simplex {
  std::array<std::uint32_t, 3> vertices{};  // sorted, first `size` entries used
  std::uint8_t size = 1;
  double scale = 0.0;

  int dimension() const noexcept { return size - 1; }
};

// Scales use the diameter convention: a pair of points enters at their
// distance t, i.e. where balls of radius t/2 touch.
struct Filtration {
  std::vector<Simplex> simplices;  // sorted by (scale, dimension, vertices)
  std::vector<EdgeId> point_ids;
  double max_scale = 0.0;
};

// Vietoris-Rips complex up to dimension 2, truncated at max_scale.
Filtration build_filtration(const PointCloud& pc, double max_scale);

struct PersistenceFeature {
  int dimension = 0;
  double birth = 0.0;
  double death = std::numeric_limits<double>::infinity();
  std::vector<EdgeId> members;  // sorted

  bool finite() const noexcept { return death != std::numeric_limits<double>::infinity(); }
  double persistence() const noexcept { return death - birth; }
  bool operator==(const PersistenceFeature&) const = default;
};

struct PersistenceDiagram {
  std::vector<PersistenceFeature> features;  // canonical order, zero-length bars omitted
  double max_scale = 0.0;
  std::size_t point_count = 0;
};

// Z/2 boundary-matrix reduction over an explicit filtration. Dimension-0 bars
// carry the component that dies (elder rule); dimension-1 bars carry the
// vertices of the reduced killing column, or of the birth cycle when the
// class survives to max_scale.
PersistenceDiagram compute_persistence(const Filtration& f);

// Same diagram and members as compute_persistence(build_filtration(pc, s))
// without materializing triangles; used for the large clouds of the pipeline.
PersistenceDiagram compute_rips_persistence(const PointCloud& pc, double max_scale);

// Sorted union of the members of the selected finite features.
std::vector<EdgeId> select_persistent(const PersistenceDiagram& diag, const PhoConfig& cfg);

// attr' = alpha * attr + (1 - alpha) * mean over vr_edges, applied to vr_edges only.
BehaviorGraph optimize_attributes(const BehaviorGraph& g, std::span<const EdgeId> vr_edges, double alpha);

struct Composition {
  std::size_t anomalous = 0;
  std::size_t normal = 0;
  double anomaly_fraction = 0.0;
  double normal_fraction = 0.0;
};

// Label mix inside the selected edges; unlabeled edges are ignored. Throws EmptySelection.
Composition structure_composition(const BehaviorGraph& g, std::span<const EdgeId> vr_edges);

void write_diagram_csv(const PersistenceDiagram& diag, const std::filesystem::path& path);
std::vector<PersistenceFeature> read_diagram_csv(const std::filesystem::path& path);
nlohmann::json diagram_metadata(const PersistenceDiagram& diag);

struct PhOutcome {
  PersistenceDiagram diagram;
  std::vector<EdgeId> selected;
  BehaviorGraph optimized;
  double max_scale = 0.0;
};

// build_point_cloud -> compute_rips_persistence -> select_persistent -> optimize_attributes.
PhOutcome run_persistent_homology(const BehaviorGraph& g, const PhoConfig& cfg);

namespace detail {
// Sorts features into the canonical (dimension, birth, death, members) order.
void canonicalize(std::vector<PersistenceFeature>& features);
}  // namespace detail

}  // namespace phogad
