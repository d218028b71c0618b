#include "phogad/homology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "components.hpp"
#include "phogad/csv.hpp"
#include "phogad/error.hpp"
#include "phogad/random.hpp"

namespace phogad {
namespace fs = std::filesystem;
using nlohmann::json;

SelectionRule SelectionRule::parse(const std::string& text) {
  SelectionRule rule;
  if (text == "mean_plus_std") return rule;
  const std::string prefix = "top_fraction:";
  if (text.rfind(prefix, 0) == 0) {
    auto f = csv::parse_double(text.substr(prefix.size()));
    if (!f || !(*f > 0.0 && *f <= 1.0))
      throw Error(Errc::invalid_argument, "top_fraction needs a fraction in (0, 1], got '" + text + "'");
    rule.kind = Kind::top_fraction;
    rule.fraction = *f;
    return rule;
  }
  throw Error(Errc::invalid_argument, "unknown persistence rule '" + text + "'");
}

std::string SelectionRule::to_string() const {
  if (kind == Kind::mean_plus_std) return "mean_plus_std";
  std::ostringstream s;
  s << "top_fraction:" << fraction;
  return s.str();
}

void PhoConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(Errc::invalid_argument, "alpha must lie in [0, 1]");
  if (max_points < 2) throw Error(Errc::invalid_argument, "max_points must be at least 2");
  if (!(max_scale_quantile > 0.0 && max_scale_quantile <= 1.0))
    throw Error(Errc::invalid_argument, "max_scale_quantile must lie in (0, 1]");
  for (int d : dims)
    if (d != 0 && d != 1) throw Error(Errc::invalid_argument, "dims may only contain 0 and 1");
}

json PhoConfig::to_json() const {
  return json{{"alpha", alpha},       {"max_points", max_points}, {"max_scale_quantile", max_scale_quantile},
              {"rule", rule.to_string()}, {"dims", dims},           {"seed", seed}};
}

PhoConfig PhoConfig::from_json(const json& j) {
  PhoConfig c;
  c.alpha = j.value("alpha", c.alpha);
  c.max_points = j.value("max_points", c.max_points);
  c.max_scale_quantile = j.value("max_scale_quantile", c.max_scale_quantile);
  if (j.contains("rule")) c.rule = SelectionRule::parse(j.at("rule").get<std::string>());
  c.dims = j.value("dims", c.dims);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

PointCloud build_point_cloud(const BehaviorGraph& g, const PhoConfig& cfg) {
  if (g.edge_count() < 2) throw Error(Errc::too_few_edges, "need at least 2 edges, graph has " + std::to_string(g.edge_count()));
  PointCloud pc;
  std::vector<std::size_t> chosen;
  if (g.edge_count() > cfg.max_points) {
    Rng rng(cfg.seed);
    chosen = rng.sample_indices(g.edge_count(), cfg.max_points);
  } else {
    chosen.resize(g.edge_count());
    std::iota(chosen.begin(), chosen.end(), std::size_t{0});
  }
  pc.ids.reserve(chosen.size());
  pc.points.reserve(chosen.size());
  for (std::size_t i : chosen) {
    const auto& e = g.edge(static_cast<EdgeId>(i));
    for (double x : e.attr)
      if (!std::isfinite(x)) throw Error(Errc::invalid_argument, "edge " + std::to_string(i) + " has a non-finite attribute");
    pc.ids.push_back(e.id);
    pc.points.push_back(e.attr);
  }
  return pc;
}

double euclidean(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - y[k];
    s += d * d;
  }
  return std::sqrt(s);
}

double default_max_scale(const PointCloud& pc, double quantile) {
  const std::size_t n = pc.size();
  std::vector<double> d;
  d.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) d.push_back(euclidean(pc.points[i], pc.points[j]));
  if (d.empty()) return 1.0;
  auto rank = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(d.size())));
  rank = std::clamp<std::size_t>(rank, 1, d.size()) - 1;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(rank), d.end());
  double scale = d[rank];
  if (scale > 0.0) return scale;
  scale = *std::max_element(d.begin(), d.end());
  return scale > 0.0 ? scale : 1.0;
}

namespace {

bool filtration_less(const Simplex& x, const Simplex& y) {
  if (x.scale != y.scale) return x.scale < y.scale;
  if (x.size != y.size) return x.size < y.size;
  return std::lexicographical_compare(x.vertices.begin(), x.vertices.begin() + x.size, y.vertices.begin(),
                                      y.vertices.begin() + y.size);
}

}  // namespace

Filtration build_filtration(const PointCloud& pc, double max_scale) {
  if (!(max_scale > 0.0)) throw Error(Errc::invalid_argument, "max_scale must be positive");
  const auto n = static_cast<std::uint32_t>(pc.size());
  Filtration f;
  f.point_ids = pc.ids;
  f.max_scale = max_scale;
  std::vector<double> dist(static_cast<std::size_t>(n) * n, 0.0);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = i + 1; j < n; ++j)
      dist[i * n + j] = dist[j * n + i] = euclidean(pc.points[i], pc.points[j]);
  auto present = [&](std::uint32_t i, std::uint32_t j) { return dist[i * n + j] <= max_scale; };

  for (std::uint32_t i = 0; i < n; ++i) f.simplices.push_back(Simplex{{i, 0, 0}, 1, 0.0});
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = i + 1; j < n; ++j)
      if (present(i, j)) f.simplices.push_back(Simplex{{i, j, 0}, 2, dist[i * n + j]});
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = i + 1; j < n; ++j) {
      if (!present(i, j)) continue;
      for (std::uint32_t k = j + 1; k < n; ++k)
        if (present(i, k) && present(j, k))
          f.simplices.push_back(
              Simplex{{i, j, k}, 3, std::max({dist[i * n + j], dist[i * n + k], dist[j * n + k]})});
    }
  std::sort(f.simplices.begin(), f.simplices.end(), filtration_less);
  return f;
}

namespace detail {

void canonicalize(std::vector<PersistenceFeature>& features) {
  std::sort(features.begin(), features.end(), [](const PersistenceFeature& x, const PersistenceFeature& y) {
    if (x.dimension != y.dimension) return x.dimension < y.dimension;
    if (x.birth != y.birth) return x.birth < y.birth;
    if (x.death != y.death) return x.death < y.death;
    return x.members < y.members;
  });
}

}  // namespace detail

namespace {

using Column = std::vector<std::uint32_t>;  // sorted positions in the filtration

void add_column(Column& target, const Column& source) {
  Column out;
  out.reserve(target.size() + source.size());
  std::set_symmetric_difference(target.begin(), target.end(), source.begin(), source.end(), std::back_inserter(out));
  target.swap(out);
}

std::vector<EdgeId> to_edge_ids(const std::vector<std::uint32_t>& points, const std::vector<EdgeId>& ids) {
  std::vector<EdgeId> out;
  out.reserve(points.size());
  for (auto p : points) out.push_back(ids[p]);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

PersistenceDiagram compute_persistence(const Filtration& f) {
  const auto& sx = f.simplices;
  const std::size_t m = sx.size();
  std::size_t n_points = 0;
  for (const auto& s : sx)
    if (s.size == 1) ++n_points;
  if (n_points != f.point_ids.size())
    throw Error(Errc::bad_format, "filtration vertex count does not match its point ids");

  std::vector<std::uint32_t> vertex_pos(n_points, UINT32_MAX);
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> edge_pos;
  std::vector<Column> boundary(m);
  for (std::uint32_t j = 0; j < m; ++j) {
    const auto& s = sx[j];
    const auto& v = s.vertices;
    auto lookup_edge = [&](std::uint32_t a, std::uint32_t b) {
      auto it = edge_pos.find({a, b});
      if (it == edge_pos.end()) throw Error(Errc::bad_format, "simplex appears before one of its faces");
      return it->second;
    };
    if (s.size == 1) {
      if (v[0] >= n_points) throw Error(Errc::bad_format, "vertex index out of range");
      vertex_pos[v[0]] = j;
    } else if (s.size == 2) {
      if (vertex_pos.at(v[0]) == UINT32_MAX || vertex_pos.at(v[1]) == UINT32_MAX)
        throw Error(Errc::bad_format, "edge appears before its vertices");
      boundary[j] = {vertex_pos[v[0]], vertex_pos[v[1]]};
      edge_pos[{v[0], v[1]}] = j;
    } else {
      boundary[j] = {lookup_edge(v[0], v[1]), lookup_edge(v[0], v[2]), lookup_edge(v[1], v[2])};
    }
    std::sort(boundary[j].begin(), boundary[j].end());
  }

  // Standard left-to-right reduction; V is kept for edge columns so that a
  // surviving cycle can be reported.
  std::vector<Column> reduced = boundary;
  std::vector<Column> cycle(m);
  std::vector<std::int64_t> owner_of_low(m, -1);
  std::vector<std::int64_t> killed_by(m, -1);
  for (std::uint32_t j = 0; j < m; ++j) {
    if (sx[j].size == 2) cycle[j] = {j};
    auto& col = reduced[j];
    while (!col.empty() && owner_of_low[col.back()] >= 0) {
      const auto other = static_cast<std::size_t>(owner_of_low[col.back()]);
      add_column(col, reduced[other]);
      if (sx[j].size == 2) add_column(cycle[j], cycle[other]);
    }
    if (!col.empty()) {
      owner_of_low[col.back()] = j;
      killed_by[col.back()] = j;
    }
  }

  PersistenceDiagram diag;
  diag.max_scale = f.max_scale;
  diag.point_count = n_points;

  detail::ComponentTracker components(n_points);
  std::vector<std::uint32_t> dying;
  for (std::uint32_t j = 0; j < m; ++j) {
    const auto& s = sx[j];
    if (s.size != 2) continue;
    const auto root = components.merge(s.vertices[0], s.vertices[1], &dying);
    if (root < 0) continue;
    // The elder rule kills the component whose oldest vertex is youngest,
    // which is exactly the pivot vertex of the reduced edge column.
    if (reduced[j].empty() || sx[reduced[j].back()].vertices[0] != static_cast<std::uint32_t>(root))
      throw Error(Errc::bad_format, "inconsistent zero-dimensional pairing");
    const double birth = sx[reduced[j].back()].scale;
    if (s.scale > birth)
      diag.features.push_back(PersistenceFeature{0, birth, s.scale, to_edge_ids(dying, f.point_ids)});
  }

  for (std::uint32_t j = 0; j < m; ++j) {
    const auto& s = sx[j];
    if (s.size == 1 && killed_by[j] < 0) {
      const auto root = components.find(s.vertices[0]);
      diag.features.push_back(
          PersistenceFeature{0, s.scale, std::numeric_limits<double>::infinity(), to_edge_ids(components.members(root), f.point_ids)});
    } else if (s.size == 2 && reduced[j].empty()) {
      std::vector<std::uint32_t> verts;
      std::vector<std::uint32_t> chain;
      double death = std::numeric_limits<double>::infinity();
      if (killed_by[j] >= 0) {
        const auto killer = static_cast<std::size_t>(killed_by[j]);
        death = sx[killer].scale;
        if (!(death > s.scale)) continue;
        chain = reduced[killer];
      } else {
        chain = cycle[j];
      }
      for (auto e : chain) {
        verts.push_back(sx[e].vertices[0]);
        verts.push_back(sx[e].vertices[1]);
      }
      diag.features.push_back(PersistenceFeature{1, s.scale, death, to_edge_ids(verts, f.point_ids)});
    }
  }
  detail::canonicalize(diag.features);
  return diag;
}

std::vector<EdgeId> select_persistent(const PersistenceDiagram& diag, const PhoConfig& cfg) {
  std::vector<const PersistenceFeature*> pool;
  for (const auto& feat : diag.features)
    if (feat.finite() && std::find(cfg.dims.begin(), cfg.dims.end(), feat.dimension) != cfg.dims.end())
      pool.push_back(&feat);
  if (pool.empty()) return {};

  std::vector<const PersistenceFeature*> chosen;
  if (cfg.rule.kind == SelectionRule::Kind::mean_plus_std) {
    double mean = 0.0;
    for (auto* p : pool) mean += p->persistence();
    mean /= static_cast<double>(pool.size());
    double var = 0.0;
    for (auto* p : pool) var += (p->persistence() - mean) * (p->persistence() - mean);
    const double threshold = mean + std::sqrt(var / static_cast<double>(pool.size()));
    for (auto* p : pool)
      if (p->persistence() > threshold) chosen.push_back(p);
  } else {
    const auto want = static_cast<std::size_t>(
        std::ceil(cfg.rule.fraction * static_cast<double>(pool.size()) - 1e-9));
    std::stable_sort(pool.begin(), pool.end(), [](auto* x, auto* y) { return x->persistence() > y->persistence(); });
    chosen.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(std::min(want, pool.size())));
  }
  std::vector<EdgeId> selected;
  for (auto* p : chosen) selected.insert(selected.end(), p->members.begin(), p->members.end());
  std::sort(selected.begin(), selected.end());
  selected.erase(std::unique(selected.begin(), selected.end()), selected.end());
  return selected;
}

BehaviorGraph optimize_attributes(const BehaviorGraph& g, std::span<const EdgeId> vr_edges, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(Errc::invalid_argument, "alpha must lie in [0, 1]");
  if (vr_edges.empty() || alpha == 1.0) return g;
  const std::size_t dim = g.edge_dim();
  std::vector<double> mean(dim, 0.0);
  for (EdgeId e : vr_edges) {
    const auto& a = g.edge(e).attr;
    for (std::size_t k = 0; k < dim; ++k) mean[k] += a[k];
  }
  for (auto& x : mean) x /= static_cast<double>(vr_edges.size());

  std::vector<std::vector<double>> attrs;
  attrs.reserve(g.edge_count());
  for (const auto& e : g.edges()) attrs.push_back(e.attr);
  std::vector<bool> seen(g.edge_count(), false);
  for (EdgeId e : vr_edges) {
    if (seen[e]) continue;
    seen[e] = true;
    for (std::size_t k = 0; k < dim; ++k) attrs[e][k] = alpha * attrs[e][k] + (1.0 - alpha) * mean[k];
  }
  return g.with_edge_attrs(std::move(attrs));
}

Composition structure_composition(const BehaviorGraph& g, std::span<const EdgeId> vr_edges) {
  Composition c;
  for (EdgeId e : vr_edges) {
    const auto label = g.edge(e).label;
    if (label == Label::anomalous) ++c.anomalous;
    if (label == Label::normal) ++c.normal;
  }
  const auto total = c.anomalous + c.normal;
  if (total == 0) throw Error(Errc::empty_selection, "no labeled edges in the persistent structures");
  c.anomaly_fraction = static_cast<double>(c.anomalous) / static_cast<double>(total);
  c.normal_fraction = static_cast<double>(c.normal) / static_cast<double>(total);
  return c;
}

void write_diagram_csv(const PersistenceDiagram& diag, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << "dimension,birth,death,member_ids\n";
  for (const auto& feat : diag.features) {
    std::string members;
    for (std::size_t i = 0; i < feat.members.size(); ++i) {
      if (i) members.push_back(';');
      members += std::to_string(feat.members[i]);
    }
    out << feat.dimension << ',' << csv::format_double(feat.birth) << ',' << csv::format_double(feat.death) << ','
        << members << '\n';
  }
}

std::vector<PersistenceFeature> read_diagram_csv(const fs::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty() || rows[0].size() != 4 || rows[0][0] != "dimension")
    throw Error(Errc::bad_format, path.string() + " is not a diagram CSV");
  std::vector<PersistenceFeature> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 4) throw Error(Errc::bad_format, "diagram row " + std::to_string(r) + " malformed");
    PersistenceFeature feat;
    auto dim = csv::parse_double(row[0]);
    auto birth = csv::parse_double(row[1]);
    auto death = csv::parse_double(row[2]);
    if (!dim || !birth || !death) throw Error(Errc::unparseable_cell, "diagram row " + std::to_string(r));
    feat.dimension = static_cast<int>(*dim);
    feat.birth = *birth;
    feat.death = *death;
    std::stringstream ids(row[3]);
    std::string id;
    while (std::getline(ids, id, ';'))
      if (!id.empty()) feat.members.push_back(static_cast<EdgeId>(std::stoul(id)));
    out.push_back(std::move(feat));
  }
  return out;
}

json diagram_metadata(const PersistenceDiagram& diag) {
  return json{{"scale_convention", "diameter"}, {"max_scale", diag.max_scale}, {"point_count", diag.point_count}};
}

PhOutcome run_persistent_homology(const BehaviorGraph& g, const PhoConfig& cfg) {
  cfg.validate();
  PhOutcome out;
  const PointCloud pc = build_point_cloud(g, cfg);
  out.max_scale = default_max_scale(pc, cfg.max_scale_quantile);
  out.diagram = compute_rips_persistence(pc, out.max_scale);
  out.selected = select_persistent(out.diagram, cfg);
  out.optimized = optimize_attributes(g, out.selected, cfg.alpha);
  return out;
}

}  // namespace phogad
