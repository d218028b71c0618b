#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracle.hpp"
#include "phogad/error.hpp"
#include "phogad/homology.hpp"
#include "phogad/random.hpp"
#include "test_util.hpp"

using namespace phogad;

namespace {

PointCloud cloud(std::vector<std::vector<double>> pts) {
  PointCloud pc;
  pc.points = std::move(pts);
  pc.ids.resize(pc.points.size());
  std::iota(pc.ids.begin(), pc.ids.end(), EdgeId{0});
  return pc;
}

PointCloud random_cloud(Rng& rng, std::size_t n, std::size_t dim) {
  std::vector<std::vector<double>> pts(n, std::vector<double>(dim));
  for (auto& p : pts)
    for (auto& x : p) x = rng.uniform();
  return cloud(std::move(pts));
}

PointCloud unit_square() { return cloud({{0, 0}, {1, 0}, {1, 1}, {0, 1}}); }

std::vector<std::tuple<int, double, double>> bars(const std::vector<PersistenceFeature>& fs) {
  std::vector<std::tuple<int, double, double>> out;
  for (const auto& f : fs) out.emplace_back(f.dimension, f.birth, f.death);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::tuple<int, double, double>> bars(const std::vector<oracle::Bar>& bs) {
  std::vector<std::tuple<int, double, double>> out;
  for (const auto& b : bs) out.emplace_back(b.dim, b.birth, b.death);
  std::sort(out.begin(), out.end());
  return out;
}

bool same_bars(std::vector<std::tuple<int, double, double>> a, std::vector<std::tuple<int, double, double>> b,
               double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& [da, ba, xa] = a[i];
    const auto& [db, bb, xb] = b[i];
    if (da != db || std::abs(ba - bb) > tol) return false;
    if (std::isinf(xa) != std::isinf(xb)) return false;
    if (!std::isinf(xa) && std::abs(xa - xb) > tol) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("filtration of two points and of the unit square") {
  auto f = build_filtration(cloud({{0.0}, {1.0}}), 2.0);
  REQUIRE(f.simplices.size() == 3);
  CHECK(f.simplices[2].size == 2);
  CHECK(f.simplices[2].scale == 1.0);

  auto sq = build_filtration(unit_square(), 2.0);
  std::size_t sides = 0, diagonals = 0, triangles = 0;
  for (const auto& s : sq.simplices) {
    if (s.size == 2 && s.scale == 1.0) ++sides;
    if (s.size == 2 && s.scale == std::sqrt(2.0)) ++diagonals;
    if (s.size == 3) {
      ++triangles;
      CHECK(s.scale == std::sqrt(2.0));
    }
  }
  CHECK(sq.simplices.size() == 14);
  CHECK(sides == 4);
  CHECK(diagonals == 2);
  CHECK(triangles == 4);
  CHECK(build_filtration(unit_square(), 0.5).simplices.size() == 4);
  // Order: scale, then dimension, then vertices.
  for (std::size_t i = 1; i < sq.simplices.size(); ++i) {
    const auto& a = sq.simplices[i - 1];
    const auto& b = sq.simplices[i];
    CHECK(std::tuple(a.scale, a.size, a.vertices) < std::tuple(b.scale, b.size, b.vertices));
  }
}

TEST_CASE("two points give one finite and one infinite component") {
  auto d = compute_persistence(build_filtration(cloud({{0.0}, {2.5}}), 3.0));
  REQUIRE(d.features.size() == 2);
  CHECK(d.features[0].death == 2.5);
  CHECK(d.features[0].members == std::vector<EdgeId>{1});  // younger component dies
  CHECK_FALSE(d.features[1].finite());
  CHECK(d.features[1].members == std::vector<EdgeId>{0, 1});
}

TEST_CASE("isolated points under a small scale stay separate") {
  auto d = compute_persistence(build_filtration(cloud({{0.0}, {10.0}, {20.0}, {30.0}}), 1.0));
  CHECK(d.features.size() == 4);
  for (const auto& f : d.features) CHECK_FALSE(f.finite());
}

TEST_CASE("unit square has one loop from 1 to sqrt 2") {
  for (auto* engine : {+[](const PointCloud& pc) { return compute_persistence(build_filtration(pc, 2.0)); },
                       +[](const PointCloud& pc) { return compute_rips_persistence(pc, 2.0); }}) {
    auto d = engine(unit_square());
    std::vector<PersistenceFeature> loops;
    for (const auto& f : d.features)
      if (f.dimension == 1) loops.push_back(f);
    REQUIRE(loops.size() == 1);
    CHECK(loops[0].birth == 1.0);
    CHECK(std::abs(loops[0].death - std::sqrt(2.0)) <= 1e-9);
    CHECK(loops[0].members == std::vector<EdgeId>{0, 1, 2, 3});
  }
}

TEST_CASE("property: explicit reduction matches the dense oracle") {
  Rng rng(2024);
  for (int round = 0; round < 200; ++round) {
    auto pc = random_cloud(rng, 2 + rng.below(7), 2 + rng.below(3));
    const double scale = default_max_scale(pc, rng.uniform(0.3, 1.0));
    auto mine = compute_persistence(build_filtration(pc, scale));
    auto ref = oracle::persistence(pc.points, scale);
    CHECK(same_bars(bars(mine.features), bars(ref), 1e-9));
    // Representatives of loops agree too, since both reduce in the same order.
    std::vector<std::pair<std::tuple<double, double>, std::vector<EdgeId>>> a, b;
    for (const auto& f : mine.features)
      if (f.dimension == 1) a.push_back({{f.birth, f.death}, f.members});
    for (const auto& r : ref)
      if (r.dim == 1) b.push_back({{r.birth, r.death}, std::vector<EdgeId>(r.vertices.begin(), r.vertices.end())});
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }
}

TEST_CASE("property: implicit engine equals the explicit reduction") {
  Rng rng(77);
  for (int round = 0; round < 60; ++round) {
    auto pc = random_cloud(rng, 3 + rng.below(28), 2 + rng.below(4));
    const double scale = default_max_scale(pc, rng.uniform(0.2, 1.0));
    auto a = compute_persistence(build_filtration(pc, scale));
    auto b = compute_rips_persistence(pc, scale);
    CHECK(a.features == b.features);
  }
}

TEST_CASE("property: one infinite component per connected component") {
  Rng rng(4);
  for (int round = 0; round < 50; ++round) {
    auto pc = random_cloud(rng, 2 + rng.below(20), 2);
    const double scale = rng.uniform(0.05, 0.6);
    auto d = compute_rips_persistence(pc, scale);
    // Count components by brute force.
    std::vector<std::size_t> comp(pc.size());
    std::iota(comp.begin(), comp.end(), 0);
    for (bool changed = true; changed;) {
      changed = false;
      for (std::size_t i = 0; i < pc.size(); ++i)
        for (std::size_t j = 0; j < pc.size(); ++j)
          if (oracle::dist(pc.points[i], pc.points[j]) <= scale && comp[j] < comp[i]) {
            comp[i] = comp[j];
            changed = true;
          }
    }
    std::sort(comp.begin(), comp.end());
    const auto components = static_cast<std::size_t>(std::unique(comp.begin(), comp.end()) - comp.begin());
    std::size_t infinite = 0, members = 0;
    for (const auto& f : d.features)
      if (f.dimension == 0 && !f.finite()) {
        ++infinite;
        members += f.members.size();
      }
    CHECK(infinite == components);
    CHECK(members == pc.size());
  }
}

TEST_CASE("property: perturbing points by delta moves finite bars by at most 2 delta") {
  Rng rng(9);
  for (int round = 0; round < 40; ++round) {
    auto pc = random_cloud(rng, 3 + rng.below(6), 2);
    const double delta = 1e-6;
    auto moved = pc;
    for (auto& p : moved.points)
      for (auto& x : p) x += rng.uniform(-delta, delta);
    // A scale above every distance keeps the two complexes combinatorially alike.
    auto a = compute_persistence(build_filtration(pc, 10.0));
    auto b = compute_persistence(build_filtration(moved, 10.0));
    auto ba = bars(a.features), bb = bars(b.features);
    REQUIRE(ba.size() == bb.size());
    for (std::size_t i = 0; i < ba.size(); ++i) {
      CHECK(std::abs(std::get<1>(ba[i]) - std::get<1>(bb[i])) <= 2 * delta * std::sqrt(2.0) + 1e-12);
      if (!std::isinf(std::get<2>(ba[i])))
        CHECK(std::abs(std::get<2>(ba[i]) - std::get<2>(bb[i])) <= 2 * delta * std::sqrt(2.0) + 1e-12);
    }
  }
}

TEST_CASE("point cloud subsampling") {
  Rng rng(1);
  auto g = test::random_graph(rng, 6, 10, 3, false);
  PhoConfig cfg;
  auto pc = build_point_cloud(g, cfg);
  CHECK(pc.size() == 10);
  for (std::size_t i = 0; i < pc.size(); ++i) CHECK(pc.points[i] == g.edge(pc.ids[i]).attr);

  auto big = test::random_graph(rng, 50, 5000, 2, false);
  cfg.seed = 12;
  auto a = build_point_cloud(big, cfg), b = build_point_cloud(big, cfg);
  CHECK(a.size() == 2000);
  CHECK(a.ids == b.ids);
  cfg.seed = 13;
  CHECK(build_point_cloud(big, cfg).ids != a.ids);

  auto one = test::random_graph(rng, 2, 1, 2, false);
  CHECK(test::error_code([&] { build_point_cloud(one, PhoConfig{}); }) == Errc::too_few_edges);
}

TEST_CASE("selection rules") {
  PersistenceDiagram d;
  for (double p : {1.0, 1.0, 1.0, 10.0})
    d.features.push_back({0, 0.0, p, {static_cast<EdgeId>(p * 10 + d.features.size())}});
  d.features.push_back({0, 0.0, std::numeric_limits<double>::infinity(), {999}});
  PhoConfig cfg;
  CHECK(select_persistent(d, cfg) == std::vector<EdgeId>{103});
  cfg.rule = SelectionRule::parse("top_fraction:0.5");
  CHECK(select_persistent(d, cfg).size() == 2);
  CHECK(cfg.rule.to_string() == "top_fraction:0.5");

  PersistenceDiagram flat;
  for (int i = 0; i < 3; ++i) flat.features.push_back({1, 0.5, 1.5, {static_cast<EdgeId>(i)}});
  CHECK(select_persistent(flat, PhoConfig{}).empty());
  cfg.dims = {0};
  CHECK(select_persistent(flat, cfg).empty());
}

TEST_CASE("property: selection is invariant to scaling attributes") {
  Rng rng(21);
  for (int round = 0; round < 20; ++round) {
    auto g = test::random_graph(rng, 8, 10 + rng.below(30), 3, false);
    const double c = rng.uniform(0.1, 10.0);
    std::vector<std::vector<double>> scaled;
    for (const auto& e : g.edges()) {
      scaled.push_back(e.attr);
      for (auto& x : scaled.back()) x *= c;
    }
    auto h = g.with_edge_attrs(scaled);
    for (auto rule : {"mean_plus_std", "top_fraction:0.3"}) {
      PhoConfig cfg;
      cfg.rule = SelectionRule::parse(rule);
      auto a = run_persistent_homology(g, cfg), b = run_persistent_homology(h, cfg);
      CHECK(a.selected == b.selected);
      REQUIRE(a.diagram.features.size() == b.diagram.features.size());
      for (std::size_t i = 0; i < a.diagram.features.size(); ++i)
        if (a.diagram.features[i].finite())
          CHECK(b.diagram.features[i].death == doctest::Approx(c * a.diagram.features[i].death).epsilon(1e-9));
    }
  }
}

TEST_CASE("attribute optimization") {
  auto g = test::from_edges({{"a", "b", {1.0, 0.0}, Label::normal},
                                     {"b", "c", {0.0, 1.0}, Label::normal},
                                     {"c", "a", {0.0, 1.0}, Label::normal},
                                     {"c", "d", {5.0, 5.0}, Label::anomalous}});
  std::vector<EdgeId> sel{0, 1, 2};
  auto h = optimize_attributes(g, sel, 0.7);
  // m = [1/3, 2/3]
  CHECK(h.edge(0).attr[0] == doctest::Approx(0.7 + 0.3 / 3.0));
  CHECK(h.edge(3).attr == g.edge(3).attr);
  auto same = optimize_attributes(g, sel, 1.0);
  for (EdgeId e = 0; e < 4; ++e) CHECK(same.edge(e).attr == g.edge(e).attr);
  CHECK(optimize_attributes(g, {}, 0.2).edge(0).attr == g.edge(0).attr);
  CHECK(test::error_code([&] { optimize_attributes(g, sel, 1.5); }) == Errc::invalid_argument);
}

TEST_CASE("property: optimization keeps the selected mean for any alpha") {
  Rng rng(31);
  for (int round = 0; round < 100; ++round) {
    auto g = test::random_graph(rng, 6, 2 + rng.below(40), 1 + rng.below(5), true);
    std::vector<EdgeId> sel;
    for (const auto& e : g.edges())
      if (rng.uniform() < 0.5) sel.push_back(e.id);
    if (sel.empty()) sel.push_back(0);
    const double alpha = round == 0 ? 0.0 : rng.uniform();
    auto h = optimize_attributes(g, sel, alpha);
    for (std::size_t k = 0; k < g.edge_dim(); ++k) {
      double before = 0.0, after = 0.0;
      for (EdgeId e : sel) {
        before += g.edge(e).attr[k];
        after += h.edge(e).attr[k];
      }
      CHECK(std::abs(before - after) / static_cast<double>(sel.size()) <= 1e-12);
    }
  }
}

TEST_CASE("composition of selected edges") {
  std::vector<EdgeInput> es;
  for (int i = 0; i < 20; ++i) es.push_back({"a", "b", {0.0}, i == 3 ? Label::anomalous : Label::normal});
  auto g = test::from_edges(es);
  std::vector<EdgeId> all(20);
  std::iota(all.begin(), all.end(), EdgeId{0});
  auto c = structure_composition(g, all);
  CHECK(c.anomaly_fraction == doctest::Approx(0.05));
  CHECK(c.normal_fraction == doctest::Approx(0.95));
  CHECK(test::error_code([&] { structure_composition(g, {}); }) == Errc::empty_selection);
}

TEST_CASE("diagram csv round-trips exactly") {
  Rng rng(6);
  test::TempDir dir;
  auto d = compute_rips_persistence(random_cloud(rng, 25, 3), 0.6);
  write_diagram_csv(d, dir.path() / "d.csv");
  CHECK(read_diagram_csv(dir.path() / "d.csv") == d.features);
  auto meta = diagram_metadata(d);
  CHECK(meta["scale_convention"] == "diameter");
  CHECK(meta["point_count"] == 25);
}
