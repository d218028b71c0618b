#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "phogad/csv.hpp"
#include "phogad/error.hpp"
#include "phogad/graph.hpp"
#include "phogad/graph_io.hpp"
#include "phogad/random.hpp"
#include "test_util.hpp"

using namespace phogad;

namespace {

BehaviorGraph triangle_with_parallel() {
  // a-b twice, b-c, c-a, plus a self-loop on c.
  return test::from_edges({{"a", "b", {1.0, 0.0}, Label::normal},
                                   {"a", "b", {0.0, 1.0}, Label::anomalous},
                                   {"b", "c", {2.0, 2.0}, Label::normal},
                                   {"c", "a", {3.0, 1.0}, Label::normal},
                                   {"c", "c", {4.0, 4.0}, Label::unlabeled}});
}

}  // namespace

TEST_CASE("build assigns dense ids in order of appearance") {
  auto g = triangle_with_parallel();
  CHECK(g.node_count() == 3);
  CHECK(g.edge_count() == 5);
  CHECK(g.node(0).key == "a");
  CHECK(g.node(2).key == "c");
  CHECK(g.edge_dim() == 2);
  CHECK(g.count(Label::normal) == 3);
  CHECK(g.count(Label::anomalous) == 1);
  CHECK(g.count(Label::unlabeled) == 1);
  CHECK(g.find_node("b") == NodeId{1});
  CHECK_FALSE(g.find_node("zzz").has_value());
}

TEST_CASE("incidence lists are sorted and list self-loops once") {
  auto g = triangle_with_parallel();
  auto inc_c = g.incident(2);
  CHECK(std::vector<EdgeId>(inc_c.begin(), inc_c.end()) == std::vector<EdgeId>{2, 3, 4});
  auto inc_a = g.incident(0);
  CHECK(std::vector<EdgeId>(inc_a.begin(), inc_a.end()) == std::vector<EdgeId>{0, 1, 3});
}

TEST_CASE("build rejects unknown endpoints and ragged attributes") {
  auto unknown = [] {
    BehaviorGraph::build({{"a", {}}, {"b", {}}}, {{"a", "x", {1.0}, Label::normal}});
  };
  CHECK(test::error_code(unknown) == Errc::unknown_endpoint_key);
  auto ragged = [] { test::from_edges({{"a", "b", {1.0}, Label::normal}, {"a", "b", {1.0, 2.0}, Label::normal}}); };
  CHECK(test::error_code(ragged) == Errc::inconsistent_dimension);
  auto ragged_nodes = [] {
    BehaviorGraph::build({{"a", {1.0}}, {"b", {1.0, 2.0}}}, {{"a", "b", {1.0}, Label::normal}});
  };
  CHECK(test::error_code(ragged_nodes) == Errc::inconsistent_dimension);
}

TEST_CASE("node attributes from incident edges") {
  auto g = node_attr_from_edges(triangle_with_parallel());
  CHECK(g.node_dim() == 3);
  // Node a touches edges 0, 1, 3.
  const auto& a = g.node(0).attr;
  CHECK(a[0] == doctest::Approx(std::log1p(3.0)));
  CHECK(a[1] == doctest::Approx((1.0 + 0.0 + 3.0) / 3.0));
  CHECK(a[2] == doctest::Approx((0.0 + 1.0 + 1.0) / 3.0));
  // Node c touches 2, 3 and the loop once.
  const auto& c = g.node(2).attr;
  CHECK(c[0] == doctest::Approx(std::log1p(3.0)));
  CHECK(c[1] == doctest::Approx(3.0));

  auto isolated = node_attr_from_edges(BehaviorGraph::build({{"lonely", {}}, {"a", {}}, {"b", {}}},
                                                            {{"a", "b", {5.0}, Label::normal}}));
  CHECK(isolated.node(0).attr == std::vector<double>{0.0, 0.0});
}

TEST_CASE("edge adjacency lists parallel edges once per shared node") {
  auto g = test::from_edges({{"a", "b", {1.0}, Label::normal},
                                     {"a", "b", {1.0}, Label::normal},
                                     {"b", "c", {1.0}, Label::normal}});
  auto adj = EdgeAdjacency::build(g);
  std::multiset<std::pair<EdgeId, NodeId>> got;
  for (const auto& n : adj.neighbors(0)) got.insert({n.neighbor, n.shared});
  // Edge 0 meets edge 1 at a and at b, edge 2 at b.
  CHECK(got == std::multiset<std::pair<EdgeId, NodeId>>{{1, 0}, {1, 1}, {2, 1}});
  for (const auto& n : adj.neighbors(2)) {
    CHECK(n.shared == 1);
    CHECK(n.outer_self == 2);
    CHECK(n.outer_neighbor == 0);
  }
}

TEST_CASE("property: adjacency size equals the degree identity") {
  Rng rng(11);
  for (int round = 0; round < 60; ++round) {
    auto g = test::random_graph(rng, 2 + rng.below(10), 1 + rng.below(30), 3, true);
    auto adj = EdgeAdjacency::build(g);
    std::size_t expected = 0;
    for (const auto& n : g.nodes()) {
      const auto d = g.incident(n.id).size();
      expected += d * (d - 1);
    }
    CHECK(adj.entry_count() == expected);
    // Symmetry: e lists f at node v exactly as often as f lists e there.
    std::map<std::tuple<EdgeId, EdgeId, NodeId>, int> seen;
    for (const auto& e : g.edges())
      for (const auto& n : adj.neighbors(e.id)) {
        ++seen[{e.id, n.neighbor, n.shared}];
        CHECK(n.neighbor != e.id);
        CHECK(n.outer_self == g.edge(e.id).other(n.shared));
        CHECK(n.outer_neighbor == g.edge(n.neighbor).other(n.shared));
      }
    for (const auto& [k, c] : seen) CHECK(seen[{std::get<1>(k), std::get<0>(k), std::get<2>(k)}] == c);
  }
}

TEST_CASE("graph directory round-trip is bit-exact") {
  Rng rng(5);
  test::TempDir dir;
  for (int round = 0; round < 10; ++round) {
    auto g = node_attr_from_edges(test::random_graph(rng, 2 + rng.below(8), 1 + rng.below(20), 4, true));
    write_graph_dir(g, dir.path() / std::to_string(round));
    auto back = read_graph_dir(dir.path() / std::to_string(round));
    REQUIRE(back.edge_count() == g.edge_count());
    REQUIRE(back.node_count() == g.node_count());
    for (EdgeId e = 0; e < g.edge_count(); ++e) {
      CHECK(back.edge(e).attr == g.edge(e).attr);
      CHECK(back.edge(e).label == g.edge(e).label);
      CHECK(back.node(back.edge(e).a).key == g.node(g.edge(e).a).key);
    }
    for (NodeId v = 0; v < g.node_count(); ++v) CHECK(back.node(v).attr == g.node(v).attr);
  }
}

TEST_CASE("meta.json reports counts and proportion") {
  test::TempDir dir;
  auto g = triangle_with_parallel();
  write_graph_dir(g, dir.path());
  auto meta = graph_meta(g);
  CHECK(meta["edge_count"] == 5);
  CHECK(meta["anomalous_edges"] == 1);
  CHECK(meta["anomaly_proportion"].get<double>() == doctest::Approx(1.0 / 4.0));
  CHECK(std::filesystem::exists(dir.path() / "meta.json"));
}

TEST_CASE("csv quoting round-trips") {
  std::vector<std::string> row{"plain", "with,comma", "with \"quote\"", "", "multi\nline"};
  auto parsed = csv::parse(csv::join(row) + "\n");
  REQUIRE(parsed.size() == 1);
  CHECK(parsed[0] == row);
  CHECK(csv::parse_double(" +1.5 ") == 1.5);
  CHECK_FALSE(csv::parse_double("1.5x").has_value());
  CHECK(csv::parse_double(csv::format_double(0.1)).value() == 0.1);
}
