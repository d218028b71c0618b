#include "phogad/graph_io.hpp"

#include <fstream>

#include "phogad/csv.hpp"
#include "phogad/error.hpp"

namespace phogad {
namespace fs = std::filesystem;
using nlohmann::json;

double anomaly_proportion(const BehaviorGraph& g) {
  const auto anomalous = g.count(Label::anomalous);
  const auto labeled = anomalous + g.count(Label::normal);
  return labeled == 0 ? 0.0 : static_cast<double>(anomalous) / static_cast<double>(labeled);
}

json graph_meta(const BehaviorGraph& g) {
  return json{{"node_dim", g.node_dim()},
              {"edge_dim", g.edge_dim()},
              {"node_count", g.node_count()},
              {"edge_count", g.edge_count()},
              {"normal_edges", g.count(Label::normal)},
              {"anomalous_edges", g.count(Label::anomalous)},
              {"unlabeled_edges", g.count(Label::unlabeled)},
              {"anomaly_proportion", anomaly_proportion(g)}};
}

namespace {

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + p.string());
  return out;
}

std::vector<double> parse_attrs(const csv::Row& row, std::size_t first, const fs::path& file, std::size_t line) {
  std::vector<double> attr;
  attr.reserve(row.size() - first);
  for (std::size_t c = first; c < row.size(); ++c) {
    auto v = csv::parse_double(row[c]);
    if (!v)
      throw Error(Errc::unparseable_cell,
                  file.filename().string() + " row " + std::to_string(line) + " col " + std::to_string(c));
    attr.push_back(*v);
  }
  return attr;
}

}  // namespace

void write_graph_dir(const BehaviorGraph& g, const fs::path& dir, const json& extra_meta) {
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "nodes.csv");
    csv::Row header{"entity_key"};
    for (std::size_t k = 0; k < g.node_dim(); ++k) header.push_back("attr_" + std::to_string(k));
    out << csv::join(header) << '\n';
    for (const auto& n : g.nodes()) {
      csv::Row row{n.key};
      for (double x : n.attr) row.push_back(csv::format_double(x));
      out << csv::join(row) << '\n';
    }
  }
  {
    auto out = open_out(dir / "edges.csv");
    csv::Row header{"key_a", "key_b", "label"};
    for (std::size_t k = 0; k < g.edge_dim(); ++k) header.push_back("attr_" + std::to_string(k));
    out << csv::join(header) << '\n';
    for (const auto& e : g.edges()) {
      csv::Row row{g.node(e.a).key, g.node(e.b).key, std::string(to_string(e.label))};
      for (double x : e.attr) row.push_back(csv::format_double(x));
      out << csv::join(row) << '\n';
    }
  }
  json meta = graph_meta(g);
  for (auto it = extra_meta.begin(); it != extra_meta.end(); ++it) meta[it.key()] = it.value();
  open_out(dir / "meta.json") << meta.dump(2) << '\n';
}

BehaviorGraph read_graph_dir(const fs::path& dir) {
  const auto node_rows = csv::read_file(dir / "nodes.csv");
  const auto edge_rows = csv::read_file(dir / "edges.csv");
  if (node_rows.empty() || node_rows.front().empty() || node_rows.front()[0] != "entity_key")
    throw Error(Errc::bad_format, (dir / "nodes.csv").string() + " lacks the entity_key header");
  if (edge_rows.empty() || edge_rows.front().size() < 3 || edge_rows.front()[0] != "key_a")
    throw Error(Errc::bad_format, (dir / "edges.csv").string() + " lacks the key_a,key_b,label header");

  std::vector<NodeInput> nodes;
  nodes.reserve(node_rows.size() - 1);
  for (std::size_t r = 1; r < node_rows.size(); ++r) {
    const auto& row = node_rows[r];
    nodes.push_back(NodeInput{row[0], parse_attrs(row, 1, dir / "nodes.csv", r)});
  }
  std::vector<EdgeInput> edges;
  edges.reserve(edge_rows.size() - 1);
  for (std::size_t r = 1; r < edge_rows.size(); ++r) {
    const auto& row = edge_rows[r];
    if (row.size() < 3) throw Error(Errc::bad_format, "edges.csv row " + std::to_string(r) + " is short");
    edges.push_back(EdgeInput{row[0], row[1], parse_attrs(row, 3, dir / "edges.csv", r), parse_label(row[2])});
  }
  return BehaviorGraph::build(std::move(nodes), std::move(edges));
}

}  // namespace phogad
