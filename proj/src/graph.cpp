#include "phogad/graph.hpp"

#include <algorithm>
#include <cmath>

#include "phogad/error.hpp"

namespace phogad {

std::string_view to_string(Label label) noexcept {
  switch (label) {
    case Label::normal: return "normal";
    case Label::anomalous: return "anomalous";
    case Label::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

Label parse_label(std::string_view text) {
  if (text == "normal") return Label::normal;
  if (text == "anomalous") return Label::anomalous;
  if (text == "unlabeled" || text.empty()) return Label::unlabeled;
  throw Error(Errc::bad_format, "unknown label '" + std::string(text) + "'");
}

BehaviorGraph BehaviorGraph::build(std::vector<NodeInput> nodes, std::vector<EdgeInput> edges) {
  BehaviorGraph g;
  g.nodes_.reserve(nodes.size());
  std::optional<std::size_t> node_dim;
  for (auto& in : nodes) {
    const auto id = static_cast<NodeId>(g.nodes_.size());
    if (!g.by_key_.emplace(in.key, id).second)
      throw Error(Errc::invalid_argument, "duplicate entity key '" + in.key + "'");
    if (!in.attr.empty()) {
      if (node_dim && *node_dim != in.attr.size())
        throw Error(Errc::inconsistent_dimension,
                    "node '" + in.key + "' has " + std::to_string(in.attr.size()) +
                        " attributes, expected " + std::to_string(*node_dim));
      node_dim = in.attr.size();
    }
    g.nodes_.push_back(Node{id, std::move(in.key), std::move(in.attr)});
  }
  g.node_dim_ = node_dim.value_or(0);

  g.edges_.reserve(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    auto& in = edges[i];
    auto ia = g.by_key_.find(in.key_a);
    auto ib = g.by_key_.find(in.key_b);
    if (ia == g.by_key_.end())
      throw Error(Errc::unknown_endpoint_key, "edge " + std::to_string(i) + " references '" + in.key_a + "'");
    if (ib == g.by_key_.end())
      throw Error(Errc::unknown_endpoint_key, "edge " + std::to_string(i) + " references '" + in.key_b + "'");
    if (i > 0 && in.attr.size() != g.edges_.front().attr.size())
      throw Error(Errc::inconsistent_dimension,
                  "edge " + std::to_string(i) + " has " + std::to_string(in.attr.size()) +
                      " attributes, expected " + std::to_string(g.edges_.front().attr.size()));
    g.edges_.push_back(Edge{static_cast<EdgeId>(i), ia->second, ib->second, std::move(in.attr), in.label});
  }
  g.edge_dim_ = g.edges_.empty() ? 0 : g.edges_.front().attr.size();
  g.index();
  return g;
}

void BehaviorGraph::index() {
  std::vector<std::size_t> degree(nodes_.size(), 0);
  for (const auto& e : edges_) {
    ++degree[e.a];
    if (!e.is_loop()) ++degree[e.b];
  }
  incidence_offsets_.assign(nodes_.size() + 1, 0);
  for (std::size_t v = 0; v < nodes_.size(); ++v) incidence_offsets_[v + 1] = incidence_offsets_[v] + degree[v];
  incidence_.assign(incidence_offsets_.back(), 0);
  std::vector<std::size_t> fill(incidence_offsets_.begin(), incidence_offsets_.end() - 1);
  // Edges are visited in id order, so each list comes out sorted.
  for (const auto& e : edges_) {
    incidence_[fill[e.a]++] = e.id;
    if (!e.is_loop()) incidence_[fill[e.b]++] = e.id;
  }
}

std::span<const EdgeId> BehaviorGraph::incident(NodeId id) const {
  const auto begin = incidence_offsets_.at(id);
  return {incidence_.data() + begin, incidence_offsets_[id + 1] - begin};
}

std::optional<NodeId> BehaviorGraph::find_node(std::string_view key) const {
  auto it = by_key_.find(std::string(key));
  if (it == by_key_.end()) return std::nullopt;
  return it->second;
}

std::size_t BehaviorGraph::count(Label label) const noexcept {
  return static_cast<std::size_t>(
      std::count_if(edges_.begin(), edges_.end(), [label](const Edge& e) { return e.label == label; }));
}

BehaviorGraph BehaviorGraph::with_edge_attrs(std::vector<std::vector<double>> attrs) const {
  if (attrs.size() != edges_.size())
    throw Error(Errc::dimension_mismatch, "expected one attribute vector per edge");
  BehaviorGraph g = *this;
  const std::size_t width = attrs.empty() ? 0 : attrs.front().size();
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    if (attrs[i].size() != width)
      throw Error(Errc::inconsistent_dimension, "edge attribute vectors differ in length");
    g.edges_[i].attr = std::move(attrs[i]);
  }
  g.edge_dim_ = g.edges_.empty() ? 0 : g.edges_.front().attr.size();
  return g;
}

BehaviorGraph BehaviorGraph::with_node_attrs(std::vector<std::vector<double>> attrs) const {
  if (attrs.size() != nodes_.size())
    throw Error(Errc::dimension_mismatch, "expected one attribute vector per node");
  BehaviorGraph g = *this;
  std::optional<std::size_t> dim;
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    if (!attrs[i].empty()) {
      if (dim && *dim != attrs[i].size())
        throw Error(Errc::inconsistent_dimension, "node attribute vectors differ in length");
      dim = attrs[i].size();
    }
    g.nodes_[i].attr = std::move(attrs[i]);
  }
  g.node_dim_ = dim.value_or(0);
  return g;
}

BehaviorGraph node_attr_from_edges(const BehaviorGraph& g) {
  const std::size_t edge_dim = g.edge_dim();
  std::vector<std::vector<double>> attrs;
  attrs.reserve(g.node_count());
  for (const auto& n : g.nodes()) {
    if (!n.attr.empty()) {
      attrs.push_back(n.attr);
      continue;
    }
    const auto inc = g.incident(n.id);
    std::vector<double> attr(edge_dim + 1, 0.0);
    attr[0] = std::log1p(static_cast<double>(inc.size()));
    for (EdgeId e : inc) {
      const auto& ea = g.edge(e).attr;
      for (std::size_t k = 0; k < edge_dim; ++k) attr[k + 1] += ea[k];
    }
    if (!inc.empty())
      for (std::size_t k = 1; k <= edge_dim; ++k) attr[k] /= static_cast<double>(inc.size());
    attrs.push_back(std::move(attr));
  }
  return g.with_node_attrs(std::move(attrs));
}

EdgeAdjacency EdgeAdjacency::build(const BehaviorGraph& g) {
  EdgeAdjacency adj;
  adj.offsets_.assign(g.edge_count() + 1, 0);
  for (const auto& e : g.edges()) {
    std::size_t n = g.incident(e.a).size() - 1;
    if (!e.is_loop()) n += g.incident(e.b).size() - 1;
    adj.offsets_[e.id + 1] = adj.offsets_[e.id] + n;
  }
  adj.entries_.reserve(adj.offsets_.back());
  for (const auto& e : g.edges()) {
    const NodeId ends[2] = {e.a, e.b};
    const int n_ends = e.is_loop() ? 1 : 2;
    for (int k = 0; k < n_ends; ++k) {
      const NodeId shared = ends[k];
      for (EdgeId other : g.incident(shared)) {
        if (other == e.id) continue;
        adj.entries_.push_back(AdjacentEdge{other, shared, e.other(shared), g.edge(other).other(shared)});
      }
    }
  }
  return adj;
}

}  // namespace phogad
