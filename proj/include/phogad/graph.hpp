#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace phogad {

using NodeId = std::uint32_t;
using EdgeId = std::uint32_t;

enum class Label : std::uint8_t { normal, anomalous, unlabeled };

std::string_view to_string(Label label) noexcept;
Label parse_label(std::string_view text);

struct Node {
  NodeId id = 0;
  std::string key;
  std::vector<double> attr;
};

struct Edge {
  EdgeId id = 0;
  NodeId a = 0;
  NodeId b = 0;
  std::vector<double> attr;
  Label label = Label::unlabeled;

  bool is_loop() const noexcept { return a == b; }
  NodeId other(NodeId n) const noexcept { return n == a ? b : a; }
};

struct NodeInput {
  std::string key;
  std::vector<double> attr;  // may be empty; see node_attr_from_edges
};

struct EdgeInput {
  std::string key_a;
  std::string key_b;
  std::vector<double> attr;
  Label label = Label::unlabeled;
};

// Undirected attributed multigraph. Nodes are network entities, edges are
// individual behaviors. Immutable once built; the with_* helpers return copies.
class BehaviorGraph {
 public:
  BehaviorGraph() = default;

  // Ids are assigned densely in input order. Throws UnknownEndpointKey or
  // InconsistentDimension.
  static BehaviorGraph build(std::vector<NodeInput> nodes, std::vector<EdgeInput> edges);

  std::span<const Node> nodes() const noexcept { return nodes_; }
  std::span<const Edge> edges() const noexcept { return edges_; }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  const Edge& edge(EdgeId id) const { return edges_.at(id); }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }

  // Sorted ids of edges touching the node; a self-loop is listed once.
  std::span<const EdgeId> incident(NodeId id) const;

  std::size_t node_dim() const noexcept { return node_dim_; }
  std::size_t edge_dim() const noexcept { return edge_dim_; }

  std::optional<NodeId> find_node(std::string_view key) const;
  std::size_t count(Label label) const noexcept;

  BehaviorGraph with_edge_attrs(std::vector<std::vector<double>> attrs) const;
  BehaviorGraph with_node_attrs(std::vector<std::vector<double>> attrs) const;

 private:
  void index();

  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> incidence_offsets_;
  std::vector<EdgeId> incidence_;
  std::unordered_map<std::string, NodeId> by_key_;
  std::size_t node_dim_ = 0;
  std::size_t edge_dim_ = 0;
};

// Fills every node that has no attributes with [log(1 + degree), mean of
// incident edge attributes]. Isolated nodes get zeros.
BehaviorGraph node_attr_from_edges(const BehaviorGraph& g);

struct AdjacentEdge {
  EdgeId neighbor = 0;
  NodeId shared = 0;
  NodeId outer_self = 0;      // the other endpoint of the edge owning the entry
  NodeId outer_neighbor = 0;  // the other endpoint of `neighbor`
};

// For each edge, the edges sharing an endpoint with it. Parallel edges appear
// once per shared node. Stored in CSR form.
class EdgeAdjacency {
 public:
  static EdgeAdjacency build(const BehaviorGraph& g);

  std::span<const AdjacentEdge> neighbors(EdgeId e) const {
    return {entries_.data() + offsets_[e], offsets_[e + 1] - offsets_[e]};
  }
  std::size_t edge_count() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t entry_count() const noexcept { return entries_.size(); }
  // Position of the first entry of edge e in the flat entry list.
  std::size_t offset(EdgeId e) const { return offsets_[e]; }
  std::span<const AdjacentEdge> entries() const noexcept { return entries_; }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<AdjacentEdge> entries_;
};

}  // namespace phogad
