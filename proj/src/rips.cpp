// Implicit Vietoris-Rips persistence in dimensions 0 and 1.
//
// Dimension 0 comes from a union-find sweep over the edges. Dimension-1 pairs
// come from reducing the coboundary matrix of the edges in reverse filtration
// order, with the zero-dimensional deaths cleared and apparent pairs taken
// without any column work. Representative cycles of finite classes are then
// recovered lazily from the homology side: the reduced boundary column of a
// killing triangle only ever absorbs the reduced columns of other killing
// triangles, and the pairing tells us which one owns each pivot.

#include <algorithm>
#include <cmath>
#include <queue>
#include <unordered_map>
#include <unordered_set>

#include "components.hpp"
#include "phogad/error.hpp"
#include "phogad/homology.hpp"

namespace phogad {
namespace {

struct RipsEdge {
  double length;
  std::uint32_t i;
  std::uint32_t j;  // i < j
};

struct Triangle {
  double diam;
  std::uint32_t a, b, c;  // a < b < c

  auto key() const { return std::tuple(diam, a, b, c); }
  bool operator<(const Triangle& o) const { return key() < o.key(); }
  bool operator>(const Triangle& o) const { return key() > o.key(); }
  bool operator==(const Triangle& o) const { return a == o.a && b == o.b && c == o.c; }
};

class RipsComplex {
 public:
  RipsComplex(const PointCloud& pc, double max_scale) : n_(static_cast<std::uint32_t>(pc.size())) {
    dist_.assign(static_cast<std::size_t>(n_) * n_, 0.0);
    for (std::uint32_t i = 0; i < n_; ++i)
      for (std::uint32_t j = i + 1; j < n_; ++j) dist_[i * n_ + j] = dist_[j * n_ + i] = euclidean(pc.points[i], pc.points[j]);
    for (std::uint32_t i = 0; i < n_; ++i)
      for (std::uint32_t j = i + 1; j < n_; ++j)
        if (dist_[i * n_ + j] <= max_scale) edges_.push_back(RipsEdge{dist_[i * n_ + j], i, j});
    std::sort(edges_.begin(), edges_.end(), [](const RipsEdge& x, const RipsEdge& y) {
      return std::tie(x.length, x.i, x.j) < std::tie(y.length, y.i, y.j);
    });
    index_.assign(static_cast<std::size_t>(n_) * n_, -1);
    for (std::size_t k = 0; k < edges_.size(); ++k) {
      const auto& e = edges_[k];
      index_[e.i * n_ + e.j] = index_[e.j * n_ + e.i] = static_cast<std::int64_t>(k);
    }
  }

  std::uint32_t points() const { return n_; }
  const std::vector<RipsEdge>& edges() const { return edges_; }
  std::int64_t edge_index(std::uint32_t i, std::uint32_t j) const { return index_[i * n_ + j]; }

  Triangle make_triangle(std::uint32_t x, std::uint32_t y, std::uint32_t z) const {
    if (x > y) std::swap(x, y);
    if (y > z) std::swap(y, z);
    if (x > y) std::swap(x, y);
    const double diam = std::max({dist_[x * n_ + y], dist_[x * n_ + z], dist_[y * n_ + z]});
    return Triangle{diam, x, y, z};
  }

  // A cofacet of the same diameter as the edge, lowest in filtration order.
  // It is the edge's smallest cofacet whenever it exists, and only such a
  // cofacet can form an apparent pair with the edge.
  std::optional<Triangle> same_diameter_cofacet(std::uint32_t edge) const {
    const auto& e = edges_[edge];
    const double* di = dist_.data() + static_cast<std::size_t>(e.i) * n_;
    const double* dj = dist_.data() + static_cast<std::size_t>(e.j) * n_;
    // Vertices i and j are shared, so at equal diameter the lowest k sorts first.
    for (std::uint32_t k = 0; k < n_; ++k)
      if (di[k] <= e.length && dj[k] <= e.length && k != e.i && k != e.j) return make_triangle(e.i, e.j, k);
    return std::nullopt;
  }

  // Edge indices of the triangle's facets; the largest is the latest facet.
  std::array<std::uint32_t, 3> facets(const Triangle& t) const {
    std::array<std::uint32_t, 3> f = {static_cast<std::uint32_t>(edge_index(t.a, t.b)),
                                      static_cast<std::uint32_t>(edge_index(t.a, t.c)),
                                      static_cast<std::uint32_t>(edge_index(t.b, t.c))};
    std::sort(f.begin(), f.end());
    return f;
  }

  template <class F>
  void for_each_cofacet(std::uint32_t edge, F&& visit) const {
    const auto& e = edges_[edge];
    const std::int64_t* row_i = index_.data() + static_cast<std::size_t>(e.i) * n_;
    const std::int64_t* row_j = index_.data() + static_cast<std::size_t>(e.j) * n_;
    for (std::uint32_t k = 0; k < n_; ++k) {
      if (k == e.i || k == e.j || row_i[k] < 0 || row_j[k] < 0) continue;
      visit(make_triangle(e.i, e.j, k));
    }
  }

  std::uint64_t key(const Triangle& t) const {
    return (static_cast<std::uint64_t>(t.a) * n_ + t.b) * n_ + t.c;
  }

 private:
  std::uint32_t n_;
  std::vector<double> dist_;
  std::vector<RipsEdge> edges_;
  std::vector<std::int64_t> index_;
};

using MinHeap = std::priority_queue<Triangle, std::vector<Triangle>, std::greater<Triangle>>;

// Pivot of a Z/2 column stored as a heap with repeated entries.
std::optional<Triangle> pivot(MinHeap& heap) {
  while (!heap.empty()) {
    const Triangle top = heap.top();
    heap.pop();
    if (!heap.empty() && heap.top() == top) {
      heap.pop();
      continue;
    }
    heap.push(top);
    return top;
  }
  return std::nullopt;
}

std::vector<EdgeId> to_edge_ids(std::vector<std::uint32_t> points, const std::vector<EdgeId>& ids) {
  std::vector<EdgeId> out;
  out.reserve(points.size());
  for (auto p : points) out.push_back(ids[p]);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

PersistenceDiagram compute_rips_persistence(const PointCloud& pc, double max_scale) {
  if (!(max_scale > 0.0)) throw Error(Errc::invalid_argument, "max_scale must be positive");
  const RipsComplex rips(pc, max_scale);
  const auto& edges = rips.edges();
  const std::uint32_t n = rips.points();
  constexpr double inf = std::numeric_limits<double>::infinity();

  PersistenceDiagram diag;
  diag.max_scale = max_scale;
  diag.point_count = n;

  // Dimension 0.
  detail::ComponentTracker components(n);
  std::vector<bool> kills_component(edges.size(), false);
  std::vector<std::uint32_t> dying;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (components.merge(edges[k].i, edges[k].j, &dying) < 0) continue;
    kills_component[k] = true;
    if (edges[k].length > 0.0)
      diag.features.push_back(PersistenceFeature{0, 0.0, edges[k].length, to_edge_ids(dying, pc.ids)});
  }
  for (std::uint32_t v = 0; v < n; ++v)
    if (components.find(v) == v)
      diag.features.push_back(PersistenceFeature{0, 0.0, inf, to_edge_ids(components.members(v), pc.ids)});

  // Dimension 1 pairs via cohomology.
  std::unordered_map<std::uint64_t, std::uint32_t> pivot_owner;  // triangle -> edge
  std::unordered_map<std::uint32_t, std::vector<std::uint32_t>> combination;  // non-trivial V columns
  std::vector<std::optional<Triangle>> killer(edges.size());
  std::vector<std::uint32_t> essential;

  for (std::size_t idx = edges.size(); idx-- > 0;) {
    if (kills_component[idx]) continue;
    const auto sigma = static_cast<std::uint32_t>(idx);

    const auto first = rips.same_diameter_cofacet(sigma);
    if (first && rips.facets(*first)[2] == sigma && !pivot_owner.count(rips.key(*first))) {
      pivot_owner.emplace(rips.key(*first), sigma);
      killer[sigma] = first;
      continue;
    }

    MinHeap heap;
    rips.for_each_cofacet(sigma, [&](const Triangle& t) { heap.push(t); });
    std::unordered_set<std::uint32_t> used{sigma};
    for (;;) {
      auto piv = pivot(heap);
      if (!piv) {
        essential.push_back(sigma);
        break;
      }
      auto owner = pivot_owner.find(rips.key(*piv));
      if (owner == pivot_owner.end()) {
        pivot_owner.emplace(rips.key(*piv), sigma);
        killer[sigma] = piv;
        if (used.size() > 1) {
          std::vector<std::uint32_t> v(used.begin(), used.end());
          std::sort(v.begin(), v.end());
          combination.emplace(sigma, std::move(v));
        }
        break;
      }
      const std::uint32_t other = owner->second;
      auto comb = combination.find(other);
      const std::vector<std::uint32_t> single{other};
      const auto& parts = comb == combination.end() ? single : comb->second;
      for (auto e : parts) {
        if (!used.erase(e)) used.insert(e);
        rips.for_each_cofacet(e, [&](const Triangle& t) { heap.push(t); });
      }
    }
  }

  // Reduced boundary columns of killing triangles, computed on demand.
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> reduced;
  auto reduce = [&](const Triangle& target) -> const std::vector<std::uint32_t>& {
    std::vector<Triangle> stack{target};
    while (!stack.empty()) {
      const Triangle t = stack.back();
      if (reduced.count(rips.key(t))) {
        stack.pop_back();
        continue;
      }
      auto f = rips.facets(t);
      std::vector<std::uint32_t> col(f.begin(), f.end());
      bool blocked = false;
      while (!col.empty()) {
        const auto low = col.back();
        const auto& k = killer[low];
        if (!k) throw Error(Errc::bad_format, "pivot edge without a killing triangle");
        if (*k == t) break;
        if (!(*k < t)) throw Error(Errc::bad_format, "inconsistent one-dimensional pairing");
        auto done = reduced.find(rips.key(*k));
        if (done == reduced.end()) {
          stack.push_back(*k);
          blocked = true;
          break;
        }
        std::vector<std::uint32_t> sum;
        std::set_symmetric_difference(col.begin(), col.end(), done->second.begin(), done->second.end(),
                                      std::back_inserter(sum));
        col.swap(sum);
      }
      if (blocked) continue;
      reduced.emplace(rips.key(t), std::move(col));
      stack.pop_back();
    }
    return reduced.at(rips.key(target));
  };

  for (std::uint32_t sigma = 0; sigma < edges.size(); ++sigma) {
    const auto& k = killer[sigma];
    if (!k || !(k->diam > edges[sigma].length)) continue;
    const auto& col = reduce(*k);
    if (col.empty() || col.back() != sigma) throw Error(Errc::bad_format, "representative cycle lost its pivot");
    std::vector<std::uint32_t> verts;
    for (auto e : col) {
      verts.push_back(edges[e].i);
      verts.push_back(edges[e].j);
    }
    diag.features.push_back(PersistenceFeature{1, edges[sigma].length, k->diam, to_edge_ids(std::move(verts), pc.ids)});
  }

  // Surviving cycles: the edge plus the spanning-forest path that existed
  // when it entered, which is the edge's column of the reduction matrix.
  if (!essential.empty()) {
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> forest(n);  // (neighbor, edge index)
    for (std::uint32_t k = 0; k < edges.size(); ++k)
      if (kills_component[k]) {
        forest[edges[k].i].emplace_back(edges[k].j, k);
        forest[edges[k].j].emplace_back(edges[k].i, k);
      }
    for (auto sigma : essential) {
      std::vector<std::int64_t> came_from(n, -2);
      std::vector<std::uint32_t> queue{edges[sigma].i};
      came_from[edges[sigma].i] = -1;
      for (std::size_t head = 0; head < queue.size(); ++head) {
        const auto v = queue[head];
        for (auto [w, k] : forest[v])
          if (k < sigma && came_from[w] == -2) {
            came_from[w] = v;
            queue.push_back(w);
          }
      }
      std::vector<std::uint32_t> verts;
      for (std::int64_t v = edges[sigma].j; v >= 0; v = came_from[static_cast<std::size_t>(v)]) {
        if (came_from[static_cast<std::size_t>(v)] == -2) throw Error(Errc::bad_format, "essential edge outside a component");
        verts.push_back(static_cast<std::uint32_t>(v));
      }
      diag.features.push_back(PersistenceFeature{1, edges[sigma].length, inf, to_edge_ids(std::move(verts), pc.ids)});
    }
  }

  detail::canonicalize(diag.features);
  return diag;
}

}  // namespace phogad
