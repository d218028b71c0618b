#pragma once

#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

namespace phogad::detail {

// Union-find whose representative is always the oldest (smallest) vertex of a
// component, with explicit member lists so the dying component of a merge can
// be reported.
class ComponentTracker {
 public:
  explicit ComponentTracker(std::size_t n) : parent_(n), members_(n) {
    std::iota(parent_.begin(), parent_.end(), std::uint32_t{0});
    for (std::uint32_t v = 0; v < n; ++v) members_[v] = {v};
  }

  std::uint32_t find(std::uint32_t x) {
    std::uint32_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      const std::uint32_t next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }

  const std::vector<std::uint32_t>& members(std::uint32_t root) const { return members_[root]; }

  // Merges the components of a and b. Returns the root of the younger
  // component (which dies) or -1 when a and b were already connected. The
  // dying member list is moved into `dying` before the merge.
  std::int64_t merge(std::uint32_t a, std::uint32_t b, std::vector<std::uint32_t>* dying = nullptr) {
    std::uint32_t ra = find(a), rb = find(b);
    if (ra == rb) return -1;
    if (ra > rb) std::swap(ra, rb);
    if (dying) *dying = members_[rb];
    parent_[rb] = ra;
    auto& into = members_[ra];
    auto& from = members_[rb];
    if (into.size() < from.size()) std::swap(into, from);
    into.insert(into.end(), from.begin(), from.end());
    from.clear();
    from.shrink_to_fit();
    return rb;
  }

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::vector<std::uint32_t>> members_;
};

}  // namespace phogad::detail
