#pragma once

// Brute-force Vietoris-Rips persistence used as a reference: every simplex up
// to dimension 2 is listed explicitly, the full boundary matrix is stored as
// dense bit columns, and the textbook left-to-right reduction is run on it.

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <vector>

namespace oracle {

struct Bar {
  int dim;
  double birth;
  double death;  // +inf for essential classes
  std::vector<unsigned> vertices;  // reduced killing column (dim 1) or V column of the birth edge
};

struct Cell {
  std::vector<unsigned> v;
  double scale;
};

inline double dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

inline std::vector<Cell> filtration(const std::vector<std::vector<double>>& pts, double max_scale) {
  const unsigned n = static_cast<unsigned>(pts.size());
  std::vector<Cell> cells;
  for (unsigned i = 0; i < n; ++i) cells.push_back({{i}, 0.0});
  for (unsigned i = 0; i < n; ++i)
    for (unsigned j = i + 1; j < n; ++j)
      if (dist(pts[i], pts[j]) <= max_scale) cells.push_back({{i, j}, dist(pts[i], pts[j])});
  for (unsigned i = 0; i < n; ++i)
    for (unsigned j = i + 1; j < n; ++j)
      for (unsigned k = j + 1; k < n; ++k) {
        const double d = std::max({dist(pts[i], pts[j]), dist(pts[i], pts[k]), dist(pts[j], pts[k])});
        if (d <= max_scale) cells.push_back({{i, j, k}, d});
      }
  std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
    return std::tuple(a.scale, a.v.size(), a.v) < std::tuple(b.scale, b.v.size(), b.v);
  });
  return cells;
}

// Bars of positive length in dimensions 0 and 1.
inline std::vector<Bar> persistence(const std::vector<std::vector<double>>& pts, double max_scale) {
  const auto cells = filtration(pts, max_scale);
  const std::size_t m = cells.size();
  auto index_of = [&](const std::vector<unsigned>& v) -> std::size_t {
    for (std::size_t i = 0; i < m; ++i)
      if (cells[i].v == v) return i;
    return m;
  };
  std::vector<std::vector<bool>> R(m, std::vector<bool>(m, false)), V(m, std::vector<bool>(m, false));
  for (std::size_t c = 0; c < m; ++c) {
    V[c][c] = true;
    const auto& v = cells[c].v;
    if (v.size() < 2) continue;
    for (std::size_t drop = 0; drop < v.size(); ++drop) {
      std::vector<unsigned> face;
      for (std::size_t k = 0; k < v.size(); ++k)
        if (k != drop) face.push_back(v[k]);
      R[c][index_of(face)] = true;
    }
  }
  auto low = [&](std::size_t c) -> long {
    for (std::size_t r = m; r-- > 0;)
      if (R[c][r]) return static_cast<long>(r);
    return -1;
  };
  std::vector<long> owner(m, -1);
  for (std::size_t c = 0; c < m; ++c) {
    for (long l = low(c); l >= 0 && owner[static_cast<std::size_t>(l)] >= 0; l = low(c)) {
      const auto o = static_cast<std::size_t>(owner[static_cast<std::size_t>(l)]);
      for (std::size_t r = 0; r < m; ++r) {
        R[c][r] = R[c][r] != R[o][r];
        V[c][r] = V[c][r] != V[o][r];
      }
    }
    if (low(c) >= 0) owner[static_cast<std::size_t>(low(c))] = static_cast<long>(c);
  }
  auto support_vertices = [&](const std::vector<bool>& col) {
    std::vector<unsigned> vs;
    for (std::size_t r = 0; r < m; ++r)
      if (col[r]) vs.insert(vs.end(), cells[r].v.begin(), cells[r].v.end());
    std::sort(vs.begin(), vs.end());
    vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
    return vs;
  };
  std::vector<Bar> bars;
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < m; ++c) {
    const int dim = static_cast<int>(cells[c].v.size()) - 1;
    if (dim > 1) continue;
    if (low(c) >= 0) continue;  // negative column
    if (owner[c] >= 0) {
      const auto killer = static_cast<std::size_t>(owner[c]);
      if (cells[killer].scale > cells[c].scale)
        bars.push_back({dim, cells[c].scale, cells[killer].scale, dim == 1 ? support_vertices(R[killer]) : std::vector<unsigned>{}});
    } else {
      bars.push_back({dim, cells[c].scale, inf, dim == 1 ? support_vertices(V[c]) : std::vector<unsigned>{}});
    }
  }
  return bars;
}

}  // namespace oracle
