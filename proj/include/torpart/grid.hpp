#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "torpart/common.hpp"

namespace torpart {

/// Uniform nx-by-ny sampling of T(a,b). Point (i,j) sits at (i*hx, j*hy);
/// indices wrap modulo (nx, ny). Flat index is i + nx*j.
class PeriodicGrid {
 public:
  PeriodicGrid() = default;
  PeriodicGrid(TorusGeometry geom, int nx, int ny) : geom_(geom), nx_(nx), ny_(ny) {
    geom_.validate();
    if (nx < 4 || ny < 4) throw InvalidArgument("periodic grid needs nx, ny >= 4");
  }

  const TorusGeometry& geom() const { return geom_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int size() const { return nx_ * ny_; }
  double hx() const { return geom_.a / nx_; }
  double hy() const { return geom_.b / ny_; }
  double cell_area() const { return hx() * hy(); }

  static int wrap(int i, int n) {
    int r = i % n;
    return r < 0 ? r + n : r;
  }
  int index(int i, int j) const { return wrap(i, nx_) + nx_ * wrap(j, ny_); }
  int col(int idx) const { return idx % nx_; }
  int row(int idx) const { return idx / nx_; }
  double x(int i) const { return i * hx(); }
  double y(int j) const { return j * hy(); }

  /// The four periodic neighbours (east, west, north, south).
  std::array<int, 4> neighbors(int idx) const {
    const int i = col(idx), j = row(idx);
    return {index(i + 1, j), index(i - 1, j), index(i, j + 1), index(i, j - 1)};
  }

  bool operator==(const PeriodicGrid& o) const {
    return geom_.a == o.geom_.a && geom_.b == o.geom_.b && nx_ == o.nx_ && ny_ == o.ny_;
  }

 private:
  TorusGeometry geom_;
  int nx_ = 0;
  int ny_ = 0;
};

/// Discrete subdomain: the set of grid points flagged inside.
struct DomainMask {
  PeriodicGrid grid;
  std::vector<std::uint8_t> inside;
  int point_count = 0;

  DomainMask() = default;
  DomainMask(PeriodicGrid g, std::vector<std::uint8_t> in) : grid(std::move(g)), inside(std::move(in)) {
    if (static_cast<int>(inside.size()) != grid.size())
      throw InvalidArgument("mask size does not match grid");
    point_count = static_cast<int>(std::count_if(inside.begin(), inside.end(), [](auto v) { return v != 0; }));
  }

  static DomainMask full(const PeriodicGrid& g) {
    return DomainMask(g, std::vector<std::uint8_t>(g.size(), 1));
  }

  template <class Pred>
  static DomainMask from_predicate(const PeriodicGrid& g, Pred&& pred) {
    std::vector<std::uint8_t> in(g.size(), 0);
    for (int j = 0; j < g.ny(); ++j)
      for (int i = 0; i < g.nx(); ++i) in[g.index(i, j)] = pred(g.x(i), g.y(j)) ? 1 : 0;
    return DomainMask(g, std::move(in));
  }

  bool empty() const { return point_count == 0; }
  bool is_full() const { return point_count == grid.size(); }
};

/// Integer label per grid point, labels in 1..k.
struct LabelField {
  PeriodicGrid grid;
  std::vector<int> labels;
  int k = 0;

  DomainMask mask_of(int label) const {
    std::vector<std::uint8_t> in(labels.size());
    std::transform(labels.begin(), labels.end(), in.begin(), [label](int l) { return l == label ? 1 : 0; });
    return DomainMask(grid, std::move(in));
  }

  std::vector<int> counts() const {
    std::vector<int> c(k + 1, 0);
    for (int l : labels)
      if (l >= 1 && l <= k) ++c[l];
    return c;
  }
};

/// Connected components of the points accepted by `keep`, where two
/// 4-neighbours (with periodic wrap) are joined when `same(p, q)` holds.
/// Returns a component id per point (-1 for rejected points) and the count.
struct ComponentMap {
  std::vector<int> id;
  int count = 0;
};

template <class Keep, class Same>
ComponentMap connected_components(const PeriodicGrid& grid, Keep&& keep, Same&& same) {
  ComponentMap out;
  out.id.assign(grid.size(), -1);
  std::vector<int> stack;
  for (int s = 0; s < grid.size(); ++s) {
    if (out.id[s] >= 0 || !keep(s)) continue;
    const int c = out.count++;
    out.id[s] = c;
    stack.push_back(s);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      for (int q : grid.neighbors(p)) {
        if (out.id[q] >= 0 || !keep(q) || !same(p, q)) continue;
        out.id[q] = c;
        stack.push_back(q);
      }
    }
  }
  return out;
}

}  // namespace torpart
