#pragma once

// Strong partitions from label rasters: domains live on the grid shifted by
// half a step, so neighbouring domains share a dual boundary and the closed
// domains cover the torus.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "torpart/fd_laplace.hpp"
#include "torpart/grid.hpp"

namespace torpart {

/// Pair of 4-neighbours (east or north of `p`) carrying different labels.
struct DualEdge {
  int p = 0;
  int q = 0;
  bool operator==(const DualEdge&) const = default;
};

struct StrongPartition {
  PeriodicGrid grid;           // original grid; shifted point (i+1/2, j+1/2) reuses index (i, j)
  std::vector<int> labels;     // original labels
  int k = 0;
  std::vector<int> shifted;    // label of each shifted point
  std::vector<DualEdge> boundary_edges;
  int tie_cells = 0;           // shifted points decided by the smallest-label rule

  DomainMask domain(int label) const {
    std::vector<std::uint8_t> in(shifted.size());
    std::transform(shifted.begin(), shifted.end(), in.begin(), [label](int l) { return l == label ? 1 : 0; });
    return DomainMask(grid, std::move(in));
  }
};

namespace detail {

inline std::vector<DualEdge> unlike_edges(const PeriodicGrid& g, const std::vector<int>& labels) {
  std::vector<DualEdge> edges;
  for (int p = 0; p < g.size(); ++p) {
    const auto nb = g.neighbors(p);
    for (int q : {nb[0], nb[2]})
      if (labels[p] != labels[q]) edges.push_back({p, q});
  }
  return edges;
}

// Most frequent label among four; equal counts go to the smaller label.
inline int plurality(const std::array<int, 4>& around, bool& tie) {
  int best = 0, best_count = 0, leaders = 0;
  for (int c : around) {
    const int n = static_cast<int>(std::count(around.begin(), around.end(), c));
    if (n > best_count) {
      best = c;
      best_count = n;
      leaders = 1;
    } else if (n == best_count && c != best) {
      if (c < best) best = c;
      ++leaders;
    }
  }
  tie = leaders > 1;
  return best;
}

}  // namespace detail

/// Shifted point (i+1/2, j+1/2) takes the label held by most of its four
/// surrounding points; equal counts go to the smaller label.
inline StrongPartition extract(const LabelField& field) {
  const auto& g = field.grid;
  if (field.k < 1) throw InvalidArgument("partition needs k >= 1");
  if (static_cast<int>(field.labels.size()) != g.size()) throw InvalidArgument("label raster size mismatch");
  for (int l : field.labels)
    if (l < 1 || l > field.k) throw InvalidArgument("label outside 1..k: " + std::to_string(l));
  const auto present = field.counts();
  std::string missing;
  for (int l = 1; l <= field.k; ++l)
    if (present[l] == 0) missing += " " + std::to_string(l);
  if (!missing.empty()) throw InvalidArgument("labels absent from raster:" + missing);

  StrongPartition part;
  part.grid = g;
  part.labels = field.labels;
  part.k = field.k;
  part.shifted.assign(g.size(), 0);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const std::array<int, 4> around{field.labels[g.index(i, j)], field.labels[g.index(i + 1, j)],
                                      field.labels[g.index(i, j + 1)], field.labels[g.index(i + 1, j + 1)]};
      bool tie = false;
      const int best = detail::plurality(around, tie);
      if (tie) ++part.tie_cells;
      part.shifted[g.index(i, j)] = best;
    }
  part.boundary_edges = detail::unlike_edges(g, field.labels);

  for (int l = 1; l <= field.k; ++l)
    if (std::find(part.shifted.begin(), part.shifted.end(), l) == part.shifted.end())
      throw NumericalError("domain " + std::to_string(l) + " vanishes on the shifted grid");
  return part;
}

/// Components per label (index 0 unused), 4-neighbour with periodic wrap, on the shifted grid.
inline std::vector<int> connected_components(const StrongPartition& part) {
  std::vector<int> count(part.k + 1, 0);
  auto comps = connected_components(
      part.grid, [](int) { return true; }, [&](int p, int q) { return part.shifted[p] == part.shifted[q]; });
  std::vector<int> seen(comps.count, 0);
  for (int p = 0; p < part.grid.size(); ++p)
    if (!seen[comps.id[p]]) {
      seen[comps.id[p]] = 1;
      ++count[part.shifted[p]];
    }
  return count;
}

/// ((1/k) sum lambda_i^p)^(1/p), scaled by the max to stay finite for large p.
inline double pnorm_mean(const std::vector<double>& v, double p) {
  if (v.empty()) return 0.0;
  const double m = *std::max_element(v.begin(), v.end());
  if (m <= 0.0) return 0.0;
  double s = 0.0;
  for (double x : v) s += std::pow(x / m, p);
  return m * std::pow(s / static_cast<double>(v.size()), 1.0 / p);
}

struct EnergyReport {
  std::vector<double> per_domain_lambda1;
  std::vector<double> residuals;
  std::vector<int> points;
  double energy_max = 0.0;
  double energy_p = 0.0;
  double p = 0.0;
  int nx = 0, ny = 0;
  bool complete = true;
  std::string error;
};

/// Dirichlet lambda_1 of each shifted domain, then the max and p-mean.
/// A domain whose solve fails keeps a NaN entry and clears `complete`.
inline EnergyReport evaluate(const StrongPartition& part, double p = 8.0, double tol = 1e-8) {
  if (!(p >= 1.0)) throw InvalidArgument("p must be >= 1");
  EnergyReport rep;
  rep.p = p;
  rep.nx = part.grid.nx();
  rep.ny = part.grid.ny();
  rep.per_domain_lambda1.assign(part.k, std::nan(""));
  rep.residuals.assign(part.k, std::nan(""));
  rep.points.assign(part.k, 0);
  EigenOptions opt;
  opt.tol = tol;
  for (int l = 1; l <= part.k; ++l) {
    const DomainMask mask = part.domain(l);
    rep.points[l - 1] = mask.point_count;
    if (mask.is_full()) {
      rep.per_domain_lambda1[l - 1] = 0.0;  // the whole torus: no Dirichlet boundary
      rep.residuals[l - 1] = 0.0;
      continue;
    }
    auto res = smallest_eigenpairs(assemble_dirichlet(mask), 1, opt);
    if (!res.converged) {
      rep.complete = false;
      rep.error += "eigensolver did not converge on domain " + std::to_string(l) + "; ";
      continue;
    }
    rep.per_domain_lambda1[l - 1] = res.values[0];
    rep.residuals[l - 1] = res.residuals[0];
  }
  if (!rep.complete) {
    rep.energy_max = rep.energy_p = std::nan("");
    return rep;
  }
  rep.energy_max = *std::max_element(rep.per_domain_lambda1.begin(), rep.per_domain_lambda1.end());
  rep.energy_p = pnorm_mean(rep.per_domain_lambda1, p);
  return rep;
}

}  // namespace torpart
