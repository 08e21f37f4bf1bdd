#pragma once

// Hexagonal tilings of T(1,b) with the equal angle meeting property.
//
// An integer wrap matrix V (det V = +-k) fixes the translation lattice
// Z u1 + Z u2 of the tiling. When the triangle (0, u1, u2) has a Fermat point
// P, the segments 0P, P u2 and P u1 and their lattice translates bound a
// tiling by one hexagon with all interior angles 2 pi / 3; its k lattice
// classes modulo the torus periods are the k domains of the partition.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "torpart/common.hpp"
#include "torpart/fd_laplace.hpp"
#include "torpart/grid.hpp"

namespace torpart {

using Vec2 = Eigen::Vector2d;

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// How the tiling wraps around the torus; columns are the windings of k
/// successive translates along u1 and u2.
struct WrapMatrix {
  std::array<std::array<int, 2>, 2> v{};
  int k = 0;

  WrapMatrix() = default;
  WrapMatrix(int v11, int v12, int v21, int v22, int k_) : v{{{v11, v12}, {v21, v22}}}, k(k_) {}

  int det() const { return v[0][0] * v[1][1] - v[0][1] * v[1][0]; }

  void validate() const {
    if (k < 1) throw InvalidArgument("wrap matrix needs k >= 1");
    if (std::abs(det()) != k)
      throw InvalidArgument("wrap matrix determinant is " + std::to_string(det()) + ", expected +-" +
                            std::to_string(k));
  }

  static WrapMatrix v3() { return {2, 1, -1, 1, 3}; }
  static WrapMatrix v4() { return {1, -1, 2, 2, 4}; }
  static WrapMatrix v5() { return {1, -1, 2, 3, 5}; }

  /// The matrices for which closed-form thresholds are known, k in {3,4,5}.
  static std::optional<WrapMatrix> standard(int k) {
    switch (k) {
      case 3: return v3();
      case 4: return v4();
      case 5: return v5();
      default: return std::nullopt;
    }
  }
};

struct AdaptedBasis {
  Vec2 u1 = Vec2::Zero();
  Vec2 u2 = Vec2::Zero();

  double det() const { return cross(u1, u2); }
};

/// u1 = (v11/k) e1 + (v21/k) b e2,  u2 = (v12/k) e1 + (v22/k) b e2.
inline AdaptedBasis adapted_basis(const WrapMatrix& V, double b) {
  V.validate();
  if (!(b > 0.0)) throw InvalidArgument("b must be positive");
  const double k = V.k;
  AdaptedBasis basis;
  basis.u1 = Vec2(V.v[0][0] / k, V.v[1][0] * b / k);
  basis.u2 = Vec2(V.v[0][1] / k, V.v[1][1] * b / k);
  if (std::abs(std::abs(basis.det()) - b / k) > 1e-13 * b)
    throw NumericalError("adapted basis does not span area b/k");
  return basis;
}

struct FermatTest {
  double p = 0.0;  // cosine of the angle between u1 and u2
  double r = 0.0;  // |u1| / |u2|
  bool exists = false;
};

/// Existence of a Fermat point of the triangle (P0, P0+u1, P0+u2).
inline FermatTest fermat_test(const AdaptedBasis& basis) {
  const double n1 = basis.u1.norm(), n2 = basis.u2.norm();
  if (n1 == 0.0 || n2 == 0.0) throw InvalidArgument("basis vectors must be nonzero");
  if (std::abs(basis.det()) <= 1e-14 * n1 * n2) throw InvalidArgument("basis vectors are colinear");
  FermatTest t;
  t.p = basis.u1.dot(basis.u2) / (n1 * n2);
  t.r = n1 / n2;
  if (t.p > -0.5 && t.p <= 0.5) {
    t.exists = true;
  } else if (t.p > 0.5 && t.p < 1.0) {
    const double q = t.p - std::sqrt((1.0 - t.p * t.p) / 3.0);
    t.exists = q < t.r && t.r < 1.0 / q;
  }
  return t;
}

namespace detail {

// Apex of the equilateral triangle erected on segment (a, b) away from `opposite`.
inline Vec2 outer_apex(const Vec2& a, const Vec2& b, const Vec2& opposite) {
  const Vec2 mid = 0.5 * (a + b);
  const Vec2 d = b - a;
  Vec2 normal(-d.y(), d.x());
  normal.normalize();
  if (normal.dot(opposite - mid) > 0.0) normal = -normal;
  return mid + (std::sqrt(3.0) / 2.0) * d.norm() * normal;
}

inline Vec2 intersect_lines(const Vec2& p, const Vec2& p_dir, const Vec2& q, const Vec2& q_dir) {
  const double denom = cross(p_dir, q_dir);
  if (std::abs(denom) <= 1e-300) throw NumericalError("parallel construction lines");
  const double s = cross(q - p, q_dir) / denom;
  return p + s * p_dir;
}

inline double angle_between(const Vec2& a, const Vec2& b) {
  return std::atan2(std::abs(cross(a, b)), a.dot(b));
}

}  // namespace detail

/// Interior angles of the triangle at P0, P1, P2.
inline std::array<double, 3> triangle_angles(const Vec2& p0, const Vec2& p1, const Vec2& p2) {
  return {detail::angle_between(p1 - p0, p2 - p0), detail::angle_between(p0 - p1, p2 - p1),
          detail::angle_between(p0 - p2, p1 - p2)};
}

/// Fermat point as the meeting point of the lines joining each vertex to the
/// apex of the outer equilateral triangle on the opposite side.
inline Vec2 fermat_point(const Vec2& p0, const Vec2& p1, const Vec2& p2) {
  if (std::abs(cross(p1 - p0, p2 - p0)) <= 1e-14 * (p1 - p0).norm() * (p2 - p0).norm())
    throw InvalidArgument("degenerate triangle has no Fermat point");
  for (double a : triangle_angles(p0, p1, p2))
    if (a >= 2.0 * kPi / 3.0) throw InvalidArgument("triangle has an angle >= 2pi/3; no Fermat point");

  const Vec2 e0 = detail::outer_apex(p1, p2, p0);
  const Vec2 e1 = detail::outer_apex(p2, p0, p1);
  const Vec2 e2 = detail::outer_apex(p0, p1, p2);
  // Intersect the two best-conditioned lines; the third is a residual check.
  std::array<std::pair<Vec2, Vec2>, 3> lines{{{p0, e0 - p0}, {p1, e1 - p1}, {p2, e2 - p2}}};
  int skip = 0;
  double best = -1.0;
  for (int s = 0; s < 3; ++s) {
    const auto& a = lines[(s + 1) % 3];
    const auto& b = lines[(s + 2) % 3];
    const double conditioning = std::abs(cross(a.second.normalized(), b.second.normalized()));
    if (conditioning > best) {
      best = conditioning;
      skip = s;
    }
  }
  const auto& a = lines[(skip + 1) % 3];
  const auto& b = lines[(skip + 2) % 3];
  const Vec2 fp = detail::intersect_lines(a.first, a.second, b.first, b.second);

  const auto& third = lines[skip];
  const double scale = std::max({(p1 - p0).norm(), (p2 - p0).norm(), (p2 - p1).norm()});
  const double miss = std::abs(cross(fp - third.first, third.second.normalized()));
  if (miss > 1e-9 * scale) throw NumericalError("Fermat construction lines do not meet");
  return fp;
}

struct HexTiling {
  WrapMatrix V;
  double b = 1.0;
  AdaptedBasis basis;
  Vec2 fermat = Vec2::Zero();
  std::array<Vec2, 6> vertices{};  // counter-clockwise

  int k() const { return V.k; }

  double area() const {
    double s = 0.0;
    for (int i = 0; i < 6; ++i) s += cross(vertices[i], vertices[(i + 1) % 6]);
    return 0.5 * s;
  }

  Vec2 edge(int i) const { return vertices[(i + 1) % 6] - vertices[i % 6]; }

  std::array<double, 6> side_lengths() const {
    std::array<double, 6> s{};
    for (int i = 0; i < 6; ++i) s[i] = edge(i).norm();
    return s;
  }

  std::array<double, 6> interior_angles() const {
    std::array<double, 6> a{};
    for (int i = 0; i < 6; ++i) {
      const Vec2 in = edge(i + 5), out = edge(i);
      a[i] = kPi - std::atan2(cross(in, out), in.dot(out));
    }
    return a;
  }

  Vec2 centroid() const {
    Vec2 c = Vec2::Zero();
    for (const auto& v : vertices) c += v;
    return c / 6.0;
  }

  double diameter() const {
    double d = 0.0;
    for (const auto& p : vertices)
      for (const auto& q : vertices) d = std::max(d, (p - q).norm());
    return d;
  }

  /// Signed slack of the point against the closed hexagon translated by `shift`:
  /// positive strictly inside, ~0 on the boundary, negative outside.
  double inside_margin(const Vec2& x, const Vec2& shift = Vec2::Zero()) const {
    double m = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 6; ++i) {
      const Vec2 e = edge(i);
      m = std::min(m, cross(e, x - shift - vertices[i]) / e.norm());
    }
    return m;
  }

  /// Translation vectors to the three neighbour classes j = 1, 2, 3.
  std::array<Vec2, 3> neighbor_shifts() const { return {basis.u1, basis.u2, basis.u1 - basis.u2}; }
};

/// Builds the hexagon P0, P, P0+u2, P+u2-u1, P0+u2-u1, P-u1 (P0 at the origin)
/// and verifies closure, area b/k and the 2pi/3 angles.
inline HexTiling build_tiling(const WrapMatrix& V, double b) {
  const AdaptedBasis basis = adapted_basis(V, b);
  const FermatTest ft = fermat_test(basis);
  if (!ft.exists) {
    std::ostringstream msg;
    msg << "no hexagonal tiling: Fermat condition fails (p=" << ft.p << ", r=" << ft.r << ")";
    throw InvalidArgument(msg.str());
  }
  const Vec2 p0 = Vec2::Zero();
  const Vec2& u1 = basis.u1;
  const Vec2& u2 = basis.u2;
  const Vec2 p = fermat_point(p0, p0 + u1, p0 + u2);

  HexTiling t;
  t.V = V;
  t.b = b;
  t.basis = basis;
  t.fermat = p;
  t.vertices = {p0, p, p0 + u2, p + u2 - u1, p0 + u2 - u1, p - u1};
  if (t.area() < 0.0) std::reverse(t.vertices.begin(), t.vertices.end());

  const double scale = std::max(u1.norm(), u2.norm());
  for (int i = 0; i < 3; ++i)
    if ((t.edge(i) + t.edge(i + 3)).norm() > 1e-12 * scale)
      throw NumericalError("hexagon opposite sides are not lattice translates");
  const double area = t.area();
  if (std::abs(area - b / V.k) > 1e-12 * b)
    throw NumericalError("hexagon area differs from b/k");
  for (double a : t.interior_angles())
    if (std::abs(a - 2.0 * kPi / 3.0) > 1e-9) throw NumericalError("hexagon angle differs from 2pi/3");
  return t;
}

/// Infimum of b in (0,1] for which the Fermat condition holds, by bisection.
inline double threshold_bH(const WrapMatrix& V) {
  V.validate();
  auto passes = [&](double b) { return fermat_test(adapted_basis(V, b)).exists; };
  if (!passes(1.0)) throw InvalidArgument("Fermat condition fails at b = 1 for this wrap matrix");

  // The passing set must be an interval (c, 1]; sample to find c's bracket and
  // assert there is no second sign change.
  constexpr int kSamples = 1000;
  double lo = 0.0, hi = 1.0;
  bool seen_fail = false;
  for (int s = kSamples; s >= 1; --s) {
    const double b = static_cast<double>(s) / kSamples;
    const bool ok = passes(b);
    if (!ok && !seen_fail) {
      seen_fail = true;
      lo = b;
      hi = static_cast<double>(s + 1) / kSamples;
    } else if (ok && seen_fail) {
      throw NumericalError("Fermat condition is not monotone in b for this wrap matrix");
    }
  }
  if (!seen_fail) {
    lo = 0.0;
    hi = 1.0 / kSamples;
  }
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= 0.0) break;
    (passes(mid) ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Label field of the whole tiling on a torus grid, with the base tile's mask.
struct RasterTiling {
  LabelField labels;
  DomainMask tile;
  int tile_label = 0;
};

namespace detail {

// Lattice class of the tile n1 u1 + n2 u2 modulo the torus periods: V n mod k.
inline std::pair<int, int> lattice_class(const WrapMatrix& V, long n1, long n2) {
  const long k = V.k;
  auto mod = [k](long x) { return static_cast<int>(((x % k) + k) % k); };
  return {mod(V.v[0][0] * n1 + V.v[0][1] * n2), mod(V.v[1][0] * n1 + V.v[1][1] * n2)};
}

}  // namespace detail

inline RasterTiling rasterize(const HexTiling& tiling, const PeriodicGrid& grid) {
  if (std::abs(grid.geom().a - 1.0) > 1e-12 || std::abs(grid.geom().b - tiling.b) > 1e-12)
    throw InvalidArgument("rasterize expects a grid on T(1,b) matching the tiling");
  const double h = std::max(grid.hx(), grid.hy());
  if (tiling.diameter() / h < 24.0) throw InvalidArgument("grid under-resolves the hexagon (< 24 points across)");

  const int k = tiling.k();
  std::map<std::pair<int, int>, int> label_of;
  for (long n1 = 0; n1 < k; ++n1)
    for (long n2 = 0; n2 < k; ++n2) label_of.emplace(detail::lattice_class(tiling.V, n1, n2), 0);
  if (static_cast<int>(label_of.size()) != k) throw NumericalError("lattice classes do not number k");
  int next = 1;
  for (auto& [key, label] : label_of) label = next++;

  Eigen::Matrix2d u;
  u.col(0) = tiling.basis.u1;
  u.col(1) = tiling.basis.u2;
  const Eigen::Matrix2d uinv = u.inverse();
  const Vec2 c = tiling.centroid();

  LabelField field{grid, std::vector<int>(grid.size(), 0), k};
  for (int j = 0; j < grid.ny(); ++j)
    for (int i = 0; i < grid.nx(); ++i) {
      const Vec2 x(grid.x(i), grid.y(j));
      const Vec2 t = uinv * (x - c);
      const long r1 = std::lround(t.x()), r2 = std::lround(t.y());
      double best = -std::numeric_limits<double>::infinity();
      long b1 = r1, b2 = r2;
      for (long d1 = -2; d1 <= 2; ++d1)
        for (long d2 = -2; d2 <= 2; ++d2) {
          const Vec2 shift = (r1 + d1) * tiling.basis.u1 + (r2 + d2) * tiling.basis.u2;
          const double m = tiling.inside_margin(x, shift);
          if (m > best) {
            best = m;
            b1 = r1 + d1;
            b2 = r2 + d2;
          }
        }
      field.labels[grid.index(i, j)] = label_of.at(detail::lattice_class(tiling.V, b1, b2));
    }

  RasterTiling out;
  out.tile_label = label_of.at({0, 0});
  out.tile = field.mask_of(out.tile_label);
  out.labels = std::move(field);
  return out;
}

namespace detail {

// Square periodic box around the polygon(s) with spacing diameter/resolution.
inline PeriodicGrid local_box(const std::vector<Vec2>& pts, double spacing, Vec2& origin) {
  Vec2 lo = pts.front(), hi = pts.front();
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double extent = (hi - lo).maxCoeff();
  const int n = std::max(8, static_cast<int>(std::ceil(extent / spacing)) + 8);
  origin = 0.5 * (lo + hi) - Vec2::Constant(0.5 * n * spacing);
  return PeriodicGrid({n * spacing, n * spacing}, n, n);
}

}  // namespace detail

struct HexEnergy {
  double lambda1 = 0.0;
  double upper_bound = 0.0;  // min(k^2 pi^2, lambda1)
  double spacing = 0.0;
  int grid_n = 0;
  int points = 0;
};

/// lambda_1 of the hexagonal tiling domain, on a local grid with `resolution`
/// points across the hexagon's diameter.
inline HexEnergy hex_lambda1(const HexTiling& tiling, int resolution, double tol = 1e-8) {
  const double spacing = tiling.diameter() / resolution;
  Vec2 origin;
  const PeriodicGrid g = detail::local_box({tiling.vertices.begin(), tiling.vertices.end()}, spacing, origin);
  const double eps = 1e-9 * spacing;
  auto mask = DomainMask::from_predicate(
      g, [&](double x, double y) { return tiling.inside_margin(origin + Vec2(x, y)) > eps; });
  HexEnergy e;
  e.lambda1 = lambda1(mask, tol);
  e.upper_bound = std::min(static_cast<double>(tiling.k()) * tiling.k() * kPi2, e.lambda1);
  e.spacing = spacing;
  e.grid_n = g.nx();
  e.points = mask.point_count;
  return e;
}

inline HexEnergy hex_lambda1(const WrapMatrix& V, double b, int resolution, double tol = 1e-8) {
  return hex_lambda1(build_tiling(V, b), resolution, tol);
}

struct DoubleHexGap {
  int j = 0;
  double lambda1_hex = 0.0;
  double lambda1_union = 0.0;
  double lambda2_union = 0.0;
  double delta = 0.0;  // lambda1_hex - lambda2_union
};

/// delta_k^j(b) = lambda_1(Hex) - lambda_2(Hex union its j-th neighbour), j in 1..3.
inline DoubleHexGap double_hex_gap(const HexTiling& tiling, int j, int resolution, double tol = 1e-8) {
  if (j < 1 || j > 3) throw InvalidArgument("neighbour index j must be 1, 2 or 3");
  const Vec2 w = tiling.neighbor_shifts()[j - 1];

  // The common edge runs v_i -> v_{i+1} on the hexagon and backwards on its translate.
  const double scale = tiling.diameter();
  std::optional<std::pair<Vec2, Vec2>> shared;
  for (int i = 0; i < 6 && !shared; ++i)
    for (int m = 0; m < 6; ++m) {
      const Vec2 a = tiling.vertices[m] + w, bb = tiling.vertices[(m + 1) % 6] + w;
      if ((a - tiling.vertices[(i + 1) % 6]).norm() < 1e-12 * scale && (bb - tiling.vertices[i]).norm() < 1e-12 * scale) {
        shared = std::pair{tiling.vertices[i], tiling.vertices[(i + 1) % 6]};
        break;
      }
    }
  if (!shared) throw NumericalError("neighbour translate does not share an edge with the hexagon");

  const double spacing = scale / resolution;
  std::vector<Vec2> pts(tiling.vertices.begin(), tiling.vertices.end());
  for (const auto& v : tiling.vertices) pts.push_back(v + w);
  Vec2 origin;
  const PeriodicGrid g = detail::local_box(pts, spacing, origin);
  const double eps = 1e-9 * spacing;
  const Vec2 ea = shared->first, ed = shared->second - shared->first;
  auto on_shared_edge = [&](const Vec2& x) {
    const double s = (x - ea).dot(ed) / ed.squaredNorm();
    return s > 0.0 && s < 1.0 && std::abs(cross(ed, x - ea)) / ed.norm() <= eps;
  };
  auto hex_mask = DomainMask::from_predicate(
      g, [&](double x, double y) { return tiling.inside_margin(origin + Vec2(x, y)) > eps; });
  auto neighbor_mask = DomainMask::from_predicate(
      g, [&](double x, double y) { return tiling.inside_margin(origin + Vec2(x, y), w) > eps; });
  auto union_mask = DomainMask::from_predicate(g, [&](double x, double y) {
    const Vec2 q = origin + Vec2(x, y);
    return tiling.inside_margin(q) > eps || tiling.inside_margin(q, w) > eps || on_shared_edge(q);
  });

  EigenOptions opt;
  opt.tol = tol;
  auto hex = smallest_eigenpairs(assemble_dirichlet(hex_mask), 1, opt);
  auto nbr = smallest_eigenpairs(assemble_dirichlet(neighbor_mask), 1, opt);
  auto uni = smallest_eigenpairs(assemble_dirichlet(union_mask), 2, opt);
  if (!hex.converged || !nbr.converged || !uni.converged) throw NumericalError("eigensolver did not converge");

  // The two rasterized tiles need not be congruent, so the larger of their
  // lambda_1 is used. Adjacent tile points stay coupled across the shared edge,
  // so the discrete delta can dip below zero by O(h).
  DoubleHexGap gap;
  gap.j = j;
  gap.lambda1_hex = std::max(hex.values[0], nbr.values[0]);
  gap.lambda1_union = uni.values[0];
  gap.lambda2_union = uni.values[1];
  gap.delta = gap.lambda1_hex - gap.lambda2_union;
  return gap;
}

inline DoubleHexGap double_hex_gap(const WrapMatrix& V, double b, int j, int resolution, double tol = 1e-8) {
  return double_hex_gap(build_tiling(V, b), j, resolution, tol);
}

}  // namespace torpart
