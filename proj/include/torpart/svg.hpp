#pragma once

// Static SVG figures: partitions on the flat torus rectangle, hexagonal
// tilings, and energy curves. No styling beyond what reading them needs.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "torpart/hex_tiling.hpp"
#include "torpart/partition_extract.hpp"

namespace torpart::svg {

inline std::string color(int label) {
  static const char* palette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
                                  "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#86bcb6", "#d37295"};
  return palette[(label - 1 + 1200) % 12];
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Label raster as horizontal runs, with the dual boundary edges drawn on top.
inline std::string partition(const StrongPartition& part, double width_px = 600) {
  const auto& g = part.grid;
  const double a = g.geom().a, b = g.geom().b;
  const double s = width_px / a;
  const double W = width_px, H = b * s;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(W) << "\" height=\"" << num(H)
     << "\" viewBox=\"0 0 " << num(W) << ' ' << num(H) << "\">\n";
  const double cw = g.hx() * s, ch = g.hy() * s;
  // Everything is drawn translated by half a cell: point (i, j) owns the
  // square [i, i+1] x [j, j+1], so dual edges fall on square sides.
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx();) {
      const int l = part.labels[g.index(i, j)];
      int e = i;
      while (e < g.nx() && part.labels[g.index(e, j)] == l) ++e;
      os << "<rect x=\"" << num(i * cw) << "\" y=\"" << num(H - (j + 1) * ch) << "\" width=\"" << num((e - i) * cw)
         << "\" height=\"" << num(ch) << "\" fill=\"" << color(l) << "\"/>\n";
      i = e;
    }
  os << "<g stroke=\"black\" stroke-width=\"" << num(std::max(1.0, 0.15 * cw)) << "\">\n";
  for (const auto& e : part.boundary_edges) {
    const int i = g.col(e.p), j = g.row(e.p);
    const bool east = g.row(e.q) == j;
    const double x0 = east ? (i + 1) * cw : i * cw, y0 = east ? j * ch : (j + 1) * ch;
    const double x1 = east ? x0 : x0 + cw, y1 = east ? y0 + ch : y0;
    os << "<line x1=\"" << num(x0) << "\" y1=\"" << num(H - y0) << "\" x2=\"" << num(x1) << "\" y2=\"" << num(H - y1)
       << "\"/>\n";
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

/// Lattice translates of the hexagon clipped to the fundamental rectangle [0,1]x[0,b].
inline std::string tiling(const HexTiling& t, double width_px = 600) {
  const double s = width_px, W = width_px, H = t.b * s;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(W) << "\" height=\"" << num(H)
     << "\" viewBox=\"0 0 " << num(W) << ' ' << num(H) << "\">\n"
     << "<defs><clipPath id=\"torus\"><rect x=\"0\" y=\"0\" width=\"" << num(W) << "\" height=\"" << num(H)
     << "\"/></clipPath></defs>\n<g clip-path=\"url(#torus)\" stroke=\"black\" stroke-width=\"1\">\n";
  std::map<std::pair<int, int>, int> label_of;
  Eigen::Matrix2d u;
  u.col(0) = t.basis.u1;
  u.col(1) = t.basis.u2;
  const Eigen::Matrix2d uinv = u.inverse();
  // Lattice coordinates of the rectangle's corners bound the translates needed.
  double lo1 = 1e300, hi1 = -1e300, lo2 = 1e300, hi2 = -1e300;
  for (const Vec2& c : {Vec2(0, 0), Vec2(1, 0), Vec2(0, t.b), Vec2(1, t.b)}) {
    const Vec2 q = uinv * c;
    lo1 = std::min(lo1, q.x());
    hi1 = std::max(hi1, q.x());
    lo2 = std::min(lo2, q.y());
    hi2 = std::max(hi2, q.y());
  }
  for (long n1 = static_cast<long>(std::floor(lo1)) - 2; n1 <= static_cast<long>(std::ceil(hi1)) + 2; ++n1)
    for (long n2 = static_cast<long>(std::floor(lo2)) - 2; n2 <= static_cast<long>(std::ceil(hi2)) + 2; ++n2) {
      const auto key = detail::lattice_class(t.V, n1, n2);
      const int l = label_of.emplace(key, static_cast<int>(label_of.size()) + 1).first->second;
      const Vec2 shift = n1 * t.basis.u1 + n2 * t.basis.u2;
      os << "<polygon fill=\"" << color(l) << "\" points=\"";
      for (const auto& v : t.vertices) {
        const Vec2 p = v + shift;
        os << num(p.x() * s) << ',' << num(H - p.y() * s) << ' ';
      }
      os << "\"/>\n";
    }
  os << "</g>\n<rect x=\"0\" y=\"0\" width=\"" << num(W) << "\" height=\"" << num(H)
     << "\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n</svg>\n";
  return os.str();
}

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;  // NaN y values are skipped
};

/// Line plot with labelled axes and a legend.
inline std::string curves(const std::vector<Series>& series, const std::string& xlabel, const std::string& ylabel) {
  const double W = 640, H = 420, ml = 70, mr = 160, mt = 20, mb = 50;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series)
    for (auto [x, y] : s.points)
      if (std::isfinite(y)) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  const double pad = 0.05 * std::max(y1 - y0, 1e-9 * std::abs(y1) + 1e-12);
  y0 -= pad;
  y1 += pad;
  auto X = [&](double x) { return ml + (x - x0) / (x1 - x0) * (W - ml - mr); };
  auto Y = [&](double y) { return H - mb - (y - y0) / (y1 - y0) * (H - mt - mb); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << W - ml - mr << "\" height=\"" << H - mt - mb
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double xv = x0 + t * (x1 - x0) / 5, yv = y0 + t * (y1 - y0) / 5;
    os << "<text x=\"" << num(X(xv)) << "\" y=\"" << num(H - mb + 16) << "\" text-anchor=\"middle\">" << num(xv)
       << "</text>\n<text x=\"" << num(ml - 6) << "\" y=\"" << num(Y(yv) + 4) << "\" text-anchor=\"end\">" << num(yv)
       << "</text>\n";
  }
  os << "<text x=\"" << num((W - mr + ml) / 2) << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">" << xlabel
     << "</text>\n<text x=\"16\" y=\"" << num((H - mb + mt) / 2) << "\" transform=\"rotate(-90 16 "
     << num((H - mb + mt) / 2) << ")\" text-anchor=\"middle\">" << ylabel << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto c = color(static_cast<int>(i) + 1);
    os << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
    for (auto [x, y] : series[i].points)
      if (std::isfinite(y)) os << num(X(x)) << ',' << num(Y(y)) << ' ';
    os << "\"/>\n";
    for (auto [x, y] : series[i].points)
      if (std::isfinite(y))
        os << "<circle cx=\"" << num(X(x)) << "\" cy=\"" << num(Y(y)) << "\" r=\"2.5\" fill=\"" << c << "\"/>\n";
    const double ly = mt + 16 + 18 * static_cast<double>(i);
    os << "<line x1=\"" << W - mr + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - mr + 30 << "\" y2=\"" << ly
       << "\" stroke=\"" << c << "\" stroke-width=\"2\"/>\n<text x=\"" << W - mr + 36 << "\" y=\"" << ly + 4 << "\">"
       << series[i].name << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace torpart::svg
