#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "torpart/hex_tiling.hpp"
#include "torpart/partition_extract.hpp"

using namespace torpart;

namespace {

// Vertical strips of equal width, labelled by cell centre.
LabelField strips(const PeriodicGrid& g, int k) {
  LabelField f{g, std::vector<int>(g.size()), k};
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const double x = (i + 0.5) * g.hx() / g.geom().a;
      f.labels[g.index(i, j)] = std::min(k, 1 + static_cast<int>(std::floor(x * k)));
    }
  return f;
}

// Five tilted squares of side 1/sqrt(5) tiling T(1,1): lattice (2,1)/5, (-1,2)/5.
LabelField five_squares(const PeriodicGrid& g) {
  LabelField f{g, std::vector<int>(g.size()), 5};
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const double x = (i + 0.5) * g.hx(), y = (j + 0.5) * g.hy();
      const long n1 = static_cast<long>(std::floor(2 * x + y));
      const long n2 = static_cast<long>(std::floor(-x + 2 * y));
      f.labels[g.index(i, j)] = static_cast<int>(((n2 - 2 * n1) % 5 + 5) % 5) + 1;
    }
  return f;
}

LabelField from_rows(const PeriodicGrid& g, const std::vector<std::vector<int>>& rows, int k) {
  LabelField f{g, std::vector<int>(g.size()), k};
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) f.labels[g.index(i, j)] = rows[j][i];
  return f;
}

}  // namespace

TEST(Extract, UniformLabelsGiveWholeTorus) {
  PeriodicGrid g({1, 1}, 16, 16);
  auto part = extract(LabelField{g, std::vector<int>(g.size(), 1), 1});
  EXPECT_TRUE(part.boundary_edges.empty());
  EXPECT_TRUE(part.domain(1).is_full());
  auto rep = evaluate(part);
  EXPECT_EQ(rep.energy_max, 0.0);
  EXPECT_EQ(rep.energy_p, 0.0);
}

TEST(Extract, TwoHalfStripsHaveTwoDualLines) {
  PeriodicGrid g({1, 1}, 32, 24);
  auto part = extract(strips(g, 2));
  EXPECT_EQ(part.boundary_edges.size(), 2u * g.ny());
  std::set<int> columns;
  for (const auto& e : part.boundary_edges) {
    EXPECT_EQ(g.row(e.p), g.row(e.q));
    columns.insert(g.col(e.p));
  }
  EXPECT_EQ(columns, (std::set<int>{15, 31}));
  auto comps = connected_components(part);
  EXPECT_EQ(comps[1], 1);
  EXPECT_EQ(comps[2], 1);
}

TEST(Extract, PluralityAndTieRules) {
  bool tie = false;
  EXPECT_EQ(detail::plurality({2, 3, 2, 1}, tie), 2);
  EXPECT_FALSE(tie);
  EXPECT_EQ(detail::plurality({3, 1, 1, 1}, tie), 1);
  EXPECT_FALSE(tie);
  EXPECT_EQ(detail::plurality({3, 2, 3, 2}, tie), 2);
  EXPECT_TRUE(tie);
  EXPECT_EQ(detail::plurality({4, 3, 2, 1}, tie), 1);
  EXPECT_TRUE(tie);
  EXPECT_EQ(detail::plurality({5, 5, 5, 5}, tie), 5);
  EXPECT_FALSE(tie);

  // A vertical interface: each shifted point straddling it is a 2-2 tie.
  PeriodicGrid g({1, 1}, 8, 8);
  auto part = extract(strips(g, 2));
  EXPECT_EQ(part.tie_cells, 2 * g.ny());
  EXPECT_EQ(part.shifted[g.index(3, 0)], 1);
  EXPECT_EQ(part.shifted[g.index(7, 0)], 1);
  EXPECT_EQ(part.domain(1).point_count, 5 * g.ny());
}

TEST(Extract, ErrorsOnMissingOrVanishingLabels) {
  PeriodicGrid g({1, 1}, 8, 8);
  EXPECT_THROW(extract(LabelField{g, std::vector<int>(g.size(), 1), 2}), InvalidArgument);
  LabelField lone{g, std::vector<int>(g.size(), 1), 2};
  lone.labels[g.index(3, 3)] = 2;  // a single point loses every vote
  EXPECT_THROW(extract(lone), NumericalError);
}

TEST(Extract, CoverageAndBoundaryInvariants) {
  PeriodicGrid g({1, 1}, 48, 48);
  auto part = extract(five_squares(g));
  for (int l : part.shifted) EXPECT_TRUE(l >= 1 && l <= 5);
  int total = 0;
  for (int l = 1; l <= 5; ++l) total += part.domain(l).point_count;
  EXPECT_EQ(total, g.size());
  int unlike = 0;
  for (int p = 0; p < g.size(); ++p)
    for (int q : {g.neighbors(p)[0], g.neighbors(p)[2]}) unlike += part.labels[p] != part.labels[q];
  EXPECT_EQ(static_cast<int>(part.boundary_edges.size()), unlike);
}

TEST(Components, SplitLabelCountsTwice) {
  PeriodicGrid g({1, 1}, 16, 16);
  LabelField f{g, std::vector<int>(g.size(), 1), 2};
  for (int j = 2; j < 6; ++j)
    for (int i = 2; i < 6; ++i) {
      f.labels[g.index(i, j)] = 2;
      f.labels[g.index(i + 7, j + 7)] = 2;
    }
  auto comps = connected_components(extract(f));
  EXPECT_EQ(comps[1], 1);
  EXPECT_EQ(comps[2], 2);
}

TEST(Components, HexagonalRasterIsOnePerLabel) {
  PeriodicGrid g({1, 0.9}, 192, 172);
  auto raster = rasterize(build_tiling(WrapMatrix::v3(), 0.9), g);
  auto comps = connected_components(extract(raster.labels));
  for (int l = 1; l <= 3; ++l) EXPECT_EQ(comps[l], 1);
}

TEST(Evaluate, ThreeStripsOfHalfTorus) {
  PeriodicGrid g({1, 0.5}, 192, 96);
  auto rep = evaluate(extract(strips(g, 3)));
  EXPECT_NEAR(rep.energy_max, 9 * kPi2, 0.01 * 9 * kPi2);
  EXPECT_LE(rep.energy_p, rep.energy_max);
}

TEST(Evaluate, FiveSquareTiling) {
  PeriodicGrid g({1, 1}, 256, 256);
  auto part = extract(five_squares(g));
  auto comps = connected_components(part);
  for (int l = 1; l <= 5; ++l) EXPECT_EQ(comps[l], 1);
  auto rep = evaluate(part);
  EXPECT_NEAR(rep.energy_max, 10 * kPi2, 0.01 * 10 * kPi2);
  const double spread = rep.energy_max - *std::min_element(rep.per_domain_lambda1.begin(), rep.per_domain_lambda1.end());
  EXPECT_LT(spread, 0.02 * rep.energy_max);
}

TEST(Evaluate, PMeanOrdering) {
  EXPECT_DOUBLE_EQ(pnorm_mean({5, 5, 5}, 8), 5.0);
  EXPECT_LT(pnorm_mean({10, 20, 40}, 2), pnorm_mean({10, 20, 40}, 8));
  EXPECT_LT(pnorm_mean({10, 20, 40}, 8), 40.0);
  EXPECT_NEAR(pnorm_mean({10, 20, 40}, 400), 40.0, 0.2);
  EXPECT_NEAR(pnorm_mean({10, 20, 40}, 1), 70.0 / 3, 1e-12);
}

TEST(Evaluate, StripEnergyConvergesAtSecondOrder) {
  // Strips of 3m points: the largest shifted domain has width exactly 1/3,
  // so the discrete error is the pure O(h^2) stencil error.
  std::vector<double> e;
  for (int nx : {48, 96, 192}) e.push_back(evaluate(extract(strips(PeriodicGrid({1, 0.5}, nx, nx / 2), 3))).energy_max);
  const double ratio = (e[1] - e[0]) / (e[2] - e[1]);
  EXPECT_NEAR(ratio, 4.0, 0.3);
  EXPECT_LT(e[2], 9 * kPi2);
}
