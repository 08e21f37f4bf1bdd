#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>

#include "torpart/torus_spectra.hpp"

using namespace torpart;

namespace {

// Independent count: each (m,n) in Z^2 is one complex exponential, i.e. one
// dimension of the eigenspace. Returns value -> dimension below `cutoff`.
std::vector<std::pair<double, int>> brute_force_spectrum(double b, double cutoff, bool odd_m_only,
                                                         double x_period) {
  std::vector<std::pair<double, int>> modes;
  const int r = 60;
  for (int m = -r; m <= r; ++m) {
    if (odd_m_only && m % 2 == 0) continue;
    for (int n = -r; n <= r; ++n) {
      const double v = 4.0 * kPi2 * ((m / x_period) * (m / x_period) + (n / b) * (n / b));
      if (v <= cutoff) modes.push_back({v, 1});
    }
  }
  std::sort(modes.begin(), modes.end());
  std::vector<std::pair<double, int>> merged;
  for (auto& [v, c] : modes) {
    if (!merged.empty() && same_eigenvalue(merged.back().first, v))
      merged.back().second += c;
    else
      merged.push_back({v, c});
  }
  return merged;
}

}  // namespace

TEST(EigenvalueMn, ClosedForm) {
  EXPECT_NEAR(eigenvalue_mn({1, 1}, 1, 0), 4 * kPi2, 1e-12);
  EXPECT_EQ(eigenvalue_mn({1, 1}, 0, 0), 0.0);
  EXPECT_NEAR(eigenvalue_mn({2, 1 / std::sqrt(2.0)}, 3, 0), 9 * kPi2, 1e-12 * 9 * kPi2);
  EXPECT_THROW(eigenvalue_mn({1, 1}, -1, 0), InvalidArgument);
}

TEST(TorusGeometry, RejectsInvalid) {
  EXPECT_THROW(TorusGeometry(1.0, 2.0), InvalidArgument);
  EXPECT_THROW(TorusGeometry(0.0, 0.0), InvalidArgument);
  EXPECT_NO_THROW(TorusGeometry(1.0, 1.0));
}

TEST(SortedSpectrum, Examples) {
  auto s = sorted_spectrum({1, 1}, 2);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].value, 0.0);
  EXPECT_EQ(s[0].multiplicity, 1);
  EXPECT_NEAR(s[1].value, 4 * kPi2, 1e-12);
  EXPECT_EQ(s[1].multiplicity, 4);

  auto h = sorted_spectrum({1, 0.5}, 2);
  ASSERT_EQ(h.size(), 2u);
  EXPECT_NEAR(h[1].value, 4 * kPi2, 1e-12);
  EXPECT_EQ(h[1].multiplicity, 2);

  auto one = sorted_spectrum({1, 1}, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].multiplicity, 1);
}

TEST(SortedSpectrum, SixteenPiSquaredOnHalfTorusHasMultiplicityFour) {
  // Modes (2,0) and (0,1) on T(1,1/2).
  auto s = sorted_spectrum({1, 0.5}, 4);
  bool found = false;
  for (const auto& line : s)
    if (std::abs(line.value - 16 * kPi2) < 1e-9) {
      EXPECT_EQ(line.multiplicity, 4);
      found = true;
    }
  EXPECT_TRUE(found);
}

TEST(SortedSpectrum, MatchesBruteForceEnumeration) {
  for (auto [a, b] : {std::pair{1.0, 1.0}, {1.0, 0.5}, {1.0, 0.37}, {2.0, 1.0 / std::sqrt(6.0)}, {1.0, 0.81}}) {
    auto lines = sorted_spectrum({a, b}, 25);
    ASSERT_EQ(lines.size(), 25u);
    auto ref = brute_force_spectrum(b, lines.back().value * (1 + 1e-9), false, a);
    ASSERT_EQ(ref.size(), lines.size()) << a << " " << b;
    for (size_t i = 0; i < lines.size(); ++i) {
      EXPECT_NEAR(lines[i].value, ref[i].first, 1e-9 * (1 + ref[i].first));
      EXPECT_EQ(lines[i].multiplicity, ref[i].second);
      int per_mode = 0;
      for (int c : lines[i].mode_multiplicity) per_mode += c;
      EXPECT_EQ(per_mode, lines[i].multiplicity);
      if (i > 0) EXPECT_LT(lines[i - 1].value, lines[i].value);
    }
  }
}

TEST(AntisymSpectrum, Examples) {
  EXPECT_NEAR(antisym_eigenvalue(Covering::kQuadruple, 0.3, 3), 9 * kPi2, 1e-12 * 9 * kPi2);
  EXPECT_NEAR(antisym_eigenvalue(Covering::kDouble, 0.5, 3), 9 * kPi2, 1e-12 * 9 * kPi2);
  EXPECT_NEAR(antisym_eigenvalue(Covering::kDouble, 0.8, 3), 7.25 * kPi2, 1e-12 * 9 * kPi2);
}

TEST(AntisymSpectrum, OnlyOddModesAndMatchesBruteForce) {
  for (double b : {0.2, 0.5, 0.8}) {
    auto lines = antisym_spectrum(Covering::kDouble, b, 12);
    for (const auto& line : lines)
      for (const auto& md : line.modes) EXPECT_EQ(md.m % 2, 1);
    auto ref = brute_force_spectrum(b, lines.back().value * (1 + 1e-9), true, 2.0);
    ASSERT_EQ(ref.size(), lines.size());
    for (size_t i = 0; i < lines.size(); ++i) {
      EXPECT_NEAR(lines[i].value, ref[i].first, 1e-9 * ref[i].first);
      EXPECT_EQ(lines[i].multiplicity, ref[i].second);
    }
  }
}

TEST(AntisymSpectrum, OddKEqualsKSquaredPiSquaredBelowThreshold) {
  for (int k : {3, 5, 7}) {
    const double kk = static_cast<double>(k) * k * kPi2;
    const double b_double = 2.0 / std::sqrt(k * k - 1.0);
    const double b_quad = 1.0 / std::sqrt(k * k - 1.0);
    for (int s = 1; s <= 20; ++s) {
      const double t = s / 20.0;
      EXPECT_NEAR(antisym_eigenvalue(Covering::kDouble, t * b_double, k), kk, 4 * kk * 1e-16) << k << " " << t;
      EXPECT_NEAR(antisym_eigenvalue(Covering::kQuadruple, t * b_quad, k), kk, 4 * kk * 1e-16) << k << " " << t;
    }
    EXPECT_LT(antisym_eigenvalue(Covering::kDouble, b_double + 0.05, k), kk);
    EXPECT_LT(antisym_eigenvalue(Covering::kQuadruple, b_quad + 0.05, k), kk);
  }
}

TEST(TransitionValues, Examples) {
  auto t4 = transition_values(4);
  ASSERT_TRUE(t4.even_value);
  EXPECT_FALSE(t4.conjectured_odd);
  EXPECT_DOUBLE_EQ(*t4.even_value, 0.5);

  auto t3 = transition_values(3);
  ASSERT_TRUE(t3.conjectured_odd);
  EXPECT_FALSE(t3.even_value);
  EXPECT_NEAR(*t3.conjectured_odd, 1 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(t3.strip_lower, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(t3.strip_upper, 1 / std::sqrt(8.0), 1e-15);

  EXPECT_NEAR(*transition_values(5).conjectured_odd, 1 / std::sqrt(6.0), 1e-15);
  EXPECT_THROW(transition_values(2), InvalidArgument);

  for (int k = 3; k < 200; ++k) EXPECT_LT(transition_values(k).strip_lower, transition_values(k).strip_upper);
}

TEST(StripEnergy, Examples) {
  EXPECT_NEAR(strip_partition_energy(3, 1.0), 9 * kPi2, 1e-12);
  EXPECT_NEAR(strip_partition_energy(1, 1.0), kPi2, 1e-14);
  EXPECT_NEAR(strip_partition_energy(4, 2.0), 4 * kPi2, 1e-12);
  EXPECT_THROW(strip_partition_energy(0, 1.0), InvalidArgument);
}

TEST(NodalLabels, FourPartitionOfHalfTorus) {
  PeriodicGrid g({1.0, 0.5}, 256, 128);
  TrigExpression f{{1.0, Trig::kSin, 2, Trig::kCos, 0}, {1.0, Trig::kCos, 0, Trig::kSin, 1}};
  auto labels = nodal_labels(f, g);
  EXPECT_EQ(labels.k, 4);
  for (int l : labels.labels) EXPECT_TRUE(l >= 1 && l <= 4);
}

TEST(NodalLabels, TwoStrips) {
  PeriodicGrid g({1.0, 1.0}, 64, 64);
  auto labels = nodal_labels({{1.0, Trig::kSin, 1, Trig::kCos, 0}}, g);
  EXPECT_EQ(labels.k, 2);
  auto c = labels.counts();
  EXPECT_EQ(c[1] + c[2], g.size());
}

TEST(NodalLabels, TenPartitionOfDoubleCovering) {
  const double b = 1 / std::sqrt(6.0);
  PeriodicGrid g({2.0, b}, 512, 103);
  TrigExpression f{{1.0, Trig::kCos, 5, Trig::kCos, 0},
                   {1.0, Trig::kSin, 1, Trig::kSin, 1},
                   {-1.0, Trig::kCos, 1, Trig::kCos, 1}};
  EXPECT_EQ(nodal_labels(f, g).k, 10);
}

TEST(NodalLabels, SinStripsGiveTwoKComponents) {
  for (int k : {1, 2, 3, 5})
    for (auto [a, b] : {std::pair{1.0, 1.0}, {1.0, 0.4}, {2.0, 0.7}}) {
      PeriodicGrid g({a, b}, 240, 60);
      auto labels = nodal_labels({{1.0, Trig::kSin, k, Trig::kCos, 0}}, g);
      EXPECT_EQ(labels.k, 2 * k) << k << " " << a << " " << b;
    }
}

TEST(NodalLabels, RejectsIdenticallyZero) {
  PeriodicGrid g({1.0, 1.0}, 16, 16);
  EXPECT_THROW(nodal_labels({{0.0, Trig::kSin, 1, Trig::kCos, 0}}, g), InvalidArgument);
}
