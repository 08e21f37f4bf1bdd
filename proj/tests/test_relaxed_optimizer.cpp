#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "torpart/relaxed_optimizer.hpp"
#include "torpart/torus_spectra.hpp"

using namespace torpart;

namespace {

// Exhaustive search over supports: on support S the KKT point is v_S - theta
// with theta fixed by the unit sum; keep the nearest feasible candidate.
std::vector<double> project_by_active_sets(const std::vector<double>& v) {
  const int n = static_cast<int>(v.size());
  std::vector<double> best;
  double best_dist = 1e300;
  for (int mask = 1; mask < (1 << n); ++mask) {
    double sum = 0.0;
    int size = 0;
    for (int i = 0; i < n; ++i)
      if (mask & (1 << i)) {
        sum += v[i];
        ++size;
      }
    const double theta = (sum - 1.0) / size;
    std::vector<double> x(n, 0.0);
    bool feasible = true;
    for (int i = 0; i < n; ++i)
      if (mask & (1 << i)) {
        x[i] = v[i] - theta;
        if (x[i] < 0.0) feasible = false;
      }
    if (!feasible) continue;
    double d = 0.0;
    for (int i = 0; i < n; ++i) d += (x[i] - v[i]) * (x[i] - v[i]);
    if (d < best_dist) {
      best_dist = d;
      best = x;
    }
  }
  return best;
}

OptimizerConfig desk_config(int k, double b, std::uint64_t seed = 1) {
  OptimizerConfig c;
  c.geom = {1.0, b};
  c.k = k;
  const int ny = static_cast<int>(std::ceil(32 * b));
  c.levels = {{32, ny}, {64, 2 * ny}};
  c.rng_seed = seed;
  return c;
}

// Interior density: strictly positive rows summing to one.
DensityMatrix positive_density(const PeriodicGrid& g, int k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  DensityMatrix d{g, k, Eigen::MatrixXd(g.size(), k)};
  for (int r = 0; r < g.size(); ++r) {
    double s = 0.0;
    for (int c = 0; c < k; ++c) s += d.phi(r, c) = u(rng);
    d.phi.row(r) /= s;
  }
  return d;
}

// Horizontal and vertical extent (fractions of the periods) of a label, from
// the columns and rows it occupies.
std::pair<double, double> extents(const LabelField& f, int label) {
  const auto& g = f.grid;
  std::vector<int> cols(g.nx(), 0), rows(g.ny(), 0);
  for (int p = 0; p < g.size(); ++p)
    if (f.labels[p] == label) {
      cols[g.col(p)] = 1;
      rows[g.row(p)] = 1;
    }
  auto frac = [](const std::vector<int>& v) {
    return static_cast<double>(std::count(v.begin(), v.end(), 1)) / v.size();
  };
  return {frac(cols), frac(rows)};
}

}  // namespace

TEST(ProjectSimplex, Examples) {
  auto x = project_simplex({0.6, 0.6, 0.2});
  EXPECT_NEAR(x[0], 0.4 + 0.2 / 3, 1e-15);
  EXPECT_NEAR(x[1], 0.4 + 0.2 / 3, 1e-15);
  EXPECT_NEAR(x[2], 0.2 / 3, 1e-15);
  EXPECT_EQ(project_simplex({1, 0, 0}), (std::vector<double>{1, 0, 0}));
  for (double c : {-3.0, 0.0, 0.7, 1e6}) {
    auto y = project_simplex({c, c, c});
    for (double v : y) EXPECT_NEAR(v, 1.0 / 3, 1e-9);
  }
}

TEST(ProjectSimplex, MatchesActiveSetOracle) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 2.0);
  std::uniform_int_distribution<int> len(1, 6);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> v(len(rng));
    for (double& e : v) e = n(rng);
    const auto x = project_simplex(v), ref = project_by_active_sets(v);
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      EXPECT_NEAR(x[i], ref[i], 1e-10);
      EXPECT_GE(x[i], 0.0);
      sum += x[i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    const auto again = project_simplex(x);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(again[i], x[i], 1e-15);
  }
}

TEST(RandomInit, FeasibleAndDeterministic) {
  PeriodicGrid g({1, 0.5}, 16, 8);
  auto a = random_init(g, 3, 42), b = random_init(g, 3, 42), c = random_init(g, 3, 43);
  EXPECT_NO_THROW(a.validate());
  EXPECT_EQ(a.phi, b.phi);
  EXPECT_NE(a.phi, c.phi);
  auto two = random_init(g, 2, 7);
  for (int r = 0; r < g.size(); ++r) {
    EXPECT_NEAR(two.phi(r, 0) + two.phi(r, 1), 1.0, 1e-12);
    EXPECT_GE(two.phi(r, 0), 0.0);
  }
  EXPECT_THROW(random_init(g, 1, 0), InvalidArgument);
}

TEST(Resample, PreservesConstantsAndFeasibility) {
  PeriodicGrid coarse({1, 0.5}, 16, 8), fine({1, 0.5}, 32, 16);
  DensityMatrix d{coarse, 2, Eigen::MatrixXd(coarse.size(), 2)};
  d.phi.col(0).setConstant(0.3);
  d.phi.col(1).setConstant(0.7);
  auto f = resample(d, fine);
  EXPECT_NEAR((f.phi.col(0).array() - 0.3).abs().maxCoeff(), 0.0, 1e-15);
  EXPECT_NO_THROW(resample(random_init(coarse, 4, 1), fine).validate());
}

TEST(RelaxedEnergy, UniformDensityIsMeanAndSymmetric) {
  PeriodicGrid g({1, 1}, 16, 16);
  DensityMatrix d{g, 3, Eigen::MatrixXd::Constant(g.size(), 3, 1.0 / 3)};
  EigenOptions eo;
  eo.tol = 1e-11;
  auto e1 = relaxed_energy(d, 1.0, 0.1, eo);
  EXPECT_NEAR(e1.energy, e1.per_domain[0], 1e-12 * e1.energy);
  // Constant penalty: lambda = (1 - 1/3) / eps exactly.
  EXPECT_NEAR(e1.per_domain[0], (2.0 / 3) / 0.1, 1e-9);
  auto grad = energy_gradient(d, 8.0, 0.1, relaxed_energy(d, 8.0, 0.1, eo));
  EXPECT_LT((grad.col(0) - grad.col(1)).cwiseAbs().maxCoeff(), 1e-8 * grad.cwiseAbs().maxCoeff());
  EXPECT_LT((grad.col(0) - grad.col(2)).cwiseAbs().maxCoeff(), 1e-8 * grad.cwiseAbs().maxCoeff());
}

TEST(RelaxedEnergy, EigenvectorsUseWeightedNorm) {
  PeriodicGrid g({1, 0.5}, 24, 12);
  auto d = random_init(g, 3, 5);
  auto e = relaxed_energy(d, 8.0, 0.05);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(e.eigvecs.col(i).squaredNorm() * g.cell_area(), 1.0, 1e-12);
}

TEST(RelaxedEnergy, StripIndicatorApproachesStripEnergy) {
  // The penalised energy sits below the Dirichlet one by the sqrt(eps)
  // boundary layer; it closes as eps shrinks.
  PeriodicGrid g({1, 0.5}, 192, 96);
  DensityMatrix d{g, 3, Eigen::MatrixXd::Zero(g.size(), 3)};
  for (int p = 0; p < g.size(); ++p) d.phi(p, std::min(2, g.col(p) / 64)) = 1.0;
  const double eps = 0.25 * g.hx() * g.hx();
  auto e = relaxed_energy(d, 8.0, eps);
  EXPECT_LT(e.energy, 9 * kPi2);
  EXPECT_GT(e.energy, 0.95 * 9 * kPi2);
  EXPECT_LT(relaxed_energy(d, 8.0, 4 * eps).energy, e.energy);
}

TEST(RelaxedEnergy, PMonotone) {
  PeriodicGrid g({1, 0.5}, 16, 8);
  auto d = random_init(g, 3, 11);
  EXPECT_GT(relaxed_energy(d, 8.0, 0.05).energy, relaxed_energy(d, 2.0, 0.05).energy);
  EXPECT_THROW(relaxed_energy(d, 0.5, 0.05), InvalidArgument);
  EXPECT_THROW(relaxed_energy(d, 2.0, 0.0), InvalidArgument);
}

TEST(EnergyGradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  EigenOptions eo;
  eo.tol = 1e-11;
  const double t = 1e-6;
  for (int c = 0; c < 10; ++c) {
    const int k = 2 + c % 3;
    const double eps = c % 2 ? 0.02 : 0.1;
    const double p = c < 5 ? 8.0 : 3.0;
    PeriodicGrid g({1, c < 5 ? 1.0 : 0.6}, 16, 16);
    auto d = positive_density(g, k, rng);
    Eigen::MatrixXd dir(g.size(), k);
    for (int r = 0; r < g.size(); ++r) {
      for (int i = 0; i < k; ++i) dir(r, i) = n(rng);
      dir.row(r).array() -= dir.row(r).mean();  // tangent to the simplex
    }
    auto e = relaxed_energy(d, p, eps, eo);
    const double analytic = detail::weighted_dot(energy_gradient(d, p, eps, e), dir, g.cell_area());
    DensityMatrix plus = d, minus = d;
    plus.phi += t * dir;
    minus.phi -= t * dir;
    const double numeric = (relaxed_energy(plus, p, eps, eo).energy - relaxed_energy(minus, p, eps, eo).energy) / (2 * t);
    EXPECT_NEAR(analytic, numeric, 1e-4 * std::abs(e.energy)) << "case " << c;
  }
}

TEST(EnergyGradient, ScalesWithInversePenalty) {
  PeriodicGrid g({1, 1}, 16, 16);
  auto d = random_init(g, 3, 2);
  auto e = relaxed_energy(d, 8.0, 0.05);
  const Eigen::MatrixXd g1 = energy_gradient(d, 8.0, 0.05, e), g2 = energy_gradient(d, 8.0, 0.025, e);
  EXPECT_LT((g2 - 2 * g1).cwiseAbs().maxCoeff(), 1e-12 * g2.cwiseAbs().maxCoeff());
}

TEST(Binarize, ArgmaxWithTieToSmallest) {
  PeriodicGrid g({1, 1}, 4, 4);
  DensityMatrix d{g, 3, Eigen::MatrixXd(g.size(), 3)};
  for (int r = 0; r < g.size(); ++r) d.phi.row(r) << 0.05, 0.9, 0.05;
  d.phi.row(0) << 0.9, 0.05, 0.05;
  d.phi.row(1) << 0.5, 0.5, 0.0;
  d.phi.row(2) << 0.0, 0.5, 0.5;
  auto f = binarize(d);
  EXPECT_EQ(f.labels[0], 1);
  EXPECT_EQ(f.labels[1], 1);
  EXPECT_EQ(f.labels[2], 2);
  EXPECT_EQ(f.labels[3], 2);
}

TEST(OptimizerConfig, Validation) {
  auto c = desk_config(3, 0.5);
  EXPECT_NO_THROW(c.validate());
  auto bad = c;
  bad.eps_schedule = {1e-2, 1e-1};
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = c;
  bad.levels = {{64, 32}, {32, 16}};
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = c;
  bad.p = 0.5;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = c;
  bad.levels.clear();
  EXPECT_THROW(optimize(bad), InvalidArgument);
  EXPECT_EQ(OptimizerConfig::default_levels(0.5).front(), (std::pair{32, 16}));
}

class DeskRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { run_ = new OptimizeResult(optimize(desk_config(3, 0.5))); }
  static void TearDownTestSuite() {
    delete run_;
    run_ = nullptr;
  }
  static OptimizeResult* run_;
};
OptimizeResult* DeskRun::run_ = nullptr;

TEST_F(DeskRun, DescentAndFeasibility) {
  const auto& tr = run_->trace;
  ASSERT_FALSE(tr.aborted) << tr.error;
  ASSERT_FALSE(tr.rows.empty());
  for (std::size_t i = 1; i < tr.rows.size(); ++i) {
    const auto& a = tr.rows[i - 1];
    const auto& b = tr.rows[i];
    if (b.iter > 0 && a.level == b.level && a.eps == b.eps) EXPECT_LE(b.energy, a.energy) << i;
  }
  const auto& phi = run_->phi.phi;
  EXPECT_GE(phi.minCoeff(), -1e-14);
  EXPECT_LT((phi.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
  EXPECT_EQ(tr.phases.back().nx, 64);
}

TEST_F(DeskRun, StripsNearStripEnergy) {
  const auto labels = binarize(run_->phi);
  const auto part = extract(labels);
  const auto counts = labels.counts();
  for (int l = 1; l <= 3; ++l) {
    EXPECT_GT(counts[l], 0);
    const auto [wx, wy] = extents(labels, l);
    EXPECT_LT(wx, 0.45);
    EXPECT_EQ(wy, 1.0);
  }
  auto comps = connected_components(part);
  for (int l = 1; l <= 3; ++l) EXPECT_EQ(comps[l], 1);
  const auto rep = evaluate(part);
  EXPECT_NEAR(rep.energy_max, 9 * kPi2, 0.05 * 9 * kPi2);
  EXPECT_LE(rep.energy_p, rep.energy_max);

  // The same partition at growing p, bounded by the max.
  EXPECT_LE(pnorm_mean(rep.per_domain_lambda1, 2), pnorm_mean(rep.per_domain_lambda1, 8));
  EXPECT_LE(pnorm_mean(rep.per_domain_lambda1, 8), rep.energy_max);
}

TEST_F(DeskRun, DeterministicTrace) {
  auto again = optimize(desk_config(3, 0.5));
  EXPECT_EQ(again.trace.hash(), run_->trace.hash());
  EXPECT_EQ(again.phi.phi, run_->phi.phi);
  auto other = optimize(desk_config(3, 0.5, 2));
  EXPECT_NE(other.trace.hash(), run_->trace.hash());
}

TEST_F(DeskRun, WarmStartIsStationary) {
  auto warm = optimize(desk_config(3, 0.5), run_->phi);
  ASSERT_EQ(warm.trace.phases.size(), 1u);
  EXPECT_LE(warm.trace.phases[0].iterations, 3);
  EXPECT_LE(warm.trace.rows.back().energy, run_->trace.rows.back().energy * (1 + 1e-9));
  EXPECT_EQ(warm.trace.rows.front().level, 1);
}

TEST_F(DeskRun, TraceCsvHasOneLinePerRow) {
  const std::string csv = run_->trace.to_csv();
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), run_->trace.rows.size() + 1);
  EXPECT_EQ(csv.rfind("level,eps,iter,energy", 0), 0u);
}

TEST(Optimize, TwoPartitionApproachesSecondEigenvalue) {
  for (double b : {0.5, 0.8}) {
    const double lambda2 = sorted_spectrum({1, b}, 2)[1].value;
    auto run = optimize(desk_config(2, b));
    auto rep = evaluate(extract(binarize(run.phi)));
    EXPECT_GE(rep.energy_max, 0.97 * lambda2) << b;
    EXPECT_LE(rep.energy_max, 1.10 * lambda2) << b;
  }
}

TEST(Optimize, FinerLevelIsNearlyEquispectral) {
  auto c = desk_config(3, 0.5);
  c.levels.push_back({128, 64});
  auto rep = evaluate(extract(binarize(optimize(c).phi)));
  const auto [lo, hi] = std::minmax_element(rep.per_domain_lambda1.begin(), rep.per_domain_lambda1.end());
  const double mean = (rep.per_domain_lambda1[0] + rep.per_domain_lambda1[1] + rep.per_domain_lambda1[2]) / 3;
  EXPECT_LE(*hi - *lo, 0.10 * mean);
}

TEST(MultiStart, SingleStartEqualsOptimize) {
  auto c = desk_config(3, 0.5, 9);
  c.levels = {{32, 16}};
  auto m = multi_start(c, 1);
  ASSERT_EQ(m.starts.size(), 1u);
  EXPECT_EQ(m.best_start().run.trace.hash(), optimize(c).trace.hash());
  EXPECT_THROW(multi_start(c, 0), InvalidArgument);
}

TEST(MultiStart, BestOfFourForFourStrips) {
  auto m = multi_start(desk_config(4, 0.45), 4);
  ASSERT_EQ(m.starts.size(), 4u);
  for (std::size_t i = 0; i < m.starts.size(); ++i) {
    EXPECT_EQ(m.starts[i].seed, 1 + i);
    EXPECT_LE(m.best_start().extracted_energy(), m.starts[i].extracted_energy());
  }
  EXPECT_LE(m.best_start().extracted_energy(), 16 * kPi2 * 1.05);
}
