#pragma once

// Relaxed spectral partition optimisation: k densities on the pointwise
// simplex, each defining the penalised operator -Lap + (1 - phi_i)/eps, and
// projected gradient descent on the p-mean of their ground energies with
// progressive grid refinement.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "torpart/fd_laplace.hpp"
#include "torpart/grid.hpp"
#include "torpart/partition_extract.hpp"

namespace torpart {

/// phi(x, i): column i is the density of domain i; rows lie on the simplex.
struct DensityMatrix {
  PeriodicGrid grid;
  int k = 0;
  Eigen::MatrixXd phi;  // N x k

  std::span<const double> column(int i) const {
    return {phi.col(i).data(), static_cast<std::size_t>(phi.rows())};
  }

  void validate(double tol = 1e-12) const {
    if (k < 2) throw InvalidArgument("density matrix needs k >= 2");
    if (phi.rows() != grid.size() || phi.cols() != k) throw InvalidArgument("density matrix shape mismatch");
    for (Eigen::Index r = 0; r < phi.rows(); ++r) {
      if (!(phi.row(r).minCoeff() >= -1e-14)) throw InvalidArgument("density entry below zero");
      if (!(std::abs(phi.row(r).sum() - 1.0) <= tol)) throw InvalidArgument("density row does not sum to 1");
    }
  }
};

/// Euclidean projection onto {x >= 0, sum x = 1} (sort-and-threshold).
inline std::vector<double> project_simplex(std::vector<double> v) {
  const int n = static_cast<int>(v.size());
  if (n == 0) return v;
  std::vector<double> s = v;
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (int i = 0; i < n; ++i) {
    cum += s[i];
    const double t = (cum - 1.0) / (i + 1);
    if (i + 1 == n || s[i + 1] <= t) {
      theta = t;
      break;
    }
  }
  for (double& x : v) x = std::max(x - theta, 0.0);
  return v;
}

namespace detail {

// Projects every row in place; returns the number of entries clipped to zero.
inline int project_rows(Eigen::MatrixXd& phi) {
  int clipped = 0;
  std::vector<double> row(phi.cols());
  for (Eigen::Index r = 0; r < phi.rows(); ++r) {
    for (Eigen::Index c = 0; c < phi.cols(); ++c) row[c] = phi(r, c);
    row = project_simplex(std::move(row));
    for (Eigen::Index c = 0; c < phi.cols(); ++c) {
      phi(r, c) = row[c];
      if (row[c] == 0.0) ++clipped;
    }
  }
  return clipped;
}

}  // namespace detail

inline DensityMatrix random_init(const PeriodicGrid& grid, int k, std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("density matrix needs k >= 2");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  DensityMatrix d{grid, k, Eigen::MatrixXd(grid.size(), k)};
  for (int r = 0; r < grid.size(); ++r)
    for (int c = 0; c < k; ++c) d.phi(r, c) = unif(rng);
  detail::project_rows(d.phi);
  return d;
}

/// Periodic bilinear resampling of each column onto `target`, rows re-projected.
/// Points map by their fractional position, so the source may live on a
/// torus of different shape (warm starts across b).
inline DensityMatrix resample(const DensityMatrix& d, const PeriodicGrid& target) {
  const auto& src = d.grid;
  DensityMatrix out{target, d.k, Eigen::MatrixXd(target.size(), d.k)};
  for (int j = 0; j < target.ny(); ++j)
    for (int i = 0; i < target.nx(); ++i) {
      const double tx = static_cast<double>(i) * src.nx() / target.nx();
      const double ty = static_cast<double>(j) * src.ny() / target.ny();
      const int i0 = static_cast<int>(std::floor(tx)), j0 = static_cast<int>(std::floor(ty));
      const double wx = tx - i0, wy = ty - j0;
      const int p = target.index(i, j);
      out.phi.row(p) = (1 - wx) * (1 - wy) * d.phi.row(src.index(i0, j0)) +
                       wx * (1 - wy) * d.phi.row(src.index(i0 + 1, j0)) +
                       (1 - wx) * wy * d.phi.row(src.index(i0, j0 + 1)) +
                       wx * wy * d.phi.row(src.index(i0 + 1, j0 + 1));
    }
  detail::project_rows(out.phi);
  return out;
}

struct RelaxedEnergy {
  double energy = 0.0;
  std::vector<double> per_domain;  // lambda_1 of each penalised operator
  std::vector<double> second;      // lambda_2, for the gap monitor
  Eigen::MatrixXd eigvecs;         // N x k, unit norm in the hx*hy-weighted inner product
  std::vector<Eigen::MatrixXd> blocks;  // raw eigensolver blocks, reused as warm starts
  bool gap_flag = false;
};

inline RelaxedEnergy relaxed_energy(const DensityMatrix& d, double p, double eps, const EigenOptions& eig = {},
                                    const std::vector<Eigen::MatrixXd>* warm = nullptr) {
  if (!(p >= 1.0)) throw InvalidArgument("p must be >= 1");
  if (!(eps > 0.0)) throw InvalidArgument("penalty parameter eps must be positive");
  RelaxedEnergy e;
  e.eigvecs.resize(d.grid.size(), d.k);
  const double w = 1.0 / std::sqrt(d.grid.cell_area());
  for (int i = 0; i < d.k; ++i) {
    EigenOptions opt = eig;
    if (warm != nullptr && static_cast<int>(warm->size()) == d.k) opt.start = &(*warm)[i];
    auto res = smallest_eigenpairs(assemble_penalized(d.grid, d.column(i), eps), 2, opt);
    if (!res.converged) throw NumericalError("penalised eigensolve did not converge for domain " + std::to_string(i + 1));
    e.per_domain.push_back(res.values[0]);
    e.second.push_back(res.values[1]);
    if (res.values[1] - res.values[0] < 1e-8 * std::abs(res.values[0])) e.gap_flag = true;
    e.eigvecs.col(i) = w * res.vectors.col(0);
    e.blocks.push_back(res.vectors);
  }
  e.energy = pnorm_mean(e.per_domain, p);
  return e;
}

/// L2 gradient (hx*hy-weighted) of the relaxed energy with respect to phi:
/// dE/dphi_i(x) = (1/k) (lambda_i / E)^(p-1) * (-u_i(x)^2 / eps).
inline Eigen::MatrixXd energy_gradient(const DensityMatrix& d, double p, double eps, const RelaxedEnergy& e) {
  Eigen::MatrixXd g(d.grid.size(), d.k);
  for (int i = 0; i < d.k; ++i) {
    const double coef = std::pow(e.per_domain[i] / e.energy, p - 1.0) / d.k;
    g.col(i) = -(coef / eps) * e.eigvecs.col(i).array().square().matrix();
  }
  return g;
}

struct StepRule {
  double initial_step = 0.5;   // largest entry change of the first trial step
  double backtrack = 0.5;
  double growth = 2.0;         // next trial step relative to the last accepted one
  double armijo = 1e-4;
  int max_backtracks = 30;
  bool fixed = false;          // take the initial step without line search
};

struct OptimizerConfig {
  TorusGeometry geom{1.0, 1.0};
  int k = 3;
  double p = 8.0;
  std::vector<double> eps_schedule{1e-1, 1e-2, 1e-3};
  double eps_final_factor = 4.0;  // eps_final = factor * min(hx, hy)^2
  std::vector<std::pair<int, int>> levels;
  StepRule step;
  int max_iters = 200;
  std::uint64_t rng_seed = 1;
  double stop_tol = 1e-5;
  double eig_tol = 1e-9;

  static std::vector<std::pair<int, int>> default_levels(double b, double a = 1.0) {
    const int ny = static_cast<int>(std::ceil(32.0 * b / a));
    return {{32, ny}, {64, 2 * ny}, {128, 4 * ny}};
  }

  double eps_final(int nx, int ny) const {
    const double h = std::min(geom.a / nx, geom.b / ny);
    return eps_final_factor * h * h;
  }

  void validate() const {
    geom.validate();
    if (k < 2) throw InvalidArgument("k must be >= 2");
    if (!(p >= 1.0)) throw InvalidArgument("p must be >= 1");
    if (levels.empty()) throw InvalidArgument("at least one refinement level is required");
    for (std::size_t i = 0; i < levels.size(); ++i) {
      if (levels[i].first < 4 || levels[i].second < 4) throw InvalidArgument("refinement level below 4x4");
      if (i > 0 && (levels[i].first < levels[i - 1].first || levels[i].second < levels[i - 1].second ||
                    levels[i] == levels[i - 1]))
        throw InvalidArgument("refinement levels must increase");
    }
    for (std::size_t i = 0; i < eps_schedule.size(); ++i) {
      if (!(eps_schedule[i] > 0.0)) throw InvalidArgument("eps schedule entries must be positive");
      if (i > 0 && !(eps_schedule[i] < eps_schedule[i - 1])) throw InvalidArgument("eps schedule must decrease");
    }
    if (!(eps_final_factor > 0.0)) throw InvalidArgument("eps_final_factor must be positive");
    if (!(step.initial_step > 0.0) || !(step.backtrack > 0.0 && step.backtrack < 1.0) ||
        !(step.armijo > 0.0 && step.armijo < 1.0) || step.max_backtracks < 0)
      throw InvalidArgument("invalid step rule");
    if (max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
    if (!(stop_tol >= 0.0)) throw InvalidArgument("stop_tol must be >= 0");
    if (!(eig_tol > 0.0)) throw InvalidArgument("eig_tol must be positive");
  }
};

struct TraceRow {
  int level = 0;
  double eps = 0.0;
  int iter = 0;              // 0 records the phase's starting energy
  double energy = 0.0;
  std::vector<double> lambdas;
  double step = 0.0;
  int backtracks = 0;
  int clipped = 0;           // entries set to zero by the projection
  bool gap_flag = false;
};

struct PhaseSummary {
  int level = 0;
  int nx = 0, ny = 0;
  double eps = 0.0;
  int iterations = 0;
  double start_energy = 0.0;
  double final_energy = 0.0;
  std::string stop_reason;
};

struct OptimizerTrace {
  std::vector<TraceRow> rows;
  std::vector<PhaseSummary> phases;
  std::vector<std::string> warnings;
  bool aborted = false;
  std::string error;

  std::string to_csv() const {
    std::ostringstream os;
    os << "level,eps,iter,energy,step,backtracks,clipped,gap_flag";
    const std::size_t k = rows.empty() ? 0 : rows.front().lambdas.size();
    for (std::size_t i = 0; i < k; ++i) os << ",lambda" << i + 1;
    os << '\n';
    char buf[64];
    auto num = [&](double v) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      return std::string(buf);
    };
    for (const auto& r : rows) {
      os << r.level << ',' << num(r.eps) << ',' << r.iter << ',' << num(r.energy) << ',' << num(r.step) << ','
         << r.backtracks << ',' << r.clipped << ',' << (r.gap_flag ? 1 : 0);
      for (double l : r.lambdas) os << ',' << num(l);
      os << '\n';
    }
    return os.str();
  }

  /// FNV-1a over the CSV text.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : to_csv()) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }
};

namespace detail {

inline double weighted_dot(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double w) {
  return w * (a.array() * b.array()).sum();
}

// Projected gradient descent at fixed (grid, eps). Appends to the trace.
inline void run_phase(DensityMatrix& d, double eps, int level, const OptimizerConfig& cfg, OptimizerTrace& trace,
                      std::vector<Eigen::MatrixXd>& warm) {
  EigenOptions eig;
  eig.tol = cfg.eig_tol;
  eig.seed = cfg.rng_seed;
  const double w = d.grid.cell_area();

  PhaseSummary summary{level, d.grid.nx(), d.grid.ny(), eps, 0, 0.0, 0.0, "max_iters"};
  RelaxedEnergy cur = relaxed_energy(d, cfg.p, eps, eig, &warm);
  warm = cur.blocks;
  summary.start_energy = cur.energy;
  trace.rows.push_back({level, eps, 0, cur.energy, cur.per_domain, 0.0, 0, 0, cur.gap_flag});

  double scale = 1.0;  // halved while the gap monitor fires
  double last_tau = 0.0;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const Eigen::MatrixXd g = energy_gradient(d, cfg.p, eps, cur);
    const double gmax = g.cwiseAbs().maxCoeff();
    if (!(gmax > 0.0)) {
      summary.stop_reason = "zero_gradient";
      break;
    }
    if (cur.gap_flag) scale *= 0.5;
    double tau = scale * cfg.step.initial_step / gmax;
    if (!cfg.step.fixed && last_tau > 0.0) tau = std::max(tau, scale * cfg.step.growth * last_tau);

    bool accepted = false, stationary = false;
    int backtracks = 0, clipped = 0;
    DensityMatrix trial = d;
    RelaxedEnergy next;
    for (;; ++backtracks) {
      trial.phi = d.phi - tau * g;
      clipped = project_rows(trial.phi);
      next = relaxed_energy(trial, cfg.p, eps, eig, &warm);
      const double predicted = weighted_dot(g, d.phi - trial.phi, w);
      if (backtracks == 0 && !(predicted > 1e-12 * std::abs(cur.energy))) {
        stationary = true;
        break;
      }
      if (cfg.step.fixed || next.energy <= cur.energy - cfg.step.armijo * predicted) {
        accepted = next.energy <= cur.energy || cfg.step.fixed;
        break;
      }
      if (backtracks >= cfg.step.max_backtracks) break;
      tau *= cfg.step.backtrack;
    }
    if (stationary) {
      summary.stop_reason = "stationary";
      break;
    }
    if (!accepted) {
      summary.stop_reason = "line_search";
      break;
    }
    last_tau = tau;
    const double decrease = cur.energy - next.energy;
    d = std::move(trial);
    cur = std::move(next);
    warm = cur.blocks;
    summary.iterations = it;
    trace.rows.push_back({level, eps, it, cur.energy, cur.per_domain, tau, backtracks, clipped, cur.gap_flag});
    if (cur.gap_flag) trace.warnings.push_back("eigenvalue gap below 1e-8 lambda_1 at level " +
                                               std::to_string(level) + ", iteration " + std::to_string(it));
    if (decrease < cfg.stop_tol * std::abs(cur.energy)) {
      summary.stop_reason = "stop_tol";
      break;
    }
  }
  summary.final_energy = cur.energy;
  trace.phases.push_back(summary);
}

}  // namespace detail

/// Hard labels: argmax per row, ties to the smallest index (labels 1..k).
inline LabelField binarize(const DensityMatrix& d) {
  LabelField f{d.grid, std::vector<int>(d.grid.size(), 1), d.k};
  for (int r = 0; r < d.grid.size(); ++r) {
    int best = 0;
    for (int c = 1; c < d.k; ++c)
      if (d.phi(r, c) > d.phi(r, best)) best = c;
    f.labels[r] = best + 1;
  }
  return f;
}

struct OptimizeResult {
  DensityMatrix phi;
  OptimizerTrace trace;
};

/// Runs every refinement level: the first level sweeps the eps schedule down
/// to its grid-tied final eps, later levels start from the prolonged density
/// and use only their own final eps. A warm start enters at the level whose
/// grid matches its resolution (or the first finer one) and runs only that
/// level's final eps before continuing; a density from another torus is
/// mapped by fractional grid position.
inline OptimizeResult optimize(const OptimizerConfig& cfg, std::optional<DensityMatrix> init = std::nullopt) {
  cfg.validate();
  const bool warm_start = init.has_value();
  std::size_t first = 0;
  if (warm_start) {
    if (init->k != cfg.k) throw InvalidArgument("warm start has a different k");
    init->validate(1e-9);
    while (first + 1 < cfg.levels.size() && cfg.levels[first].first < init->grid.nx()) ++first;
  }

  auto grid_of = [&](std::size_t l) { return PeriodicGrid(cfg.geom, cfg.levels[l].first, cfg.levels[l].second); };
  OptimizeResult out{warm_start ? std::move(*init) : random_init(grid_of(0), cfg.k, cfg.rng_seed), {}};
  if (!(out.phi.grid == grid_of(first))) out.phi = resample(out.phi, grid_of(first));

  std::vector<Eigen::MatrixXd> warm;
  try {
    for (std::size_t l = first; l < cfg.levels.size(); ++l) {
      if (l > first) {
        out.phi = resample(out.phi, grid_of(l));
        warm.clear();
      }
      const double ef = cfg.eps_final(cfg.levels[l].first, cfg.levels[l].second);
      std::vector<double> schedule;
      if (l == 0 && !warm_start)
        for (double e : cfg.eps_schedule)
          if (e > ef) schedule.push_back(e);
      schedule.push_back(ef);
      for (double eps : schedule) detail::run_phase(out.phi, eps, static_cast<int>(l), cfg, out.trace, warm);
    }
  } catch (const NumericalError& ex) {
    out.trace.aborted = true;
    out.trace.error = ex.what();
  }

  return out;
}

struct StartResult {
  std::uint64_t seed = 0;
  OptimizeResult run;
  std::optional<EnergyReport> report;  // empty when extraction failed
  std::string extract_error;

  double extracted_energy() const {
    return report && report->complete ? report->energy_max : std::numeric_limits<double>::infinity();
  }
};

struct MultiStartResult {
  std::size_t best = 0;
  std::vector<StartResult> starts;
  const StartResult& best_start() const { return starts.at(best); }
};

/// Scores a finished run by the Dirichlet energy of its binarised, extracted partition.
inline StartResult score_run(std::uint64_t seed, OptimizeResult run, double p, double tol = 1e-8) {
  StartResult s{seed, std::move(run), std::nullopt, {}};
  try {
    s.report = evaluate(extract(binarize(s.run.phi)), p, tol);
  } catch (const std::exception& ex) {
    s.extract_error = ex.what();
  }
  return s;
}

inline MultiStartResult multi_start(const OptimizerConfig& cfg, int n_starts) {
  if (n_starts < 1) throw InvalidArgument("n_starts must be >= 1");
  MultiStartResult out;
  for (int s = 0; s < n_starts; ++s) {
    OptimizerConfig c = cfg;
    c.rng_seed = cfg.rng_seed + static_cast<std::uint64_t>(s);
    out.starts.push_back(score_run(c.rng_seed, optimize(c), cfg.p));
    if (out.starts.back().extracted_energy() < out.starts[out.best].extracted_energy()) out.best = out.starts.size() - 1;
  }
  return out;
}

}  // namespace torpart
