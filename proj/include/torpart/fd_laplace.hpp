#pragma once

// Five-point finite-difference Laplacians on periodic grids (Dirichlet by
// restriction to a mask, or penalised on the full torus) and a block
// shift-invert subspace iteration for their smallest eigenpairs.

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "torpart/common.hpp"
#include "torpart/grid.hpp"

namespace torpart {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Symmetric 5-point operator acting on a subset of grid points.
struct SparseOperator {
  SparseMatrix matrix;
  std::vector<int> grid_index;  // unknown -> grid point

  int dimension() const { return static_cast<int>(matrix.rows()); }

  /// Gershgorin bound on the spectral radius.
  double norm_estimate() const {
    Eigen::VectorXd rowsum = Eigen::VectorXd::Zero(matrix.rows());
    for (int c = 0; c < matrix.outerSize(); ++c)
      for (SparseMatrix::InnerIterator it(matrix, c); it; ++it) rowsum[it.row()] += std::abs(it.value());
    return rowsum.size() ? rowsum.maxCoeff() : 0.0;
  }
};

/// Dirichlet Laplacian of the mask: couplings to outside points are dropped.
inline SparseOperator assemble_dirichlet(const DomainMask& mask) {
  if (mask.empty()) throw InvalidArgument("cannot assemble an operator on an empty mask");
  const auto& g = mask.grid;
  std::vector<int> local(g.size(), -1);
  SparseOperator op;
  op.grid_index.reserve(mask.point_count);
  for (int p = 0; p < g.size(); ++p)
    if (mask.inside[p]) {
      local[p] = static_cast<int>(op.grid_index.size());
      op.grid_index.push_back(p);
    }
  const double cx = 1.0 / (g.hx() * g.hx());
  const double cy = 1.0 / (g.hy() * g.hy());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(5 * op.grid_index.size());
  for (int r = 0; r < static_cast<int>(op.grid_index.size()); ++r) {
    const int p = op.grid_index[r];
    trips.emplace_back(r, r, 2.0 * cx + 2.0 * cy);
    const auto nb = g.neighbors(p);
    for (int d = 0; d < 4; ++d) {
      const int c = local[nb[d]];
      if (c >= 0) trips.emplace_back(r, c, d < 2 ? -cx : -cy);
    }
  }
  op.matrix.resize(static_cast<Eigen::Index>(op.grid_index.size()),
                   static_cast<Eigen::Index>(op.grid_index.size()));
  op.matrix.setFromTriplets(trips.begin(), trips.end());
  return op;
}

/// Periodic Laplacian plus the diagonal penalty (1/eps)(1 - phi) on the full grid.
inline SparseOperator assemble_penalized(const PeriodicGrid& grid, std::span<const double> phi, double eps) {
  if (!(eps > 0.0)) throw InvalidArgument("penalty parameter eps must be positive");
  if (static_cast<int>(phi.size()) != grid.size()) throw InvalidArgument("density column size mismatch");
  SparseOperator op = assemble_dirichlet(DomainMask::full(grid));
  for (int p = 0; p < grid.size(); ++p) op.matrix.coeffRef(p, p) += (1.0 - phi[p]) / eps;
  return op;
}

enum class InnerSolver { kCholesky, kConjugateGradient };

struct EigenOptions {
  double tol = 1e-8;           // residual <= tol * ||A||_est
  int max_iterations = 500;
  int guard_vectors = 4;       // extra block columns beyond `count`
  std::uint64_t seed = 12345;
  InnerSolver inner = InnerSolver::kCholesky;
  double cg_tol = 1e-12;
  const Eigen::MatrixXd* start = nullptr;  // optional warm start block (columns)
};

struct EigenResult {
  std::vector<double> values;
  Eigen::MatrixXd vectors;  // orthonormal columns, Euclidean inner product
  std::vector<double> residuals;
  int iterations = 0;
  bool converged = false;
  double norm_estimate = 0.0;
};

namespace detail {

inline void canonical_sign(Eigen::MatrixXd& v) {
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    Eigen::Index imax = 0;
    v.col(c).cwiseAbs().maxCoeff(&imax);
    if (v(imax, c) < 0.0) v.col(c) = -v.col(c);
  }
}

inline Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
  // Second pass restores orthogonality lost to badly scaled columns.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr2(q);
  return qr2.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

inline EigenResult dense_eigenpairs(const SparseOperator& op, int count) {
  const Eigen::MatrixXd a = Eigen::MatrixXd(op.matrix);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  EigenResult res;
  res.norm_estimate = op.norm_estimate();
  res.vectors = es.eigenvectors().leftCols(count);
  canonical_sign(res.vectors);
  for (int i = 0; i < count; ++i) {
    res.values.push_back(es.eigenvalues()[i]);
    res.residuals.push_back((a * res.vectors.col(i) - es.eigenvalues()[i] * res.vectors.col(i)).norm());
  }
  res.iterations = 1;
  res.converged = true;
  return res;
}

}  // namespace detail

/// The `count` smallest eigenpairs of a symmetric positive semidefinite operator.
///
/// Block subspace iteration on (A + sigma I)^{-1} with a Rayleigh-Ritz step each
/// sweep. The small shift sigma makes the periodic (singular) operators
/// factorizable, so the constant mode of the full torus is found like any other.
/// On non-convergence the best iterate is returned with `converged == false`.
inline EigenResult smallest_eigenpairs(const SparseOperator& op, int count, const EigenOptions& opt = {}) {
  const int n = op.dimension();
  if (count < 1 || count > n) throw InvalidArgument("eigenpair count must be in [1, dimension]");
  if (!(opt.tol > 0.0)) throw InvalidArgument("eigen tolerance must be positive");

  const int block = std::min(n, count + std::max(opt.guard_vectors, count));
  if (n <= 64 || block >= n / 2) return detail::dense_eigenpairs(op, count);

  const double norm = op.norm_estimate();
  const double sigma = 1e-7 * norm;
  SparseMatrix shifted = op.matrix;
  for (int i = 0; i < n; ++i) shifted.coeffRef(i, i) += sigma;

  Eigen::SimplicialLDLT<SparseMatrix> ldlt;
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
  if (opt.inner == InnerSolver::kCholesky) {
    ldlt.compute(shifted);
    if (ldlt.info() != Eigen::Success) throw NumericalError("sparse LDLT factorization failed");
  } else {
    cg.setTolerance(opt.cg_tol);
    cg.setMaxIterations(10 * n);
    cg.compute(shifted);
  }
  auto solve = [&](const Eigen::MatrixXd& rhs) -> Eigen::MatrixXd {
    if (opt.inner == InnerSolver::kCholesky) return ldlt.solve(rhs);
    Eigen::MatrixXd out(rhs.rows(), rhs.cols());
    for (Eigen::Index c = 0; c < rhs.cols(); ++c) out.col(c) = cg.solve(rhs.col(c));
    return out;
  };

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::MatrixXd x(n, block);
  for (int c = 0; c < block; ++c)
    for (int r = 0; r < n; ++r) x(r, c) = unif(rng);
  if (opt.start != nullptr && opt.start->rows() == n) {
    const auto cols = std::min<Eigen::Index>(opt.start->cols(), block);
    x.leftCols(cols) = opt.start->leftCols(cols);
  }
  x = detail::orthonormalize(x);

  EigenResult res;
  res.norm_estimate = norm;
  res.values.assign(count, 0.0);
  res.residuals.assign(count, 0.0);
  const double target = opt.tol * norm;

  for (int it = 1; it <= opt.max_iterations; ++it) {
    const Eigen::MatrixXd q = detail::orthonormalize(solve(x));
    const Eigen::MatrixXd aq = op.matrix * q;
    Eigen::MatrixXd h = q.transpose() * aq;
    h = 0.5 * (h + h.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    x = q * es.eigenvectors();
    const Eigen::MatrixXd ax = aq * es.eigenvectors();
    bool done = true;
    for (int i = 0; i < count; ++i) {
      res.values[i] = es.eigenvalues()[i];
      res.residuals[i] = (ax.col(i) - res.values[i] * x.col(i)).norm();
      if (!(res.residuals[i] <= target)) done = false;
    }
    res.iterations = it;
    if (done) {
      res.converged = true;
      break;
    }
  }
  res.vectors = x.leftCols(count);
  detail::canonical_sign(res.vectors);
  return res;
}

inline double lambda_n(const DomainMask& mask, int which, double tol = 1e-8) {
  EigenOptions opt;
  opt.tol = tol;
  auto res = smallest_eigenpairs(assemble_dirichlet(mask), std::min(which, mask.point_count), opt);
  if (!res.converged) throw NumericalError("eigensolver did not converge");
  if (which > mask.point_count) throw InvalidArgument("mask has fewer points than requested eigenvalue index");
  return res.values[which - 1];
}

/// First Dirichlet eigenvalue of the masked domain.
inline double lambda1(const DomainMask& mask, double tol = 1e-8) { return lambda_n(mask, 1, tol); }

/// Second Dirichlet eigenvalue of the masked domain.
inline double lambda2(const DomainMask& mask, double tol = 1e-8) { return lambda_n(mask, 2, tol); }

}  // namespace torpart
