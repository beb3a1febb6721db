// Test-side oracles, kept independent of the implementation paths they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "witgame/neighborhood.hpp"
#include "witgame/types.hpp"

namespace oracles {

using witgame::Matrix;
using witgame::NeighborhoodSystem;
using witgame::Vector;

// Cost of the best single threshold split ("stump") on 1-D features under
// summed squared error, by direct enumeration.
inline double best_stump_sse(const std::vector<double>& x,
                             const std::vector<double>& f) {
  auto sse = [&](const std::vector<int>& rows) {
    if (rows.empty()) return 0.0;
    double mean = 0;
    for (int r : rows) mean += f[static_cast<std::size_t>(r)];
    mean /= static_cast<double>(rows.size());
    double s = 0;
    for (int r : rows) {
      const double d = f[static_cast<std::size_t>(r)] - mean;
      s += d * d;
    }
    return s;
  };
  std::vector<double> sorted_x = x;
  std::sort(sorted_x.begin(), sorted_x.end());
  sorted_x.erase(std::unique(sorted_x.begin(), sorted_x.end()),
                 sorted_x.end());
  double best = sse([&] {
    std::vector<int> all(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) all[i] = static_cast<int>(i);
    return all;
  }());
  for (std::size_t k = 0; k + 1 < sorted_x.size(); ++k) {
    const double thr = 0.5 * (sorted_x[k] + sorted_x[k + 1]);
    std::vector<int> left, right;
    for (std::size_t i = 0; i < x.size(); ++i)
      (x[i] <= thr ? left : right).push_back(static_cast<int>(i));
    best = std::min(best, sse(left) + sse(right));
  }
  return best;
}

// Optimal squared-error cost of partitioning sorted 1-D targets into at most
// `max_leaves` contiguous groups; dynamic program over split positions. Any
// depth-k axis-aligned tree on distinct 1-D features realizes exactly such a
// partition with max_leaves = 2^k, so this is an exhaustive-search oracle.
inline double optimal_partition_sse(std::vector<double> targets,
                                    int max_leaves) {
  const int n = static_cast<int>(targets.size());
  std::vector<double> prefix(n + 1, 0.0), prefix_sq(n + 1, 0.0);
  for (int i = 0; i < n; ++i) {
    prefix[i + 1] = prefix[i] + targets[static_cast<std::size_t>(i)];
    prefix_sq[i + 1] = prefix_sq[i] + targets[static_cast<std::size_t>(i)] *
                                          targets[static_cast<std::size_t>(i)];
  }
  auto segment_sse = [&](int lo, int hi) {  // rows [lo, hi)
    const double s = prefix[hi] - prefix[lo];
    const double sq = prefix_sq[hi] - prefix_sq[lo];
    return sq - s * s / static_cast<double>(hi - lo);
  };
  const double inf = std::numeric_limits<double>::infinity();
  // dp[g][i]: best cost covering the first i rows with exactly g groups.
  std::vector<std::vector<double>> dp(
      static_cast<std::size_t>(max_leaves) + 1,
      std::vector<double>(static_cast<std::size_t>(n) + 1, inf));
  dp[0][0] = 0.0;
  for (int g = 1; g <= max_leaves; ++g)
    for (int i = 1; i <= n; ++i)
      for (int j = g - 1; j < i; ++j)
        dp[static_cast<std::size_t>(g)][static_cast<std::size_t>(i)] = std::min(
            dp[static_cast<std::size_t>(g)][static_cast<std::size_t>(i)],
            dp[static_cast<std::size_t>(g - 1)][static_cast<std::size_t>(j)] +
                segment_sse(j, i));
  double best = inf;
  for (int g = 1; g <= max_leaves; ++g)
    best = std::min(best, dp[static_cast<std::size_t>(g)].back());
  return best;
}

// Assemble and solve the Theorem-1 stationarity system exactly:
// ((1+lambda) I - lambda M) f = y with M built from the per-neighborhood
// least-squares maps. Used as the linear-algebra oracle for the damped
// fixed-point solvers. Requires a common neighborhood size m.
inline Vector exact_equilibrium(const Matrix& inputs, const Vector& targets,
                                const NeighborhoodSystem& ns, double lambda,
                                bool symmetric, double ridge_alpha = -1.0) {
  const int n = ns.size();
  const auto m = static_cast<double>(ns.at(0).size());
  Matrix M = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    const auto& block = ns.at(j);
    Matrix Xj(static_cast<Eigen::Index>(block.size()), inputs.cols());
    for (std::size_t r = 0; r < block.size(); ++r)
      Xj.row(static_cast<Eigen::Index>(r)) = inputs.row(block[r]);
    Matrix solver;  // theta_j = solver * f(X_j)
    if (ridge_alpha > 0) {
      Matrix lhs = (lambda / m) * (Xj.transpose() * Xj);
      for (Eigen::Index t = 0; t < lhs.rows(); ++t) lhs(t, t) += ridge_alpha;
      solver = lhs.ldlt().solve((lambda / m) * Xj.transpose());
    } else {
      solver = Xj.completeOrthogonalDecomposition().pseudoInverse();
    }
    if (symmetric) {
      // theta_j feeds every anchor i with j in B(i); under A4 that is B(j).
      for (int i : block) {
        Eigen::RowVectorXd row = inputs.row(i) * solver;  // over B(j)
        for (std::size_t r = 0; r < block.size(); ++r)
          M(i, block[r]) += row(static_cast<Eigen::Index>(r)) / m;
      }
    } else {
      Eigen::RowVectorXd row = inputs.row(j) * solver;
      for (std::size_t r = 0; r < block.size(); ++r)
        M(j, block[r]) += row(static_cast<Eigen::Index>(r));
    }
  }
  Matrix A = (1.0 + lambda) * Matrix::Identity(n, n) - lambda * M;
  return A.lu().solve(targets);
}

// Euclidean projection of y onto { f : f(B_j) lies in span(X_j) for all j },
// via the null-space projector of the stacked residual constraints.
inline Vector projection_onto_consistency(const Matrix& inputs,
                                          const Vector& targets,
                                          const NeighborhoodSystem& ns) {
  const int n = ns.size();
  std::vector<Eigen::RowVectorXd> constraint_rows;
  for (int j = 0; j < n; ++j) {
    const auto& block = ns.at(j);
    const auto m = static_cast<Eigen::Index>(block.size());
    Matrix Xj(m, inputs.cols());
    for (Eigen::Index r = 0; r < m; ++r)
      Xj.row(r) = inputs.row(block[static_cast<std::size_t>(r)]);
    Matrix P = Xj * Xj.completeOrthogonalDecomposition().pseudoInverse();
    Matrix R = Matrix::Identity(m, m) - P;  // residual maker on the block
    for (Eigen::Index r = 0; r < m; ++r) {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
      for (Eigen::Index t = 0; t < m; ++t)
        row(block[static_cast<std::size_t>(t)]) += R(r, t);
      constraint_rows.push_back(row);
    }
  }
  Matrix C(static_cast<Eigen::Index>(constraint_rows.size()), n);
  for (std::size_t r = 0; r < constraint_rows.size(); ++r)
    C.row(static_cast<Eigen::Index>(r)) = constraint_rows[r];
  Matrix Cpinv = C.completeOrthogonalDecomposition().pseudoInverse();
  return targets - Cpinv * (C * targets);
}

// Pairwise order-agreement ratio by direct triple-loop counting.
inline double brute_force_auc(const std::vector<double>& refs,
                              const std::vector<double>& preds) {
  long long num = 0, den = 0;
  for (std::size_t i = 0; i < refs.size(); ++i)
    for (std::size_t j = 0; j < refs.size(); ++j)
      if (refs[i] > refs[j]) {
        ++den;
        if (preds[i] > preds[j]) ++num;
      }
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace oracles
