#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "witgame/types.hpp"

namespace witgame {

enum class TreeLoss { squared_error, total_variation };

// Axis-aligned binary regression tree. feature < 0 marks a leaf. Rows with
// feature value <= threshold go left. Binary {0,1} features produce the
// single candidate threshold 0.5, i.e. an equality split.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  Vector leaf_value;

  bool is_leaf() const { return feature < 0; }
};

struct TreeParams {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int max_depth = 0;
};

// Tree depth used per neighborhood of size m: max{ceil(log2 m) - 1 + delta, 1}.
inline int depth_rule(int m, int delta = 0) {
  if (m < 1) throw std::invalid_argument("depth_rule: m >= 1 required");
  int ceil_log2 = 0;
  while ((1 << ceil_log2) < m) ++ceil_log2;
  return std::max(ceil_log2 - 1 + delta, 1);
}

namespace detail {

inline Vector leaf_prediction(const Matrix& targets,
                              const std::vector<int>& rows, TreeLoss loss) {
  const auto q = targets.cols();
  Vector out(q);
  if (loss == TreeLoss::squared_error) {
    out.setZero();
    for (int r : rows) out += targets.row(r).transpose();
    out /= static_cast<double>(rows.size());
  } else {
    // Coordinate-wise median, the exact l1 minimizer; even counts take the
    // midpoint of the two middle values.
    std::vector<double> vals(rows.size());
    for (Eigen::Index j = 0; j < q; ++j) {
      for (std::size_t k = 0; k < rows.size(); ++k)
        vals[k] = targets(rows[k], j);
      std::sort(vals.begin(), vals.end());
      const std::size_t n = vals.size();
      out(j) = n % 2 == 1 ? vals[n / 2]
                          : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
    }
  }
  return out;
}

inline double leaf_cost(const Matrix& targets, const std::vector<int>& rows,
                        TreeLoss loss) {
  const Vector pred = leaf_prediction(targets, rows, loss);
  double cost = 0.0;
  for (int r : rows) {
    if (loss == TreeLoss::squared_error)
      cost += (targets.row(r).transpose() - pred).squaredNorm();
    else
      cost += (targets.row(r).transpose() - pred).cwiseAbs().sum();
  }
  return cost;
}

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double cost = 0.0;
};

// Greedy search over all axis-aligned candidates. Candidates are midpoints
// between consecutive sorted distinct values; ties keep the lowest feature
// index and smallest threshold.
inline SplitChoice best_split(const Matrix& features, const Matrix& targets,
                              const std::vector<int>& rows, TreeLoss loss) {
  SplitChoice best;
  std::vector<double> values;
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    values.clear();
    for (int r : rows) values.push_back(features(r, j));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
      const double thr = 0.5 * (values[k] + values[k + 1]);
      std::vector<int> left, right;
      for (int r : rows)
        (features(r, j) <= thr ? left : right).push_back(r);
      if (left.empty() || right.empty()) continue;
      const double cost =
          leaf_cost(targets, left, loss) + leaf_cost(targets, right, loss);
      if (!best.found || cost < best.cost) {
        best = {true, static_cast<int>(j), thr, cost};
      }
    }
  }
  return best;
}

inline int grow_tree(TreeParams& tree, const Matrix& features,
                     const Matrix& targets, const std::vector<int>& rows,
                     int depth, int max_depth, TreeLoss loss) {
  const int node_id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  tree.nodes[node_id].leaf_value = leaf_prediction(targets, rows, loss);
  const double node_cost = leaf_cost(targets, rows, loss);
  if (depth >= max_depth || rows.size() < 2 || node_cost <= 1e-12)
    return node_id;
  const SplitChoice split = best_split(features, targets, rows, loss);
  if (!split.found || split.cost >= node_cost - 1e-12) return node_id;
  std::vector<int> left_rows, right_rows;
  for (int r : rows)
    (features(r, split.feature) <= split.threshold ? left_rows : right_rows)
        .push_back(r);
  tree.nodes[node_id].feature = split.feature;
  tree.nodes[node_id].threshold = split.threshold;
  const int left =
      grow_tree(tree, features, targets, left_rows, depth + 1, max_depth, loss);
  const int right = grow_tree(tree, features, targets, right_rows, depth + 1,
                              max_depth, loss);
  tree.nodes[node_id].left = left;
  tree.nodes[node_id].right = right;
  return node_id;
}

}  // namespace detail

inline TreeParams fit_regression_tree(const Matrix& features,
                                      const Matrix& targets, int max_depth,
                                      TreeLoss loss) {
  if (max_depth < 1)
    throw std::invalid_argument("fit_regression_tree: max_depth >= 1");
  if (features.rows() != targets.rows() || features.rows() < 1)
    throw std::invalid_argument("fit_regression_tree: bad shapes");
  TreeParams tree;
  tree.max_depth = max_depth;
  std::vector<int> rows(static_cast<std::size_t>(features.rows()));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
  detail::grow_tree(tree, features, targets, rows, 0, max_depth, loss);
  return tree;
}

inline Vector tree_predict_row(const TreeParams& tree,
                               const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  int node = 0;
  while (!tree.nodes[static_cast<std::size_t>(node)].is_leaf()) {
    const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
    node = x(nd.feature) <= nd.threshold ? nd.left : nd.right;
  }
  return tree.nodes[static_cast<std::size_t>(node)].leaf_value;
}

inline Matrix tree_predict(const TreeParams& tree, const Matrix& features) {
  const Eigen::Index q = tree.nodes[0].leaf_value.size();
  Matrix out(features.rows(), q);
  for (Eigen::Index i = 0; i < features.rows(); ++i)
    out.row(i) = tree_predict_row(tree, features.row(i)).transpose();
  return out;
}

inline int tree_depth(const TreeParams& tree, int node = 0) {
  const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
  if (nd.is_leaf()) return 0;
  return 1 + std::max(tree_depth(tree, nd.left), tree_depth(tree, nd.right));
}

}  // namespace witgame
