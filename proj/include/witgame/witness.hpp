#pragma once

#include <optional>
#include <variant>
#include <vector>

#include <json.hpp>

#include "witgame/deviation.hpp"
#include "witgame/tree.hpp"
#include "witgame/types.hpp"

namespace witgame {

enum class WitnessFamily {
  constant,
  linear,
  ridge,
  tree_mse,
  tree_tv,
  ar,
  gaussian_tree
};

inline const char* family_name(WitnessFamily f) {
  switch (f) {
    case WitnessFamily::constant: return "constant";
    case WitnessFamily::linear: return "linear";
    case WitnessFamily::ridge: return "ridge";
    case WitnessFamily::tree_mse: return "tree_mse";
    case WitnessFamily::tree_tv: return "tree_tv";
    case WitnessFamily::ar: return "ar";
    case WitnessFamily::gaussian_tree: return "gaussian_tree";
  }
  return "unknown";
}

struct ConstantParams {
  Vector value;
};

// theta follows the X*theta convention with no intercept; the affine
// convention stores an explicit unpenalized intercept instead.
struct LinearParams {
  Matrix theta;  // d x Q
  std::optional<Vector> intercept;
};

// Order-K autoregressive map: y = sum_k theta_k[k] * x_{t-k} + theta_0,
// with theta_k[0] applied to the most recent point.
struct ArParams {
  std::vector<Matrix> theta_k;  // K matrices, each c x c
  Vector theta_0;               // c

  int order() const { return static_cast<int>(theta_k.size()); }
  int channels() const { return static_cast<int>(theta_0.size()); }
};

// A fitted best-response witness: the family, its parameters, its values on
// the neighborhood it was fitted to, and the achieved local deviation under
// the family's own deviation kind.
struct WitnessFit {
  WitnessFamily family = WitnessFamily::constant;
  std::variant<ConstantParams, LinearParams, ArParams, TreeParams> params;
  Matrix fitted_values;  // m x Q
  double deviation = 0.0;
};

// Minimum-norm least-squares solve via SVD; singular values below
// 1e-10 * sigma_max are treated as zero.
inline Matrix pinv_solve(const Matrix& X, const Matrix& F) {
  Eigen::JacobiSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  return svd.solve(F);
}

inline WitnessFit fit_constant(const Matrix& predictor_values) {
  if (predictor_values.rows() < 1)
    throw std::invalid_argument("fit_constant: m >= 1 required");
  WitnessFit fit;
  fit.family = WitnessFamily::constant;
  Vector mean = predictor_values.colwise().mean().transpose();
  fit.params = ConstantParams{mean};
  fit.fitted_values = mean.transpose().replicate(predictor_values.rows(), 1);
  fit.deviation = local_deviation(predictor_values, fit.fitted_values,
                                  DeviationKind::squared);
  return fit;
}

inline WitnessFit fit_linear_pinv(const Matrix& X,
                                  const Matrix& predictor_values,
                                  bool affine = false) {
  if (X.rows() != predictor_values.rows() || X.rows() < 1)
    throw std::invalid_argument("fit_linear_pinv: bad shapes");
  WitnessFit fit;
  fit.family = WitnessFamily::linear;
  if (affine) {
    Matrix Z(X.rows(), X.cols() + 1);
    Z << X, Matrix::Ones(X.rows(), 1);
    Matrix full = pinv_solve(Z, predictor_values);
    LinearParams p;
    p.theta = full.topRows(X.cols());
    p.intercept = full.row(X.cols()).transpose();
    fit.fitted_values = Z * full;
    fit.params = std::move(p);
  } else {
    LinearParams p;
    p.theta = pinv_solve(X, predictor_values);
    fit.fitted_values = X * p.theta;
    fit.params = std::move(p);
  }
  fit.deviation = local_deviation(predictor_values, fit.fitted_values,
                                  DeviationKind::squared);
  return fit;
}

// Ridge witness: argmin weight * ||F - X theta||^2 + alpha * ||theta||^2,
// solved column-wise by the normal equations. `weight` carries the lambda/m
// factor when the fit is the best response inside a game objective; the
// intercept (affine convention) is never penalized.
inline WitnessFit fit_ridge(const Matrix& X, const Matrix& predictor_values,
                            double alpha, double weight = 1.0,
                            bool affine = false) {
  if (!(alpha > 0)) throw std::invalid_argument("fit_ridge: alpha > 0 required");
  if (weight < 0) throw std::invalid_argument("fit_ridge: weight >= 0 required");
  if (affine && !(weight > 0))
    throw std::invalid_argument("fit_ridge: affine requires weight > 0");
  if (X.rows() != predictor_values.rows() || X.rows() < 1)
    throw std::invalid_argument("fit_ridge: bad shapes");
  WitnessFit fit;
  fit.family = WitnessFamily::ridge;
  const Eigen::Index d = X.cols();
  Matrix Z;
  if (affine) {
    Z.resize(X.rows(), d + 1);
    Z << X, Matrix::Ones(X.rows(), 1);
  } else {
    Z = X;
  }
  Matrix lhs = weight * (Z.transpose() * Z);
  for (Eigen::Index j = 0; j < d; ++j) lhs(j, j) += alpha;
  Matrix full = lhs.ldlt().solve(weight * (Z.transpose() * predictor_values));
  LinearParams p;
  p.theta = full.topRows(d);
  if (affine) p.intercept = full.row(d).transpose();
  fit.fitted_values = Z * full;
  fit.params = std::move(p);
  fit.deviation = local_deviation(predictor_values, fit.fitted_values,
                                  DeviationKind::squared);
  return fit;
}

inline WitnessFit fit_tree_mse(const Matrix& features,
                               const Matrix& predictor_values, int max_depth) {
  WitnessFit fit;
  fit.family = WitnessFamily::tree_mse;
  TreeParams tree = fit_regression_tree(features, predictor_values, max_depth,
                                        TreeLoss::squared_error);
  fit.fitted_values = tree_predict(tree, features);
  fit.params = std::move(tree);
  fit.deviation = local_deviation(predictor_values, fit.fitted_values,
                                  DeviationKind::squared);
  return fit;
}

inline WitnessFit fit_tree_tv(const Matrix& features,
                              const Matrix& predictor_values, int max_depth) {
  WitnessFit fit;
  fit.family = WitnessFamily::tree_tv;
  TreeParams tree = fit_regression_tree(features, predictor_values, max_depth,
                                        TreeLoss::total_variation);
  fit.fitted_values = tree_predict(tree, features);
  fit.params = std::move(tree);
  fit.deviation = local_deviation(predictor_values, fit.fitted_values,
                                  DeviationKind::total_variation);
  return fit;
}

// AR(K) witness over a neighborhood of sequence prefixes. Each context is a
// (length x c) block whose last K rows feed the regression row
// [x_t, x_{t-1}, ..., x_{t-K+1}, 1]; mean_values holds the predictor means,
// one row per context. Ridge-regularized with an unpenalized intercept.
inline WitnessFit fit_ar(const std::vector<Matrix>& contexts,
                         const Matrix& mean_values, int K, double alpha,
                         double weight = 1.0) {
  if (K < 1) throw std::invalid_argument("fit_ar: K >= 1 required");
  if (!(alpha > 0)) throw std::invalid_argument("fit_ar: alpha > 0 required");
  if (contexts.empty() ||
      mean_values.rows() != static_cast<Eigen::Index>(contexts.size()))
    throw std::invalid_argument("fit_ar: context/value count mismatch");
  const Eigen::Index c = mean_values.cols();
  const Eigen::Index p = K * c;
  Matrix Z(static_cast<Eigen::Index>(contexts.size()), p + 1);
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    const Matrix& ctx = contexts[i];
    if (ctx.rows() < K)
      throw std::invalid_argument("fit_ar: window shorter than K");
    if (ctx.cols() != c)
      throw std::invalid_argument("fit_ar: channel mismatch");
    for (int k = 0; k < K; ++k)
      Z.block(static_cast<Eigen::Index>(i), k * c, 1, c) =
          ctx.row(ctx.rows() - 1 - k);
    Z(static_cast<Eigen::Index>(i), p) = 1.0;
  }
  Matrix lhs = weight * (Z.transpose() * Z);
  for (Eigen::Index j = 0; j < p; ++j) lhs(j, j) += alpha;
  Matrix full = lhs.ldlt().solve(weight * (Z.transpose() * mean_values));

  ArParams params;
  params.theta_k.reserve(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k)
    params.theta_k.push_back(full.middleRows(k * c, c).transpose());
  params.theta_0 = full.row(p).transpose();

  WitnessFit fit;
  fit.family = WitnessFamily::ar;
  fit.fitted_values = Z * full;
  fit.params = std::move(params);
  fit.deviation = local_deviation(mean_values, fit.fitted_values,
                                  DeviationKind::squared);
  return fit;
}

inline Vector ar_predict(const ArParams& params, const Matrix& recent) {
  const int K = params.order();
  if (recent.rows() < K)
    throw std::invalid_argument("ar_predict: window shorter than K");
  Vector out = params.theta_0;
  for (int k = 0; k < K; ++k)
    out += params.theta_k[static_cast<std::size_t>(k)] *
           recent.row(recent.rows() - 1 - k).transpose();
  return out;
}

// Gaussian-output tree: squared-error tree on the concatenated
// [mean, variance] targets; leaf variances are clamped to >= 1e-8 so the
// KL deviation stays finite. The reported deviation is the KL kind.
inline WitnessFit fit_gaussian_tree(const Matrix& features,
                                    const Matrix& mean_variance_values,
                                    int max_depth) {
  if (mean_variance_values.cols() % 2 != 0)
    throw std::invalid_argument(
        "fit_gaussian_tree: need [mean, variance] column halves");
  const Eigen::Index q = mean_variance_values.cols() / 2;
  if ((mean_variance_values.rightCols(q).array() <= 0.0).any())
    throw std::invalid_argument("fit_gaussian_tree: non-positive variance");
  WitnessFit fit;
  fit.family = WitnessFamily::gaussian_tree;
  TreeParams tree = fit_regression_tree(features, mean_variance_values,
                                        max_depth, TreeLoss::squared_error);
  for (auto& node : tree.nodes)
    for (Eigen::Index j = q; j < 2 * q; ++j)
      node.leaf_value(j) = std::max(node.leaf_value(j), 1e-8);
  fit.fitted_values = tree_predict(tree, features);
  fit.params = std::move(tree);
  fit.deviation = local_deviation(mean_variance_values, fit.fitted_values,
                                  DeviationKind::kl_diag_gaussian);
  return fit;
}

// Evaluate a fitted witness at arbitrary inputs (families defined on feature
// rows; AR witnesses evaluate through ar_predict instead).
inline Matrix witness_predict(const WitnessFit& fit, const Matrix& X) {
  switch (fit.family) {
    case WitnessFamily::constant: {
      const auto& p = std::get<ConstantParams>(fit.params);
      return p.value.transpose().replicate(X.rows(), 1);
    }
    case WitnessFamily::linear:
    case WitnessFamily::ridge: {
      const auto& p = std::get<LinearParams>(fit.params);
      Matrix out = X * p.theta;
      if (p.intercept) out.rowwise() += p.intercept->transpose();
      return out;
    }
    case WitnessFamily::tree_mse:
    case WitnessFamily::tree_tv:
    case WitnessFamily::gaussian_tree:
      return tree_predict(std::get<TreeParams>(fit.params), X);
    case WitnessFamily::ar:
      throw std::invalid_argument(
          "witness_predict: AR witnesses need a window context");
  }
  throw std::logic_error("witness_predict: unknown family");
}

// Flat parameter vector for parameter-drift metrics and heat maps.
// AR order: [theta_0, theta_1 row-major, ..., theta_K row-major].
inline Vector flatten_witness_params(const WitnessFit& fit) {
  switch (fit.family) {
    case WitnessFamily::constant:
      return std::get<ConstantParams>(fit.params).value;
    case WitnessFamily::linear:
    case WitnessFamily::ridge: {
      const auto& p = std::get<LinearParams>(fit.params);
      const Eigen::Index base = p.intercept ? p.intercept->size() : 0;
      Vector out(base + p.theta.size());
      if (p.intercept) out.head(base) = *p.intercept;
      for (Eigen::Index r = 0; r < p.theta.rows(); ++r)
        out.segment(base + r * p.theta.cols(), p.theta.cols()) =
            p.theta.row(r).transpose();
      return out;
    }
    case WitnessFamily::ar: {
      const auto& p = std::get<ArParams>(fit.params);
      const Eigen::Index c = p.channels();
      Vector out(c + p.order() * c * c);
      out.head(c) = p.theta_0;
      Eigen::Index pos = c;
      for (const auto& th : p.theta_k)
        for (Eigen::Index r = 0; r < c; ++r, pos += c)
          out.segment(pos, c) = th.row(r).transpose();
      return out;
    }
    default:
      throw std::invalid_argument(
          "flatten_witness_params: tree families have no flat parameters");
  }
}

namespace detail {

inline std::vector<double> to_flat(const Matrix& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

}  // namespace detail

inline nlohmann::json witness_to_json(const WitnessFit& fit) {
  nlohmann::json j;
  j["family"] = family_name(fit.family);
  j["deviation"] = fit.deviation;
  nlohmann::json params;
  switch (fit.family) {
    case WitnessFamily::constant:
      params["value"] = detail::to_flat(std::get<ConstantParams>(fit.params).value);
      break;
    case WitnessFamily::linear:
    case WitnessFamily::ridge: {
      const auto& p = std::get<LinearParams>(fit.params);
      params["theta"] = detail::to_flat(p.theta);
      params["rows"] = p.theta.rows();
      params["cols"] = p.theta.cols();
      if (p.intercept) params["intercept"] = detail::to_flat(*p.intercept);
      break;
    }
    case WitnessFamily::ar: {
      const auto& p = std::get<ArParams>(fit.params);
      params["order"] = p.order();
      params["channels"] = p.channels();
      params["theta_0"] = detail::to_flat(p.theta_0);
      nlohmann::json thetas = nlohmann::json::array();
      for (const auto& th : p.theta_k) thetas.push_back(detail::to_flat(th));
      params["theta"] = thetas;
      break;
    }
    case WitnessFamily::tree_mse:
    case WitnessFamily::tree_tv:
    case WitnessFamily::gaussian_tree: {
      const auto& t = std::get<TreeParams>(fit.params);
      nlohmann::json nodes = nlohmann::json::array();
      for (const auto& nd : t.nodes) {
        nodes.push_back({{"feature", nd.feature},
                         {"threshold", nd.threshold},
                         {"left", nd.left},
                         {"right", nd.right},
                         {"value", detail::to_flat(nd.leaf_value)}});
      }
      params["max_depth"] = t.max_depth;
      params["nodes"] = nodes;
      break;
    }
  }
  j["params"] = params;
  return j;
}

}  // namespace witgame
