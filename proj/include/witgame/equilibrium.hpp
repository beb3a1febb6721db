#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "witgame/neighborhood.hpp"
#include "witgame/witness.hpp"

namespace witgame {

enum class FpVariant { symmetric, asymmetric };
enum class FpFamily { linear, ridge, constant };

// Equilibrium instance: scalar targets, a common-size neighborhood system
// with symmetric membership covering all anchors, and a witness family with
// a closed-form best response.
struct FixedPointProblem {
  Matrix inputs;   // N x d
  Vector targets;  // N
  NeighborhoodSystem ns;
  double lambda = 1.0;
  double delta = 0.0;  // uniform criterion margin
  FpFamily family = FpFamily::linear;
  double ridge_alpha = 1.0;
};

struct FixedPointResult {
  Vector f;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string variant;
};

namespace detail {

inline void validate_problem(const FixedPointProblem& p) {
  if (p.inputs.rows() != p.targets.size())
    throw std::invalid_argument("fixed point: inputs/targets size mismatch");
  if (p.ns.size() != static_cast<int>(p.inputs.rows()))
    throw std::invalid_argument("fixed point: neighborhood count mismatch");
  if (p.lambda < 0)
    throw std::invalid_argument("fixed point: lambda >= 0 required");
  const auto rep = verify_assumptions(p.ns);
  if (!rep.a3 || !rep.a4 || !rep.a5)
    throw std::invalid_argument("fixed point: assumptions A3-A5 must hold");
}

// Per-neighborhood closed-form witness maps theta_j = S_j * f(B_j),
// precomputed once; they do not depend on the iterate.
struct WitnessMaps {
  std::vector<Matrix> solver;  // d x m (empty for the constant family)
  int m = 0;
};

inline WitnessMaps build_maps(const FixedPointProblem& p) {
  WitnessMaps maps;
  maps.m = static_cast<int>(p.ns.at(0).size());
  if (p.family == FpFamily::constant) return maps;
  const double m = maps.m;
  for (int j = 0; j < p.ns.size(); ++j) {
    const auto& block = p.ns.at(j);
    Matrix Xj(static_cast<Eigen::Index>(block.size()), p.inputs.cols());
    for (std::size_t r = 0; r < block.size(); ++r)
      Xj.row(static_cast<Eigen::Index>(r)) = p.inputs.row(block[r]);
    if (p.family == FpFamily::ridge) {
      if (!(p.ridge_alpha > 0))
        throw std::invalid_argument("fixed point: ridge needs alpha > 0");
      // Best response of (lambda/m)||f - X theta||^2 + alpha ||theta||^2.
      Matrix lhs = (p.lambda / m) * (Xj.transpose() * Xj);
      for (Eigen::Index t = 0; t < lhs.rows(); ++t) lhs(t, t) += p.ridge_alpha;
      maps.solver.push_back(lhs.ldlt().solve((p.lambda / m) * Xj.transpose()));
    } else {
      Eigen::JacobiSVD<Matrix> svd(Xj,
                                   Eigen::ComputeThinU | Eigen::ComputeThinV);
      svd.setThreshold(1e-10);
      maps.solver.push_back(svd.solve(Matrix::Identity(Xj.rows(), Xj.rows())));
    }
  }
  return maps;
}

inline Vector gather(const Vector& f, const std::vector<int>& block) {
  Vector out(static_cast<Eigen::Index>(block.size()));
  for (std::size_t r = 0; r < block.size(); ++r) out(r) = f(block[r]);
  return out;
}

// One application of the Theorem-1 stationarity map (undamped).
inline Vector theorem1_map(const FixedPointProblem& p, const WitnessMaps& maps,
                           FpVariant variant, const Vector& f) {
  const int n = p.ns.size();
  const double m = maps.m;
  Vector out(n);
  if (p.family == FpFamily::constant) {
    Vector means(n);
    for (int j = 0; j < n; ++j) means(j) = gather(f, p.ns.at(j)).mean();
    for (int i = 0; i < n; ++i) {
      double pull = 0.0;
      if (variant == FpVariant::symmetric) {
        for (int j : p.ns.at(i)) pull += means(j);
        pull *= p.lambda / m;
      } else {
        pull = p.lambda * means(i);
      }
      out(i) = (p.targets(i) + pull) / (1.0 + p.lambda);
    }
    return out;
  }
  std::vector<Vector> theta(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j)
    theta[static_cast<std::size_t>(j)] =
        maps.solver[static_cast<std::size_t>(j)] * gather(f, p.ns.at(j));
  for (int i = 0; i < n; ++i) {
    double pull = 0.0;
    if (variant == FpVariant::symmetric) {
      Vector sum = Vector::Zero(p.inputs.cols());
      for (int j : p.ns.at(i)) sum += theta[static_cast<std::size_t>(j)];
      pull = (p.lambda / m) * p.inputs.row(i).dot(sum);
    } else {
      pull = p.lambda * p.inputs.row(i).dot(theta[static_cast<std::size_t>(i)]);
    }
    out(i) = (p.targets(i) + pull) / (1.0 + p.lambda);
  }
  return out;
}

inline FixedPointResult damped_iterate(
    const FixedPointProblem& p, FpVariant variant, const Vector& init,
    double tol, int max_iterations, const std::string& label) {
  const WitnessMaps maps = build_maps(p);
  Vector f = init;
  FixedPointResult result;
  result.variant = label;
  for (int it = 1; it <= max_iterations; ++it) {
    Vector next = 0.5 * f + 0.5 * theorem1_map(p, maps, variant, f);
    const double change = (next - f).cwiseAbs().maxCoeff();
    f = std::move(next);
    result.iterations = it;
    if (change <= tol) {
      result.converged = true;
      break;
    }
  }
  result.f = f;
  result.residual =
      (f - theorem1_map(p, maps, variant, f)).cwiseAbs().maxCoeff();
  return result;
}

}  // namespace detail

// Theorem-1 residual: max_i |f(x_i) - RHS_i(f)|, zero exactly at equilibria.
inline double residual_theorem1(const Vector& f, const FixedPointProblem& p,
                                FpVariant variant) {
  detail::validate_problem(p);
  const auto maps = detail::build_maps(p);
  return (f - detail::theorem1_map(p, maps, variant, f)).cwiseAbs().maxCoeff();
}

inline FixedPointResult solve_fp_symmetric(const FixedPointProblem& p,
                                           int max_iterations = 100000,
                                           double tol = 1e-10,
                                           const Vector* init = nullptr) {
  detail::validate_problem(p);
  return detail::damped_iterate(p, FpVariant::symmetric,
                                init ? *init : p.targets, tol, max_iterations,
                                "symmetric");
}

inline FixedPointResult solve_fp_asymmetric(const FixedPointProblem& p,
                                            int max_iterations = 100000,
                                            double tol = 1e-10,
                                            const Vector* init = nullptr) {
  detail::validate_problem(p);
  return detail::damped_iterate(p, FpVariant::asymmetric,
                                init ? *init : p.targets, tol, max_iterations,
                                "asymmetric");
}

// Constant-class corollary: witness feedback is neighborhood averaging and
// targets blend in with decay lambda/(1+lambda).
inline FixedPointResult solve_fp_constant(const FixedPointProblem& p,
                                          FpVariant variant,
                                          int max_iterations = 100000,
                                          double tol = 1e-10) {
  FixedPointProblem q = p;
  q.family = FpFamily::constant;
  detail::validate_problem(q);
  return detail::damped_iterate(
      q, variant, q.targets, tol, max_iterations,
      variant == FpVariant::symmetric ? "constant_symmetric"
                                      : "constant_asymmetric");
}

// Theorem-2 three-branch map for the uniform criterion. Square-root
// arguments that go negative on infeasible iterates are clamped to zero.
inline Vector uniform_map(const FixedPointProblem& p, const Vector& f) {
  const int n = p.ns.size();
  const double m = static_cast<double>(p.ns.at(0).size());
  std::vector<Vector> theta(static_cast<std::size_t>(n));
  std::vector<Vector> fitted(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const auto& block = p.ns.at(j);
    Matrix Xj(static_cast<Eigen::Index>(block.size()), p.inputs.cols());
    for (std::size_t r = 0; r < block.size(); ++r)
      Xj.row(static_cast<Eigen::Index>(r)) = p.inputs.row(block[r]);
    Vector fb = detail::gather(f, block);
    theta[static_cast<std::size_t>(j)] = pinv_solve(Xj, fb);
    fitted[static_cast<std::size_t>(j)] =
        Xj * theta[static_cast<std::size_t>(j)];
  }
  Vector out(n);
  for (int i = 0; i < n; ++i) {
    double alpha = -std::numeric_limits<double>::infinity();
    double beta = std::numeric_limits<double>::infinity();
    for (int j : p.ns.at(i)) {
      const auto& block = p.ns.at(j);
      const double center =
          p.inputs.row(i).dot(theta[static_cast<std::size_t>(j)]);
      double others = 0.0;
      for (std::size_t r = 0; r < block.size(); ++r) {
        if (block[r] == i) continue;
        const double resid =
            f(block[r]) - fitted[static_cast<std::size_t>(j)](
                              static_cast<Eigen::Index>(r));
        others += resid * resid;
      }
      const double slack = std::sqrt(std::max(0.0, p.delta * m - others));
      alpha = std::max(alpha, center - slack);
      beta = std::min(beta, center + slack);
    }
    if (alpha > p.targets(i))
      out(i) = alpha;
    else if (beta < p.targets(i))
      out(i) = beta;
    else
      out(i) = p.targets(i);
  }
  return out;
}

inline FixedPointResult solve_fp_uniform(const FixedPointProblem& p,
                                         int max_iterations = 100000,
                                         double tol = 1e-8,
                                         const Vector* init = nullptr) {
  detail::validate_problem(p);
  if (p.delta < 0)
    throw std::invalid_argument("solve_fp_uniform: delta >= 0 required");
  Vector f = init ? *init : p.targets;
  FixedPointResult result;
  result.variant = "uniform";
  for (int it = 1; it <= max_iterations; ++it) {
    Vector next = 0.5 * f + 0.5 * uniform_map(p, f);
    const double change = (next - f).cwiseAbs().maxCoeff();
    f = std::move(next);
    result.iterations = it;
    if (change <= tol) {
      result.converged = true;
      break;
    }
  }
  result.f = f;
  result.residual = (f - uniform_map(p, f)).cwiseAbs().maxCoeff();
  return result;
}

inline nlohmann::json fixed_point_to_json(const FixedPointResult& r) {
  nlohmann::json j;
  j["variant"] = r.variant;
  j["f"] = detail::to_flat(r.f);
  j["residual"] = r.residual;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  return j;
}

}  // namespace witgame
