#pragma once

#include <chrono>
#include <fstream>
#include <limits>
#include <vector>

#include <json.hpp>

#include "witgame/dataset.hpp"
#include "witgame/deviation.hpp"
#include "witgame/neighborhood.hpp"
#include "witgame/predictors.hpp"
#include "witgame/witness.hpp"

namespace witgame {

enum class GameCriterion { uniform, symmetric, asymmetric, adjusted_symmetric };
enum class PrimalLoss { squared, cross_entropy };

// Witness family choice plus its hyperparameters. When depth_from_size is
// set, tree depth follows depth_rule(m, depth_offset) per neighborhood.
struct WitnessSpec {
  WitnessFamily family = WitnessFamily::linear;
  double alpha = 1.0;
  int max_depth = 2;
  bool depth_from_size = false;
  int depth_offset = 0;
  int ar_order = 2;
  bool affine = false;
};

struct GameConfig {
  GameCriterion criterion = GameCriterion::symmetric;
  double lambda = 1.0;
  double delta = 0.0;
  WitnessSpec witness;
  DeviationKind deviation = DeviationKind::squared;
  PrimalLoss primal_loss = PrimalLoss::squared;
  int outer_iterations = 500;
  int witness_refresh_period = 1;
  double learning_rate = 1e-2;
  double lr_decay = 0.0;  // step t uses learning_rate / (1 + lr_decay * t)
  std::uint64_t seed = 0;
  // Mirror-prox steps for the uniform criterion; both decay 10x on divergence.
  double f_step = 1e-2;
  double multiplier_step = 1e-1;
  double violation_tol = 1e-4;
  double convergence_tol = 1e-10;

  void validate() const {
    if (lambda < 0) throw std::invalid_argument("game: lambda >= 0 required");
    if (delta < 0) throw std::invalid_argument("game: delta >= 0 required");
    if (outer_iterations < 1)
      throw std::invalid_argument("game: iterations >= 1 required");
    if (witness_refresh_period < 1)
      throw std::invalid_argument("game: refresh period >= 1 required");
  }
};

struct GameReport {
  std::vector<double> primal_loss_trace;
  std::vector<double> mean_deviation_trace;
  std::vector<double> max_deviation_trace;
  std::vector<double> multiplier_norm_trace;
  std::vector<int> violation_trace;
  Matrix final_values;                 // predictor values at the anchors
  std::vector<WitnessFit> final_witnesses;
  Vector multipliers;                  // uniform criterion only
  int iterations = 0;
  bool converged = false;
  bool diverged = false;
  double update_seconds = 0.0;         // predictor-update phase wall time
};

namespace detail {

inline double primal_value(PrimalLoss loss,
                           const Eigen::Ref<const Eigen::RowVectorXd>& f,
                           const Eigen::Ref<const Eigen::RowVectorXd>& y) {
  if (loss == PrimalLoss::squared) return (f - y).squaredNorm();
  double total = 0.0;
  for (Eigen::Index q = 0; q < f.size(); ++q) {
    const double p = std::clamp(f(q), 1e-7, 1.0 - 1e-7);
    total += -(y(q) * std::log(p) + (1.0 - y(q)) * std::log(1.0 - p));
  }
  return total;
}

inline Eigen::RowVectorXd primal_grad(
    PrimalLoss loss, const Eigen::Ref<const Eigen::RowVectorXd>& f,
    const Eigen::Ref<const Eigen::RowVectorXd>& y) {
  if (loss == PrimalLoss::squared) return 2.0 * (f - y);
  Eigen::RowVectorXd g(f.size());
  for (Eigen::Index q = 0; q < f.size(); ++q) {
    const double p = std::clamp(f(q), 1e-7, 1.0 - 1e-7);
    g(q) = -y(q) / p + (1.0 - y(q)) / (1.0 - p);
  }
  return g;
}

// Gradient of d(f_row, g_row) with respect to f_row, witness frozen.
inline Eigen::RowVectorXd deviation_grad(
    DeviationKind kind, const Eigen::Ref<const Eigen::RowVectorXd>& f,
    const Eigen::Ref<const Eigen::RowVectorXd>& g) {
  switch (kind) {
    case DeviationKind::squared:
      return 2.0 * (f - g);
    case DeviationKind::total_variation:
      return (f - g).unaryExpr(
          [](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
    case DeviationKind::kl_diag_gaussian: {
      const Eigen::Index q = f.size() / 2;
      Eigen::RowVectorXd out(f.size());
      for (Eigen::Index j = 0; j < q; ++j) {
        const double mf = f(j), vf = f(q + j);
        const double mg = g(j), vg = g(q + j);
        out(j) = (mf - mg) / vf;
        out(q + j) =
            0.5 * (1.0 / vf - (vg + (mg - mf) * (mg - mf)) / (vf * vf));
      }
      return out;
    }
  }
  throw std::logic_error("deviation_grad: unknown kind");
}

// Anchor membership turned inside out: incoming[t] lists (owner, row) pairs
// such that anchor t sits at `row` inside the owner's neighborhood.
struct Membership {
  std::vector<std::vector<std::pair<int, int>>> incoming;
  std::vector<int> self_row;  // position of i in B(i), -1 if absent

  explicit Membership(const NeighborhoodSystem& ns) {
    incoming.resize(static_cast<std::size_t>(ns.size()));
    self_row.assign(static_cast<std::size_t>(ns.size()), -1);
    for (int i = 0; i < ns.size(); ++i) {
      const auto& block = ns.at(i);
      for (std::size_t r = 0; r < block.size(); ++r) {
        incoming[static_cast<std::size_t>(block[r])].push_back(
            {i, static_cast<int>(r)});
        if (block[r] == i) self_row[static_cast<std::size_t>(i)] =
            static_cast<int>(r);
      }
    }
  }
};

inline Matrix gather_rows(const Matrix& m, const std::vector<int>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
  return out;
}

inline WitnessFit fit_family(const WitnessSpec& spec, const Matrix& X,
                             const Matrix& F) {
  const int depth =
      spec.depth_from_size
          ? depth_rule(static_cast<int>(X.rows()), spec.depth_offset)
          : spec.max_depth;
  switch (spec.family) {
    case WitnessFamily::constant:
      return fit_constant(F);
    case WitnessFamily::linear:
      return fit_linear_pinv(X, F, spec.affine);
    case WitnessFamily::ridge:
      return fit_ridge(X, F, spec.alpha, 1.0, spec.affine);
    case WitnessFamily::tree_mse:
      return fit_tree_mse(X, F, depth);
    case WitnessFamily::tree_tv:
      return fit_tree_tv(X, F, depth);
    case WitnessFamily::gaussian_tree:
      return fit_gaussian_tree(X, F, depth);
    case WitnessFamily::ar:
      throw std::invalid_argument(
          "dataset games do not take AR witnesses; use the sequence game");
  }
  throw std::logic_error("fit_family: unknown family");
}

}  // namespace detail

// Best-response witnesses at the current predictor values, one per anchor.
inline std::vector<WitnessFit> refit_witnesses(const Matrix& inputs,
                                               const Matrix& f_values,
                                               const NeighborhoodSystem& ns,
                                               const WitnessSpec& spec) {
  std::vector<WitnessFit> fits;
  fits.reserve(static_cast<std::size_t>(ns.size()));
  for (int i = 0; i < ns.size(); ++i) {
    const auto& block = ns.at(i);
    fits.push_back(detail::fit_family(spec,
                                      detail::gather_rows(inputs, block),
                                      detail::gather_rows(f_values, block)));
  }
  return fits;
}

// Per-anchor deviation of the current predictor values from frozen witnesses.
inline Vector anchor_deviations(const Matrix& f_values,
                                const NeighborhoodSystem& ns,
                                const std::vector<WitnessFit>& fits,
                                DeviationKind kind) {
  Vector dev(ns.size());
  for (int i = 0; i < ns.size(); ++i)
    dev(i) = local_deviation(detail::gather_rows(f_values, ns.at(i)),
                             fits[static_cast<std::size_t>(i)].fitted_values,
                             kind);
  return dev;
}

// Eq.-style symmetric objective: witnesses are refit (best response) at the
// given predictor values before evaluation.
inline double eval_symmetric_objective(const Matrix& f_values,
                                       const Dataset& ds,
                                       const NeighborhoodSystem& ns,
                                       const GameConfig& cfg) {
  cfg.validate();
  auto fits = refit_witnesses(ds.inputs, f_values, ns, cfg.witness);
  const Vector dev = anchor_deviations(f_values, ns, fits, cfg.deviation);
  double total = 0.0;
  for (Eigen::Index i = 0; i < f_values.rows(); ++i)
    total += detail::primal_value(cfg.primal_loss, f_values.row(i),
                                  ds.targets.row(i)) +
             cfg.lambda * dev(i);
  return total;
}

// Asymmetric objective: the predictor is charged only at the anchor, against
// the anchor's own frozen best-response witness.
inline double eval_asymmetric_objective(const Matrix& f_values,
                                        const Dataset& ds,
                                        const NeighborhoodSystem& ns,
                                        const GameConfig& cfg) {
  cfg.validate();
  auto fits = refit_witnesses(ds.inputs, f_values, ns, cfg.witness);
  detail::Membership membership(ns);
  double total = 0.0;
  for (Eigen::Index i = 0; i < f_values.rows(); ++i) {
    const int row = membership.self_row[static_cast<std::size_t>(i)];
    if (row < 0)
      throw std::invalid_argument(
          "asymmetric objective: anchor must lie in its own neighborhood");
    total += detail::primal_value(cfg.primal_loss, f_values.row(i),
                                  ds.targets.row(i)) +
             cfg.lambda *
                 detail::row_deviation(
                     cfg.deviation, f_values.row(i),
                     fits[static_cast<std::size_t>(i)].fitted_values.row(row));
  }
  return total;
}

struct AdjustedTargets {
  Vector weight;   // N_bar per anchor
  Matrix summary;  // g_bar per anchor, N x Q
};

// Anchor-local reweighting whose gradient matches the symmetric game:
// N_bar_i = sum_{t in B(i)} 1/|B(t)|, g_bar_i = sum_t g_t(x_i)/|B(t)|.
// Requires symmetric membership (A4) and full coverage (A5).
inline AdjustedTargets compute_adjusted_targets(
    const std::vector<WitnessFit>& fits, const NeighborhoodSystem& ns) {
  const auto report = verify_assumptions(ns);
  if (!report.a4 || !report.a5)
    throw std::invalid_argument(
        "compute_adjusted_targets: assumptions A4 and A5 must hold");
  detail::Membership membership(ns);
  const Eigen::Index q = fits[0].fitted_values.cols();
  AdjustedTargets out;
  out.weight = Vector::Zero(ns.size());
  out.summary = Matrix::Zero(ns.size(), q);
  for (int i = 0; i < ns.size(); ++i) {
    for (const auto& [owner, row] :
         membership.incoming[static_cast<std::size_t>(i)]) {
      const double inv_size = 1.0 / static_cast<double>(ns.at(owner).size());
      out.weight(i) += inv_size;
      out.summary.row(i) +=
          inv_size *
          fits[static_cast<std::size_t>(owner)].fitted_values.row(row);
    }
  }
  return out;
}

namespace detail {

// Gradient of the chosen criterion's penalty with respect to every anchor
// value, witnesses frozen.
inline Matrix penalty_gradient(GameCriterion criterion, const Matrix& f_values,
                               const NeighborhoodSystem& ns,
                               const std::vector<WitnessFit>& fits,
                               const Membership& membership,
                               DeviationKind kind, double lambda) {
  Matrix grad = Matrix::Zero(f_values.rows(), f_values.cols());
  if (lambda == 0.0) return grad;
  if (criterion == GameCriterion::symmetric) {
    for (Eigen::Index t = 0; t < f_values.rows(); ++t) {
      for (const auto& [owner, row] :
           membership.incoming[static_cast<std::size_t>(t)]) {
        const double inv_size = 1.0 / static_cast<double>(ns.at(owner).size());
        grad.row(t) +=
            lambda * inv_size *
            deviation_grad(
                kind, f_values.row(t),
                fits[static_cast<std::size_t>(owner)].fitted_values.row(row));
      }
    }
  } else if (criterion == GameCriterion::asymmetric) {
    for (Eigen::Index i = 0; i < f_values.rows(); ++i) {
      const int row = membership.self_row[static_cast<std::size_t>(i)];
      if (row < 0)
        throw std::invalid_argument(
            "asymmetric game: anchor must lie in its own neighborhood");
      grad.row(i) +=
          lambda *
          deviation_grad(
              kind, f_values.row(i),
              fits[static_cast<std::size_t>(i)].fitted_values.row(row));
    }
  } else {  // adjusted_symmetric
    if (kind != DeviationKind::squared)
      throw std::invalid_argument(
          "adjusted symmetric criterion requires the squared deviation");
    auto adjusted = compute_adjusted_targets(fits, ns);
    for (Eigen::Index i = 0; i < f_values.rows(); ++i)
      grad.row(i) += 2.0 * lambda *
                     (adjusted.weight(i) * f_values.row(i) -
                      adjusted.summary.row(i));
  }
  return grad;
}

inline double criterion_objective(GameCriterion criterion,
                                  const Matrix& f_values, const Dataset& ds,
                                  const NeighborhoodSystem& ns,
                                  const std::vector<WitnessFit>& fits,
                                  const Membership& membership,
                                  const GameConfig& cfg) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < f_values.rows(); ++i)
    total += primal_value(cfg.primal_loss, f_values.row(i), ds.targets.row(i));
  if (cfg.lambda == 0.0) return total;
  if (criterion == GameCriterion::symmetric) {
    const Vector dev = anchor_deviations(f_values, ns, fits, cfg.deviation);
    total += cfg.lambda * dev.sum();
  } else if (criterion == GameCriterion::asymmetric) {
    for (Eigen::Index i = 0; i < f_values.rows(); ++i) {
      const int row = membership.self_row[static_cast<std::size_t>(i)];
      total += cfg.lambda *
               row_deviation(
                   cfg.deviation, f_values.row(i),
                   fits[static_cast<std::size_t>(i)].fitted_values.row(row));
    }
  } else {
    auto adjusted = compute_adjusted_targets(fits, ns);
    for (Eigen::Index i = 0; i < f_values.rows(); ++i) {
      Eigen::RowVectorXd r = adjusted.weight(i) * f_values.row(i) -
                             adjusted.summary.row(i);
      total += cfg.lambda / adjusted.weight(i) * r.squaredNorm();
    }
  }
  return total;
}

// Exact coordinate minimizer of the criterion at frozen witnesses; valid for
// squared primal loss and squared deviation on a tabular predictor.
inline Matrix exact_tabular_update(GameCriterion criterion,
                                   const Matrix& f_values, const Dataset& ds,
                                   const NeighborhoodSystem& ns,
                                   const std::vector<WitnessFit>& fits,
                                   const Membership& membership,
                                   double lambda) {
  Matrix next(f_values.rows(), f_values.cols());
  if (criterion == GameCriterion::asymmetric) {
    for (Eigen::Index i = 0; i < f_values.rows(); ++i) {
      const int row = membership.self_row[static_cast<std::size_t>(i)];
      if (row < 0)
        throw std::invalid_argument(
            "asymmetric game: anchor must lie in its own neighborhood");
      next.row(i) =
          (ds.targets.row(i) +
           lambda *
               fits[static_cast<std::size_t>(i)].fitted_values.row(row)) /
          (1.0 + lambda);
    }
    return next;
  }
  // Symmetric and adjusted share the same stationary point:
  // f_t = (y_t + lambda * g_bar_t) / (1 + lambda * N_bar_t), with the sums
  // running over the neighborhoods that contain t.
  for (Eigen::Index t = 0; t < f_values.rows(); ++t) {
    double weight = 0.0;
    Eigen::RowVectorXd pull = Eigen::RowVectorXd::Zero(f_values.cols());
    for (const auto& [owner, row] :
         membership.incoming[static_cast<std::size_t>(t)]) {
      const double inv_size = 1.0 / static_cast<double>(ns.at(owner).size());
      weight += inv_size;
      pull += inv_size *
              fits[static_cast<std::size_t>(owner)].fitted_values.row(row);
    }
    next.row(t) =
        (ds.targets.row(t) + lambda * pull) / (1.0 + lambda * weight);
  }
  return next;
}

}  // namespace detail

// Alternating best-response training for the symmetric, asymmetric, or
// adjusted-symmetric criterion on a tabular predictor. Tabular values with
// squared losses take exact coordinate updates; anything else follows the
// gradient with cfg.learning_rate.
inline GameReport train_game_tabular(TabularPredictor& predictor,
                                     const Dataset& ds,
                                     const NeighborhoodSystem& ns,
                                     const GameConfig& cfg) {
  cfg.validate();
  if (cfg.criterion == GameCriterion::uniform)
    throw std::invalid_argument("train_game_tabular: use train_uniform");
  Matrix& f = predictor.values;
  if (f.rows() != ds.size() || f.cols() != ds.num_targets())
    throw std::invalid_argument("train: predictor shape mismatch");
  detail::Membership membership(ns);
  const bool exact = cfg.primal_loss == PrimalLoss::squared &&
                     cfg.deviation == DeviationKind::squared;
  GameReport report;
  std::vector<WitnessFit> fits;
  double initial_objective = 0.0;
  const auto start = std::chrono::steady_clock::now();
  for (int it = 0; it < cfg.outer_iterations; ++it) {
    if (it % cfg.witness_refresh_period == 0 || fits.empty())
      fits = refit_witnesses(ds.inputs, f, ns, cfg.witness);

    const Vector dev = anchor_deviations(f, ns, fits, cfg.deviation);
    double primal = 0.0;
    for (Eigen::Index i = 0; i < f.rows(); ++i)
      primal +=
          detail::primal_value(cfg.primal_loss, f.row(i), ds.targets.row(i));
    report.primal_loss_trace.push_back(primal);
    report.mean_deviation_trace.push_back(dev.mean());
    report.max_deviation_trace.push_back(dev.maxCoeff());
    report.multiplier_norm_trace.push_back(0.0);
    report.violation_trace.push_back(0);
    report.iterations = it + 1;

    const double objective = detail::criterion_objective(
        cfg.criterion, f, ds, ns, fits, membership, cfg);
    if (it == 0) initial_objective = std::abs(objective) + 1e-12;
    if (!std::isfinite(objective) ||
        objective > 10.0 * initial_objective + 1e-9) {
      report.diverged = true;
      break;
    }

    Matrix next;
    if (exact) {
      next = detail::exact_tabular_update(cfg.criterion, f, ds, ns, fits,
                                          membership, cfg.lambda);
    } else {
      Matrix grad = detail::penalty_gradient(cfg.criterion, f, ns, fits,
                                             membership, cfg.deviation,
                                             cfg.lambda);
      for (Eigen::Index i = 0; i < f.rows(); ++i)
        grad.row(i) +=
            detail::primal_grad(cfg.primal_loss, f.row(i), ds.targets.row(i));
      next = f - cfg.learning_rate / (1.0 + cfg.lr_decay * it) * grad;
    }
    const double change = (next - f).cwiseAbs().maxCoeff();
    f = std::move(next);
    if (change <= cfg.convergence_tol) {
      report.converged = true;
      break;
    }
  }
  report.update_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  report.final_witnesses = refit_witnesses(ds.inputs, f, ns, cfg.witness);
  report.final_values = f;
  if (!report.diverged && !report.converged)
    report.converged = !exact;  // gradient paths finish their budget
  return report;
}

inline GameReport train_symmetric(TabularPredictor& predictor,
                                  const Dataset& ds,
                                  const NeighborhoodSystem& ns,
                                  GameConfig cfg) {
  cfg.criterion = GameCriterion::symmetric;
  return train_game_tabular(predictor, ds, ns, cfg);
}

inline GameReport train_asymmetric(TabularPredictor& predictor,
                                   const Dataset& ds,
                                   const NeighborhoodSystem& ns,
                                   GameConfig cfg) {
  if (cfg.criterion != GameCriterion::adjusted_symmetric)
    cfg.criterion = GameCriterion::asymmetric;
  return train_game_tabular(predictor, ds, ns, cfg);
}

// Gradient-trained variant for differentiable predictors: the MLP maps the
// dataset inputs to predictor values; witness machinery is shared with the
// tabular path.
inline GameReport train_game_mlp(MlpPredictor& model, const Dataset& ds,
                                 const NeighborhoodSystem& ns,
                                 const GameConfig& cfg) {
  cfg.validate();
  if (cfg.criterion == GameCriterion::uniform)
    throw std::invalid_argument("train_game_mlp: uniform criterion is tabular");
  detail::Membership membership(ns);
  GameReport report;
  std::vector<WitnessFit> fits;
  double initial_objective = 0.0;
  for (int it = 0; it < cfg.outer_iterations; ++it) {
    MlpCache cache;
    Matrix f = mlp_forward(model, ds.inputs, &cache);
    if (it % cfg.witness_refresh_period == 0 || fits.empty())
      fits = refit_witnesses(ds.inputs, f, ns, cfg.witness);

    const Vector dev = anchor_deviations(f, ns, fits, cfg.deviation);
    double primal = 0.0;
    for (Eigen::Index i = 0; i < f.rows(); ++i)
      primal +=
          detail::primal_value(cfg.primal_loss, f.row(i), ds.targets.row(i));
    report.primal_loss_trace.push_back(primal);
    report.mean_deviation_trace.push_back(dev.mean());
    report.max_deviation_trace.push_back(dev.maxCoeff());
    report.multiplier_norm_trace.push_back(0.0);
    report.violation_trace.push_back(0);
    report.iterations = it + 1;

    const double objective = detail::criterion_objective(
        cfg.criterion, f, ds, ns, fits, membership, cfg);
    if (it == 0) initial_objective = std::abs(objective) + 1e-12;
    if (!std::isfinite(objective) ||
        objective > 10.0 * initial_objective + 1e-9) {
      report.diverged = true;
      break;
    }

    Matrix upstream = detail::penalty_gradient(
        cfg.criterion, f, ns, fits, membership, cfg.deviation, cfg.lambda);
    for (Eigen::Index i = 0; i < f.rows(); ++i)
      upstream.row(i) +=
          detail::primal_grad(cfg.primal_loss, f.row(i), ds.targets.row(i));
    // Per-anchor gradient scale keeps the step size dataset-size agnostic.
    upstream /= static_cast<double>(f.rows());
    auto grads = mlp_backward(model, cache, upstream);
    mlp_apply_gradients(model, grads,
                        cfg.learning_rate / (1.0 + cfg.lr_decay * it));
  }
  report.final_values = mlp_forward(model, ds.inputs);
  report.final_witnesses =
      refit_witnesses(ds.inputs, report.final_values, ns, cfg.witness);
  report.converged = !report.diverged;
  return report;
}

// Uniform criterion on a tabular predictor: extragradient (Euclidean
// mirror-prox) on the Lagrangian sum_i L + xi_i (dev_i - delta), multipliers
// projected to xi >= 0, witnesses refit every outer iteration. An infinite
// delta short-circuits to the unregularized fit. A delta of exactly zero
// with squared losses switches to penalty continuation: the saddle point
// then has no finite multiplier (the deviation gradient vanishes on the
// feasible set), so the multipliers alone cannot reach tight feasibility.
inline GameReport train_uniform(TabularPredictor& predictor, const Dataset& ds,
                                const NeighborhoodSystem& ns,
                                const GameConfig& cfg) {
  cfg.validate();
  Matrix& f = predictor.values;
  if (f.rows() != ds.size() || f.cols() != ds.num_targets())
    throw std::invalid_argument("train_uniform: predictor shape mismatch");
  detail::Membership membership(ns);
  GameReport report;

  auto record = [&](const std::vector<WitnessFit>& fits, const Vector& xi) {
    const Vector dev = anchor_deviations(f, ns, fits, cfg.deviation);
    double primal = 0.0;
    for (Eigen::Index i = 0; i < f.rows(); ++i)
      primal +=
          detail::primal_value(cfg.primal_loss, f.row(i), ds.targets.row(i));
    report.primal_loss_trace.push_back(primal);
    report.mean_deviation_trace.push_back(dev.mean());
    report.max_deviation_trace.push_back(dev.maxCoeff());
    report.multiplier_norm_trace.push_back(xi.norm());
    report.violation_trace.push_back(
        static_cast<int>((dev.array() > cfg.delta + cfg.violation_tol).count()));
    report.iterations = static_cast<int>(report.primal_loss_trace.size());
    return dev;
  };

  if (std::isinf(cfg.delta)) {
    // Constraints vacuous: the unregularized fit. Exact for squared loss.
    if (cfg.primal_loss == PrimalLoss::squared) {
      f = ds.targets;
    } else {
      for (int it = 0; it < cfg.outer_iterations; ++it) {
        Matrix grad(f.rows(), f.cols());
        for (Eigen::Index i = 0; i < f.rows(); ++i)
          grad.row(i) = detail::primal_grad(cfg.primal_loss, f.row(i),
                                            ds.targets.row(i));
        f -= cfg.learning_rate * grad;
      }
    }
    auto fits = refit_witnesses(ds.inputs, f, ns, cfg.witness);
    record(fits, Vector::Zero(ns.size()));
    report.final_witnesses = std::move(fits);
    report.final_values = f;
    report.multipliers = Vector::Zero(ns.size());
    report.converged = true;
    return report;
  }

  const bool projection_case = cfg.delta <= 1e-12 &&
                               cfg.primal_loss == PrimalLoss::squared &&
                               cfg.deviation == DeviationKind::squared;
  if (projection_case) {
    for (double rho = 1.0; rho <= 1.001e12; rho *= 10.0) {
      for (int inner = 0; inner < 400; ++inner) {
        auto fits = refit_witnesses(ds.inputs, f, ns, cfg.witness);
        Matrix next = detail::exact_tabular_update(
            GameCriterion::symmetric, f, ds, ns, fits, membership, rho);
        const double change = (next - f).cwiseAbs().maxCoeff();
        f = std::move(next);
        if (change <= 1e-14) break;
      }
    }
    auto fits = refit_witnesses(ds.inputs, f, ns, cfg.witness);
    const Vector dev = record(fits, Vector::Zero(ns.size()));
    report.final_witnesses = std::move(fits);
    report.final_values = f;
    report.multipliers = Vector::Zero(ns.size());
    report.converged = (dev.array() <= cfg.delta + cfg.violation_tol).all();
    return report;
  }

  Vector xi = Vector::Zero(ns.size());
  double f_step = cfg.f_step;
  double xi_step = cfg.multiplier_step;
  double initial_primal = 0.0;
  std::vector<WitnessFit> fits;

  auto lagrangian_grad_f = [&](const Matrix& values, const Vector& mult) {
    Matrix grad(values.rows(), values.cols());
    for (Eigen::Index i = 0; i < values.rows(); ++i)
      grad.row(i) = detail::primal_grad(cfg.primal_loss, values.row(i),
                                        ds.targets.row(i));
    for (Eigen::Index t = 0; t < values.rows(); ++t) {
      for (const auto& [owner, row] :
           membership.incoming[static_cast<std::size_t>(t)]) {
        const double inv_size = 1.0 / static_cast<double>(ns.at(owner).size());
        grad.row(t) +=
            mult(owner) * inv_size *
            detail::deviation_grad(
                cfg.deviation, values.row(t),
                fits[static_cast<std::size_t>(owner)].fitted_values.row(row));
      }
    }
    return grad;
  };

  for (int it = 0; it < cfg.outer_iterations; ++it) {
    fits = refit_witnesses(ds.inputs, f, ns, cfg.witness);
    const Vector dev = record(fits, xi);
    if (it == 0) initial_primal = report.primal_loss_trace.front() + 1.0;

    if (!std::isfinite(report.primal_loss_trace.back()) ||
        report.primal_loss_trace.back() > 10.0 * initial_primal) {
      // Divergence: decay both steps and restart; give up once the predictor
      // step has shrunk past any useful scale.
      f_step *= 0.1;
      xi_step *= 0.1;
      f = ds.targets;
      xi.setZero();
      if (f_step < 1e-10) {
        report.diverged = true;
        break;
      }
      continue;
    }

    // Half step from the current point.
    Matrix f_half = f - f_step * lagrangian_grad_f(f, xi);
    Vector xi_half =
        (xi + xi_step * (dev.array() - cfg.delta).matrix()).cwiseMax(0.0);
    // Full step from half-point gradients (witnesses stay frozen).
    const Vector dev_half = anchor_deviations(f_half, ns, fits, cfg.deviation);
    Matrix f_next = f - f_step * lagrangian_grad_f(f_half, xi_half);
    Vector xi_next =
        (xi + xi_step * (dev_half.array() - cfg.delta).matrix()).cwiseMax(0.0);

    const double change = std::max((f_next - f).cwiseAbs().maxCoeff(),
                                   (xi_next - xi).cwiseAbs().maxCoeff());
    f = std::move(f_next);
    xi = std::move(xi_next);
    if (change <= 1e-12) break;
  }

  fits = refit_witnesses(ds.inputs, f, ns, cfg.witness);
  const Vector dev = record(fits, xi);
  report.final_witnesses = std::move(fits);
  report.final_values = f;
  report.multipliers = xi;
  report.converged =
      (dev.array() <= cfg.delta + cfg.violation_tol).all() && !report.diverged;
  return report;
}

inline void write_trace_csv(const GameReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "iteration,primal_loss,mean_dev,max_dev,violations\n";
  char buf[128];
  for (std::size_t i = 0; i < report.primal_loss_trace.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.12g,%.12g,%.12g,%d\n", i,
                  report.primal_loss_trace[i], report.mean_deviation_trace[i],
                  report.max_deviation_trace[i], report.violation_trace[i]);
    out << buf;
  }
}

inline nlohmann::json report_to_json(const GameReport& report) {
  nlohmann::json j;
  j["iterations"] = report.iterations;
  j["converged"] = report.converged;
  j["diverged"] = report.diverged;
  j["primal_loss"] = report.primal_loss_trace;
  j["mean_deviation"] = report.mean_deviation_trace;
  j["max_deviation"] = report.max_deviation_trace;
  j["violations"] = report.violation_trace;
  j["multiplier_norm"] = report.multiplier_norm_trace;
  j["final_values"] = detail::to_flat(report.final_values);
  nlohmann::json fits = nlohmann::json::array();
  for (const auto& fit : report.final_witnesses)
    fits.push_back(witness_to_json(fit));
  j["witnesses"] = fits;
  return j;
}

}  // namespace witgame
