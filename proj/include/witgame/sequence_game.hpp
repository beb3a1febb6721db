#pragma once

#include <chrono>
#include <vector>

#include "witgame/games.hpp"
#include "witgame/predictors.hpp"

namespace witgame {

// Sequence-game setup: anchors are time indices; the neighborhood of anchor
// i holds the prefixes ending at {i-eps, ..., i+eps}. Each prefix view t
// contributes the predictor mean of its trailing window as the witness
// regression target, and the raw series points x_t, ..., x_{t-K+1} as the
// regressors.
struct SequenceGameConfig {
  GameCriterion criterion = GameCriterion::asymmetric;
  double lambda = 1.0;
  int epsilon = 9;
  int ar_order = 2;
  double ar_alpha = 1.0;
  int outer_iterations = 200;
  int witness_refresh_period = 1;
  double learning_rate = 0.02;

  void validate() const {
    if (lambda < 0) throw std::invalid_argument("sequence game: lambda >= 0");
    if (epsilon < 0) throw std::invalid_argument("sequence game: epsilon >= 0");
    if (ar_order < 1) throw std::invalid_argument("sequence game: K >= 1");
    if (outer_iterations < 1)
      throw std::invalid_argument("sequence game: iterations >= 1");
    if (criterion == GameCriterion::uniform)
      throw std::invalid_argument(
          "sequence game: the uniform criterion is not supported here");
  }
};

struct SequenceGameResult {
  GameReport report;
  std::vector<int> anchors;            // anchor time indices
  std::vector<WitnessFit> witnesses;   // final fit per anchor
  int first_view = 0;
  Matrix view_means;                   // final predictor means, one row per view
};

namespace detail {

struct SequenceLayout {
  std::vector<int> anchors;
  int first_view = 0;  // earliest prefix index with a full window and K lags
  int last_view = 0;
  std::vector<std::vector<int>> views_per_anchor;
};

inline SequenceLayout sequence_layout(int series_length, int window, int K,
                                      int eps) {
  SequenceLayout layout;
  const int min_view = std::max(window, K) - 1;
  layout.first_view = min_view;
  layout.last_view = series_length - 1;
  const int first_anchor = min_view + eps;
  const int last_anchor = series_length - 2;  // needs the next-step target
  if (first_anchor > last_anchor)
    throw std::invalid_argument("sequence game: series too short");
  for (int i = first_anchor; i <= last_anchor; ++i) {
    layout.anchors.push_back(i);
    std::vector<int> views;
    for (int t = i - eps; t <= std::min(i + eps, layout.last_view); ++t)
      views.push_back(t);
    layout.views_per_anchor.push_back(std::move(views));
  }
  return layout;
}

inline Matrix view_inputs(const SequencePredictor& model, const Matrix& series,
                          const SequenceLayout& layout) {
  const int n_views = layout.last_view - layout.first_view + 1;
  Matrix inputs(n_views, model.window * model.channels);
  for (int t = layout.first_view; t <= layout.last_view; ++t)
    inputs.row(t - layout.first_view) = sequence_input_row(model, series, t);
  return inputs;
}

inline std::vector<WitnessFit> refit_sequence_witnesses(
    const Matrix& series, const Matrix& means, const SequenceLayout& layout,
    int K, double alpha) {
  std::vector<WitnessFit> fits;
  fits.reserve(layout.anchors.size());
  for (std::size_t a = 0; a < layout.anchors.size(); ++a) {
    const auto& views = layout.views_per_anchor[a];
    std::vector<Matrix> contexts;
    contexts.reserve(views.size());
    Matrix mu(static_cast<Eigen::Index>(views.size()), series.cols());
    for (std::size_t v = 0; v < views.size(); ++v) {
      const int t = views[v];
      contexts.push_back(series.middleRows(t - K + 1, K));
      mu.row(static_cast<Eigen::Index>(v)) =
          means.row(t - layout.first_view);
    }
    fits.push_back(fit_ar(contexts, mu, K, alpha));
  }
  return fits;
}

}  // namespace detail

// Alternating training of a windowed sequence predictor against per-anchor
// AR(K) witnesses. The primal loss is the squared next-step prediction error
// at each anchor.
inline SequenceGameResult train_sequence_game(SequencePredictor& model,
                                              const Matrix& series,
                                              const SequenceGameConfig& cfg) {
  cfg.validate();
  const auto layout = detail::sequence_layout(
      static_cast<int>(series.rows()), model.window, cfg.ar_order, cfg.epsilon);
  const Matrix inputs = detail::view_inputs(model, series, layout);
  const int n_anchors = static_cast<int>(layout.anchors.size());

  SequenceGameResult result;
  GameReport& report = result.report;
  std::vector<WitnessFit> fits;
  double initial_objective = 0.0;
  const auto start = std::chrono::steady_clock::now();

  for (int it = 0; it < cfg.outer_iterations; ++it) {
    MlpCache cache;
    Matrix means = mlp_forward(model.mean_head, inputs, &cache);
    if (it % cfg.witness_refresh_period == 0 || fits.empty())
      fits = detail::refit_sequence_witnesses(series, means, layout,
                                              cfg.ar_order, cfg.ar_alpha);

    // Traces: primal next-step loss and anchor deviations.
    double primal = 0.0;
    Vector dev(n_anchors);
    for (int a = 0; a < n_anchors; ++a) {
      const int i = layout.anchors[static_cast<std::size_t>(a)];
      const Eigen::Index view_row = i - layout.first_view;
      primal += (means.row(view_row) - series.row(i + 1)).squaredNorm();
      const auto& views = layout.views_per_anchor[static_cast<std::size_t>(a)];
      const Eigen::Index anchor_pos =
          std::find(views.begin(), views.end(), i) - views.begin();
      dev(a) = (means.row(view_row) -
                fits[static_cast<std::size_t>(a)].fitted_values.row(anchor_pos))
                   .squaredNorm();
    }
    report.primal_loss_trace.push_back(primal);
    report.mean_deviation_trace.push_back(dev.mean());
    report.max_deviation_trace.push_back(dev.maxCoeff());
    report.multiplier_norm_trace.push_back(0.0);
    report.violation_trace.push_back(0);
    report.iterations = it + 1;

    const double objective = primal + cfg.lambda * dev.sum();
    if (it == 0) initial_objective = std::abs(objective) + 1e-12;
    if (!std::isfinite(objective) ||
        objective > 10.0 * initial_objective + 1e-9) {
      report.diverged = true;
      break;
    }

    // Gradient with respect to every view mean.
    Matrix upstream = Matrix::Zero(means.rows(), means.cols());
    for (int a = 0; a < n_anchors; ++a) {
      const int i = layout.anchors[static_cast<std::size_t>(a)];
      const Eigen::Index view_row = i - layout.first_view;
      upstream.row(view_row) +=
          2.0 * (means.row(view_row) - series.row(i + 1));
      if (cfg.lambda == 0.0) continue;
      const auto& views = layout.views_per_anchor[static_cast<std::size_t>(a)];
      const auto& fitted = fits[static_cast<std::size_t>(a)].fitted_values;
      if (cfg.criterion == GameCriterion::symmetric) {
        const double scale =
            cfg.lambda / static_cast<double>(views.size());
        for (std::size_t v = 0; v < views.size(); ++v) {
          const Eigen::Index row = views[v] - layout.first_view;
          upstream.row(row) +=
              scale * 2.0 *
              (means.row(row) - fitted.row(static_cast<Eigen::Index>(v)));
        }
      } else if (cfg.criterion == GameCriterion::asymmetric) {
        const Eigen::Index anchor_pos =
            std::find(views.begin(), views.end(), i) - views.begin();
        upstream.row(view_row) +=
            cfg.lambda * 2.0 * (means.row(view_row) - fitted.row(anchor_pos));
      }
    }
    if (cfg.criterion == GameCriterion::adjusted_symmetric &&
        cfg.lambda > 0.0) {
      // Lemma-3 style summary feedback: for each anchor i, collect the
      // witnesses of the anchors whose neighborhoods contain view i.
      for (int a = 0; a < n_anchors; ++a) {
        const int i = layout.anchors[static_cast<std::size_t>(a)];
        const Eigen::Index view_row = i - layout.first_view;
        double weight = 0.0;
        Eigen::RowVectorXd summary =
            Eigen::RowVectorXd::Zero(series.cols());
        for (int b = 0; b < n_anchors; ++b) {
          const auto& views =
              layout.views_per_anchor[static_cast<std::size_t>(b)];
          auto pos = std::find(views.begin(), views.end(), i);
          if (pos == views.end()) continue;
          const double inv = 1.0 / static_cast<double>(views.size());
          weight += inv;
          summary +=
              inv * fits[static_cast<std::size_t>(b)].fitted_values.row(
                        pos - views.begin());
        }
        upstream.row(view_row) +=
            2.0 * cfg.lambda * (weight * means.row(view_row) - summary);
      }
    }

    // Per-anchor gradient scale so the step size is insensitive to the
    // number of anchors.
    upstream /= static_cast<double>(n_anchors);
    auto grads = mlp_backward(model.mean_head, cache, upstream);
    mlp_apply_gradients(model.mean_head, grads, cfg.learning_rate);
  }
  report.update_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();

  result.view_means = mlp_forward(model.mean_head, inputs);
  result.witnesses = detail::refit_sequence_witnesses(
      series, result.view_means, layout, cfg.ar_order, cfg.ar_alpha);
  result.anchors = layout.anchors;
  result.first_view = layout.first_view;
  report.final_values = result.view_means;
  report.final_witnesses = result.witnesses;
  report.converged = !report.diverged;
  return result;
}

}  // namespace witgame
