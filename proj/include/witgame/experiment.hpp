#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "witgame/dataset.hpp"
#include "witgame/equilibrium.hpp"
#include "witgame/games.hpp"
#include "witgame/metrics.hpp"
#include "witgame/sequence_game.hpp"
#include "witgame/svg.hpp"
#include "witgame/synth.hpp"

namespace witgame {

// Multichannel series CSV: header "t,ch0,...,ch{c-1}", strictly increasing
// timestamps, finite values. Errors carry the offending line number.
inline Matrix ingest_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("series csv: empty");
  auto header = detail::split_csv_line(line);
  if (header.size() < 2 || header[0] != "t")
    throw std::runtime_error("series csv: header must be t,ch0,...");
  const auto channels = static_cast<Eigen::Index>(header.size()) - 1;
  std::vector<std::vector<double>> rows;
  double last_t = -std::numeric_limits<double>::infinity();
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size())
      throw std::runtime_error("series csv: wrong field count at line " +
                               std::to_string(line_no));
    const double t = detail::parse_number(fields[0], line_no);
    if (!(t > last_t))
      throw std::runtime_error("series csv: non-monotone t at line " +
                               std::to_string(line_no));
    last_t = t;
    std::vector<double> row;
    for (std::size_t c = 1; c < fields.size(); ++c) {
      const double v = detail::parse_number(fields[c], line_no);
      if (!std::isfinite(v))
        throw std::runtime_error("series csv: non-finite value at line " +
                                 std::to_string(line_no));
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("series csv: no data rows");
  Matrix series(static_cast<Eigen::Index>(rows.size()), channels);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (Eigen::Index c = 0; c < channels; ++c)
      series(static_cast<Eigen::Index>(r), c) =
          rows[r][static_cast<std::size_t>(c)];
  return series;
}

inline void write_series_csv(const Matrix& series, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "t";
  for (Eigen::Index c = 0; c < series.cols(); ++c) out << ",ch" << c;
  out << "\n";
  char buf[40];
  for (Eigen::Index t = 0; t < series.rows(); ++t) {
    out << t;
    for (Eigen::Index c = 0; c < series.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", series(t, c));
      out << "," << buf;
    }
    out << "\n";
  }
}

struct MetricsRow {
  std::string task;
  std::optional<double> lambda_or_delta, epsilon, error, deviation, tv;
  std::optional<double> auc_f_y, auc_g_y, auc_B, auc_D;
  std::optional<int> iterations;
  std::optional<bool> converged;
};

inline void write_metrics_csv(const std::vector<MetricsRow>& rows,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "task,lambda_or_delta,epsilon,error,deviation,tv,auc_f_y,auc_g_y,"
         "auc_B,auc_D,iterations,converged\n";
  auto put = [&](const std::optional<double>& v) {
    out << ",";
    if (v) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.12g", *v);
      out << buf;
    }
  };
  for (const auto& r : rows) {
    out << r.task;
    put(r.lambda_or_delta);
    put(r.epsilon);
    put(r.error);
    put(r.deviation);
    put(r.tv);
    put(r.auc_f_y);
    put(r.auc_g_y);
    put(r.auc_B);
    put(r.auc_D);
    out << ",";
    if (r.iterations) out << *r.iterations;
    out << ",";
    if (r.converged) out << (*r.converged ? 1 : 0);
    out << "\n";
  }
}

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
}

inline WitnessFamily parse_family(const std::string& name) {
  if (name == "constant") return WitnessFamily::constant;
  if (name == "linear") return WitnessFamily::linear;
  if (name == "ridge") return WitnessFamily::ridge;
  if (name == "tree_mse") return WitnessFamily::tree_mse;
  if (name == "tree_tv") return WitnessFamily::tree_tv;
  if (name == "ar") return WitnessFamily::ar;
  if (name == "gaussian_tree") return WitnessFamily::gaussian_tree;
  throw std::invalid_argument("unknown witness family: " + name);
}

inline GameCriterion parse_criterion(const std::string& name) {
  if (name == "uniform") return GameCriterion::uniform;
  if (name == "symmetric") return GameCriterion::symmetric;
  if (name == "asymmetric") return GameCriterion::asymmetric;
  if (name == "adjusted_symmetric") return GameCriterion::adjusted_symmetric;
  throw std::invalid_argument("unknown criterion: " + name);
}

inline DeviationKind parse_deviation(const std::string& name) {
  if (name == "squared") return DeviationKind::squared;
  if (name == "total_variation") return DeviationKind::total_variation;
  if (name == "kl_diag_gaussian") return DeviationKind::kl_diag_gaussian;
  throw std::invalid_argument("unknown deviation: " + name);
}

inline GameConfig parse_game_config(const nlohmann::json& j,
                                    std::uint64_t seed) {
  GameConfig cfg;
  cfg.seed = seed;
  if (j.contains("criterion"))
    cfg.criterion = parse_criterion(j.at("criterion"));
  cfg.lambda = j.value("lambda", cfg.lambda);
  if (j.contains("delta")) {
    if (j.at("delta").is_string() && j.at("delta") == "inf")
      cfg.delta = std::numeric_limits<double>::infinity();
    else
      cfg.delta = j.at("delta").get<double>();
  }
  cfg.outer_iterations = j.value("outer_iterations", cfg.outer_iterations);
  cfg.witness_refresh_period =
      j.value("witness_refresh_period", cfg.witness_refresh_period);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.lr_decay = j.value("lr_decay", cfg.lr_decay);
  cfg.f_step = j.value("f_step", cfg.f_step);
  cfg.multiplier_step = j.value("multiplier_step", cfg.multiplier_step);
  if (j.contains("primal_loss"))
    cfg.primal_loss = j.at("primal_loss") == "cross_entropy"
                          ? PrimalLoss::cross_entropy
                          : PrimalLoss::squared;
  if (j.contains("deviation"))
    cfg.deviation = parse_deviation(j.at("deviation"));
  if (j.contains("witness")) {
    const auto& w = j.at("witness");
    if (w.contains("family")) cfg.witness.family = parse_family(w.at("family"));
    cfg.witness.alpha = w.value("alpha", cfg.witness.alpha);
    cfg.witness.max_depth = w.value("max_depth", cfg.witness.max_depth);
    cfg.witness.depth_from_size =
        w.value("depth_from_size", cfg.witness.depth_from_size);
    cfg.witness.depth_offset = w.value("depth_offset", cfg.witness.depth_offset);
    cfg.witness.ar_order = w.value("ar_order", cfg.witness.ar_order);
    cfg.witness.affine = w.value("affine", cfg.witness.affine);
  }
  cfg.validate();
  return cfg;
}

inline Matrix parse_matrix(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) throw std::invalid_argument("config: empty matrix");
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j.at(r).size()) != cols)
      throw std::invalid_argument("config: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

inline NeighborhoodSystem parse_neighborhoods(const nlohmann::json& j, int n,
                                              const Matrix& inputs) {
  const std::string kind = j.value("kind", "window");
  if (kind == "full") {
    std::vector<int> all(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
    return make_explicit_system(
        std::vector<std::vector<int>>(static_cast<std::size_t>(n), all));
  }
  if (kind == "window") return make_window_system(n, j.value("epsilon", 1));
  if (kind == "ball")
    return make_ball_system(inputs, j.value("radius", 1.0));
  if (kind == "explicit") {
    std::vector<std::vector<int>> lists;
    for (const auto& l : j.at("lists"))
      lists.push_back(l.get<std::vector<int>>());
    return make_explicit_system(std::move(lists));
  }
  throw std::invalid_argument("unknown neighborhood kind: " + kind);
}

inline Dataset load_dataset(const nlohmann::json& data, std::uint64_t seed) {
  if (data.contains("csv")) return read_dataset_csv(data.at("csv"));
  if (data.contains("inputs"))
    return Dataset(parse_matrix(data.at("inputs")),
                   parse_matrix(data.at("targets")));
  const std::string gen = data.value("generator", "");
  if (gen == "piecewise")
    return gen_piecewise_1d(data.value("n", 60), data.value("noise", 0.4),
                            seed);
  if (gen == "multilabel")
    return gen_multilabel_binary(data.value("n", 120), data.value("d", 10),
                                 data.value("q", 3),
                                 data.value("flip_prob", 0.1), seed);
  throw std::invalid_argument("config: no dataset source");
}

inline Matrix load_series(const nlohmann::json& data, std::uint64_t seed) {
  if (data.contains("csv")) return ingest_series_csv(data.at("csv"));
  const std::string gen = data.value("generator", "two_sine");
  if (gen == "two_sine")
    return gen_two_sine_series(data.value("length", 100),
                               data.value("channels", 1),
                               data.value("noise", 0.05), seed);
  if (gen == "ar") {
    std::vector<Matrix> theta;
    for (const auto& t : data.at("theta")) theta.push_back(parse_matrix(t));
    Vector theta0 = parse_matrix(data.at("theta0")).col(0);
    return gen_ar_series(theta, theta0, data.value("length", 100),
                         data.value("noise", 0.0), seed);
  }
  throw std::invalid_argument("config: no series source");
}

}  // namespace detail

// Witness fitting for a sequence predictor without any training step: the
// evaluation path for baselines and test-time reporting.
inline SequenceGameResult evaluate_sequence_witnesses(
    const SequencePredictor& model, const Matrix& series, int epsilon,
    int ar_order, double ar_alpha) {
  const auto layout = detail::sequence_layout(
      static_cast<int>(series.rows()), model.window, ar_order, epsilon);
  SequenceGameResult result;
  const Matrix inputs = detail::view_inputs(model, series, layout);
  result.view_means = mlp_forward(model.mean_head, inputs);
  result.witnesses = detail::refit_sequence_witnesses(
      series, result.view_means, layout, ar_order, ar_alpha);
  result.anchors = layout.anchors;
  result.first_view = layout.first_view;
  result.report.final_values = result.view_means;
  result.report.converged = true;
  return result;
}

namespace detail {

struct SequenceMetrics {
  double rollout_error = 0.0;
  double deviation = 0.0;
  double tv = 0.0;
};

inline SequenceMetrics sequence_metrics(const SequencePredictor& model,
                                        const SequenceGameResult& result,
                                        const Matrix& train_series,
                                        const Matrix& truth_continuation) {
  SequenceMetrics m;
  const int horizon = static_cast<int>(truth_continuation.rows());
  Matrix generated = ar_rollout(model, train_series, horizon);
  m.rollout_error = deviation_rmse(generated, truth_continuation);

  const int n_anchors = static_cast<int>(result.anchors.size());
  Matrix mu(n_anchors, train_series.cols());
  Matrix gw(n_anchors, train_series.cols());
  std::vector<Vector> params;
  params.reserve(static_cast<std::size_t>(n_anchors));
  for (int a = 0; a < n_anchors; ++a) {
    const int i = result.anchors[static_cast<std::size_t>(a)];
    mu.row(a) = result.view_means.row(i - result.first_view);
    const auto& fit = result.witnesses[static_cast<std::size_t>(a)];
    const auto& p = std::get<ArParams>(fit.params);
    gw.row(a) = ar_predict(p, train_series.topRows(i + 1)).transpose();
    params.push_back(flatten_witness_params(fit));
  }
  m.deviation = deviation_rmse(mu, gw);
  m.tv = witness_param_tv(params);
  return m;
}

// Windowed linear predictor whose weights realize a fitted AR(K) map: the
// family-member reference for sequence experiments.
inline SequencePredictor ar_family_predictor(const Matrix& train_series,
                                             int K, std::uint64_t seed) {
  const int c = static_cast<int>(train_series.cols());
  std::vector<Matrix> contexts;
  Matrix targets(std::max<Eigen::Index>(train_series.rows() - 1 - K, 1), c);
  Eigen::Index row = 0;
  for (int t = K - 1; t + 1 < train_series.rows() && row < targets.rows();
       ++t, ++row) {
    contexts.push_back(train_series.middleRows(t - K + 1, K));
    targets.row(row) = train_series.row(t + 1);
  }
  auto fit = fit_ar(contexts, targets, K, 1e-12);
  const auto& p = std::get<ArParams>(fit.params);
  SequencePredictor model =
      SequencePredictor::init(K, c, {}, Activation::tanh_act, seed);
  model.mean_head.weights[0].setZero();
  for (int k = 0; k < K; ++k)
    model.mean_head.weights[0].block(0, (K - 1 - k) * c, c, c) =
        p.theta_k[static_cast<std::size_t>(k)];
  model.mean_head.biases[0] = p.theta_0;
  return model;
}

inline int run_fixed_point(const nlohmann::json& config,
                           const std::filesystem::path& out) {
  const std::uint64_t seed = config.at("seed").get<std::uint64_t>();
  Dataset ds = load_dataset(config.at("data"), seed);
  FixedPointProblem p;
  p.inputs = ds.inputs;
  p.targets = ds.targets.col(0);
  p.ns = parse_neighborhoods(config.value("neighborhoods", nlohmann::json()),
                             static_cast<int>(ds.size()), ds.inputs);
  p.lambda = config.value("lambda", 1.0);
  p.delta = config.value("delta", 0.0);
  p.ridge_alpha = config.value("ridge_alpha", 1.0);
  const std::string family = config.value("family", "linear");
  p.family = family == "ridge" ? FpFamily::ridge
             : family == "constant" ? FpFamily::constant
                                    : FpFamily::linear;
  const std::string variant = config.value("variant", "symmetric");
  FixedPointResult result;
  if (variant == "symmetric")
    result = solve_fp_symmetric(p);
  else if (variant == "asymmetric")
    result = solve_fp_asymmetric(p);
  else if (variant == "constant_symmetric")
    result = solve_fp_constant(p, FpVariant::symmetric);
  else if (variant == "constant_asymmetric")
    result = solve_fp_constant(p, FpVariant::asymmetric);
  else if (variant == "uniform")
    result = solve_fp_uniform(p);
  else
    throw std::invalid_argument("unknown fixed-point variant: " + variant);

  nlohmann::json report = fixed_point_to_json(result);
  write_text((out / "report.json").string(), report.dump(2) + "\n");

  Matrix f = result.f;
  WitnessSpec spec;
  spec.family = p.family == FpFamily::constant ? WitnessFamily::constant
                : p.family == FpFamily::ridge  ? WitnessFamily::ridge
                                               : WitnessFamily::linear;
  spec.alpha = p.ridge_alpha;
  auto fits = refit_witnesses(ds.inputs, f, p.ns, spec);
  double mean_dev = 0.0;
  for (const auto& fit : fits) mean_dev += fit.deviation;
  mean_dev /= static_cast<double>(fits.size());

  MetricsRow row;
  row.task = "fixed_point";
  row.lambda_or_delta = variant == "uniform" ? p.delta : p.lambda;
  row.error = std::sqrt((f - p.targets).squaredNorm() /
                        static_cast<double>(f.size()));
  row.deviation = mean_dev;
  row.iterations = result.iterations;
  row.converged = result.converged;
  write_metrics_csv({row}, (out / "metrics.csv").string());
  write_text((out / "traces.csv").string(),
             "iteration,primal_loss,mean_dev,max_dev,violations\n");
  return result.converged ? 0 : 2;
}

inline int run_bounds(const nlohmann::json& config,
                      const std::filesystem::path& out) {
  const std::uint64_t seed = config.at("seed").get<std::uint64_t>();
  const int max_d = config.value("max_d", 3);
  const int max_k = config.value("max_k", 2);
  const int trials = config.value("trials", 200);
  std::vector<MetricsRow> rows;
  nlohmann::json checks = nlohmann::json::array();
  bool all_passed = true;
  std::string lines;
  for (int d = 1; d <= max_d; ++d) {
    auto r = verify_bound_linear(d, trials, seed + static_cast<std::uint64_t>(d));
    all_passed = all_passed && r.passed;
    checks.push_back({{"family", "linear"},
                      {"parameter", d},
                      {"below_fits_all", r.below_fits_all},
                      {"positive_at_bound", r.positive_at_bound},
                      {"max_deviation_below", r.max_deviation_below},
                      {"witnessed_deviation", r.witnessed_deviation},
                      {"passed", r.passed}});
    lines += "bound linear d=" + std::to_string(d) + " ... " +
             (r.passed ? "pass" : "FAIL") + "\n";
    MetricsRow row;
    row.task = "bounds_linear";
    row.lambda_or_delta = d;
    row.error = r.max_deviation_below;
    row.deviation = r.witnessed_deviation;
    row.converged = r.passed;
    rows.push_back(row);
  }
  for (int k = 1; k <= max_k; ++k) {
    auto r = verify_bound_tree(k, trials, seed + 100 + static_cast<std::uint64_t>(k));
    all_passed = all_passed && r.passed;
    checks.push_back({{"family", "tree"},
                      {"parameter", k},
                      {"below_fits_all", r.below_fits_all},
                      {"positive_at_bound", r.positive_at_bound},
                      {"max_deviation_below", r.max_deviation_below},
                      {"witnessed_deviation", r.witnessed_deviation},
                      {"passed", r.passed}});
    lines += "bound tree k=" + std::to_string(k) + " ... " +
             (r.passed ? "pass" : "FAIL") + "\n";
    MetricsRow row;
    row.task = "bounds_tree";
    row.lambda_or_delta = k;
    row.error = r.max_deviation_below;
    row.deviation = r.witnessed_deviation;
    row.converged = r.passed;
    rows.push_back(row);
  }
  std::fputs(lines.c_str(), stdout);
  nlohmann::json report;
  report["checks"] = checks;
  report["all_passed"] = all_passed;
  write_text((out / "report.json").string(), report.dump(2) + "\n");
  write_metrics_csv(rows, (out / "metrics.csv").string());
  write_text((out / "traces.csv").string(),
             "iteration,primal_loss,mean_dev,max_dev,violations\n");
  return all_passed ? 0 : 2;
}

inline int run_synth_1d(const nlohmann::json& config,
                        const std::filesystem::path& out) {
  const std::uint64_t seed = config.at("seed").get<std::uint64_t>();
  Dataset ds = load_dataset(config.at("data"), seed);
  const int epsilon = config.value("epsilon", 5);
  auto ns = make_window_system(static_cast<int>(ds.size()), epsilon);
  GameConfig cfg =
      parse_game_config(config.value("game", nlohmann::json::object()), seed);

  TabularPredictor predictor(ds.targets);
  GameReport report;
  if (cfg.criterion == GameCriterion::uniform)
    report = train_uniform(predictor, ds, ns, cfg);
  else if (cfg.criterion == GameCriterion::symmetric)
    report = train_symmetric(predictor, ds, ns, cfg);
  else
    report = train_asymmetric(predictor, ds, ns, cfg);

  auto scores = transparency_scores(predictor.values, ds.targets,
                                    report.final_witnesses, ns);
  MetricsRow row;
  row.task = "synth_1d";
  row.lambda_or_delta =
      cfg.criterion == GameCriterion::uniform ? cfg.delta : cfg.lambda;
  row.epsilon = epsilon;
  row.error = std::sqrt((predictor.values - ds.targets).squaredNorm() /
                        static_cast<double>(ds.size()));
  row.deviation = report.mean_deviation_trace.empty()
                      ? 0.0
                      : report.mean_deviation_trace.back();
  if (cfg.witness.family == WitnessFamily::constant ||
      cfg.witness.family == WitnessFamily::linear ||
      cfg.witness.family == WitnessFamily::ridge) {
    std::vector<Vector> params;
    for (const auto& fit : report.final_witnesses)
      params.push_back(flatten_witness_params(fit));
    row.tv = witness_param_tv(params);
  }
  row.auc_f_y = scores.auc_f_y;
  row.auc_g_y = scores.auc_g_y;
  row.auc_B = scores.auc_B;
  row.auc_D = scores.auc_D;
  row.iterations = report.iterations;
  row.converged = report.converged;
  write_metrics_csv({row}, (out / "metrics.csv").string());
  write_trace_csv(report, (out / "traces.csv").string());

  nlohmann::json jr = report_to_json(report);
  jr["scores"] = scores_to_json(scores);
  write_text((out / "report.json").string(), jr.dump(2) + "\n");

  // Overlay: data points, trained predictor curve, and the middle anchor's
  // witness evaluated across the input range.
  SvgPoints points{ds.inputs.col(0), ds.targets.col(0)};
  std::vector<SvgCurve> curves;
  curves.push_back({"predictor", ds.inputs.col(0), predictor.values.col(0)});
  const int mid = static_cast<int>(ds.size()) / 2;
  Matrix grid(60, 1);
  for (int g = 0; g < 60; ++g)
    grid(g, 0) = ds.inputs.col(0).minCoeff() +
                 (ds.inputs.col(0).maxCoeff() - ds.inputs.col(0).minCoeff()) *
                     g / 59.0;
  Matrix wvals = witness_predict(
      report.final_witnesses[static_cast<std::size_t>(mid)], grid);
  curves.push_back({"witness", grid.col(0), wvals.col(0)});
  write_text((out / "overlay.svg").string(),
             emit_svg_curves(curves, &points));
  return report.converged && !report.diverged ? 0 : 2;
}

inline int run_synth_multilabel(const nlohmann::json& config,
                                const std::filesystem::path& out) {
  const std::uint64_t seed = config.at("seed").get<std::uint64_t>();
  Dataset ds = load_dataset(config.at("data"), seed);
  const int epsilon = config.value("epsilon", 10);
  auto ns = make_window_system(static_cast<int>(ds.size()), epsilon);
  GameConfig cfg =
      parse_game_config(config.value("game", nlohmann::json::object()), seed);
  cfg.primal_loss = PrimalLoss::cross_entropy;
  cfg.deviation = DeviationKind::total_variation;
  cfg.witness.family = WitnessFamily::tree_tv;
  cfg.witness.depth_from_size = true;
  cfg.witness.depth_offset = config.value("delta_depth", 0);

  TabularPredictor predictor(
      Matrix::Constant(ds.size(), ds.num_targets(), 0.5));
  GameReport report = train_symmetric(predictor, ds, ns, cfg);
  auto scores = transparency_scores(predictor.values, ds.targets,
                                    report.final_witnesses, ns);
  MetricsRow row;
  row.task = "synth_multilabel";
  row.lambda_or_delta = cfg.lambda;
  row.epsilon = epsilon;
  row.error = report.primal_loss_trace.back() / static_cast<double>(ds.size());
  row.deviation = report.mean_deviation_trace.back();
  row.auc_f_y = scores.auc_f_y;
  row.auc_g_y = scores.auc_g_y;
  row.auc_B = scores.auc_B;
  row.auc_D = scores.auc_D;
  row.iterations = report.iterations;
  row.converged = report.converged;
  write_metrics_csv({row}, (out / "metrics.csv").string());
  write_trace_csv(report, (out / "traces.csv").string());

  nlohmann::json jr = report_to_json(report);
  jr["scores"] = scores_to_json(scores);
  jr["delta_depth"] = cfg.witness.depth_offset;
  write_text((out / "report.json").string(), jr.dump(2) + "\n");

  Vector devs(ns.size());
  for (int i = 0; i < ns.size(); ++i)
    devs(i) = report.final_witnesses[static_cast<std::size_t>(i)].deviation;
  write_text((out / "tv_cdf.svg").string(), emit_svg_cdf(devs));
  return report.converged && !report.diverged ? 0 : 2;
}

inline int run_sequence(const nlohmann::json& config,
                        const std::filesystem::path& out) {
  const std::uint64_t seed = config.at("seed").get<std::uint64_t>();
  const int train_points = config.value("train_points", 80);
  const int horizon = config.value("horizon", 20);
  Matrix full = load_series(config.at("data"), seed);
  if (full.rows() < train_points + horizon)
    throw std::invalid_argument("sequence: series shorter than train+horizon");
  const Matrix train_series = full.topRows(train_points);
  const Matrix truth = full.middleRows(train_points, horizon);
  const int window = config.value("window", 8);
  const std::vector<int> hidden =
      config.value("hidden", std::vector<int>{16});

  SequenceGameConfig gc;
  const auto game = config.value("game", nlohmann::json::object());
  if (game.contains("criterion"))
    gc.criterion = parse_criterion(game.at("criterion"));
  gc.outer_iterations = game.value("outer_iterations", 200);
  gc.learning_rate = game.value("learning_rate", 0.02);
  gc.witness_refresh_period = game.value("witness_refresh_period", 1);
  gc.ar_order = config.value("ar_order", 2);
  gc.ar_alpha = config.value("ar_alpha", 1.0);

  std::vector<double> lambdas =
      config.value("lambda_grid", std::vector<double>{});
  if (lambdas.empty()) lambdas = {config.value("lambda", 1.0)};
  std::vector<int> epsilons = config.value("epsilon_grid", std::vector<int>{});
  if (epsilons.empty()) epsilons = {config.value("epsilon", 9)};

  std::vector<MetricsRow> rows;
  nlohmann::json runs = nlohmann::json::array();
  bool all_ok = true;
  GameReport last_report;
  SequenceGameResult last_result;
  SequencePredictor last_model =
      SequencePredictor::init(window, static_cast<int>(full.cols()), hidden,
                              Activation::tanh_act, seed);
  int run_index = 0;
  for (int eps : epsilons) {
    for (double lambda : lambdas) {
      SequencePredictor model =
          SequencePredictor::init(window, static_cast<int>(full.cols()),
                                  hidden, Activation::tanh_act, seed);
      SequenceGameConfig run_cfg = gc;
      run_cfg.lambda = lambda;
      run_cfg.epsilon = eps;
      auto result = train_sequence_game(model, train_series, run_cfg);
      auto metrics =
          sequence_metrics(model, result, train_series, truth);
      MetricsRow row;
      row.task = "sequence";
      row.lambda_or_delta = lambda;
      row.epsilon = eps;
      row.error = metrics.rollout_error;
      row.deviation = metrics.deviation;
      row.tv = metrics.tv;
      row.iterations = result.report.iterations;
      row.converged = result.report.converged;
      rows.push_back(row);
      all_ok = all_ok && result.report.converged && !result.report.diverged;
      write_trace_csv(result.report,
                      (out / ("traces_" + std::to_string(run_index) + ".csv"))
                          .string());
      runs.push_back({{"lambda", lambda},
                      {"epsilon", eps},
                      {"error", metrics.rollout_error},
                      {"deviation", metrics.deviation},
                      {"tv", metrics.tv},
                      {"iterations", result.report.iterations},
                      {"converged", result.report.converged}});
      last_report = result.report;
      last_result = std::move(result);
      last_model = std::move(model);
      ++run_index;
    }
  }

  if (config.value("ar_baseline", false)) {
    auto baseline = ar_family_predictor(train_series, gc.ar_order, seed);
    auto eval = evaluate_sequence_witnesses(baseline, train_series,
                                            epsilons.front(), gc.ar_order,
                                            1e-12);
    auto metrics = sequence_metrics(baseline, eval, train_series, truth);
    MetricsRow row;
    row.task = "sequence_ar_baseline";
    row.epsilon = epsilons.front();
    row.error = metrics.rollout_error;
    row.deviation = metrics.deviation;
    row.tv = metrics.tv;
    row.converged = true;
    rows.push_back(row);
    runs.push_back({{"baseline", "ar"},
                    {"error", metrics.rollout_error},
                    {"deviation", metrics.deviation},
                    {"tv", metrics.tv}});
  }

  write_metrics_csv(rows, (out / "metrics.csv").string());
  write_trace_csv(last_report, (out / "traces.csv").string());
  nlohmann::json jr;
  jr["runs"] = runs;
  write_text((out / "report.json").string(), jr.dump(2) + "\n");

  // Witness-parameter heat map of the last run: rows are parameter indices,
  // columns anchor positions.
  const auto& fits = last_result.witnesses;
  if (!fits.empty()) {
    Vector first = flatten_witness_params(fits[0]);
    Matrix heat(first.size(), static_cast<Eigen::Index>(fits.size()));
    for (std::size_t a = 0; a < fits.size(); ++a)
      heat.col(static_cast<Eigen::Index>(a)) =
          flatten_witness_params(fits[a]);
    write_text((out / "heatmap.svg").string(), emit_svg_heatmap(heat));
  }
  Matrix generated = ar_rollout(last_model, train_series, horizon);
  Vector t_axis(horizon);
  for (int h = 0; h < horizon; ++h) t_axis(h) = train_points + h;
  write_text((out / "rollout.svg").string(),
             emit_svg_curves({{"truth", t_axis, truth.col(0)},
                              {"generated", t_axis, generated.col(0)}}));
  return all_ok ? 0 : 2;
}

inline int run_synth_generate(const nlohmann::json& config,
                              const std::filesystem::path& out) {
  const std::uint64_t seed = config.at("seed").get<std::uint64_t>();
  const auto& data = config.at("data");
  const std::string gen = data.value("generator", "");
  if (gen == "two_sine" || gen == "ar") {
    write_series_csv(load_series(data, seed), (out / "series.csv").string());
  } else {
    write_dataset_csv(load_dataset(data, seed), (out / "dataset.csv").string());
  }
  return 0;
}

inline int run_metrics_task(const nlohmann::json& config,
                            const std::filesystem::path& out) {
  Vector refs, preds;
  if (config.contains("csv")) {
    Dataset ds = read_dataset_csv(config.at("csv"));
    if (ds.num_targets() < 2)
      throw std::invalid_argument("metrics: csv needs y0 (refs) and y1 (preds)");
    refs = ds.targets.col(0);
    preds = ds.targets.col(1);
  } else {
    auto rv = config.at("refs").get<std::vector<double>>();
    auto pv = config.at("preds").get<std::vector<double>>();
    refs = Eigen::Map<const Vector>(rv.data(), static_cast<Eigen::Index>(rv.size()));
    preds = Eigen::Map<const Vector>(pv.data(), static_cast<Eigen::Index>(pv.size()));
  }
  const double auc = generalized_auc(refs, preds);
  const double fast = generalized_auc_fast(refs, preds);
  const double rmse = deviation_rmse(refs, preds);
  nlohmann::json scores{{"generalized_auc", auc},
                        {"generalized_auc_fast", fast},
                        {"rmse", rmse}};
  write_text((out / "scores.json").string(), scores.dump(2) + "\n");
  MetricsRow row;
  row.task = "metrics";
  row.error = rmse;
  row.auc_f_y = auc;
  write_metrics_csv({row}, (out / "metrics.csv").string());
  return 0;
}

inline int run_plot(const nlohmann::json& config,
                    const std::filesystem::path& out) {
  const std::string kind_name = config.at("kind");
  SvgKind kind;
  if (kind_name == "param_heatmap")
    kind = SvgKind::param_heatmap;
  else if (kind_name == "curve_overlay")
    kind = SvgKind::curve_overlay;
  else if (kind_name == "cdf")
    kind = SvgKind::cdf;
  else
    throw std::invalid_argument("unknown plot kind: " + kind_name);

  std::ifstream in(config.at("csv").get<std::string>());
  if (!in) throw std::runtime_error("cannot open plot csv");
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    std::vector<double> row;
    for (const auto& f : fields) row.push_back(parse_number(f, line_no));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("plot: empty csv");
  Matrix data(static_cast<Eigen::Index>(rows.size()),
              static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rows[r][c];
  write_text((out / "plot.svg").string(), emit_svg(kind, data));
  return 0;
}

}  // namespace detail

// Runs one experiment config and writes its artifacts under out_dir.
// Returns 0 on success and 2 when any run failed to converge; malformed
// configs throw (the CLI maps that to exit code 1). A seed is mandatory.
inline int run_experiment(const nlohmann::json& config,
                          const std::string& out_dir) {
  if (!config.contains("task"))
    throw std::invalid_argument("config: missing task");
  if (!config.contains("seed"))
    throw std::invalid_argument("config: missing seed (runs must be reproducible)");
  const std::string task = config.at("task");
  std::filesystem::path out(out_dir);
  std::filesystem::create_directories(out);
  if (task == "fixed_point") return detail::run_fixed_point(config, out);
  if (task == "bounds") return detail::run_bounds(config, out);
  if (task == "synth_1d") return detail::run_synth_1d(config, out);
  if (task == "synth_multilabel")
    return detail::run_synth_multilabel(config, out);
  if (task == "sequence") return detail::run_sequence(config, out);
  if (task == "synth") return detail::run_synth_generate(config, out);
  if (task == "metrics") return detail::run_metrics_task(config, out);
  if (task == "plot") return detail::run_plot(config, out);
  throw std::invalid_argument("unknown task: " + task);
}

inline int run_experiment_file(const std::string& config_path,
                               const std::string& out_dir,
                               std::optional<std::uint64_t> seed_override = {}) {
  std::ifstream in(config_path);
  if (!in) throw std::runtime_error("cannot open config: " + config_path);
  nlohmann::json config = nlohmann::json::parse(in);
  if (seed_override) config["seed"] = *seed_override;
  return run_experiment(config, out_dir);
}

}  // namespace witgame
