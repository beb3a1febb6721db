#pragma once

#include <optional>
#include <vector>

#include <json.hpp>

#include "witgame/types.hpp"
#include "witgame/witness.hpp"

namespace witgame {

// Unconstrained predictor: one free value vector per training anchor.
struct TabularPredictor {
  Matrix values;  // N x Q

  explicit TabularPredictor(Matrix v) : values(std::move(v)) {
    if (!all_finite(values))
      throw std::invalid_argument("tabular predictor: non-finite values");
  }
};

enum class Activation { tanh_act, relu };

// Output head: identity keeps the linear output layer; sigmoid squashes it
// for probability-valued predictors (multi-label tasks).
enum class OutputTransform { identity, sigmoid };

// Fully connected net: affine + activation on hidden layers, linear output.
struct MlpPredictor {
  std::vector<int> layer_sizes;  // input, hidden..., output
  Activation activation = Activation::tanh_act;
  OutputTransform output = OutputTransform::identity;
  std::vector<Matrix> weights;  // weights[l]: out_l x in_l
  std::vector<Vector> biases;

  static MlpPredictor init(std::vector<int> sizes, Activation act,
                           std::uint64_t seed) {
    if (sizes.size() < 2)
      throw std::invalid_argument("mlp: need input and output sizes");
    for (int s : sizes)
      if (s < 1) throw std::invalid_argument("mlp: layer sizes must be >= 1");
    MlpPredictor m;
    m.layer_sizes = std::move(sizes);
    m.activation = act;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
      const int in = m.layer_sizes[l];
      const int out = m.layer_sizes[l + 1];
      const double scale = 1.0 / std::sqrt(static_cast<double>(in));
      Matrix w(out, in);
      for (int i = 0; i < out; ++i)
        for (int j = 0; j < in; ++j) w(i, j) = rng.uniform(-0.5, 0.5) * scale;
      m.weights.push_back(std::move(w));
      m.biases.push_back(Vector::Zero(out));
    }
    return m;
  }

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return weights.size(); }
};

namespace detail {

inline double activate(Activation a, double x) {
  return a == Activation::tanh_act ? std::tanh(x) : (x > 0 ? x : 0.0);
}

inline double activate_grad(Activation a, double pre) {
  if (a == Activation::tanh_act) {
    const double t = std::tanh(pre);
    return 1.0 - t * t;
  }
  return pre > 0 ? 1.0 : 0.0;
}

}  // namespace detail

// Cached forward pass; `pre[l]` holds the pre-activation of layer l and
// `post[l]` its input (post[0] is the batch input).
struct MlpCache {
  std::vector<Matrix> pre;
  std::vector<Matrix> post;
};

inline Matrix mlp_forward(const MlpPredictor& model, const Matrix& inputs,
                          MlpCache* cache = nullptr) {
  if (inputs.cols() != model.input_size())
    throw std::invalid_argument("mlp_forward: input width mismatch");
  if (cache) {
    cache->pre.clear();
    cache->post.clear();
    cache->post.push_back(inputs);
  }
  Matrix h = inputs;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    Matrix z = h * model.weights[l].transpose();
    z.rowwise() += model.biases[l].transpose();
    if (cache) cache->pre.push_back(z);
    if (l + 1 < model.num_layers()) {
      h = z.unaryExpr([&](double v) {
        return detail::activate(model.activation, v);
      });
      if (cache) cache->post.push_back(h);
    } else {
      h = std::move(z);
    }
  }
  if (model.output == OutputTransform::sigmoid)
    h = h.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  return h;
}

struct MlpGradients {
  std::vector<Matrix> d_weights;
  std::vector<Vector> d_biases;
  Matrix d_inputs;
};

// Exact reverse-mode gradients given d(objective)/d(outputs).
inline MlpGradients mlp_backward(const MlpPredictor& model,
                                 const MlpCache& cache,
                                 const Matrix& upstream) {
  if (cache.pre.size() != model.num_layers())
    throw std::invalid_argument("mlp_backward: stale cache");
  MlpGradients g;
  g.d_weights.resize(model.num_layers());
  g.d_biases.resize(model.num_layers());
  Matrix delta = upstream;  // gradient w.r.t. pre-activation of output layer
  if (model.output == OutputTransform::sigmoid) {
    delta = delta.cwiseProduct(cache.pre.back().unaryExpr([](double v) {
      const double p = 1.0 / (1.0 + std::exp(-v));
      return p * (1.0 - p);
    }));
  }
  for (std::size_t l = model.num_layers(); l-- > 0;) {
    g.d_weights[l] = delta.transpose() * cache.post[l];
    g.d_biases[l] = delta.colwise().sum().transpose();
    Matrix back = delta * model.weights[l];
    if (l > 0) {
      back = back.cwiseProduct(cache.pre[l - 1].unaryExpr([&](double v) {
        return detail::activate_grad(model.activation, v);
      }));
    }
    delta = std::move(back);
  }
  g.d_inputs = std::move(delta);
  return g;
}

inline void mlp_apply_gradients(MlpPredictor& model, const MlpGradients& g,
                                double learning_rate) {
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    model.weights[l] -= learning_rate * g.d_weights[l];
    model.biases[l] -= learning_rate * g.d_biases[l];
  }
}

// Linear interpolation between bracketing knots; linear extrapolation past
// the first and last segments.
inline double piecewise_linear_eval(const std::vector<double>& knots,
                                    const std::vector<double>& values,
                                    double x) {
  if (knots.size() < 2 || knots.size() != values.size())
    throw std::invalid_argument("piecewise_linear_eval: need >= 2 knots");
  for (std::size_t i = 0; i + 1 < knots.size(); ++i)
    if (!(knots[i] < knots[i + 1]))
      throw std::invalid_argument(
          "piecewise_linear_eval: knots must be strictly increasing");
  std::size_t hi = 1;
  while (hi + 1 < knots.size() && x > knots[hi]) ++hi;
  const std::size_t lo = hi - 1;
  const double t = (x - knots[lo]) / (knots[hi] - knots[lo]);
  return values[lo] + t * (values[hi] - values[lo]);
}

// Windowed sequence model: the mean head maps the flattened trailing window
// (W*c values, most recent row last) to the next-step mean. The optional
// variance head shares the input and is made positive with softplus; only
// the mean feeds witnesses.
struct SequencePredictor {
  int window = 1;
  int channels = 1;
  MlpPredictor mean_head;
  std::optional<MlpPredictor> variance_head;

  static SequencePredictor init(int window, int channels,
                                const std::vector<int>& hidden,
                                Activation act, std::uint64_t seed,
                                bool with_variance = false) {
    if (window < 1) throw std::invalid_argument("sequence: window >= 1");
    if (channels < 1) throw std::invalid_argument("sequence: channels >= 1");
    std::vector<int> sizes;
    sizes.push_back(window * channels);
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(channels);
    SequencePredictor s;
    s.window = window;
    s.channels = channels;
    s.mean_head = MlpPredictor::init(sizes, act, seed);
    if (with_variance)
      s.variance_head = MlpPredictor::init(sizes, act, seed + 1);
    return s;
  }
};

// Flattened input row for the prefix of `series` ending at (0-based) index t.
inline Eigen::RowVectorXd sequence_input_row(const SequencePredictor& model,
                                             const Matrix& series, int t) {
  const int w = model.window, c = model.channels;
  if (t + 1 < w || t >= series.rows())
    throw std::out_of_range("sequence_input_row: index out of range");
  Eigen::RowVectorXd row(w * c);
  for (int k = 0; k < w; ++k)
    row.segment(k * c, c) = series.row(t + 1 - w + k);
  return row;
}

inline Vector sequence_mean(const SequencePredictor& model,
                            const Matrix& series, int t) {
  return mlp_forward(model.mean_head, sequence_input_row(model, series, t))
      .row(0)
      .transpose();
}

inline Vector sequence_variance(const SequencePredictor& model,
                                const Matrix& series, int t) {
  if (!model.variance_head)
    throw std::logic_error("sequence_variance: no variance head");
  Vector raw =
      mlp_forward(*model.variance_head, sequence_input_row(model, series, t))
          .row(0)
          .transpose();
  return raw.unaryExpr([](double v) {
    // softplus, numerically stable for large |v|
    return (v > 30 ? v : std::log1p(std::exp(v))) + 1e-8;
  });
}

// Greedy autoregressive generation: feed mean predictions back as inputs for
// `horizon` steps. Returns the generated horizon x c block.
inline Matrix ar_rollout(const SequencePredictor& model, const Matrix& seed,
                         int horizon) {
  if (seed.rows() < model.window)
    throw std::invalid_argument("ar_rollout: seed shorter than the window");
  if (seed.cols() != model.channels)
    throw std::invalid_argument("ar_rollout: channel mismatch");
  Matrix extended(seed.rows() + horizon, seed.cols());
  extended.topRows(seed.rows()) = seed;
  for (int h = 0; h < horizon; ++h) {
    const int t = static_cast<int>(seed.rows()) + h - 1;
    extended.row(t + 1) = sequence_mean(model, extended, t).transpose();
  }
  return extended.bottomRows(horizon);
}

// Prefix views for the neighborhood of sequence anchor i: prefix end indices
// {i-eps, ..., i+eps} clipped to the end of the series. All indices are
// 0-based; i - eps must leave a full predictor window.
inline std::vector<int> sequence_neighborhood_views(int series_length, int i,
                                                    int eps, int window) {
  if (eps < 0) throw std::invalid_argument("views: eps >= 0 required");
  if (i - eps < window - 1)
    throw std::out_of_range("views: i - eps leaves no full window");
  if (i >= series_length) throw std::out_of_range("views: anchor out of range");
  std::vector<int> out;
  for (int t = i - eps; t <= std::min(i + eps, series_length - 1); ++t)
    out.push_back(t);
  return out;
}

inline nlohmann::json mlp_to_json(const MlpPredictor& m) {
  nlohmann::json j;
  j["layer_sizes"] = m.layer_sizes;
  j["activation"] = m.activation == Activation::tanh_act ? "tanh" : "relu";
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    layers.push_back({{"rows", m.weights[l].rows()},
                      {"cols", m.weights[l].cols()},
                      {"weights", detail::to_flat(m.weights[l])},
                      {"bias", detail::to_flat(m.biases[l])}});
  }
  j["layers"] = layers;
  return j;
}

inline MlpPredictor mlp_from_json(const nlohmann::json& j) {
  MlpPredictor m;
  m.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
  m.activation = j.at("activation") == "tanh" ? Activation::tanh_act
                                              : Activation::relu;
  for (const auto& layer : j.at("layers")) {
    const auto rows = layer.at("rows").get<Eigen::Index>();
    const auto cols = layer.at("cols").get<Eigen::Index>();
    const auto flat = layer.at("weights").get<std::vector<double>>();
    Matrix w(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        w(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
    m.weights.push_back(std::move(w));
    const auto b = layer.at("bias").get<std::vector<double>>();
    m.biases.push_back(Eigen::Map<const Vector>(b.data(),
                                                static_cast<Eigen::Index>(b.size())));
  }
  return m;
}

}  // namespace witgame
