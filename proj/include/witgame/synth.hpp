#pragma once

#include <cmath>
#include <vector>

#include "witgame/dataset.hpp"
#include "witgame/types.hpp"

namespace witgame {

// 1-D regression curve with slope changes and jumps, x sorted on [0, 10].
inline Dataset gen_piecewise_1d(int n, double noise, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("gen_piecewise_1d: n >= 2");
  Rng rng(seed);
  const int segments = 4;
  std::vector<double> slope(segments), offset(segments);
  for (int s = 0; s < segments; ++s) {
    slope[static_cast<std::size_t>(s)] = rng.uniform(-2.0, 2.0);
    offset[static_cast<std::size_t>(s)] = rng.uniform(-3.0, 3.0);
  }
  Matrix x(n, 1), y(n, 1);
  for (int i = 0; i < n; ++i) {
    const double xi = 10.0 * i / (n - 1);
    const int s = std::min(segments - 1, static_cast<int>(xi / 10.0 * segments));
    x(i, 0) = xi;
    y(i, 0) = offset[static_cast<std::size_t>(s)] +
              slope[static_cast<std::size_t>(s)] * (xi - 2.5 * s) +
              noise * rng.normal();
  }
  return Dataset(x, y);
}

// c-channel sum of a period-5 and a period-20 sinusoid plus Gaussian noise;
// phases differ per channel.
inline Matrix gen_two_sine_series(int length, int channels, double noise,
                                  std::uint64_t seed) {
  if (length < 1 || channels < 1)
    throw std::invalid_argument("gen_two_sine_series: bad shape");
  Rng rng(seed);
  const double two_pi = 2.0 * 3.14159265358979323846;
  std::vector<double> phase_fast(static_cast<std::size_t>(channels));
  std::vector<double> phase_slow(static_cast<std::size_t>(channels));
  for (int ch = 0; ch < channels; ++ch) {
    phase_fast[static_cast<std::size_t>(ch)] = rng.uniform(0.0, two_pi);
    phase_slow[static_cast<std::size_t>(ch)] = rng.uniform(0.0, two_pi);
  }
  Matrix series(length, channels);
  for (int t = 0; t < length; ++t)
    for (int ch = 0; ch < channels; ++ch)
      series(t, ch) =
          std::sin(two_pi * t / 5.0 + phase_fast[static_cast<std::size_t>(ch)]) +
          std::sin(two_pi * t / 20.0 +
                   phase_slow[static_cast<std::size_t>(ch)]) +
          noise * rng.normal();
  return series;
}

// Binary feature rows with multi-label targets: each label is the AND of two
// feature columns, flipped with probability flip_prob. Feature pairs are
// redrawn until every label shows both classes.
inline Dataset gen_multilabel_binary(int n, int d, int q, double flip_prob,
                                     std::uint64_t seed) {
  if (n < 4 || d < 2 || q < 1)
    throw std::invalid_argument("gen_multilabel_binary: bad shape");
  Rng rng(seed);
  Matrix x(n, d), y(n, q);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = rng.uniform() < 0.5 ? 0.0 : 1.0;
  for (int label = 0; label < q; ++label) {
    for (int attempt = 0; attempt < 64; ++attempt) {
      const int a = rng.uniform_int(0, d - 1);
      int b = rng.uniform_int(0, d - 1);
      if (b == a) b = (b + 1) % d;
      int positives = 0;
      for (int i = 0; i < n; ++i) {
        double v = (x(i, a) == 1.0 && x(i, b) == 1.0) ? 1.0 : 0.0;
        if (rng.uniform() < flip_prob) v = 1.0 - v;
        y(i, label) = v;
        positives += v == 1.0 ? 1 : 0;
      }
      if (positives > 0 && positives < n) break;
      if (attempt == 63)
        throw std::runtime_error(
            "gen_multilabel_binary: could not balance a label");
    }
  }
  std::vector<FeatureKind> kinds(static_cast<std::size_t>(d),
                                 FeatureKind::binary);
  return Dataset(x, y, kinds);
}

// Exact AR(K) dynamics with optional innovation noise; theta[k] multiplies
// the k-th lag (theta[0] applies to x_{t-1}).
inline Matrix gen_ar_series(const std::vector<Matrix>& theta,
                            const Vector& theta0, int length, double noise,
                            std::uint64_t seed) {
  const int K = static_cast<int>(theta.size());
  const int c = static_cast<int>(theta0.size());
  if (K < 1) throw std::invalid_argument("gen_ar_series: K >= 1");
  if (length <= K) throw std::invalid_argument("gen_ar_series: too short");
  Rng rng(seed);
  Matrix series(length, c);
  for (int t = 0; t < K; ++t)
    for (int ch = 0; ch < c; ++ch) series(t, ch) = 0.1 * rng.normal();
  for (int t = K; t < length; ++t) {
    Vector next = theta0;
    for (int k = 0; k < K; ++k)
      next += theta[static_cast<std::size_t>(k)] *
              series.row(t - 1 - k).transpose();
    for (int ch = 0; ch < c; ++ch) next(ch) += noise * rng.normal();
    series.row(t) = next.transpose();
  }
  return series;
}

// Plain (biased) autocorrelation at a given lag, averaged over channels.
inline double autocorrelation(const Matrix& series, int lag) {
  if (lag < 1 || lag >= series.rows())
    throw std::invalid_argument("autocorrelation: bad lag");
  double total = 0.0;
  for (Eigen::Index ch = 0; ch < series.cols(); ++ch) {
    Vector v = series.col(ch);
    const double mean = v.mean();
    double num = 0.0, den = 0.0;
    for (Eigen::Index t = 0; t < v.size(); ++t) {
      const double centered = v(t) - mean;
      den += centered * centered;
      if (t + lag < v.size()) num += centered * (v(t + lag) - mean);
    }
    total += num / den;
  }
  return total / static_cast<double>(series.cols());
}

}  // namespace witgame
