#pragma once

#include <cmath>

#include "witgame/types.hpp"

namespace witgame {

enum class DeviationKind { squared, total_variation, kl_diag_gaussian };

// KL(N(mu1, diag(var1)) || N(mu2, diag(var2))) for diagonal Gaussians.
inline double kl_diag_gaussian(const Vector& mu1, const Vector& var1,
                               const Vector& mu2, const Vector& var2) {
  if (mu1.size() != var1.size() || mu2.size() != var2.size() ||
      mu1.size() != mu2.size())
    throw std::invalid_argument("kl_diag_gaussian: size mismatch");
  double total = 0.0;
  for (Eigen::Index q = 0; q < mu1.size(); ++q) {
    const double v1 = var1(q), v2 = var2(q);
    if (!(v1 > 0) || !(v2 > 0))
      throw std::invalid_argument("kl_diag_gaussian: non-positive variance");
    const double dm = mu1(q) - mu2(q);
    total += 0.5 * (std::log(v2 / v1) + (v1 + dm * dm) / v2 - 1.0);
  }
  return total;
}

namespace detail {

// Per-row deviation d(f_row, g_row). For the Gaussian kind, rows are
// [mean(0..Q), variance(Q..2Q)] and the value is KL(witness || predictor),
// matching the direction the witness is fitted against the encoder output.
inline double row_deviation(DeviationKind kind,
                            const Eigen::Ref<const Eigen::RowVectorXd>& f_row,
                            const Eigen::Ref<const Eigen::RowVectorXd>& g_row) {
  switch (kind) {
    case DeviationKind::squared:
      return (f_row - g_row).squaredNorm();
    case DeviationKind::total_variation:
      return (f_row - g_row).cwiseAbs().sum();
    case DeviationKind::kl_diag_gaussian: {
      const Eigen::Index cols = f_row.size();
      if (cols % 2 != 0)
        throw std::invalid_argument(
            "kl deviation: rows must hold [mean, variance] halves");
      const Eigen::Index q = cols / 2;
      return kl_diag_gaussian(g_row.head(q).transpose(),
                              g_row.tail(q).transpose(),
                              f_row.head(q).transpose(),
                              f_row.tail(q).transpose());
    }
  }
  throw std::logic_error("row_deviation: unknown kind");
}

}  // namespace detail

// Neighborhood-averaged deviation (1/m) sum_j d(f(x_j), g(x_j)). Coordinates
// are summed inside d before averaging over the neighborhood.
inline double local_deviation(const Matrix& predictor_values,
                              const Matrix& witness_values,
                              DeviationKind kind) {
  if (predictor_values.rows() != witness_values.rows() ||
      predictor_values.cols() != witness_values.cols())
    throw std::invalid_argument("local_deviation: shape mismatch");
  if (predictor_values.rows() == 0)
    throw std::invalid_argument("local_deviation: empty input");
  double total = 0.0;
  for (Eigen::Index i = 0; i < predictor_values.rows(); ++i)
    total += detail::row_deviation(kind, predictor_values.row(i),
                                   witness_values.row(i));
  return total / static_cast<double>(predictor_values.rows());
}

}  // namespace witgame
