#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace witgame {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Deterministic random source. The uniform/normal transforms are written out
// explicitly so that a given seed produces the same stream on every standard
// library, which the reproducibility contract of experiment runs relies on.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; no cached spare, so the stream position
  // depends only on the number of calls.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Inclusive range.
  int uniform_int(int lo, int hi) {
    if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Matrix out(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = normal();
    return out;
  }

 private:
  std::mt19937_64 engine_;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace witgame
