#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "witgame/equilibrium.hpp"

using namespace witgame;

namespace {

// Circular index windows: common size 2*eps+1, symmetric, covering.
NeighborhoodSystem circular_windows(int n, int eps) {
  std::vector<std::vector<int>> lists(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<int> block;
    for (int k = -eps; k <= eps; ++k) block.push_back(((i + k) % n + n) % n);
    std::sort(block.begin(), block.end());
    lists[static_cast<std::size_t>(i)] = block;
  }
  return make_explicit_system(lists);
}

FixedPointProblem worked_instance(double lambda) {
  Matrix x(2, 1);
  x << 1, 2;
  Vector y(2);
  y << 0, 3;
  FixedPointProblem p;
  p.inputs = x;
  p.targets = y;
  p.ns = make_explicit_system({{0, 1}, {0, 1}});
  p.lambda = lambda;
  p.family = FpFamily::linear;
  return p;
}

}  // namespace

TEST_CASE("worked two-point equilibrium: f* = (0.6, 2.7), theta = 1.2") {
  auto p = worked_instance(1.0);
  for (bool symmetric : {true, false}) {
    auto result = symmetric ? solve_fp_symmetric(p) : solve_fp_asymmetric(p);
    REQUIRE(result.converged);
    REQUIRE(std::abs(result.f(0) - 0.6) <= 1e-8);
    REQUIRE(std::abs(result.f(1) - 2.7) <= 1e-8);
    auto witness = fit_linear_pinv(p.inputs, result.f);
    REQUIRE(std::abs(std::get<LinearParams>(witness.params).theta(0, 0) - 1.2) <=
            1e-8);
  }
}

TEST_CASE("lambda = 0 returns the targets") {
  auto p = worked_instance(0.0);
  REQUIRE((solve_fp_symmetric(p).f - p.targets).cwiseAbs().maxCoeff() <= 1e-12);
  REQUIRE((solve_fp_asymmetric(p).f - p.targets).cwiseAbs().maxCoeff() <=
          1e-12);
}

TEST_CASE("representable constant targets are a fixed point") {
  FixedPointProblem p;
  p.inputs = Matrix::Ones(4, 1);
  p.targets = Vector::Constant(4, 2.5);
  p.ns = make_explicit_system(
      {{0, 1, 2, 3}, {0, 1, 2, 3}, {0, 1, 2, 3}, {0, 1, 2, 3}});
  p.lambda = 3.0;
  auto result = solve_fp_symmetric(p);
  REQUIRE((result.f.array() - 2.5).abs().maxCoeff() <= 1e-9);
}

TEST_CASE("identical neighborhoods collapse the two games") {
  Rng rng(101);
  const int n = 6;
  Matrix x = rng.normal_matrix(n, 2);
  Vector y = rng.normal_matrix(n, 1);
  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  FixedPointProblem p;
  p.inputs = x;
  p.targets = y;
  p.ns = make_explicit_system(std::vector<std::vector<int>>(n, all));
  p.lambda = 2.0;
  auto sym = solve_fp_symmetric(p);
  auto asym = solve_fp_asymmetric(p);
  REQUIRE((sym.f - asym.f).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("residual behaves as a certificate") {
  auto p = worked_instance(1.0);
  auto result = solve_fp_symmetric(p);
  REQUIRE(residual_theorem1(result.f, p, FpVariant::symmetric) <= 1e-8);
  // Targets are not an equilibrium when lambda > 0 and y is off-family.
  REQUIRE(residual_theorem1(p.targets, p, FpVariant::symmetric) > 1e-3);
  auto p0 = worked_instance(0.0);
  REQUIRE(residual_theorem1(p0.targets, p0, FpVariant::symmetric) == 0.0);
}

TEST_CASE("solvers match the exact linear-system oracle on random instances") {
  Rng rng(211);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = rng.uniform_int(6, 16);
    const int d = rng.uniform_int(1, 4);
    const int eps = rng.uniform_int(1, std::min(4, (n - 1) / 2));
    FixedPointProblem p;
    p.inputs = rng.normal_matrix(n, d);
    p.targets = rng.normal_matrix(n, 1);
    p.ns = circular_windows(n, eps);
    p.lambda =
        std::vector<double>{0.1, 1.0, 10.0}[static_cast<std::size_t>(trial % 3)];
    for (bool symmetric : {true, false}) {
      Vector oracle = oracles::exact_equilibrium(p.inputs, p.targets, p.ns,
                                                 p.lambda, symmetric);
      auto result = symmetric ? solve_fp_symmetric(p) : solve_fp_asymmetric(p);
      REQUIRE(result.converged);
      REQUIRE((result.f - oracle).cwiseAbs().maxCoeff() <= 1e-7);
      REQUIRE(result.residual <= 1e-9);
    }
  }
}

TEST_CASE("constant class corollary") {
  SECTION("constant targets are reproduced by both variants") {
    FixedPointProblem p;
    p.inputs = Matrix::Ones(5, 1);
    p.targets = Vector::Constant(5, -1.25);
    p.ns = circular_windows(5, 1);
    p.lambda = 1.0;
    for (auto variant : {FpVariant::symmetric, FpVariant::asymmetric}) {
      auto result = solve_fp_constant(p, variant);
      REQUIRE((result.f.array() + 1.25).abs().maxCoeff() <= 1e-9);
    }
  }
  SECTION("two-point asymmetric value (0.75, 2.25)") {
    FixedPointProblem p;
    p.inputs = Matrix::Ones(2, 1);
    p.targets = Vector(2);
    p.targets << 0, 3;
    p.ns = make_explicit_system({{0, 1}, {0, 1}});
    p.lambda = 1.0;
    auto result = solve_fp_constant(p, FpVariant::asymmetric);
    REQUIRE(std::abs(result.f(0) - 0.75) <= 1e-9);
    REQUIRE(std::abs(result.f(1) - 2.25) <= 1e-9);
    REQUIRE(std::abs(result.f.mean() - 1.5) <= 1e-9);
  }
  SECTION("witness feedback decays at rate lambda/(1+lambda)") {
    // Truncated series sum_t rho^t A^t y / (1+lambda), rho = lambda/(1+lambda);
    // the asymmetric game averages once per step, the symmetric game twice.
    Rng rng(311);
    const int n = 8;
    auto ns = circular_windows(n, 2);
    Vector y = rng.normal_matrix(n, 1);
    Matrix A = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j : ns.at(i))
        A(i, j) = 1.0 / static_cast<double>(ns.at(i).size());
    for (double lambda : {0.5, 1.0, 2.0}) {
      const double rho = lambda / (1.0 + lambda);
      Vector series_asym = Vector::Zero(n), series_sym = Vector::Zero(n);
      Vector term_asym = y, term_sym = y;
      for (int t = 0; t < 400; ++t) {
        series_asym += term_asym;
        series_sym += term_sym;
        term_asym = rho * (A * term_asym);
        term_sym = rho * (A * (A * term_sym));
      }
      series_asym /= (1.0 + lambda);
      series_sym /= (1.0 + lambda);

      FixedPointProblem p;
      p.inputs = Matrix::Ones(n, 1);
      p.targets = y;
      p.ns = ns;
      p.lambda = lambda;
      auto asym = solve_fp_constant(p, FpVariant::asymmetric);
      auto sym = solve_fp_constant(p, FpVariant::symmetric);
      REQUIRE((asym.f - series_asym).cwiseAbs().maxCoeff() <= 1e-8);
      REQUIRE((sym.f - series_sym).cwiseAbs().maxCoeff() <= 1e-8);
    }
  }
}

TEST_CASE("ridge stabilization gives a unique equilibrium") {
  Rng rng(401);
  const int n = 10;
  FixedPointProblem p;
  // Duplicate a column so the plain pseudo-inverse problem is degenerate.
  Matrix base = rng.normal_matrix(n, 2);
  p.inputs.resize(n, 3);
  p.inputs << base, base.col(0);
  p.targets = rng.normal_matrix(n, 1);
  p.ns = circular_windows(n, 2);
  p.lambda = 1.0;
  p.family = FpFamily::ridge;
  p.ridge_alpha = 0.5;
  Vector init_a = Vector::Zero(n);
  Vector init_b = rng.normal_matrix(n, 1) * 10.0;
  auto ra = solve_fp_symmetric(p, 100000, 1e-12, &init_a);
  auto rb = solve_fp_symmetric(p, 100000, 1e-12, &init_b);
  REQUIRE(ra.converged);
  REQUIRE((ra.f - rb.f).cwiseAbs().maxCoeff() <= 1e-8);
  // Also agrees with the exact solve using the ridge response map.
  Vector oracle = oracles::exact_equilibrium(p.inputs, p.targets, p.ns,
                                             p.lambda, true, p.ridge_alpha);
  REQUIRE((ra.f - oracle).cwiseAbs().maxCoeff() <= 1e-7);
}

TEST_CASE("interpolation between targets and the witness family") {
  Rng rng(501);
  const int n = 8;
  FixedPointProblem p;
  p.inputs = rng.normal_matrix(n, 2);
  p.targets = rng.normal_matrix(n, 1);
  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  p.ns = make_explicit_system(std::vector<std::vector<int>>(n, all));

  p.lambda = 1e-8;
  REQUIRE((solve_fp_symmetric(p).f - p.targets).cwiseAbs().maxCoeff() <= 1e-6);

  p.lambda = 1e8;
  auto heavy = solve_fp_symmetric(p);
  REQUIRE(fit_linear_pinv(p.inputs, heavy.f).deviation <= 1e-6);
}

TEST_CASE("uniform criterion branches") {
  SECTION("slack margin keeps the targets (third branch)") {
    auto p = worked_instance(0.0);
    p.delta = 1.0;  // deviation of f = y is 0.9 < delta
    auto result = solve_fp_uniform(p);
    REQUIRE(result.converged);
    REQUIRE((result.f - p.targets).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SECTION("delta = 0 projects onto per-neighborhood consistency") {
    auto p = worked_instance(0.0);
    p.delta = 0.0;
    auto result = solve_fp_uniform(p);
    Vector oracle =
        oracles::projection_onto_consistency(p.inputs, p.targets, p.ns);
    REQUIRE(std::abs(oracle(0) - 1.2) <= 1e-12);  // (6/5) * x
    REQUIRE(std::abs(oracle(1) - 2.4) <= 1e-12);
    REQUIRE((result.f - oracle).cwiseAbs().maxCoeff() <= 1e-7);
    REQUIRE(fit_linear_pinv(p.inputs, result.f).deviation <= 1e-12);
  }
  SECTION("intermediate delta obeys the branch structure") {
    auto p = worked_instance(0.0);
    p.delta = 0.2;
    auto result = solve_fp_uniform(p);
    REQUIRE(result.converged);
    REQUIRE(result.residual <= 1e-7);

    // Independent branch evaluation at the solution.
    const Vector& f = result.f;
    auto theta =
        std::get<LinearParams>(fit_linear_pinv(p.inputs, f).params).theta(0, 0);
    const double m = 2.0;
    for (int i = 0; i < 2; ++i) {
      double others = 0.0;
      for (int k = 0; k < 2; ++k) {
        if (k == i) continue;
        const double r = f(k) - theta * p.inputs(k, 0);
        others += r * r;
      }
      const double slack = std::sqrt(std::max(0.0, p.delta * m - others));
      const double alpha = theta * p.inputs(i, 0) - slack;
      const double beta = theta * p.inputs(i, 0) + slack;
      if (alpha > p.targets(i))
        REQUIRE(std::abs(f(i) - alpha) <= 1e-6);
      else if (beta < p.targets(i))
        REQUIRE(std::abs(f(i) - beta) <= 1e-6);
      else
        REQUIRE(std::abs(f(i) - p.targets(i)) <= 1e-6);
    }

    // The hard-margin solution differs from both games' solutions.
    auto sym = solve_fp_symmetric(worked_instance(1.0));
    REQUIRE((result.f - sym.f).cwiseAbs().maxCoeff() > 1e-3);
  }
}

TEST_CASE("problem validation") {
  auto p = worked_instance(1.0);
  p.ns = make_window_system(2, 1);  // both windows are {0,1}: A3 holds
  REQUIRE_NOTHROW(solve_fp_symmetric(p));
  FixedPointProblem bad = worked_instance(1.0);
  Matrix x3(3, 1);
  x3 << 1, 2, 3;
  bad.inputs = x3;
  bad.targets = Vector::Zero(3);
  bad.ns = make_window_system(3, 1);  // clipped sizes 2,3,2 break A3
  REQUIRE_THROWS_AS(solve_fp_symmetric(bad), std::invalid_argument);
}
