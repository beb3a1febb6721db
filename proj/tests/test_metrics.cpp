#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "witgame/metrics.hpp"

using namespace witgame;

namespace {

Vector vec(std::initializer_list<double> vals) {
  Vector v(static_cast<Eigen::Index>(vals.size()));
  Eigen::Index i = 0;
  for (double x : vals) v(i++) = x;
  return v;
}

}  // namespace

TEST_CASE("generalized AUC worked values") {
  REQUIRE(generalized_auc(vec({1, 2, 3}), vec({1, 2, 3})) == 1.0);
  REQUIRE(generalized_auc(vec({1, 2, 3}), vec({3, 2, 1})) == 0.0);
  REQUIRE(generalized_auc(vec({0, 0, 1, 1}), vec({0.1, 0.4, 0.35, 0.8})) ==
          0.75);
  REQUIRE_THROWS_AS(generalized_auc(vec({2, 2, 2}), vec({1, 2, 3})),
                    std::invalid_argument);
}

TEST_CASE("generalized AUC invariances") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = rng.uniform_int(3, 20);
    Vector refs = rng.normal_matrix(n, 1);
    Vector preds = rng.normal_matrix(n, 1);
    const double base = generalized_auc(refs, preds);
    Vector warped = preds.unaryExpr([](double v) { return std::exp(v); });
    REQUIRE(generalized_auc(refs, warped) == base);
    Vector affine = 2.0 * preds + Vector::Constant(n, 7.0);
    REQUIRE(generalized_auc(refs, affine) == base);
    Vector cubed = preds.unaryExpr([](double v) { return v * v * v; });
    REQUIRE(generalized_auc(refs, cubed) == base);
    // Continuous draws have no pred ties, so negation complements the score
    // (up to the rounding of the two divisions).
    REQUIRE(std::abs(generalized_auc(refs, -preds) - (1.0 - base)) <= 1e-12);
  }
}

TEST_CASE("fast and reference AUC agree exactly, ties included") {
  Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = rng.uniform_int(2, 24);
    Vector refs(n), preds(n);
    for (int i = 0; i < n; ++i) {
      refs(i) = rng.uniform_int(0, 4);   // force reference ties
      preds(i) = rng.uniform_int(0, 6);  // and prediction ties
    }
    bool degenerate = refs.maxCoeff() <= refs.minCoeff();
    if (degenerate) {
      REQUIRE_THROWS_AS(generalized_auc_fast(refs, preds),
                        std::invalid_argument);
      continue;
    }
    const double ref_value = generalized_auc(refs, preds);
    REQUIRE(generalized_auc_fast(refs, preds) == ref_value);
    // Triple-check against the test-side brute-force oracle.
    std::vector<double> rv(refs.data(), refs.data() + n);
    std::vector<double> pv(preds.data(), preds.data() + n);
    REQUIRE(oracles::brute_force_auc(rv, pv) == ref_value);
  }
}

TEST_CASE("local AUC") {
  Rng rng(11);
  SECTION("witnesses equal to the predictor score 1") {
    const int n = 8;
    Matrix x = rng.normal_matrix(n, 1);
    Matrix f = x * 2.0;  // exactly linear
    auto ns = make_window_system(n, 2);
    auto fits = refit_witnesses(x, f, ns, WitnessSpec{WitnessFamily::linear});
    auto result = auc_local(fits, f, ns);
    REQUIRE(result.value == Catch::Approx(1.0));
    REQUIRE(result.skipped == 0);
  }
  SECTION("random witnesses hover near one half") {
    double total = 0.0;
    const int trials = 1000;
    Vector refs = rng.normal_matrix(9, 1);
    for (int t = 0; t < trials; ++t) {
      Vector preds = rng.normal_matrix(9, 1);
      total += generalized_auc(refs, preds);
    }
    REQUIRE(std::abs(total / trials - 0.5) <= 0.1);
  }
  SECTION("degenerate neighborhoods are skipped and counted") {
    Matrix x(4, 1);
    x << 1, 2, 3, 4;
    Matrix f(4, 1);
    f << 1, 1, 2, 3;  // window {0,1} is constant
    auto ns = make_window_system(4, 1);
    auto fits = refit_witnesses(x, f, ns, WitnessSpec{WitnessFamily::linear});
    auto result = auc_local(fits, f, ns);
    REQUIRE(result.skipped == 1);
  }
}

TEST_CASE("witness parameter total variation") {
  SECTION("constant parameters drift by zero") {
    std::vector<Vector> params(5, vec({0.3, -1.0, 2.0}));
    REQUIRE(witness_param_tv(params) == 0.0);
  }
  SECTION("single-pair hand value") {
    REQUIRE(witness_param_tv({vec({0, 0}), vec({0, 1})}) == 1.0);
  }
  SECTION("witnesses of an exact AR predictor do not drift") {
    Rng rng(13);
    const int K = 2, T = 40;
    Matrix series(T, 1);
    series(0, 0) = 0.3;
    series(1, 0) = -0.2;
    for (int t = 2; t < T; ++t)
      series(t, 0) = 0.5 * series(t - 1, 0) - 0.3 * series(t - 2, 0) + 0.1 +
                     0.05 * rng.normal();
    // Means generated exactly by a fixed AR(2) map.
    auto mu = [&](int t) {
      return 0.4 * series(t, 0) + 0.2 * series(t - 1, 0) - 0.05;
    };
    std::vector<Vector> params;
    for (int anchor = 10; anchor < 30; ++anchor) {
      std::vector<Matrix> contexts;
      Matrix means(5, 1);
      for (int v = 0; v < 5; ++v) {
        const int t = anchor - 2 + v;
        contexts.push_back(series.middleRows(t - K + 1, K));
        means(v, 0) = mu(t);
      }
      params.push_back(
          flatten_witness_params(fit_ar(contexts, means, K, 1e-12)));
    }
    REQUIRE(witness_param_tv(params) <= 1e-10);
  }
  SECTION("length mismatch rejected") {
    REQUIRE_THROWS_AS(witness_param_tv({vec({0}), vec({0, 1})}),
                      std::invalid_argument);
  }
}

TEST_CASE("deviation RMSE") {
  REQUIRE(deviation_rmse(Matrix::Zero(3, 2), Matrix::Zero(3, 2)) == 0.0);
  Matrix a(1, 1), b(1, 1);
  a << 0;
  b << 2;
  REQUIRE(deviation_rmse(a, b) == 2.0);
  Matrix c(2, 1), d(2, 1);
  c << 0, 0;
  d << 3, 4;
  REQUIRE(deviation_rmse(c, d) == Catch::Approx(std::sqrt(25.0 / 2.0)));
  REQUIRE_THROWS_AS(deviation_rmse(a, c), std::invalid_argument);
}

TEST_CASE("effective neighborhood size search") {
  SECTION("constant family: any two distinct values") {
    auto report =
        check_effective_size(WitnessFamily::constant, 2, 1, 0, 1);
    REQUIRE(report.verdict == EffectiveVerdict::effective_witnessed);
    REQUIRE(report.deviation > 1e-9);
  }
  SECTION("constant family with m = 1 fits everything") {
    auto report =
        check_effective_size(WitnessFamily::constant, 1, 1, 100, 2);
    REQUIRE(report.verdict == EffectiveVerdict::fit_all_trials);
  }
  SECTION("linear family below the bound fits all trials") {
    auto report = check_effective_size(WitnessFamily::linear, 2, 2, 100, 3);
    REQUIRE(report.verdict == EffectiveVerdict::fit_all_trials);
    REQUIRE(report.trials_run == 100);
  }
  SECTION("linear family at d+1 is witnessed") {
    auto report = check_effective_size(WitnessFamily::linear, 2, 1, 0, 4);
    REQUIRE(report.verdict == EffectiveVerdict::effective_witnessed);
  }
  SECTION("tree family at 2^k+1") {
    auto report =
        check_effective_size(WitnessFamily::tree_mse, 3, 1, 0, 5, 1);
    REQUIRE(report.verdict == EffectiveVerdict::effective_witnessed);
  }
}

TEST_CASE("linear effective-size bound is tight for small d") {
  for (int d = 1; d <= 3; ++d) {
    auto report = verify_bound_linear(d, 100, 1000 + d);
    REQUIRE(report.below_fits_all);
    REQUIRE(report.positive_at_bound);
    REQUIRE(report.passed);
    REQUIRE(report.max_deviation_below <= 1e-10);
    REQUIRE(report.witnessed_deviation > 1e-6);
  }
}

TEST_CASE("tree effective-size bound is tight for small k") {
  SECTION("zigzag on three points defeats any stump") {
    Vector f = vec({0, 1, 0});
    REQUIRE(optimal_tree_cost_1d(f, 1) > 0.0);
    REQUIRE(optimal_tree_cost_1d(vec({0, 1}), 1) == 0.0);
  }
  for (int k = 1; k <= 2; ++k) {
    auto report = verify_bound_tree(k, 100, 2000 + k);
    REQUIRE(report.passed);
  }
}

TEST_CASE("greedy trees never beat the exhaustive optimum") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = rng.uniform_int(2, 8);
    const int depth = rng.uniform_int(1, 2);
    Matrix X(m, 1);
    Vector f(m);
    for (int i = 0; i < m; ++i) {
      X(i, 0) = i + 1;
      f(i) = rng.uniform_int(0, 3);  // ties exercise the programs
    }
    const double greedy = fit_tree_mse(X, f, depth).deviation *
                          static_cast<double>(m);
    const double optimal = optimal_tree_cost_1d(f, depth);
    REQUIRE(greedy >= optimal - 1e-12);
  }
}

TEST_CASE("transparency scores on an exactly linear predictor") {
  Rng rng(19);
  const int n = 12;
  Matrix x = rng.normal_matrix(n, 1);
  Matrix f = 1.5 * x;
  Matrix y = f + 0.01 * rng.normal_matrix(n, 1);
  auto ns = make_window_system(n, 3);
  auto fits = refit_witnesses(x, f, ns, WitnessSpec{WitnessFamily::linear});
  auto scores = transparency_scores(f, y, fits, ns);
  REQUIRE(scores.auc_B == Catch::Approx(1.0));
  REQUIRE(scores.auc_D == Catch::Approx(1.0));
  REQUIRE(scores.auc_f_y >= 0.9);
  REQUIRE(scores.auc_g_y >= 0.9);
  REQUIRE(scores.auc_f_y <= 1.0);
}
