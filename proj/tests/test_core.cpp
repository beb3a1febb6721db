#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "witgame/dataset.hpp"
#include "witgame/deviation.hpp"
#include "witgame/neighborhood.hpp"

using namespace witgame;

TEST_CASE("window system with zero radius is all singletons") {
  auto ns = make_window_system(5, 0);
  REQUIRE(ns.size() == 5);
  for (int i = 0; i < 5; ++i) {
    REQUIRE(ns.at(i) == std::vector<int>{i});
  }
}

TEST_CASE("window system clips at sequence boundaries") {
  auto ns = make_window_system(5, 1);
  REQUIRE(ns.at(0) == std::vector<int>({0, 1}));
  REQUIRE(ns.at(2) == std::vector<int>({1, 2, 3}));
  REQUIRE(ns.at(4) == std::vector<int>({3, 4}));
}

TEST_CASE("window sizes: interior anchors 2*eps+1, ends smaller") {
  const int n = 100, eps = 9;
  auto ns = make_window_system(n, eps);
  int smaller_low = 0, smaller_high = 0;
  for (int i = 0; i < n; ++i) {
    // Independent size count from the definition.
    const int expect = std::min(n - 1, i + eps) - std::max(0, i - eps) + 1;
    REQUIRE(static_cast<int>(ns.at(i).size()) == expect);
    if (expect < 2 * eps + 1) {
      if (i < n / 2)
        ++smaller_low;
      else
        ++smaller_high;
    }
  }
  REQUIRE(static_cast<int>(ns.at(n / 2).size()) == 19);
  REQUIRE(smaller_low <= 9);
  REQUIRE(smaller_high <= 9);
}

TEST_CASE("ball system extremes and 1-D example") {
  Matrix pts(3, 1);
  pts << 0, 1, 2;
  SECTION("radius below any pairwise distance gives singletons") {
    auto ns = make_ball_system(pts, 0.5);
    for (int i = 0; i < 3; ++i) REQUIRE(ns.at(i) == std::vector<int>{i});
  }
  SECTION("radius above the diameter gives the full index set") {
    auto ns = make_ball_system(pts, 10.0);
    for (int i = 0; i < 3; ++i)
      REQUIRE(ns.at(i) == std::vector<int>({0, 1, 2}));
  }
  SECTION("radius 1 on {0,1,2}") {
    auto ns = make_ball_system(pts, 1.0);
    REQUIRE(ns.at(0) == std::vector<int>({0, 1}));
    REQUIRE(ns.at(1) == std::vector<int>({0, 1, 2}));
    REQUIRE(ns.at(2) == std::vector<int>({1, 2}));
  }
  SECTION("non-positive radius rejected") {
    REQUIRE_THROWS_AS(make_ball_system(pts, 0.0), std::invalid_argument);
  }
}

TEST_CASE("assumption checks") {
  SECTION("full neighborhoods satisfy a3-a5 with m = N") {
    auto ns = make_explicit_system({{0, 1, 2}, {0, 1, 2}, {0, 1, 2}});
    auto rep = verify_assumptions(ns);
    REQUIRE(rep.a3);
    REQUIRE(rep.a4);
    REQUIRE(rep.a5);
    REQUIRE(rep.common_size.value() == 3);
  }
  SECTION("clipped windows break a3 but keep a4 and a5") {
    auto ns = make_window_system(10, 2);
    auto rep = verify_assumptions(ns);
    REQUIRE_FALSE(rep.a3);
    REQUIRE(rep.a4);
    REQUIRE(rep.a5);
    REQUIRE_FALSE(rep.common_size.has_value());
  }
  SECTION("asymmetric membership breaks a4") {
    auto ns = make_explicit_system({{0, 1}, {1}});
    auto rep = verify_assumptions(ns);
    REQUIRE_FALSE(rep.a4);
    REQUIRE(rep.a5);
  }
  SECTION("a1/a2 are echoed") {
    auto ns = make_window_system(3, 1);
    auto rep = verify_assumptions(ns, false, true);
    REQUIRE_FALSE(rep.a1);
    REQUIRE(rep.a2);
  }
}

TEST_CASE("window systems always satisfy a4 and a5; a3 iff eps=0 or n<=eps+1") {
  for (int n = 1; n <= 12; ++n) {
    for (int eps = 0; eps <= 5; ++eps) {
      auto rep = verify_assumptions(make_window_system(n, eps));
      REQUIRE(rep.a4);
      REQUIRE(rep.a5);
      REQUIRE(rep.a3 == (eps == 0 || n <= eps + 1));
    }
  }
}

TEST_CASE("ball systems always satisfy a4 and a5") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = rng.uniform_int(2, 12);
    Matrix pts = rng.normal_matrix(n, rng.uniform_int(1, 3));
    auto rep = verify_assumptions(make_ball_system(pts, rng.uniform(0.2, 3.0)));
    REQUIRE(rep.a4);
    REQUIRE(rep.a5);
  }
}

TEST_CASE("neighborhood validation rejects bad systems") {
  REQUIRE_THROWS_AS(make_explicit_system({{0, 1}, {}}), std::invalid_argument);
  REQUIRE_THROWS_AS(make_explicit_system({{0, 2}, {1}}), std::invalid_argument);
  REQUIRE_THROWS_AS(make_explicit_system({{0, 0}, {1}}), std::invalid_argument);
}

TEST_CASE("local deviation worked values") {
  Matrix f(2, 1), g(2, 1);
  f << 0, 2;
  g << 1, 1;
  REQUIRE(local_deviation(f, f, DeviationKind::squared) == 0.0);
  REQUIRE(local_deviation(f, g, DeviationKind::squared) == Catch::Approx(1.0));
  REQUIRE(local_deviation(f, g, DeviationKind::total_variation) ==
          Catch::Approx(1.0));
  Matrix bad(3, 1);
  bad.setZero();
  REQUIRE_THROWS_AS(local_deviation(f, bad, DeviationKind::squared),
                    std::invalid_argument);
}

TEST_CASE("local deviation is nonnegative and zero only at equality") {
  Rng rng(99);
  const DeviationKind kinds[] = {DeviationKind::squared,
                                 DeviationKind::total_variation,
                                 DeviationKind::kl_diag_gaussian};
  for (int trial = 0; trial < 50; ++trial) {
    const int m = rng.uniform_int(1, 6);
    const int q = 2 * rng.uniform_int(1, 3);  // even so the kl kind applies
    Matrix f(m, q), g(m, q);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < q; ++j) {
        // Keep the variance half positive for the Gaussian kind.
        f(i, j) = j < q / 2 ? rng.normal() : 0.1 + rng.uniform();
        g(i, j) = j < q / 2 ? rng.normal() : 0.1 + rng.uniform();
      }
    for (auto kind : kinds) {
      REQUIRE(local_deviation(f, g, kind) >= 0.0);
      REQUIRE(local_deviation(f, f, kind) <= 1e-12);
      Matrix h = f;
      h(0, 0) += 0.5;
      REQUIRE(local_deviation(f, h, kind) > 1e-12);
    }
  }
}

TEST_CASE("dataset validation") {
  Matrix x(2, 2), y(2, 1);
  x << 0, 1.5, 1, 2.5;
  y << 0, 1;
  REQUIRE_NOTHROW(Dataset(x, y));

  Matrix bad = x;
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(Dataset(bad, y), std::invalid_argument);

  REQUIRE_THROWS_AS(
      Dataset(x, y, {FeatureKind::continuous, FeatureKind::binary}),
      std::invalid_argument);
  Matrix xb(2, 2);
  xb << 0, 1.5, 1, 2.5;
  xb(0, 1) = 1;
  xb(1, 1) = 0;
  REQUIRE_NOTHROW(Dataset(xb, y, {FeatureKind::binary, FeatureKind::binary}));
}

TEST_CASE("dataset csv round trip") {
  Rng rng(5);
  Matrix x = rng.normal_matrix(7, 3);
  for (int i = 0; i < 7; ++i) x(i, 1) = rng.uniform() < 0.5 ? 0.0 : 1.0;
  Matrix y = rng.normal_matrix(7, 2);
  Dataset ds(x, y,
             {FeatureKind::continuous, FeatureKind::binary,
              FeatureKind::continuous});
  auto path = std::filesystem::temp_directory_path() / "witgame_ds.csv";
  write_dataset_csv(ds, path.string());
  auto back = read_dataset_csv(path.string());
  REQUIRE(back.inputs.isApprox(ds.inputs, 0.0));
  REQUIRE(back.targets.isApprox(ds.targets, 0.0));
  REQUIRE(back.feature_kind[1] == FeatureKind::binary);
  std::filesystem::remove(path);
}
