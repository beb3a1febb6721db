#pragma once

#include <algorithm>
#include <optional>
#include <unordered_set>
#include <vector>

#include "witgame/types.hpp"

namespace witgame {

enum class NeighborhoodKind { window, ball, explicit_list };

// One index list per anchor i, holding the members of B(x_i).
struct NeighborhoodSystem {
  std::vector<std::vector<int>> neighborhoods;
  NeighborhoodKind kind = NeighborhoodKind::explicit_list;
  double parameter = 0.0;  // window radius (epsilon) or ball radius

  int size() const { return static_cast<int>(neighborhoods.size()); }
  const std::vector<int>& at(int i) const {
    return neighborhoods[static_cast<std::size_t>(i)];
  }
};

// Which predictor/loss assumptions hold for a system. a1 (unconstrained
// predictor) and a2 (squared loss and deviation) depend on the caller's model
// choice and are passed through; a3..a5 are structural.
struct AssumptionReport {
  bool a1 = true;
  bool a2 = true;
  bool a3 = false;  // all neighborhoods share one size m
  bool a4 = false;  // membership is symmetric
  bool a5 = false;  // union of neighborhoods covers all anchors
  std::optional<int> common_size;
};

namespace detail {

inline void validate_system(const NeighborhoodSystem& ns) {
  const int n = ns.size();
  if (n < 1) throw std::invalid_argument("neighborhood system: no anchors");
  for (int i = 0; i < n; ++i) {
    const auto& list = ns.at(i);
    if (list.empty())
      throw std::invalid_argument("neighborhood system: empty neighborhood");
    std::unordered_set<int> seen;
    for (int j : list) {
      if (j < 0 || j >= n)
        throw std::invalid_argument("neighborhood system: index out of range");
      if (!seen.insert(j).second)
        throw std::invalid_argument("neighborhood system: duplicate index");
    }
  }
}

}  // namespace detail

inline NeighborhoodSystem make_explicit_system(
    std::vector<std::vector<int>> lists) {
  NeighborhoodSystem ns;
  ns.neighborhoods = std::move(lists);
  ns.kind = NeighborhoodKind::explicit_list;
  detail::validate_system(ns);
  return ns;
}

// Index windows {max(0,i-eps), ..., min(n-1,i+eps)}; boundary windows are
// clipped, not padded, so interior anchors have size 2*eps+1 and up to eps
// anchors at each end are smaller.
inline NeighborhoodSystem make_window_system(int n, int epsilon) {
  if (n < 1) throw std::invalid_argument("make_window_system: n >= 1 required");
  if (epsilon < 0)
    throw std::invalid_argument("make_window_system: epsilon >= 0 required");
  NeighborhoodSystem ns;
  ns.kind = NeighborhoodKind::window;
  ns.parameter = epsilon;
  ns.neighborhoods.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - epsilon);
    const int hi = std::min(n - 1, i + epsilon);
    auto& list = ns.neighborhoods[static_cast<std::size_t>(i)];
    for (int j = lo; j <= hi; ++j) list.push_back(j);
  }
  detail::validate_system(ns);
  return ns;
}

// Euclidean balls: B(x_i) = { j : ||x_i - x_j||_2 <= radius }, always
// containing i itself. Lists are in ascending index order.
inline NeighborhoodSystem make_ball_system(const Matrix& inputs,
                                           double radius) {
  if (!(radius > 0))
    throw std::invalid_argument("make_ball_system: radius > 0 required");
  const int n = static_cast<int>(inputs.rows());
  if (n < 1) throw std::invalid_argument("make_ball_system: empty inputs");
  NeighborhoodSystem ns;
  ns.kind = NeighborhoodKind::ball;
  ns.parameter = radius;
  ns.neighborhoods.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& list = ns.neighborhoods[static_cast<std::size_t>(i)];
    for (int j = 0; j < n; ++j) {
      if ((inputs.row(i) - inputs.row(j)).norm() <= radius) list.push_back(j);
    }
  }
  detail::validate_system(ns);
  return ns;
}

inline AssumptionReport verify_assumptions(const NeighborhoodSystem& ns,
                                           bool a1 = true, bool a2 = true) {
  detail::validate_system(ns);
  const int n = ns.size();
  AssumptionReport report;
  report.a1 = a1;
  report.a2 = a2;

  const auto m = ns.at(0).size();
  report.a3 = true;
  for (int i = 1; i < n && report.a3; ++i) report.a3 = ns.at(i).size() == m;
  if (report.a3) report.common_size = static_cast<int>(m);

  std::vector<std::unordered_set<int>> members(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    members[static_cast<std::size_t>(i)] =
        std::unordered_set<int>(ns.at(i).begin(), ns.at(i).end());

  report.a4 = true;
  for (int i = 0; i < n && report.a4; ++i)
    for (int j : ns.at(i))
      if (!members[static_cast<std::size_t>(j)].count(i)) {
        report.a4 = false;
        break;
      }

  std::vector<bool> covered(static_cast<std::size_t>(n), false);
  for (int i = 0; i < n; ++i)
    for (int j : ns.at(i)) covered[static_cast<std::size_t>(j)] = true;
  report.a5 = std::all_of(covered.begin(), covered.end(),
                          [](bool b) { return b; });
  return report;
}

}  // namespace witgame
