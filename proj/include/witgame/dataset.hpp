#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "witgame/types.hpp"

namespace witgame {

enum class FeatureKind { continuous, binary };

// A supervised dataset: N rows of d input features and Q target values.
// Row order is the anchor order used by neighborhood systems.
struct Dataset {
  Matrix inputs;   // N x d
  Matrix targets;  // N x Q
  std::vector<FeatureKind> feature_kind;

  Dataset(Matrix in, Matrix tg, std::vector<FeatureKind> kinds = {})
      : inputs(std::move(in)), targets(std::move(tg)),
        feature_kind(std::move(kinds)) {
    if (inputs.rows() < 1 || inputs.cols() < 1)
      throw std::invalid_argument("dataset: need N >= 1 and d >= 1");
    if (targets.cols() < 1)
      throw std::invalid_argument("dataset: need Q >= 1");
    if (targets.rows() != inputs.rows())
      throw std::invalid_argument("dataset: inputs/targets row mismatch");
    if (!all_finite(inputs) || !all_finite(targets))
      throw std::invalid_argument("dataset: non-finite entries");
    if (feature_kind.empty())
      feature_kind.assign(static_cast<std::size_t>(inputs.cols()),
                          FeatureKind::continuous);
    if (feature_kind.size() != static_cast<std::size_t>(inputs.cols()))
      throw std::invalid_argument("dataset: feature_kind length mismatch");
    for (Eigen::Index j = 0; j < inputs.cols(); ++j) {
      if (feature_kind[static_cast<std::size_t>(j)] != FeatureKind::binary)
        continue;
      for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
        const double v = inputs(i, j);
        if (v != 0.0 && v != 1.0)
          throw std::invalid_argument(
              "dataset: binary column contains a value outside {0,1}");
      }
    }
  }

  Eigen::Index size() const { return inputs.rows(); }
  Eigen::Index num_features() const { return inputs.cols(); }
  Eigen::Index num_targets() const { return targets.cols(); }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_number(const std::string& s, int line_no) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("csv: bad number '" + s + "' at line " +
                             std::to_string(line_no));
  }
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
    ++pos;
  if (pos != s.size())
    throw std::runtime_error("csv: trailing garbage '" + s + "' at line " +
                             std::to_string(line_no));
  return v;
}

}  // namespace detail

// Dataset CSV layout: header "x0,..,x{d-1},y0,..,y{Q-1}", one row per sample.
inline void write_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (Eigen::Index j = 0; j < ds.num_features(); ++j)
    out << (j ? ",x" : "x") << j;
  for (Eigen::Index q = 0; q < ds.num_targets(); ++q) out << ",y" << q;
  out << "\n";
  char buf[64];
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    for (Eigen::Index j = 0; j < ds.num_features(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.inputs(i, j));
      out << (j ? "," : "") << buf;
    }
    for (Eigen::Index q = 0; q < ds.num_targets(); ++q) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.targets(i, q));
      out << "," << buf;
    }
    out << "\n";
  }
}

// Columns whose values are all in {0,1} are restored as binary features.
inline Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv: empty file");
  auto header = detail::split_csv_line(line);
  Eigen::Index d = 0, q = 0;
  for (const auto& h : header) {
    if (!h.empty() && h[0] == 'x')
      ++d;
    else if (!h.empty() && h[0] == 'y')
      ++q;
    else
      throw std::runtime_error("csv: unexpected header column '" + h + "'");
  }
  if (d < 1 || q < 1)
    throw std::runtime_error("csv: header must list x* and y* columns");
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != static_cast<std::size_t>(d + q))
      throw std::runtime_error("csv: wrong field count at line " +
                               std::to_string(line_no));
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(detail::parse_number(f, line_no));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("csv: no data rows");
  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix inputs(n, d), targets(n, q);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j)
      inputs(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    for (Eigen::Index k = 0; k < q; ++k)
      targets(i, k) =
          rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(d + k)];
  }
  std::vector<FeatureKind> kinds;
  for (Eigen::Index j = 0; j < d; ++j) {
    bool binary = true;
    for (Eigen::Index i = 0; i < n && binary; ++i)
      binary = inputs(i, j) == 0.0 || inputs(i, j) == 1.0;
    kinds.push_back(binary ? FeatureKind::binary : FeatureKind::continuous);
  }
  return Dataset(std::move(inputs), std::move(targets), std::move(kinds));
}

}  // namespace witgame
