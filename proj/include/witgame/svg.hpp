#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "witgame/types.hpp"

namespace witgame {

enum class SvgKind { param_heatmap, curve_overlay, cdf };

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string heat_color(double t) {  // t in [0,1]: blue -> red
  const int r = static_cast<int>(30 + 215 * t);
  const int g = static_cast<int>(60 + 40 * (1 - std::abs(2 * t - 1)));
  const int b = static_cast<int>(30 + 215 * (1 - t));
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

inline void svg_open(std::string& out, int width, int height) {
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(width) + "\" height=\"" + std::to_string(height) +
         "\" viewBox=\"0 0 " + std::to_string(width) + " " +
         std::to_string(height) + "\">\n";
}

}  // namespace detail

// Colored grid, one rectangle per entry: rows are parameter indices, columns
// time steps. Every rectangle carries its value in a data attribute so the
// plot is machine-readable.
inline std::string emit_svg_heatmap(const Matrix& values) {
  if (values.size() == 0) throw std::invalid_argument("heatmap: empty data");
  const int cell = 14;
  const int margin = 30;
  const int width = margin * 2 + cell * static_cast<int>(values.cols());
  const int height = margin * 2 + cell * static_cast<int>(values.rows());
  const double lo = values.minCoeff(), hi = values.maxCoeff();
  const double span = hi > lo ? hi - lo : 1.0;
  std::string out;
  detail::svg_open(out, width, height);
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      const double t = (values(r, c) - lo) / span;
      out += "<rect x=\"" + std::to_string(margin + cell * static_cast<int>(c)) +
             "\" y=\"" + std::to_string(margin + cell * static_cast<int>(r)) +
             "\" width=\"" + std::to_string(cell) + "\" height=\"" +
             std::to_string(cell) + "\" fill=\"" + detail::heat_color(t) +
             "\" data-row=\"" + std::to_string(r) + "\" data-col=\"" +
             std::to_string(c) + "\" data-value=\"" + detail::fmt(values(r, c)) +
             "\"/>\n";
    }
  }
  out += "</svg>\n";
  return out;
}

struct SvgCurve {
  std::string label;
  Vector x;
  Vector y;
};

struct SvgPoints {
  Vector x;
  Vector y;
};

// Overlaid polylines with optional scatter markers and plain min/max axes.
inline std::string emit_svg_curves(const std::vector<SvgCurve>& curves,
                                   const SvgPoints* points = nullptr) {
  if (curves.empty()) throw std::invalid_argument("curves: empty data");
  const int width = 560, height = 360, margin = 44;
  double xlo = curves[0].x.minCoeff(), xhi = curves[0].x.maxCoeff();
  double ylo = curves[0].y.minCoeff(), yhi = curves[0].y.maxCoeff();
  for (const auto& c : curves) {
    if (c.x.size() != c.y.size() || c.x.size() == 0)
      throw std::invalid_argument("curves: bad series");
    xlo = std::min(xlo, c.x.minCoeff());
    xhi = std::max(xhi, c.x.maxCoeff());
    ylo = std::min(ylo, c.y.minCoeff());
    yhi = std::max(yhi, c.y.maxCoeff());
  }
  if (points) {
    xlo = std::min(xlo, points->x.minCoeff());
    xhi = std::max(xhi, points->x.maxCoeff());
    ylo = std::min(ylo, points->y.minCoeff());
    yhi = std::max(yhi, points->y.maxCoeff());
  }
  const double xspan = xhi > xlo ? xhi - xlo : 1.0;
  const double yspan = yhi > ylo ? yhi - ylo : 1.0;
  auto px = [&](double x) {
    return margin + (x - xlo) / xspan * (width - 2 * margin);
  };
  auto py = [&](double y) {
    return height - margin - (y - ylo) / yspan * (height - 2 * margin);
  };
  const char* palette[] = {"#1f77b4", "#2ca02c", "#d62728", "#9467bd",
                           "#ff7f0e"};
  std::string out;
  detail::svg_open(out, width, height);
  // Axes.
  out += "<line x1=\"" + std::to_string(margin) + "\" y1=\"" +
         std::to_string(height - margin) + "\" x2=\"" +
         std::to_string(width - margin) + "\" y2=\"" +
         std::to_string(height - margin) + "\" stroke=\"#333\"/>\n";
  out += "<line x1=\"" + std::to_string(margin) + "\" y1=\"" +
         std::to_string(margin) + "\" x2=\"" + std::to_string(margin) +
         "\" y2=\"" + std::to_string(height - margin) +
         "\" stroke=\"#333\"/>\n";
  out += "<text x=\"" + std::to_string(margin) + "\" y=\"" +
         std::to_string(height - margin + 16) + "\" font-size=\"10\">" +
         detail::fmt(xlo) + "</text>\n";
  out += "<text x=\"" + std::to_string(width - margin) + "\" y=\"" +
         std::to_string(height - margin + 16) +
         "\" font-size=\"10\" text-anchor=\"end\">" + detail::fmt(xhi) +
         "</text>\n";
  out += "<text x=\"4\" y=\"" + std::to_string(height - margin) +
         "\" font-size=\"10\">" + detail::fmt(ylo) + "</text>\n";
  out += "<text x=\"4\" y=\"" + std::to_string(margin) +
         "\" font-size=\"10\">" + detail::fmt(yhi) + "</text>\n";
  int color = 0;
  for (const auto& c : curves) {
    std::string pts, data;
    for (Eigen::Index i = 0; i < c.x.size(); ++i) {
      pts += detail::fmt(px(c.x(i))) + "," + detail::fmt(py(c.y(i))) + " ";
      data += detail::fmt(c.y(i));
      if (i + 1 < c.x.size()) data += " ";
    }
    out += "<polyline fill=\"none\" stroke=\"" +
           std::string(palette[color % 5]) + "\" stroke-width=\"1.5\" " +
           "data-label=\"" + c.label + "\" data-values=\"" + data +
           "\" points=\"" + pts + "\"/>\n";
    ++color;
  }
  if (points) {
    for (Eigen::Index i = 0; i < points->x.size(); ++i) {
      out += "<circle cx=\"" + detail::fmt(px(points->x(i))) + "\" cy=\"" +
             detail::fmt(py(points->y(i))) +
             "\" r=\"2.5\" fill=\"#555\" data-x=\"" + detail::fmt(points->x(i)) +
             "\" data-y=\"" + detail::fmt(points->y(i)) + "\"/>\n";
    }
  }
  out += "</svg>\n";
  return out;
}

// Empirical cumulative distribution of a sample as a single polyline.
inline std::string emit_svg_cdf(const Vector& values) {
  if (values.size() == 0) throw std::invalid_argument("cdf: empty data");
  std::vector<double> sorted(values.data(), values.data() + values.size());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<Eigen::Index>(sorted.size());
  SvgCurve curve;
  curve.label = "cdf";
  curve.x.resize(n);
  curve.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    curve.x(i) = sorted[static_cast<std::size_t>(i)];
    curve.y(i) = static_cast<double>(i + 1) / static_cast<double>(n);
  }
  return emit_svg_curves({curve});
}

// Kind dispatcher for the plot subcommand: heat maps take the whole matrix,
// overlays read x from column 0, the cdf uses column 0 alone.
inline std::string emit_svg(SvgKind kind, const Matrix& data) {
  if (data.size() == 0) throw std::invalid_argument("emit_svg: empty data");
  switch (kind) {
    case SvgKind::param_heatmap:
      return emit_svg_heatmap(data);
    case SvgKind::curve_overlay: {
      if (data.cols() < 2)
        throw std::invalid_argument("curve_overlay: need x plus a curve");
      std::vector<SvgCurve> curves;
      for (Eigen::Index c = 1; c < data.cols(); ++c)
        curves.push_back({"series" + std::to_string(c - 1), data.col(0),
                          data.col(c)});
      return emit_svg_curves(curves);
    }
    case SvgKind::cdf:
      return emit_svg_cdf(data.col(0));
  }
  throw std::logic_error("emit_svg: unknown kind");
}

}  // namespace witgame
