#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "nlos/geometry.hpp"

namespace nlos {

namespace svg_detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Compact blue-to-yellow colormap for heatmaps.
inline std::string heat_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  int r = static_cast<int>(255.0 * std::min(1.0, 0.1 + 1.2 * t));
  int g = static_cast<int>(255.0 * std::min(1.0, 0.05 + t * t * 1.1));
  int b = static_cast<int>(255.0 * std::max(0.0, 0.45 - 0.45 * t + 0.15 * (1 - t)));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace svg_detail

struct SvgSeries {
  std::string label;
  std::string color;
  std::vector<Eigen::Vector2d> points;
};

/// x-y line plot of one or more trajectories (equal-aspect, auto-scaled).
inline void write_svg_trajectories(const std::vector<SvgSeries>& series,
                                   const std::string& path) {
  double lo_x = 1e30, hi_x = -1e30, lo_y = 1e30, hi_y = -1e30;
  for (const auto& s : series)
    for (const auto& p : s.points) {
      lo_x = std::min(lo_x, p.x());
      hi_x = std::max(hi_x, p.x());
      lo_y = std::min(lo_y, p.y());
      hi_y = std::max(hi_y, p.y());
    }
  if (lo_x > hi_x) { lo_x = 0; hi_x = 1; lo_y = 0; hi_y = 1; }
  double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-6});
  double margin = 0.1 * span;
  lo_x -= margin; lo_y -= margin;
  span += 2 * margin;
  const double size = 640.0;
  auto px = [&](double x) { return (x - lo_x) / span * size; };
  auto py = [&](double y) { return size - (y - lo_y) / span * size; };

  std::ofstream out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 160
      << "\" height=\"" << size << "\" viewBox=\"0 0 " << size + 160 << " " << size
      << "\">\n";
  out << "<rect width=\"" << size << "\" height=\"" << size
      << "\" fill=\"#fafafa\" stroke=\"#888\"/>\n";
  int legend_y = 24;
  for (const auto& s : series) {
    out << "<polyline fill=\"none\" stroke=\"" << s.color
        << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : s.points)
      out << svg_detail::fmt(px(p.x())) << "," << svg_detail::fmt(py(p.y())) << " ";
    out << "\"/>\n";
    for (const auto& p : s.points)
      out << "<circle cx=\"" << svg_detail::fmt(px(p.x())) << "\" cy=\""
          << svg_detail::fmt(py(p.y())) << "\" r=\"2.5\" fill=\"" << s.color << "\"/>\n";
    out << "<text x=\"" << size + 12 << "\" y=\"" << legend_y << "\" fill=\"" << s.color
        << "\" font-family=\"monospace\" font-size=\"14\">" << s.label << "</text>\n";
    legend_y += 20;
  }
  out << "<text x=\"6\" y=\"" << size - 6
      << "\" font-family=\"monospace\" font-size=\"12\" fill=\"#555\">x: ["
      << svg_detail::fmt(lo_x) << ", " << svg_detail::fmt(lo_x + span) << "] m</text>\n";
  out << "</svg>\n";
}

/// Heatmap of a 2D slice (row-major values, nx columns by ny rows).
inline void write_svg_heatmap(const std::vector<double>& values, int nx, int ny,
                              const std::string& path, const std::string& title = "") {
  double hi = 0.0;
  for (double v : values) hi = std::max(hi, v);
  const double cell = std::max(2.0, 560.0 / std::max(nx, ny));
  double w = nx * cell, h = ny * cell;
  std::ofstream out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\""
      << h + 24 << "\" viewBox=\"0 0 " << w << " " << h + 24 << "\">\n";
  if (!title.empty())
    out << "<text x=\"4\" y=\"16\" font-family=\"monospace\" font-size=\"13\">" << title
        << "</text>\n";
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      double t = hi > 0 ? values[static_cast<std::size_t>(i) * ny + j] / hi : 0.0;
      out << "<rect x=\"" << svg_detail::fmt(i * cell) << "\" y=\""
          << svg_detail::fmt(24 + (ny - 1 - j) * cell) << "\" width=\""
          << svg_detail::fmt(cell) << "\" height=\"" << svg_detail::fmt(cell)
          << "\" fill=\"" << svg_detail::heat_color(t) << "\"/>\n";
    }
  out << "</svg>\n";
}

}  // namespace nlos
