#pragma once

// Minimal deterministic SVG plotting for the emitted figures: trade-off
// curves (attacker accuracy vs NE2, one series per SI case, dashed SI-only
// baselines) and loss-vs-epoch curves. No timestamps, no randomness: byte
// identical output for identical input.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "smpriv/common.hpp"

namespace smpriv {

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (x, y)
  bool dashed = false;
  bool markers = true;
};

namespace detail {

inline std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

inline std::string fmt_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline const char* plot_color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf"};
  return palette[i % 7];
}

}  // namespace detail

inline std::string render_svg_plot(const std::string& title, const std::string& xlabel,
                                   const std::string& ylabel,
                                   const std::vector<PlotSeries>& series, int width = 720,
                                   int height = 480) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (!(xmin <= xmax)) {
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  if (xmax == xmin) {
    xmax += 0.5;
    xmin -= 0.5;
  }
  if (ymax == ymin) {
    ymax += 0.5;
    ymin -= 0.5;
  }
  const double xpad = 0.05 * (xmax - xmin);
  const double ypad = 0.05 * (ymax - ymin);
  xmin -= xpad;
  xmax += xpad;
  ymin -= ypad;
  ymax += ypad;

  const double ml = 70, mr = 20, mt = 40, mb = 55;
  const double pw = width - ml - mr, ph = height - mt - mb;
  auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + detail::fmt_coord(ml + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"15\">" + title + "</text>\n";

  // axes box and ticks
  svg += "<rect x=\"" + detail::fmt_coord(ml) + "\" y=\"" + detail::fmt_coord(mt) + "\" width=\"" +
         detail::fmt_coord(pw) + "\" height=\"" + detail::fmt_coord(ph) +
         "\" fill=\"none\" stroke=\"#333\"/>\n";
  const int n_ticks = 5;
  for (int i = 0; i <= n_ticks; ++i) {
    const double fx = xmin + (xmax - xmin) * i / n_ticks;
    const double fy = ymin + (ymax - ymin) * i / n_ticks;
    svg += "<line x1=\"" + detail::fmt_coord(sx(fx)) + "\" y1=\"" + detail::fmt_coord(mt + ph) +
           "\" x2=\"" + detail::fmt_coord(sx(fx)) + "\" y2=\"" + detail::fmt_coord(mt + ph + 5) +
           "\" stroke=\"#333\"/>\n";
    svg += "<text x=\"" + detail::fmt_coord(sx(fx)) + "\" y=\"" + detail::fmt_coord(mt + ph + 18) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
           detail::fmt_tick(fx) + "</text>\n";
    svg += "<line x1=\"" + detail::fmt_coord(ml - 5) + "\" y1=\"" + detail::fmt_coord(sy(fy)) +
           "\" x2=\"" + detail::fmt_coord(ml) + "\" y2=\"" + detail::fmt_coord(sy(fy)) +
           "\" stroke=\"#333\"/>\n";
    svg += "<text x=\"" + detail::fmt_coord(ml - 8) + "\" y=\"" + detail::fmt_coord(sy(fy) + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
           detail::fmt_tick(fy) + "</text>\n";
  }
  svg += "<text x=\"" + detail::fmt_coord(ml + pw / 2) + "\" y=\"" +
         detail::fmt_coord(double(height) - 12) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" + xlabel +
         "</text>\n";
  svg += "<text x=\"18\" y=\"" + detail::fmt_coord(mt + ph / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "transform=\"rotate(-90 18 " + detail::fmt_coord(mt + ph / 2) + ")\">" + ylabel +
         "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = detail::plot_color(si);
    if (s.points.size() > 1) {
      std::string pts;
      for (const auto& [x, y] : s.points) {
        pts += detail::fmt_coord(sx(x)) + "," + detail::fmt_coord(sy(y)) + " ";
      }
      svg += std::string("<polyline fill=\"none\" stroke=\"") + color + "\" stroke-width=\"1.5\"" +
             (s.dashed ? " stroke-dasharray=\"6,4\"" : "") + " points=\"" + pts + "\"/>\n";
    }
    if (s.markers) {
      for (const auto& [x, y] : s.points) {
        svg += std::string("<circle cx=\"") + detail::fmt_coord(sx(x)) + "\" cy=\"" +
               detail::fmt_coord(sy(y)) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
      }
    }
    // legend entry
    const double ly = mt + 16 + 16 * double(si);
    svg += std::string("<line x1=\"") + detail::fmt_coord(ml + pw - 150) + "\" y1=\"" +
           detail::fmt_coord(ly - 4) + "\" x2=\"" + detail::fmt_coord(ml + pw - 126) + "\" y2=\"" +
           detail::fmt_coord(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"" +
           (s.dashed ? " stroke-dasharray=\"6,4\"" : "") + "/>\n";
    svg += "<text x=\"" + detail::fmt_coord(ml + pw - 120) + "\" y=\"" + detail::fmt_coord(ly) +
           "\" font-family=\"sans-serif\" font-size=\"11\">" + s.label + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace smpriv
