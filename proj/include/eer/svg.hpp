#pragma once

#include <string>
#include <vector>

namespace eer {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

/// Standalone SVG document. Empty or missing series draw axes only.
std::string render_line_chart(const LineChart& chart);

/// Row-major `values` (rows = y_coords.size(), cols = x_coords.size()) as a
/// colored grid with a min/max legend.
std::string render_heatmap(const std::string& title, const std::vector<double>& x_coords,
                           const std::vector<double>& y_coords, const std::vector<double>& values);

std::string xml_escape(const std::string& text);

}  // namespace eer
