#pragma once

#include <string>
#include <vector>

namespace diffcal::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool dashed = false;
  bool markers = false;  // draw point markers instead of relying on the line
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 800;
  int height = 500;
};

/// Renders a line chart with axes, ticks and a legend as a standalone
/// SVG document.
std::string line_chart(const ChartSpec& chart, const std::vector<Series>& series);

}  // namespace diffcal::svg
