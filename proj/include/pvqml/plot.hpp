#pragma once

// Self-contained SVG line and grouped-bar charts for offline viewing.

#include <string>
#include <vector>

namespace pvqml::plot {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct Axes {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 640;
  int height = 400;
};

/// Non-finite points are skipped. Throws ShapeError when x and y differ in
/// length.
std::string line_chart(const Axes& axes, const std::vector<Series>& series);

struct BarGroup {
  std::string name;            // legend entry
  std::vector<double> values;  // one per category
};

std::string bar_chart(const Axes& axes, const std::vector<std::string>& categories,
                      const std::vector<BarGroup>& groups);

}  // namespace pvqml::plot
