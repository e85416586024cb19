#pragma once

#include <string>
#include <vector>

namespace trail::cli {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  int width = 640;
  int height = 420;
};

/// Standalone SVG document with one polyline per series and a legend.
std::string line_chart(const std::vector<Series>& series, const ChartOptions& opts);

/// Standalone SVG bar chart; `errors` (same length as `values`, or empty) draws whiskers.
std::string bar_chart(const std::vector<std::string>& labels, const std::vector<double>& values,
                      const std::vector<double>& errors, const ChartOptions& opts);

}  // namespace trail::cli
