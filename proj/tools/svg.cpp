#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace trail::cli {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 20;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 55;

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  bool log = false;

  double t(double v) const {
    const double a = log ? std::log10(v) : v;
    const double l = log ? std::log10(lo) : lo;
    const double h = log ? std::log10(hi) : hi;
    return h > l ? (a - l) / (h - l) : 0.5;
  }
};

Axis make_axis(std::vector<double> values, bool log) {
  if (log) {
    values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return !(v > 0.0); }), values.end());
  }
  if (values.empty()) throw std::invalid_argument("chart: no plottable values");
  auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  Axis axis{*mn, *mx, log};
  if (axis.hi == axis.lo) {
    axis.lo = log ? axis.lo / 2.0 : axis.lo - 1.0;
    axis.hi = log ? axis.hi * 2.0 : axis.hi + 1.0;
  }
  return axis;
}

void frame(std::ostringstream& svg, const ChartOptions& opts) {
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opts.width << "\" height=\"" << opts.height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << opts.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(opts.title)
      << "</text>\n";
  const int x0 = kMarginLeft;
  const int y0 = opts.height - kMarginBottom;
  svg << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << opts.width - kMarginRight << "\" y2=\"" << y0
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << x0 << "\" y1=\"" << kMarginTop << "\" x2=\"" << x0 << "\" y2=\"" << y0
      << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << (x0 + opts.width - kMarginRight) / 2 << "\" y=\"" << opts.height - 12
      << "\" text-anchor=\"middle\">" << escape(opts.x_label) << "</text>\n"
      << "<text transform=\"translate(16," << (kMarginTop + y0) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(opts.y_label) << "</text>\n";
}

}  // namespace

std::string line_chart(const std::vector<Series>& series, const ChartOptions& opts) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("line_chart: series '" + s.name + "' has ragged data");
    xs.insert(xs.end(), s.x.begin(), s.x.end());
    ys.insert(ys.end(), s.y.begin(), s.y.end());
  }
  const Axis ax = make_axis(xs, opts.log_x);
  const Axis ay = make_axis(ys, opts.log_y);
  const double pw = opts.width - kMarginLeft - kMarginRight;
  const double ph = opts.height - kMarginTop - kMarginBottom;
  auto px = [&](double v) { return kMarginLeft + ax.t(v) * pw; };
  auto py = [&](double v) { return opts.height - kMarginBottom - ay.t(v) * ph; };

  std::ostringstream svg;
  frame(svg, opts);
  for (double v : {ax.lo, ax.hi}) {
    svg << "<text x=\"" << px(v) << "\" y=\"" << opts.height - kMarginBottom + 16 << "\" text-anchor=\"middle\">"
        << num(v) << "</text>\n";
  }
  for (double v : {ay.lo, ay.hi}) {
    svg << "<text x=\"" << kMarginLeft - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << num(v)
        << "</text>\n";
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kPalette[i % std::size(kPalette)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t j = 0; j < s.x.size(); ++j) {
      if ((opts.log_x && !(s.x[j] > 0.0)) || (opts.log_y && !(s.y[j] > 0.0))) continue;
      svg << px(s.x[j]) << "," << py(s.y[j]) << " ";
    }
    svg << "\"/>\n";
    const int ly = kMarginTop + 16 * static_cast<int>(i);
    svg << "<rect x=\"" << opts.width - kMarginRight - 150 << "\" y=\"" << ly - 9 << "\" width=\"12\" height=\"3\" fill=\""
        << color << "\"/>\n<text x=\"" << opts.width - kMarginRight - 132 << "\" y=\"" << ly - 4 << "\">"
        << escape(s.name) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string bar_chart(const std::vector<std::string>& labels, const std::vector<double>& values,
                      const std::vector<double>& errors, const ChartOptions& opts) {
  if (labels.size() != values.size() || (!errors.empty() && errors.size() != values.size())) {
    throw std::invalid_argument("bar_chart: labels, values and errors must have equal length");
  }
  if (values.empty()) throw std::invalid_argument("bar_chart: no bars");
  double top = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) top = std::max(top, values[i] + (errors.empty() ? 0.0 : errors[i]));
  if (top <= 0.0) top = 1.0;
  const double pw = opts.width - kMarginLeft - kMarginRight;
  const double ph = opts.height - kMarginTop - kMarginBottom;
  const double slot = pw / static_cast<double>(values.size());
  const double base = opts.height - kMarginBottom;

  std::ostringstream svg;
  frame(svg, opts);
  svg << "<text x=\"" << kMarginLeft - 6 << "\" y=\"" << kMarginTop + 4 << "\" text-anchor=\"end\">" << num(top)
      << "</text>\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double h = std::max(values[i], 0.0) / top * ph;
    const double x = kMarginLeft + slot * (static_cast<double>(i) + 0.2);
    svg << "<rect x=\"" << x << "\" y=\"" << base - h << "\" width=\"" << slot * 0.6 << "\" height=\"" << h
        << "\" fill=\"" << kPalette[i % std::size(kPalette)] << "\"/>\n";
    if (!errors.empty()) {
      const double cx = x + slot * 0.3;
      const double e = errors[i] / top * ph;
      svg << "<line x1=\"" << cx << "\" y1=\"" << base - h - e << "\" x2=\"" << cx << "\" y2=\"" << base - h + e
          << "\" stroke=\"black\"/>\n";
    }
    svg << "<text x=\"" << x + slot * 0.3 << "\" y=\"" << base + 16 << "\" text-anchor=\"middle\">" << escape(labels[i])
        << "</text>\n<text x=\"" << x + slot * 0.3 << "\" y=\"" << base - h - 4 << "\" text-anchor=\"middle\">"
        << num(values[i]) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace trail::cli
