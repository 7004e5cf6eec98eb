#include "eer/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace eer {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 170.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;
constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void include(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (lo > hi) lo = 0.0, hi = 1.0;
    if (lo == hi) lo -= 0.5, hi += 0.5;
  }
  double map(double v, double a, double b) const { return a + (v - lo) / (hi - lo) * (b - a); }
};

void header(std::ostringstream& os, const std::string& title) {
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << num(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
     << xml_escape(title) << "</text>\n";
}

}  // namespace

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string render_line_chart(const LineChart& chart) {
  Range xr, yr;
  for (const Series& s : chart.series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("render_line_chart: x/y length mismatch");
    for (double v : s.x) xr.include(v);
    for (double v : s.y) yr.include(v);
  }
  xr.finish();
  yr.finish();

  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  std::ostringstream os;
  header(os, chart.title);
  os << "<g stroke=\"black\" stroke-width=\"1\">\n"
     << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x1) << "\" y2=\"" << num(y0) << "\"/>\n"
     << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x0) << "\" y2=\"" << num(y1) << "\"/>\n"
     << "</g>\n";

  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double xv = xr.lo + (xr.hi - xr.lo) * i / kTicks;
    const double yv = yr.lo + (yr.hi - yr.lo) * i / kTicks;
    const double px = xr.map(xv, x0, x1);
    const double py = yr.map(yv, y0, y1);
    os << "<line x1=\"" << num(px) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(px) << "\" y2=\""
       << num(y0 + 5) << "\" stroke=\"black\"/>\n"
       << "<text x=\"" << num(px) << "\" y=\"" << num(y0 + 18) << "\" text-anchor=\"middle\">"
       << tick_label(xv) << "</text>\n"
       << "<line x1=\"" << num(x0 - 5) << "\" y1=\"" << num(py) << "\" x2=\"" << num(x0) << "\" y2=\""
       << num(py) << "\" stroke=\"black\"/>\n"
       << "<text x=\"" << num(x0 - 8) << "\" y=\"" << num(py + 4) << "\" text-anchor=\"end\">"
       << tick_label(yv) << "</text>\n";
  }
  os << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(kHeight - 16)
     << "\" text-anchor=\"middle\">" << xml_escape(chart.x_label) << "</text>\n"
     << "<text x=\"18\" y=\"" << num((y0 + y1) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
     << num((y0 + y1) / 2) << ")\">" << xml_escape(chart.y_label) << "</text>\n";

  for (std::size_t i = 0; i < chart.series.size(); ++i) {
    const Series& s = chart.series[i];
    const char* color = kPalette[i % kPalette.size()];
    std::ostringstream points;
    for (std::size_t j = 0; j < s.x.size(); ++j) {
      if (!std::isfinite(s.x[j]) || !std::isfinite(s.y[j])) continue;
      points << (points.tellp() > 0 ? " " : "") << num(xr.map(s.x[j], x0, x1)) << ','
             << num(yr.map(s.y[j], y0, y1));
    }
    if (points.tellp() > 0) {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\""
         << points.str() << "\"/>\n";
    }
    const double ly = kTop + 10 + 20.0 * static_cast<double>(i);
    os << "<line x1=\"" << num(x1 + 15) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(x1 + 40)
       << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << num(x1 + 46) << "\" y=\"" << num(ly + 4) << "\">" << xml_escape(s.name)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string render_heatmap(const std::string& title, const std::vector<double>& x_coords,
                           const std::vector<double>& y_coords, const std::vector<double>& values) {
  if (values.size() != x_coords.size() * y_coords.size()) {
    throw std::invalid_argument("render_heatmap: value count does not match the grid");
  }
  Range vr, xr, yr;
  for (double v : values) vr.include(v);
  for (double v : x_coords) xr.include(v);
  for (double v : y_coords) yr.include(v);
  vr.finish();
  xr.finish();
  yr.finish();

  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  const std::size_t nx = std::max<std::size_t>(x_coords.size(), 1);
  const std::size_t ny = std::max<std::size_t>(y_coords.size(), 1);
  const double cw = (x1 - x0) / static_cast<double>(nx);
  const double ch = (y0 - y1) / static_cast<double>(ny);

  std::ostringstream os;
  header(os, title);
  for (std::size_t r = 0; r < y_coords.size(); ++r) {
    for (std::size_t c = 0; c < x_coords.size(); ++c) {
      const double v = values[r * x_coords.size() + c];
      const double t = std::isfinite(v) ? vr.map(v, 0.0, 1.0) : 1.0;
      const int red = static_cast<int>(std::lround(255 * t));
      const int blue = static_cast<int>(std::lround(255 * (1 - t)));
      os << "<rect x=\"" << num(x0 + cw * static_cast<double>(c)) << "\" y=\""
         << num(y0 - ch * static_cast<double>(r + 1)) << "\" width=\"" << num(cw) << "\" height=\""
         << num(ch) << "\" fill=\"rgb(" << red << ",64," << blue << ")\"/>\n";
    }
  }
  os << "<text x=\"" << num(x0) << "\" y=\"" << num(y0 + 18) << "\">" << tick_label(xr.lo) << "</text>\n"
     << "<text x=\"" << num(x1) << "\" y=\"" << num(y0 + 18) << "\" text-anchor=\"end\">"
     << tick_label(xr.hi) << "</text>\n"
     << "<text x=\"" << num(x0 - 8) << "\" y=\"" << num(y0) << "\" text-anchor=\"end\">"
     << tick_label(yr.lo) << "</text>\n"
     << "<text x=\"" << num(x0 - 8) << "\" y=\"" << num(y1 + 10) << "\" text-anchor=\"end\">"
     << tick_label(yr.hi) << "</text>\n"
     << "<text x=\"" << num(x1 + 15) << "\" y=\"" << num(kTop + 10) << "\">max " << tick_label(vr.hi)
     << "</text>\n"
     << "<text x=\"" << num(x1 + 15) << "\" y=\"" << num(kTop + 30) << "\">min " << tick_label(vr.lo)
     << "</text>\n"
     << "</svg>\n";
  return os.str();
}

}  // namespace eer
