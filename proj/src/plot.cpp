#include "pvqml/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "pvqml/error.hpp"

namespace pvqml::plot {

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

constexpr double kLeft = 70, kRight = 140, kTop = 40, kBottom = 50;

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Frame {
  double x0, x1, y0, y1;
  double w, h;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * w; }
  double py(double y) const { return kTop + h - (y - y0) / (y1 - y0) * h; }
};

void widen(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
}

void header(std::ostringstream& os, const Axes& a) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << a.width << "\" height=\"" << a.height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << a.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
     << escape(a.title) << "</text>\n";
}

void axes_box(std::ostringstream& os, const Axes& a, const Frame& f, bool x_ticks) {
  os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << f.w << "\" height=\"" << f.h
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = f.y0 + (f.y1 - f.y0) * i / 4.0;
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << f.py(y) + 4 << "\" text-anchor=\"end\">" << fmt(y)
       << "</text>\n";
    if (x_ticks) {
      const double x = f.x0 + (f.x1 - f.x0) * i / 4.0;
      os << "<text x=\"" << f.px(x) << "\" y=\"" << kTop + f.h + 16 << "\" text-anchor=\"middle\">"
         << fmt(x) << "</text>\n";
    }
  }
  os << "<text x=\"" << kLeft + f.w / 2 << "\" y=\"" << a.height - 10 << "\" text-anchor=\"middle\">"
     << escape(a.x_label) << "</text>\n"
     << "<text transform=\"translate(16," << kTop + f.h / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(a.y_label) << "</text>\n";
}

void legend(std::ostringstream& os, const Axes& a, const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = kTop + 10 + 18 * static_cast<double>(i);
    os << "<rect x=\"" << a.width - kRight + 12 << "\" y=\"" << y - 9 << "\" width=\"12\" height=\"10\" fill=\""
       << kPalette[i % 8] << "\"/>\n"
       << "<text x=\"" << a.width - kRight + 30 << "\" y=\"" << y << "\">" << escape(names[i]) << "</text>\n";
  }
}

}  // namespace

std::string line_chart(const Axes& axes, const std::vector<Series>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw ShapeError("series '" + s.name + "': x and y lengths differ");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  widen(x0, x1);
  widen(y0, y1);
  const Frame f{x0, x1, y0, y1, axes.width - kLeft - kRight, axes.height - kTop - kBottom};

  std::ostringstream os;
  header(os, axes);
  axes_box(os, axes, f, true);
  std::vector<std::string> names;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    names.push_back(s.name);
    os << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << kPalette[k % 8] << "\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      os << fmt(f.px(s.x[i])) << ',' << fmt(f.py(s.y[i])) << ' ';
    }
    os << "\"/>\n";
  }
  legend(os, axes, names);
  os << "</svg>\n";
  return os.str();
}

std::string bar_chart(const Axes& axes, const std::vector<std::string>& categories,
                      const std::vector<BarGroup>& groups) {
  double y1 = 0.0;
  for (const auto& g : groups) {
    if (g.values.size() != categories.size()) {
      throw ShapeError("bar group '" + g.name + "' needs one value per category");
    }
    for (double v : g.values) {
      if (std::isfinite(v)) y1 = std::max(y1, v);
    }
  }
  if (!(y1 > 0.0)) y1 = 1.0;
  const Frame f{0.0, static_cast<double>(std::max<std::size_t>(categories.size(), 1)), 0.0, y1 * 1.05,
                axes.width - kLeft - kRight, axes.height - kTop - kBottom};

  std::ostringstream os;
  header(os, axes);
  axes_box(os, axes, f, false);
  const double slot = f.w / f.x1;
  const double bar = slot * 0.8 / static_cast<double>(std::max<std::size_t>(groups.size(), 1));
  for (std::size_t c = 0; c < categories.size(); ++c) {
    os << "<text x=\"" << fmt(kLeft + slot * (c + 0.5)) << "\" y=\"" << kTop + f.h + 16
       << "\" text-anchor=\"middle\">" << escape(categories[c]) << "</text>\n";
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const double v = groups[g].values[c];
      if (!std::isfinite(v)) continue;
      const double x = kLeft + slot * c + slot * 0.1 + bar * g;
      os << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(f.py(v)) << "\" width=\"" << fmt(bar)
         << "\" height=\"" << fmt(f.py(0) - f.py(v)) << "\" fill=\"" << kPalette[g % 8] << "\"/>\n";
    }
  }
  std::vector<std::string> names;
  for (const auto& g : groups) names.push_back(g.name);
  legend(os, axes, names);
  os << "</svg>\n";
  return os.str();
}

}  // namespace pvqml::plot
