#pragma once

// SVG figures rendered from result tables alone.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "csv.hpp"

namespace mktfrag {

namespace svg {

inline const char* class_color(std::size_t c) {
  static const char* colors[] = {"#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#8c564b"};
  return colors[c % 6];
}

/// Linear map from data coordinates to a square plot area.
struct Frame {
  double x0, x1, y0, y1;
  double left = 60, top = 30, width = 400, height = 400;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * width; }
  double py(double y) const { return top + height - (y - y0) / (y1 - y0) * height; }
};

inline std::string tick(double x) {
  std::ostringstream os;
  os << std::setprecision(3) << (std::abs(x) < 1e-12 ? 0.0 : x);
  return os.str();
}

inline std::string header(double w, double h) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
     << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return os.str();
}

inline std::string axes(const Frame& f, const std::string& xlabel, const std::string& ylabel) {
  std::ostringstream os;
  os << "<rect x=\"" << f.left << "\" y=\"" << f.top << "\" width=\"" << f.width << "\" height=\"" << f.height
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double x = f.x0 + (f.x1 - f.x0) * k / 4.0, y = f.y0 + (f.y1 - f.y0) * k / 4.0;
    os << "<text x=\"" << f.px(x) << "\" y=\"" << f.top + f.height + 16 << "\" text-anchor=\"middle\">"
       << tick(x) << "</text>\n";
    os << "<text x=\"" << f.left - 6 << "\" y=\"" << f.py(y) + 4 << "\" text-anchor=\"end\">"
       << tick(y) << "</text>\n";
  }
  os << "<text x=\"" << f.left + f.width / 2 << "\" y=\"" << f.top + f.height + 34 << "\" text-anchor=\"middle\">"
     << xlabel << "</text>\n";
  os << "<text x=\"14\" y=\"" << f.top + f.height / 2 << "\" transform=\"rotate(-90 14 " << f.top + f.height / 2
     << ")\" text-anchor=\"middle\">" << ylabel << "</text>\n";
  return os.str();
}

/// Boundaries of the three preference zones and their market labels.
inline std::string zones(const Frame& f) {
  std::ostringstream os;
  const double big = std::max({std::abs(f.x0), std::abs(f.x1), std::abs(f.y0), std::abs(f.y1)});
  auto line = [&](double xa, double ya, double xb, double yb) {
    os << "<line x1=\"" << f.px(xa) << "\" y1=\"" << f.py(ya) << "\" x2=\"" << f.px(xb) << "\" y2=\"" << f.py(yb)
       << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
  };
  line(0, 0, 0, big);
  line(0, 0, big, 0);
  line(0, 0, -big, -big);
  auto label = [&](double x, double y, int m) {
    os << "<text x=\"" << f.px(x) << "\" y=\"" << f.py(y) << "\" fill=\"#555\" font-size=\"16\">" << m << "</text>\n";
  };
  label(0.5 * f.x1, 0.5 * f.y1, 1);
  label(0.6 * f.x0, 0.3 * f.y1, 2);
  label(0.3 * f.x1, 0.6 * f.y0, 3);
  return os.str();
}

inline std::string circle(double x, double y, double r, const std::string& color, bool filled) {
  std::ostringstream os;
  os << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"" << r << "\" stroke=\"" << color << "\" fill=\""
     << (filled ? color : "white") << "\"/>\n";
  return os.str();
}

inline std::string star(double x, double y, double r, const std::string& color, bool filled) {
  std::ostringstream os;
  os << "<polygon points=\"";
  for (int k = 0; k < 10; ++k) {
    const double a = -M_PI / 2 + k * M_PI / 5;
    const double rr = k % 2 ? 0.45 * r : r;
    os << x + rr * std::cos(a) << ',' << y + rr * std::sin(a) << ' ';
  }
  os << "\" stroke=\"" << color << "\" fill=\"" << (filled ? color : "white") << "\"/>\n";
  return os.str();
}

}  // namespace svg

/// Heat map of an attraction histogram table, with the preference zones.
inline std::string render_histogram_svg(const Table& hist, const std::string& title) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, top = 0.0;
  for (std::size_t r = 0; r < hist.rows.size(); ++r) {
    lo = std::min({lo, hist.number(r, "dA2_lo"), hist.number(r, "dA3_lo")});
    hi = std::max({hi, hist.number(r, "dA2_hi"), hist.number(r, "dA3_hi")});
    top = std::max(top, hist.number(r, "count"));
  }
  if (hist.rows.empty()) lo = -1, hi = 1;
  const double span = std::max(std::abs(lo), std::abs(hi)) * 1.1;
  svg::Frame f{-span, span, -span, span};
  std::ostringstream os;
  os << svg::header(500, 480);
  os << "<text x=\"260\" y=\"18\" text-anchor=\"middle\">" << title << "</text>\n";
  for (std::size_t r = 0; r < hist.rows.size(); ++r) {
    const double x0 = f.px(hist.number(r, "dA2_lo")), x1 = f.px(hist.number(r, "dA2_hi"));
    const double y0 = f.py(hist.number(r, "dA3_hi")), y1 = f.py(hist.number(r, "dA3_lo"));
    const double v = std::sqrt(hist.number(r, "count") / top);
    const int shade = static_cast<int>(std::round(255 * (1.0 - v)));
    os << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << std::max(0.5, x1 - x0) << "\" height=\""
       << std::max(0.5, y1 - y0) << "\" fill=\"rgb(" << shade << ',' << shade << ",255)\"/>\n";
  }
  os << svg::zones(f) << svg::axes(f, "A1 - A2", "A1 - A3") << "</svg>\n";
  return os.str();
}

/// f_m against rescaled time for every market column of a series table.
inline std::string render_series_svg(const Table& series, const std::string& title) {
  std::vector<std::size_t> cols;
  for (std::size_t k = 0; k < series.header.size(); ++k)
    if (series.header[k].rfind("f_", 0) == 0) cols.push_back(k);
  double t1 = 1e-12, ylo = std::numeric_limits<double>::infinity(), yhi = -ylo;
  for (std::size_t r = 0; r < series.rows.size(); ++r) {
    t1 = std::max(t1, series.number(r, "t"));
    for (auto k : cols)
      if (!series.rows[r][k].empty()) {
        const double y = std::stod(series.rows[r][k]);
        ylo = std::min(ylo, y);
        yhi = std::max(yhi, y);
      }
  }
  if (!(yhi > ylo)) ylo = 0.0, yhi = 2.0;
  const double pad = 0.05 * (yhi - ylo);
  svg::Frame f{0.0, t1, ylo - pad, yhi + pad, 60, 30, 500, 300};
  std::ostringstream os;
  os << svg::header(600, 390);
  os << "<text x=\"310\" y=\"18\" text-anchor=\"middle\">" << title << "</text>\n";
  for (std::size_t c = 0; c < cols.size(); ++c) {
    os << "<polyline fill=\"none\" stroke=\"" << svg::class_color(c + 1) << "\" points=\"";
    for (std::size_t r = 0; r < series.rows.size(); ++r)
      if (!series.rows[r][cols[c]].empty())
        os << f.px(series.number(r, "t")) << ',' << f.py(std::stod(series.rows[r][cols[c]])) << ' ';
    os << "\"/>\n";
    os << "<text x=\"" << f.left + f.width + 5 << "\" y=\"" << f.top + 14 * (c + 1) << "\" fill=\""
       << svg::class_color(c + 1) << "\">" << series.header[cols[c]] << "</text>\n";
  }
  os << svg::axes(f, "t = n r", "buyers / sellers") << "</svg>\n";
  return os.str();
}

/// Flow diagram: normalised drift arrows plus fixed-point glyphs (filled
/// circle stable, empty circle saddle, cross unstable).
inline std::string render_flow_svg(const Table& flow, const Table& points, const std::string& title) {
  double span = 1e-9;
  for (std::size_t r = 0; r < flow.rows.size(); ++r)
    span = std::max({span, std::abs(flow.number(r, "dA2")), std::abs(flow.number(r, "dA3"))});
  svg::Frame f{-span, span, -span, span};
  const double n = std::max(2.0, std::sqrt(static_cast<double>(flow.rows.size())));
  const double len = 0.4 * f.width / n;
  std::ostringstream os;
  os << svg::header(500, 480);
  os << "<text x=\"260\" y=\"18\" text-anchor=\"middle\">" << title << "</text>\n";
  for (std::size_t r = 0; r < flow.rows.size(); ++r) {
    const double x = f.px(flow.number(r, "dA2")), y = f.py(flow.number(r, "dA3"));
    const double u = flow.number(r, "mu2"), v = flow.number(r, "mu3");
    const double m = std::hypot(u, v);
    if (!(m > 0.0)) continue;
    const double dx = len * u / m, dy = -len * v / m;
    os << "<line x1=\"" << x << "\" y1=\"" << y << "\" x2=\"" << x + dx << "\" y2=\"" << y + dy
       << "\" stroke=\"#4a6\" stroke-width=\"1\"/>\n";
    os << "<circle cx=\"" << x + dx << "\" cy=\"" << y + dy << "\" r=\"1.2\" fill=\"#4a6\"/>\n";
  }
  for (std::size_t r = 0; r < points.rows.size(); ++r) {
    const double x = f.px(points.number(r, "dA2")), y = f.py(points.number(r, "dA3"));
    const std::string& s = points.cell(r, "stability");
    if (s == "stable")
      os << svg::circle(x, y, 5, "#d62728", true);
    else if (s == "saddle")
      os << svg::circle(x, y, 5, "#1f77b4", false);
    else
      os << "<path d=\"M" << x - 5 << ' ' << y - 5 << " L" << x + 5 << ' ' << y + 5 << " M" << x - 5 << ' ' << y + 5
         << " L" << x + 5 << ' ' << y - 5 << "\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n";
  }
  os << svg::zones(f) << svg::axes(f, "A1 - A2", "A1 - A3") << "</svg>\n";
  return os.str();
}

/// Phase diagram of triangle codes: at every node a small triangle with
/// corners for markets 1 (left), 2 (top), 3 (right); filled circles are large
/// peaks, empty circles small peaks, stars indifferent peaks, one colour per class.
inline std::string render_phase_svg(const Table& phase, const std::string& xlabel, const std::string& title) {
  std::vector<std::size_t> code_cols;
  for (std::size_t k = 0; k < phase.header.size(); ++k)
    if (phase.header[k].rfind("code_class", 0) == 0) code_cols.push_back(k);
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  std::map<double, int> xs, ys;
  for (std::size_t r = 0; r < phase.rows.size(); ++r) {
    const double x = phase.number(r, "bias"), y = phase.number(r, "inv_beta");
    x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
    xs[x] = 0, ys[y] = 0;
  }
  if (phase.rows.empty()) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  const double cx = (x1 - x0) / std::max<std::size_t>(1, xs.size() - 1), cy = (y1 - y0) / std::max<std::size_t>(1, ys.size() - 1);
  svg::Frame f{x0 - 0.5 * cx, x1 + 0.5 * cx, y0 - 0.5 * cy, y1 + 0.5 * cy, 60, 30, 600, 600};
  const double cell = std::min(f.width / std::max<std::size_t>(1, xs.size()), f.height / std::max<std::size_t>(1, ys.size()));
  const double side = 0.8 * cell;
  std::ostringstream os;
  os << svg::header(720, 680);
  os << "<text x=\"360\" y=\"18\" text-anchor=\"middle\">" << title << "</text>\n";
  for (std::size_t r = 0; r < phase.rows.size(); ++r) {
    const double px = f.px(phase.number(r, "bias")), py = f.py(phase.number(r, "inv_beta"));
    const double h = side * std::sqrt(3.0) / 2;
    const double c1x = px - side / 2, c1y = py + h / 3, c2x = px, c2y = py - 2 * h / 3, c3x = px + side / 2, c3y = py + h / 3;
    bool any_strong = false;
    for (std::size_t c = 0; c < code_cols.size(); ++c) {
      const std::string& code = phase.rows[r][code_cols[c]];
      int large = 0;
      for (char ch : code) large += ch == 'L';
      any_strong = any_strong || large >= 2;
    }
    os << "<polygon points=\"" << c1x << ',' << c1y << ' ' << c2x << ',' << c2y << ' ' << c3x << ',' << c3y
       << "\" fill=\"" << (any_strong ? "#ddd" : "none") << "\" stroke=\"#999\" stroke-width=\"0.5\"/>\n";
    for (std::size_t c = 0; c < code_cols.size(); ++c) {
      const std::string& code = phase.rows[r][code_cols[c]];
      if (code == "undetermined" || code == "out-of-range") {
        os << "<text x=\"" << px << "\" y=\"" << py + 3 << "\" text-anchor=\"middle\" font-size=\"8\">"
           << (code == "undetermined" ? "?" : "-") << "</text>\n";
        continue;
      }
      const double off = (static_cast<double>(c) - 0.5 * (code_cols.size() - 1)) * 0.12 * side;
      std::size_t pos = 0;
      while (pos < code.size()) {
        const std::size_t end = std::min(code.find('+', pos), code.size());
        const std::string e = code.substr(pos, end - pos);
        pos = end + 1;
        if (e.size() < 2) continue;
        const bool big = e.back() == 'L';
        const double rr = 0.07 * side;
        const std::string col = svg::class_color(c);
        if (e[0] == '*') {
          os << svg::star(px + off, py, 1.6 * rr, col, big);
        } else {
          const int m = e[0] - '0';
          const double gx = m == 1 ? c1x : m == 2 ? c2x : c3x, gy = m == 1 ? c1y : m == 2 ? c2y : c3y;
          os << svg::circle(gx + 0.3 * (px - gx) + off, gy + 0.3 * (py - gy), rr, col, big);
        }
      }
    }
  }
  os << svg::axes(f, xlabel, "1 / beta") << "</svg>\n";
  return os.str();
}

}  // namespace mktfrag
