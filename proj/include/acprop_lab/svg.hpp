#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "acprop_lab/report.hpp"

// Minimal SVG output. Every renderer is a pure function of the CSV table, so
// re-rendering identical CSV text yields identical bytes.

namespace acprop_lab::svg {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

/// Fixed two-decimal coordinates keep the output stable and compact.
inline std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(std::string_view s) {
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

inline const char* palette(std::size_t i) {
  static constexpr const char* kColors[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2",
                                            "#59a14f", "#edc948", "#b07aa1", "#9c755f"};
  return kColors[i % 8];
}

class Canvas {
 public:
  Canvas(double width, double height) : w_(width), h_(height) {}

  void rect(double x, double y, double w, double h, std::string_view fill, std::string_view stroke = "none") {
    body_ << "<rect x=\"" << coord(x) << "\" y=\"" << coord(y) << "\" width=\"" << coord(w) << "\" height=\""
          << coord(h) << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\"/>\n";
  }

  void line(double x1, double y1, double x2, double y2, std::string_view stroke = "#333") {
    body_ << "<line x1=\"" << coord(x1) << "\" y1=\"" << coord(y1) << "\" x2=\"" << coord(x2) << "\" y2=\""
          << coord(y2) << "\" stroke=\"" << stroke << "\"/>\n";
  }

  void text(double x, double y, std::string_view s, int size = 11, std::string_view anchor = "start") {
    body_ << "<text x=\"" << coord(x) << "\" y=\"" << coord(y) << "\" font-size=\"" << size
          << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << escape(s) << "</text>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, std::string_view stroke) {
    if (pts.empty()) return;
    body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) body_ << (i ? " " : "") << coord(pts[i].first) << ',' << coord(pts[i].second);
    body_ << "\"/>\n";
  }

  std::string str() const {
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << coord(w_) << "\" height=\"" << coord(h_)
       << "\" viewBox=\"0 0 " << coord(w_) << ' ' << coord(h_) << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << body_.str() << "</svg>\n";
    return os.str();
  }

 private:
  double w_, h_;
  std::ostringstream body_;
};

/// Leading component of a possibly ';'-joined value.
inline double cell_value(const std::string& s) {
  const auto pos = s.find(';');
  return parse_double(pos == std::string::npos ? s : s.substr(0, pos));
}

/// Converge/diverge matrix, one panel per (variant, beta1): beta2 across, P down.
inline std::string render_sweep(const CsvTable& t) {
  const auto cv = t.column("variant"), cp = t.column("P"), cb2 = t.column("beta2"), cb1 = t.column("beta1"),
             cver = t.column("verdict");
  std::vector<std::string> panels;
  std::vector<double> b2s;
  std::vector<int> Ps;
  for (const auto& r : t.rows) {
    const std::string key = r[cv] + " beta1=" + r[cb1];
    if (std::find(panels.begin(), panels.end(), key) == panels.end()) panels.push_back(key);
    b2s.push_back(parse_double(r[cb2]));
    Ps.push_back(static_cast<int>(parse_double(r[cp])));
  }
  std::sort(b2s.begin(), b2s.end());
  b2s.erase(std::unique(b2s.begin(), b2s.end()), b2s.end());
  std::sort(Ps.begin(), Ps.end());
  Ps.erase(std::unique(Ps.begin(), Ps.end()), Ps.end());

  const double cell = 14.0, left = 50.0, top = 40.0, gap = 60.0;
  const double panel_w = left + cell * static_cast<double>(b2s.size()) + 20.0;
  const double panel_h = top + cell * static_cast<double>(Ps.size()) + gap;
  const std::size_t per_row = std::max<std::size_t>(1, std::min<std::size_t>(panels.size(), 3));
  const std::size_t n_rows = (panels.size() + per_row - 1) / per_row;
  Canvas c(panel_w * static_cast<double>(per_row) + 10.0, panel_h * static_cast<double>(std::max<std::size_t>(n_rows, 1)) + 30.0);
  c.rect(10, 8, 10, 10, "#f28e2b");
  c.text(24, 17, "converge");
  c.rect(90, 8, 10, 10, "#4e79a7");
  c.text(104, 17, "diverge");

  for (std::size_t p = 0; p < panels.size(); ++p) {
    const double ox = panel_w * static_cast<double>(p % per_row);
    const double oy = 30.0 + panel_h * static_cast<double>(p / per_row);
    c.text(ox + left, oy + 18, panels[p], 12);
    for (const auto& r : t.rows) {
      if (r[cv] + " beta1=" + r[cb1] != panels[p]) continue;
      const auto xi = std::lower_bound(b2s.begin(), b2s.end(), parse_double(r[cb2])) - b2s.begin();
      const auto yi = std::lower_bound(Ps.begin(), Ps.end(), static_cast<int>(parse_double(r[cp]))) - Ps.begin();
      c.rect(ox + left + cell * static_cast<double>(xi), oy + top + cell * static_cast<double>(yi), cell - 1, cell - 1,
             r[cver] == "converge" ? "#f28e2b" : "#4e79a7");
    }
    for (std::size_t yi = 0; yi < Ps.size(); ++yi) {
      c.text(ox + left - 6, oy + top + cell * static_cast<double>(yi) + cell - 3, "P=" + std::to_string(Ps[yi]), 9, "end");
    }
    const double base = oy + top + cell * static_cast<double>(Ps.size()) + 12;
    if (!b2s.empty()) {
      c.text(ox + left, base, "beta2=" + num(b2s.front()), 9);
      c.text(ox + left + cell * static_cast<double>(b2s.size()), base, num(b2s.back()), 9, "end");
    }
  }
  return c.str();
}

struct LineSpec {
  std::string x_col;
  std::vector<std::string> y_cols;
  std::vector<std::string> group_cols;
  bool log_x = false;
  bool log_y = false;
};

/// One panel per y column, one polyline per group. Points that cannot be
/// drawn (non-finite, or non-positive on a log axis) are skipped.
inline std::string render_lines(const CsvTable& t, const LineSpec& spec) {
  const auto cx = t.column(spec.x_col);
  std::vector<std::size_t> gcols;
  for (const auto& g : spec.group_cols) gcols.push_back(t.column(g));
  auto group_of = [&](const std::vector<std::string>& r) {
    std::string key;
    for (std::size_t i = 0; i < gcols.size(); ++i) key += (i ? " " : "") + spec.group_cols[i] + "=" + r[gcols[i]];
    return key;
  };
  std::vector<std::string> groups;
  for (const auto& r : t.rows) {
    const auto g = group_of(r);
    if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
  }

  const double pw = 520.0, ph = 240.0, left = 70.0, right = 150.0, top = 30.0, bottom = 40.0;
  Canvas c(left + pw + right, (top + ph + bottom) * static_cast<double>(spec.y_cols.size()));
  auto tx = [&](double v, bool lg) { return lg ? std::log10(v) : v; };
  auto usable = [](double v, bool lg) { return std::isfinite(v) && (!lg || v > 0.0); };

  for (std::size_t k = 0; k < spec.y_cols.size(); ++k) {
    const auto cy = t.column(spec.y_cols[k]);
    const double oy = (top + ph + bottom) * static_cast<double>(k);
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (const auto& r : t.rows) {
      const double x = cell_value(r[cx]), y = cell_value(r[cy]);
      if (!usable(x, spec.log_x) || !usable(y, spec.log_y)) continue;
      xmin = std::min(xmin, tx(x, spec.log_x));
      xmax = std::max(xmax, tx(x, spec.log_x));
      ymin = std::min(ymin, tx(y, spec.log_y));
      ymax = std::max(ymax, tx(y, spec.log_y));
    }
    c.text(left, oy + top - 10, spec.y_cols[k] + (spec.log_y ? " (log10)" : "") + " vs " + spec.x_col +
                                    (spec.log_x ? " (log10)" : ""), 12);
    c.rect(left, oy + top, pw, ph, "none", "#999");
    if (!(xmin <= xmax)) continue;
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) ymax = ymin + 1.0;
    auto px = [&](double v) { return left + (v - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double v) { return oy + top + ph - (v - ymin) / (ymax - ymin) * ph; };
    c.text(left, oy + top + ph + 14, num(xmin), 9);
    c.text(left + pw, oy + top + ph + 14, num(xmax), 9, "end");
    c.text(left - 4, oy + top + ph, num(ymin), 9, "end");
    c.text(left - 4, oy + top + 9, num(ymax), 9, "end");
    for (std::size_t g = 0; g < groups.size(); ++g) {
      std::vector<std::pair<double, double>> pts;
      for (const auto& r : t.rows) {
        if (group_of(r) != groups[g]) continue;
        const double x = cell_value(r[cx]), y = cell_value(r[cy]);
        if (!usable(x, spec.log_x) || !usable(y, spec.log_y)) continue;
        pts.emplace_back(px(tx(x, spec.log_x)), py(tx(y, spec.log_y)));
      }
      c.polyline(pts, palette(g));
      if (!groups[g].empty()) {
        c.line(left + pw + 10, oy + top + 10 + 14.0 * static_cast<double>(g), left + pw + 24,
               oy + top + 10 + 14.0 * static_cast<double>(g), palette(g));
        c.text(left + pw + 28, oy + top + 14 + 14.0 * static_cast<double>(g), groups[g], 9);
      }
    }
  }
  return c.str();
}

/// Plain table of every row.
inline std::string render_table(const CsvTable& t) {
  const double row_h = 16.0, col_w = 110.0;
  Canvas c(col_w * static_cast<double>(t.header.size()) + 20.0, row_h * static_cast<double>(t.rows.size() + 2) + 10.0);
  for (std::size_t j = 0; j < t.header.size(); ++j) c.text(10 + col_w * static_cast<double>(j), 20, t.header[j], 11);
  c.line(10, 25, col_w * static_cast<double>(t.header.size()), 25);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    for (std::size_t j = 0; j < t.rows[i].size(); ++j) {
      const auto& s = t.rows[i][j];
      std::string shown = s;
      if (j > 0) {
        try {
          shown = num(parse_double(s));
        } catch (const std::invalid_argument&) {
        }
      }
      c.text(10 + col_w * static_cast<double>(j), 20 + row_h * static_cast<double>(i + 1) + 4, shown, 10);
    }
  }
  return c.str();
}

/// Picks the rendering from the artifact kind recorded in the metadata line.
inline std::string render(const CsvTable& t) {
  const std::string kind = t.meta.value("artifact", "");
  if (kind == "sweep") return render_sweep(t);
  if (kind == "trajectory") return render_lines(t, {"t", {"x", "step"}, {}, false, false});
  if (kind == "rate") return render_lines(t, {"T", {"mean_grad_sq"}, {"variant", "sigma"}, true, true});
  if (kind == "denom") return render_lines(t, {"step", {"mean_second", "loss"}, {"variant"}, false, false});
  if (kind == "harmonic") return render_lines(t, {"N", {"rel_err"}, {"eta"}, true, true});
  return render_table(t);
}

}  // namespace acprop_lab::svg
