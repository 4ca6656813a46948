#pragma once

// SVG 1.1 charts for scenario results: a faceted heatmap of %Case1 and a
// four-panel curve figure with a reference band around 5%.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bssr/csv.hpp"
#include "bssr/errors.hpp"
#include "bssr/mc_engine.hpp"

namespace bssr {

// Heatmap ramp: white at or below 5.0 %Case1, darkest at or above 6.5.
inline constexpr double kRampLow = 5.0;
inline constexpr double kRampHigh = 6.5;

struct RgbColor {
  int r, g, b;
};

inline RgbColor heat_color(double pct) {
  constexpr RgbColor low{255, 255, 255};
  constexpr RgbColor high{103, 0, 13};
  const double t = std::clamp((pct - kRampLow) / (kRampHigh - kRampLow), 0.0, 1.0);
  auto mix = [t](int a, int b) {
    return static_cast<int>(std::lround(a + (b - a) * t));
  };
  return {mix(low.r, high.r), mix(low.g, high.g), mix(low.b, high.b)};
}

// Half-width (in percentage points) of the 95% band for a rate of 5%.
inline double reference_half_width(long replications) {
  return 1.96 * 100.0 * std::sqrt(0.05 * 0.95 / static_cast<double>(replications));
}

namespace detail {

class SvgDoc {
 public:
  SvgDoc(double width, double height) : width_(width), height_(height) {}

  void raw(const std::string& s) { body_ += s; }

  void rect(double x, double y, double w, double h, const std::string& fill,
            const std::string& extra = "") {
    body_ += fmt("<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"", x, y, w, h) +
             fill + "\"" + extra + "/>\n";
  }

  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            const std::string& extra = "") {
    body_ += fmt("<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"", x1, y1, x2, y2) +
             stroke + "\"" + extra + "/>\n";
  }

  void text(double x, double y, const std::string& s, const std::string& anchor = "start",
            double size = 11) {
    body_ += fmt("<text x=\"%.2f\" y=\"%.2f\" font-size=\"%.1f\" text-anchor=\"", x, y, size) +
             anchor + "\">" + s + "</text>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke) {
    std::string p;
    for (const auto& [x, y] : pts) p += fmt("%.2f,%.2f ", x, y);
    if (!p.empty()) p.pop_back();
    body_ += "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"1.5\" points=\"" + p +
             "\"/>\n";
    for (const auto& [x, y] : pts) {
      body_ += fmt("<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2\" fill=\"", x, y) + stroke + "\"/>\n";
    }
  }

  std::string str() const {
    return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
           "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" " +
           fmt("width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\"", width_, height_, width_,
               height_) +
           " font-family=\"Helvetica, Arial, sans-serif\">\n"
           "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" +
           body_ + "</svg>\n";
  }

  template <typename... Args>
  static std::string fmt(const char* pattern, Args... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
  }

 private:
  double width_;
  double height_;
  std::string body_;
};

inline std::string hex(RgbColor c) { return SvgDoc::fmt("#%02x%02x%02x", c.r, c.g, c.b); }

inline std::optional<double> n_max_ratio_key(const ScenarioResult& r) {
  const auto& rule = r.scenario.rule;
  if (!rule.n_max) return std::nullopt;
  return std::round(10.0 * static_cast<double>(*rule.n_max) / r.scenario.design.n1_stage1) / 10.0;
}

inline bool same_key(const std::optional<double>& a, const std::optional<double>& b) {
  if (!a || !b) return !a && !b;
  return std::fabs(*a - *b) < 1e-9;
}

inline std::string ratio_label(const std::optional<double>& r) {
  return r ? SvgDoc::fmt("%.1f", *r) : std::string("inf");
}

template <typename T>
std::vector<T> pick_preferred(const std::vector<T>& present, const std::vector<T>& preferred,
                              std::size_t limit, auto equal) {
  std::vector<T> out;
  for (const auto& p : preferred) {
    for (const auto& v : present) {
      if (equal(v, p)) {
        out.push_back(v);
        break;
      }
    }
  }
  if (out.empty()) {
    for (const auto& v : present) {
      if (out.size() == limit) break;
      out.push_back(v);
    }
  }
  return out;
}

}  // namespace detail

// Facets: columns are stage-1 sizes (10, 15, 20, 30 when present), rows are
// n_max ratios (2, 3, 4, inf when present). Inside a facet x is delta0, y is
// the n_min ratio and the fill encodes %Case1.
inline std::string render_heatmap_svg(const std::vector<ScenarioResult>& results) {
  using detail::SvgDoc;
  if (results.empty()) throw IoError("heatmap: no results");

  std::vector<int> sizes;
  std::vector<std::optional<double>> rows;
  for (const auto& r : results) {
    const int n = r.scenario.design.n1_stage1;
    if (std::find(sizes.begin(), sizes.end(), n) == sizes.end()) sizes.push_back(n);
    const auto key = detail::n_max_ratio_key(r);
    if (std::none_of(rows.begin(), rows.end(), [&](const auto& k) { return detail::same_key(k, key); })) {
      rows.push_back(key);
    }
  }
  std::sort(sizes.begin(), sizes.end());
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a && (!b || *a < *b);
  });
  const auto columns = detail::pick_preferred<int>(sizes, {10, 15, 20, 30}, 4,
                                                   [](int a, int b) { return a == b; });
  const auto row_keys = detail::pick_preferred<std::optional<double>>(
      rows, {2.0, 3.0, 4.0, std::nullopt}, 4, detail::same_key);

  constexpr double facet_w = 240, facet_h = 150, left = 70, top = 60, gap_x = 30, gap_y = 45;
  const double width = left + columns.size() * (facet_w + gap_x) + 20;
  const double height = top + row_keys.size() * (facet_h + gap_y) + 70;
  SvgDoc doc(width, height);
  doc.text(width / 2, 24, "Percent Case 1 by effect size (x) and n_min ratio (y)", "middle", 14);

  for (std::size_t ci = 0; ci < columns.size(); ++ci) {
    for (std::size_t ri = 0; ri < row_keys.size(); ++ri) {
      std::vector<const ScenarioResult*> cell;
      for (const auto& r : results) {
        if (r.scenario.design.n1_stage1 == columns[ci] &&
            detail::same_key(detail::n_max_ratio_key(r), row_keys[ri])) {
          cell.push_back(&r);
        }
      }
      const double fx = left + ci * (facet_w + gap_x);
      const double fy = top + ri * (facet_h + gap_y);
      doc.text(fx + facet_w / 2, fy - 6,
               SvgDoc::fmt("n~ = %d, n_max ratio = ", columns[ci]) +
                   detail::ratio_label(row_keys[ri]),
               "middle");
      doc.rect(fx, fy, facet_w, facet_h, "none", " stroke=\"#888\"");
      if (cell.empty()) continue;

      std::vector<double> xs;
      std::vector<long> ys;
      for (const auto* r : cell) {
        xs.push_back(r->scenario.design.delta_up);
        ys.push_back(r->scenario.rule.n_min);
      }
      std::sort(xs.begin(), xs.end());
      xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
      std::sort(ys.begin(), ys.end());
      ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
      const double cw = facet_w / xs.size();
      const double chh = facet_h / ys.size();
      for (const auto* r : cell) {
        const auto xi = std::lower_bound(xs.begin(), xs.end(), r->scenario.design.delta_up) - xs.begin();
        const auto yi = std::lower_bound(ys.begin(), ys.end(), r->scenario.rule.n_min) - ys.begin();
        const double y = fy + facet_h - (yi + 1) * chh;
        doc.raw(SvgDoc::fmt("<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"",
                            fx + xi * cw, y, cw, chh) +
                detail::hex(heat_color(r->pct_case[0])) +
                SvgDoc::fmt("\"><title>delta0 %.2f, n_min %ld: %.4f%%</title></rect>\n",
                            r->scenario.design.delta_up, r->scenario.rule.n_min, r->pct_case[0]));
      }
      doc.text(fx, fy + facet_h + 14, SvgDoc::fmt("%.2f", xs.front()), "start", 9);
      doc.text(fx + facet_w, fy + facet_h + 14, SvgDoc::fmt("%.2f", xs.back()), "end", 9);
      const double n = columns[ci];
      doc.text(fx - 4, fy + facet_h - 2, SvgDoc::fmt("%.1f", ys.front() / n), "end", 9);
      doc.text(fx - 4, fy + 9, SvgDoc::fmt("%.1f", ys.back() / n), "end", 9);
    }
  }

  // Legend.
  const double ly = height - 40;
  constexpr int steps = 30;
  for (int k = 0; k < steps; ++k) {
    const double pct = kRampLow + (kRampHigh - kRampLow) * k / (steps - 1);
    doc.rect(left + k * 8.0, ly, 8.0, 12, detail::hex(heat_color(pct)));
  }
  doc.rect(left, ly, steps * 8.0, 12, "none", " stroke=\"#888\"");
  doc.text(left, ly + 26, SvgDoc::fmt("%.1f%%", kRampLow), "start", 10);
  doc.text(left + steps * 8.0, ly + 26, SvgDoc::fmt("%.1f%%", kRampHigh), "end", 10);
  return doc.str();
}

// Panels A to D: %Case1, %Case2, %(Case1 + Case2) and a close-up of the
// latter, each against delta0 with dashed lines at 5% +- 1.96 binomial SE.
inline std::string render_curve_svg(const std::vector<ScenarioResult>& results,
                                    const std::string& title = "") {
  using detail::SvgDoc;
  if (results.empty()) throw IoError("curve: no results");
  std::vector<const ScenarioResult*> sorted;
  for (const auto& r : results) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
    return a->scenario.design.delta_up < b->scenario.design.delta_up;
  });
  const double half = reference_half_width(sorted.front()->replications());
  const double x_min = sorted.front()->scenario.design.delta_up;
  const double x_max = std::max(sorted.back()->scenario.design.delta_up, x_min + 1e-9);

  struct Panel {
    const char* label;
    const char* ylabel;
    double (*value)(const ScenarioResult&);
    bool close_up;
  };
  const Panel panels[4] = {
      {"A", "Percent Case 1", [](const ScenarioResult& r) { return r.pct_case[0]; }, false},
      {"B", "Percent Case 2", [](const ScenarioResult& r) { return r.pct_case[1]; }, false},
      {"C", "Percent Case 1 or Case 2", [](const ScenarioResult& r) { return r.ni_rejection_pct; }, false},
      {"D", "Percent Case 1 or Case 2 (close-up)",
       [](const ScenarioResult& r) { return r.ni_rejection_pct; }, true},
  };

  constexpr double pw = 330, ph = 220, left = 60, top = 50, gap_x = 70, gap_y = 70;
  SvgDoc doc(left + 2 * (pw + gap_x), top + 2 * (ph + gap_y));
  if (!title.empty()) doc.text(left + pw + gap_x / 2, 22, title, "middle", 14);

  for (int p = 0; p < 4; ++p) {
    const auto& panel = panels[p];
    const double px = left + (p % 2) * (pw + gap_x);
    const double py = top + (p / 2) * (ph + gap_y);
    double y_lo = 0.0;
    double y_hi = 7.0;
    for (const auto* r : sorted) y_hi = std::max(y_hi, 1.1 * panel.value(*r));
    if (panel.close_up) {
      y_lo = 5.0 - 3.0 * half;
      y_hi = 5.0 + 3.0 * half;
      for (const auto* r : sorted) {
        const double v = panel.value(*r);
        if (v >= 4.0) y_hi = std::max(y_hi, v + 0.5 * half);
      }
      y_lo = std::max(0.0, std::min(y_lo, 4.0));
    }
    auto sx = [&](double x) { return px + (x - x_min) / (x_max - x_min) * pw; };
    auto sy = [&](double y) {
      return py + ph - (std::clamp(y, y_lo, y_hi) - y_lo) / (y_hi - y_lo) * ph;
    };
    doc.rect(px, py, pw, ph, "none", " stroke=\"#444\"");
    doc.text(px, py - 8, std::string("Panel ") + panel.label + ": " + panel.ylabel, "start", 12);
    for (double ref : {5.0 - half, 5.0 + half}) {
      doc.line(px, sy(ref), px + pw, sy(ref), "red", " stroke-dasharray=\"6,4\"");
    }
    std::vector<std::pair<double, double>> pts;
    for (const auto* r : sorted) {
      const double v = panel.value(*r);
      if (panel.close_up && v < y_lo) continue;
      pts.emplace_back(sx(r->scenario.design.delta_up), sy(v));
    }
    doc.polyline(pts, "#1f4e9c");
    doc.text(px, py + ph + 16, SvgDoc::fmt("%.2f", x_min), "start", 10);
    doc.text(px + pw, py + ph + 16, SvgDoc::fmt("%.2f", x_max), "end", 10);
    doc.text(px + pw / 2, py + ph + 30, "effect size", "middle", 10);
    doc.text(px - 4, py + ph, SvgDoc::fmt("%.2f", y_lo), "end", 10);
    doc.text(px - 4, py + 10, SvgDoc::fmt("%.2f", y_hi), "end", 10);
  }
  return doc.str();
}

inline void write_heatmap_svg(const std::filesystem::path& path,
                              const std::vector<ScenarioResult>& results) {
  write_text_file(path, render_heatmap_svg(results));
}

inline void write_curve_svg(const std::filesystem::path& path,
                            const std::vector<ScenarioResult>& results,
                            const std::string& title = "") {
  write_text_file(path, render_curve_svg(results, title));
}

}  // namespace bssr
