#pragma once

// Globally adaptive 7/15-point Gauss-Kronrod quadrature over a set of
// breakpoints. Integrands that are only piecewise smooth should be split at
// their kinks by the caller so each starting panel is smooth.

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <span>
#include <stdexcept>
#include <vector>

#include "bssr/errors.hpp"

namespace bssr {

struct QuadratureOptions {
  double abs_tolerance = 1e-11;
  double rel_tolerance = 1e-11;
  int max_intervals = 4000;
};

struct QuadratureResult {
  double value = 0.0;
  double abs_error = 0.0;
  int intervals = 0;
  int evaluations = 0;
};

namespace detail {

// Kronrod abscissae; odd indices are the embedded Gauss nodes.
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a;
  double b;
  double value;
  double error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

template <typename F>
Panel gauss_kronrod_15(const F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    const double pair = f(center - dx) + f(center + dx);
    kronrod += kKronrodWeights[j] * pair;
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * pair;
  }
  return {a, b, kronrod * half, std::fabs((kronrod - gauss) * half)};
}

}  // namespace detail

// Integrates f over [points.front(), points.back()], starting from one panel per
// consecutive pair of points. Throws QuadratureError when the interval budget
// runs out before the tolerance max(abs_tol, rel_tol * |I|) is met.
template <typename F>
QuadratureResult integrate(const F& f, std::span<const double> points,
                           const QuadratureOptions& options = {}) {
  if (points.size() < 2) {
    throw std::invalid_argument("integrate: need at least two points");
  }
  if (!std::is_sorted(points.begin(), points.end())) {
    throw std::invalid_argument("integrate: breakpoints must be sorted");
  }
  std::priority_queue<detail::Panel> panels;
  QuadratureResult result;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    if (points[i + 1] <= points[i]) continue;
    const auto panel = detail::gauss_kronrod_15(f, points[i], points[i + 1]);
    result.value += panel.value;
    result.abs_error += panel.error;
    result.evaluations += 15;
    panels.push(panel);
  }
  auto tolerance = [&] {
    return std::max(options.abs_tolerance, options.rel_tolerance * std::fabs(result.value));
  };
  while (!panels.empty() && result.abs_error > tolerance()) {
    if (static_cast<int>(panels.size()) >= options.max_intervals) {
      throw QuadratureError("integrate: interval budget exhausted", result.value,
                            result.abs_error, static_cast<int>(panels.size()));
    }
    const auto worst = panels.top();
    panels.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      throw QuadratureError("integrate: panel cannot be subdivided further", result.value,
                            result.abs_error, static_cast<int>(panels.size()) + 1);
    }
    const auto left = detail::gauss_kronrod_15(f, worst.a, mid);
    const auto right = detail::gauss_kronrod_15(f, mid, worst.b);
    result.value += left.value + right.value - worst.value;
    result.abs_error += left.error + right.error - worst.error;
    result.evaluations += 30;
    panels.push(left);
    panels.push(right);
  }
  // Re-sum to shed the drift of incremental updates.
  double value = 0.0;
  double error = 0.0;
  result.intervals = static_cast<int>(panels.size());
  while (!panels.empty()) {
    value += panels.top().value;
    error += panels.top().error;
    panels.pop();
  }
  result.value = value;
  result.abs_error = error;
  return result;
}

template <typename F>
QuadratureResult integrate(const F& f, double a, double b,
                           const QuadratureOptions& options = {}) {
  const std::array<double, 2> points{a, b};
  return integrate(f, std::span<const double>(points), options);
}

}  // namespace bssr
