#pragma once

// Exact type I error of the threshold stopping rule
//
//   stop after stage 1 if Q1 + Q2 <= c, otherwise recruit a stage 2 large
//   enough that the final test has level alpha,
//
// for the non-inferiority test of H02 and for TOST. Equal group sizes n1 per
// group, n = 2 n1 in total.
//
// Work in the standardized scale x = Q1 / sigma^2 ~ chi2(n - 2) and
// W = sqrt(n1/2) d / sigma ~ N(mu, 1), mu = sqrt(n1/2) delta / sigma. Given
// x, the stopping event is W^2 <= C - x (C = c / sigma^2), rejection of H02 is
// W <= q sqrt(x/(n-2)) + sqrt(n1/2) delta_up / sigma with q = t_alpha(n-2),
// and rejection of H01 is W >= -q sqrt(x/(n-2)) + sqrt(n1/2) delta_low / sigma.
// Each joint probability is the chi2(n-2) average of a normal interval
// probability whose end points are the lower and upper envelopes of those
// curves. With u = sqrt(x) every curve is a line or a half-circle
// +-sqrt(C - u^2), so all crossings come from quadratics in u.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bssr/distributions.hpp"
#include "bssr/errors.hpp"
#include "bssr/quadrature.hpp"

namespace bssr {

enum class TestMode { NonInferiority, Equivalence };

struct ExactSetting {
  int n1 = 12;  // per group
  double alpha = 0.05;
  double sigma = 1.0;
  double delta = 0.5;  // true difference
  double delta_up = 0.5;
  double delta_low = -0.5;
  double c = 24.5;  // threshold on Q1 + Q2

  int n_total() const noexcept { return 2 * n1; }

  // delta = delta_up, delta_low = -delta_up, sigma = 1 and
  // c = n - 1 + (n1/2) delta^2.
  static ExactSetting threshold_example(int n1, double alpha = 0.05, double delta_up = 0.5) {
    ExactSetting s;
    s.n1 = n1;
    s.alpha = alpha;
    s.sigma = 1.0;
    s.delta = delta_up;
    s.delta_up = delta_up;
    s.delta_low = -delta_up;
    s.c = (2.0 * n1 - 1.0) + 0.5 * n1 * delta_up * delta_up;
    return s;
  }

  void validate() const {
    if (n1 < 2) throw std::invalid_argument("ExactSetting: n1 must be >= 2");
    if (!(alpha > 0.0 && alpha < 0.5)) {
      throw std::invalid_argument("ExactSetting: alpha must lie in (0, 0.5)");
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
      throw std::invalid_argument("ExactSetting: sigma must be positive");
    }
    if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("ExactSetting: c must be > 0");
    if (!std::isfinite(delta) || !std::isfinite(delta_up)) {
      throw std::invalid_argument("ExactSetting: delta and delta_up must be finite");
    }
    if (!(delta_low < delta_up)) {
      throw std::invalid_argument("ExactSetting: delta_low must be < delta_up");
    }
  }
};

struct IntegrationLimits {
  double l_star = 0.0;
  double c_star = 0.0;
  std::vector<double> breakpoints;  // sorted, from l_star to c_star, kinks included
  bool empty = false;               // integrand vanishes on [0, c]
};

namespace detail {

class ThresholdGeometry {
 public:
  ThresholdGeometry(const ExactSetting& s, TestMode mode)
      : equivalence_(mode == TestMode::Equivalence), df_within_(s.n_total() - 2) {
    s.validate();
    if (equivalence_ && !std::isfinite(s.delta_low)) {
      throw std::invalid_argument("ExactSetting: equivalence mode needs a finite delta_low");
    }
    const double k = std::sqrt(0.5 * s.n1);
    q_ = student_t_quantile(s.alpha, DegreesOfFreedom(df_within_));
    big_c_ = s.c / (s.sigma * s.sigma);
    slope_ = q_ / std::sqrt(static_cast<double>(df_within_));
    shift_up_ = k * s.delta_up / s.sigma;
    shift_low_ = k * s.delta_low / s.sigma;
    mu_ = k * s.delta / s.sigma;
  }

  double q() const noexcept { return q_; }
  double big_c() const noexcept { return big_c_; }
  double u_max() const noexcept { return std::sqrt(big_c_); }
  int df_within() const noexcept { return df_within_; }
  double mu() const noexcept { return mu_; }

  double circle(double u) const noexcept { return std::sqrt(std::max(0.0, big_c_ - u * u)); }
  double line_up(double u) const noexcept { return slope_ * u + shift_up_; }
  double line_low(double u) const noexcept { return -slope_ * u + shift_low_; }

  double upper(double u) const noexcept { return std::min(line_up(u), circle(u)); }
  double lower(double u) const noexcept {
    const double c = -circle(u);
    return equivalence_ ? std::max(c, line_low(u)) : c;
  }
  double gap(double u) const noexcept { return upper(u) - lower(u); }

  // Integrand in x = Q1 / sigma^2.
  double integrand(double x) const {
    if (x <= 0.0 || x >= big_c_) return 0.0;
    const double u = std::sqrt(x);
    const double p = normal_interval_probability(lower(u) - mu_, upper(u) - mu_);
    if (p <= 0.0) return 0.0;
    return p * chi2_pdf(x, DegreesOfFreedom(df_within_));
  }

  // Crossing points in u of every pair of curves, restricted to [0, u_max].
  std::vector<double> crossings() const {
    std::vector<double> out;
    line_circle(slope_, shift_up_, +1.0, out);
    line_circle(slope_, shift_up_, -1.0, out);
    if (equivalence_) {
      line_circle(-slope_, shift_low_, +1.0, out);
      line_circle(-slope_, shift_low_, -1.0, out);
      if (slope_ != 0.0) {
        const double u = (shift_low_ - shift_up_) / (2.0 * slope_);
        if (u >= 0.0 && u <= u_max()) out.push_back(u);
      }
    }
    return out;
  }

 private:
  // Roots of a u + b = sign * sqrt(C - u^2). Squaring gives
  // (a^2 + 1) u^2 + 2 a b u + b^2 - C = 0; each root is kept only if it
  // satisfies the unsquared equation.
  void line_circle(double a, double b, double sign, std::vector<double>& out) const {
    const double qa = a * a + 1.0;
    const double disc_quarter = qa * big_c_ - b * b;
    const double scale = qa * big_c_;
    const double umax = u_max();
    auto residual = [&](double u) { return a * u + b - sign * circle(u); };

    if (std::fabs(disc_quarter) <= 1e-12 * scale) {
      // Near-tangent: the closed form is ill-conditioned, so locate sign
      // changes of the original equation directly.
      out.push_back(std::clamp(-a * b / qa, 0.0, umax));
      bisect_sign_changes(residual, out);
      return;
    }
    if (disc_quarter < 0.0) return;
    const double root = std::sqrt(disc_quarter);
    for (double u : {(-a * b - root) / qa, (-a * b + root) / qa}) {
      if (u < -1e-12 || u > umax * (1.0 + 1e-12)) continue;
      u = std::clamp(u, 0.0, umax);
      const double lhs = a * u + b;
      const bool sign_ok = sign > 0.0 ? lhs >= -1e-9 : lhs <= 1e-9;
      if (sign_ok && std::fabs(residual(u)) <= 1e-8 * (1.0 + std::fabs(b) + std::sqrt(big_c_))) {
        out.push_back(u);
      }
    }
  }

  template <typename G>
  void bisect_sign_changes(const G& g, std::vector<double>& out) const {
    constexpr int kScan = 4096;
    const double umax = u_max();
    double prev_u = 0.0;
    double prev_g = g(0.0);
    for (int i = 1; i <= kScan; ++i) {
      const double u = umax * i / kScan;
      const double gu = g(u);
      if ((prev_g < 0.0) != (gu < 0.0)) {
        double lo = prev_u;
        double hi = u;
        double glo = prev_g;
        while (hi - lo > 1e-12) {
          const double mid = 0.5 * (lo + hi);
          const double gm = g(mid);
          if ((gm < 0.0) == (glo < 0.0)) {
            lo = mid;
            glo = gm;
          } else {
            hi = mid;
          }
        }
        out.push_back(0.5 * (lo + hi));
      }
      prev_u = u;
      prev_g = gu;
    }
  }

  bool equivalence_;
  int df_within_;
  double q_ = 0.0;
  double big_c_ = 0.0;
  double slope_ = 0.0;
  double shift_up_ = 0.0;
  double shift_low_ = 0.0;
  double mu_ = 0.0;
};

}  // namespace detail

// Range [l*, c*] of Q1 (on the sigma^2 = 1 scale, i.e. Q1 / sigma^2) outside
// which the joint-probability integrand is zero, plus the interior kinks.
inline IntegrationLimits solve_integration_limits(const ExactSetting& setting, TestMode mode) {
  const detail::ThresholdGeometry geo(setting, mode);
  std::vector<double> u_points = geo.crossings();
  u_points.push_back(0.0);
  u_points.push_back(geo.u_max());
  std::sort(u_points.begin(), u_points.end());
  u_points.erase(std::unique(u_points.begin(), u_points.end(),
                             [](double a, double b) { return std::fabs(a - b) < 1e-14; }),
                 u_points.end());

  IntegrationLimits limits;
  int first = -1;
  int last = -1;
  for (std::size_t i = 0; i + 1 < u_points.size(); ++i) {
    const double mid = 0.5 * (u_points[i] + u_points[i + 1]);
    if (geo.gap(mid) > 0.0) {
      if (first < 0) first = static_cast<int>(i);
      last = static_cast<int>(i) + 1;
    }
  }
  if (first < 0) {
    limits.empty = true;
    limits.l_star = 0.0;
    limits.c_star = 0.0;
    return limits;
  }
  for (int i = first; i <= last; ++i) {
    const double u = u_points[static_cast<std::size_t>(i)];
    limits.breakpoints.push_back(u * u);
  }
  limits.breakpoints.front() = u_points[static_cast<std::size_t>(first)] *
                               u_points[static_cast<std::size_t>(first)];
  limits.breakpoints.back() = std::min(geo.big_c(), limits.breakpoints.back());
  limits.l_star = limits.breakpoints.front();
  limits.c_star = limits.breakpoints.back();
  return limits;
}

// P(reject, Q1 + Q2 <= c) for the given mode.
inline QuadratureResult joint_rejection_small_variance(const ExactSetting& setting, TestMode mode,
                                                       const QuadratureOptions& options = {}) {
  const detail::ThresholdGeometry geo(setting, mode);
  const auto limits = solve_integration_limits(setting, mode);
  if (limits.empty) return {};
  return integrate([&](double x) { return geo.integrand(x); },
                   std::span<const double>(limits.breakpoints), options);
}

// P(t_up <= t_alpha(n-2), Q1 + Q2 <= c).
inline double prob_reject_and_small_variance(const ExactSetting& setting,
                                             const QuadratureOptions& options = {}) {
  return joint_rejection_small_variance(setting, TestMode::NonInferiority, options).value;
}

// P(t_low >= t_{1-alpha}(n-2), t_up <= t_alpha(n-2), Q1 + Q2 <= c).
inline double prob_reject_both_and_small_variance(const ExactSetting& setting,
                                                  const QuadratureOptions& options = {}) {
  return joint_rejection_small_variance(setting, TestMode::Equivalence, options).value;
}

// P(Q1 + Q2 <= c): Q1 + Q2 ~ sigma^2 chi2(n - 1; (n1/2) delta^2 / sigma^2).
inline double prob_small_variance(const ExactSetting& setting) {
  setting.validate();
  const double s2 = setting.sigma * setting.sigma;
  return noncentral_chi2_cdf(
      setting.c / s2, DegreesOfFreedom(setting.n_total() - 1.0),
      NoncentralityParameter(0.5 * setting.n1 * setting.delta * setting.delta / s2));
}

struct ExactType1 {
  double joint_small = 0.0;  // P(reject, Q1 + Q2 <= c)
  double prob_small = 0.0;   // P(Q1 + Q2 <= c)
  double conditional = 0.0;  // P(reject | Q1 + Q2 <= c)
  // joint_small + alpha * (1 - prob_small): the continuation branch is taken
  // to reject with probability exactly alpha.
  double unconditional = 0.0;
};

inline ExactType1 assemble_type1(double joint, double small, double alpha) {
  ExactType1 out;
  out.joint_small = joint;
  out.prob_small = small;
  out.conditional = small > 0.0 ? joint / small : 0.0;
  out.unconditional = joint + alpha * (1.0 - small);
  return out;
}

inline ExactType1 ni_type1_exact(const ExactSetting& setting,
                                 const QuadratureOptions& options = {}) {
  return assemble_type1(prob_reject_and_small_variance(setting, options),
                        prob_small_variance(setting), setting.alpha);
}

inline ExactType1 eq_type1_exact(const ExactSetting& setting,
                                 const QuadratureOptions& options = {}) {
  return assemble_type1(prob_reject_both_and_small_variance(setting, options),
                        prob_small_variance(setting), setting.alpha);
}

}  // namespace bssr
