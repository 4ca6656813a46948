#pragma once

// Final analysis: pooled-variance two one-sided t tests (TOST), the
// non-inferiority test against the upper margin, and the four-way outcome
// classification.
//
//   Case1  both nulls rejected (equivalence declared)
//   Case2  H02 rejected, H01 not
//   Case3  H01 rejected, H02 not
//   Case4  neither rejected

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "bssr/distributions.hpp"
#include "bssr/errors.hpp"
#include "bssr/trial_model.hpp"

namespace bssr {

enum class TostCase { Case1 = 1, Case2 = 2, Case3 = 3, Case4 = 4 };

inline constexpr int case_index(TostCase c) noexcept { return static_cast<int>(c) - 1; }

struct TostOutcome {
  double diff = 0.0;       // mean1 - mean2
  double pooled_sd = 0.0;  // s
  double t_low = 0.0;      // statistic against delta_low
  double t_up = 0.0;       // statistic against delta_up
  double ci_low = 0.0;     // (1 - 2 alpha) confidence interval
  double ci_high = 0.0;
  double critical_value = 0.0;  // t_{1-alpha}(n1 + n2 - 2)
  long n1 = 0;
  long n2 = 0;
  bool reject_h01 = false;  // H01: delta <= delta_low
  bool reject_h02 = false;  // H02: delta >= delta_up
  TostCase case_label = TostCase::Case4;
};

inline constexpr TostCase classify_case(bool reject_h01, bool reject_h02) noexcept {
  if (reject_h01 && reject_h02) return TostCase::Case1;
  if (reject_h02) return TostCase::Case2;
  if (reject_h01) return TostCase::Case3;
  return TostCase::Case4;
}

inline constexpr bool ni_reject_h02(const TostOutcome& outcome) noexcept {
  return outcome.reject_h02;
}

inline double pooled_variance(const GroupStats& g1, const GroupStats& g2) {
  if (g1.n < 2 || g2.n < 2) {
    throw InsufficientDataError("pooled_variance: each group needs at least 2 observations");
  }
  return (g1.ss + g2.ss) / static_cast<double>(g1.n + g2.n - 2);
}

inline double pooled_variance(std::span<const double> group1, std::span<const double> group2) {
  if (group1.size() < 2 || group2.size() < 2) {
    throw InsufficientDataError("pooled_variance: each group needs at least 2 observations");
  }
  return pooled_variance(group_stats(group1), group_stats(group2));
}

inline double tost_critical_value(double alpha, long df) {
  return student_t_quantile(1.0 - alpha, DegreesOfFreedom(static_cast<double>(df)));
}

// Decision from group summaries with a precomputed critical value
// t_{1-alpha}(n1 + n2 - 2). When s = 0 the decision falls back to strict
// comparison of the observed difference against the margins.
inline TostOutcome tost_decide(const GroupStats& g1, const GroupStats& g2, double delta_low,
                               double delta_up, double critical_value) {
  TostOutcome out;
  out.n1 = g1.n;
  out.n2 = g2.n;
  out.critical_value = critical_value;
  out.diff = g1.mean - g2.mean;
  const double s2 = pooled_variance(g1, g2);
  out.pooled_sd = std::sqrt(s2);
  const double n1 = static_cast<double>(g1.n);
  const double n2 = static_cast<double>(g2.n);
  const double root_n = std::sqrt(n1 * n2 / (n1 + n2));
  const double half_width = critical_value * out.pooled_sd / root_n;
  out.ci_low = out.diff - half_width;
  out.ci_high = out.diff + half_width;

  if (out.pooled_sd > 0.0) {
    out.t_low = root_n * (out.diff - delta_low) / out.pooled_sd;
    out.t_up = root_n * (out.diff - delta_up) / out.pooled_sd;
    out.reject_h01 = out.t_low > critical_value;
    out.reject_h02 = out.t_up < -critical_value;
  } else {
    constexpr double inf = std::numeric_limits<double>::infinity();
    out.t_low = out.diff > delta_low ? inf : (out.diff < delta_low ? -inf : 0.0);
    out.t_up = out.diff > delta_up ? inf : (out.diff < delta_up ? -inf : 0.0);
    out.reject_h01 = out.diff > delta_low;
    out.reject_h02 = out.diff < delta_up;
  }
  out.case_label = classify_case(out.reject_h01, out.reject_h02);
  return out;
}

inline TostOutcome tost_decide(const GroupStats& g1, const GroupStats& g2,
                               const TrialDesign& design) {
  return tost_decide(g1, g2, design.delta_low, design.delta_up,
                     tost_critical_value(design.alpha, g1.n + g2.n - 2));
}

inline TostOutcome tost_decide(std::span<const double> group1, std::span<const double> group2,
                               const TrialDesign& design) {
  if (group1.size() < 2 || group2.size() < 2) {
    throw InsufficientDataError("tost_decide: each group needs at least 2 observations");
  }
  return tost_decide(group_stats(group1), group_stats(group2), design);
}

// Lazily filled table of t_{1-alpha}(df). Not thread-safe; give each worker
// its own instance.
class CriticalValueCache {
 public:
  explicit CriticalValueCache(double alpha) : alpha_(alpha) {}

  double alpha() const noexcept { return alpha_; }

  double operator()(long df) {
    if (df < 1) throw std::domain_error("CriticalValueCache: df must be >= 1");
    const auto index = static_cast<std::size_t>(df);
    if (index < dense_.size()) {
      double& slot = dense_[index];
      if (std::isnan(slot)) slot = tost_critical_value(alpha_, df);
      return slot;
    }
    if (index < kDenseLimit) {
      dense_.resize(std::max(index + 1, dense_.size() * 2),
                    std::numeric_limits<double>::quiet_NaN());
      return (*this)(df);
    }
    if (df == last_sparse_df_) return last_sparse_value_;
    last_sparse_df_ = df;
    last_sparse_value_ = tost_critical_value(alpha_, df);
    return last_sparse_value_;
  }

 private:
  static constexpr std::size_t kDenseLimit = 1u << 22;
  double alpha_;
  std::vector<double> dense_;
  long last_sparse_df_ = -1;
  double last_sparse_value_ = 0.0;
};

}  // namespace bssr
