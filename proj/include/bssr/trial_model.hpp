#pragma once

// Two-stage, two-group trial model and the blinded "total variance" used at
// the interim look. Q1 (within groups) and Q2 (between groups) are kept
// separately because the exact analytics and the binned diagnostics need them
// individually.

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bssr/errors.hpp"

namespace bssr {

struct TrialDesign {
  double delta_low = -1.0;
  double delta_up = 1.0;
  double sigma = 1.0;
  int n1_stage1 = 15;
  int n2_stage1 = 15;
  double alpha = 0.05;  // one-sided level of each test
  double beta = 0.10;   // 1 - target power
  double assumed_diff = 0.0;

  int n_total_stage1() const noexcept { return n1_stage1 + n2_stage1; }

  // Margin fed to the sample-size formula. Symmetric designs make this the
  // common delta0.
  double planning_margin() const noexcept { return delta_up; }

  void validate() const {
    if (!(delta_low < delta_up)) {
      throw std::invalid_argument("TrialDesign: delta_low must be < delta_up");
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
      throw std::invalid_argument("TrialDesign: sigma must be positive and finite");
    }
    if (!(alpha > 0.0 && alpha < 0.5)) {
      throw std::invalid_argument("TrialDesign: alpha must lie in (0, 0.5)");
    }
    if (!(beta > 0.0 && beta < 1.0)) {
      throw std::invalid_argument("TrialDesign: beta must lie in (0, 1)");
    }
    if (n1_stage1 < 2 || n2_stage1 < 2) {
      throw std::invalid_argument("TrialDesign: stage-1 group sizes must be >= 2");
    }
  }

  static TrialDesign symmetric(double delta0, int n_per_group, double alpha = 0.05,
                               double beta = 0.10, double sigma = 1.0) {
    TrialDesign design;
    design.delta_low = -delta0;
    design.delta_up = delta0;
    design.sigma = sigma;
    design.n1_stage1 = n_per_group;
    design.n2_stage1 = n_per_group;
    design.alpha = alpha;
    design.beta = beta;
    return design;
  }
};

// Sufficient statistics of one group: size, mean and sum of squared deviations.
struct GroupStats {
  long n = 0;
  double mean = 0.0;
  double ss = 0.0;
};

inline GroupStats group_stats(std::span<const double> values) {
  GroupStats stats;
  stats.n = static_cast<long>(values.size());
  if (values.empty()) return stats;
  double sum = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("group_stats: non-finite observation");
    sum += v;
  }
  stats.mean = sum / static_cast<double>(stats.n);
  for (double v : values) stats.ss += (v - stats.mean) * (v - stats.mean);
  return stats;
}

// Pools two disjoint samples of the same group.
inline GroupStats merge(const GroupStats& a, const GroupStats& b) noexcept {
  if (a.n == 0) return b;
  if (b.n == 0) return a;
  GroupStats out;
  out.n = a.n + b.n;
  const double na = static_cast<double>(a.n);
  const double nb = static_cast<double>(b.n);
  const double diff = b.mean - a.mean;
  out.mean = a.mean + diff * nb / (na + nb);
  out.ss = a.ss + b.ss + diff * diff * na * nb / (na + nb);
  return out;
}

struct StageData {
  std::vector<double> group1;
  std::vector<double> group2;
};

struct StageSummary {
  double mean1 = 0.0;
  double mean2 = 0.0;
  double pooled_mean = 0.0;
  double q1 = 0.0;  // within-group sum of squares
  double q2 = 0.0;  // between-group sum of squares
  double total_variance = 0.0;
  int n1 = 0;
  int n2 = 0;

  int n_total_stage1() const noexcept { return n1 + n2; }
};

// Blinded one-sample variance of the pooled stage-1 data, from group summaries
// whose `ss` fields may be split arbitrarily as long as their sum is Q1.
inline StageSummary summarize_stage1(const GroupStats& g1, const GroupStats& g2) {
  if (g1.n < 2 || g2.n < 2) {
    throw InsufficientDataError("summarize_stage1: each group needs at least 2 observations");
  }
  StageSummary s;
  s.n1 = static_cast<int>(g1.n);
  s.n2 = static_cast<int>(g2.n);
  s.mean1 = g1.mean;
  s.mean2 = g2.mean;
  const double n1 = static_cast<double>(g1.n);
  const double n2 = static_cast<double>(g2.n);
  const double n_total = n1 + n2;
  s.pooled_mean = (n1 * g1.mean + n2 * g2.mean) / n_total;
  s.q1 = g1.ss + g2.ss;
  const double dev1 = g1.mean - s.pooled_mean;
  const double dev2 = g2.mean - s.pooled_mean;
  s.q2 = n1 * dev1 * dev1 + n2 * dev2 * dev2;
  s.total_variance = (s.q1 + s.q2) / (n_total - 1.0);
  return s;
}

inline StageSummary summarize_stage1(const StageData& data) {
  if (data.group1.size() < 2 || data.group2.size() < 2) {
    throw InsufficientDataError("summarize_stage1: each group needs at least 2 observations");
  }
  return summarize_stage1(group_stats(data.group1), group_stats(data.group2));
}

// E(total variance) at true difference `delta`.
inline double expected_total_variance(const TrialDesign& design, double delta) {
  const double n1 = design.n1_stage1;
  const double n2 = design.n2_stage1;
  const double n = n1 + n2;
  const double s2 = design.sigma * design.sigma;
  return s2 * (1.0 + n1 * n2 * delta * delta / (n * (n - 1.0) * s2));
}

// Var(total variance) for equal group sizes. The leading factor is sigma^4;
// at sigma = 1 this coincides with the sigma^2 form sometimes quoted.
inline double var_total_variance(int n_per_group, double delta, double sigma) {
  if (n_per_group < 1) throw std::invalid_argument("var_total_variance: n must be >= 1");
  if (!(sigma > 0.0)) throw std::invalid_argument("var_total_variance: sigma must be > 0");
  const double n = n_per_group;
  const double s2 = sigma * sigma;
  const double denom = (2.0 * n - 1.0) * (2.0 * n - 1.0);
  return 2.0 * s2 * s2 / denom * (n * (2.0 + delta * delta / s2) - 1.0);
}

}  // namespace bssr
