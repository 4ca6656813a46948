#pragma once

// Blinded sample-size re-estimation: the normal-approximation sample-size
// formula, the n_min / n_max clamping rule, and closed-form moments of the
// re-estimated per-group size.

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "bssr/distributions.hpp"
#include "bssr/errors.hpp"
#include "bssr/trial_model.hpp"

namespace bssr {

struct SsrRule {
  long n_min = 0;
  std::optional<long> n_max;  // nullopt: no cap

  static SsrRule bounded(long n_min, long n_max) { return SsrRule{n_min, n_max}; }
  static SsrRule unbounded(long n_min) { return SsrRule{n_min, std::nullopt}; }
  static SsrRule fixed(long n) { return SsrRule{n, n}; }

  bool is_unbounded() const noexcept { return !n_max.has_value(); }

  // n_max >= n_min >= n_stage1
  void validate_against(long n_stage1) const {
    if (n_min < n_stage1) {
      throw std::invalid_argument("SsrRule: n_min (" + std::to_string(n_min) +
                                  ") is below the stage-1 size (" +
                                  std::to_string(n_stage1) + ")");
    }
    if (n_max && *n_max < n_min) {
      throw std::invalid_argument("SsrRule: n_max (" + std::to_string(*n_max) +
                                  ") is below n_min (" + std::to_string(n_min) + ")");
    }
  }

  friend bool operator==(const SsrRule&, const SsrRule&) = default;
};

// 2 (z_{1-beta/2} + z_{1-alpha})^2
inline double sample_size_constant(double alpha, double beta) {
  const double z = normal_quantile(1.0 - beta / 2.0) + normal_quantile(1.0 - alpha);
  return 2.0 * z * z;
}

// constant / ((margin / sigma_hat)^2) with margin = delta0 - D; shared by the
// public formula and the simulation engine so both round identically.
inline double scaled_sample_size(double constant, double margin, double sigma_hat) noexcept {
  if (std::isinf(margin)) return 0.0;
  const double standardized = margin / sigma_hat;
  return constant / (standardized * standardized);
}

// Per-group size before rounding. An infinite margin needs no observations.
inline double raw_required_sample_size(double delta0, double assumed_diff, double sigma_hat,
                                       double alpha, double beta) {
  if (!(std::fabs(assumed_diff) < delta0)) {
    throw InfeasibleDesignError("required_sample_size: |D| must be < delta0");
  }
  if (!(sigma_hat >= 0.0)) {
    throw std::domain_error("required_sample_size: sigma_hat must be >= 0");
  }
  return scaled_sample_size(sample_size_constant(alpha, beta), delta0 - assumed_diff,
                            sigma_hat);
}

inline long ceil_sample_size(double raw) {
  if (!(raw < 9.0e15)) {
    throw std::overflow_error("required_sample_size: result exceeds the integer range");
  }
  return static_cast<long>(std::ceil(raw));
}

inline long required_sample_size(double delta0, double assumed_diff, double sigma_hat,
                                 double alpha, double beta) {
  return ceil_sample_size(
      raw_required_sample_size(delta0, assumed_diff, sigma_hat, alpha, beta));
}

// Stage-2 size per group for a re-estimated total `n_hat`.
inline long apply_ssr_rule(long n_hat, long n_stage1, const SsrRule& rule) {
  if (n_hat <= rule.n_min) return rule.n_min - n_stage1;
  const long capped = rule.n_max ? std::min(n_hat, *rule.n_max) : n_hat;
  return capped - n_stage1;
}

// E(N-hat) under delta = delta0, sigma = 1, D = 0.
inline double expected_n_hat(double delta0, int n_stage1, double alpha, double beta) {
  const double n = n_stage1;
  return sample_size_constant(alpha, beta) * (1.0 / (delta0 * delta0) + n / (4.0 * n - 2.0));
}

// SD(N-hat) under sigma = 1, D = 0 and true difference `delta`.
inline double sd_n_hat(double delta0, int n_stage1, double delta, double alpha, double beta) {
  return sample_size_constant(alpha, beta) *
         std::sqrt(var_total_variance(n_stage1, delta, 1.0)) / (delta0 * delta0);
}

// N-hat as delta0 -> infinity: n/(2n-1) (z_{1-beta/2} + z_{1-alpha})^2.
inline double limit_n_hat_infinite_margin(int n_stage1, double alpha, double beta) {
  const double n = n_stage1;
  return 0.5 * sample_size_constant(alpha, beta) * n / (2.0 * n - 1.0);
}

// Largest total variance for which the rule adds no stage-2 subjects.
inline double no_stage2_threshold(double delta0, double assumed_diff, double alpha,
                                  double beta, long n_min) {
  const double margin = delta0 - assumed_diff;
  return static_cast<double>(n_min) * margin * margin / sample_size_constant(alpha, beta);
}

}  // namespace bssr
