#pragma once

// Self-checks run by the `validate` command: identities that must hold
// exactly, oracle comparisons, and small Monte Carlo calibrations. Sized to
// finish in seconds.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bssr/csv.hpp"
#include "bssr/distributions.hpp"
#include "bssr/equivalence_tests.hpp"
#include "bssr/exact_analytics.hpp"
#include "bssr/mc_engine.hpp"
#include "bssr/random.hpp"
#include "bssr/ssr_rules.hpp"
#include "bssr/trial_model.hpp"

namespace bssr {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline CheckResult check_quantile_inversion() {
  double worst = 0.0;
  for (int i = 1; i < 1000; ++i) {
    const double p = i / 1000.0;
    worst = std::max(worst, std::fabs(normal_cdf(normal_quantile(p)) - p));
    for (double df : {1.0, 2.0, 3.0, 7.5, 28.0, 500.0}) {
      const DegreesOfFreedom nu(df);
      worst = std::max(worst, std::fabs(student_t_cdf(student_t_quantile(p, nu), nu) - p));
    }
  }
  return {"quantile/cdf inversion", worst < 1e-10, "max |F(F^-1(p)) - p| = " + fmt_double(worst)};
}

inline CheckResult check_cochran(std::uint64_t seed) {
  double worst = 0.0;
  for (std::uint64_t k = 0; k < 2000; ++k) {
    auto rng = RandomStream::for_replicate(seed, k);
    const int n1 = 2 + static_cast<int>(rng.uniform() * 30);
    const int n2 = 2 + static_cast<int>(rng.uniform() * 30);
    StageData data;
    for (int i = 0; i < n1; ++i) data.group1.push_back(rng.normal(1.5, 2.0));
    for (int i = 0; i < n2; ++i) data.group2.push_back(rng.normal(-0.5, 2.0));
    const auto s = summarize_stage1(data);
    std::vector<double> all = data.group1;
    all.insert(all.end(), data.group2.begin(), data.group2.end());
    const auto pooled = group_stats(all);
    worst = std::max(worst, std::fabs(s.q1 + s.q2 - pooled.ss) / pooled.ss);
  }
  return {"Cochran identity Q1 + Q2 = total SS", worst < 1e-12,
          "max relative gap = " + fmt_double(worst)};
}

inline CheckResult check_partition_and_determinism(std::uint64_t seed) {
  const auto s = Scenario::at_upper_margin(15, SsrRule::bounded(18, 30), 0.95, 50'000, seed);
  const auto one = run_scenario(s, {1});
  const auto four = run_scenario(s, {4});
  const bool partition = one.replications() == s.replications;
  const bool ni = std::fabs(one.ni_rejection_pct - (one.pct_case[0] + one.pct_case[1])) < 1e-12;
  const bool same = one.case_counts == four.case_counts &&
                    one.mean_realized_n == four.mean_realized_n &&
                    one.sd_realized_n == four.sd_realized_n &&
                    one.mean_sigma_t2 == four.mean_sigma_t2;
  return {"case partition, NI = Case1 + Case2, worker determinism", partition && ni && same,
          "1 vs 4 workers identical: " + std::string(same ? "yes" : "no")};
}

inline CheckResult check_fixed_design(std::uint64_t seed) {
  constexpr long reps = 200'000;
  const auto s = Scenario::at_upper_margin(15, SsrRule::fixed(15), 0.5, reps, seed);
  const auto r = run_scenario(s, {});
  const double se = 100.0 * std::sqrt(0.05 * 0.95 / reps);
  const bool ok = std::fabs(r.ni_rejection_pct - 5.0) <= 3.0 * se;
  return {"fixed design NI rejection = 5%", ok,
          "observed " + fmt_double(r.ni_rejection_pct) + "%, 3 SE = " + fmt_double(3 * se)};
}

inline CheckResult check_raw_vs_sufficient(std::uint64_t seed) {
  constexpr long reps = 40'000;
  const auto s = Scenario::at_upper_margin(10, SsrRule::bounded(12, 30), 1.0, reps, seed);
  EngineOptions raw;
  raw.sampling = SamplingMode::RawObservations;
  const auto a = run_scenario(s, {});
  const auto b = run_scenario(s, raw);
  double worst_z = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    const double p = 0.5 * (a.pct_case[k] + b.pct_case[k]) / 100.0;
    const double se = std::sqrt(2.0 * p * (1.0 - p) / reps);
    if (se > 0) worst_z = std::max(worst_z, std::fabs(a.pct_case[k] - b.pct_case[k]) / 100.0 / se);
  }
  return {"raw observations agree with sufficient statistics", worst_z < 4.0,
          "max |z| over cases = " + fmt_double(worst_z)};
}

inline CheckResult check_exact_vs_mc(std::uint64_t seed) {
  const auto setting = ExactSetting::threshold_example(12);
  const auto ni = ni_type1_exact(setting);
  const auto eq = eq_type1_exact(setting);
  ThresholdRuleScenario sc;
  sc.replications = 200'000;
  sc.master_seed = seed;
  const auto mc = run_threshold_rule(sc, {});
  auto z = [&](double mc_rate, double exact) {
    return std::fabs(mc_rate - exact) / mc.standard_error(exact);
  };
  const double worst = std::max({z(mc.prob_small(), ni.prob_small), z(mc.ni_joint(), ni.joint_small),
                                 z(mc.eq_joint(), eq.joint_small)});
  return {"threshold rule exact vs Monte Carlo", worst < 4.0, "max |z| = " + fmt_double(worst)};
}

inline CheckResult check_quadrature_halving() {
  double worst = 0.0;
  for (int n1 : {12, 24, 40}) {
    const auto s = ExactSetting::threshold_example(n1);
    QuadratureOptions loose{1e-9, 1e-9, 4000};
    QuadratureOptions tight{5e-10, 5e-10, 4000};
    worst = std::max(worst, std::fabs(prob_reject_and_small_variance(s, loose) -
                                      prob_reject_and_small_variance(s, tight)));
    worst = std::max(worst, std::fabs(prob_reject_both_and_small_variance(s, loose) -
                                      prob_reject_both_and_small_variance(s, tight)));
  }
  return {"quadrature stable under halved tolerance", worst < 1e-8,
          "max change = " + fmt_double(worst)};
}

inline CheckResult check_csv_round_trip(std::uint64_t seed) {
  std::vector<ScenarioResult> results;
  results.push_back(run_scenario(Scenario::at_upper_margin(15, SsrRule::unbounded(15), 0.95, 5000, seed)));
  results.push_back(run_scenario(Scenario::at_upper_margin(10, SsrRule::bounded(12, 20), 0.3, 5000, seed + 1)));
  const auto text = format_results_csv(results);
  const auto back = parse_results_csv(text);
  const bool ok = format_results_csv(back) == text;
  return {"CSV round trip", ok, ok ? "byte-identical" : "mismatch"};
}

}  // namespace detail

inline std::vector<CheckResult> run_validation_suite(std::uint64_t seed) {
  return {detail::check_quantile_inversion(),
          detail::check_cochran(seed),
          detail::check_partition_and_determinism(seed),
          detail::check_fixed_design(seed),
          detail::check_raw_vs_sufficient(seed),
          detail::check_exact_vs_mc(seed),
          detail::check_quadrature_halving(),
          detail::check_csv_round_trip(seed)};
}

}  // namespace bssr
