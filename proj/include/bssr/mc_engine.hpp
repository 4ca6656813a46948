#pragma once

// Monte Carlo engine for two-stage trials with blinded sample-size
// re-estimation.
//
// Determinism: replicate i of a scenario draws from a stream seeded by
// hash(master_seed, i). Replicates are grouped into fixed-size chunks whose
// tallies are merged in chunk order, so a result is a pure function of the
// scenario and seed regardless of the number of workers.
//
// Sampling: by default each stage is drawn through its sufficient statistics
// (two normal group means and one chi-square within-group sum of squares),
// which has exactly the distribution of the raw-observation path and costs
// O(1) per stage. SamplingMode::RawObservations draws every observation and
// goes through summarize_stage1/tost_decide on the data vectors.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bssr/equivalence_tests.hpp"
#include "bssr/errors.hpp"
#include "bssr/parallel.hpp"
#include "bssr/random.hpp"
#include "bssr/ssr_rules.hpp"
#include "bssr/trial_model.hpp"

namespace bssr {

enum class SamplingMode { SufficientStatistics, RawObservations };

struct EngineOptions {
  unsigned workers = 1;
  SamplingMode sampling = SamplingMode::SufficientStatistics;
  long chunk_size = 4096;
};

struct Scenario {
  TrialDesign design;
  SsrRule rule;
  double true_delta = 0.0;  // mean(group1) - mean(group2) used to generate data
  long replications = 1'000'000;
  std::uint64_t master_seed = 0;

  void validate() const {
    design.validate();
    if (design.n1_stage1 != design.n2_stage1) {
      throw std::invalid_argument("Scenario: simulated designs use equal stage-1 group sizes");
    }
    rule.validate_against(design.n1_stage1);
    if (replications < 1) throw std::invalid_argument("Scenario: replications must be >= 1");
    if (!std::isfinite(true_delta)) {
      throw std::invalid_argument("Scenario: true_delta must be finite");
    }
  }

  // Type I error study at the upper margin: symmetric margins +-delta0 and
  // data generated with difference delta0.
  static Scenario at_upper_margin(int n_stage1, SsrRule rule, double delta0, long replications,
                                  std::uint64_t seed, double alpha = 0.05, double beta = 0.10,
                                  double sigma = 1.0) {
    Scenario s;
    s.design = TrialDesign::symmetric(delta0, n_stage1, alpha, beta, sigma);
    s.rule = rule;
    s.true_delta = delta0;
    s.replications = replications;
    s.master_seed = seed;
    return s;
  }
};

struct TrialRecord {
  StageSummary stage1;
  TostOutcome fixed_outcome;  // test on the stage-1 data alone
  TostOutcome outcome;        // test on stage 1 + stage 2
  long n_hat = 0;
  long stage2_n = 0;          // m, per group
  long realized_n = 0;        // n = n_stage1 + m, per group
};

// Simulates single trials of one scenario. Holds a critical-value cache, so
// each worker thread needs its own instance.
class TrialSimulator {
 public:
  TrialSimulator(const Scenario& scenario, SamplingMode mode)
      : scenario_(scenario),
        mode_(mode),
        critical_(scenario.design.alpha),
        constant_(sample_size_constant(scenario.design.alpha, scenario.design.beta)),
        margin_(scenario.design.planning_margin() - scenario.design.assumed_diff) {
    scenario_.validate();
    if (!(std::fabs(scenario.design.assumed_diff) < scenario.design.planning_margin())) {
      throw InfeasibleDesignError("Scenario: |D| must be < delta_up");
    }
  }

  const Scenario& scenario() const noexcept { return scenario_; }

  TrialRecord operator()(std::uint64_t replicate_index) {
    auto rng = RandomStream::for_replicate(scenario_.master_seed, replicate_index);
    return mode_ == SamplingMode::RawObservations ? simulate_raw(rng) : simulate_sufficient(rng);
  }

 private:
  long stage2_size(const StageSummary& s1, long* n_hat_out) const {
    const double raw = scaled_sample_size(constant_, margin_, std::sqrt(s1.total_variance));
    const long n_hat = ceil_sample_size(raw);
    *n_hat_out = n_hat;
    return apply_ssr_rule(n_hat, scenario_.design.n1_stage1, scenario_.rule);
  }

  TrialRecord simulate_sufficient(RandomStream& rng) {
    const auto& d = scenario_.design;
    const double sigma = d.sigma;
    const long n = d.n1_stage1;
    const double root_n = std::sqrt(static_cast<double>(n));

    GroupStats g1{n, scenario_.true_delta + sigma * rng.normal() / root_n, 0.0};
    GroupStats g2{n, sigma * rng.normal() / root_n, 0.0};
    g1.ss = sigma * sigma * rng.chi_square(static_cast<double>(2 * n - 2));

    TrialRecord rec;
    rec.stage1 = summarize_stage1(g1, g2);
    rec.fixed_outcome = tost_decide(g1, g2, d.delta_low, d.delta_up, critical_(2 * n - 2));
    rec.stage2_n = stage2_size(rec.stage1, &rec.n_hat);
    rec.realized_n = n + rec.stage2_n;
    if (rec.stage2_n == 0) {
      rec.outcome = rec.fixed_outcome;
      return rec;
    }
    const long m = rec.stage2_n;
    const double root_m = std::sqrt(static_cast<double>(m));
    GroupStats h1{m, scenario_.true_delta + sigma * rng.normal() / root_m, 0.0};
    GroupStats h2{m, sigma * rng.normal() / root_m, 0.0};
    h1.ss = sigma * sigma * rng.chi_square(static_cast<double>(2 * m - 2));
    const auto f1 = merge(g1, h1);
    const auto f2 = merge(g2, h2);
    rec.outcome = tost_decide(f1, f2, d.delta_low, d.delta_up, critical_(f1.n + f2.n - 2));
    return rec;
  }

  TrialRecord simulate_raw(RandomStream& rng) {
    const auto& d = scenario_.design;
    const long n = d.n1_stage1;
    std::vector<double> y1(static_cast<std::size_t>(n));
    std::vector<double> y2(static_cast<std::size_t>(n));
    for (auto& y : y1) y = rng.normal(scenario_.true_delta, d.sigma);
    for (auto& y : y2) y = rng.normal(0.0, d.sigma);

    TrialRecord rec;
    rec.stage1 = summarize_stage1(StageData{y1, y2});
    rec.fixed_outcome = tost_decide(group_stats(y1), group_stats(y2), d.delta_low, d.delta_up,
                                    critical_(2 * n - 2));
    rec.stage2_n = stage2_size(rec.stage1, &rec.n_hat);
    rec.realized_n = n + rec.stage2_n;
    if (rec.stage2_n == 0) {
      rec.outcome = rec.fixed_outcome;
      return rec;
    }
    const long m = rec.stage2_n;
    for (long i = 0; i < m; ++i) y1.push_back(rng.normal(scenario_.true_delta, d.sigma));
    for (long i = 0; i < m; ++i) y2.push_back(rng.normal(0.0, d.sigma));
    rec.outcome = tost_decide(group_stats(y1), group_stats(y2), d.delta_low, d.delta_up,
                              critical_(2 * (n + m) - 2));
    return rec;
  }

  Scenario scenario_;
  SamplingMode mode_;
  CriticalValueCache critical_;
  double constant_;
  double margin_;
};

inline TrialRecord simulate_trial(const Scenario& scenario, std::uint64_t replicate_index,
                                  SamplingMode mode = SamplingMode::SufficientStatistics) {
  TrialSimulator simulator(scenario, mode);
  return simulator(replicate_index);
}

// ---------------------------------------------------------------------------
// Scenario aggregation

struct ScenarioResult {
  Scenario scenario;
  std::array<long, 4> case_counts{};
  std::array<double, 4> pct_case{};
  double ni_rejection_pct = 0.0;  // pct_case[0] + pct_case[1]
  double mean_realized_n = 0.0;
  double sd_realized_n = 0.0;
  double mean_sigma_t2 = 0.0;
  std::uint64_t master_seed = 0;  // seed the caller supplied (grid seed for grid cells)

  long replications() const noexcept {
    return std::accumulate(case_counts.begin(), case_counts.end(), 0L);
  }

  // Recomputes the percentages from the integer counts.
  void update_percentages() {
    const double total = static_cast<double>(replications());
    for (std::size_t i = 0; i < 4; ++i) {
      pct_case[i] = total > 0 ? 100.0 * static_cast<double>(case_counts[i]) / total : 0.0;
    }
    ni_rejection_pct = pct_case[0] + pct_case[1];
  }
};

namespace detail {

struct ScenarioTally {
  std::array<long, 4> case_counts{};
  unsigned long long n_sum = 0;
  unsigned long long n_sum_sq = 0;
  double sigma_t2_sum = 0.0;
};

inline long chunk_count(long replications, long chunk_size) {
  return (replications + chunk_size - 1) / chunk_size;
}

}  // namespace detail

inline ScenarioResult run_scenario(const Scenario& scenario, const EngineOptions& options = {}) {
  scenario.validate();
  if (options.chunk_size < 1) throw std::invalid_argument("EngineOptions: chunk_size must be >= 1");
  const long reps = scenario.replications;
  const long chunk = options.chunk_size;
  const long n_chunks = detail::chunk_count(reps, chunk);
  std::vector<detail::ScenarioTally> tallies(static_cast<std::size_t>(n_chunks));

  detail::for_each_chunk(
      n_chunks, options.workers, [&] { return TrialSimulator(scenario, options.sampling); },
      [&](TrialSimulator& simulator, long c) {
        auto& tally = tallies[static_cast<std::size_t>(c)];
        const long begin = c * chunk;
        const long end = std::min(reps, begin + chunk);
        for (long i = begin; i < end; ++i) {
          const auto rec = simulator(static_cast<std::uint64_t>(i));
          ++tally.case_counts[static_cast<std::size_t>(case_index(rec.outcome.case_label))];
          const auto n = static_cast<unsigned long long>(rec.realized_n);
          tally.n_sum += n;
          tally.n_sum_sq += n * n;
          tally.sigma_t2_sum += rec.stage1.total_variance;
        }
      });

  ScenarioResult result;
  result.scenario = scenario;
  result.master_seed = scenario.master_seed;
  unsigned long long n_sum = 0;
  unsigned long long n_sum_sq = 0;
  double sigma_t2_sum = 0.0;
  for (const auto& t : tallies) {
    for (std::size_t k = 0; k < 4; ++k) result.case_counts[k] += t.case_counts[k];
    n_sum += t.n_sum;
    n_sum_sq += t.n_sum_sq;
    sigma_t2_sum += t.sigma_t2_sum;
  }
  const double r = static_cast<double>(reps);
  result.update_percentages();
  result.mean_realized_n = static_cast<double>(n_sum) / r;
  if (reps > 1) {
    // Integer moments keep the variance exact before the final division.
    const long double sum = static_cast<long double>(n_sum);
    const long double centered = static_cast<long double>(n_sum_sq) - sum * sum / r;
    result.sd_realized_n = static_cast<double>(std::sqrt(std::max(0.0L, centered) / (r - 1.0)));
  }
  result.mean_sigma_t2 = sigma_t2_sum / r;
  return result;
}

// ---------------------------------------------------------------------------
// Grid sweeps

struct GridSpec {
  std::vector<int> n_stage1;
  std::vector<double> n_min_ratios;
  std::vector<std::optional<double>> n_max_ratios;  // nullopt: unbounded
  std::vector<double> delta0;
  double alpha = 0.05;
  double beta = 0.10;
  double sigma = 1.0;
  long replications = 1'000'000;
  std::uint64_t master_seed = 0;

  std::size_t cell_count() const noexcept {
    return n_stage1.size() * n_min_ratios.size() * n_max_ratios.size() * delta0.size();
  }

  // Full sweep: 8 stage-1 sizes x 6 n_min ratios x 6 n_max ratios x 30 margins.
  static GridSpec table1(long replications, std::uint64_t seed) {
    GridSpec g;
    g.n_stage1 = {10, 15, 20, 25, 30, 40, 50, 60};
    g.n_min_ratios = {1.0, 1.2, 1.4, 1.6, 1.8, 2.0};
    g.n_max_ratios = {2.0, 2.5, 3.0, 3.5, 4.0, std::nullopt};
    for (int k = 1; k <= 30; ++k) g.delta0.push_back(0.05 * k);
    g.replications = replications;
    g.master_seed = seed;
    return g;
  }
};

// ratio * n rounded to the nearest integer, ties up.
inline long ratio_to_size(double ratio, int n_stage1) {
  return static_cast<long>(std::floor(ratio * n_stage1 + 0.5 + 1e-9));
}

struct GridCell {
  int n_stage1 = 0;
  double n_min_ratio = 1.0;
  std::optional<double> n_max_ratio;
  double delta0 = 0.0;
  SsrRule rule;
};

inline std::vector<GridCell> expand_grid(const GridSpec& grid) {
  for (double r : grid.n_min_ratios) {
    if (!(r >= 1.0)) throw ConfigError("grid: n_min ratios must be >= 1");
    for (const auto& rmax : grid.n_max_ratios) {
      if (rmax && *rmax < r) {
        throw ConfigError("grid: n_max ratio " + std::to_string(*rmax) +
                          " is below n_min ratio " + std::to_string(r));
      }
    }
  }
  for (double d : grid.delta0) {
    if (!(d > 0.0) || !std::isfinite(d)) throw ConfigError("grid: delta0 values must be > 0");
  }
  std::vector<GridCell> cells;
  cells.reserve(grid.cell_count());
  for (int n : grid.n_stage1) {
    if (n < 2) throw ConfigError("grid: stage-1 sizes must be >= 2");
    for (double rmin : grid.n_min_ratios) {
      for (const auto& rmax : grid.n_max_ratios) {
        SsrRule rule{ratio_to_size(rmin, n), std::nullopt};
        if (rmax) rule.n_max = ratio_to_size(*rmax, n);
        for (double d : grid.delta0) cells.push_back(GridCell{n, rmin, rmax, d, rule});
      }
    }
  }
  return cells;
}

// Seed of one cell, derived only from the grid seed and the cell's resolved
// coordinates, so any sub-grid reproduces the same cells.
inline std::uint64_t cell_seed(std::uint64_t master_seed, int n_stage1, const SsrRule& rule,
                               double delta0) {
  std::uint64_t h = hash_combine(master_seed, static_cast<std::uint64_t>(n_stage1));
  h = hash_combine(h, static_cast<std::uint64_t>(rule.n_min));
  h = hash_combine(h, rule.n_max ? static_cast<std::uint64_t>(*rule.n_max) : ~0ULL);
  h = hash_combine(h, static_cast<std::uint64_t>(std::llround(delta0 * 1e6)));
  return h;
}

inline Scenario make_cell_scenario(const GridSpec& grid, const GridCell& cell) {
  return Scenario::at_upper_margin(cell.n_stage1, cell.rule, cell.delta0, grid.replications,
                                   cell_seed(grid.master_seed, cell.n_stage1, cell.rule,
                                             cell.delta0),
                                   grid.alpha, grid.beta, grid.sigma);
}

using ProgressCallback = std::function<void(std::size_t done, std::size_t total)>;

inline std::vector<ScenarioResult> run_grid(const GridSpec& grid, const EngineOptions& options = {},
                                            const ProgressCallback& progress = {}) {
  const auto cells = expand_grid(grid);
  std::vector<ScenarioResult> results;
  results.reserve(cells.size());
  for (const auto& cell : cells) {
    auto result = run_scenario(make_cell_scenario(grid, cell), options);
    result.master_seed = grid.master_seed;
    results.push_back(std::move(result));
    if (progress) progress(results.size(), cells.size());
  }
  return results;
}

// ---------------------------------------------------------------------------
// Rejection rate by interim total variance

struct RejectionBin {
  double lower = 0.0;  // total variance range (lower, upper]
  double upper = 0.0;
  long count = 0;
  double fixed_reject_pct = 0.0;
  double two_stage_reject_pct = 0.0;
};

struct BinnedRejectionReport {
  int n_stage1 = 0;
  double delta0 = 0.0;
  long replications = 0;
  double threshold = 0.0;  // largest total variance with m = 0
  RejectionBin first_bin;  // the m = 0 region
  std::vector<RejectionBin> bins;
  double first_bin_mass_pct = 0.0;
  double first_bin_reject_fraction_pct = 0.0;  // share of first-bin trials rejecting H02
  double fixed_overall_pct = 0.0;
  double two_stage_overall_pct = 0.0;
  long max_realized_n = 0;
};

struct BinnedRejectionSpec {
  int n_stage1 = 15;
  double delta0 = 1.0;
  long replications = 100'000;
  std::uint64_t master_seed = 0;
  int bins = 9;
  double alpha = 0.05;
  double beta = 0.10;
};

// Fixed design (test at n_stage1) versus the unbounded two-stage design
// (n_min = n_stage1) on the same stage-1 data of every replicate.
inline BinnedRejectionReport binned_rejection_analysis(const BinnedRejectionSpec& spec,
                                                       const EngineOptions& options = {}) {
  if (spec.bins < 1) throw std::invalid_argument("binned_rejection_analysis: bins must be >= 1");
  const auto scenario =
      Scenario::at_upper_margin(spec.n_stage1, SsrRule::unbounded(spec.n_stage1), spec.delta0,
                                spec.replications, spec.master_seed, spec.alpha, spec.beta);
  scenario.validate();

  struct Draw {
    double total_variance;
    long stage2_n;
    long realized_n;
    bool fixed_reject;
    bool two_stage_reject;
  };
  const long reps = spec.replications;
  std::vector<Draw> draws(static_cast<std::size_t>(reps));
  const long chunk = options.chunk_size;
  detail::for_each_chunk(
      detail::chunk_count(reps, chunk), options.workers,
      [&] { return TrialSimulator(scenario, options.sampling); },
      [&](TrialSimulator& simulator, long c) {
        const long end = std::min(reps, (c + 1) * chunk);
        for (long i = c * chunk; i < end; ++i) {
          const auto rec = simulator(static_cast<std::uint64_t>(i));
          draws[static_cast<std::size_t>(i)] = {rec.stage1.total_variance, rec.stage2_n,
                                                rec.realized_n, rec.fixed_outcome.reject_h02,
                                                rec.outcome.reject_h02};
        }
      });

  BinnedRejectionReport report;
  report.n_stage1 = spec.n_stage1;
  report.delta0 = spec.delta0;
  report.replications = reps;
  report.threshold = no_stage2_threshold(spec.delta0, 0.0, spec.alpha, spec.beta, spec.n_stage1);

  auto pct = [](long part, long whole) {
    return whole > 0 ? 100.0 * static_cast<double>(part) / static_cast<double>(whole) : 0.0;
  };

  std::vector<std::size_t> rest;
  long first_count = 0;
  long first_fixed = 0;
  long first_two = 0;
  long fixed_total = 0;
  long two_total = 0;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const auto& d = draws[i];
    fixed_total += d.fixed_reject;
    two_total += d.two_stage_reject;
    report.max_realized_n = std::max(report.max_realized_n, d.realized_n);
    if (d.stage2_n == 0) {
      ++first_count;
      first_fixed += d.fixed_reject;
      first_two += d.two_stage_reject;
    } else {
      rest.push_back(i);
    }
  }
  report.first_bin = {0.0, report.threshold, first_count, pct(first_fixed, first_count),
                      pct(first_two, first_count)};
  report.first_bin_mass_pct = pct(first_count, reps);
  report.first_bin_reject_fraction_pct = pct(first_two, first_count);
  report.fixed_overall_pct = pct(fixed_total, reps);
  report.two_stage_overall_pct = pct(two_total, reps);

  std::sort(rest.begin(), rest.end(), [&](std::size_t a, std::size_t b) {
    const double va = draws[a].total_variance;
    const double vb = draws[b].total_variance;
    return va < vb || (va == vb && a < b);
  });
  const long remaining = static_cast<long>(rest.size());
  const long base = remaining / spec.bins;
  const long extra = remaining % spec.bins;
  long cursor = 0;
  double lower = report.threshold;
  for (int b = 0; b < spec.bins; ++b) {
    const long size = base + (b < extra ? 1 : 0);
    RejectionBin bin;
    bin.lower = lower;
    bin.count = size;
    long fixed = 0;
    long two = 0;
    for (long k = cursor; k < cursor + size; ++k) {
      const auto& d = draws[rest[static_cast<std::size_t>(k)]];
      fixed += d.fixed_reject;
      two += d.two_stage_reject;
    }
    bin.upper = size > 0 ? draws[rest[static_cast<std::size_t>(cursor + size - 1)]].total_variance
                         : lower;
    bin.fixed_reject_pct = pct(fixed, size);
    bin.two_stage_reject_pct = pct(two, size);
    report.bins.push_back(bin);
    lower = bin.upper;
    cursor += size;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Peak type I error over a margin grid (unbounded rule, n_min = n_stage1)

struct PeakScanSpec {
  int n_stage1 = 15;
  std::vector<double> delta0;
  long replications = 1'000'000;
  std::uint64_t master_seed = 0;
  double alpha = 0.05;
  double beta = 0.10;

  static std::vector<double> default_margins() {
    std::vector<double> out;
    for (int k = 1; k <= 30; ++k) out.push_back(0.05 * k);
    return out;
  }
};

struct PeakScanResult {
  std::vector<ScenarioResult> curve;
  double peak_pct_case1 = 0.0;
  double argmax_delta0 = 0.0;
};

inline PeakScanResult peak_alpha_scan(const PeakScanSpec& spec, const EngineOptions& options = {}) {
  if (spec.delta0.empty()) throw std::invalid_argument("peak_alpha_scan: empty margin grid");
  PeakScanResult out;
  const auto rule = SsrRule::unbounded(spec.n_stage1);
  for (double d : spec.delta0) {
    const auto scenario = Scenario::at_upper_margin(
        spec.n_stage1, rule, d, spec.replications,
        cell_seed(spec.master_seed, spec.n_stage1, rule, d), spec.alpha, spec.beta);
    auto result = run_scenario(scenario, options);
    result.master_seed = spec.master_seed;
    if (out.curve.empty() || result.pct_case[0] > out.peak_pct_case1) {
      out.peak_pct_case1 = result.pct_case[0];
      out.argmax_delta0 = d;
    }
    out.curve.push_back(std::move(result));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Threshold stopping rule: stop after stage 1 when Q1 + Q2 <= c, otherwise
// add `continue_stage2` subjects per group and test on everything.

struct ThresholdRuleScenario {
  int n_per_group = 12;
  double alpha = 0.05;
  double sigma = 1.0;
  double true_delta = 0.5;
  double delta_low = -0.5;
  double delta_up = 0.5;
  double c = 24.5;  // threshold on Q1 + Q2
  long continue_stage2 = 12'000'000;
  long replications = 1'000'000;
  std::uint64_t master_seed = 0;
};

struct ThresholdRuleResult {
  long replications = 0;
  long small_variance = 0;   // Q1 + Q2 <= c
  long ni_joint_small = 0;   // H02 rejected and Q1 + Q2 <= c
  long eq_joint_small = 0;   // H01 and H02 rejected and Q1 + Q2 <= c
  long ni_reject = 0;
  long eq_reject = 0;

  double rate(long count) const noexcept {
    return static_cast<double>(count) / static_cast<double>(replications);
  }
  double prob_small() const noexcept { return rate(small_variance); }
  double ni_joint() const noexcept { return rate(ni_joint_small); }
  double eq_joint() const noexcept { return rate(eq_joint_small); }
  double ni_unconditional() const noexcept { return rate(ni_reject); }
  double eq_unconditional() const noexcept { return rate(eq_reject); }
  // Binomial standard error of a rate at this replication count.
  double standard_error(double p) const noexcept {
    return std::sqrt(p * (1.0 - p) / static_cast<double>(replications));
  }
};

inline ThresholdRuleResult run_threshold_rule(const ThresholdRuleScenario& s,
                                              const EngineOptions& options = {}) {
  if (s.n_per_group < 2 || s.continue_stage2 < 1 || s.replications < 1 || !(s.sigma > 0.0) ||
      !(s.delta_low < s.delta_up) || !(s.alpha > 0.0 && s.alpha < 0.5)) {
    throw std::invalid_argument("run_threshold_rule: invalid scenario");
  }
  const long chunk = options.chunk_size;
  const long n_chunks = detail::chunk_count(s.replications, chunk);
  std::vector<ThresholdRuleResult> tallies(static_cast<std::size_t>(n_chunks));
  const long n = s.n_per_group;
  const long m = s.continue_stage2;
  const double sigma = s.sigma;

  detail::for_each_chunk(
      n_chunks, options.workers, [&] { return CriticalValueCache(s.alpha); },
      [&](CriticalValueCache& critical, long c) {
        auto& t = tallies[static_cast<std::size_t>(c)];
        const long end = std::min(s.replications, (c + 1) * chunk);
        for (long i = c * chunk; i < end; ++i) {
          auto rng = RandomStream::for_replicate(s.master_seed, static_cast<std::uint64_t>(i));
          const double root_n = std::sqrt(static_cast<double>(n));
          GroupStats g1{n, s.true_delta + sigma * rng.normal() / root_n, 0.0};
          GroupStats g2{n, sigma * rng.normal() / root_n, 0.0};
          g1.ss = sigma * sigma * rng.chi_square(static_cast<double>(2 * n - 2));
          const auto s1 = summarize_stage1(g1, g2);
          TostOutcome outcome;
          if (s1.q1 + s1.q2 <= s.c) {
            ++t.small_variance;
            outcome = tost_decide(g1, g2, s.delta_low, s.delta_up, critical(2 * n - 2));
            t.ni_joint_small += outcome.reject_h02;
            t.eq_joint_small += outcome.case_label == TostCase::Case1;
          } else {
            const double root_m = std::sqrt(static_cast<double>(m));
            GroupStats h1{m, s.true_delta + sigma * rng.normal() / root_m, 0.0};
            GroupStats h2{m, sigma * rng.normal() / root_m, 0.0};
            h1.ss = sigma * sigma * rng.chi_square(static_cast<double>(2 * m - 2));
            outcome = tost_decide(merge(g1, h1), merge(g2, h2), s.delta_low, s.delta_up,
                                  critical(2 * (n + m) - 2));
          }
          t.ni_reject += outcome.reject_h02;
          t.eq_reject += outcome.case_label == TostCase::Case1;
        }
      });

  ThresholdRuleResult out;
  out.replications = s.replications;
  for (const auto& t : tallies) {
    out.small_variance += t.small_variance;
    out.ni_joint_small += t.ni_joint_small;
    out.eq_joint_small += t.eq_joint_small;
    out.ni_reject += t.ni_reject;
    out.eq_reject += t.eq_reject;
  }
  return out;
}

}  // namespace bssr
