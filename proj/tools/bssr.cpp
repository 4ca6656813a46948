// bssr: command-line front end for the simulation engine and exact analytics.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "bssr/config.hpp"
#include "bssr/csv.hpp"
#include "bssr/exact_analytics.hpp"
#include "bssr/mc_engine.hpp"
#include "bssr/svg.hpp"
#include "bssr/validation.hpp"

namespace {

namespace fs = std::filesystem;
using namespace bssr;

// Flag values are collected as strings and merged over the config file.
struct FlagSet {
  std::string config_path;
  std::map<std::string, std::string> values;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option(flag, values[key], help);
  }

  ConfigValues resolve() const {
    ConfigValues cfg = config_path.empty() ? ConfigValues{} : ConfigValues::load(config_path);
    for (const auto& [key, value] : values) {
      if (!value.empty()) cfg.set(key, value);
    }
    return cfg;
  }
};

void add_simulation_flags(CLI::App* app, FlagSet& flags) {
  app->add_option("--config", flags.config_path, "key = value config file")
      ->check(CLI::ExistingFile);
  flags.add(app, "--seed", "seed", "master seed (required)");
  flags.add(app, "--reps", "replications", "replications per scenario");
  flags.add(app, "--workers", "workers", "worker threads (results do not depend on this)");
  flags.add(app, "--out", "out", "output directory");
  flags.add(app, "--sampling", "sampling", "sufficient (default) or raw");
  flags.add(app, "--alpha", "alpha", "one-sided level");
  flags.add(app, "--beta", "beta", "type II error used for re-estimation");
}

fs::path out_dir(const ConfigValues& cfg) {
  return cfg.has("out") ? fs::path(cfg.raw("out")) : fs::path{};
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

std::string n_max_text(const SsrRule& rule) {
  return rule.n_max ? std::to_string(*rule.n_max) : std::string("inf");
}

void print_result_line(const ScenarioResult& r) {
  const auto& s = r.scenario;
  std::cout << fmt("n~=%d n_min=%ld n_max=%s delta0=%.2f  case1=%.4f case2=%.4f case3=%.4f "
                   "case4=%.4f  NI=%.4f  mean_n=%.2f sd_n=%.2f\n",
                   s.design.n1_stage1, s.rule.n_min, n_max_text(s.rule).c_str(), s.design.delta_up,
                   r.pct_case[0], r.pct_case[1], r.pct_case[2], r.pct_case[3], r.ni_rejection_pct,
                   r.mean_realized_n, r.sd_realized_n);
}

// Groups results by (n_stage1, n_min, n_max) in first-seen order.
std::vector<std::vector<ScenarioResult>> families(const std::vector<ScenarioResult>& results) {
  std::vector<std::vector<ScenarioResult>> out;
  std::map<std::tuple<int, long, long>, std::size_t> index;
  for (const auto& r : results) {
    const auto& s = r.scenario;
    const auto key = std::make_tuple(s.design.n1_stage1, s.rule.n_min, s.rule.n_max.value_or(-1));
    auto [it, inserted] = index.emplace(key, out.size());
    if (inserted) out.emplace_back();
    out[it->second].push_back(r);
  }
  return out;
}

std::string family_name(const ScenarioResult& r) {
  const auto& s = r.scenario;
  return fmt("n%d_min%ld_max%s", s.design.n1_stage1, s.rule.n_min, n_max_text(s.rule).c_str());
}

void write_curves(const fs::path& dir, const std::vector<ScenarioResult>& results) {
  for (const auto& fam : families(results)) {
    const auto name = family_name(fam.front());
    write_curve_svg(dir / ("curve_" + name + ".svg"), fam, name);
  }
}

int run_grid_command(const FlagSet& flags) {
  const auto cfg = flags.resolve();
  const auto grid = grid_from_config(cfg);
  const auto options = engine_options_from(cfg);
  const auto start = std::chrono::steady_clock::now();
  const auto results = run_grid(grid, options, [](std::size_t done, std::size_t total) {
    if (done % 100 == 0 || done == total) std::cerr << "\r" << done << "/" << total << std::flush;
  });
  std::cerr << "\n";
  const auto dir = out_dir(cfg);
  write_results_csv(dir / "grid.csv", results);
  write_heatmap_svg(dir / "heatmap.svg", results);
  if (families(results).size() <= 16) write_curves(dir, results);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << results.size() << " cells written to " << (dir / "grid.csv").string()
            << fmt(" in %.1f s\n", secs);
  return 0;
}

int run_scenario_command(const FlagSet& flags) {
  const auto cfg = flags.resolve();
  const auto scenario = scenario_from_config(cfg);
  const auto result = run_scenario(scenario, engine_options_from(cfg));
  print_result_line(result);
  if (cfg.has("out")) write_results_csv(out_dir(cfg) / "scenario.csv", {result});
  return 0;
}

int run_binned_command(const FlagSet& flags) {
  const auto cfg = flags.resolve();
  const auto spec = binned_from_config(cfg);
  const auto r = binned_rejection_analysis(spec, engine_options_from(cfg));
  std::string text;
  text += fmt("n~=%d delta0=%.2f replications=%ld\n", r.n_stage1, r.delta0, r.replications);
  text += fmt("no-stage-2 threshold on total variance: %.5f\n", r.threshold);
  text += fmt("first bin: mass %.3f%%, rejecting share %.2f%%\n", r.first_bin_mass_pct,
              r.first_bin_reject_fraction_pct);
  text += fmt("overall rejection of H02: fixed %.3f%%, two-stage %.3f%%; max realized n %ld\n",
              r.fixed_overall_pct, r.two_stage_overall_pct, r.max_realized_n);
  text += "bin  lower     upper     count    fixed%   two-stage%\n";
  text += fmt("%-4d %-9.4f %-9.4f %-8ld %-8.3f %-8.3f\n", 0, r.first_bin.lower, r.first_bin.upper,
              r.first_bin.count, r.first_bin.fixed_reject_pct, r.first_bin.two_stage_reject_pct);
  int k = 1;
  for (const auto& b : r.bins) {
    text += fmt("%-4d %-9.4f %-9.4f %-8ld %-8.3f %-8.3f\n", k++, b.lower, b.upper, b.count,
                b.fixed_reject_pct, b.two_stage_reject_pct);
  }
  std::cout << text;
  if (cfg.has("out")) write_text_file(out_dir(cfg) / "binned.txt", text);
  return 0;
}

int run_peaks_command(const FlagSet& flags) {
  const auto cfg = flags.resolve();
  const auto spec = peaks_from_config(cfg);
  const auto r = peak_alpha_scan(spec, engine_options_from(cfg));
  for (const auto& point : r.curve) {
    std::cout << fmt("delta0=%.2f case1=%.4f NI=%.4f\n", point.scenario.design.delta_up,
                     point.pct_case[0], point.ni_rejection_pct);
  }
  std::cout << fmt("peak %%Case1 = %.2f at delta0 = %.2f (n~=%d, %ld replications)\n",
                   r.peak_pct_case1, r.argmax_delta0, spec.n_stage1, spec.replications);
  if (cfg.has("out")) {
    const auto dir = out_dir(cfg);
    write_results_csv(dir / "peaks.csv", r.curve);
    write_curve_svg(dir / "peaks.svg", r.curve, family_name(r.curve.front()));
  }
  return 0;
}

int run_exact_command(const FlagSet& flags) {
  const auto cfg = flags.resolve();
  const auto settings = exact_from_config(cfg);
  std::cout << "  n1        c  P(reject H02,Q<=c)  P(Q<=c)  NI cond  NI uncond  "
               "EQ joint  EQ cond  EQ uncond\n";
  for (const auto& s : settings) {
    const auto ni = ni_type1_exact(s);
    const auto eq = eq_type1_exact(s);
    std::cout << fmt("%4d %8.3f %19.4f %8.4f %8.4f %10.4f %9.4f %8.4f %10.4f\n", s.n1, s.c,
                     ni.joint_small, ni.prob_small, ni.conditional, ni.unconditional,
                     eq.joint_small, eq.conditional, eq.unconditional);
  }
  return 0;
}

int run_validate_command(const FlagSet& flags) {
  const auto cfg = flags.resolve();
  const std::uint64_t seed = cfg.has("seed") ? cfg.seed() : 20240917ULL;
  bool all = true;
  for (const auto& check : run_validation_suite(seed)) {
    all = all && check.passed;
    std::cout << (check.passed ? "PASS  " : "FAIL  ") << check.name << "  (" << check.detail
              << ")\n";
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blinded sample-size re-estimation for equivalence and non-inferiority trials"};
  app.require_subcommand(1);

  FlagSet grid_flags;
  auto* grid = app.add_subcommand("grid", "sweep a grid of scenarios (configs/table1.conf)");
  add_simulation_flags(grid, grid_flags);
  grid_flags.add(grid, "--n-stage1", "n_stage1", "stage-1 sizes per group, list");
  grid_flags.add(grid, "--n-min-ratio", "n_min_ratio", "n_min / n~ ratios, list or range");
  grid_flags.add(grid, "--n-max-ratio", "n_max_ratio", "n_max / n~ ratios, list, inf allowed");
  grid_flags.add(grid, "--delta0", "delta0", "margins, list or start:stop:step");

  FlagSet scenario_flags;
  auto* scenario = app.add_subcommand("scenario", "simulate one scenario at the upper margin");
  add_simulation_flags(scenario, scenario_flags);
  scenario_flags.add(scenario, "--n-stage1", "n_stage1", "stage-1 size per group");
  scenario_flags.add(scenario, "--n-min", "n_min", "minimum total per group");
  scenario_flags.add(scenario, "--n-max", "n_max", "maximum total per group or inf");
  scenario_flags.add(scenario, "--delta0", "delta0", "equivalence margin");
  scenario_flags.add(scenario, "--true-delta", "true_delta", "true difference (default delta0)");
  scenario_flags.add(scenario, "--sigma", "sigma", "true standard deviation");

  FlagSet binned_flags;
  auto* binned = app.add_subcommand("binned", "rejection rate by interim total variance");
  add_simulation_flags(binned, binned_flags);
  binned_flags.add(binned, "--n-stage1", "n_stage1", "stage-1 size per group (15)");
  binned_flags.add(binned, "--delta0", "delta0", "margin (1.0)");
  binned_flags.add(binned, "--bins", "bins", "equal-count bins after the first (9)");

  FlagSet peaks_flags;
  auto* peaks = app.add_subcommand("peaks", "peak %Case1 over margins, unbounded rule");
  add_simulation_flags(peaks, peaks_flags);
  peaks_flags.add(peaks, "--n-stage1", "n_stage1", "stage-1 size per group (15)");
  peaks_flags.add(peaks, "--delta0", "delta0", "margins (0.05:1.5:0.05)");

  FlagSet exact_flags;
  auto* exact = app.add_subcommand("exact", "exact type I error of the threshold stopping rule");
  exact->add_option("--config", exact_flags.config_path, "key = value config file")
      ->check(CLI::ExistingFile);
  exact_flags.add(exact, "--n1", "n1", "per-group sizes, list (12, 24, 40)");
  exact_flags.add(exact, "--alpha", "alpha", "one-sided level (0.05)");
  exact_flags.add(exact, "--delta-up", "delta_up", "upper margin (0.5)");
  exact_flags.add(exact, "--true-delta", "true_delta", "true difference (delta_up)");
  exact_flags.add(exact, "--sigma", "sigma", "standard deviation (1)");
  exact_flags.add(exact, "--c", "c", "threshold on Q1 + Q2 (n - 1 + n1 delta^2 / 2)");

  FlagSet validate_flags;
  auto* validate = app.add_subcommand("validate", "run identity, oracle and calibration checks");
  validate_flags.add(validate, "--seed", "seed", "master seed (20240917)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (grid->parsed()) return run_grid_command(grid_flags);
    if (scenario->parsed()) return run_scenario_command(scenario_flags);
    if (binned->parsed()) return run_binned_command(binned_flags);
    if (peaks->parsed()) return run_peaks_command(peaks_flags);
    if (exact->parsed()) return run_exact_command(exact_flags);
    if (validate->parsed()) return run_validate_command(validate_flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
