#pragma once

// Plain-text run configuration.
//
//   # comment
//   n_stage1    = 10, 15, 20
//   n_min_ratio = 1.0:2.0:0.2      # start:stop:step, inclusive
//   n_max_ratio = 2, 3, inf
//   delta0      = 0.05:1.5:0.05
//   replications = 1000000
//   seed = 20240917
//
// Keys are fixed; anything else is rejected. Command-line flags are merged
// on top of the file with `ConfigValues::set`, so flags win.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bssr/errors.hpp"
#include "bssr/exact_analytics.hpp"
#include "bssr/mc_engine.hpp"

namespace bssr {

inline const std::set<std::string, std::less<>>& config_keys() {
  static const std::set<std::string, std::less<>> keys = {
      "n_stage1", "n_min_ratio", "n_max_ratio", "delta0",   "n_min",    "n_max",
      "true_delta", "alpha",     "beta",        "sigma",    "replications", "seed",
      "workers",  "out",         "bins",        "n1",       "delta_up", "c",
      "sampling"};
  return keys;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto end = comma == std::string_view::npos ? s.size() : comma;
    auto item = trim(s.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view text, std::string_view key) {
  T value{};
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("config: invalid value '" + std::string(text) + "' for key '" +
                      std::string(key) + "'");
  }
  return value;
}

inline bool is_inf_literal(std::string_view s) { return s == "inf" || s == "Inf" || s == "INF"; }

}  // namespace detail

// Expands "start:stop:step" into an inclusive arithmetic sequence. Values are
// computed as start + k * step to avoid drift.
inline std::vector<double> expand_range(std::string_view text, std::string_view key) {
  const auto c1 = text.find(':');
  const auto c2 = text.find(':', c1 + 1);
  if (c1 == std::string_view::npos || c2 == std::string_view::npos ||
      text.find(':', c2 + 1) != std::string_view::npos) {
    throw ConfigError("config: range for '" + std::string(key) + "' must be start:stop:step");
  }
  const double start = detail::parse_number<double>(detail::trim(text.substr(0, c1)), key);
  const double stop = detail::parse_number<double>(detail::trim(text.substr(c1 + 1, c2 - c1 - 1)), key);
  const double step = detail::parse_number<double>(detail::trim(text.substr(c2 + 1)), key);
  if (!(step > 0.0) || !(stop >= start)) {
    throw ConfigError("config: range for '" + std::string(key) + "' needs step > 0 and stop >= start");
  }
  const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
  if (count > 1'000'000) throw ConfigError("config: range for '" + std::string(key) + "' is too long");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (long k = 0; k < count; ++k) {
    // Snap to 12 significant decimals so 0.05 * 3 prints and hashes as 0.15.
    out.push_back(std::round((start + static_cast<double>(k) * step) * 1e12) / 1e12);
  }
  return out;
}

class ConfigValues {
 public:
  static ConfigValues parse(std::string_view text, std::string_view origin = "config") {
    ConfigValues cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto body = detail::trim(line);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) +
                          ": expected key = value");
      }
      auto key = detail::trim(std::string_view(body).substr(0, eq));
      auto value = detail::trim(std::string_view(body).substr(eq + 1));
      if (cfg.values_.count(key)) {
        throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) +
                          ": duplicate key '" + key + "'");
      }
      try {
        cfg.set(key, value);
      } catch (const ConfigError& e) {
        throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    return cfg;
  }

  static ConfigValues load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str(), path);
  }

  void set(const std::string& key, const std::string& value) {
    if (!config_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
    if (value.empty()) throw ConfigError("empty value for key '" + key + "'");
    values_[key] = value;
  }

  bool has(std::string_view key) const { return values_.find(std::string(key)) != values_.end(); }

  const std::string& raw(std::string_view key) const {
    const auto it = values_.find(std::string(key));
    if (it == values_.end()) throw ConfigError("missing config key '" + std::string(key) + "'");
    return it->second;
  }

  double get_double(std::string_view key, std::optional<double> fallback = std::nullopt) const {
    if (!has(key) && fallback) return *fallback;
    return detail::parse_number<double>(raw(key), key);
  }

  long get_long(std::string_view key, std::optional<long> fallback = std::nullopt) const {
    if (!has(key) && fallback) return *fallback;
    return detail::parse_number<long>(raw(key), key);
  }

  std::optional<long> get_optional_size(std::string_view key) const {
    if (detail::is_inf_literal(raw(key))) return std::nullopt;
    return get_long(key);
  }

  std::uint64_t seed() const {
    if (!has("seed")) throw ConfigError("a master seed is required (seed = ... or --seed)");
    return detail::parse_number<std::uint64_t>(raw("seed"), "seed");
  }

  // Comma list whose items are numbers, "inf" (when allowed) or ranges.
  std::vector<std::optional<double>> get_list(std::string_view key, bool allow_inf = false) const {
    std::vector<std::optional<double>> out;
    for (const auto& item : detail::split_list(raw(key))) {
      if (detail::is_inf_literal(item)) {
        if (!allow_inf) throw ConfigError("'inf' is not allowed for key '" + std::string(key) + "'");
        out.emplace_back(std::nullopt);
      } else if (item.find(':') != std::string::npos) {
        for (double v : expand_range(item, key)) out.emplace_back(v);
      } else {
        out.emplace_back(detail::parse_number<double>(item, key));
      }
    }
    if (out.empty()) throw ConfigError("empty list for key '" + std::string(key) + "'");
    return out;
  }

  std::vector<double> get_doubles(std::string_view key) const {
    std::vector<double> out;
    for (const auto& v : get_list(key)) out.push_back(*v);
    return out;
  }

  std::vector<int> get_ints(std::string_view key) const {
    std::vector<int> out;
    for (double v : get_doubles(key)) {
      if (v != std::floor(v) || std::fabs(v) > 1e9) {
        throw ConfigError("key '" + std::string(key) + "' needs integers");
      }
      out.push_back(static_cast<int>(v));
    }
    return out;
  }

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

// Margins must sit on the 0.05 lattice of the full sweep.
inline void require_grid_delta0(double d) {
  const double steps = d / 0.05;
  if (!(d > 0.0) || !std::isfinite(d) || std::fabs(steps - std::round(steps)) > 1e-6) {
    throw ConfigError("delta0 = " + std::to_string(d) + " is not on the 0.05 grid");
  }
}

inline EngineOptions engine_options_from(const ConfigValues& cfg) {
  EngineOptions opt;
  const long workers = cfg.get_long("workers", 1);
  if (workers < 1 || workers > 1024) throw ConfigError("workers must be in [1, 1024]");
  opt.workers = static_cast<unsigned>(workers);
  if (cfg.has("sampling")) {
    const auto& s = cfg.raw("sampling");
    if (s == "sufficient") {
      opt.sampling = SamplingMode::SufficientStatistics;
    } else if (s == "raw") {
      opt.sampling = SamplingMode::RawObservations;
    } else {
      throw ConfigError("sampling must be 'sufficient' or 'raw'");
    }
  }
  return opt;
}

inline long replications_from(const ConfigValues& cfg, long fallback) {
  const long reps = cfg.get_long("replications", fallback);
  if (reps < 1) throw ConfigError("replications must be >= 1");
  return reps;
}

inline GridSpec grid_from_config(const ConfigValues& cfg) {
  GridSpec g;
  g.n_stage1 = cfg.get_ints("n_stage1");
  g.n_min_ratios = cfg.get_doubles("n_min_ratio");
  for (const auto& v : cfg.get_list("n_max_ratio", true)) g.n_max_ratios.push_back(v);
  g.delta0 = cfg.get_doubles("delta0");
  for (double d : g.delta0) require_grid_delta0(d);
  g.alpha = cfg.get_double("alpha", 0.05);
  g.beta = cfg.get_double("beta", 0.10);
  g.sigma = cfg.get_double("sigma", 1.0);
  g.replications = replications_from(cfg, 1'000'000);
  g.master_seed = cfg.seed();
  // Surface ratio and margin errors at parse time rather than mid-run.
  (void)expand_grid(g);
  return g;
}

inline Scenario scenario_from_config(const ConfigValues& cfg) {
  const int n = static_cast<int>(cfg.get_long("n_stage1"));
  const long n_min = cfg.get_long("n_min", n);
  SsrRule rule{n_min, std::nullopt};
  if (cfg.has("n_max")) rule.n_max = cfg.get_optional_size("n_max");
  const double delta0 = cfg.get_double("delta0");
  auto s = Scenario::at_upper_margin(n, rule, delta0, replications_from(cfg, 1'000'000),
                                     cfg.seed(), cfg.get_double("alpha", 0.05),
                                     cfg.get_double("beta", 0.10), cfg.get_double("sigma", 1.0));
  if (cfg.has("true_delta")) s.true_delta = cfg.get_double("true_delta");
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return s;
}

inline BinnedRejectionSpec binned_from_config(const ConfigValues& cfg) {
  BinnedRejectionSpec s;
  s.n_stage1 = static_cast<int>(cfg.get_long("n_stage1", 15));
  s.delta0 = cfg.get_double("delta0", 1.0);
  s.replications = replications_from(cfg, 100'000);
  s.master_seed = cfg.seed();
  s.bins = static_cast<int>(cfg.get_long("bins", 9));
  s.alpha = cfg.get_double("alpha", 0.05);
  s.beta = cfg.get_double("beta", 0.10);
  if (s.n_stage1 < 2 || s.bins < 1 || !(s.delta0 > 0.0)) {
    throw ConfigError("binned: need n_stage1 >= 2, bins >= 1 and delta0 > 0");
  }
  return s;
}

inline PeakScanSpec peaks_from_config(const ConfigValues& cfg) {
  PeakScanSpec s;
  s.n_stage1 = static_cast<int>(cfg.get_long("n_stage1", 15));
  s.delta0 = cfg.has("delta0") ? cfg.get_doubles("delta0") : PeakScanSpec::default_margins();
  for (double d : s.delta0) require_grid_delta0(d);
  s.replications = replications_from(cfg, 1'000'000);
  s.master_seed = cfg.seed();
  s.alpha = cfg.get_double("alpha", 0.05);
  s.beta = cfg.get_double("beta", 0.10);
  if (s.n_stage1 < 2) throw ConfigError("peaks: n_stage1 must be >= 2");
  return s;
}

// One setting per n1; c defaults to the example rule n - 1 + (n1/2) delta^2.
inline std::vector<ExactSetting> exact_from_config(const ConfigValues& cfg) {
  std::vector<ExactSetting> out;
  const std::vector<int> n1s = cfg.has("n1") ? cfg.get_ints("n1") : std::vector<int>{12, 24, 40};
  for (int n1 : n1s) {
    auto s = ExactSetting::threshold_example(n1, cfg.get_double("alpha", 0.05),
                                             cfg.get_double("delta_up", 0.5));
    if (cfg.has("sigma")) s.sigma = cfg.get_double("sigma");
    if (cfg.has("true_delta")) s.delta = cfg.get_double("true_delta");
    if (cfg.has("c")) s.c = cfg.get_double("c");
    try {
      s.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace bssr
