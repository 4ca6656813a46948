#pragma once

// Versioned CSV for scenario results. One row per ScenarioResult; integer
// counts are authoritative, percentages are printed with four decimals for
// reading and recomputed from the counts on ingest.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bssr/errors.hpp"
#include "bssr/mc_engine.hpp"

namespace bssr {

inline constexpr int kCsvSchemaVersion = 1;
inline constexpr std::string_view kCsvSchemaLine = "# bssr-results schema_version=1";

inline constexpr std::array<std::string_view, 24> kCsvColumns = {
    "n_stage1",     "n_min",        "n_max",        "delta_low",   "delta0",
    "sigma",        "alpha",        "beta",         "true_delta",  "replications",
    "count_case1",  "count_case2",  "count_case3",  "count_case4", "pct_case1",
    "pct_case2",    "pct_case3",    "pct_case4",    "ni_rejection_pct",
    "mean_realized_n", "sd_realized_n", "mean_sigma_t2", "master_seed", "cell_seed"};

namespace detail {

// Shortest representation that parses back to the same double.
inline std::string shortest(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw IoError("csv: cannot format number");
  return std::string(buf.data(), ptr);
}

inline std::string fixed4(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] =
      std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, 4);
  if (ec != std::errc{}) throw IoError("csv: cannot format number");
  return std::string(buf.data(), ptr);
}

template <typename T>
T csv_number(std::string_view field, int line) {
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw IoError("csv line " + std::to_string(line) + ": bad field '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace detail

inline std::string csv_header() {
  std::string out;
  for (std::size_t i = 0; i < kCsvColumns.size(); ++i) {
    if (i) out += ',';
    out += kCsvColumns[i];
  }
  return out;
}

inline std::string csv_row(const ScenarioResult& r) {
  using detail::fixed4;
  using detail::shortest;
  const auto& s = r.scenario;
  std::string row;
  auto add = [&](const std::string& field) {
    if (!row.empty()) row += ',';
    row += field;
  };
  add(std::to_string(s.design.n1_stage1));
  add(std::to_string(s.rule.n_min));
  add(s.rule.n_max ? std::to_string(*s.rule.n_max) : std::string("inf"));
  add(shortest(s.design.delta_low));
  add(shortest(s.design.delta_up));
  add(shortest(s.design.sigma));
  add(shortest(s.design.alpha));
  add(shortest(s.design.beta));
  add(shortest(s.true_delta));
  add(std::to_string(r.replications()));
  for (long c : r.case_counts) add(std::to_string(c));
  for (double p : r.pct_case) add(fixed4(p));
  add(fixed4(r.ni_rejection_pct));
  add(shortest(r.mean_realized_n));
  add(shortest(r.sd_realized_n));
  add(shortest(r.mean_sigma_t2));
  add(std::to_string(r.master_seed));
  add(std::to_string(s.master_seed));
  return row;
}

inline std::string format_results_csv(const std::vector<ScenarioResult>& results) {
  std::string out(kCsvSchemaLine);
  out += '\n';
  out += csv_header();
  out += '\n';
  for (const auto& r : results) {
    out += csv_row(r);
    out += '\n';
  }
  return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline void write_results_csv(const std::filesystem::path& path,
                              const std::vector<ScenarioResult>& results) {
  if (results.empty()) throw IoError("no results to write");
  write_text_file(path, format_results_csv(results));
}

inline std::vector<ScenarioResult> parse_results_csv(std::string_view text) {
  std::vector<ScenarioResult> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line) || line != kCsvSchemaLine) {
    throw IoError("csv: missing or unsupported schema line");
  }
  ++line_no;
  if (!std::getline(in, line) || line != csv_header()) throw IoError("csv: unexpected header");
  ++line_no;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      f.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (f.size() != kCsvColumns.size()) {
      throw IoError("csv line " + std::to_string(line_no) + ": expected " +
                    std::to_string(kCsvColumns.size()) + " fields");
    }
    using detail::csv_number;
    ScenarioResult r;
    auto& s = r.scenario;
    s.design.n1_stage1 = csv_number<int>(f[0], line_no);
    s.design.n2_stage1 = s.design.n1_stage1;
    s.rule.n_min = csv_number<long>(f[1], line_no);
    if (f[2] != "inf") s.rule.n_max = csv_number<long>(f[2], line_no);
    s.design.delta_low = csv_number<double>(f[3], line_no);
    s.design.delta_up = csv_number<double>(f[4], line_no);
    s.design.sigma = csv_number<double>(f[5], line_no);
    s.design.alpha = csv_number<double>(f[6], line_no);
    s.design.beta = csv_number<double>(f[7], line_no);
    s.true_delta = csv_number<double>(f[8], line_no);
    s.replications = csv_number<long>(f[9], line_no);
    for (std::size_t k = 0; k < 4; ++k) r.case_counts[k] = csv_number<long>(f[10 + k], line_no);
    r.update_percentages();
    r.mean_realized_n = csv_number<double>(f[19], line_no);
    r.sd_realized_n = csv_number<double>(f[20], line_no);
    r.mean_sigma_t2 = csv_number<double>(f[21], line_no);
    r.master_seed = csv_number<std::uint64_t>(f[22], line_no);
    s.master_seed = csv_number<std::uint64_t>(f[23], line_no);
    if (r.replications() != s.replications) {
      throw IoError("csv line " + std::to_string(line_no) + ": case counts do not sum to replications");
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<ScenarioResult> read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_results_csv(buffer.str());
}

}  // namespace bssr
