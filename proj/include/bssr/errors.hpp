#pragma once

#include <stdexcept>
#include <string>

namespace bssr {

// Fewer observations than a statistic needs.
class InsufficientDataError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The sample-size formula has no finite solution (|D| >= delta0).
class InfeasibleDesignError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double estimate, double error_estimate,
                  int intervals)
      : std::runtime_error(what + " (estimate=" + std::to_string(estimate) +
                           ", error=" + std::to_string(error_estimate) +
                           ", intervals=" + std::to_string(intervals) + ")"),
        estimate_(estimate),
        error_estimate_(error_estimate),
        intervals_(intervals) {}

  double estimate() const noexcept { return estimate_; }
  double error_estimate() const noexcept { return error_estimate_; }
  int intervals() const noexcept { return intervals_; }

 private:
  double estimate_;
  double error_estimate_;
  int intervals_;
};

}  // namespace bssr
