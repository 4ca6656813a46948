#include <catch_amalgamated.hpp>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>

#include "bssr/exact_analytics.hpp"
#include "bssr/mc_engine.hpp"

using namespace bssr;
using Catch::Approx;
namespace bm = boost::math;

namespace {

// Independent evaluation straight from the joint-probability definition in
// the original (Q1, d) scale, with boost distributions and boost quadrature
// on a fixed fine partition of [0, c]; no crossing points are used.
double oracle_joint(const ExactSetting& s, TestMode mode) {
  const int n = 2 * s.n1;
  const bm::normal_distribution<double> n01;
  const bm::chi_squared_distribution<double> chi(n - 2);
  const double q = bm::quantile(bm::students_t_distribution<double>(n - 2), s.alpha);
  const double k = std::sqrt(s.n1 / 2.0);
  const double s2 = s.sigma * s.sigma;
  auto f = [&](double x) {  // x = Q1 / sigma^2
    if (x <= 0.0 || x >= s.c / s2) return 0.0;
    const double radius = std::sqrt(s.c / s2 - x);       // |W| bound from Q2 <= c - Q1
    const double t_bound = q * std::sqrt(x / (n - 2));  // q s / sigma scaled
    double hi = std::min(radius, t_bound + k * s.delta_up / s.sigma);
    double lo = -radius;
    if (mode == TestMode::Equivalence) lo = std::max(lo, -t_bound + k * s.delta_low / s.sigma);
    const double mu = k * s.delta / s.sigma;
    if (hi <= lo) return 0.0;
    return (bm::cdf(n01, hi - mu) - bm::cdf(n01, lo - mu)) * bm::pdf(chi, x);
  };
  const int pieces = 4000;
  const double top = s.c / s2;
  double total = 0.0;
  for (int i = 0; i < pieces; ++i) {
    const double a = top * i / pieces;
    const double b = top * (i + 1) / pieces;
    total += bm::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 0, 1e-13);
  }
  return total;
}

}  // namespace

TEST_CASE("joint probability of rejecting H02 with a small variance", "[exact-analytics]") {
  const double target[] = {0.0401, 0.0396, 0.0393};
  const int sizes[] = {12, 24, 40};
  for (int i = 0; i < 3; ++i) {
    const auto s = ExactSetting::threshold_example(sizes[i]);
    const double a1 = prob_reject_and_small_variance(s);
    INFO("n1=" << sizes[i]);
    CHECK(a1 == Approx(target[i]).margin(5e-4));
    CHECK(a1 == Approx(oracle_joint(s, TestMode::NonInferiority)).margin(1e-8));
  }
}

TEST_CASE("joint probability of equivalence with a small variance", "[exact-analytics]") {
  const double target[] = {0.0009, 0.0193, 0.0379};
  const int sizes[] = {12, 24, 40};
  for (int i = 0; i < 3; ++i) {
    const auto s = ExactSetting::threshold_example(sizes[i]);
    const double a2 = prob_reject_both_and_small_variance(s);
    INFO("n1=" << sizes[i]);
    CHECK(a2 == Approx(target[i]).margin(5e-4));
    CHECK(a2 == Approx(oracle_joint(s, TestMode::Equivalence)).margin(1e-8));
  }
}

TEST_CASE("probability of a small variance", "[exact-analytics]") {
  for (int n1 : {12, 24, 40}) {
    const auto s = ExactSetting::threshold_example(n1);
    const bm::non_central_chi_squared_distribution<double> dist(2 * n1 - 1, 0.5 * n1 * 0.25);
    CHECK(prob_small_variance(s) == Approx(bm::cdf(dist, s.c)).margin(1e-10));
  }
  auto zero = ExactSetting::threshold_example(12);
  zero.delta = 0.0;
  CHECK(prob_small_variance(zero) == Approx(chi2_cdf(zero.c, DegreesOfFreedom(23))).margin(1e-14));
}

TEST_CASE("exact values agree with simulation of the same rule", "[exact-analytics][oracle]") {
  for (int n1 : {12, 24, 40}) {
    const auto s = ExactSetting::threshold_example(n1);
    ThresholdRuleScenario sc;
    sc.n_per_group = n1;
    sc.c = s.c;
    sc.replications = 1'000'000;
    sc.continue_stage2 = 1'000'000L * n1;
    sc.master_seed = 500 + n1;
    const auto mc = run_threshold_rule(sc, {4});
    const auto ni = ni_type1_exact(s);
    const auto eq = eq_type1_exact(s);
    INFO("n1=" << n1);
    CHECK(std::fabs(mc.prob_small() - ni.prob_small) <= 3.0 * mc.standard_error(ni.prob_small));
    CHECK(std::fabs(mc.ni_joint() - ni.joint_small) <= 3.0 * mc.standard_error(ni.joint_small));
    CHECK(std::fabs(mc.eq_joint() - eq.joint_small) <= 3.0 * mc.standard_error(eq.joint_small));
    CHECK(std::fabs(mc.ni_unconditional() - ni.unconditional) <=
          3.0 * mc.standard_error(ni.unconditional));
    CHECK(std::fabs(mc.eq_unconditional() - eq.unconditional) <=
          3.0 * mc.standard_error(eq.unconditional));
  }
}

TEST_CASE("integration limits", "[exact-analytics]") {
  for (int n1 : {12, 24, 40}) {
    for (auto mode : {TestMode::NonInferiority, TestMode::Equivalence}) {
      const auto s = ExactSetting::threshold_example(n1);
      const auto lim = solve_integration_limits(s, mode);
      REQUIRE_FALSE(lim.empty);
      CHECK(lim.l_star >= 0.0);
      CHECK(lim.l_star < lim.c_star);
      CHECK(lim.c_star <= s.c);
      CHECK(std::is_sorted(lim.breakpoints.begin(), lim.breakpoints.end()));
    }
  }

  // A huge upper margin never binds: the whole range [0, c] is used.
  auto wide = ExactSetting::threshold_example(12);
  wide.delta_up = 50.0;
  const auto lim = solve_integration_limits(wide, TestMode::NonInferiority);
  CHECK(lim.l_star == 0.0);
  CHECK(lim.c_star == Approx(wide.c).margin(1e-12));
}

TEST_CASE("interior limits solve the boundary equations", "[exact-analytics]") {
  // With a small threshold the rejection line leaves the disc before x = c
  // for the narrower margins, so c* is interior there.
  for (double delta_up : {0.2, 0.5, 1.0}) {
    ExactSetting s = ExactSetting::threshold_example(12, 0.05, delta_up);
    s.c = 10.0;
    const auto lim = solve_integration_limits(s, TestMode::NonInferiority);
    const int n = s.n_total();
    const double q = student_t_quantile(s.alpha, DegreesOfFreedom(n - 2));
    const double k = std::sqrt(s.n1 / 2.0);
    auto residual = [&](double x, double sign) {
      return q * std::sqrt(x / (n - 2)) - (sign * std::sqrt(std::max(0.0, s.c - x)) - k * s.delta_up);
    };
    for (double x : {lim.l_star, lim.c_star}) {
      if (x > 1e-12 && x < s.c - 1e-12) {
        INFO("delta_up=" << delta_up << " x=" << x);
        CHECK(std::min(std::fabs(residual(x, 1.0)), std::fabs(residual(x, -1.0))) <= 1e-10);
      }
    }
  }
}

TEST_CASE("integrand positive exactly between the limits", "[exact-analytics]") {
  for (double c : {3.0, 10.0, 24.5, 60.0}) {
    for (auto mode : {TestMode::NonInferiority, TestMode::Equivalence}) {
      auto s = ExactSetting::threshold_example(12);
      s.c = c;
      s.delta_up = mode == TestMode::Equivalence ? 1.2 : 0.5;
      s.delta_low = -s.delta_up;
      const detail::ThresholdGeometry geo(s, mode);
      const auto lim = solve_integration_limits(s, mode);
      // Dense scan oracle for the support of the integrand.
      double first = -1.0;
      double last = -1.0;
      constexpr int grid = 200000;
      for (int i = 1; i < grid; ++i) {
        const double x = c * i / grid;
        if (geo.gap(std::sqrt(x)) > 0.0) {
          if (first < 0) first = x;
          last = x;
        }
      }
      INFO("c=" << c << " mode=" << static_cast<int>(mode));
      if (first < 0) {
        CHECK(lim.empty);
        continue;
      }
      CHECK(lim.l_star == Approx(first).margin(2.0 * c / grid));
      CHECK(lim.c_star == Approx(last).margin(2.0 * c / grid));
      const double eps = 1e-7 * c;
      CHECK(geo.integrand(lim.l_star + eps) > 0.0);
      CHECK(geo.integrand(lim.c_star - eps) > 0.0);
      if (lim.l_star > eps) CHECK(geo.gap(std::sqrt(lim.l_star - eps)) <= 0.0);
      if (lim.c_star < c - eps) CHECK(geo.gap(std::sqrt(lim.c_star + eps)) <= 0.0);
    }
  }
}

TEST_CASE("empty equivalence region gives zero", "[exact-analytics]") {
  // Both margins lie beyond the radius of the variance disc.
  auto s = ExactSetting::threshold_example(3);
  s.delta_up = 2.0;
  s.delta_low = 1.0;
  s.delta = 2.0;
  s.c = 1.0;
  const auto lim = solve_integration_limits(s, TestMode::Equivalence);
  CHECK(lim.empty);
  CHECK(prob_reject_both_and_small_variance(s) == 0.0);
  const auto eq = eq_type1_exact(s);
  CHECK(eq.unconditional == Approx(s.alpha * (1.0 - eq.prob_small)));
}

TEST_CASE("assembly of conditional and unconditional rates", "[exact-analytics]") {
  for (int n1 : {12, 24, 40}) {
    const auto s = ExactSetting::threshold_example(n1);
    const auto ni = ni_type1_exact(s);
    const auto eq = eq_type1_exact(s);
    CHECK(ni.conditional == Approx(ni.joint_small / ni.prob_small).epsilon(1e-15));
    CHECK(ni.unconditional == Approx(ni.joint_small + 0.05 * (1 - ni.prob_small)).epsilon(1e-15));
    CHECK(eq.unconditional <= ni.unconditional);
    CHECK(eq.conditional <= ni.conditional);
    // Stopping only on small variances inflates the conditional level.
    CHECK(ni.conditional >= s.alpha);
  }
}

TEST_CASE("without stopping the level is nominal", "[exact-analytics]") {
  auto s = ExactSetting::threshold_example(12);
  s.c = 1e4;
  const auto ni = ni_type1_exact(s);
  CHECK(ni.prob_small == Approx(1.0).margin(1e-12));
  CHECK(ni.unconditional == Approx(s.alpha).margin(1e-9));
  CHECK(ni.conditional == Approx(s.alpha).margin(1e-9));
}

TEST_CASE("unconditional level grows with stage 1 size", "[exact-analytics]") {
  const double a = ni_type1_exact(ExactSetting::threshold_example(12)).unconditional;
  const double b = ni_type1_exact(ExactSetting::threshold_example(24)).unconditional;
  const double c = ni_type1_exact(ExactSetting::threshold_example(40)).unconditional;
  CHECK(a <= b);
  CHECK(b <= c);
}

TEST_CASE("quadrature is stable under a halved tolerance", "[exact-analytics][property]") {
  for (int n1 : {12, 24, 40}) {
    const auto s = ExactSetting::threshold_example(n1);
    for (auto mode : {TestMode::NonInferiority, TestMode::Equivalence}) {
      const auto loose = joint_rejection_small_variance(s, mode, {1e-9, 1e-9, 4000});
      const auto tight = joint_rejection_small_variance(s, mode, {5e-10, 5e-10, 4000});
      CHECK(std::fabs(loose.value - tight.value) <= 1e-8);
      CHECK(loose.abs_error <= 1e-6);
    }
  }
}

TEST_CASE("setting validation", "[exact-analytics]") {
  auto s = ExactSetting::threshold_example(12);
  CHECK(s.c == Approx(24.5));
  CHECK(s.n_total() == 24);
  s.c = -1.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = ExactSetting::threshold_example(1);
  CHECK_THROWS_AS(prob_reject_and_small_variance(s), std::invalid_argument);
  s = ExactSetting::threshold_example(12);
  s.delta_low = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(eq_type1_exact(s), std::invalid_argument);
}
