#pragma once

// Normal, Student t, central and non-central chi-square distributions.
//
// Accuracy contracts (enforced by tests):
//   normal_cdf                 absolute error <= 1e-12
//   normal_quantile            normal_cdf(result) = p to 1e-10
//   student_t_quantile         bracketed safeguarded Newton, 1e-12 interval tolerance
//   noncentral_chi2_cdf        absolute error <= 1e-9 (Poisson mixture truncated at
//                              cumulative weight 1 - 1e-12)

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace bssr {

class DegreesOfFreedom {
 public:
  explicit DegreesOfFreedom(double value) : value_(value) {
    if (!std::isfinite(value) || value < 1.0) {
      throw std::domain_error("degrees of freedom must be finite and >= 1, got " +
                              std::to_string(value));
    }
  }
  double value() const noexcept { return value_; }

 private:
  double value_;
};

class NoncentralityParameter {
 public:
  explicit NoncentralityParameter(double value) : value_(value) {
    if (!std::isfinite(value) || value < 0.0) {
      throw std::domain_error("non-centrality must be finite and >= 0, got " +
                              std::to_string(value));
    }
  }
  double value() const noexcept { return value_; }

 private:
  double value_;
};

namespace detail {

inline constexpr double kEps = 1e-16;
inline constexpr double kTiny = 1e-300;
inline constexpr int kMaxIterations = 200000;

inline void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) {
    throw std::domain_error(std::string(what) + ": argument must be finite");
  }
}

inline void require_probability(double p, const char* what) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error(std::string(what) + ": probability must lie in (0,1), got " +
                            std::to_string(p));
  }
}

// lgamma(b + a) - lgamma(b), without the cancellation lgamma suffers for large b.
inline double log_gamma_ratio(double b, double a) {
  if (b < 1e3) return std::lgamma(b + a) - std::lgamma(b);
  auto series = [](double z) {
    const double z2 = z * z;
    return 1.0 / (12.0 * z) - 1.0 / (360.0 * z * z2) + 1.0 / (1260.0 * z * z2 * z2);
  };
  return (b - 0.5) * std::log1p(a / b) + a * std::log(b + a) - a + series(b + a) -
         series(b);
}

// log B(a, b)
inline double log_beta(double a, double b) {
  if (a > b) std::swap(a, b);
  // lgamma(a) + lgamma(b) - lgamma(a + b)
  return std::lgamma(a) - log_gamma_ratio(b, a);
}

inline double gamma_p_series(double a, double x) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int i = 0; i < kMaxIterations; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kEps) {
      return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
  }
  throw std::runtime_error("regularized gamma series failed to converge");
}

inline double gamma_q_continued_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) {
      return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
    }
  }
  throw std::runtime_error("regularized gamma continued fraction failed to converge");
}

// Modified Lentz evaluation of the incomplete beta continued fraction.
inline double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m < kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) return h;
  }
  throw std::runtime_error("incomplete beta continued fraction failed to converge");
}

}  // namespace detail

// Regularized lower incomplete gamma P(a, x).
inline double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0)) {
    throw std::domain_error("regularized_gamma_p: requires a > 0 and x >= 0");
  }
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return detail::gamma_p_series(a, x);
  return 1.0 - detail::gamma_q_continued_fraction(a, x);
}

// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
inline double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0)) {
    throw std::domain_error("regularized_gamma_q: requires a > 0 and x >= 0");
  }
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_continued_fraction(a, x);
}

// Regularized incomplete beta I_x(a, b). `y` must equal 1 - x; passing it
// separately keeps precision when x is close to 1.
inline double regularized_beta(double a, double b, double x, double y) {
  if (!(a > 0.0) || !(b > 0.0) || !(x >= 0.0) || !(y >= 0.0)) {
    throw std::domain_error("regularized_beta: requires a, b > 0 and x in [0,1]");
  }
  if (x == 0.0) return 0.0;
  if (y == 0.0) return 1.0;
  // x and y are both supplied so the larger of the two logs can go through log1p.
  const double log_x = x < 0.5 ? std::log(x) : std::log1p(-y);
  const double log_y = y < 0.5 ? std::log(y) : std::log1p(-x);
  const double log_front = a * log_x + b * log_y - detail::log_beta(a, b);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(log_front) * detail::beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - std::exp(log_front) * detail::beta_continued_fraction(b, a, y) / b;
}

inline double regularized_beta(double a, double b, double x) {
  return regularized_beta(a, b, x, 1.0 - x);
}

// ---------------------------------------------------------------------------
// Standard normal

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double x) {
  detail::require_finite(x, "normal_cdf");
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

// Upper tail 1 - Phi(x), accurate for large positive x.
inline double normal_sf(double x) {
  detail::require_finite(x, "normal_sf");
  return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

// P(lo < Z <= hi), evaluated on whichever tail keeps precision.
inline double normal_interval_probability(double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  if (lo > 0.0) return normal_sf(lo) - normal_sf(hi);
  return normal_cdf(hi) - normal_cdf(lo);
}

// Wichura's AS241 (PPND16) followed by one Newton polish on the smaller tail.
inline double normal_quantile(double p) {
  detail::require_probability(p, "normal_quantile");
  const double q = p - 0.5;
  double x;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
              6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
            1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
          1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
    const double den =
        (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
              3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
            5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
          4.2313330701600911252e+1) * r + 1.0);
    x = q * num / den;
  } else {
    double r = std::sqrt(-std::log(q < 0.0 ? p : 1.0 - p));
    double num;
    double den;
    if (r <= 5.0) {
      r -= 1.6;
      num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
              4.63033784615654529590e+0) * r + 1.42343711074968357734e+0);
      den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
              2.05319162663775882187e+0) * r + 1.0);
    } else {
      r -= 5.0;
      num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
              5.46378491116411436990e+0) * r + 6.65790464350110377720e+0);
      den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
    }
    x = num / den;
    if (q < 0.0) x = -x;
  }
  const double density = normal_pdf(x);
  if (density > 0.0) {
    const double residual = p < 0.5 ? normal_cdf(x) - p : (1.0 - p) - normal_sf(x);
    x -= residual / density;
  }
  return x;
}

// ---------------------------------------------------------------------------
// Student t

inline double student_t_pdf(double t, DegreesOfFreedom df) {
  const double v = df.value();
  const double log_norm = -0.5 * std::log(v) - detail::log_beta(0.5, 0.5 * v);
  return std::exp(log_norm - 0.5 * (v + 1.0) * std::log1p(t * t / v));
}

// P(T > t) for t >= 0.
inline double student_t_upper_tail(double t, DegreesOfFreedom df) {
  const double v = df.value();
  const double t2 = t * t;
  const double x = v / (v + t2);
  const double y = t2 / (v + t2);
  return 0.5 * regularized_beta(0.5 * v, 0.5, x, y);
}

inline double student_t_cdf(double t, DegreesOfFreedom df) {
  detail::require_finite(t, "student_t_cdf");
  if (t == 0.0) return 0.5;
  const double tail = student_t_upper_tail(std::fabs(t), df);
  return t > 0.0 ? 1.0 - tail : tail;
}

namespace detail {

// t with P(T > t) = tail, for 0 < tail < 0.5. Works on the tail directly so
// extreme probabilities keep their relative precision.
inline double student_t_upper_quantile(double tail, DegreesOfFreedom df) {
  const double v = df.value();
  if (v == 1.0) return 1.0 / std::tan(std::numbers::pi * tail);
  if (v == 2.0) return (1.0 - 2.0 * tail) / std::sqrt(2.0 * tail * (1.0 - tail));

  // Cornish-Fisher start.
  const double z = -normal_quantile(tail);
  const double z3 = z * z * z;
  const double z5 = z3 * z * z;
  double t = z + (z3 + z) / (4.0 * v) + (5.0 * z5 + 16.0 * z3 + 3.0 * z) / (96.0 * v * v);
  if (!(t > 0.0)) t = z;

  // Bracket [lo, hi] with upper_tail(lo) > tail >= upper_tail(hi).
  double lo = 0.0;
  double hi = std::max(t, 1e-3);
  while (student_t_upper_tail(hi, df) > tail) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw std::runtime_error("student_t_quantile: bracketing failed");
  }
  t = std::clamp(t, lo, hi);

  for (int i = 0; i < 200; ++i) {
    const double f = student_t_upper_tail(t, df) - tail;  // decreasing in t
    if (f > 0.0) {
      lo = t;
    } else if (f < 0.0) {
      hi = t;
    } else {
      return t;
    }
    const double slope = -student_t_pdf(t, df);
    double next = slope != 0.0 ? t - f / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::fabs(next - t);
    t = next;
    if (hi - lo < 1e-12 || step < 1e-14 * std::max(1.0, std::fabs(t))) return t;
  }
  return t;
}

}  // namespace detail

inline double student_t_quantile(double p, DegreesOfFreedom df) {
  detail::require_probability(p, "student_t_quantile");
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -detail::student_t_upper_quantile(p, df);
  return detail::student_t_upper_quantile(1.0 - p, df);
}

// ---------------------------------------------------------------------------
// Chi-square

inline double chi2_pdf(double x, DegreesOfFreedom df) {
  if (!(x >= 0.0)) throw std::domain_error("chi2_pdf: x must be >= 0");
  const double k = df.value();
  if (x == 0.0) {
    if (k < 2.0) return std::numeric_limits<double>::infinity();
    return k == 2.0 ? 0.5 : 0.0;
  }
  if (std::isinf(x)) return 0.0;
  const double half = 0.5 * k;
  return std::exp((half - 1.0) * std::log(x) - 0.5 * x - half * std::numbers::ln2 -
                  std::lgamma(half));
}

inline double chi2_cdf(double x, DegreesOfFreedom df) {
  if (!(x >= 0.0)) throw std::domain_error("chi2_cdf: x must be >= 0");
  return regularized_gamma_p(0.5 * df.value(), 0.5 * x);
}

// Poisson(ncp/2) mixture of central chi-square CDFs, summed outward from the
// modal weight until the accumulated weight exceeds 1 - 1e-12.
inline double noncentral_chi2_cdf(double x, DegreesOfFreedom df, NoncentralityParameter ncp) {
  if (!(x >= 0.0)) throw std::domain_error("noncentral_chi2_cdf: x must be >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  const double lambda = 0.5 * ncp.value();
  if (lambda == 0.0) return chi2_cdf(x, df);

  const double half_x = 0.5 * x;
  const double half_df = 0.5 * df.value();
  const long mode = static_cast<long>(std::floor(lambda));
  const double mode_weight =
      std::exp(-lambda + mode * std::log(lambda) - std::lgamma(mode + 1.0));

  double sum = mode_weight * regularized_gamma_p(half_df + mode, half_x);
  double weight_total = mode_weight;

  double w = mode_weight;
  for (long k = mode - 1; k >= 0; --k) {
    w *= (k + 1) / lambda;
    sum += w * regularized_gamma_p(half_df + k, half_x);
    weight_total += w;
    if (w < 1e-300) break;
  }

  constexpr double kWeightTarget = 1.0 - 1e-12;
  w = mode_weight;
  for (long k = mode + 1; weight_total < kWeightTarget; ++k) {
    w *= lambda / k;
    if (w == 0.0) break;
    sum += w * regularized_gamma_p(half_df + k, half_x);
    weight_total += w;
    if (k - mode > 100000) {
      throw std::runtime_error("noncentral_chi2_cdf: series failed to converge");
    }
  }
  return std::clamp(sum, 0.0, 1.0);
}

}  // namespace bssr
