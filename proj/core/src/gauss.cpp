#include "subdetect/gauss.hpp"

#include <cmath>
#include <stdexcept>

namespace subdetect {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
constexpr double kSqrt2OverPi = 0.7978845608028653559;  // sqrt(2/pi)

// Asymptotic series for erfcx(x) = 1/(x sqrt(pi)) * sum (-1)^n (2n-1)!! / (2x^2)^n.
// At x >= 12 fifteen terms are far below double precision.
double erfcx_asymptotic(double x) {
  double inv2x2 = 1.0 / (2.0 * x * x);
  double term = 1.0;
  double sum = 1.0;
  for (int n = 1; n <= 15; ++n) {
    term *= -(2.0 * n - 1.0) * inv2x2;
    sum += term;
  }
  return sum / (x * 1.7724538509055160273);  // sqrt(pi)
}

}  // namespace

double erfcx(double x) {
  if (std::isnan(x)) return x;
  if (x < 0.0) {
    // erfcx(-x) = 2 exp(x^2) - erfcx(x); overflows quickly, callers stay mild.
    double e = 2.0 * std::exp(x * x);
    return e - erfcx(-x);
  }
  if (x < 12.0) return std::exp(x * x) * std::erfc(x);
  return erfcx_asymptotic(x);
}

double std_normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double std_normal_tail(double x) { return 0.5 * std::erfc(x / kSqrt2); }

double log_std_normal_tail(double x) {
  if (x <= 0.0) return std::log(std_normal_tail(x));
  return std::log(0.5 * erfcx(x / kSqrt2)) - 0.5 * x * x;
}

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("std_normal_quantile: p must lie in (0, 1)");

  // Algorithm AS 241, PPND16 (Wichura 1988). Accurate to ~1e-16 relative.
  const double q = p - 0.5;
  double r;
  if (std::fabs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
              3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
            4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
            2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
            5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return (q < 0.0) ? -val : val;
}

TruncationConstant nu_tau(double tau) {
  if (!(tau >= 0.0) || !std::isfinite(tau))
    throw std::invalid_argument("nu_tau: tau must be finite and nonnegative");
  // E[Z^2 1(|Z|>tau)] = 2(tau phi(tau) + Q(tau)), so the conditional second
  // moment is 1 + tau phi(tau)/Q(tau) = 1 + tau sqrt(2/pi) / erfcx(tau/sqrt(2)).
  double nu = 1.0 + tau * kSqrt2OverPi / erfcx(tau / kSqrt2);
  return TruncationConstant{tau, nu};
}

}  // namespace subdetect
