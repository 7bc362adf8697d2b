#pragma once

namespace subdetect {

double std_normal_pdf(double x);
double std_normal_cdf(double x);
/// Upper tail P(Z > x); computed via erfc so it stays accurate far out.
double std_normal_tail(double x);
/// log P(Z > x), stable for arbitrarily large x.
double log_std_normal_tail(double x);
/// Inverse of std_normal_cdf on (0, 1). Wichura's PPND16 rational fits.
double std_normal_quantile(double p);
/// Scaled complementary error function exp(x^2) erfc(x).
double erfcx(double x);

/// A truncation threshold tau paired with nu = E[Z^2 | |Z| > tau], the
/// centering constant of the truncated chi-square statistics.
struct TruncationConstant {
  double tau = 0.0;
  double nu = 1.0;

  bool operator==(const TruncationConstant&) const = default;
};

/// nu = E[Z^2 | |Z| > tau] = 1 + tau * phi(tau) / Q(tau). Defined for all
/// finite tau >= 0; the erfcx form avoids the tail underflow entirely.
TruncationConstant nu_tau(double tau);

}  // namespace subdetect
