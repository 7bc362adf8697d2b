#pragma once

#include <string_view>

#include "subdetect/shape.hpp"

namespace subdetect {

/// log C(n, k) via log-gamma in extended precision; absolute error well
/// below 1e-9 for n up to 1e6.
double log_binom(long long n, long long k);
/// log(e * C(n, k)) = 1 + log_binom(n, k); the form used inside the rates,
/// kept additive so C(n, k) itself never overflows.
double log_e_binom(long long n, long long k);

/// psi(s1,s2,d1,d2) = (1/s1) log(1 + (d2/s2^2) log(e C(d1,s1))).
double psi(long long s1, long long s2, long long d1, long long d2);
/// phi(s1,s2,d1,d2) = (d1/s1^2) log(1 + d2/s2^2).
double phi(long long s1, long long s2, long long d1, long long d2);
/// beta(s1,s2,d1,d2) = (1/(s1 s2)) log C(d2,s2) * 1{(d1/s1^2) log(e C(d2,s2)) > 1},
/// with the strict inequality exactly as written.
double beta(long long s1, long long s2, long long d1, long long d2);

/// Which term attains the dispatch rate Rtilde. Ties break in this fixed
/// priority order (phi regimes run polynomial-time constituents, so they win).
enum class Regime { kPhiA, kPhiB, kPsiBetaC, kPsiBetaD };

std::string_view regime_name(Regime regime);

struct RateBreakdown {
  ProblemShape shape;
  double psi12 = 0, psi21 = 0;
  double phi12 = 0, phi21 = 0;
  double beta12 = 0, beta21 = 0;
  /// rate = (psi12 + psi21) ^ phi12 ^ phi21, the squared minimax separation
  /// up to constants.
  double rate = 0;
  /// rate_tilde = (psi12 + beta21) ^ (psi21 + beta12) ^ phi12 ^ phi21.
  double rate_tilde = 0;
  Regime regime = Regime::kPhiA;
};

RateBreakdown rate_breakdown(const ProblemShape& shape);

/// The balanced-regime comparison rate
/// (d1 d2)/(s1^2 s2^2) ^ 2((1/s2) log(d1/s1) + (1/s1) log(d2/s2)).
/// Requires s_j < d_j so both logs are positive.
double bi_rate(const ProblemShape& shape);

/// Rate table rows for s1 = 1.
enum class S1Row { kBonferroni, kDense, kSparse };

struct S1RegimeResult {
  S1Row row;
  double rate;
  std::string_view optimal_test;  // detector name
};

S1RegimeResult s1_equals_1_regime(const ProblemShape& shape);

enum class Corollary { kCor1, kCor2, kCor3, kCor4 };

/// The unspecified "sufficiently small" constants in the corollary
/// hypotheses get concrete overridable defaults here.
struct CorollaryConstants {
  double cbar = 1.0 / (2 * 2.718281828459045 * 2 * 2.718281828459045 * 2 * 2.718281828459045 *
                       2 * 2.718281828459045);  // (2e)^-4
  double c1 = 0.01;
  double c2 = 0.01;
  double alpha = 0.5;
  // "s1 log(d1/s1) comparable to s2 log(d2/s2)" checked as ratio in [lo, hi].
  double balance_lo = 0.25;
  double balance_hi = 4.0;
};

struct CorollaryResult {
  bool assumptions_satisfied = false;
  double simplified_rate = 0;
};

CorollaryResult corollary_rate(const ProblemShape& shape, Corollary which,
                               const CorollaryConstants& constants = {});

}  // namespace subdetect
