#include "subdetect/rates.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace subdetect {

namespace {

constexpr double kE = 2.718281828459045235;

double ratio(long long num, long long den) {
  return static_cast<double>(num) / static_cast<double>(den);
}

double over_square(long long d, long long s) {
  return static_cast<double>(d) / (static_cast<double>(s) * static_cast<double>(s));
}

}  // namespace

double log_binom(long long n, long long k) {
  if (k < 0 || k > n) throw std::invalid_argument("log_binom: k out of range");
  if (k == 0 || k == n) return 0.0;
  long double r = std::lgammal(static_cast<long double>(n) + 1.0L) -
                  std::lgammal(static_cast<long double>(k) + 1.0L) -
                  std::lgammal(static_cast<long double>(n - k) + 1.0L);
  return static_cast<double>(r);
}

double log_e_binom(long long n, long long k) { return 1.0 + log_binom(n, k); }

double psi(long long s1, long long s2, long long d1, long long d2) {
  return std::log1p(over_square(d2, s2) * log_e_binom(d1, s1)) / static_cast<double>(s1);
}

double phi(long long s1, long long s2, long long d1, long long d2) {
  return over_square(d1, s1) * std::log1p(over_square(d2, s2));
}

double beta(long long s1, long long s2, long long d1, long long d2) {
  bool active = over_square(d1, s1) * log_e_binom(d2, s2) > 1.0;
  if (!active) return 0.0;
  return log_binom(d2, s2) / (static_cast<double>(s1) * static_cast<double>(s2));
}

std::string_view regime_name(Regime regime) {
  switch (regime) {
    case Regime::kPhiA: return "phi12";
    case Regime::kPhiB: return "phi21";
    case Regime::kPsiBetaC: return "psi12+beta21";
    case Regime::kPsiBetaD: return "psi21+beta12";
  }
  return "?";
}

RateBreakdown rate_breakdown(const ProblemShape& shape) {
  RateBreakdown b;
  b.shape = shape;
  b.psi12 = psi(shape.s1, shape.s2, shape.d1, shape.d2);
  b.psi21 = psi(shape.s2, shape.s1, shape.d2, shape.d1);
  b.phi12 = phi(shape.s1, shape.s2, shape.d1, shape.d2);
  b.phi21 = phi(shape.s2, shape.s1, shape.d2, shape.d1);
  b.beta12 = beta(shape.s1, shape.s2, shape.d1, shape.d2);
  b.beta21 = beta(shape.s2, shape.s1, shape.d2, shape.d1);

  b.rate = std::min({b.psi12 + b.psi21, b.phi12, b.phi21});
  const double c_term = b.psi12 + b.beta21;
  const double d_term = b.psi21 + b.beta12;
  b.rate_tilde = std::min({c_term, d_term, b.phi12, b.phi21});

  if (b.phi12 == b.rate_tilde) b.regime = Regime::kPhiA;
  else if (b.phi21 == b.rate_tilde) b.regime = Regime::kPhiB;
  else if (c_term == b.rate_tilde) b.regime = Regime::kPsiBetaC;
  else b.regime = Regime::kPsiBetaD;
  return b;
}

double bi_rate(const ProblemShape& shape) {
  if (shape.s1 >= shape.d1 || shape.s2 >= shape.d2)
    throw std::invalid_argument("bi_rate: requires s_j < d_j (log terms vanish otherwise)");
  double dense = over_square(shape.d1, shape.s1) * over_square(shape.d2, shape.s2);
  double scan = 2.0 * (std::log(ratio(shape.d1, shape.s1)) / shape.s2 +
                       std::log(ratio(shape.d2, shape.s2)) / shape.s1);
  return std::min(dense, scan);
}

S1RegimeResult s1_equals_1_regime(const ProblemShape& shape) {
  if (shape.s1 != 1) throw std::invalid_argument("s1_equals_1_regime: requires s1 = 1");
  const double led1 = 1.0 + std::log(static_cast<double>(shape.d1));  // log(e d1)
  const double s2 = shape.s2;
  if (led1 > s2) {
    double rate = std::log(kE * shape.d2 / s2) + led1 / s2;
    return {S1Row::kBonferroni, rate, "max-trunc-chi2-1"};
  }
  const double load = shape.d2 * led1 / (s2 * s2);
  if (load <= 1.0) return {S1Row::kDense, over_square(shape.d2, shape.s2) * led1, "max-lin-1"};
  return {S1Row::kSparse, std::log1p(load), "max-trunc-chi2-1"};
}

CorollaryResult corollary_rate(const ProblemShape& shape, Corollary which,
                               const CorollaryConstants& k) {
  const double d1 = shape.d1, d2 = shape.d2, s1 = shape.s1, s2 = shape.s2;
  CorollaryResult res;
  switch (which) {
    case Corollary::kCor1: {
      if (d1 / s1 < kE || d2 / s2 < kE) return res;
      double l1 = std::log(d1 / s1), l2 = std::log(d2 / s2);
      if (std::log(l1) / l2 > 1.0 || std::log(l2) / l1 > 1.0) return res;
      double balance = (s1 * l1) / (s2 * l2);
      if (balance < k.balance_lo || balance > k.balance_hi) return res;
      res.assumptions_satisfied = true;
      res.simplified_rate = std::min(d1 * d2 / (s1 * s1 * s2 * s2), l1 / s2 + l2 / s1);
      return res;
    }
    case Corollary::kCor2: {
      if (s1 * s1 < k.cbar * d1 * s2) return res;
      if (s1 > k.c1 * d1 || s2 > k.c2 * d2) return res;
      if (d1 / s1 < kE * std::log(d2 / s2)) return res;
      if (d2 < std::pow(s2, 2.0 + k.alpha)) return res;
      res.assumptions_satisfied = true;
      res.simplified_rate = std::log1p(d1 * s2 * std::log(d2) / (s1 * s1)) / s2;
      return res;
    }
    case Corollary::kCor3: {
      if (static_cast<long long>(shape.s1) !=
              static_cast<long long>(shape.s2) * shape.s2 ||
          static_cast<long long>(shape.d1) != static_cast<long long>(shape.d2) * shape.d2)
        return res;
      if (d1 < std::pow(s1, 2.0 + k.alpha)) return res;
      res.assumptions_satisfied = true;
      res.simplified_rate = std::log(d1) / std::sqrt(s1);
      return res;
    }
    case Corollary::kCor4: {
      if (s1 * s1 <= d1 * s2 * std::log(d2)) return res;
      if (s1 > k.c1 * d1 || s2 > k.c2 * d2) return res;
      if (d1 / s1 < kE * std::log(d2 / s2)) return res;
      if (d2 < std::pow(s2, 2.0 + k.alpha)) return res;
      res.assumptions_satisfied = true;
      res.simplified_rate = d1 / (s1 * s1) * std::log(d2);
      return res;
    }
  }
  return res;
}

}  // namespace subdetect
