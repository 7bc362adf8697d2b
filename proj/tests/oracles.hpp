#pragma once

// Test-only reference implementations, kept independent of the library code
// paths they check.

#include <cstdint>
#include <span>
#include <vector>

#include "subdetect/gauss.hpp"
#include "subdetect/matrix.hpp"

namespace oracles {

/// E[Z^2 | |Z| > tau] by adaptive Gauss-Kronrod quadrature on [tau, tau+40],
/// relative tolerance 1e-12.
double nu_tau_quadrature(double tau);

/// P(Z > x) by quadrature of the density (for moderate x).
double normal_tail_quadrature(double x);

/// Exact log C(n, k) through big-integer arithmetic.
double log_binom_exact(long long n, long long k);

/// Kolmogorov-Smirnov distance of a sample against the standard normal.
double ks_statistic_normal(std::vector<double> sample);
/// Large-sample critical value c(alpha)/sqrt(n) for alpha = 0.01.
double ks_critical_1pct(std::size_t n);

/// Brute-force Bonferroni linear scan: enumerate every subset.
double max_lin_exhaustive(const subdetect::Matrix& y, int subset_size);

/// Independent Bonferroni truncated chi-square scan: iterative colex
/// enumeration with per-subset sums accumulated from the largest row down
/// (the same addition order the library uses, so results match bit-for-bit).
double max_trunc_exhaustive(const subdetect::Matrix& y, int subset_size,
                            const subdetect::TruncationConstant& tau,
                            std::vector<int>* argmax = nullptr);

/// Brute-force E0[L^2]: group all support pairs per axis by overlap size.
double second_moment_support_pairs(int d1, int d2, int s1, int s2, double mu);

/// Literal quadruple enumeration over ((S1,S2),(S1',S2')) pairs.
double second_moment_quadruple(int d1, int d2, int s1, int s2, double mu);

}  // namespace oracles
