#pragma once

#include <cstdint>
#include <vector>

#include "subdetect/rng.hpp"
#include "subdetect/shape.hpp"
#include "subdetect/subsets.hpp"

namespace subdetect {

/// Law of |S intersect S'| for two independent uniform size-s subsets of [d]:
/// hypergeometric with pmf(k) = C(s,k) C(d-s,s-k) / C(d,s) on
/// k in {max(0, 2s-d), ..., s}. Kept in log space alongside the linear pmf.
struct OverlapLaw {
  int d = 1, s = 1;
  int k_min = 0;
  std::vector<double> pmf;      // index k - k_min
  std::vector<double> log_pmf;
};

OverlapLaw hypergeom_overlap_pmf(int d, int s);

enum class SmMethod {
  kExactHypergeometric,
  kBinomialDominationBound,
  kMonteCarloOverlap,
  kMonteCarloLikelihood,
};

const char* sm_method_name(SmMethod method);

/// Null second moment of the likelihood ratio against the uniform prior on
/// the reduced alternative, E0[L^2] = E[exp(mu^2 W1 W2)], plus the total
/// variation and minimax-risk bounds it implies. log_second_moment is always
/// finite; second_moment overflows to inf when the log exceeds double range.
struct SecondMomentReport {
  ProblemShape shape;
  double mu = 0;
  double second_moment = 1;
  double log_second_moment = 0;
  double tv_upper_bound = 0;      // (1/2) sqrt(E0[L^2] - 1), clamped to [0,1]
  double risk_lower_bound = 1;    // 1 - tv_upper_bound
  SmMethod method = SmMethod::kExactHypergeometric;
  double se = 0;                  // Monte Carlo methods only
  std::uint64_t n_reps = 0;
};

double log_second_moment_exact(const ProblemShape& shape, double mu);
SecondMomentReport second_moment_exact(const ProblemShape& shape, double mu);

/// Diagnostic partial expectation: the exact double sum restricted to
/// k1 in [k1_lo, k1_hi] (log scale; -inf when the range misses the support).
double log_second_moment_partial(const ProblemShape& shape, double mu, int k1_lo, int k1_hi);

/// Upper bound via binomial domination: E[exp(mu^2 X Y)] for
/// X ~ Bin(s1, s1/(d1-s1)), Y ~ Bin(s2, s2/(d2-s2)), evaluated through the
/// binomial MGF sum_k P(X=k) (1 + p2 (e^{k mu^2} - 1))^{s2} in log space.
/// Requires s_j <= d_j/2 so the domination parameters are probabilities.
double log_second_moment_binom_bound(const ProblemShape& shape, double mu);
SecondMomentReport second_moment_binom_bound(const ProblemShape& shape, double mu);

struct DominationResult {
  bool holds = false;
  double max_violation = 0;  // max_t P(W > t) - P(Bin > t);
};

/// Checks P(W > t) <= P(Bin(s, s/(d-s)) > t) for every integer t.
DominationResult domination_check(int d, int s);

struct McEstimate {
  double estimate = 0;
  double se = 0;
  std::uint64_t n_reps = 0;
};

/// Direct Monte Carlo of E0[L^2]: sample Y under the null and average the
/// squared mixture likelihood ratio over all support pairs. Requires
/// C(d1,s1) * C(d2,s2) <= cap.
McEstimate mc_second_moment_likelihood(const ProblemShape& shape, double mu,
                                       std::uint64_t n_reps, SeedSpec seed,
                                       std::uint64_t cap = kDefaultEnumerationCap,
                                       int threads = 1);
SecondMomentReport mc_second_moment_likelihood_report(const ProblemShape& shape, double mu,
                                                      std::uint64_t n_reps, SeedSpec seed,
                                                      std::uint64_t cap = kDefaultEnumerationCap,
                                                      int threads = 1);

/// Monte Carlo over the overlap laws: average exp(mu^2 W1 W2) with
/// (W1, W2) sampled from the two hypergeometric overlap laws.
McEstimate mc_second_moment_overlap(const ProblemShape& shape, double mu, std::uint64_t n_reps,
                                    SeedSpec seed);
SecondMomentReport mc_second_moment_overlap_report(const ProblemShape& shape, double mu,
                                                   std::uint64_t n_reps, SeedSpec seed);

/// 1 - (1/2) sqrt(E0[L^2] - 1), clamped to [0, 1].
double risk_lower_bound_from_moment(double log_second_moment);
double risk_lower_bound(const ProblemShape& shape, double mu);

}  // namespace subdetect
