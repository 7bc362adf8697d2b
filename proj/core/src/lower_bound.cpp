#include "subdetect/lower_bound.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "subdetect/rates.hpp"

namespace subdetect {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const std::vector<double>& logs) {
  double mx = kNegInf;
  for (double v : logs) mx = std::max(mx, v);
  if (mx == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double v : logs) acc += std::exp(v - mx);
  return mx + std::log(acc);
}

SecondMomentReport report_from_log(const ProblemShape& shape, double mu, double log_sm,
                                   SmMethod method) {
  SecondMomentReport rep;
  rep.shape = shape;
  rep.mu = mu;
  rep.method = method;
  rep.log_second_moment = log_sm;
  rep.second_moment = std::exp(log_sm);
  rep.risk_lower_bound = risk_lower_bound_from_moment(log_sm);
  rep.tv_upper_bound = 1.0 - rep.risk_lower_bound;
  return rep;
}

void check_mu(double mu) {
  if (!(mu >= 0.0) || !std::isfinite(mu))
    throw std::invalid_argument("second moment: mu must be finite and nonnegative");
}

}  // namespace

const char* sm_method_name(SmMethod method) {
  switch (method) {
    case SmMethod::kExactHypergeometric: return "exact-hypergeometric";
    case SmMethod::kBinomialDominationBound: return "binomial-domination-bound";
    case SmMethod::kMonteCarloOverlap: return "mc-overlap";
    case SmMethod::kMonteCarloLikelihood: return "mc-likelihood";
  }
  return "?";
}

OverlapLaw hypergeom_overlap_pmf(int d, int s) {
  if (s < 1 || s > d) throw std::invalid_argument("hypergeom_overlap_pmf: need 1 <= s <= d");
  OverlapLaw law;
  law.d = d;
  law.s = s;
  law.k_min = std::max(0, 2 * s - d);
  const double log_total = log_binom(d, s);
  for (int k = law.k_min; k <= s; ++k) {
    double lp = log_binom(s, k) + log_binom(d - s, s - k) - log_total;
    law.log_pmf.push_back(lp);
    law.pmf.push_back(std::exp(lp));
  }
  return law;
}

double log_second_moment_exact(const ProblemShape& shape, double mu) {
  check_mu(mu);
  if (mu == 0.0) return 0.0;
  OverlapLaw l1 = hypergeom_overlap_pmf(shape.d1, shape.s1);
  OverlapLaw l2 = hypergeom_overlap_pmf(shape.d2, shape.s2);
  const double mu2 = mu * mu;
  std::vector<double> logs;
  logs.reserve(l1.pmf.size() * l2.pmf.size());
  for (std::size_t a = 0; a < l1.pmf.size(); ++a)
    for (std::size_t b = 0; b < l2.pmf.size(); ++b) {
      double k1 = l1.k_min + static_cast<double>(a);
      double k2 = l2.k_min + static_cast<double>(b);
      logs.push_back(mu2 * k1 * k2 + l1.log_pmf[a] + l2.log_pmf[b]);
    }
  return log_sum_exp(logs);
}

SecondMomentReport second_moment_exact(const ProblemShape& shape, double mu) {
  return report_from_log(shape, mu, log_second_moment_exact(shape, mu),
                         SmMethod::kExactHypergeometric);
}

double log_second_moment_partial(const ProblemShape& shape, double mu, int k1_lo, int k1_hi) {
  check_mu(mu);
  OverlapLaw l1 = hypergeom_overlap_pmf(shape.d1, shape.s1);
  OverlapLaw l2 = hypergeom_overlap_pmf(shape.d2, shape.s2);
  const double mu2 = mu * mu;
  std::vector<double> logs;
  for (std::size_t a = 0; a < l1.pmf.size(); ++a) {
    int k1 = l1.k_min + static_cast<int>(a);
    if (k1 < k1_lo || k1 > k1_hi) continue;
    for (std::size_t b = 0; b < l2.pmf.size(); ++b) {
      double k2 = l2.k_min + static_cast<double>(b);
      logs.push_back(mu2 * k1 * k2 + l1.log_pmf[a] + l2.log_pmf[b]);
    }
  }
  return log_sum_exp(logs);
}

namespace {

// log of the binomial pmf of Bin(n, p); p in (0, 1].
double log_binom_pmf(int n, int k, double p) {
  if (p >= 1.0) return k == n ? 0.0 : kNegInf;
  return log_binom(n, k) + k * std::log(p) + (n - k) * std::log1p(-p);
}

// log(1 + p (e^x - 1)) without overflow for large x.
double log_mgf_factor(double p, double x) {
  if (x > 36.0) return x + std::log(p) + std::log1p((1.0 - p) / p * std::exp(-x));
  return std::log1p(p * std::expm1(x));
}

}  // namespace

double log_second_moment_binom_bound(const ProblemShape& shape, double mu) {
  check_mu(mu);
  if (shape.s1 >= shape.d1 || shape.s2 >= shape.d2)
    throw std::invalid_argument("binom bound: requires s_j < d_j");
  if (2 * shape.s1 > shape.d1 || 2 * shape.s2 > shape.d2)
    throw std::invalid_argument("binom bound: requires s_j <= d_j/2 (domination parameter <= 1)");
  const double p1 = static_cast<double>(shape.s1) / (shape.d1 - shape.s1);
  const double p2 = static_cast<double>(shape.s2) / (shape.d2 - shape.s2);
  const double mu2 = mu * mu;
  std::vector<double> logs;
  logs.reserve(shape.s1 + 1);
  for (int k = 0; k <= shape.s1; ++k)
    logs.push_back(log_binom_pmf(shape.s1, k, p1) +
                   shape.s2 * log_mgf_factor(p2, static_cast<double>(k) * mu2));
  return log_sum_exp(logs);
}

SecondMomentReport second_moment_binom_bound(const ProblemShape& shape, double mu) {
  return report_from_log(shape, mu, log_second_moment_binom_bound(shape, mu),
                         SmMethod::kBinomialDominationBound);
}

DominationResult domination_check(int d, int s) {
  if (s < 1 || 2 * s > d)
    throw std::invalid_argument("domination_check: requires 1 <= s <= d/2");
  OverlapLaw w = hypergeom_overlap_pmf(d, s);
  const double p = static_cast<double>(s) / (d - s);
  std::vector<double> bin(s + 1);
  for (int k = 0; k <= s; ++k) bin[k] = std::exp(log_binom_pmf(s, k, p));

  // Survival functions by suffix summation in extended precision.
  DominationResult res;
  res.max_violation = -std::numeric_limits<double>::infinity();
  for (int t = -1; t <= s; ++t) {
    long double sw = 0.0L, sb = 0.0L;
    for (int k = s; k > t; --k) {
      if (k >= w.k_min) sw += w.pmf[k - w.k_min];
      sb += bin[k];
    }
    res.max_violation =
        std::max(res.max_violation, static_cast<double>(sw - sb));
  }
  res.holds = res.max_violation <= 1e-12;
  return res;
}

namespace {

// All size-s subsets of [d] as sorted index lists; cap guards the count.
std::vector<std::vector<int>> all_subsets(int d, int s, std::uint64_t cap) {
  binom_count_checked(d, s, cap);
  std::vector<std::vector<int>> out;
  std::vector<int> cur(s);
  for (int i = 0; i < s; ++i) cur[i] = i;
  while (true) {
    out.push_back(cur);
    if (next_colex_subset(cur, d) < 0) break;
  }
  return out;
}

McEstimate mean_and_se(const std::vector<double>& xs) {
  McEstimate est;
  est.n_reps = xs.size();
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  est.estimate = mean;
  est.se = xs.size() > 1
               ? std::sqrt(ss / (static_cast<double>(xs.size()) * (xs.size() - 1.0)))
               : 0.0;
  return est;
}

}  // namespace

McEstimate mc_second_moment_likelihood(const ProblemShape& shape, double mu,
                                       std::uint64_t n_reps, SeedSpec seed, std::uint64_t cap,
                                       int threads) {
  check_mu(mu);
  if (n_reps == 0) throw std::invalid_argument("mc_second_moment_likelihood: n_reps must be > 0");
  std::uint64_t n1 = binom_count_checked(shape.d1, shape.s1, cap);
  std::uint64_t n2 = binom_count_checked(shape.d2, shape.s2, cap);
  if (static_cast<unsigned __int128>(n1) * n2 > cap)
    throw enumeration_cap_error(shape.d1, shape.s1, cap);

  auto rows = all_subsets(shape.d1, shape.s1, cap);
  auto cols = all_subsets(shape.d2, shape.s2, cap);
  const double mu2 = mu * mu;
  const double shift = 0.5 * shape.s1 * shape.s2 * mu2;
  const double log_pairs = std::log(static_cast<double>(rows.size())) +
                           std::log(static_cast<double>(cols.size()));

  std::vector<double> samples(n_reps);
  // Threaded by the caller (harness) when needed; keep this loop simple.
  (void)threads;
  for (std::uint64_t r = 0; r < n_reps; ++r) {
    Matrix y(shape.d1, shape.d2);
    RandomStream stream(SeedSpec{seed.root_seed, seed.stream_index + r});
    for (double& v : y.data()) v = stream.next_normal();

    std::vector<double> logs;
    logs.reserve(rows.size() * cols.size());
    std::vector<double> colsum(shape.d1);
    for (const auto& cset : cols) {
      for (int i = 0; i < shape.d1; ++i) {
        double acc = 0.0;
        const double* row = y.row(i);
        for (int j : cset) acc += row[j];
        colsum[i] = acc;
      }
      for (const auto& rset : rows) {
        double block = 0.0;
        for (int i : rset) block += colsum[i];
        logs.push_back(mu * block - shift);
      }
    }
    double log_l = log_sum_exp(logs) - log_pairs;
    samples[r] = std::exp(2.0 * log_l);
  }
  return mean_and_se(samples);
}

SecondMomentReport mc_second_moment_likelihood_report(const ProblemShape& shape, double mu,
                                                      std::uint64_t n_reps, SeedSpec seed,
                                                      std::uint64_t cap, int threads) {
  McEstimate est = mc_second_moment_likelihood(shape, mu, n_reps, seed, cap, threads);
  SecondMomentReport rep =
      report_from_log(shape, mu, std::log(est.estimate), SmMethod::kMonteCarloLikelihood);
  rep.se = est.se;
  rep.n_reps = est.n_reps;
  return rep;
}

namespace {

int sample_overlap(const OverlapLaw& law, RandomStream& stream) {
  double u = stream.next_unit();
  double acc = 0.0;
  for (std::size_t a = 0; a < law.pmf.size(); ++a) {
    acc += law.pmf[a];
    if (u <= acc) return law.k_min + static_cast<int>(a);
  }
  return law.s;
}

}  // namespace

McEstimate mc_second_moment_overlap(const ProblemShape& shape, double mu, std::uint64_t n_reps,
                                    SeedSpec seed) {
  check_mu(mu);
  if (n_reps == 0) throw std::invalid_argument("mc_second_moment_overlap: n_reps must be > 0");
  OverlapLaw l1 = hypergeom_overlap_pmf(shape.d1, shape.s1);
  OverlapLaw l2 = hypergeom_overlap_pmf(shape.d2, shape.s2);
  const double mu2 = mu * mu;
  std::vector<double> samples(n_reps);
  for (std::uint64_t r = 0; r < n_reps; ++r) {
    RandomStream stream(SeedSpec{seed.root_seed, seed.stream_index + r});
    int k1 = sample_overlap(l1, stream);
    int k2 = sample_overlap(l2, stream);
    samples[r] = std::exp(mu2 * k1 * k2);
  }
  return mean_and_se(samples);
}

SecondMomentReport mc_second_moment_overlap_report(const ProblemShape& shape, double mu,
                                                   std::uint64_t n_reps, SeedSpec seed) {
  McEstimate est = mc_second_moment_overlap(shape, mu, n_reps, seed);
  SecondMomentReport rep =
      report_from_log(shape, mu, std::log(est.estimate), SmMethod::kMonteCarloOverlap);
  rep.se = est.se;
  rep.n_reps = est.n_reps;
  return rep;
}

double risk_lower_bound_from_moment(double log_second_moment) {
  if (log_second_moment <= 0.0) return 1.0;
  double excess = std::expm1(log_second_moment);  // E0[L^2] - 1, stable near 0
  double bound = 1.0 - 0.5 * std::sqrt(excess);
  return std::clamp(bound, 0.0, 1.0);
}

double risk_lower_bound(const ProblemShape& shape, double mu) {
  return risk_lower_bound_from_moment(log_second_moment_exact(shape, mu));
}

}  // namespace subdetect
