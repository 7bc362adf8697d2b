#include "subdetect/harness.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace subdetect {

int default_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

bool PreparedDetector::evaluate_reject(const Matrix& y) const {
  switch (choice.type) {
    case DetectorChoice::Type::kConstituent:
      return evaluate_detector(specs.at(choice.kind), y, cap).reject;
    case DetectorChoice::Type::kStar:
      return delta_star(y, shape, *rates, specs, cap).reject;
    case DetectorChoice::Type::kAda:
      return delta_star_ada(y, *ada, cap).reject;
  }
  return false;
}

namespace {

StatRequest request_for(DetectorKind kind, const ProblemShape& shape) {
  StatRequest req;
  req.kind = kind;
  if (kind == DetectorKind::kTruncChi2Axis1 || kind == DetectorKind::kTruncChi2Axis2)
    req.tau = trunc_tau(shape, detector_axis(kind));
  if (kind == DetectorKind::kMaxTruncChi2Axis1 || kind == DetectorKind::kMaxTruncChi2Axis2)
    req.tau = max_trunc_tau(shape, detector_axis(kind));
  if (is_bonferroni(kind))
    req.subset_size = detector_axis(kind) == Axis::kOne ? shape.s1 : shape.s2;
  return req;
}

// Conservative one-sided order statistic for the (1 - level) quantile:
// rank = ceil((n+1)(1-level) + 1.5 sqrt(n level (1-level))). The shift keeps
// fresh-sample type I at or below the level despite calibration noise.
std::size_t conservative_rank(std::uint64_t n, double level) {
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("calibrate: level must lie in (0,1)");
  if (static_cast<double>(n) < 10.0 / level)
    throw std::invalid_argument("calibrate: insufficient replicates for requested level");
  double base = (static_cast<double>(n) + 1.0) * (1.0 - level);
  double shift = 1.5 * std::sqrt(static_cast<double>(n) * level * (1.0 - level));
  double r = std::ceil(base + shift);
  if (r > static_cast<double>(n)) r = static_cast<double>(n);
  return static_cast<std::size_t>(r);
}

double quantile_from_samples(std::vector<double>& values, double level) {
  std::size_t rank = conservative_rank(values.size(), level);
  std::sort(values.begin(), values.end());
  return values[rank - 1];
}

// One column of null statistic samples per request, on common observations.
std::vector<std::vector<double>> null_statistic_samples(std::span<const StatRequest> requests,
                                                        const ProblemShape& shape,
                                                        std::uint64_t n_reps, SeedSpec seed,
                                                        std::uint64_t cap, int threads) {
  std::vector<std::vector<double>> samples(requests.size(),
                                           std::vector<double>(n_reps, 0.0));
  const std::uint64_t root = derive_root(seed.root_seed, "calibrate");
  parallel_for(n_reps, threads, [&](std::uint64_t r) {
    Observation obs =
        sample_observation(shape, std::nullopt, SeedSpec{root, seed.stream_index + r});
    std::vector<double> vals = evaluate_statistics(obs.values, requests, cap);
    for (std::size_t q = 0; q < requests.size(); ++q) samples[q][r] = vals[q];
  });
  return samples;
}

}  // namespace

double calibrate_cutoff(DetectorKind kind, const ProblemShape& shape, double level,
                        std::uint64_t n_reps, SeedSpec seed, std::uint64_t cap, int threads) {
  std::array<DetectorKind, 1> kinds = {kind};
  return calibrate_cutoffs(kinds, shape, level, n_reps, seed, cap, threads).at(kind);
}

std::map<DetectorKind, double> calibrate_cutoffs(std::span<const DetectorKind> kinds,
                                                 const ProblemShape& shape, double level,
                                                 std::uint64_t n_reps, SeedSpec seed,
                                                 std::uint64_t cap, int threads) {
  std::vector<StatRequest> requests;
  requests.reserve(kinds.size());
  for (DetectorKind kind : kinds) {
    // Fail fast on infeasible scans before burning replicates.
    if (is_bonferroni(kind) && is_truncated(kind)) {
      int d = detector_axis(kind) == Axis::kOne ? shape.d1 : shape.d2;
      int s = detector_axis(kind) == Axis::kOne ? shape.s1 : shape.s2;
      binom_count_checked(d, s, cap);
    }
    requests.push_back(request_for(kind, shape));
  }
  auto samples = null_statistic_samples(requests, shape, n_reps, seed, cap, threads);
  std::map<DetectorKind, double> cutoffs;
  for (std::size_t q = 0; q < kinds.size(); ++q)
    cutoffs[kinds[q]] = quantile_from_samples(samples[q], level);
  return cutoffs;
}

AdaSpecSet calibrated_ada_specs(int d1, int d2, double level, std::uint64_t n_reps,
                                SeedSpec seed, std::uint64_t cap, int threads) {
  AdaSpecSet set = theoretical_ada_specs(d1, d2, level);
  if (set.points.empty()) return set;
  const double point_level = level / static_cast<double>(set.points.size());
  ProblemShape ambient(d1, d2, 1, 1);

  std::vector<StatRequest> requests;
  requests.reserve(set.points.size());
  for (const auto& p : set.points) {
    StatRequest req;
    req.kind = p.kind;
    req.tau = p.tau;
    if (is_bonferroni(p.kind))
      req.subset_size = detector_axis(p.kind) == Axis::kOne ? p.s1 : p.s2;
    if (is_bonferroni(req.kind) && is_truncated(req.kind)) {
      int d = detector_axis(req.kind) == Axis::kOne ? d1 : d2;
      binom_count_checked(d, req.subset_size, cap);
    }
    requests.push_back(req);
  }
  auto samples = null_statistic_samples(requests, ambient, n_reps, seed, cap, threads);
  for (std::size_t q = 0; q < set.points.size(); ++q)
    set.points[q].cutoff = quantile_from_samples(samples[q], point_level);
  return set;
}

PreparedDetector prepare_detector(DetectorChoice choice, const ProblemShape& shape,
                                  const CutoffRequest& cutoff, std::uint64_t cap, int threads) {
  PreparedDetector det;
  det.shape = shape;
  det.choice = choice;
  det.cap = cap;

  auto calibrate_one = [&](DetectorKind kind, DetectorSpec& spec) {
    spec.cutoff = calibrate_cutoff(kind, shape, cutoff.level, cutoff.n_reps, cutoff.seed, cap,
                                   threads);
    spec.provenance.mode = CutoffMode::kCalibrated;
    spec.provenance.level = cutoff.level;
    spec.provenance.n_reps = cutoff.n_reps;
    spec.provenance.seed = cutoff.seed;
  };

  switch (choice.type) {
    case DetectorChoice::Type::kConstituent: {
      auto all = theoretical_cutoffs(shape, cutoff.constants);
      DetectorSpec spec = all.at(choice.kind);
      if (cutoff.mode == CutoffMode::kCalibrated) calibrate_one(choice.kind, spec);
      det.specs.emplace(choice.kind, spec);
      det.label = std::string(detector_name(choice.kind));
      break;
    }
    case DetectorChoice::Type::kStar: {
      det.rates = rate_breakdown(shape);
      DetectorKind kind = dispatch_constituent(shape, *det.rates);
      auto all = theoretical_cutoffs(shape, cutoff.constants);
      DetectorSpec spec = all.at(kind);
      if (cutoff.mode == CutoffMode::kCalibrated) calibrate_one(kind, spec);
      det.specs.emplace(kind, spec);
      det.label = "delta-star[" + std::string(detector_name(kind)) + "]";
      break;
    }
    case DetectorChoice::Type::kAda: {
      det.ada = cutoff.mode == CutoffMode::kCalibrated
                    ? calibrated_ada_specs(shape.d1, shape.d2, cutoff.level, cutoff.n_reps,
                                           cutoff.seed, cap, threads)
                    : theoretical_ada_specs(shape.d1, shape.d2, cutoff.level, cutoff.constants);
      det.label = "delta-star-ada";
      break;
    }
  }
  return det;
}

namespace {

struct ErrorRate {
  double p = 0, se = 0;
};

ErrorRate rate_from_flags(const std::vector<char>& flags) {
  double p = 0;
  for (char c : flags) p += c;
  p /= static_cast<double>(flags.size());
  double se = std::sqrt(p * (1.0 - p) / static_cast<double>(flags.size()));
  return {p, se};
}

std::vector<char> null_rejects(const PreparedDetector& det, std::uint64_t n_reps, SeedSpec seed,
                               int threads) {
  std::vector<char> rejected(n_reps, 0);
  const std::uint64_t root = derive_root(seed.root_seed, "risk-null");
  parallel_for(n_reps, threads, [&](std::uint64_t r) {
    Observation obs =
        sample_observation(det.shape, std::nullopt, SeedSpec{root, seed.stream_index + r});
    rejected[r] = det.evaluate_reject(obs.values) ? 1 : 0;
  });
  return rejected;
}

std::vector<char> alt_accepts(const PreparedDetector& det, double mu, std::uint64_t n_reps,
                              SeedSpec seed, SupportPolicy policy, int threads) {
  std::vector<char> accepted(n_reps, 0);
  const std::uint64_t noise_root = derive_root(seed.root_seed, "risk-alt");
  const std::uint64_t support_root = derive_root(seed.root_seed, "risk-support");
  parallel_for(n_reps, threads, [&](std::uint64_t r) {
    PlantedMean mean;
    if (policy == SupportPolicy::kUniformRandom) {
      auto [rows, cols] =
          sample_random_support(det.shape, SeedSpec{support_root, seed.stream_index + r});
      mean = make_planted_mean(det.shape, std::move(rows), std::move(cols), mu);
    } else {
      std::vector<int> rows(det.shape.s1), cols(det.shape.s2);
      for (int i = 0; i < det.shape.s1; ++i) rows[i] = i;
      for (int j = 0; j < det.shape.s2; ++j) cols[j] = j;
      mean = make_planted_mean(det.shape, std::move(rows), std::move(cols), mu);
    }
    Observation obs =
        sample_observation(det.shape, mean, SeedSpec{noise_root, seed.stream_index + r});
    accepted[r] = det.evaluate_reject(obs.values) ? 0 : 1;
  });
  return accepted;
}

}  // namespace

RiskEstimate estimate_risk(const PreparedDetector& det, double mu, std::uint64_t n_reps,
                           SeedSpec seed, SupportPolicy policy, int threads) {
  if (n_reps < 100) throw std::invalid_argument("estimate_risk: need at least 100 replicates");
  if (!(mu >= 0.0)) throw std::invalid_argument("estimate_risk: mu must be nonnegative");
  RiskEstimate est;
  est.n_reps = n_reps;
  est.seed = seed;
  est.detector = det.label;
  auto t1 = rate_from_flags(null_rejects(det, n_reps, seed, threads));
  auto t2 = rate_from_flags(alt_accepts(det, mu, n_reps, seed, policy, threads));
  est.type_i = t1.p;
  est.type_i_se = t1.se;
  est.type_ii = t2.p;
  est.type_ii_se = t2.se;
  est.risk = est.type_i + est.type_ii;
  return est;
}

SweepResult mu_sweep(const PreparedDetector& det, std::span<const double> multiples,
                     std::uint64_t n_reps, SeedSpec seed, double eta, SupportPolicy policy,
                     int threads) {
  for (std::size_t i = 0; i + 1 < multiples.size(); ++i)
    if (!(multiples[i] < multiples[i + 1]))
      throw std::invalid_argument("mu_sweep: multiples must be strictly increasing");
  for (double m : multiples)
    if (!(m >= 0.0)) throw std::invalid_argument("mu_sweep: multiples must be nonnegative");

  SweepResult sweep;
  sweep.shape = det.shape;
  sweep.rate = rate_breakdown(det.shape).rate;
  sweep.eta = eta;
  const double root_rate = std::sqrt(sweep.rate);

  // Null pass shared across every sweep point.
  auto t1 = rate_from_flags(null_rejects(det, n_reps, seed, threads));
  for (double m : multiples) {
    SweepPoint point;
    point.multiple = m;
    point.mu = m * root_rate;
    auto t2 = rate_from_flags(alt_accepts(det, point.mu, n_reps, seed, policy, threads));
    point.risk.type_i = t1.p;
    point.risk.type_i_se = t1.se;
    point.risk.type_ii = t2.p;
    point.risk.type_ii_se = t2.se;
    point.risk.risk = t1.p + t2.p;
    point.risk.n_reps = n_reps;
    point.risk.seed = seed;
    point.risk.detector = det.label;
    sweep.points.push_back(point);
  }
  for (const auto& p : sweep.points) {
    if (p.risk.risk >= 0.5) sweep.largest_risky_multiple = p.multiple;
    if (p.risk.risk <= eta && !sweep.smallest_safe_multiple)
      sweep.smallest_safe_multiple = p.multiple;
  }
  return sweep;
}

namespace {

StudyResult cor1_study(const CorollaryConstants& constants) {
  static const int kShapes[][4] = {
      {32, 32, 2, 2},     {32, 32, 4, 4},     {64, 64, 2, 2},    {64, 64, 4, 4},
      {64, 64, 8, 8},     {128, 128, 2, 2},   {128, 128, 4, 4},  {128, 128, 8, 8},
      {256, 256, 4, 4},   {256, 256, 8, 8},   {256, 256, 16, 16}, {512, 512, 8, 8},
      {512, 512, 16, 16}, {1024, 1024, 16, 16}, {1024, 1024, 32, 32},
      {64, 128, 4, 5},    {128, 64, 5, 4},    {128, 256, 8, 10}, {256, 128, 10, 8},
      {96, 192, 6, 7},
  };
  StudyResult res;
  res.kind = StudyKind::kCor1Match;
  bool all_band = true, all_conform = true;
  for (const auto& q : kShapes) {
    ProblemShape shape(q[0], q[1], q[2], q[3]);
    StudyRow row;
    row.shape = shape;
    auto cor = corollary_rate(shape, Corollary::kCor1, constants);
    row.conforming = cor.assumptions_satisfied;
    RateBreakdown rb = rate_breakdown(shape);
    row.rate = rb.rate;
    row.regime = rb.regime;
    row.reference_rate = bi_rate(shape);
    row.ratio = row.rate / row.reference_rate;
    row.match = row.ratio >= 1.0 / 50.0 && row.ratio <= 50.0;
    all_band = all_band && row.match;
    all_conform = all_conform && row.conforming;
    res.rows.push_back(row);
  }
  res.pass = all_band && all_conform;
  res.verdict = res.pass ? "all ratios within [1/50, 50] on conforming shapes"
                         : "ratio band or conformance violated";
  return res;
}

StudyResult prop3_study(const CorollaryConstants& constants) {
  StudyResult res;
  res.kind = StudyKind::kProp3Trend;
  bool all_conform = true;
  // s2 large enough that s2^(2+alpha) also clears the s2 <= c2 d2 floor;
  // below that the floor freezes d2/s2 and the suboptimality gap stalls.
  for (int s2 : {32, 64, 128, 256}) {
    double d2_raw = std::max(std::pow(static_cast<double>(s2), 2.0 + constants.alpha),
                             static_cast<double>(s2) / constants.c2);
    int d2 = static_cast<int>(std::ceil(d2_raw));
    long long d1 = static_cast<long long>(
        std::ceil(2.0e5 * static_cast<double>(s2) * std::log(static_cast<double>(d2))));
    long long s1 = static_cast<long long>(std::floor(constants.c1 * static_cast<double>(d1)));
    ProblemShape shape(static_cast<int>(d1), d2, static_cast<int>(s1), s2);
    StudyRow row;
    row.shape = shape;
    auto cor = corollary_rate(shape, Corollary::kCor4, constants);
    row.conforming = cor.assumptions_satisfied;
    all_conform = all_conform && row.conforming;
    RateBreakdown rb = rate_breakdown(shape);
    row.rate = rb.rate;
    row.regime = rb.regime;
    row.reference_rate = bi_rate(shape);
    row.ratio = row.rate / row.reference_rate;
    res.rows.push_back(row);
  }
  bool decreasing = true;
  for (std::size_t i = 0; i + 1 < res.rows.size(); ++i)
    decreasing = decreasing && res.rows[i + 1].ratio < res.rows[i].ratio;
  res.pass = decreasing && all_conform && res.rows.size() >= 4;
  res.verdict = res.pass ? "rate/bi_rate strictly decreasing along the sequence"
                         : "trend or conformance violated";
  return res;
}

StudyResult s1eq1_study() {
  static const int kShapes[][4] = {
      // log(e d1) > s2
      {64, 64, 1, 2},
      {256, 128, 1, 4},
      {1024, 64, 1, 3},
      // dense: log(e d1) < s2, d2 log(e d1) / s2^2 <= 1
      {16, 16, 1, 8},
      {16, 32, 1, 12},
      {32, 24, 1, 11},
      // sparse: log(e d1) < s2, d2 log(e d1) / s2^2 > 1
      {32, 64, 1, 6},
      {64, 128, 1, 6},
      {128, 256, 1, 8},
  };
  StudyResult res;
  res.kind = StudyKind::kS1Eq1Table;
  bool all_ok = true;
  for (const auto& q : kShapes) {
    ProblemShape shape(q[0], q[1], q[2], q[3]);
    StudyRow row;
    row.shape = shape;
    row.conforming = true;
    auto table = s1_equals_1_regime(shape);
    RateBreakdown rb = rate_breakdown(shape);
    row.rate = rb.rate;
    row.regime = rb.regime;
    row.reference_rate = table.rate;
    row.ratio = table.rate / rb.rate;
    row.expected = std::string(table.optimal_test);
    row.actual = std::string(detector_name(dispatch_constituent(shape, rb)));
    row.match = row.expected == row.actual && row.ratio >= 1.0 / 50.0 && row.ratio <= 50.0;
    all_ok = all_ok && row.match;
    res.rows.push_back(row);
  }
  res.pass = all_ok;
  res.verdict = res.pass ? "table rows match the dispatched constituents and rate band"
                         : "row mismatch";
  return res;
}

}  // namespace

StudyResult rate_comparison_study(StudyKind kind, const CorollaryConstants& constants) {
  switch (kind) {
    case StudyKind::kCor1Match: return cor1_study(constants);
    case StudyKind::kProp3Trend: return prop3_study(constants);
    case StudyKind::kS1Eq1Table: return s1eq1_study();
  }
  throw std::invalid_argument("rate_comparison_study: unknown study");
}

}  // namespace subdetect
