#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "subdetect/detectors.hpp"
#include "subdetect/harness.hpp"
#include "subdetect/observation.hpp"

using namespace subdetect;

namespace {

Matrix random_matrix(int rows, int cols, std::uint64_t seed, std::uint64_t stream) {
  Matrix y(rows, cols);
  RandomStream rs(SeedSpec{seed, stream});
  for (double& v : y.data()) v = rs.next_normal();
  return y;
}

}  // namespace

TEST_SUITE_BEGIN("detectors");

TEST_CASE("column means, full and subset") {
  Matrix zeros(3, 4);
  for (double v : col_means_full(zeros)) CHECK(v == 0.0);

  Matrix ones(4, 3, 1.0);
  for (double v : col_means_full(ones)) CHECK(v == doctest::Approx(2.0));  // 4/sqrt(4)

  Matrix nine(9, 2, 1.0);
  std::vector<int> all(9);
  for (int i = 0; i < 9; ++i) all[i] = i;
  for (double v : col_means_subset(nine, all)) CHECK(v == doctest::Approx(3.0));  // 9/sqrt(9)
  // subset over every row equals the full version
  Matrix y = random_matrix(5, 7, 10, 0);
  std::vector<int> rows5{0, 1, 2, 3, 4};
  auto a = col_means_full(y);
  auto b = col_means_subset(y, rows5);
  for (int j = 0; j < 7; ++j) CHECK(a[j] == b[j]);
  // singleton subset is the row itself
  std::vector<int> one{2};
  auto c = col_means_subset(y, one);
  for (int j = 0; j < 7; ++j) CHECK(c[j] == y(2, j));
  CHECK_THROWS_AS((void)col_means_subset(y, std::vector<int>{9}), std::invalid_argument);
}

TEST_CASE("linear statistic") {
  Matrix zeros(4, 4);
  CHECK(stat_linear(zeros) == 0.0);
  Matrix ones(2, 2, 1.0);
  CHECK(stat_linear(ones) == doctest::Approx(2.0));  // 4/sqrt(4)
  // H0 Monte Carlo sample passes KS at 1%
  std::vector<double> sample(4000);
  for (int r = 0; r < 4000; ++r)
    sample[r] = stat_linear(random_matrix(8, 8, 555, static_cast<std::uint64_t>(r)));
  CHECK(oracles::ks_statistic_normal(sample) < oracles::ks_critical_1pct(sample.size()));
}

TEST_CASE("truncated chi-square statistic basics") {
  // all below tau -> empty truncation set
  Matrix small(4, 3, 0.01);
  CHECK(stat_trunc_chi2(small, Axis::kOne, nu_tau(1.5)) == 0.0);

  // single active column: value (tau+1)^2 - nu
  TruncationConstant t = nu_tau(1.25);
  Matrix y(1, 5);
  y(0, 0) = t.tau + 1.0;  // d1 = 1 so col mean is the entry itself
  CHECK(stat_trunc_chi2(y, Axis::kOne, t) ==
        doctest::Approx((t.tau + 1.0) * (t.tau + 1.0) - t.nu).epsilon(1e-14));

  // centering keeps the null mean near zero at the lemma's tau
  ProblemShape shape(16, 16, 2, 4);
  TruncationConstant tau = trunc_tau(shape, Axis::kOne);
  const int n = 100000;
  double acc = 0;
  for (int r = 0; r < n; ++r)
    acc += stat_trunc_chi2(random_matrix(16, 16, 777, static_cast<std::uint64_t>(r)),
                           Axis::kOne, tau);
  double mean = acc / n;
  // per-column variance of the truncated term is O(1); 3 SE band with margin
  CHECK(std::fabs(mean) <= 0.2);
}

TEST_CASE("max-lin shortcut: basics and oracle equality") {
  Matrix zeros(5, 4);
  auto z = stat_max_lin(zeros, Axis::kOne, 2);
  CHECK(z.value == 0.0);
  CHECK(z.subset == std::vector<int>{0, 1});  // tie broken toward lowest indices

  Matrix m(3, 2);
  m(0, 0) = 2;  m(0, 1) = 3;   // row sums 5
  m(1, 0) = 1;  m(1, 1) = 0;   // 1
  m(2, 0) = 2;  m(2, 1) = 1;   // 3
  auto r = stat_max_lin(m, Axis::kOne, 2);
  CHECK(r.subset == std::vector<int>{0, 2});
  CHECK(r.value == doctest::Approx(8.0 / std::sqrt(4.0)).epsilon(1e-14));
  CHECK(r.value == oracles::max_lin_exhaustive(m, 2));

  for (int trial = 0; trial < 100; ++trial) {
    Matrix y = random_matrix(6, 4, 909, static_cast<std::uint64_t>(trial));
    auto got = stat_max_lin(y, Axis::kOne, 3);
    CHECK(got.value == oracles::max_lin_exhaustive(y, 3));
  }
}

TEST_CASE("max-trunc-chi2 equals the independent enumerator exactly") {
  TruncationConstant tau = nu_tau(1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix y = random_matrix(8, 6, 1234, static_cast<std::uint64_t>(trial));
    std::vector<int> oracle_subset;
    double expect = oracles::max_trunc_exhaustive(y, 3, tau, &oracle_subset);
    auto got = stat_max_trunc_chi2(y, Axis::kOne, 3, tau, 100000);
    CHECK(got.value == expect);
    CHECK(got.subset == oracle_subset);
    CHECK(got.work == 56);  // C(8,3)
  }
}

TEST_CASE("max-trunc-chi2 degenerate cases") {
  TruncationConstant tau = nu_tau(0.7);
  Matrix y = random_matrix(5, 4, 22, 0);
  // s = d: single subset, identical arithmetic to the plain statistic
  auto full = stat_max_trunc_chi2(y, Axis::kOne, 5, tau, 100);
  CHECK(full.value == stat_trunc_chi2(y, Axis::kOne, tau));
  CHECK(full.work == 1);
  // enormous tau: nothing survives truncation in any subset
  auto none = stat_max_trunc_chi2(y, Axis::kOne, 2, nu_tau(50.0), 100);
  CHECK(none.value == 0.0);
  // cap violation reports the instance
  CHECK_THROWS_AS((void)stat_max_trunc_chi2(random_matrix(30, 4, 1, 0), Axis::kOne, 15,
                                            tau, 1000),
                  enumeration_cap_error);
}

TEST_CASE("transpose symmetry is exact for every axis-2 statistic") {
  for (int trial = 0; trial < 100; ++trial) {
    Matrix y = random_matrix(7, 5, 31415, static_cast<std::uint64_t>(trial));
    Matrix yt = y.transposed();
    TruncationConstant tau = nu_tau(0.9);
    CHECK(stat_trunc_chi2(y, Axis::kTwo, tau) == stat_trunc_chi2(yt, Axis::kOne, tau));
    CHECK(stat_max_lin(y, Axis::kTwo, 2).value == stat_max_lin(yt, Axis::kOne, 2).value);
    CHECK(stat_max_trunc_chi2(y, Axis::kTwo, 2, tau, 10000).value ==
          stat_max_trunc_chi2(yt, Axis::kOne, 2, tau, 10000).value);
  }
}

TEST_CASE("monotone response to lifting the planted block") {
  RandomStream rs(SeedSpec{99, 5});
  Matrix y = random_matrix(8, 8, 99, 5);
  Matrix lifted = y;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) lifted(i, j) += 0.8;
  CHECK(stat_linear(lifted) > stat_linear(y));
  CHECK(stat_max_lin(lifted, Axis::kOne, 3).value >= stat_max_lin(y, Axis::kOne, 3).value);

  // truncated statistics increase in distributional mean along a mu grid
  ProblemShape shape(8, 8, 3, 2);
  TruncationConstant tau = trunc_tau(shape, Axis::kOne);
  const int n = 4000;
  double prev = -1e18;
  for (double mu : {0.0, 1.0, 2.5}) {
    auto mean = make_planted_mean(shape, {0, 1, 2}, {0, 1}, mu);
    double acc = 0;
    for (int r = 0; r < n; ++r) {
      Observation obs = sample_observation(
          shape, mu > 0 ? std::optional<PlantedMean>(mean) : std::nullopt,
          SeedSpec{606, static_cast<std::uint64_t>(r)});
      acc += stat_trunc_chi2(obs.values, Axis::kOne, tau);
    }
    double m = acc / n;
    CHECK(m > prev - 0.25);  // 3-SE slack
    prev = m;
  }
}

TEST_CASE("type-I control of the truncated test at the lemma cutoff") {
  // h = Ch s2 log(1 + d2/s2^2) with Ch = 2; empirical P0(t > h) <= alpha/2 + 3 SE
  ProblemShape shape(64, 64, 4, 4);
  TruncationConstant tau = trunc_tau(shape, Axis::kOne);
  CutoffConstants c;
  c.h1 = 2.0;
  double h = theoretical_cutoff_value(DetectorKind::kTruncChi2Axis1, shape, c);
  const int n = 10000;
  int rejects = 0;
  for (int r = 0; r < n; ++r)
    if (stat_trunc_chi2(random_matrix(64, 64, 860, static_cast<std::uint64_t>(r)), Axis::kOne,
                        tau) > h)
      ++rejects;
  double alpha = 0.2;
  double p = rejects / static_cast<double>(n);
  CHECK(p <= alpha / 2 + 3 * std::sqrt(alpha / 2 * (1 - alpha / 2) / n));
}

TEST_CASE("theoretical cutoffs follow the stated forms") {
  ProblemShape dense(6, 8, 6, 8);
  CutoffConstants unit;
  // s1 = d1 makes log(e C) = 1
  CHECK(theoretical_cutoff_value(DetectorKind::kMaxLinAxis1, dense, unit) ==
        doctest::Approx(1.0).epsilon(1e-14));
  CHECK(theoretical_cutoff_value(DetectorKind::kMaxTruncChi2Axis1, dense, unit) ==
        doctest::Approx(8.0 * std::log1p(8.0 / 64) + 1.0).epsilon(1e-14));
  // h4 with C(d1, s1) = 10
  ProblemShape pick(5, 4, 2, 2);
  CHECK(theoretical_cutoff_value(DetectorKind::kMaxLinAxis2, pick, unit) ==
        doctest::Approx(std::sqrt(1.0 + std::log(6.0))).epsilon(1e-14));
  CHECK(theoretical_cutoff_value(DetectorKind::kMaxLinAxis1, pick, unit) ==
        doctest::Approx(std::sqrt(1.0 + std::log(10.0))).epsilon(1e-14));

  auto specs = theoretical_cutoffs(ProblemShape(16, 16, 2, 2));
  CHECK(specs.size() == 7);
  for (const auto& [kind, spec] : specs) {
    CHECK(spec.cutoff >= 0.0);
    CHECK(is_truncated(kind) == spec.tau.has_value());
  }
}

TEST_CASE("dispatch covers the four regimes and the sub-branches") {
  struct Case {
    int d1, d2, s1, s2;
    Regime regime;
    DetectorKind kind;
  };
  const Case cases[] = {
      {64, 64, 16, 2, Regime::kPhiA, DetectorKind::kTruncChi2Axis1},
      {64, 16, 64, 16, Regime::kPhiA, DetectorKind::kLinear},
      {64, 64, 2, 16, Regime::kPhiB, DetectorKind::kTruncChi2Axis2},
      {16, 64, 16, 64, Regime::kPhiB, DetectorKind::kLinear},
      {64, 64, 4, 4, Regime::kPsiBetaC, DetectorKind::kMaxTruncChi2Axis1},
      {16, 16, 1, 8, Regime::kPsiBetaC, DetectorKind::kMaxLinAxis1},
      {128, 32, 4, 4, Regime::kPsiBetaD, DetectorKind::kMaxTruncChi2Axis2},
      {16, 16, 8, 1, Regime::kPsiBetaD, DetectorKind::kMaxLinAxis2},
  };
  for (const auto& c : cases) {
    ProblemShape shape(c.d1, c.d2, c.s1, c.s2);
    RateBreakdown rb = rate_breakdown(shape);
    CHECK(rb.regime == c.regime);
    CHECK(dispatch_constituent(shape, rb) == c.kind);
  }
}

TEST_CASE("delta_star runs exactly the dispatched constituent") {
  ProblemShape shape(16, 16, 1, 8);
  RateBreakdown rb = rate_breakdown(shape);
  auto specs = theoretical_cutoffs(shape);
  Matrix zeros(16, 16);
  TestOutcome out = delta_star(zeros, shape, rb, specs);
  CHECK(out.kind == DetectorKind::kMaxLinAxis1);
  CHECK_FALSE(out.reject);  // zero matrix against positive cutoffs
  // missing spec for the dispatched constituent is an error
  std::map<DetectorKind, DetectorSpec> empty;
  CHECK_THROWS_AS((void)delta_star(zeros, shape, rb, empty), std::invalid_argument);
}

TEST_CASE("delta_star is invariant to permuting rows of the planted support") {
  ProblemShape shape(8, 8, 2, 2);
  RateBreakdown rb = rate_breakdown(shape);
  auto specs = theoretical_cutoffs(shape);
  auto mean = make_planted_mean(shape, {1, 4}, {2, 5}, 2.0);
  Observation obs = sample_observation(shape, mean, SeedSpec{17, 3});
  Matrix swapped = obs.values;
  for (int j = 0; j < 8; ++j) std::swap(swapped(1, j), swapped(4, j));
  TestOutcome a = delta_star(obs.values, shape, rb, specs);
  TestOutcome b = delta_star(swapped, shape, rb, specs);
  CHECK(a.reject == b.reject);
  CHECK(a.statistic == b.statistic);
}

TEST_CASE("evaluate_statistics agrees with individual evaluation") {
  ProblemShape shape(10, 8, 3, 2);
  Matrix y = random_matrix(10, 8, 5150, 0);
  std::vector<StatRequest> reqs;
  for (DetectorKind kind : kAllDetectorKinds) {
    StatRequest r;
    r.kind = kind;
    if (kind == DetectorKind::kTruncChi2Axis1 || kind == DetectorKind::kTruncChi2Axis2)
      r.tau = trunc_tau(shape, detector_axis(kind));
    if (kind == DetectorKind::kMaxTruncChi2Axis1 || kind == DetectorKind::kMaxTruncChi2Axis2)
      r.tau = max_trunc_tau(shape, detector_axis(kind));
    if (is_bonferroni(kind))
      r.subset_size = detector_axis(kind) == Axis::kOne ? shape.s1 : shape.s2;
    reqs.push_back(r);
  }
  auto batch = evaluate_statistics(y, reqs, 100000);
  auto specs = theoretical_cutoffs(shape);
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    TestOutcome o = evaluate_detector(specs.at(reqs[i].kind), y, 100000);
    CHECK(batch[i] == o.statistic);
  }
}

TEST_SUITE_END();
