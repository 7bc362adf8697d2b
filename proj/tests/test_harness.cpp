#include <doctest.h>

#include <cmath>

#include "subdetect/harness.hpp"
#include "subdetect/lower_bound.hpp"

using namespace subdetect;

TEST_SUITE_BEGIN("harness");

TEST_CASE("parallel_for is deterministic and propagates errors") {
  std::vector<std::uint64_t> a(1000), b(1000);
  parallel_for(1000, 1, [&](std::uint64_t i) { a[i] = i * i; });
  parallel_for(1000, 4, [&](std::uint64_t i) { b[i] = i * i; });
  CHECK(a == b);
  CHECK_THROWS_AS(parallel_for(100, 4,
                               [&](std::uint64_t i) {
                                 if (i == 57) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}

TEST_CASE("calibrated linear cutoff approximates the normal quantile") {
  ProblemShape shape(8, 8, 2, 2);
  double cut = calibrate_cutoff(DetectorKind::kLinear, shape, 0.05, 20000, SeedSpec{7, 0});
  // conservative adjustment sits slightly above z_{0.95} = 1.645
  CHECK(cut >= 1.60);
  CHECK(cut <= 1.75);
  CHECK_THROWS_AS(
      (void)calibrate_cutoff(DetectorKind::kLinear, shape, 0.001, 500, SeedSpec{7, 0}),
      std::invalid_argument);
}

TEST_CASE("max-lin over the full axis matches the linear null law") {
  // s = d: the Bonferroni scan degenerates to a single subset whose statistic
  // has the same N(0,1) null law as the linear statistic.
  ProblemShape shape(6, 6, 6, 6);
  double lin = calibrate_cutoff(DetectorKind::kLinear, shape, 0.1, 20000, SeedSpec{9, 0});
  double maxlin =
      calibrate_cutoff(DetectorKind::kMaxLinAxis1, shape, 0.1, 20000, SeedSpec{9, 0});
  CHECK(std::fabs(lin - maxlin) <= 0.08);
}

TEST_CASE("trunc-chi2 with a huge tau never rejects under the null") {
  // statistic is identically zero once tau outruns every column mean, so the
  // calibrated cutoff is 0 and any positive cutoff gives type-I exactly 0
  ProblemShape shape(8, 8, 2, 2);
  PreparedDetector det;
  det.shape = shape;
  det.choice = DetectorChoice::constituent(DetectorKind::kTruncChi2Axis1);
  DetectorSpec spec;
  spec.kind = DetectorKind::kTruncChi2Axis1;
  spec.shape = shape;
  spec.tau = nu_tau(50.0);
  spec.cutoff = 1e-9;
  det.specs.emplace(spec.kind, spec);
  det.label = "trunc-huge-tau";
  RiskEstimate risk = estimate_risk(det, 0.0, 2000, SeedSpec{33, 0});
  CHECK(risk.type_i == 0.0);
}

TEST_CASE("fresh-sample type I stays at or below the level") {
  ProblemShape shape(16, 16, 2, 2);
  for (DetectorKind kind : {DetectorKind::kLinear, DetectorKind::kTruncChi2Axis1,
                            DetectorKind::kMaxLinAxis2, DetectorKind::kMaxTruncChi2Axis1}) {
    auto det = prepare_detector(DetectorChoice::constituent(kind), shape,
                                CutoffRequest::calibrated(0.1, 4000, SeedSpec{11, 0}));
    RiskEstimate risk = estimate_risk(det, 0.0, 4000, SeedSpec{12, 0});
    CHECK(risk.type_i <= 0.1 + 3 * std::sqrt(0.1 * 0.9 / 4000));
  }
}

TEST_CASE("estimate_risk degenerate and saturated cases") {
  ProblemShape shape(16, 16, 16, 16);
  auto det = prepare_detector(DetectorChoice::constituent(DetectorKind::kLinear), shape,
                              CutoffRequest::calibrated(0.1, 2000, SeedSpec{21, 0}));
  // mu = 0: alternative coincides with the null, so typeII ~= 1 - typeI
  RiskEstimate zero = estimate_risk(det, 0.0, 2000, SeedSpec{23, 0});
  CHECK(std::fabs(zero.type_ii - (1.0 - zero.type_i)) <= 0.05);
  CHECK(zero.risk == zero.type_i + zero.type_ii);
  // strong signal: power saturates, risk -> type I only
  RiskEstimate strong = estimate_risk(det, 1.0, 2000, SeedSpec{24, 0});
  CHECK(strong.type_ii <= 0.005);
  CHECK(strong.risk == doctest::Approx(strong.type_i).epsilon(0.2));
  // doubling nReps halves SE^2
  RiskEstimate a = estimate_risk(det, 0.0, 2000, SeedSpec{25, 0});
  RiskEstimate b = estimate_risk(det, 0.0, 4000, SeedSpec{25, 0});
  CHECK(b.type_i_se * b.type_i_se ==
        doctest::Approx(a.type_i_se * a.type_i_se / 2.0).epsilon(0.25));
  CHECK_THROWS_AS((void)estimate_risk(det, 0.0, 50, SeedSpec{1, 0}), std::invalid_argument);
}

TEST_CASE("uniform-random support policy gives comparable risk") {
  ProblemShape shape(12, 12, 2, 2);
  auto det = prepare_detector(DetectorChoice::star(), shape,
                              CutoffRequest::calibrated(0.1, 3000, SeedSpec{31, 0}));
  double mu = 3.0;
  RiskEstimate canon =
      estimate_risk(det, mu, 3000, SeedSpec{32, 0}, SupportPolicy::kCanonical);
  RiskEstimate random =
      estimate_risk(det, mu, 3000, SeedSpec{32, 0}, SupportPolicy::kUniformRandom);
  // every statistic is support-permutation invariant
  CHECK(std::fabs(canon.type_ii - random.type_ii) <=
        3 * std::sqrt(canon.type_ii_se * canon.type_ii_se +
                      random.type_ii_se * random.type_ii_se) + 1e-9);
}

TEST_CASE("mu_sweep: endpoints, monotonicity, crossing summary") {
  ProblemShape shape(16, 16, 2, 2);
  auto det = prepare_detector(DetectorChoice::star(), shape,
                              CutoffRequest::calibrated(0.1, 4000, SeedSpec{41, 0}));
  std::vector<double> multiples = {0.0, 1.0, 2.0, 4.0, 8.0, 16.0};
  SweepResult sweep = mu_sweep(det, multiples, 1000, SeedSpec{42, 0}, 0.2);
  REQUIRE(sweep.points.size() == 6);
  CHECK(sweep.points.front().risk.risk >= 0.9);  // multiple 0: risk ~ 1
  double prev = 2.0;
  for (const auto& p : sweep.points) {
    CHECK(p.risk.risk <= prev + 0.1);  // nonincreasing up to 3-SE noise
    prev = p.risk.risk;
  }
  REQUIRE(sweep.smallest_safe_multiple.has_value());
  CHECK(*sweep.smallest_safe_multiple <= 16.0);
  REQUIRE(sweep.largest_risky_multiple.has_value());
  CHECK(*sweep.largest_risky_multiple < *sweep.smallest_safe_multiple);
  CHECK_THROWS_AS((void)mu_sweep(det, std::vector<double>{1.0, 1.0}, 1000, SeedSpec{1, 0}),
                  std::invalid_argument);
}

TEST_CASE("determinism: thread count never changes results") {
  ProblemShape shape(16, 16, 2, 2);
  auto det1 = prepare_detector(DetectorChoice::star(), shape,
                               CutoffRequest::calibrated(0.1, 2000, SeedSpec{51, 0}),
                               kDefaultEnumerationCap, 1);
  auto det4 = prepare_detector(DetectorChoice::star(), shape,
                               CutoffRequest::calibrated(0.1, 2000, SeedSpec{51, 0}),
                               kDefaultEnumerationCap, 4);
  auto spec1 = det1.specs.begin()->second;
  auto spec4 = det4.specs.begin()->second;
  CHECK(spec1.cutoff == spec4.cutoff);

  std::vector<double> multiples = {0.0, 2.0, 8.0};
  SweepResult s1 = mu_sweep(det1, multiples, 600, SeedSpec{52, 0}, 0.2,
                            SupportPolicy::kUniformRandom, 1);
  SweepResult s4 = mu_sweep(det4, multiples, 600, SeedSpec{52, 0}, 0.2,
                            SupportPolicy::kUniformRandom, 4);
  for (std::size_t i = 0; i < multiples.size(); ++i) {
    CHECK(s1.points[i].risk.type_i == s4.points[i].risk.type_i);
    CHECK(s1.points[i].risk.type_ii == s4.points[i].risk.type_ii);
  }
}

TEST_CASE("sweep coheres with the exact risk lower bound") {
  ProblemShape shape(8, 8, 2, 2);
  // find a mu with lower bound >= 0.8 via bisection
  double lo = 0.0, hi = 4.0;
  while (risk_lower_bound(shape, hi) >= 0.8) hi *= 2;
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    (risk_lower_bound(shape, mid) >= 0.8 ? lo : hi) = mid;
  }
  double mu = lo;
  REQUIRE(risk_lower_bound(shape, mu) >= 0.8);
  auto det = prepare_detector(DetectorChoice::star(), shape,
                              CutoffRequest::calibrated(0.1, 4000, SeedSpec{61, 0}));
  RiskEstimate risk = estimate_risk(det, mu, 2000, SeedSpec{62, 0});
  CHECK(risk.risk >= 0.5);
}

TEST_CASE("calibrated adaptive specs control type I") {
  const int d = 16;
  AdaSpecSet specs = calibrated_ada_specs(d, d, 0.1, 3000, SeedSpec{71, 0});
  CHECK(specs.points.size() == 25);
  int rejects = 0;
  const int n = 2000;
  const std::uint64_t root = derive_root(81, "fresh");
  for (int r = 0; r < n; ++r) {
    Observation obs = sample_observation(ProblemShape(d, d, 1, 1), std::nullopt,
                                         SeedSpec{root, static_cast<std::uint64_t>(r)});
    rejects += delta_star_ada(obs.values, specs).reject ? 1 : 0;
  }
  double p = rejects / static_cast<double>(n);
  CHECK(p <= 0.1 + 3 * std::sqrt(0.1 * 0.9 / n));
}

TEST_CASE("adaptive power is monotone in mu") {
  const int d = 16;
  AdaSpecSet specs = calibrated_ada_specs(d, d, 0.1, 3000, SeedSpec{91, 0});
  ProblemShape truth(d, d, 3, 3);
  auto prepared = PreparedDetector{};
  prepared.shape = truth;
  prepared.choice = DetectorChoice::ada();
  prepared.ada = specs;
  prepared.label = "delta-star-ada";
  double prev = -1.0;
  double rate = rate_breakdown(truth).rate;
  for (double m : {0.5, 2.0, 6.0}) {
    RiskEstimate risk = estimate_risk(prepared, m * std::sqrt(rate), 800, SeedSpec{92, 0});
    double power = 1.0 - risk.type_ii;
    CHECK(power >= prev - 0.08);
    prev = power;
  }
  CHECK(prev >= 0.7);  // strong signal ends up detected
}

TEST_CASE("studies: built-in grids pass their verdicts") {
  auto cor1 = rate_comparison_study(StudyKind::kCor1Match);
  CHECK(cor1.rows.size() == 20);
  CHECK(cor1.pass);
  for (const auto& row : cor1.rows) {
    CHECK(row.conforming);
    CHECK(row.ratio >= 1.0 / 50);
    CHECK(row.ratio <= 50.0);
  }

  auto prop3 = rate_comparison_study(StudyKind::kProp3Trend);
  CHECK(prop3.rows.size() >= 4);
  CHECK(prop3.pass);
  for (std::size_t i = 0; i + 1 < prop3.rows.size(); ++i)
    CHECK(prop3.rows[i + 1].ratio < prop3.rows[i].ratio);

  auto table = rate_comparison_study(StudyKind::kS1Eq1Table);
  CHECK(table.rows.size() == 9);
  CHECK(table.pass);
  for (const auto& row : table.rows) CHECK(row.match);
}

TEST_SUITE_END();
