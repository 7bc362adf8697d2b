#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "subdetect/adaptive.hpp"
#include "subdetect/detectors.hpp"
#include "subdetect/observation.hpp"
#include "subdetect/rates.hpp"

namespace subdetect {

int default_threads();

/// Deterministic parallel loop: every index writes only its own results, so
/// the outcome is identical at any thread count. Chunks are handed out
/// dynamically; exceptions propagate to the caller.
template <class F>
void parallel_for(std::uint64_t n, int threads, F&& fn) {
  if (threads <= 1 || n < 2) {
    for (std::uint64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::uint64_t chunk = std::max<std::uint64_t>(1, n / (8 * static_cast<std::uint64_t>(threads)));
  std::atomic<std::uint64_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr err;
  auto worker = [&]() {
    try {
      while (true) {
        std::uint64_t begin = next.fetch_add(chunk);
        if (begin >= n) return;
        std::uint64_t end = std::min(n, begin + chunk);
        for (std::uint64_t i = begin; i < end; ++i) fn(i);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(err_mutex);
      if (!err) err = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

/// How the alternative's support is chosen in risk simulations. Every
/// statistic here is support-permutation invariant, so the canonical
/// corner support is as hard as any fixed one.
enum class SupportPolicy { kCanonical, kUniformRandom };

struct DetectorChoice {
  enum class Type { kConstituent, kStar, kAda };
  Type type = Type::kStar;
  DetectorKind kind = DetectorKind::kLinear;  // kConstituent only

  static DetectorChoice constituent(DetectorKind k) {
    return DetectorChoice{Type::kConstituent, k};
  }
  static DetectorChoice star() { return DetectorChoice{Type::kStar, DetectorKind::kLinear}; }
  static DetectorChoice ada() { return DetectorChoice{Type::kAda, DetectorKind::kLinear}; }
};

struct CutoffRequest {
  CutoffMode mode = CutoffMode::kCalibrated;
  CutoffConstants constants;   // theoretical mode
  double level = 0.1;          // calibrated mode
  std::uint64_t n_reps = 10000;
  SeedSpec seed;

  static CutoffRequest theoretical(const CutoffConstants& c = {}) {
    CutoffRequest r;
    r.mode = CutoffMode::kTheoretical;
    r.constants = c;
    return r;
  }
  static CutoffRequest calibrated(double level, std::uint64_t n_reps, SeedSpec seed) {
    CutoffRequest r;
    r.mode = CutoffMode::kCalibrated;
    r.level = level;
    r.n_reps = n_reps;
    r.seed = seed;
    return r;
  }
};

/// A detector with all thresholds resolved, ready to run on observations.
struct PreparedDetector {
  ProblemShape shape;
  DetectorChoice choice;
  std::uint64_t cap = kDefaultEnumerationCap;
  std::optional<RateBreakdown> rates;          // star
  std::map<DetectorKind, DetectorSpec> specs;  // constituent / star
  std::optional<AdaSpecSet> ada;               // ada
  std::string label;

  bool evaluate_reject(const Matrix& y) const;
};

/// Empirical (1 - level) null quantile with a one-sided conservative
/// order-statistic adjustment, so fresh-sample type I stays at or below the
/// level. Requires n_reps >= 10 / level.
double calibrate_cutoff(DetectorKind kind, const ProblemShape& shape, double level,
                        std::uint64_t n_reps, SeedSpec seed,
                        std::uint64_t cap = kDefaultEnumerationCap, int threads = 1);

/// Calibrate several constituents on common null samples (one observation
/// per replicate serves every statistic).
std::map<DetectorKind, double> calibrate_cutoffs(std::span<const DetectorKind> kinds,
                                                 const ProblemShape& shape, double level,
                                                 std::uint64_t n_reps, SeedSpec seed,
                                                 std::uint64_t cap = kDefaultEnumerationCap,
                                                 int threads = 1);

/// Adaptive spec set with per-point cutoffs calibrated at level / #points on
/// common null samples (the union bound keeps overall type I below level).
AdaSpecSet calibrated_ada_specs(int d1, int d2, double level, std::uint64_t n_reps,
                                SeedSpec seed, std::uint64_t cap = kDefaultEnumerationCap,
                                int threads = 1);

PreparedDetector prepare_detector(DetectorChoice choice, const ProblemShape& shape,
                                  const CutoffRequest& cutoff,
                                  std::uint64_t cap = kDefaultEnumerationCap, int threads = 1);

struct RiskEstimate {
  double type_i = 0, type_i_se = 0;
  double type_ii = 0, type_ii_se = 0;
  double risk = 0;
  std::uint64_t n_reps = 0;
  SeedSpec seed;
  std::string detector;
};

RiskEstimate estimate_risk(const PreparedDetector& detector, double mu, std::uint64_t n_reps,
                           SeedSpec seed, SupportPolicy policy = SupportPolicy::kCanonical,
                           int threads = 1);

struct SweepPoint {
  double multiple = 0;
  double mu = 0;
  RiskEstimate risk;
};

struct SweepResult {
  ProblemShape shape;
  double rate = 0;  // squared-signal scale; mu = multiple * sqrt(rate)
  double eta = 0.2;
  std::vector<SweepPoint> points;
  std::optional<double> largest_risky_multiple;   // largest m with risk >= 0.5
  std::optional<double> smallest_safe_multiple;   // smallest m with risk <= eta
};

/// Risk along mu = m sqrt(rate) for each multiple m (strictly increasing).
/// Common random numbers across multiples; the null pass is shared.
SweepResult mu_sweep(const PreparedDetector& detector, std::span<const double> multiples,
                     std::uint64_t n_reps, SeedSpec seed, double eta = 0.2,
                     SupportPolicy policy = SupportPolicy::kCanonical, int threads = 1);

enum class StudyKind { kCor1Match, kProp3Trend, kS1Eq1Table };

struct StudyRow {
  ProblemShape shape;
  bool conforming = false;
  double rate = 0;            // rate_breakdown().rate
  double reference_rate = 0;  // bi_rate (cor1/prop3) or the table-row rate (s1eq1)
  double ratio = 0;           // rate / reference (cor1/prop3), reference / rate (s1eq1)
  Regime regime = Regime::kPhiA;
  std::string expected;  // s1eq1: the table's optimal test
  std::string actual;    // s1eq1: the dispatched constituent
  bool match = true;
};

struct StudyResult {
  StudyKind kind;
  std::vector<StudyRow> rows;
  bool pass = false;
  std::string verdict;
};

/// Built-in numeric verification studies; shapes are fixed deterministic
/// grids satisfying each study's hypotheses.
StudyResult rate_comparison_study(StudyKind kind, const CorollaryConstants& constants = {});

}  // namespace subdetect
