#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "subdetect/gauss.hpp"
#include "subdetect/matrix.hpp"
#include "subdetect/rates.hpp"
#include "subdetect/rng.hpp"
#include "subdetect/shape.hpp"
#include "subdetect/subsets.hpp"

namespace subdetect {

/// The seven constituent statistics. Axis 1 aggregates rows (full or scanned
/// row subsets, per-column means); axis 2 is the transposed construction.
enum class DetectorKind {
  kLinear,
  kTruncChi2Axis1,
  kTruncChi2Axis2,
  kMaxLinAxis1,
  kMaxLinAxis2,
  kMaxTruncChi2Axis1,
  kMaxTruncChi2Axis2,
};

inline constexpr std::array<DetectorKind, 7> kAllDetectorKinds = {
    DetectorKind::kLinear,          DetectorKind::kTruncChi2Axis1,
    DetectorKind::kTruncChi2Axis2,  DetectorKind::kMaxLinAxis1,
    DetectorKind::kMaxLinAxis2,     DetectorKind::kMaxTruncChi2Axis1,
    DetectorKind::kMaxTruncChi2Axis2,
};

std::string_view detector_name(DetectorKind kind);
DetectorKind detector_from_name(std::string_view name);

enum class Axis { kOne, kTwo };

bool is_truncated(DetectorKind kind);
bool is_bonferroni(DetectorKind kind);
/// Scanning/aggregation axis of the statistic; linear has no axis (kOne).
Axis detector_axis(DetectorKind kind);

/// Multipliers for the theoretical cutoffs (the paper guarantees existence
/// of workable constants only, so these are knobs) and the truncation
/// constant C in the tau formulas, fixed to 2 by default.
struct CutoffConstants {
  double h1 = 1.0, h1p = 1.0;
  double h2 = 1.0;
  double h3 = 1.0, h3p = 1.0;
  double h4 = 1.0, h4p = 1.0;
  double tau_c = 2.0;
};

enum class CutoffMode { kTheoretical, kCalibrated };

struct CutoffProvenance {
  CutoffMode mode = CutoffMode::kTheoretical;
  CutoffConstants constants;      // theoretical
  double level = 0;               // calibrated
  std::uint64_t n_reps = 0;       // calibrated
  SeedSpec seed;                  // calibrated
};

struct DetectorSpec {
  DetectorKind kind = DetectorKind::kLinear;
  ProblemShape shape;
  std::optional<TruncationConstant> tau;  // present iff truncated kind
  double cutoff = 0;
  CutoffProvenance provenance;
};

struct TestOutcome {
  DetectorKind kind = DetectorKind::kLinear;
  double statistic = 0;
  double cutoff = 0;
  bool reject = false;  // statistic > cutoff, strict
  std::optional<std::vector<int>> argmax_subset;
  std::uint64_t work_count = 0;
};

/// Normalized full-column means: (1/sqrt(d1)) sum_i Y_ij.
std::vector<double> col_means_full(const Matrix& y);
/// Normalized partial column means over a row subset: (1/sqrt(|J|)) sum_{i in J} Y_ij.
std::vector<double> col_means_subset(const Matrix& y, std::span<const int> rows);

double stat_linear(const Matrix& y);
double stat_trunc_chi2(const Matrix& y, Axis axis, const TruncationConstant& tau);

struct MaxLinResult {
  double value = 0;
  std::vector<int> subset;
};
/// Bonferroni linear statistic via the top-s sums shortcut: the maximized
/// objective is monotone in the subset's summed totals, so the optimizer is
/// the set of the s largest (ties to the lowest index).
MaxLinResult stat_max_lin(const Matrix& y, Axis axis, int subset_size);

struct MaxTruncResult {
  double value = 0;
  std::vector<int> subset;
  std::uint64_t work = 0;
};
/// Exhaustive Bonferroni truncated chi-square scan over all size-s subsets
/// in colexicographic order; ties keep the colex-lowest subset. Throws
/// enumeration_cap_error when C(d_axis, s) exceeds `cap`.
MaxTruncResult stat_max_trunc_chi2(const Matrix& y, Axis axis, int subset_size,
                                   const TruncationConstant& tau, std::uint64_t cap);
/// Same scan evaluated at several truncation levels in one enumeration pass;
/// returns the max statistic per tau (values only).
std::vector<double> stat_max_trunc_chi2_multi(const Matrix& y, Axis axis, int subset_size,
                                              std::span<const TruncationConstant> taus,
                                              std::uint64_t cap);

/// tau for the truncated chi-square statistic: sqrt(C log(1 + d_b/s_b^2))
/// where b is the non-aggregated axis.
TruncationConstant trunc_tau(const ProblemShape& shape, Axis axis, double tau_c = 2.0);
/// tau for the Bonferroni truncated chi-square statistic:
/// sqrt(C log(1 + (d_b/s_b^2) log(e C(d_a, s_a)))).
TruncationConstant max_trunc_tau(const ProblemShape& shape, Axis axis, double tau_c = 2.0);

double theoretical_cutoff_value(DetectorKind kind, const ProblemShape& shape,
                                const CutoffConstants& constants);
/// One fully populated spec per constituent statistic.
std::map<DetectorKind, DetectorSpec> theoretical_cutoffs(const ProblemShape& shape,
                                                         const CutoffConstants& constants = {});

TestOutcome evaluate_detector(const DetectorSpec& spec, const Matrix& y,
                              std::uint64_t cap = kDefaultEnumerationCap);

/// The constituent the aggregate test runs for this shape: regime picks the
/// family, the dense/sparse ratio picks the member.
DetectorKind dispatch_constituent(const ProblemShape& shape, const RateBreakdown& rates);

/// Aggregate optimal test: dispatch on the dominating term of rate_tilde,
/// then run exactly that constituent.
TestOutcome delta_star(const Matrix& y, const ProblemShape& shape, const RateBreakdown& rates,
                       const std::map<DetectorKind, DetectorSpec>& specs,
                       std::uint64_t cap = kDefaultEnumerationCap);

/// Batch evaluation of several statistics on one observation, sharing the
/// transpose and subset enumerations (grouped per axis/subset size).
struct StatRequest {
  DetectorKind kind = DetectorKind::kLinear;
  std::optional<TruncationConstant> tau;
  int subset_size = 0;  // bonferroni kinds only
};
std::vector<double> evaluate_statistics(const Matrix& y, std::span<const StatRequest> requests,
                                        std::uint64_t cap = kDefaultEnumerationCap);

}  // namespace subdetect
