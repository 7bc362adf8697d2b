#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "subdetect/detectors.hpp"

namespace subdetect {

/// Candidate sparsity grids for the sparsity-agnostic tests.
///  kOmega    - full dyadic product grid over [d1] x [d2]
///  kOmega1   - row-sparsity values only (adaptive Bonferroni linear scan)
///  kOmega2   - column-sparsity values with the feasibility filter
///              c * s2^2 <= d2 and s2 >= 3 (adaptive truncated chi-square)
///  kOmegaBar - product grid filtered to (d2/s2^2) log C(d1,s1) >= c
enum class GridFlavor { kOmega, kOmega1, kOmega2, kOmegaBar };

struct DyadicGrid {
  int d1 = 1, d2 = 1;
  GridFlavor flavor = GridFlavor::kOmega;
  /// Candidate (s1, s2) pairs in canonical order (descending, s1-major).
  /// One-axis flavors put 0 in the unused slot.
  std::vector<std::pair<int, int>> points;
};

/// Dyadic values ceil(d / 2^m), clamped to [1, d], deduplicated, descending.
/// Rounding up keeps the factor-2 covering: every s in [1, d] has grid points
/// s- <= s <= s+ with s+ <= 2 s-.
std::vector<int> dyadic_points(int d);

DyadicGrid build_grid(int d1, int d2, GridFlavor flavor, double filter_c = 1.0);

/// Grid-corrected truncation threshold for the adaptive Bonferroni
/// chi-square scan: sqrt(C log(1 + (d2/s2^2) log(C(d1,s1) log2(d1) log2(d2)))).
/// Axis 2 swaps the roles of the axes. Requires d1, d2 >= 2.
TruncationConstant adaptive_max_trunc_tau(int s1, int s2, int d1, int d2, Axis axis = Axis::kOne,
                                          double tau_c = 2.0);

/// Grid-corrected theoretical cutoffs (axis-1 statements; callers swap axes
/// symmetrically):
///  max-lin        h(s1) = Ch sqrt(2 log(e C(d1,s1) log2(d1)))
///  trunc-chi2     h(s2) = Ch s2 log(1 + d2/s2^2)
///  max-trunc-chi2 u(s1,s2) = 9 (sqrt(d2 e^{-tau^2/2} L) + L),
///                 L = log((2/alpha) C(d1,s1) log2(d1) log2(d2))
///  linear         h = Ch
double adaptive_cutoff(DetectorKind kind, int s1, int s2, int d1, int d2, double alpha,
                       double ch = 1.0, double tau_c = 2.0);

/// One grid point of the adaptive test: the constituent dispatched at
/// (s1, s2) with its thresholds resolved.
struct AdaPointSpec {
  int s1 = 1, s2 = 1;
  DetectorKind kind = DetectorKind::kLinear;
  std::optional<TruncationConstant> tau;
  double cutoff = 0;
};

struct AdaSpecSet {
  int d1 = 1, d2 = 1;
  std::vector<AdaPointSpec> points;
};

/// Dispatch and threshold every point of the full dyadic grid with the
/// grid-corrected theoretical cutoffs at level alpha.
AdaSpecSet theoretical_ada_specs(int d1, int d2, double alpha, const CutoffConstants& c = {});

struct AdaOutcome {
  bool reject = false;
  std::optional<AdaPointSpec> first_reject;  // canonical-order first
  double statistic = 0, cutoff = 0;          // of the first rejecting point
  std::uint64_t work_count = 0;
  int points_evaluated = 0;
};

/// Adaptive aggregate test: reject iff any grid point's constituent rejects.
/// Points run in canonical grid order; with short_circuit the scan stops at
/// the first rejection (the reported point is the same either way).
AdaOutcome delta_star_ada(const Matrix& y, const AdaSpecSet& specs,
                          std::uint64_t cap = kDefaultEnumerationCap, bool short_circuit = true);

/// Per-point reject flags on one observation (no short-circuit); used to
/// check the union bound on common random numbers.
std::vector<char> ada_point_rejects(const Matrix& y, const AdaSpecSet& specs,
                                    std::uint64_t cap = kDefaultEnumerationCap);

/// Reports (does not enforce) the side conditions under which the adaptive
/// test carries its guarantee: d1 ^ d2 >= 8, s1* ^ s2* >= 3, and
/// s_i* + log log d_j >= C' log log d_i for i != j.
struct Prop2Diagnostic {
  bool dims_ok = false;
  bool sparsity_ok = false;
  bool loglog_12_ok = false;
  bool loglog_21_ok = false;
  bool all_ok = false;
};

Prop2Diagnostic prop2_diagnostic(int d1, int d2, int s1_star, int s2_star, double c_prime = 1.0);

}  // namespace subdetect
