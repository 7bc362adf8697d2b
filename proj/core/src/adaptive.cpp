#include "subdetect/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace subdetect {

std::vector<int> dyadic_points(int d) {
  if (d < 1) throw std::invalid_argument("dyadic_points: d must be positive");
  std::vector<int> pts;
  double v = d;
  int m_max = static_cast<int>(std::ceil(std::log2(static_cast<double>(d))));
  for (int m = 0; m <= m_max; ++m) {
    int p = std::clamp(static_cast<int>(std::ceil(v)), 1, d);
    if (pts.empty() || pts.back() != p) pts.push_back(p);
    v /= 2.0;
  }
  return pts;  // descending
}

DyadicGrid build_grid(int d1, int d2, GridFlavor flavor, double filter_c) {
  if (d1 < 1 || d2 < 1) throw std::invalid_argument("build_grid: dimensions must be positive");
  DyadicGrid grid;
  grid.d1 = d1;
  grid.d2 = d2;
  grid.flavor = flavor;
  switch (flavor) {
    case GridFlavor::kOmega1:
      for (int s1 : dyadic_points(d1)) grid.points.emplace_back(s1, 0);
      break;
    case GridFlavor::kOmega2:
      for (int s2 : dyadic_points(d2))
        if (filter_c * s2 * s2 <= d2 && s2 >= 3) grid.points.emplace_back(0, s2);
      break;
    case GridFlavor::kOmega:
      for (int s1 : dyadic_points(d1))
        for (int s2 : dyadic_points(d2)) grid.points.emplace_back(s1, s2);
      break;
    case GridFlavor::kOmegaBar:
      for (int s1 : dyadic_points(d1))
        for (int s2 : dyadic_points(d2)) {
          double load = static_cast<double>(d2) / (static_cast<double>(s2) * s2) *
                        log_binom(d1, s1);
          if (load >= filter_c) grid.points.emplace_back(s1, s2);
        }
      break;
  }
  return grid;
}

TruncationConstant adaptive_max_trunc_tau(int s1, int s2, int d1, int d2, Axis axis,
                                          double tau_c) {
  if (d1 < 2 || d2 < 2)
    throw std::invalid_argument("adaptive_max_trunc_tau: requires d1, d2 >= 2");
  if (axis == Axis::kTwo) return adaptive_max_trunc_tau(s2, s1, d2, d1, Axis::kOne, tau_c);
  double corrected = log_binom(d1, s1) + std::log(std::log2(static_cast<double>(d1))) +
                     std::log(std::log2(static_cast<double>(d2)));
  double load = static_cast<double>(d2) / (static_cast<double>(s2) * s2) * corrected;
  // The corrected log can be <= 0 for tiny grids (e.g. C(2,2) log2(2)^2 = 1);
  // the scan then truncates nothing extra, tau = 0 is the right degenerate.
  load = std::max(load, 0.0);
  return nu_tau(std::sqrt(tau_c * std::log1p(load)));
}

double adaptive_cutoff(DetectorKind kind, int s1, int s2, int d1, int d2, double alpha,
                       double ch, double tau_c) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("adaptive_cutoff: alpha must lie in (0,1)");
  switch (kind) {
    case DetectorKind::kLinear:
      return ch;
    case DetectorKind::kMaxLinAxis1:
      return ch * std::sqrt(2.0 * (log_e_binom(d1, s1) +
                                   std::log(std::log2(static_cast<double>(d1)))));
    case DetectorKind::kMaxLinAxis2:
      return ch * std::sqrt(2.0 * (log_e_binom(d2, s2) +
                                   std::log(std::log2(static_cast<double>(d2)))));
    case DetectorKind::kTruncChi2Axis1: {
      double l = static_cast<double>(d2) / (static_cast<double>(s2) * s2);
      return ch * s2 * std::log1p(l);
    }
    case DetectorKind::kTruncChi2Axis2: {
      double l = static_cast<double>(d1) / (static_cast<double>(s1) * s1);
      return ch * s1 * std::log1p(l);
    }
    case DetectorKind::kMaxTruncChi2Axis1:
    case DetectorKind::kMaxTruncChi2Axis2: {
      Axis axis = detector_axis(kind);
      int da = axis == Axis::kOne ? d1 : d2;
      int db = axis == Axis::kOne ? d2 : d1;
      int sa = axis == Axis::kOne ? s1 : s2;
      TruncationConstant tau = adaptive_max_trunc_tau(s1, s2, d1, d2, axis, tau_c);
      double big_log = std::log(2.0 / alpha) + log_binom(da, sa) +
                       std::log(std::log2(static_cast<double>(d1))) +
                       std::log(std::log2(static_cast<double>(d2)));
      big_log = std::max(big_log, 0.0);
      double root = std::sqrt(static_cast<double>(db) * std::exp(-0.5 * tau.tau * tau.tau) *
                              big_log);
      return ch * 9.0 * (root + big_log);
    }
  }
  return ch;
}

AdaSpecSet theoretical_ada_specs(int d1, int d2, double alpha, const CutoffConstants& c) {
  AdaSpecSet set;
  set.d1 = d1;
  set.d2 = d2;
  DyadicGrid grid = build_grid(d1, d2, GridFlavor::kOmega);
  for (auto [s1, s2] : grid.points) {
    ProblemShape shape(d1, d2, s1, s2);
    RateBreakdown rb = rate_breakdown(shape);
    AdaPointSpec p;
    p.s1 = s1;
    p.s2 = s2;
    p.kind = dispatch_constituent(shape, rb);
    if (p.kind == DetectorKind::kTruncChi2Axis1 || p.kind == DetectorKind::kTruncChi2Axis2)
      p.tau = trunc_tau(shape, detector_axis(p.kind), c.tau_c);
    else if (p.kind == DetectorKind::kMaxTruncChi2Axis1 ||
             p.kind == DetectorKind::kMaxTruncChi2Axis2)
      p.tau = adaptive_max_trunc_tau(s1, s2, d1, d2, detector_axis(p.kind), c.tau_c);
    double ch = 1.0;
    switch (p.kind) {
      case DetectorKind::kLinear: ch = c.h2; break;
      case DetectorKind::kTruncChi2Axis1: ch = c.h1; break;
      case DetectorKind::kTruncChi2Axis2: ch = c.h1p; break;
      case DetectorKind::kMaxLinAxis1: ch = c.h4; break;
      case DetectorKind::kMaxLinAxis2: ch = c.h4p; break;
      case DetectorKind::kMaxTruncChi2Axis1: ch = c.h3; break;
      case DetectorKind::kMaxTruncChi2Axis2: ch = c.h3p; break;
    }
    p.cutoff = adaptive_cutoff(p.kind, s1, s2, d1, d2, alpha, ch, c.tau_c);
    set.points.push_back(p);
  }
  return set;
}

namespace {

TestOutcome evaluate_point(const Matrix& y, const AdaSpecSet& set, const AdaPointSpec& p,
                           std::uint64_t cap) {
  DetectorSpec spec;
  spec.kind = p.kind;
  spec.shape = ProblemShape(set.d1, set.d2, p.s1, p.s2);
  spec.tau = p.tau;
  spec.cutoff = p.cutoff;
  return evaluate_detector(spec, y, cap);
}

}  // namespace

AdaOutcome delta_star_ada(const Matrix& y, const AdaSpecSet& specs, std::uint64_t cap,
                          bool short_circuit) {
  AdaOutcome out;
  for (const auto& p : specs.points) {
    TestOutcome r = evaluate_point(y, specs, p, cap);
    out.work_count += r.work_count;
    ++out.points_evaluated;
    if (r.reject && !out.reject) {
      out.reject = true;
      out.first_reject = p;
      out.statistic = r.statistic;
      out.cutoff = r.cutoff;
      if (short_circuit) break;
    }
  }
  return out;
}

std::vector<char> ada_point_rejects(const Matrix& y, const AdaSpecSet& specs, std::uint64_t cap) {
  std::vector<char> rejects;
  rejects.reserve(specs.points.size());
  for (const auto& p : specs.points)
    rejects.push_back(evaluate_point(y, specs, p, cap).reject ? 1 : 0);
  return rejects;
}

Prop2Diagnostic prop2_diagnostic(int d1, int d2, int s1_star, int s2_star, double c_prime) {
  Prop2Diagnostic diag;
  diag.dims_ok = std::min(d1, d2) >= 8;
  diag.sparsity_ok = std::min(s1_star, s2_star) >= 3;
  auto loglog = [](int d) { return std::log(std::max(std::log(static_cast<double>(d)), 1e-300)); };
  diag.loglog_12_ok = s1_star + loglog(d2) >= c_prime * loglog(d1);
  diag.loglog_21_ok = s2_star + loglog(d1) >= c_prime * loglog(d2);
  diag.all_ok = diag.dims_ok && diag.sparsity_ok && diag.loglog_12_ok && diag.loglog_21_ok;
  return diag;
}

}  // namespace subdetect
