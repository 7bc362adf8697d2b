#include "subdetect/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace subdetect {

std::string_view detector_name(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::kLinear: return "linear";
    case DetectorKind::kTruncChi2Axis1: return "trunc-chi2-1";
    case DetectorKind::kTruncChi2Axis2: return "trunc-chi2-2";
    case DetectorKind::kMaxLinAxis1: return "max-lin-1";
    case DetectorKind::kMaxLinAxis2: return "max-lin-2";
    case DetectorKind::kMaxTruncChi2Axis1: return "max-trunc-chi2-1";
    case DetectorKind::kMaxTruncChi2Axis2: return "max-trunc-chi2-2";
  }
  return "?";
}

DetectorKind detector_from_name(std::string_view name) {
  for (DetectorKind kind : kAllDetectorKinds)
    if (detector_name(kind) == name) return kind;
  throw std::invalid_argument("unknown detector: " + std::string(name));
}

bool is_truncated(DetectorKind kind) {
  return kind == DetectorKind::kTruncChi2Axis1 || kind == DetectorKind::kTruncChi2Axis2 ||
         kind == DetectorKind::kMaxTruncChi2Axis1 || kind == DetectorKind::kMaxTruncChi2Axis2;
}

bool is_bonferroni(DetectorKind kind) {
  return kind == DetectorKind::kMaxLinAxis1 || kind == DetectorKind::kMaxLinAxis2 ||
         kind == DetectorKind::kMaxTruncChi2Axis1 || kind == DetectorKind::kMaxTruncChi2Axis2;
}

Axis detector_axis(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::kTruncChi2Axis2:
    case DetectorKind::kMaxLinAxis2:
    case DetectorKind::kMaxTruncChi2Axis2:
      return Axis::kTwo;
    default:
      return Axis::kOne;
  }
}

std::vector<double> col_means_full(const Matrix& y) {
  const int d1 = y.rows(), d2 = y.cols();
  std::vector<double> m(d2, 0.0);
  for (int i = 0; i < d1; ++i) {
    const double* row = y.row(i);
    for (int j = 0; j < d2; ++j) m[j] += row[j];
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(d1));
  for (double& v : m) v *= scale;
  return m;
}

std::vector<double> col_means_subset(const Matrix& y, std::span<const int> rows) {
  if (rows.empty()) throw std::invalid_argument("col_means_subset: empty row subset");
  const int d2 = y.cols();
  std::vector<double> m(d2, 0.0);
  for (int i : rows) {
    if (i < 0 || i >= y.rows()) throw std::invalid_argument("col_means_subset: row out of range");
    const double* row = y.row(i);
    for (int j = 0; j < d2; ++j) m[j] += row[j];
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(rows.size()));
  for (double& v : m) v *= scale;
  return m;
}

double stat_linear(const Matrix& y) {
  double sum = 0.0;
  for (double v : y.data()) sum += v;
  return sum / std::sqrt(static_cast<double>(y.rows()) * static_cast<double>(y.cols()));
}

namespace {

// All truncated sums reduce through eight interleaved lanes (j mod 8) folded
// in a fixed tree. The value is deterministic and identical across the plain
// and scanned code paths, while leaving the compiler free to vectorize.
inline double fold_lanes(const double* lane) {
  return ((lane[0] + lane[1]) + (lane[2] + lane[3])) +
         ((lane[4] + lane[5]) + (lane[6] + lane[7]));
}

double lane_trunc_sum(const double* v, int m, const TruncationConstant& tc) {
  double lane[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  const double tau = tc.tau, nu = tc.nu;
  int j = 0;
  for (; j + 8 <= m; j += 8) {
#pragma GCC unroll 8
    for (int l = 0; l < 8; ++l) {
      double x = v[j + l];
      lane[l] += (std::fabs(x) > tau) ? x * x - nu : 0.0;
    }
  }
  for (; j < m; ++j) {
    double x = v[j];
    lane[j & 7] += (std::fabs(x) > tau) ? x * x - nu : 0.0;
  }
  return fold_lanes(lane);
}

// Fused leaf evaluation for one or two truncation levels: v_j is formed from
// the prefix sum plus the final row, scaled, and consumed in one pass.
void lane_trunc_sum_fused(const double* base, const double* row, int m, double inv,
                          std::span<const TruncationConstant> taus, double* out) {
  double lane0[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  double lane1[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  const double tau0 = taus[0].tau, nu0 = taus[0].nu;
  const bool two = taus.size() > 1;
  const double tau1 = two ? taus[1].tau : 0.0, nu1 = two ? taus[1].nu : 0.0;
  int j = 0;
  if (two) {
    for (; j + 8 <= m; j += 8) {
#pragma GCC unroll 8
      for (int l = 0; l < 8; ++l) {
        double x = (base[j + l] + row[j + l]) * inv;
        double y2 = x * x;
        double a = std::fabs(x);
        lane0[l] += (a > tau0) ? y2 - nu0 : 0.0;
        lane1[l] += (a > tau1) ? y2 - nu1 : 0.0;
      }
    }
    for (; j < m; ++j) {
      double x = (base[j] + row[j]) * inv;
      double y2 = x * x;
      double a = std::fabs(x);
      lane0[j & 7] += (a > tau0) ? y2 - nu0 : 0.0;
      lane1[j & 7] += (a > tau1) ? y2 - nu1 : 0.0;
    }
    out[1] = fold_lanes(lane1);
  } else {
    for (; j + 8 <= m; j += 8) {
#pragma GCC unroll 8
      for (int l = 0; l < 8; ++l) {
        double x = (base[j + l] + row[j + l]) * inv;
        lane0[l] += (std::fabs(x) > tau0) ? x * x - nu0 : 0.0;
      }
    }
    for (; j < m; ++j) {
      double x = (base[j] + row[j]) * inv;
      lane0[j & 7] += (std::fabs(x) > tau0) ? x * x - nu0 : 0.0;
    }
  }
  out[0] = fold_lanes(lane0);
}

double trunc_sum(std::span<const double> means, const TruncationConstant& tau) {
  return lane_trunc_sum(means.data(), static_cast<int>(means.size()), tau);
}

// Colex-ordered DFS over size-s subsets with a stack of partial column sums.
// Depth p picks the (p+1)-th largest row, so each leaf's sums are the exact
// descending-index addition sequence; an independent enumerator summing in
// the same order reproduces every leaf bit-for-bit.
class MaxTruncScanner {
 public:
  MaxTruncScanner(const Matrix& y, int s, std::span<const TruncationConstant> taus)
      : y_(y), d_(y.rows()), m_(y.cols()), s_(s), taus_(taus) {
    partial_.assign(static_cast<std::size_t>(s_) * m_, 0.0);
    scratch_.assign(m_, 0.0);
    choice_.assign(s_, 0);
    inv_sqrt_s_ = 1.0 / std::sqrt(static_cast<double>(s_));
    best_.assign(taus_.size(), -std::numeric_limits<double>::infinity());
    best_subset_.assign(taus_.size(), {});
  }

  void run() { descend(0, d_); }

  std::uint64_t work() const { return work_; }
  double best(std::size_t t) const { return best_[t]; }
  std::vector<int> best_subset(std::size_t t) const {
    auto s = best_subset_[t];
    std::sort(s.begin(), s.end());
    return s;
  }

 private:
  double* level(int p) { return partial_.data() + static_cast<std::size_t>(p) * m_; }

  void descend(int p, int upper) {
    if (p == s_ - 1) {
      const double* base = level(p);
      for (int v = 0; v < upper; ++v) {
        choice_[p] = v;
        leaf(base, y_.row(v));
      }
      return;
    }
    for (int v = s_ - 1 - p; v < upper; ++v) {
      choice_[p] = v;
      const double* src = level(p);
      double* dst = level(p + 1);
      const double* row = y_.row(v);
      for (int j = 0; j < m_; ++j) dst[j] = src[j] + row[j];
      descend(p + 1, v);
    }
  }

  // Truncated sums use the fixed 8-lane interleaved reduction from
  // lane_trunc_sum so the scan is bit-reproducible yet not serialized on one
  // floating-point dependency chain.
  void leaf(const double* base, const double* row) {
    const double inv = inv_sqrt_s_;
    if (taus_.size() <= 2) {
      double acc[2];
      lane_trunc_sum_fused(base, row, m_, inv, taus_, acc);
      for (std::size_t t = 0; t < taus_.size(); ++t) {
        if (acc[t] > best_[t]) {
          best_[t] = acc[t];
          best_subset_[t] = choice_;
        }
      }
    } else {
      double* sc = scratch_.data();
      for (int j = 0; j < m_; ++j) sc[j] = (base[j] + row[j]) * inv;
      for (std::size_t t = 0; t < taus_.size(); ++t) {
        double acc = lane_trunc_sum(sc, m_, taus_[t]);
        if (acc > best_[t]) {
          best_[t] = acc;
          best_subset_[t] = choice_;
        }
      }
    }
    ++work_;
  }

  const Matrix& y_;
  int d_, m_, s_;
  std::span<const TruncationConstant> taus_;
  std::vector<double> partial_, scratch_;
  std::vector<int> choice_;
  double inv_sqrt_s_ = 1.0;
  std::vector<double> best_;
  std::vector<std::vector<int>> best_subset_;
  std::uint64_t work_ = 0;
};

MaxLinResult max_lin_on(const Matrix& y, int s) {
  const int d = y.rows(), m = y.cols();
  if (s < 1 || s > d) throw std::invalid_argument("stat_max_lin: subset size out of range");
  std::vector<double> totals(d, 0.0);
  for (int i = 0; i < d; ++i) {
    const double* row = y.row(i);
    double acc = 0.0;
    for (int j = 0; j < m; ++j) acc += row[j];
    totals[i] = acc;
  }
  MaxLinResult res;
  res.subset = top_k_indices(totals, s);
  double sum = 0.0;
  for (int i : res.subset) sum += totals[i];
  res.value = sum / std::sqrt(static_cast<double>(s) * static_cast<double>(m));
  return res;
}

}  // namespace

double stat_trunc_chi2(const Matrix& y, Axis axis, const TruncationConstant& tau) {
  if (axis == Axis::kTwo) {
    Matrix yt = y.transposed();
    return trunc_sum(col_means_full(yt), tau);
  }
  return trunc_sum(col_means_full(y), tau);
}

MaxLinResult stat_max_lin(const Matrix& y, Axis axis, int subset_size) {
  if (axis == Axis::kTwo) {
    Matrix yt = y.transposed();
    return max_lin_on(yt, subset_size);
  }
  return max_lin_on(y, subset_size);
}

namespace {

MaxTruncResult max_trunc_on(const Matrix& y, int s, const TruncationConstant& tau,
                            std::uint64_t cap) {
  const int d = y.rows();
  if (s < 1 || s > d) throw std::invalid_argument("stat_max_trunc_chi2: subset size out of range");
  MaxTruncResult res;
  if (s == d) {
    // Degenerate scan; identical arithmetic to the plain truncated statistic.
    res.value = trunc_sum(col_means_full(y), tau);
    res.subset.resize(d);
    for (int i = 0; i < d; ++i) res.subset[i] = i;
    res.work = 1;
    return res;
  }
  binom_count_checked(d, s, cap);
  MaxTruncScanner scanner(y, s, std::span<const TruncationConstant>(&tau, 1));
  scanner.run();
  res.value = scanner.best(0);
  res.subset = scanner.best_subset(0);
  res.work = scanner.work();
  return res;
}

std::vector<double> max_trunc_multi_on(const Matrix& y, int s,
                                       std::span<const TruncationConstant> taus,
                                       std::uint64_t cap) {
  const int d = y.rows();
  if (s < 1 || s > d) throw std::invalid_argument("stat_max_trunc_chi2: subset size out of range");
  std::vector<double> values(taus.size());
  if (s == d) {
    auto means = col_means_full(y);
    for (std::size_t t = 0; t < taus.size(); ++t) values[t] = trunc_sum(means, taus[t]);
    return values;
  }
  binom_count_checked(d, s, cap);
  MaxTruncScanner scanner(y, s, taus);
  scanner.run();
  for (std::size_t t = 0; t < taus.size(); ++t) values[t] = scanner.best(t);
  return values;
}

}  // namespace

MaxTruncResult stat_max_trunc_chi2(const Matrix& y, Axis axis, int subset_size,
                                   const TruncationConstant& tau, std::uint64_t cap) {
  if (axis == Axis::kTwo) {
    Matrix yt = y.transposed();
    return max_trunc_on(yt, subset_size, tau, cap);
  }
  return max_trunc_on(y, subset_size, tau, cap);
}

std::vector<double> stat_max_trunc_chi2_multi(const Matrix& y, Axis axis, int subset_size,
                                              std::span<const TruncationConstant> taus,
                                              std::uint64_t cap) {
  if (axis == Axis::kTwo) {
    Matrix yt = y.transposed();
    return max_trunc_multi_on(yt, subset_size, taus, cap);
  }
  return max_trunc_multi_on(y, subset_size, taus, cap);
}

TruncationConstant trunc_tau(const ProblemShape& shape, Axis axis, double tau_c) {
  double load = (axis == Axis::kOne)
                    ? static_cast<double>(shape.d2) / (static_cast<double>(shape.s2) * shape.s2)
                    : static_cast<double>(shape.d1) / (static_cast<double>(shape.s1) * shape.s1);
  return nu_tau(std::sqrt(tau_c * std::log1p(load)));
}

TruncationConstant max_trunc_tau(const ProblemShape& shape, Axis axis, double tau_c) {
  double load;
  if (axis == Axis::kOne)
    load = static_cast<double>(shape.d2) / (static_cast<double>(shape.s2) * shape.s2) *
           log_e_binom(shape.d1, shape.s1);
  else
    load = static_cast<double>(shape.d1) / (static_cast<double>(shape.s1) * shape.s1) *
           log_e_binom(shape.d2, shape.s2);
  return nu_tau(std::sqrt(tau_c * std::log1p(load)));
}

double theoretical_cutoff_value(DetectorKind kind, const ProblemShape& shape,
                                const CutoffConstants& c) {
  const double d1 = shape.d1, d2 = shape.d2, s1 = shape.s1, s2 = shape.s2;
  switch (kind) {
    case DetectorKind::kLinear:
      return c.h2;
    case DetectorKind::kTruncChi2Axis1:
      return c.h1 * s2 * std::log1p(d2 / (s2 * s2));
    case DetectorKind::kTruncChi2Axis2:
      return c.h1p * s1 * std::log1p(d1 / (s1 * s1));
    case DetectorKind::kMaxTruncChi2Axis1: {
      double leb = log_e_binom(shape.d1, shape.s1);
      return c.h3 * (s2 * std::log1p(d2 / (s2 * s2) * leb) + leb);
    }
    case DetectorKind::kMaxTruncChi2Axis2: {
      double leb = log_e_binom(shape.d2, shape.s2);
      return c.h3p * (s1 * std::log1p(d1 / (s1 * s1) * leb) + leb);
    }
    case DetectorKind::kMaxLinAxis1:
      return c.h4 * std::sqrt(log_e_binom(shape.d1, shape.s1));
    case DetectorKind::kMaxLinAxis2:
      return c.h4p * std::sqrt(log_e_binom(shape.d2, shape.s2));
  }
  return 0;
}

std::map<DetectorKind, DetectorSpec> theoretical_cutoffs(const ProblemShape& shape,
                                                         const CutoffConstants& constants) {
  std::map<DetectorKind, DetectorSpec> specs;
  for (DetectorKind kind : kAllDetectorKinds) {
    DetectorSpec spec;
    spec.kind = kind;
    spec.shape = shape;
    if (kind == DetectorKind::kTruncChi2Axis1 || kind == DetectorKind::kTruncChi2Axis2)
      spec.tau = trunc_tau(shape, detector_axis(kind), constants.tau_c);
    if (kind == DetectorKind::kMaxTruncChi2Axis1 || kind == DetectorKind::kMaxTruncChi2Axis2)
      spec.tau = max_trunc_tau(shape, detector_axis(kind), constants.tau_c);
    spec.cutoff = theoretical_cutoff_value(kind, shape, constants);
    spec.provenance.mode = CutoffMode::kTheoretical;
    spec.provenance.constants = constants;
    specs.emplace(kind, spec);
  }
  return specs;
}

TestOutcome evaluate_detector(const DetectorSpec& spec, const Matrix& y, std::uint64_t cap) {
  if (y.rows() != spec.shape.d1 || y.cols() != spec.shape.d2)
    throw std::invalid_argument("evaluate_detector: observation does not match shape");
  if (is_truncated(spec.kind) && !spec.tau)
    throw std::invalid_argument("evaluate_detector: truncated statistic without tau");

  TestOutcome out;
  out.kind = spec.kind;
  out.cutoff = spec.cutoff;
  const Axis axis = detector_axis(spec.kind);
  switch (spec.kind) {
    case DetectorKind::kLinear:
      out.statistic = stat_linear(y);
      out.work_count = 1;
      break;
    case DetectorKind::kTruncChi2Axis1:
    case DetectorKind::kTruncChi2Axis2:
      out.statistic = stat_trunc_chi2(y, axis, *spec.tau);
      out.work_count = 1;
      break;
    case DetectorKind::kMaxLinAxis1:
    case DetectorKind::kMaxLinAxis2: {
      int s = (axis == Axis::kOne) ? spec.shape.s1 : spec.shape.s2;
      auto r = stat_max_lin(y, axis, s);
      out.statistic = r.value;
      out.argmax_subset = std::move(r.subset);
      out.work_count = 1;
      break;
    }
    case DetectorKind::kMaxTruncChi2Axis1:
    case DetectorKind::kMaxTruncChi2Axis2: {
      int s = (axis == Axis::kOne) ? spec.shape.s1 : spec.shape.s2;
      auto r = stat_max_trunc_chi2(y, axis, s, *spec.tau, cap);
      out.statistic = r.value;
      out.argmax_subset = std::move(r.subset);
      out.work_count = r.work;
      break;
    }
  }
  out.reject = out.statistic > out.cutoff;
  return out;
}

DetectorKind dispatch_constituent(const ProblemShape& shape, const RateBreakdown& rates) {
  const double d1 = shape.d1, d2 = shape.d2, s1 = shape.s1, s2 = shape.s2;
  switch (rates.regime) {
    case Regime::kPhiA:
      return d2 / (s2 * s2) >= 1.0 ? DetectorKind::kTruncChi2Axis1 : DetectorKind::kLinear;
    case Regime::kPhiB:
      return d1 / (s1 * s1) >= 1.0 ? DetectorKind::kTruncChi2Axis2 : DetectorKind::kLinear;
    case Regime::kPsiBetaC:
      return d2 / (s2 * s2) * log_e_binom(shape.d1, shape.s1) >= 1.0
                 ? DetectorKind::kMaxTruncChi2Axis1
                 : DetectorKind::kMaxLinAxis1;
    case Regime::kPsiBetaD:
      return d1 / (s1 * s1) * log_e_binom(shape.d2, shape.s2) >= 1.0
                 ? DetectorKind::kMaxTruncChi2Axis2
                 : DetectorKind::kMaxLinAxis2;
  }
  return DetectorKind::kLinear;
}

TestOutcome delta_star(const Matrix& y, const ProblemShape& shape, const RateBreakdown& rates,
                       const std::map<DetectorKind, DetectorSpec>& specs, std::uint64_t cap) {
  DetectorKind kind = dispatch_constituent(shape, rates);
  auto it = specs.find(kind);
  if (it == specs.end())
    throw std::invalid_argument("delta_star: no spec for dispatched constituent " +
                                std::string(detector_name(kind)));
  return evaluate_detector(it->second, y, cap);
}

std::vector<double> evaluate_statistics(const Matrix& y, std::span<const StatRequest> requests,
                                        std::uint64_t cap) {
  std::vector<double> values(requests.size(), 0.0);
  std::optional<Matrix> yt;
  auto transposed = [&]() -> const Matrix& {
    if (!yt) yt = y.transposed();
    return *yt;
  };

  // Group Bonferroni chi-square requests sharing (axis, subset size) so one
  // enumeration serves all their truncation levels.
  struct Group {
    Axis axis;
    int s;
    std::vector<std::size_t> idx;
    std::vector<TruncationConstant> taus;
  };
  std::vector<Group> groups;

  for (std::size_t i = 0; i < requests.size(); ++i) {
    const auto& req = requests[i];
    const Axis axis = detector_axis(req.kind);
    switch (req.kind) {
      case DetectorKind::kLinear:
        values[i] = stat_linear(y);
        break;
      case DetectorKind::kTruncChi2Axis1:
        values[i] = trunc_sum(col_means_full(y), *req.tau);
        break;
      case DetectorKind::kTruncChi2Axis2:
        values[i] = trunc_sum(col_means_full(transposed()), *req.tau);
        break;
      case DetectorKind::kMaxLinAxis1:
      case DetectorKind::kMaxLinAxis2:
        values[i] = stat_max_lin(axis == Axis::kOne ? y : transposed(), Axis::kOne,
                                 req.subset_size)
                        .value;
        break;
      case DetectorKind::kMaxTruncChi2Axis1:
      case DetectorKind::kMaxTruncChi2Axis2: {
        auto match = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
          return g.axis == axis && g.s == req.subset_size;
        });
        if (match == groups.end()) {
          groups.push_back(Group{axis, req.subset_size, {}, {}});
          match = groups.end() - 1;
        }
        match->idx.push_back(i);
        match->taus.push_back(*req.tau);
        break;
      }
    }
  }

  for (const auto& g : groups) {
    auto vals = max_trunc_multi_on(g.axis == Axis::kOne ? y : transposed(), g.s, g.taus, cap);
    for (std::size_t t = 0; t < g.idx.size(); ++t) values[g.idx[t]] = vals[t];
  }
  return values;
}

}  // namespace subdetect
