#include "subdetect/subsets.hpp"

#include <algorithm>
#include <numeric>

namespace subdetect {

namespace {

// C(n, k) with saturation just above `cap`; the running product
// c = C(n-k+i, i) stays integral at every step.
unsigned __int128 binom_saturating(long long n, long long k, unsigned __int128 sat) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 c = 1;
  for (long long i = 1; i <= k; ++i) {
    c = c * static_cast<unsigned __int128>(n - k + i) / static_cast<unsigned __int128>(i);
    if (c > sat) return sat + 1;
  }
  return c;
}

}  // namespace

bool binom_exceeds(long long n, long long k, std::uint64_t cap) {
  return binom_saturating(n, k, cap) > cap;
}

std::uint64_t binom_count_checked(long long n, long long k, std::uint64_t cap) {
  if (binom_exceeds(n, k, cap)) throw enumeration_cap_error(n, k, cap);
  return static_cast<std::uint64_t>(binom_saturating(n, k, cap));
}

int next_colex_subset(std::span<int> subset, int n) {
  const int k = static_cast<int>(subset.size());
  for (int t = 0; t < k; ++t) {
    int limit = (t + 1 < k) ? subset[t + 1] : n;
    if (subset[t] + 1 < limit) {
      ++subset[t];
      for (int i = 0; i < t; ++i) subset[i] = i;
      return t;
    }
  }
  return -1;
}

std::vector<int> top_k_indices(std::span<const double> values, int k) {
  const int n = static_cast<int>(values.size());
  if (k < 0 || k > n) throw std::invalid_argument("top_k_indices: k out of range");
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return a < b;
  });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace subdetect
