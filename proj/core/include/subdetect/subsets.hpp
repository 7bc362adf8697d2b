#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace subdetect {

/// Raised when a Bonferroni scan would enumerate more subsets than the
/// configured cap. Carries what was requested so callers can report it.
class enumeration_cap_error : public std::runtime_error {
 public:
  enumeration_cap_error(long long n, long long k, std::uint64_t cap)
      : std::runtime_error("subset enumeration over cap: C(" + std::to_string(n) + "," +
                           std::to_string(k) + ") exceeds " + std::to_string(cap)),
        n_(n), k_(k), cap_(cap) {}
  long long n() const { return n_; }
  long long k() const { return k_; }
  std::uint64_t cap() const { return cap_; }

 private:
  long long n_, k_;
  std::uint64_t cap_;
};

inline constexpr std::uint64_t kDefaultEnumerationCap = 1000000;

/// True iff C(n, k) > cap; exact integer arithmetic, no overflow.
bool binom_exceeds(long long n, long long k, std::uint64_t cap);
/// C(n, k) as uint64; throws enumeration_cap_error if it exceeds cap.
std::uint64_t binom_count_checked(long long n, long long k, std::uint64_t cap);

/// In-place colexicographic successor of a strictly increasing k-subset of
/// [0, n). Returns the largest changed position, or -1 when the input was the
/// last subset. Positions [0, changed] are rewritten.
int next_colex_subset(std::span<int> subset, int n);

/// Indices of the k largest values, ties resolved toward the lowest index;
/// result sorted ascending.
std::vector<int> top_k_indices(std::span<const double> values, int k);

}  // namespace subdetect
