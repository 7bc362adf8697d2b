#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace subdetect {

/// Seed for one reproducible random stream: a root seed plus a replicate
/// (stream) index. Deriving a stream is a pure function of the pair, so
/// replicates can run in any order on any number of threads.
struct SeedSpec {
  std::uint64_t root_seed = 0;
  std::uint64_t stream_index = 0;

  bool operator==(const SeedSpec&) const = default;
};

std::uint64_t splitmix64(std::uint64_t& state);

/// Deterministically fold a text tag into a root seed. Used to carve
/// independent sub-experiments (calibration, null, alternative, ...) out of
/// one user-facing seed.
std::uint64_t derive_root(std::uint64_t root, std::string_view tag);

/// One 128-bit Philox4x32-10 block.
std::array<std::uint32_t, 4> philox4x32(std::uint64_t key, std::uint64_t stream,
                                        std::uint64_t counter);

/// Counter-based stream of uniforms and normals. Gaussian variates use the
/// inverse-CDF transform, so a stream's output is a fixed function of
/// (root_seed, stream_index, draw index).
class RandomStream {
 public:
  explicit RandomStream(SeedSpec seed) : key_(seed.root_seed), stream_(seed.stream_index) {}

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double next_unit();
  /// Standard normal deviate.
  double next_normal();
  /// Uniform integer in [0, n), unbiased. n must be positive.
  std::uint64_t next_below(std::uint64_t n);

 private:
  std::uint64_t key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int avail_ = 0;  // unread 64-bit words in block_ (0, 1, or 2)
};

}  // namespace subdetect
