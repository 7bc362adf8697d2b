#include "subdetect/observation.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace subdetect {

namespace {

std::vector<int> uniform_subset(int d, int s, RandomStream& stream) {
  // Partial Fisher-Yates: first s entries of a random permutation.
  std::vector<int> idx(d);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < s; ++i) {
    int j = i + static_cast<int>(stream.next_below(static_cast<std::uint64_t>(d - i)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(s);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

std::pair<std::vector<int>, std::vector<int>> sample_random_support(const ProblemShape& shape,
                                                                    RandomStream& stream) {
  auto rows = uniform_subset(shape.d1, shape.s1, stream);
  auto cols = uniform_subset(shape.d2, shape.s2, stream);
  return {std::move(rows), std::move(cols)};
}

std::pair<std::vector<int>, std::vector<int>> sample_random_support(const ProblemShape& shape,
                                                                    SeedSpec seed) {
  RandomStream stream(seed);
  return sample_random_support(shape, stream);
}

Observation sample_observation(const ProblemShape& shape, const std::optional<PlantedMean>& mean,
                               SeedSpec seed) {
  if (mean && !(mean->shape == shape))
    throw std::invalid_argument("sample_observation: mean shape mismatch");

  Observation obs;
  obs.shape = shape;
  obs.seed = seed;
  obs.provenance = mean ? Provenance::kPlanted : Provenance::kNull;
  obs.mean = mean;
  obs.values = mean ? mean_matrix(*mean) : Matrix(shape.d1, shape.d2);

  RandomStream stream(seed);
  double* v = obs.values.data().data();
  std::size_t n = obs.values.data().size();
  for (std::size_t k = 0; k < n; ++k) v[k] += stream.next_normal();
  return obs;
}

}  // namespace subdetect
