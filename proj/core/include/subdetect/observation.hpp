#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "subdetect/matrix.hpp"
#include "subdetect/rng.hpp"
#include "subdetect/shape.hpp"

namespace subdetect {

enum class Provenance { kNull, kPlanted };

/// One sampled data matrix Y = X + E together with how it was produced.
struct Observation {
  ProblemShape shape;
  Matrix values;
  Provenance provenance = Provenance::kNull;
  std::optional<PlantedMean> mean;
  SeedSpec seed;
};

/// Uniformly random supports: rowSupport uniform over size-s1 subsets of
/// [d1], colSupport uniform over size-s2 subsets of [d2], independent.
std::pair<std::vector<int>, std::vector<int>> sample_random_support(const ProblemShape& shape,
                                                                    RandomStream& stream);
std::pair<std::vector<int>, std::vector<int>> sample_random_support(const ProblemShape& shape,
                                                                    SeedSpec seed);

/// Y = X + E with iid standard Gaussian noise, deterministic given the seed.
/// Pass nullopt for the null model (X = 0).
Observation sample_observation(const ProblemShape& shape, const std::optional<PlantedMean>& mean,
                               SeedSpec seed);

}  // namespace subdetect
