#pragma once

#include <vector>

#include "subdetect/matrix.hpp"

namespace subdetect {

/// Problem shape (d1, d2, s1, s2): ambient matrix dimensions and the
/// row/column sparsity of the planted block. Always 1 <= s_j <= d_j.
struct ProblemShape {
  int d1 = 1;
  int d2 = 1;
  int s1 = 1;
  int s2 = 1;

  ProblemShape() = default;
  ProblemShape(int d1_, int d2_, int s1_, int s2_);

  ProblemShape transpose() const { return ProblemShape(d2, d1, s2, s1); }

  bool operator==(const ProblemShape&) const = default;
};

/// The least-favorable mean matrix: exactly mu on rowSupport x colSupport,
/// zero elsewhere. Supports are stored sorted ascending.
struct PlantedMean {
  ProblemShape shape;
  std::vector<int> row_support;
  std::vector<int> col_support;
  double mu = 0.0;
};

PlantedMean make_planted_mean(const ProblemShape& shape, std::vector<int> row_support,
                              std::vector<int> col_support, double mu);

Matrix mean_matrix(const PlantedMean& mean);

}  // namespace subdetect
