#include "subdetect/shape.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace subdetect {

ProblemShape::ProblemShape(int d1_, int d2_, int s1_, int s2_)
    : d1(d1_), d2(d2_), s1(s1_), s2(s2_) {
  if (d1 < 1 || d2 < 1) throw std::invalid_argument("ProblemShape: dimensions must be positive");
  if (s1 < 1 || s1 > d1 || s2 < 1 || s2 > d2)
    throw std::invalid_argument("ProblemShape: sparsities must satisfy 1 <= s_j <= d_j");
}

namespace {

std::vector<int> checked_support(std::vector<int> idx, int size, int dim, const char* what) {
  if (static_cast<int>(idx.size()) != size)
    throw std::invalid_argument(std::string(what) + ": cardinality mismatch");
  std::sort(idx.begin(), idx.end());
  if (std::adjacent_find(idx.begin(), idx.end()) != idx.end())
    throw std::invalid_argument(std::string(what) + ": duplicate index");
  if (idx.front() < 0 || idx.back() >= dim)
    throw std::invalid_argument(std::string(what) + ": index out of range");
  return idx;
}

}  // namespace

PlantedMean make_planted_mean(const ProblemShape& shape, std::vector<int> row_support,
                              std::vector<int> col_support, double mu) {
  if (!(mu >= 0.0)) throw std::invalid_argument("make_planted_mean: mu must be nonnegative");
  PlantedMean mean;
  mean.shape = shape;
  mean.row_support = checked_support(std::move(row_support), shape.s1, shape.d1, "row support");
  mean.col_support = checked_support(std::move(col_support), shape.s2, shape.d2, "col support");
  mean.mu = mu;
  return mean;
}

Matrix mean_matrix(const PlantedMean& mean) {
  Matrix x(mean.shape.d1, mean.shape.d2);
  for (int i : mean.row_support)
    for (int j : mean.col_support) x(i, j) = mean.mu;
  return x;
}

}  // namespace subdetect
