#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "rskpca/error.hpp"
#include "rskpca/numerics.hpp"

namespace rskpca {

/// Weighted centers standing in for an n-point sample.
///
/// Weights count original samples, so they sum to `source_n`. `assignment[i]`
/// is the center that replaces sample i (the quantization map). `shadow_ell`
/// is set only by shadow selection, the one estimator the error bounds cover.
struct ReducedSet {
  Points centers;
  std::vector<double> weights;
  std::optional<std::vector<Index>> assignment;
  Index source_n = 0;
  std::optional<double> shadow_ell;

  Index size() const { return centers.rows(); }
  Index dim() const { return centers.cols(); }

  double total_weight() const {
    double s = 0.0;
    for (const double w : weights) s += w;
    return s;
  }

  void validate() const {
    detail::require(size() >= 1, "reduced set: no centers");
    detail::require(static_cast<Index>(weights.size()) == size(),
                    "reduced set: weight count does not match center count");
    for (const double w : weights) {
      detail::require(std::isfinite(w) && w > 0.0, "reduced set: nonpositive weight");
    }
    detail::require(size() <= source_n, "reduced set: more centers than source samples");
    if (assignment) {
      detail::require(static_cast<Index>(assignment->size()) == source_n,
                      "reduced set: assignment length does not match source size");
      for (const Index a : *assignment) {
        detail::require(a >= 0 && a < size(), "reduced set: assignment out of range");
      }
    }
  }
};

}  // namespace rskpca
