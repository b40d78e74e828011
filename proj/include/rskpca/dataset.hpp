#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rskpca/error.hpp"
#include "rskpca/numerics.hpp"

namespace rskpca {

/// n points in R^d with optional integer class labels.
struct DataSet {
  Points points;
  std::optional<std::vector<int>> labels;
  std::string name;

  Index size() const { return points.rows(); }
  Index dim() const { return points.cols(); }
  bool labeled() const { return labels.has_value(); }

  void validate() const {
    detail::require(points.allFinite(), "dataset '" + name + "': non-finite value");
    if (labels) {
      detail::require(static_cast<Index>(labels->size()) == size(),
                      "dataset '" + name + "': label count does not match point count");
    }
  }

  DataSet subset(std::span<const Index> rows) const {
    DataSet out;
    out.name = name;
    out.points.resize(static_cast<Index>(rows.size()), dim());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.points.row(static_cast<Index>(i)) = points.row(rows[i]);
    }
    if (labels) {
      out.labels.emplace();
      out.labels->reserve(rows.size());
      for (const Index r : rows) out.labels->push_back((*labels)[static_cast<std::size_t>(r)]);
    }
    return out;
  }
};

}  // namespace rskpca
