#pragma once

// Dataset ingestion, splitting and synthetic generators.
//
// Sparse text format, one sample per line:
//     <label> <index>:<value> <index>:<value> ...
// Indices are 1-based unless some line uses index 0, in which case the whole
// file is read as 0-based. Missing indices are zero. Blank lines and text
// after '#' are ignored.
//
// CSV: comma-delimited, optionally double-quoted cells, optional header. A
// first row containing any non-numeric cell is taken as the header.

#include <algorithm>
#include <charconv>
#include <limits>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rskpca/dataset.hpp"
#include "rskpca/error.hpp"
#include "rskpca/format.hpp"
#include "rskpca/numerics.hpp"

namespace rskpca {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> to_number(std::string_view token) {
  token = trim(token);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  if (token.empty()) return std::nullopt;
  double v = 0.0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size()) return std::nullopt;
  return v;
}

inline std::string where(const std::string& path, std::size_t line) {
  return path + ":" + std::to_string(line);
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return in;
}

inline std::string stem(const std::string& path) {
  const auto slash = path.find_last_of('/');
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  const auto dot = base.find_last_of('.');
  return dot == std::string::npos ? base : base.substr(0, dot);
}

}  // namespace detail

inline DataSet load_sparse(const std::string& path) {
  std::ifstream in = detail::open_input(path);
  struct Row {
    int label;
    std::vector<std::pair<long long, double>> entries;
  };
  std::vector<Row> rows;
  long long min_index = std::numeric_limits<long long>::max();
  long long max_index = -1;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream tokens(line);
    std::string token;
    if (!(tokens >> token)) continue;

    const auto label = detail::to_number(token);
    if (!label || !std::isfinite(*label) || *label != std::round(*label)) {
      throw InputError(detail::where(path, line_no) + ": bad label '" + token + "'");
    }
    Row row{static_cast<int>(*label), {}};
    while (tokens >> token) {
      const auto colon = token.find(':');
      if (colon == std::string::npos) {
        throw InputError(detail::where(path, line_no) + ": expected index:value, got '" + token + "'");
      }
      const auto index = detail::to_number(std::string_view(token).substr(0, colon));
      const auto value = detail::to_number(std::string_view(token).substr(colon + 1));
      if (!index || *index < 0 || *index != std::round(*index)) {
        throw InputError(detail::where(path, line_no) + ": bad index in '" + token + "'");
      }
      if (!value) {
        throw InputError(detail::where(path, line_no) + ": non-numeric value in '" + token + "'");
      }
      if (!std::isfinite(*value)) {
        throw InputError(detail::where(path, line_no) + ": non-finite value in '" + token + "'");
      }
      const auto idx = static_cast<long long>(*index);
      min_index = std::min(min_index, idx);
      max_index = std::max(max_index, idx);
      row.entries.emplace_back(idx, *value);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError(path + ": no samples");

  const long long base = min_index == 0 ? 0 : 1;
  const Index dim = max_index < 0 ? 0 : static_cast<Index>(max_index - base + 1);
  DataSet ds;
  ds.name = detail::stem(path);
  ds.points = Points::Zero(static_cast<Index>(rows.size()), dim);
  ds.labels.emplace();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ds.labels->push_back(rows[i].label);
    for (const auto& [idx, v] : rows[i].entries) ds.points(static_cast<Index>(i), static_cast<Index>(idx - base)) = v;
  }
  return ds;
}

/// Writes 1-based sparse text. Zeros are omitted except the last column,
/// which is always written so the dimension survives a reload. Unlabeled
/// samples get label 0.
inline void save_sparse(const DataSet& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  for (Index i = 0; i < ds.size(); ++i) {
    out << (ds.labels ? (*ds.labels)[static_cast<std::size_t>(i)] : 0);
    for (Index j = 0; j < ds.dim(); ++j) {
      const double v = ds.points(i, j);
      if (v != 0.0 || j + 1 == ds.dim()) out << ' ' << (j + 1) << ':' << detail::format_double(v);
    }
    out << '\n';
  }
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

}  // namespace detail

/// `label_column` is a header name or a 0-based column index. The label column
/// is removed from the features; the remaining columns keep their order.
inline DataSet load_csv(const std::string& path,
                        const std::optional<std::string>& label_column = std::nullopt) {
  std::ifstream in = detail::open_input(path);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const std::vector<std::string> cells = detail::split_csv_line(line);
    std::vector<double> values;
    values.reserve(cells.size());
    bool numeric = true;
    for (const auto& c : cells) {
      const auto v = detail::to_number(c);
      if (!v) {
        numeric = false;
        break;
      }
      values.push_back(*v);
    }
    if (!numeric) {
      if (rows.empty() && header.empty()) {
        header = cells;
        width = cells.size();
        continue;
      }
      throw InputError(detail::where(path, line_no) + ": non-numeric cell");
    }
    if (width == 0) width = values.size();
    if (values.size() != width) {
      throw InputError(detail::where(path, line_no) + ": expected " + std::to_string(width) +
                       " cells, got " + std::to_string(values.size()));
    }
    for (const double v : values) {
      if (!std::isfinite(v)) throw InputError(detail::where(path, line_no) + ": non-finite value");
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw InputError(path + ": no samples");

  std::optional<std::size_t> label_idx;
  if (label_column) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (detail::trim(header[j]) == *label_column) label_idx = j;
    }
    if (!label_idx) {
      const auto as_num = detail::to_number(*label_column);
      if (as_num && *as_num >= 0 && *as_num == std::round(*as_num)) label_idx = static_cast<std::size_t>(*as_num);
    }
    if (!label_idx || *label_idx >= width) {
      throw InputError(path + ": label column '" + *label_column + "' not found");
    }
  }

  DataSet ds;
  ds.name = detail::stem(path);
  const auto dim = static_cast<Index>(width - (label_idx ? 1 : 0));
  ds.points.resize(static_cast<Index>(rows.size()), dim);
  if (label_idx) ds.labels.emplace();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Index col = 0;
    for (std::size_t j = 0; j < width; ++j) {
      if (label_idx && j == *label_idx) {
        const double l = rows[i][j];
        if (l != std::round(l)) throw InputError(path + ": non-integer label in row " + std::to_string(i + 1));
        ds.labels->push_back(static_cast<int>(l));
      } else {
        ds.points(static_cast<Index>(i), col++) = rows[i][j];
      }
    }
  }
  return ds;
}

/// Dense matrix as CSV with an optional header row.
inline void save_csv(const Matrix& values, const std::string& path,
                     const std::vector<std::string>& header = {}) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  if (!header.empty()) out << '\n';
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) out << (j ? "," : "") << detail::format_double(values(i, j));
    out << '\n';
  }
}

/// Seeded train/test split. The permutation depends only on (n, seed), so the
/// split is the same with or without labels. Both sides keep input order.
inline std::pair<DataSet, DataSet> split(const DataSet& ds, double fraction, std::uint64_t seed) {
  detail::require(fraction > 0.0 && fraction < 1.0, "split: fraction must lie in (0, 1)");
  const Index n = ds.size();
  const auto train_n = static_cast<Index>(std::llround(fraction * static_cast<double>(n)));
  detail::require(train_n >= 1 && train_n < n, "split: one side would be empty");
  Rng rng(seed);
  std::vector<Index> perm = sample_without_replacement(n, n, rng);
  std::vector<Index> train(perm.begin(), perm.begin() + train_n);
  std::vector<Index> test(perm.begin() + train_n, perm.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {ds.subset(train), ds.subset(test)};
}

/// Gaussian blobs around the given centers; point i belongs to blob
/// i mod clusters and carries that label.
inline DataSet synth_blobs_at(const Points& centers, Index n, double spread, std::uint64_t seed) {
  detail::require(centers.rows() >= 1, "synth_blobs: need at least one cluster");
  detail::require(spread >= 0.0, "synth_blobs: spread must be nonnegative");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  DataSet ds;
  ds.name = "blobs";
  ds.points.resize(n, centers.cols());
  ds.labels.emplace();
  ds.labels->reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const Index c = i % centers.rows();
    for (Index j = 0; j < centers.cols(); ++j) ds.points(i, j) = centers(c, j) + spread * normal(rng);
    ds.labels->push_back(static_cast<int>(c));
  }
  return ds;
}

/// Blob centers uniform in [-center_box, center_box]^d.
inline DataSet synth_blobs(Index n, Index d, Index clusters, double spread, std::uint64_t seed,
                           double center_box = 10.0) {
  detail::require(clusters >= 1, "synth_blobs: need at least one cluster");
  detail::require(d >= 1, "synth_blobs: dimension must be positive");
  Rng rng(derive_seed(seed, 0xb10b));
  detail::require(center_box >= 0.0, "synth_blobs: center box must be nonnegative");
  std::uniform_real_distribution<double> uniform(-center_box, center_box);
  Points centers(clusters, d);
  for (Index c = 0; c < clusters; ++c) {
    for (Index j = 0; j < d; ++j) centers(c, j) = center_box > 0.0 ? uniform(rng) : 0.0;
  }
  return synth_blobs_at(centers, n, spread, seed);
}

/// Per-column min-max scaling to [0, 1]; constant columns map to 0.
inline DataSet minmax_scale(const DataSet& ds) {
  DataSet out = ds;
  for (Index j = 0; j < ds.dim(); ++j) {
    const double lo = ds.points.col(j).minCoeff();
    const double hi = ds.points.col(j).maxCoeff();
    if (hi > lo) {
      out.points.col(j) = (ds.points.col(j).array() - lo) / (hi - lo);
    } else {
      out.points.col(j).setZero();
    }
  }
  return out;
}

/// Cross-validated bandwidths for the reference benchmark datasets.
inline std::optional<double> default_sigma(std::string_view dataset_name) {
  static const std::map<std::string, double, std::less<>> table = {
      {"german", 30.0}, {"pendigits", 120.0}, {"usps", 18.0}, {"yale", 17.0}};
  const auto it = table.find(dataset_name);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

}  // namespace rskpca
