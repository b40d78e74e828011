#pragma once

// Downstream evaluation: k-NN on embeddings, stratified k-fold CV, phase
// timing and speedup accounting.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "rskpca/dataset.hpp"
#include "rskpca/error.hpp"
#include "rskpca/format.hpp"
#include "rskpca/numerics.hpp"

namespace rskpca {

/// Majority vote over the k nearest training rows (Euclidean). Equidistant
/// neighbors are ranked by training index. Vote ties go to the label with the
/// smallest summed neighbor distance, then to the lowest label.
inline std::vector<int> knn_classify(const Matrix& train, const std::vector<int>& train_labels,
                                     const Matrix& test, Index k) {
  detail::require(train.rows() >= 1, "knn_classify: empty training set");
  detail::require(static_cast<Index>(train_labels.size()) == train.rows(),
                  "knn_classify: label count does not match training rows");
  detail::require(train.cols() == test.cols(), "knn_classify: embedding widths differ");
  detail::require(k >= 1 && k <= train.rows(), "knn_classify: k outside [1, training size]");

  const Index n = train.rows();
  std::vector<int> out(static_cast<std::size_t>(test.rows()));
  std::vector<std::pair<double, Index>> dist(static_cast<std::size_t>(n));
  for (Index t = 0; t < test.rows(); ++t) {
    for (Index i = 0; i < n; ++i) {
      dist[static_cast<std::size_t>(i)] = {(train.row(i) - test.row(t)).norm(), i};
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

    std::map<int, std::pair<int, double>> votes;  // label -> (count, summed distance)
    for (Index j = 0; j < k; ++j) {
      const auto& [d, i] = dist[static_cast<std::size_t>(j)];
      auto& v = votes[train_labels[static_cast<std::size_t>(i)]];
      ++v.first;
      v.second += d;
    }
    int best_label = votes.begin()->first;
    auto best = votes.begin()->second;
    for (const auto& [label, v] : votes) {
      if (v.first > best.first || (v.first == best.first && v.second < best.second)) {
        best = v;
        best_label = label;
      }
    }
    out[static_cast<std::size_t>(t)] = best_label;
  }
  return out;
}

inline double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  detail::require(predicted.size() == truth.size() && !truth.empty(),
                  "accuracy: prediction and truth sizes differ");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// Fold id per sample. With labels the folds are stratified: each class is
/// shuffled and dealt round-robin, continuing the deal across classes, so
/// fold sizes differ by at most one.
inline std::vector<int> make_folds(Index n, const std::vector<int>* labels, int folds,
                                   std::uint64_t seed) {
  detail::require(folds >= 2, "make_folds: need at least two folds");
  detail::require(n >= folds, "make_folds: fewer samples than folds");
  Rng rng(seed);
  std::vector<std::vector<Index>> groups;
  if (labels) {
    std::map<int, std::vector<Index>> by_class;
    for (Index i = 0; i < n; ++i) by_class[(*labels)[static_cast<std::size_t>(i)]].push_back(i);
    for (auto& [label, idx] : by_class) groups.push_back(std::move(idx));
  } else {
    groups.emplace_back(static_cast<std::size_t>(n));
    std::iota(groups.back().begin(), groups.back().end(), Index{0});
  }
  std::vector<int> fold(static_cast<std::size_t>(n), -1);
  int next = 0;
  for (auto& g : groups) {
    shuffle(g, rng);
    for (const Index i : g) {
      fold[static_cast<std::size_t>(i)] = next;
      next = (next + 1) % folds;
    }
  }
  return fold;
}

struct CvResult {
  double mean_accuracy = 0.0;
  std::vector<double> fold_accuracies;
  std::vector<int> fold_of;
};

/// Trains on the complement of each fold and predicts the fold.
using Pipeline = std::function<std::vector<int>(const DataSet& train, const DataSet& test)>;

inline CvResult kfold_cv(const DataSet& ds, const Pipeline& pipeline, int folds,
                         std::uint64_t seed) {
  detail::require(ds.labeled(), "kfold_cv: dataset '" + ds.name + "' has no labels");
  detail::require(ds.size() >= folds, "kfold_cv: fewer samples than folds");
  CvResult out;
  out.fold_of = make_folds(ds.size(), &*ds.labels, folds, seed);
  for (int f = 0; f < folds; ++f) {
    std::vector<Index> train_rows, test_rows;
    for (Index i = 0; i < ds.size(); ++i) {
      (out.fold_of[static_cast<std::size_t>(i)] == f ? test_rows : train_rows).push_back(i);
    }
    const DataSet train = ds.subset(train_rows);
    const DataSet test = ds.subset(test_rows);
    out.fold_accuracies.push_back(accuracy(pipeline(train, test), *test.labels));
  }
  out.mean_accuracy = std::accumulate(out.fold_accuracies.begin(), out.fold_accuracies.end(), 0.0) /
                      static_cast<double>(folds);
  return out;
}

// ---------------------------------------------------------------------------
// Timing

struct PhaseTiming {
  double rsde_ms = 0.0;
  double gram_ms = 0.0;
  double eig_ms = 0.0;
  double embed_ms = 0.0;  // embedding the training set, when the task needs it
  double project_ms = 0.0;
  Index n = 0, m = 0, r = 0;
  // Coefficient of variation of the summed time over the measured runs.
  double total_cv = 0.0;

  double train_ms() const { return rsde_ms + gram_ms + eig_ms + embed_ms; }
  double test_ms() const { return project_ms; }
  double total_ms() const { return train_ms() + test_ms(); }
};

/// One callable per phase, run in this order on every repetition. Later
/// phases may consume state produced by earlier ones; empty phases are
/// skipped.
struct Phases {
  std::function<void()> rsde, gram, eig, embed, project;
};

struct TimingOptions {
  int repeats = 3;
  bool warmup = true;
};

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

inline double time_once(const std::function<void()>& fn) {
  if (!fn) return 0.0;
  const auto start = std::chrono::steady_clock::now();
  fn();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count();
}

}  // namespace detail

/// Runs all phases `repeats` times (plus an unmeasured warm-up) on the
/// monotonic clock and reports the per-phase median.
inline PhaseTiming time_phases(const Phases& phases, const TimingOptions& opts = {}) {
  detail::require(opts.repeats >= 1, "time_phases: repeats must be positive");
  const std::function<void()>* order[] = {&phases.rsde, &phases.gram, &phases.eig, &phases.embed,
                                          &phases.project};
  if (opts.warmup) {
    for (const auto* fn : order) {
      if (*fn) (*fn)();
    }
  }
  std::vector<std::vector<double>> samples(5);
  std::vector<double> totals;
  for (int rep = 0; rep < opts.repeats; ++rep) {
    double total = 0.0;
    for (std::size_t p = 0; p < 5; ++p) {
      const double ms = detail::time_once(*order[p]);
      samples[p].push_back(ms);
      total += ms;
    }
    totals.push_back(total);
  }
  PhaseTiming t;
  t.rsde_ms = detail::median(samples[0]);
  t.gram_ms = detail::median(samples[1]);
  t.eig_ms = detail::median(samples[2]);
  t.embed_ms = detail::median(samples[3]);
  t.project_ms = detail::median(samples[4]);
  const double mean = std::accumulate(totals.begin(), totals.end(), 0.0) / static_cast<double>(totals.size());
  double var = 0.0;
  for (const double v : totals) var += (v - mean) * (v - mean);
  var /= static_cast<double>(totals.size());
  t.total_cv = mean > 0.0 ? std::sqrt(var) / mean : 0.0;
  return t;
}

struct Speedup {
  double train = 1.0;
  double test = 1.0;
  double total = 1.0;
};

/// base / other per phase group.
inline Speedup speedup(const PhaseTiming& base, const PhaseTiming& other) {
  detail::require(other.train_ms() > 0.0 && other.test_ms() > 0.0,
                  "speedup: zero duration in the compared timing");
  detail::require(base.train_ms() > 0.0 && base.test_ms() > 0.0,
                  "speedup: zero duration in the baseline timing");
  return {base.train_ms() / other.train_ms(), base.test_ms() / other.test_ms(),
          base.total_ms() / other.total_ms()};
}

// ---------------------------------------------------------------------------
// Trial summaries

/// One method at one sweep point, averaged over repetitions. Accuracy is NaN
/// for embedding trials and the embedding/eigenvalue errors are NaN for
/// classification trials.
struct TrialResult {
  std::string method;
  double ell = 0.0;
  double m = 0.0;
  double retained_fraction = 0.0;
  double accuracy = std::nan("");
  double embedding_error = std::nan("");
  double eigenvalue_error = std::nan("");
  double train_speedup = std::nan("");
  double test_speedup = std::nan("");
  double total_speedup = std::nan("");
};

// Deterministic columns. Wall-clock derived columns live in the timing CSV.
inline std::string trial_csv_header() {
  return "method,ell,m,retained_fraction,accuracy,embedding_error,eigenvalue_error";
}

inline std::string to_csv_row(const TrialResult& t) {
  using detail::format_double;
  return t.method + ',' + format_double(t.ell) + ',' + format_double(t.m) + ',' +
         format_double(t.retained_fraction) + ',' + format_double(t.accuracy) + ',' +
         format_double(t.embedding_error) + ',' + format_double(t.eigenvalue_error);
}

inline std::string timing_csv_header() {
  return "method,ell,m,train_speedup,test_speedup,total_speedup";
}

inline std::string to_timing_csv_row(const TrialResult& t) {
  using detail::format_double;
  return t.method + ',' + format_double(t.ell) + ',' + format_double(t.m) + ',' +
         format_double(t.train_speedup) + ',' + format_double(t.test_speedup) + ',' +
         format_double(t.total_speedup);
}

// ---------------------------------------------------------------------------
// Rank statistics

/// Average ranks (1-based), ties share the mean rank.
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

/// Spearman rank correlation (Pearson on average ranks).
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  detail::require(x.size() == y.size() && x.size() >= 2, "spearman: need two equal-length series");
  const std::vector<double> rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace rskpca
