#pragma once

// Reduced-set density estimators. Each returns a ReducedSet whose weights sum
// to n and whose assignment maps every sample to a center:
//
//   shadow_select   single greedy pass; centers are samples, assignment exact
//   kmeans_select   Lloyd centroids weighted by cluster size
//   pare_select     uniform subsample, weights n/m
//   herd_select     kernel herding restricted to the samples, weights n/m
//
// The last three synthesize the assignment by nearest center.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "rskpca/error.hpp"
#include "rskpca/kernels.hpp"
#include "rskpca/numerics.hpp"
#include "rskpca/reduced_set.hpp"

namespace rskpca {

namespace detail {

inline void require_count(Index m, Index n, const char* who) {
  require(n >= 1, std::string(who) + ": empty dataset");
  require(m >= 1 && m <= n, std::string(who) + ": requested " + std::to_string(m) +
                                " centers from " + std::to_string(n) + " samples");
}

inline double squared_distance(const Points& a, Index i, const Points& b, Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

}  // namespace detail

/// Index of the nearest center for every point; ties go to the lower index.
inline std::vector<Index> nearest_center(const Points& x, const Points& centers) {
  detail::require(x.cols() == centers.cols(), "nearest_center: dimension mismatch");
  std::vector<Index> out(static_cast<std::size_t>(x.rows()));
  for (Index i = 0; i < x.rows(); ++i) {
    Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < centers.rows(); ++j) {
      const double d = detail::squared_distance(x, i, centers, j);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

/// Shadow selection. Walks the samples in presentation order: the first
/// unabsorbed sample becomes a center and absorbs every remaining sample
/// strictly closer than sigma / ell. The result depends on input order.
inline ReducedSet shadow_select(const Points& x, const KernelConfig& cfg, double ell) {
  detail::require(x.rows() >= 1, "shadow_select: empty dataset");
  const double eps = shadow_radius(cfg, ell);
  const Index n = x.rows();

  std::vector<Index> remaining(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) remaining[static_cast<std::size_t>(i)] = i;
  std::vector<Index> assignment(static_cast<std::size_t>(n), -1);
  std::vector<Index> center_rows;
  std::vector<double> weights;

  std::vector<Index> kept;
  kept.reserve(remaining.size());
  while (!remaining.empty()) {
    const Index c = remaining.front();
    const auto id = static_cast<Index>(center_rows.size());
    Index absorbed = 0;
    kept.clear();
    for (const Index y : remaining) {
      if (std::sqrt(detail::squared_distance(x, y, x, c)) < eps) {
        assignment[static_cast<std::size_t>(y)] = id;
        ++absorbed;
      } else {
        kept.push_back(y);
      }
    }
    center_rows.push_back(c);
    weights.push_back(static_cast<double>(absorbed));
    remaining.swap(kept);
  }

  ReducedSet rs;
  rs.centers.resize(static_cast<Index>(center_rows.size()), x.cols());
  for (std::size_t j = 0; j < center_rows.size(); ++j) {
    rs.centers.row(static_cast<Index>(j)) = x.row(center_rows[j]);
  }
  rs.weights = std::move(weights);
  rs.assignment = std::move(assignment);
  rs.source_n = n;
  rs.shadow_ell = ell;
  return rs;
}

struct KMeansOptions {
  int max_iterations = 300;
  // Stop once no centroid moves farther than this.
  double movement_tolerance = 1e-9;
};

/// Lloyd's k-means with k-means++ seeding. Clusters that empty out are
/// reseeded from the sample farthest from its centroid. Clusters still empty
/// at the end (possible only with duplicate samples) are dropped.
inline ReducedSet kmeans_select(const Points& x, Index m, std::uint64_t seed,
                                const KMeansOptions& opts = {}) {
  const Index n = x.rows();
  detail::require_count(m, n, "kmeans_select");
  const Index d = x.cols();
  Rng rng(seed);

  // k-means++ seeding.
  Points centers(m, d);
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  Index first = static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(n)));
  for (Index c = 0; c < m; ++c) {
    Index pick = first;
    if (c > 0) {
      double total = 0.0;
      for (Index i = 0; i < n; ++i) total += d2[static_cast<std::size_t>(i)];
      if (total > 0.0) {
        double target = std::uniform_real_distribution<double>(0.0, total)(rng);
        pick = n - 1;
        for (Index i = 0; i < n; ++i) {
          target -= d2[static_cast<std::size_t>(i)];
          if (target < 0.0 && d2[static_cast<std::size_t>(i)] > 0.0) {
            pick = i;
            break;
          }
        }
      } else {
        // Every sample coincides with a chosen center: take the first unused one.
        pick = 0;
        while (chosen[static_cast<std::size_t>(pick)]) ++pick;
      }
    }
    chosen[static_cast<std::size_t>(pick)] = true;
    centers.row(c) = x.row(pick);
    for (Index i = 0; i < n; ++i) {
      auto& di = d2[static_cast<std::size_t>(i)];
      di = std::min(di, detail::squared_distance(x, i, centers, c));
    }
  }

  std::vector<Index> assign = nearest_center(x, centers);
  std::vector<Index> counts(static_cast<std::size_t>(m));
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    Points sums = Points::Zero(m, d);
    std::fill(counts.begin(), counts.end(), 0);
    for (Index i = 0; i < n; ++i) {
      const Index a = assign[static_cast<std::size_t>(i)];
      sums.row(a) += x.row(i);
      ++counts[static_cast<std::size_t>(a)];
    }

    double max_move = 0.0;
    for (Index c = 0; c < m; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) continue;
      const Eigen::RowVectorXd next = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      max_move = std::max(max_move, (next - centers.row(c)).norm());
      centers.row(c) = next;
    }

    for (Index c = 0; c < m; ++c) {
      if (counts[static_cast<std::size_t>(c)] != 0) continue;
      Index far = -1;
      double far_d = -1.0;
      for (Index i = 0; i < n; ++i) {
        const Index a = assign[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(a)] <= 1) continue;
        const double di = detail::squared_distance(x, i, centers, a);
        if (di > far_d) {
          far_d = di;
          far = i;
        }
      }
      if (far < 0) break;
      --counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(far)])];
      centers.row(c) = x.row(far);
      assign[static_cast<std::size_t>(far)] = c;
      counts[static_cast<std::size_t>(c)] = 1;
      max_move = std::numeric_limits<double>::infinity();
    }

    const std::vector<Index> next_assign = nearest_center(x, centers);
    const bool stable = next_assign == assign;
    assign = next_assign;
    if (stable && max_move <= opts.movement_tolerance) break;
  }

  // Final centroids and weights from the final assignment.
  Points sums = Points::Zero(m, d);
  std::fill(counts.begin(), counts.end(), 0);
  for (Index i = 0; i < n; ++i) {
    sums.row(assign[static_cast<std::size_t>(i)]) += x.row(i);
    ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
  }
  std::vector<Index> remap(static_cast<std::size_t>(m), -1);
  ReducedSet rs;
  Index kept = 0;
  for (Index c = 0; c < m; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) remap[static_cast<std::size_t>(c)] = kept++;
  }
  rs.centers.resize(kept, d);
  rs.weights.resize(static_cast<std::size_t>(kept));
  for (Index c = 0; c < m; ++c) {
    const Index k = remap[static_cast<std::size_t>(c)];
    if (k < 0) continue;
    const auto cnt = static_cast<double>(counts[static_cast<std::size_t>(c)]);
    rs.centers.row(k) = sums.row(c) / cnt;
    rs.weights[static_cast<std::size_t>(k)] = cnt;
  }
  for (auto& a : assign) a = remap[static_cast<std::size_t>(a)];
  rs.assignment = std::move(assign);
  rs.source_n = n;
  return rs;
}

/// KDE paring: a uniform sample of m points without replacement, weights n/m.
inline ReducedSet pare_select(const Points& x, Index m, std::uint64_t seed) {
  const Index n = x.rows();
  detail::require_count(m, n, "pare_select");
  Rng rng(seed);
  const std::vector<Index> rows = sample_without_replacement(n, m, rng);

  ReducedSet rs;
  rs.centers.resize(m, x.cols());
  for (Index j = 0; j < m; ++j) rs.centers.row(j) = x.row(rows[static_cast<std::size_t>(j)]);
  rs.weights.assign(static_cast<std::size_t>(m), static_cast<double>(n) / static_cast<double>(m));
  rs.assignment = nearest_center(x, rs.centers);
  rs.source_n = n;
  return rs;
}

// Herding scores closer than this count as tied (scores lie in [-1, 1]).
inline constexpr double kHerdTieTolerance = 1e-12;

/// Kernel herding over the samples. Step t picks the unselected sample
/// maximizing  (1/n) sum_i k(x, x_i) - (1/(t+1)) sum_{s<=t} k(x, x_s);
/// ties go to the lowest index. Uniform weights n/m.
///
/// Row sums of the kernel are computed once and the herding term is updated
/// incrementally, so the scan touches each kernel value O(1) times per step.
inline ReducedSet herd_select(const Points& x, const KernelConfig& cfg, Index m) {
  const Index n = x.rows();
  detail::require_count(m, n, "herd_select");

  Vector mean_embedding = Vector::Zero(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      const double v = eval(cfg, x.row(i), x.row(j));
      mean_embedding(i) += v;
      if (j != i) mean_embedding(j) += v;
    }
  }
  mean_embedding /= static_cast<double>(n);

  Vector herd_sum = Vector::Zero(n);
  std::vector<bool> taken(static_cast<std::size_t>(n), false);
  std::vector<Index> rows;
  rows.reserve(static_cast<std::size_t>(m));
  for (Index t = 0; t < m; ++t) {
    const double scale = 1.0 / static_cast<double>(t + 1);
    Index best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < n; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      const double score = mean_embedding(i) - scale * herd_sum(i);
      if (score > best_score + kHerdTieTolerance) {
        best_score = score;
        best = i;
      }
    }
    taken[static_cast<std::size_t>(best)] = true;
    rows.push_back(best);
    for (Index i = 0; i < n; ++i) herd_sum(i) += eval(cfg, x.row(i), x.row(best));
  }

  ReducedSet rs;
  rs.centers.resize(m, x.cols());
  for (Index j = 0; j < m; ++j) rs.centers.row(j) = x.row(rows[static_cast<std::size_t>(j)]);
  rs.weights.assign(static_cast<std::size_t>(m), static_cast<double>(n) / static_cast<double>(m));
  rs.assignment = nearest_center(x, rs.centers);
  rs.source_n = n;
  return rs;
}

/// Reduced-set density (1/n) sum_j w_j k(c_j, x). Unnormalized kernel sum:
/// no bandwidth volume factor.
template <class Derived>
double density_eval(const ReducedSet& rs, const KernelConfig& cfg,
                    const Eigen::MatrixBase<Derived>& x) {
  detail::require(x.size() == rs.dim(), "density_eval: dimension mismatch");
  double s = 0.0;
  for (Index j = 0; j < rs.size(); ++j) {
    s += rs.weights[static_cast<std::size_t>(j)] * eval(cfg, rs.centers.row(j), x);
  }
  return s / static_cast<double>(rs.source_n);
}

/// Kernel density estimate (1/n) sum_i k(x_i, x).
template <class Derived>
double density_eval(const Points& samples, const KernelConfig& cfg,
                    const Eigen::MatrixBase<Derived>& x) {
  detail::require(samples.rows() >= 1, "density_eval: empty sample");
  detail::require(x.size() == samples.cols(), "density_eval: dimension mismatch");
  double s = 0.0;
  for (Index i = 0; i < samples.rows(); ++i) s += eval(cfg, samples.row(i), x);
  return s / static_cast<double>(samples.rows());
}

}  // namespace rskpca
