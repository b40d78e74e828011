#pragma once

// Shared fixtures and brute-force oracles for the unit tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "rskpca/rskpca.hpp"

namespace rskpca::testing {

inline Points random_points(Index n, Index d, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Points x(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) x(i, j) = normal(rng);
  }
  return x;
}

inline Points points_1d(std::initializer_list<double> values) {
  Points x(static_cast<Index>(values.size()), 1);
  Index i = 0;
  for (const double v : values) x(i++, 0) = v;
  return x;
}

inline Matrix random_symmetric(Index n, std::uint64_t seed) {
  const Points a = random_points(n, n, seed);
  Matrix m = a;
  return 0.5 * (m + m.transpose());
}

inline double min_pairwise_distance(const Points& x) {
  double best = INFINITY;
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = i + 1; j < x.rows(); ++j) best = std::min(best, (x.row(i) - x.row(j)).norm());
  }
  return best;
}

/// ell such that the shadow radius is half the minimum pairwise distance.
inline double identity_ell(const KernelConfig& cfg, const Points& x) {
  return 2.0 * cfg.sigma() / min_pairwise_distance(x);
}

/// The n x n quantized Gram kbar_ij = k(c_alpha(i), c_alpha(j)), built
/// pointwise.
inline Matrix quantized_gram(const KernelConfig& cfg, const ReducedSet& rs) {
  const auto& a = *rs.assignment;
  const auto n = static_cast<Index>(a.size());
  Matrix k(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      k(i, j) = eval(cfg, rs.centers.row(a[static_cast<std::size_t>(i)]),
                     rs.centers.row(a[static_cast<std::size_t>(j)]));
    }
  }
  return k;
}

/// Largest |a_i - b_i| over the shorter vector, with zeros padding the tail.
inline double padded_max_diff(const Vector& a, const Vector& b) {
  const Index len = std::max(a.size(), b.size());
  double worst = 0.0;
  for (Index i = 0; i < len; ++i) {
    const double x = i < a.size() ? a(i) : 0.0;
    const double y = i < b.size() ? b(i) : 0.0;
    worst = std::max(worst, std::abs(x - y));
  }
  return worst;
}

/// max |A_ij - s_j B_ij| where s_j = +-1 is chosen per column.
inline double max_diff_up_to_sign(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (Index j = 0; j < a.cols(); ++j) {
    const double plus = (a.col(j) - b.col(j)).cwiseAbs().maxCoeff();
    const double minus = (a.col(j) + b.col(j)).cwiseAbs().maxCoeff();
    worst = std::max(worst, std::min(plus, minus));
  }
  return worst;
}

// Operators sum_ab M_ab k_{z_a} (x) k_{z_b} over z = (x_1..x_n, cbar_1..cbar_n),
// written in an orthonormal basis of span{k_z}. With G = Q L Q^T, the map
// beta -> L^{1/2} Q^T beta is an isometry from coefficient vectors to that
// basis, so an operator with coefficient matrix M becomes R M R^T.
struct JointSpan {
  Matrix r;  // rank x 2n
  Index n = 0;

  JointSpan(const KernelConfig& cfg, const Points& x, const ReducedSet& rs) : n(x.rows()) {
    const Points q = quantized_dataset(rs);
    Points z(2 * n, x.cols());
    z.topRows(n) = x;
    z.bottomRows(n) = q;
    const EigenDecomposition g = sym_eig(gram(cfg, z));
    Index rank = 0;
    while (rank < g.eigenvalues.size() && g.eigenvalues(rank) > 1e-13 * g.eigenvalues(0)) ++rank;
    r = g.eigenvalues.head(rank).cwiseSqrt().asDiagonal() * g.eigenvectors.leftCols(rank).transpose();
  }

  // (1/n) sum k_{z_a} (x) k_{z_a} over the sample half or the quantized half.
  Matrix empirical_operator(bool quantized) const {
    Matrix m = Matrix::Zero(2 * n, 2 * n);
    for (Index i = 0; i < n; ++i) m(quantized ? n + i : i, quantized ? n + i : i) = 1.0 / static_cast<double>(n);
    return r * m * r.transpose();
  }
};

inline Matrix top_projection(const Matrix& op, Index d) {
  const EigenDecomposition e = sym_eig(0.5 * (op + op.transpose()));
  Index k = 0;
  while (k < d && e.eigenvalues(k) > 1e-12) ++k;
  return e.eigenvectors.leftCols(k) * e.eigenvectors.leftCols(k).transpose();
}

}  // namespace rskpca::testing
