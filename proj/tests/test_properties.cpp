// Cross-module invariants on randomized corpora. Each check compares two
// routes to the same quantity that share as little code as possible.

#include <gtest/gtest.h>

#include <Eigen/QR>
#include <random>

#include "support.hpp"

namespace rskpca {
namespace {

using testing::max_diff_up_to_sign;
using testing::random_points;

struct Instance {
  Points x;
  KernelConfig cfg;
  double ell;
};

// Random dataset with clumps, so shadow selection actually merges points.
Instance draw(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> n_dist(8, 60), d_dist(1, 6), fam(0, 1);
  std::uniform_real_distribution<double> ell_dist(1.0, 8.0), sigma_dist(0.5, 2.0);
  const Index n = n_dist(rng);
  const Index d = d_dist(rng);
  const Index clumps = std::max<Index>(2, n / 4);
  const Points centers = random_points(clumps, d, seed ^ 0x5eed, 2.0);
  const Points jitter = random_points(n, d, seed ^ 0x7177, 0.2);
  Points x(n, d);
  for (Index i = 0; i < n; ++i) x.row(i) = centers.row(i % clumps) + jitter.row(i);
  const KernelConfig cfg(fam(rng) ? KernelFamily::Laplacian : KernelFamily::Gaussian, sigma_dist(rng));
  return {x, cfg, ell_dist(rng)};
}

double scale_of(const Matrix& m) { return std::max(1.0, m.cwiseAbs().maxCoeff()); }

// Relative gap between consecutive retained eigenvalues; tiny gaps make
// individual eigenvectors ill-defined, so such instances only check spectra.
bool well_separated(const Vector& values, Index r) {
  for (Index i = 0; i < r; ++i) {
    const double next = i + 1 < values.size() ? values(i + 1) : 0.0;
    if (values(i) - next < 1e-6 * values(0)) return false;
  }
  return true;
}

// (1/n^2) [sum k(x,x')^2 + sum k(y,y')^2 - 2 sum k(x,y)^2] from plain Grams.
double hs_between(const KernelConfig& cfg, const Points& x, const Points& y) {
  const double nn = static_cast<double>(x.rows()) * static_cast<double>(y.rows());
  const double v = (gram(cfg, x).array().square().sum() + gram(cfg, y).array().square().sum() -
                    2.0 * cross_gram(cfg, x, y).array().square().sum()) /
                   nn;
  return std::sqrt(std::max(0.0, v));
}

TEST(ReducedKpcaProperty, EqualsFullKpcaOnTheQuantizedSample) {
  int compared_vectors = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const Instance in = draw(seed);
    const ReducedSet rs = seed % 2 ? shadow_select(in.x, in.cfg, in.ell)
                                   : kmeans_select(in.x, std::max<Index>(2, in.x.rows() / 3), seed);
    const Index r = std::min<Index>(3, rs.size());
    const Points xbar = quantized_dataset(rs);
    const Vector quantized_spectrum = sym_eig(gram(in.cfg, xbar) / static_cast<double>(xbar.rows())).eigenvalues;
    if (quantized_spectrum(r - 1) < 1e-8 * quantized_spectrum(0)) continue;

    const KpcaModel reduced = fit_reduced(rs, in.cfg, r);
    const KpcaModel full = fit_full(xbar, in.cfg, r);
    EXPECT_LT((reduced.eigenvalues - full.eigenvalues).cwiseAbs().maxCoeff(), 1e-10) << "seed " << seed;

    if (!well_separated(quantized_spectrum, r)) continue;
    const Points probes = random_points(10, in.x.cols(), seed + 1000, 2.0);
    const Matrix a = project(reduced, probes);
    const Matrix b = project(full, probes);
    EXPECT_LT(max_diff_up_to_sign(a, b), 1e-8 * scale_of(b)) << "seed " << seed;
    ++compared_vectors;
  }
  EXPECT_GT(compared_vectors, 30);
}

TEST(MetricsProperty, MmdMatchesWeightedExpansion) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Instance in = draw(seed);
    const ReducedSet rs = shadow_select(in.x, in.cfg, in.ell);
    const auto n = static_cast<double>(in.x.rows());
    const Eigen::Map<const Vector> w(rs.weights.data(), rs.size());
    const double sq = gram(in.cfg, in.x).sum() / (n * n) -
                      2.0 * (cross_gram(in.cfg, in.x, rs.centers) * w).sum() / (n * n) +
                      w.dot(gram(in.cfg, rs.centers) * w) / (n * n);
    const double expected = std::sqrt(std::max(0.0, sq));
    EXPECT_NEAR(mmd_report(in.cfg, in.x, rs).empirical, expected, 1e-7) << "seed " << seed;
  }
}

TEST(MetricsProperty, EigenDeviationMatchesExplicitQuantizedSpectrum) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Instance in = draw(seed);
    const ReducedSet rs = shadow_select(in.x, in.cfg, in.ell);
    const auto n = static_cast<double>(in.x.rows());
    const Vector a = sym_eig(gram(in.cfg, in.x) / n).eigenvalues;
    const Vector b = sym_eig(testing::quantized_gram(in.cfg, rs) / n).eigenvalues;
    EXPECT_NEAR(eigen_deviation(in.cfg, in.x, rs).empirical, (a - b).squaredNorm(), 1e-10) << "seed " << seed;
  }
}

TEST(MetricsProperty, HsDistanceIsSymmetricAndNonnegative) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Instance in = draw(seed);
    const ReducedSet rs = shadow_select(in.x, in.cfg, in.ell);
    const Points xbar = quantized_dataset(rs);
    const double value = hs_distance(in.cfg, in.x, rs).empirical;
    EXPECT_GE(value, 0.0);
    EXPECT_NEAR(value, hs_between(in.cfg, in.x, xbar), 1e-7) << "seed " << seed;
    EXPECT_NEAR(hs_between(in.cfg, xbar, in.x), hs_between(in.cfg, in.x, xbar), 1e-12);
  }
}

TEST(InvarianceProperty, JointRescalingOfDataAndBandwidth) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Instance in = draw(seed);
    const double s = 0.25 + static_cast<double>(seed % 5);
    const KernelConfig scaled(in.cfg.family(), in.cfg.sigma() * s);
    const ReducedSet a = shadow_select(in.x, in.cfg, in.ell);
    const ReducedSet b = shadow_select(in.x * s, scaled, in.ell);
    ASSERT_EQ(*a.assignment, *b.assignment) << "seed " << seed;
    const Index r = std::min<Index>(2, a.size());
    const KpcaModel ma = fit_reduced(a, in.cfg, r);
    const KpcaModel mb = fit_reduced(b, scaled, r);
    EXPECT_LT((ma.eigenvalues - mb.eigenvalues).cwiseAbs().maxCoeff(), 1e-10);
    const Points probes = random_points(5, in.x.cols(), seed + 77);
    const Matrix pa = project(ma, probes);
    EXPECT_LT(max_diff_up_to_sign(pa, project(mb, probes * s)), 1e-7 * scale_of(pa));
    EXPECT_NEAR(mmd_report(in.cfg, in.x, a).empirical, mmd_report(scaled, in.x * s, b).empirical, 1e-9);
  }
}

TEST(InvarianceProperty, RigidMotionPreservesSpectraAndBounds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Instance in = draw(seed);
    const Index d = in.x.cols();
    const Matrix q = Eigen::HouseholderQR<Matrix>(Matrix(random_points(d, d, seed + 5))).householderQ();
    const Eigen::RowVectorXd shift = random_points(1, d, seed + 6, 3.0).row(0);
    const Points moved = (in.x * q).rowwise() + shift;

    const ReducedSet a = shadow_select(in.x, in.cfg, in.ell);
    const ReducedSet b = shadow_select(moved, in.cfg, in.ell);
    ASSERT_EQ(*a.assignment, *b.assignment) << "seed " << seed;
    const Index r = std::min<Index>(3, a.size());
    EXPECT_LT((fit_reduced(a, in.cfg, r).eigenvalues - fit_reduced(b, in.cfg, r).eigenvalues).cwiseAbs().maxCoeff(),
              1e-10);
    EXPECT_NEAR(eigen_deviation(in.cfg, in.x, a).empirical, eigen_deviation(in.cfg, moved, b).empirical, 1e-10);
    EXPECT_NEAR(hs_distance(in.cfg, in.x, a).empirical, hs_distance(in.cfg, moved, b).empirical, 1e-8);
  }
}

TEST(SelectorProperty, DensityWeightsCountAssignedSamples) {
  // Shadow and k-means weights are the sizes of their cells, which is what
  // makes the weighted surrogate similar to the quantized Gram. Herding and
  // paring use uniform weights and have no such identity.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Instance in = draw(seed);
    const Index m = std::max<Index>(2, in.x.rows() / 4);
    for (const ReducedSet& rs : {shadow_select(in.x, in.cfg, in.ell), kmeans_select(in.x, m, seed)}) {
      std::vector<double> counts(static_cast<std::size_t>(rs.size()), 0.0);
      for (const Index c : *rs.assignment) counts[static_cast<std::size_t>(c)] += 1.0;
      for (Index j = 0; j < rs.size(); ++j) {
        if (counts[static_cast<std::size_t>(j)] == 0.0) continue;
        EXPECT_EQ(rs.weights[static_cast<std::size_t>(j)], counts[static_cast<std::size_t>(j)]);
      }
      const Vector lhs = sym_eig(weighted_gram(in.cfg, rs) / static_cast<double>(in.x.rows())).eigenvalues;
      const Vector rhs =
          sym_eig(testing::quantized_gram(in.cfg, rs) / static_cast<double>(in.x.rows())).eigenvalues;
      EXPECT_LT(testing::padded_max_diff(lhs, rhs), 1e-8 * rhs(0)) << "seed " << seed;
    }
  }
}

}  // namespace
}  // namespace rskpca
