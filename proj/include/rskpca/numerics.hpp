#pragma once

// Dense linear-algebra substrate shared by every other module.
//
// Matrices are Eigen types. The symmetric eigensolver delegates to LAPACK's
// divide-and-conquer driver (dsyevd), which is deterministic for a fixed
// input: no randomized starts, no data-dependent pivoting beyond what the
// Householder tridiagonalization fixes. LAPACK owns the iteration cap and
// the deflation tolerance; a nonzero `info` is surfaced as ConvergenceError.
//
// Every LAPACK result is checked against the input with a fixed random probe
// evaluated in Eigen, which does not go through the system BLAS. Some
// OpenBLAS builds pick a faulty GEMM kernel on CPUs they misdetect, which
// corrupts eigenvectors while the eigenvalues still look right. A failed
// check falls back to Eigen's own tridiagonal QR solver.

#include <lapacke.h>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "rskpca/error.hpp"

namespace rskpca {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
// One point per row.
using Points = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Full spectrum of a symmetric matrix, eigenvalues descending. Column i of
/// `eigenvectors` pairs with eigenvalues(i); each column's largest-magnitude
/// entry is positive.
struct EigenDecomposition {
  Vector eigenvalues;
  Matrix eigenvectors;
};

inline constexpr double kSymmetryTolerance = 1e-10;
// Relative backward error above which a LAPACK decomposition is rejected.
inline constexpr double kEigenCheckTolerance = 1e-9;

namespace detail {

inline bool all_finite(const Eigen::Ref<const Matrix>& a) { return a.allFinite(); }

// Flip each column so its largest-magnitude entry (first one on ties) is
// positive.
inline void canonicalize_signs(Matrix& vectors) {
  for (Index j = 0; j < vectors.cols(); ++j) {
    Index arg = 0;
    double best = -1.0;
    for (Index i = 0; i < vectors.rows(); ++i) {
      const double mag = std::abs(vectors(i, j));
      if (mag > best) {
        best = mag;
        arg = i;
      }
    }
    if (vectors(arg, j) < 0.0) vectors.col(j) *= -1.0;
  }
}

// Freivalds-style check of A V = V diag(values) and V^T V = I against one
// fixed Gaussian probe z. O(n^2), and a wrong decomposition passes only on a
// measure-zero set of probes.
inline bool decomposition_holds(const Matrix& a, const Vector& values, const Matrix& vectors) {
  const Index n = a.rows();
  std::mt19937_64 rng(0x5eedf00dULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(n);
  for (Index i = 0; i < n; ++i) z(i) = normal(rng);
  const Vector vz = vectors.lazyProduct(z);
  const double scale = std::max(a.norm(), 1e-300) * z.norm();
  const double residual = (a.lazyProduct(vz) - vectors.lazyProduct(values.cwiseProduct(z))).norm();
  const double orthogonality = (vectors.transpose().lazyProduct(vz) - z).norm() / z.norm();
  return std::isfinite(residual) && residual <= kEigenCheckTolerance * scale &&
         orthogonality <= kEigenCheckTolerance * static_cast<double>(std::max<Index>(n, 1));
}

}  // namespace detail

inline EigenDecomposition sym_eig(const Matrix& a) {
  detail::require(a.rows() == a.cols(), "sym_eig: matrix is " + std::to_string(a.rows()) + "x" +
                                            std::to_string(a.cols()) + ", expected square");
  detail::require(a.rows() > 0, "sym_eig: empty matrix");
  detail::require(detail::all_finite(a), "sym_eig: non-finite entry");

  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  detail::require(asym <= kSymmetryTolerance * scale, "sym_eig: matrix is not symmetric");

  const auto n = static_cast<lapack_int>(a.rows());
  Matrix work = a;
  Vector values(n);
  const lapack_int info =
      LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, work.data(), n, values.data());
  if (info < 0) throw Error("sym_eig: invalid argument " + std::to_string(-info) + " to dsyevd");

  EigenDecomposition out;
  if (info == 0 && detail::decomposition_holds(a, values, work)) {
    out.eigenvalues = values.reverse();
    out.eigenvectors = work.rowwise().reverse();
  } else {
    const Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
    if (solver.info() != Eigen::Success) throw ConvergenceError("sym_eig: eigensolver failed to converge");
    out.eigenvalues = solver.eigenvalues().reverse();
    out.eigenvectors = solver.eigenvectors().rowwise().reverse();
  }
  detail::canonicalize_signs(out.eigenvectors);
  return out;
}

struct LeastSquaresResult {
  Matrix solution;
  Index rank = 0;
  // Set when B lacks full column rank; `solution` is then the minimum-norm
  // minimizer.
  bool rank_deficient = false;
};

/// argmin_A ||Y - B A||_F.
inline LeastSquaresResult lstsq(const Matrix& b, const Matrix& y) {
  detail::require(b.rows() >= b.cols(), "lstsq: B has fewer rows than columns");
  detail::require(b.rows() == y.rows(), "lstsq: B and Y row counts differ");
  detail::require(detail::all_finite(b) && detail::all_finite(y), "lstsq: non-finite entry");

  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(b);
  LeastSquaresResult out;
  out.solution = cod.solve(y);
  out.rank = cod.rank();
  out.rank_deficient = out.rank < b.cols();
  return out;
}

// ---------------------------------------------------------------------------
// Pseudo-random sources. Every stochastic routine takes an explicit seed and
// builds its own engine, so results depend on (input, seed) only.

using Rng = std::mt19937_64;

/// splitmix64 finalizer; mixes a base seed with a stream id so repetitions
/// and folds get decorrelated engines.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Uniform in [0, bound).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
  return std::uniform_int_distribution<std::uint64_t>(0, bound - 1)(rng);
}

/// First `m` entries of a seeded Fisher-Yates shuffle of 0..n-1.
inline std::vector<Index> sample_without_replacement(Index n, Index m, Rng& rng) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index i = 0; i < m; ++i) {
    const auto j = i + static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(m));
  return idx;
}

inline void shuffle(std::vector<Index>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace rskpca
