#pragma once

// Spectral models and out-of-sample projection.
//
// Every model projects a point x as
//
//     f(x) = coefficients^T (basis_weights .* k(basis, x))
//
// so the variants differ only in what they keep as a basis:
//
//   Full, Subsampled   the training points, weights 1
//   ReducedSet         the m centers, weights sqrt(w_j); training data dropped
//   Nystrom, WNystrom  all n training points (extension), weights 1
//
// Gram matrices are normalized by the sample count, so eigenvalues estimate
// those of K/n regardless of variant. Coefficient column i is scaled by
// 1/sqrt(n lambda_i): the implied feature-space axis has unit RKHS norm and
// training projections satisfy sum_k f_i(x_k)^2 = n lambda_i.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "rskpca/error.hpp"
#include "rskpca/format.hpp"
#include "rskpca/kernels.hpp"
#include "rskpca/numerics.hpp"
#include "rskpca/reduced_set.hpp"
#include "rskpca/rsde.hpp"

namespace rskpca {

enum class Variant { Full, ReducedSet, Subsampled, Nystrom, WNystrom };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::ReducedSet: return "reduced";
    case Variant::Subsampled: return "subsampled";
    case Variant::Nystrom: return "nystrom";
    case Variant::WNystrom: return "wnystrom";
  }
  return "unknown";
}

inline Variant parse_variant(std::string_view s) {
  for (Variant v : {Variant::Full, Variant::ReducedSet, Variant::Subsampled, Variant::Nystrom,
                    Variant::WNystrom}) {
    if (to_string(v) == s) return v;
  }
  throw InputError("unknown model variant '" + std::string(s) + "'");
}

// Smallest eigenvalue (of the normalized Gram) accepted as nonzero.
inline constexpr double kRankTolerance = 1e-12;
// Diagonal ridge added to a numerically singular landmark Gram.
inline constexpr double kNystromRidge = 1e-10;

struct KpcaModel {
  Variant variant = Variant::Full;
  KernelConfig kernel = KernelConfig::gaussian(1.0);
  Points basis_points;
  Vector basis_weights;
  Vector eigenvalues;
  Matrix coefficients;  // basis_points.rows() x rank
  // Density weights the model was fit with (centers or landmarks); empty
  // for unweighted variants. Sums to `source_n` when present.
  std::vector<double> training_weights;
  Index source_n = 0;
  // Landmark Gram needed a ridge to stay positive definite.
  bool regularized = false;

  Index rank() const { return eigenvalues.size(); }
  Index basis_size() const { return basis_points.rows(); }
  Index dim() const { return basis_points.cols(); }
};

namespace detail {

inline void require_rank(Index r, Index limit, const char* who) {
  require(r >= 1 && r <= limit, std::string(who) + ": rank " + std::to_string(r) +
                                    " outside [1, " + std::to_string(limit) + "]");
}

inline void check_spectrum(const Vector& values, Index r, const char* who) {
  if (values(r - 1) < kRankTolerance) {
    throw RankDeficiencyError(std::string(who) + ": eigenvalue " + std::to_string(r) + " is " +
                              std::to_string(values(r - 1)) +
                              ", below the numerical rank threshold");
  }
}

// Scale the top-r eigenvectors of a normalized Gram into projection
// coefficients: column i / sqrt(count * lambda_i).
inline Matrix scaled_coefficients(const EigenDecomposition& eig, Index r, double count) {
  Matrix c = eig.eigenvectors.leftCols(r);
  for (Index i = 0; i < r; ++i) c.col(i) /= std::sqrt(count * eig.eigenvalues(i));
  return c;
}

}  // namespace detail

/// Full KPCA from a precomputed (unnormalized) Gram matrix of `x`.
inline KpcaModel fit_full_from_gram(const Points& x, const KernelConfig& cfg, const Matrix& k,
                                    Index r) {
  const Index n = x.rows();
  detail::require(k.rows() == n && k.cols() == n, "fit_full: Gram size does not match data");
  detail::require_rank(r, n, "fit_full");
  const auto count = static_cast<double>(n);
  const EigenDecomposition eig = sym_eig(k / count);
  detail::check_spectrum(eig.eigenvalues, r, "fit_full");

  KpcaModel model;
  model.variant = Variant::Full;
  model.kernel = cfg;
  model.basis_points = x;
  model.basis_weights = Vector::Ones(n);
  model.eigenvalues = eig.eigenvalues.head(r);
  model.coefficients = detail::scaled_coefficients(eig, r, count);
  model.source_n = n;
  return model;
}

inline KpcaModel fit_full(const Points& x, const KernelConfig& cfg, Index r) {
  detail::require(x.rows() >= 1, "fit_full: empty dataset");
  return fit_full_from_gram(x, cfg, gram(cfg, x), r);
}

/// Reduced-set KPCA from a precomputed weighted Gram W K^C W (unnormalized).
/// A point projects through (sqrt(w_j) k(c_j, x))_j against the eigenvectors
/// of W K^C W / n, which reproduces full KPCA exactly when every sample is
/// its own center with weight 1.
inline KpcaModel fit_reduced_from_gram(const ReducedSet& rs, const KernelConfig& cfg,
                                       const Matrix& weighted, Index r) {
  rs.validate();
  const Index m = rs.size();
  detail::require(weighted.rows() == m && weighted.cols() == m,
                  "fit_reduced: weighted Gram size does not match reduced set");
  detail::require_rank(r, m, "fit_reduced");
  const auto count = static_cast<double>(rs.source_n);
  const EigenDecomposition eig = sym_eig(weighted / count);
  detail::check_spectrum(eig.eigenvalues, r, "fit_reduced");

  KpcaModel model;
  model.variant = Variant::ReducedSet;
  model.kernel = cfg;
  model.basis_points = rs.centers;
  model.basis_weights.resize(m);
  for (Index j = 0; j < m; ++j) model.basis_weights(j) = std::sqrt(rs.weights[static_cast<std::size_t>(j)]);
  model.eigenvalues = eig.eigenvalues.head(r);
  model.coefficients = detail::scaled_coefficients(eig, r, count);
  model.training_weights = rs.weights;
  model.source_n = rs.source_n;
  return model;
}

inline KpcaModel fit_reduced(const ReducedSet& rs, const KernelConfig& cfg, Index r) {
  return fit_reduced_from_gram(rs, cfg, weighted_gram(cfg, rs), r);
}

/// Full KPCA on a uniform random subset of m samples.
inline KpcaModel fit_subsampled(const Points& x, const KernelConfig& cfg, Index m, Index r,
                                std::uint64_t seed) {
  detail::require_count(m, x.rows(), "fit_subsampled");
  detail::require_rank(r, m, "fit_subsampled");
  Rng rng(seed);
  const std::vector<Index> rows = sample_without_replacement(x.rows(), m, rng);
  Points sub(m, x.cols());
  for (Index j = 0; j < m; ++j) sub.row(j) = x.row(rows[static_cast<std::size_t>(j)]);
  KpcaModel model = fit_full(sub, cfg, r);
  model.variant = Variant::Subsampled;
  return model;
}

/// Precomputed pieces of a (possibly density-weighted) Nystrom fit: the
/// landmark Gram with weights folded in and the n x m cross-Gram.
struct NystromGrams {
  Matrix landmark;  // sqrt(w_i) k(c_i, c_j) sqrt(w_j), unnormalized
  Matrix cross;     // k(x_k, c_j)
  Vector root_weights;
};

inline NystromGrams nystrom_grams(const Points& x, const ReducedSet& landmarks,
                                  const KernelConfig& cfg) {
  NystromGrams g;
  g.landmark = weighted_gram(cfg, landmarks);
  g.cross = cross_gram(cfg, x, landmarks.centers);
  g.root_weights.resize(landmarks.size());
  for (Index j = 0; j < landmarks.size(); ++j) {
    g.root_weights(j) = std::sqrt(landmarks.weights[static_cast<std::size_t>(j)]);
  }
  return g;
}

/// Nystrom extension shared by both variants. Landmark weights w_j sum to n
/// (uniform landmarks use w_j = n/m, which is the standard Williams-Seeger
/// extension). With (lambda, u) from W K_mm W / n, the approximate unit
/// eigenvector of K/n over the data is
///     v = K_nm W u / (n lambda),
/// extended over all n samples as the projection basis.
inline KpcaModel fit_nystrom_from_grams(const Points& x, const KernelConfig& cfg,
                                        const NystromGrams& g, Index r, Variant variant,
                                        std::vector<double> landmark_weights) {
  const Index n = x.rows();
  const Index m = g.landmark.rows();
  detail::require_rank(r, m, "fit_nystrom");
  const auto count = static_cast<double>(n);

  Matrix normalized = g.landmark / count;
  EigenDecomposition eig = sym_eig(normalized);
  bool regularized = false;
  if (eig.eigenvalues(m - 1) < kNystromRidge) {
    normalized.diagonal().array() += kNystromRidge;
    eig = sym_eig(normalized);
    regularized = true;
  }
  detail::check_spectrum(eig.eigenvalues, r, "fit_nystrom");

  Matrix v = g.cross * (g.root_weights.asDiagonal() * eig.eigenvectors.leftCols(r));
  for (Index i = 0; i < r; ++i) v.col(i) /= count * eig.eigenvalues(i);

  KpcaModel model;
  model.variant = variant;
  model.kernel = cfg;
  model.basis_points = x;
  model.basis_weights = Vector::Ones(n);
  model.eigenvalues = eig.eigenvalues.head(r);
  model.coefficients = v;
  for (Index i = 0; i < r; ++i) model.coefficients.col(i) /= std::sqrt(count * eig.eigenvalues(i));
  model.training_weights = std::move(landmark_weights);
  model.source_n = n;
  model.regularized = regularized;
  return model;
}

/// Uniform landmarks with weight n/m each.
inline ReducedSet uniform_landmarks(const Points& x, Index m, std::uint64_t seed) {
  const Index n = x.rows();
  detail::require_count(m, n, "uniform_landmarks");
  Rng rng(seed);
  const std::vector<Index> rows = sample_without_replacement(n, m, rng);
  ReducedSet rs;
  rs.centers.resize(m, x.cols());
  for (Index j = 0; j < m; ++j) rs.centers.row(j) = x.row(rows[static_cast<std::size_t>(j)]);
  rs.weights.assign(static_cast<std::size_t>(m), static_cast<double>(n) / static_cast<double>(m));
  rs.source_n = n;
  return rs;
}

inline KpcaModel fit_nystrom(const Points& x, const KernelConfig& cfg, Index m, Index r,
                             std::uint64_t seed) {
  detail::require_rank(r, m, "fit_nystrom");
  const ReducedSet landmarks = uniform_landmarks(x, m, seed);
  KpcaModel model = fit_nystrom_from_grams(x, cfg, nystrom_grams(x, landmarks, cfg), r,
                                           Variant::Nystrom, {});
  return model;
}

/// Density-weighted Nystrom over k-means landmarks weighted by cluster size.
inline KpcaModel fit_wnystrom(const Points& x, const KernelConfig& cfg, Index m, Index r,
                              std::uint64_t seed) {
  detail::require_rank(r, m, "fit_wnystrom");
  const ReducedSet landmarks = kmeans_select(x, m, seed);
  detail::require_rank(r, landmarks.size(), "fit_wnystrom");
  return fit_nystrom_from_grams(x, cfg, nystrom_grams(x, landmarks, cfg), r, Variant::WNystrom,
                                landmarks.weights);
}

/// n_test x rank embedding.
inline Matrix project(const KpcaModel& model, const Points& x) {
  detail::require(model.rank() >= 1, "project: model is not fitted");
  detail::require(x.cols() == model.dim(), "project: dimension mismatch (" +
                                               std::to_string(x.cols()) + " vs " +
                                               std::to_string(model.dim()) + ")");
  if (x.rows() == 0) return Matrix(0, model.rank());
  const Matrix k = cross_gram(model.kernel, x, model.basis_points);
  return k * (model.basis_weights.asDiagonal() * model.coefficients);
}

// ---------------------------------------------------------------------------
// Serialization. Line-oriented text, doubles in shortest round-trip form:
//
//   rskpca-model 1
//   variant <full|reduced|subsampled|nystrom|wnystrom>
//   kernel <gaussian|laplacian> <sigma>
//   source_n <n>
//   regularized <0|1>
//   shape <basis_size> <dim> <rank>
//   eigenvalues <rank values>
//   training_weights <count> <values...>
//   basis
//   <weight> <dim coordinates> <rank coefficients>     (basis_size lines)

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline double parse_double(std::string_view token, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
    throw InputError(where + ": expected a number, got '" + std::string(token) + "'");
  }
  return v;
}

inline void expect_key(std::istream& in, const std::string& key) {
  std::string got;
  if (!(in >> got) || got != key) throw InputError("model file: expected '" + key + "'");
}

inline double read_double(std::istream& in, const std::string& what) {
  std::string token;
  if (!(in >> token)) throw InputError("model file: truncated at " + what);
  return parse_double(token, "model file " + what);
}

inline Index read_index(std::istream& in, const std::string& what) {
  long long v = 0;
  if (!(in >> v) || v < 0) throw InputError("model file: bad count for " + what);
  return static_cast<Index>(v);
}

}  // namespace detail

inline void save_model(const KpcaModel& model, std::ostream& out) {
  using detail::format_double;
  out << "rskpca-model " << kModelFormatVersion << '\n';
  out << "variant " << to_string(model.variant) << '\n';
  out << "kernel " << to_string(model.kernel.family()) << ' '
      << format_double(model.kernel.sigma()) << '\n';
  out << "source_n " << model.source_n << '\n';
  out << "regularized " << (model.regularized ? 1 : 0) << '\n';
  out << "shape " << model.basis_size() << ' ' << model.dim() << ' ' << model.rank() << '\n';
  out << "eigenvalues";
  for (Index i = 0; i < model.rank(); ++i) out << ' ' << format_double(model.eigenvalues(i));
  out << "\ntraining_weights " << model.training_weights.size();
  for (const double w : model.training_weights) out << ' ' << format_double(w);
  out << "\nbasis\n";
  for (Index b = 0; b < model.basis_size(); ++b) {
    out << format_double(model.basis_weights(b));
    for (Index j = 0; j < model.dim(); ++j) out << ' ' << format_double(model.basis_points(b, j));
    for (Index i = 0; i < model.rank(); ++i) out << ' ' << format_double(model.coefficients(b, i));
    out << '\n';
  }
}

inline KpcaModel load_model(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "rskpca-model") {
    throw InputError("model file: missing 'rskpca-model' header");
  }
  if (version != kModelFormatVersion) {
    throw InputError("model file: unsupported version " + std::to_string(version));
  }
  KpcaModel model;
  std::string token;
  detail::expect_key(in, "variant");
  in >> token;
  model.variant = parse_variant(token);
  detail::expect_key(in, "kernel");
  in >> token;
  const KernelFamily family = parse_kernel_family(token);
  model.kernel = KernelConfig(family, detail::read_double(in, "sigma"));
  detail::expect_key(in, "source_n");
  model.source_n = detail::read_index(in, "source_n");
  detail::expect_key(in, "regularized");
  model.regularized = detail::read_index(in, "regularized") != 0;
  detail::expect_key(in, "shape");
  const Index basis = detail::read_index(in, "basis size");
  const Index dim = detail::read_index(in, "dimension");
  const Index rank = detail::read_index(in, "rank");
  detail::expect_key(in, "eigenvalues");
  model.eigenvalues.resize(rank);
  for (Index i = 0; i < rank; ++i) model.eigenvalues(i) = detail::read_double(in, "eigenvalue");
  detail::expect_key(in, "training_weights");
  const Index nw = detail::read_index(in, "training weights");
  model.training_weights.resize(static_cast<std::size_t>(nw));
  for (auto& w : model.training_weights) w = detail::read_double(in, "training weight");
  detail::expect_key(in, "basis");
  model.basis_points.resize(basis, dim);
  model.basis_weights.resize(basis);
  model.coefficients.resize(basis, rank);
  for (Index b = 0; b < basis; ++b) {
    model.basis_weights(b) = detail::read_double(in, "basis weight");
    for (Index j = 0; j < dim; ++j) model.basis_points(b, j) = detail::read_double(in, "coordinate");
    for (Index i = 0; i < rank; ++i) model.coefficients(b, i) = detail::read_double(in, "coefficient");
  }
  return model;
}

}  // namespace rskpca
