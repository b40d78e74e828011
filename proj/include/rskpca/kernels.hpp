#pragma once

// Radially symmetric kernels k(x, y) = phi(s) with phi(s) = exp(-s):
//
//   Gaussian   s = ||x - y||^2 / (2 sigma^2)   p = 2, C = 1 / (2 sigma^2)
//   Laplacian  s = ||x - y|| / sigma           p = 1, C = 1 / sigma^2
//
// Both peak at kappa = k(x, x) = 1. `profile_constant` is the constant C that
// the eigenvalue and operator bounds are stated with.

#include <cmath>
#include <string>
#include <string_view>

#include "rskpca/error.hpp"
#include "rskpca/numerics.hpp"
#include "rskpca/reduced_set.hpp"

namespace rskpca {

enum class KernelFamily { Gaussian, Laplacian };

inline std::string_view to_string(KernelFamily f) {
  return f == KernelFamily::Gaussian ? "gaussian" : "laplacian";
}

inline KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "gaussian" || name == "rbf") return KernelFamily::Gaussian;
  if (name == "laplacian") return KernelFamily::Laplacian;
  throw InputError("unknown kernel family '" + std::string(name) + "'");
}

class KernelConfig {
 public:
  KernelConfig(KernelFamily family, double sigma) : family_(family), sigma_(sigma) {
    detail::require(std::isfinite(sigma) && sigma > 0.0, "kernel bandwidth must be positive");
  }

  static KernelConfig gaussian(double sigma) { return {KernelFamily::Gaussian, sigma}; }
  static KernelConfig laplacian(double sigma) { return {KernelFamily::Laplacian, sigma}; }

  KernelFamily family() const { return family_; }
  double sigma() const { return sigma_; }
  double profile_exponent() const { return family_ == KernelFamily::Gaussian ? 2.0 : 1.0; }
  double kappa() const { return 1.0; }
  double profile_constant() const {
    return family_ == KernelFamily::Gaussian ? 1.0 / (2.0 * sigma_ * sigma_)
                                             : 1.0 / (sigma_ * sigma_);
  }

  /// Kernel value from a squared Euclidean distance.
  double from_squared_distance(double d2) const {
    if (family_ == KernelFamily::Gaussian) return std::exp(-d2 / (2.0 * sigma_ * sigma_));
    return std::exp(-std::sqrt(d2) / sigma_);
  }

  bool operator==(const KernelConfig&) const = default;

 private:
  KernelFamily family_;
  double sigma_;
};

inline double profile(double s) { return std::exp(-s); }

/// phi(1 / ell^p) = exp(-1 / ell^p), the floor the bounds use for kernel
/// values inside a shadow. Exact at the radius for the Laplacian; for the
/// Gaussian the kernel there is exp(-1 / (2 ell^2)), higher than this floor.
inline double shadow_boundary_profile(const KernelConfig& cfg, double ell) {
  return profile(1.0 / std::pow(ell, cfg.profile_exponent()));
}

template <class A, class B>
double eval(const KernelConfig& cfg, const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) {
  detail::require(x.size() == y.size(), "kernel eval: dimension mismatch (" +
                                            std::to_string(x.size()) + " vs " +
                                            std::to_string(y.size()) + ")");
  double d2 = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double diff = x(i) - y(i);
    d2 += diff * diff;
  }
  return cfg.from_squared_distance(d2);
}

inline Matrix gram(const KernelConfig& cfg, const Points& x) {
  detail::require(x.rows() > 0, "gram: empty point set");
  const Index n = x.rows();
  Matrix k(n, n);
  for (Index j = 0; j < n; ++j) {
    k(j, j) = eval(cfg, x.row(j), x.row(j));
    for (Index i = j + 1; i < n; ++i) {
      const double v = eval(cfg, x.row(i), x.row(j));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

/// n x m matrix of k(x_i, c_j).
inline Matrix cross_gram(const KernelConfig& cfg, const Points& x, const Points& c) {
  detail::require(x.rows() > 0 && c.rows() > 0, "cross_gram: empty point set");
  detail::require(x.cols() == c.cols(), "cross_gram: dimension mismatch");
  Matrix k(x.rows(), c.rows());
  for (Index j = 0; j < c.rows(); ++j) {
    for (Index i = 0; i < x.rows(); ++i) k(i, j) = eval(cfg, x.row(i), c.row(j));
  }
  return k;
}

/// Density-weighted surrogate W K^C W with W = diag(sqrt(w)). Unnormalized:
/// the diagonal is w_i * kappa.
inline Matrix weighted_gram(const KernelConfig& cfg, const ReducedSet& rs) {
  rs.validate();
  Matrix k = gram(cfg, rs.centers);
  Vector root(rs.size());
  for (Index i = 0; i < rs.size(); ++i) root(i) = std::sqrt(rs.weights[static_cast<std::size_t>(i)]);
  return root.asDiagonal() * k * root.asDiagonal();
}

/// Shadow radius epsilon = sigma / ell.
inline double shadow_radius(const KernelConfig& cfg, double ell) {
  detail::require(std::isfinite(ell) && ell > 0.0, "shadow parameter ell must be positive");
  return cfg.sigma() / ell;
}

}  // namespace rskpca
