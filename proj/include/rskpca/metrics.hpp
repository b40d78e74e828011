#pragma once

// Discrepancies between a sample and its shadow quantization, with the
// closed-form worst-case bounds they are checked against. All RKHS quantities
// are evaluated exactly through Gram expansions in the span of the mapped
// points.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "rskpca/error.hpp"
#include "rskpca/format.hpp"
#include "rskpca/kernels.hpp"
#include "rskpca/numerics.hpp"
#include "rskpca/reduced_set.hpp"

namespace rskpca {

enum class Theorem { MMD, Eigen, HS, Projection };

inline std::string_view to_string(Theorem t) {
  switch (t) {
    case Theorem::MMD: return "mmd";
    case Theorem::Eigen: return "eigen";
    case Theorem::HS: return "hs";
    case Theorem::Projection: return "projection";
  }
  return "unknown";
}

// Slack for floating-point noise when comparing an empirical value to its bound.
inline constexpr double kBoundSlack = 1e-10;
// Eigengaps at or below this are treated as degenerate.
inline constexpr double kGapTolerance = 1e-10;

struct BoundReport {
  Theorem theorem = Theorem::MMD;
  double empirical = 0.0;
  double bound = 0.0;
  double ell = 0.0;
  double sigma = 0.0;
  Index n = 0;
  Index m = 0;
  Index D = 0;  // eigenspace dimension; 0 when not applicable
  // False when the theorem's precondition fails; `satisfied` is then empty.
  bool precondition_met = true;
  std::optional<bool> satisfied;
  // Projection only: the bound with the measured max residual in place of
  // its worst case.
  double residual_bound = std::numeric_limits<double>::quiet_NaN();
};

inline std::string bound_csv_header() {
  return "theorem_id,ell,sigma,n,m,D,empirical,bound,satisfied";
}

namespace detail {

inline BoundReport make_report(Theorem t, const KernelConfig& cfg, const ReducedSet& rs,
                               double empirical, double bound) {
  BoundReport r;
  r.theorem = t;
  r.empirical = empirical;
  r.bound = bound;
  r.ell = *rs.shadow_ell;
  r.sigma = cfg.sigma();
  r.n = rs.source_n;
  r.m = rs.size();
  r.satisfied = empirical <= bound + kBoundSlack;
  return r;
}

inline void require_shadow_pair(const Points& x, const ReducedSet& rs, const char* who) {
  rs.validate();
  require(rs.assignment.has_value(), std::string(who) + ": reduced set has no assignment");
  require(rs.shadow_ell.has_value(), std::string(who) + ": bounds apply to shadow reductions only");
  require(rs.source_n == x.rows(), std::string(who) + ": reduced set was not built from this sample");
  require(rs.dim() == x.cols(), std::string(who) + ": dimension mismatch");
}

}  // namespace detail

inline std::string to_csv_row(const BoundReport& r) {
  const auto csv_number = detail::format_double;
  std::string satisfied = "na";
  if (r.satisfied) satisfied = *r.satisfied ? "true" : "false";
  return std::string(to_string(r.theorem)) + ',' + csv_number(r.ell) + ',' + csv_number(r.sigma) +
         ',' + std::to_string(r.n) + ',' + std::to_string(r.m) + ',' + std::to_string(r.D) + ',' +
         csv_number(r.empirical) + ',' + csv_number(r.bound) + ',' + satisfied;
}

/// Biased MMD between two equal-size samples; the squared value is clamped
/// at zero before the square root.
inline double mmd_biased(const KernelConfig& cfg, const Points& x, const Points& y) {
  detail::require(x.rows() == y.rows(), "mmd_biased: samples must have equal cardinality");
  detail::require(x.rows() >= 1, "mmd_biased: empty sample");
  detail::require(x.cols() == y.cols(), "mmd_biased: dimension mismatch");
  const Index n = x.rows();
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      sxx += eval(cfg, x.row(i), x.row(j));
      syy += eval(cfg, y.row(i), y.row(j));
      sxy += eval(cfg, x.row(i), y.row(j));
    }
  }
  const double nn = static_cast<double>(n) * static_cast<double>(n);
  return std::sqrt(std::max(0.0, (sxx + syy - 2.0 * sxy) / nn));
}

/// (c_{alpha(1)}, ..., c_{alpha(n)}).
inline Points quantized_dataset(const ReducedSet& rs) {
  detail::require(rs.assignment.has_value(), "quantized_dataset: reduced set has no assignment");
  const auto& a = *rs.assignment;
  Points out(static_cast<Index>(a.size()), rs.dim());
  for (std::size_t i = 0; i < a.size(); ++i) out.row(static_cast<Index>(i)) = rs.centers.row(a[i]);
  return out;
}

/// sqrt(2 (kappa - phi(1/ell^p))).
inline double bound_mmd(const KernelConfig& cfg, double ell) {
  detail::require(std::isfinite(ell) && ell > 0.0, "bound_mmd: ell must be positive");
  return std::sqrt(2.0 * (cfg.kappa() - shadow_boundary_profile(cfg, ell)));
}

/// 2 C (sigma/ell)^2.
inline double bound_eigen(const KernelConfig& cfg, double ell) {
  const double eps = shadow_radius(cfg, ell);
  return 2.0 * cfg.profile_constant() * eps * eps;
}

/// 2 kappa sqrt(2 (kappa - phi(1/ell^p))).
inline double bound_hs(const KernelConfig& cfg, double ell) {
  return 2.0 * cfg.kappa() * bound_mmd(cfg, ell);
}

inline BoundReport mmd_report(const KernelConfig& cfg, const Points& x, const ReducedSet& rs) {
  detail::require_shadow_pair(x, rs, "mmd_report");
  const double empirical = mmd_biased(cfg, x, quantized_dataset(rs));
  return detail::make_report(Theorem::MMD, cfg, rs, empirical, bound_mmd(cfg, *rs.shadow_ell));
}

/// Sum of squared differences between the sorted spectra of K/n and the
/// quantized Gram / n. The quantized spectrum is taken from the m x m
/// weighted surrogate padded with zeros; the two share their nonzero
/// eigenvalues.
inline BoundReport eigen_deviation(const KernelConfig& cfg, const Points& x, const ReducedSet& rs) {
  detail::require_shadow_pair(x, rs, "eigen_deviation");
  const Index n = x.rows();
  const auto count = static_cast<double>(n);
  const Vector full = sym_eig(gram(cfg, x) / count).eigenvalues;
  const Vector reduced = sym_eig(weighted_gram(cfg, rs) / count).eigenvalues;
  double s = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double q = i < reduced.size() ? reduced(i) : 0.0;
    s += (full(i) - q) * (full(i) - q);
  }
  return detail::make_report(Theorem::Eigen, cfg, rs, s, bound_eigen(cfg, *rs.shadow_ell));
}

/// Hilbert-Schmidt distance between the empirical operators
/// (1/n) sum <., k_{x_i}> k_{x_i} built on the sample and on its
/// quantization:
///   sqrt((1/n^2) [sum k(x_i,x_j)^2 + sum k(c_i,c_j)^2 - 2 sum k(x_i,c_j)^2]).
inline double hs_distance_value(const KernelConfig& cfg, const Points& x, const ReducedSet& rs) {
  const Index n = x.rows();
  const auto& a = *rs.assignment;
  const Matrix kc = gram(cfg, rs.centers);
  const Matrix kxc = cross_gram(cfg, x, rs.centers);
  double sxx = 0.0, scc = 0.0, sxc = 0.0;
  for (Index j = 0; j < n; ++j) {
    const Index aj = a[static_cast<std::size_t>(j)];
    for (Index i = 0; i < n; ++i) {
      const double kxx = eval(cfg, x.row(i), x.row(j));
      const double kqq = kc(a[static_cast<std::size_t>(i)], aj);
      const double kxq = kxc(i, aj);
      sxx += kxx * kxx;
      scc += kqq * kqq;
      sxc += kxq * kxq;
    }
  }
  const double nn = static_cast<double>(n) * static_cast<double>(n);
  return std::sqrt(std::max(0.0, (sxx + scc - 2.0 * sxc) / nn));
}

inline BoundReport hs_distance(const KernelConfig& cfg, const Points& x, const ReducedSet& rs) {
  detail::require_shadow_pair(x, rs, "hs_distance");
  return detail::make_report(Theorem::HS, cfg, rs, hs_distance_value(cfg, x, rs),
                             bound_hs(cfg, *rs.shadow_ell));
}

/// max_i ||k_{x_i} - k_{c_alpha(i)}||_H = max_i sqrt(2 (kappa - k(x_i, c_alpha(i)))).
inline double max_residual(const KernelConfig& cfg, const Points& x, const ReducedSet& rs) {
  const auto& a = *rs.assignment;
  double worst = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    const double k = eval(cfg, x.row(i), rs.centers.row(a[static_cast<std::size_t>(i)]));
    worst = std::max(worst, std::sqrt(std::max(0.0, 2.0 * (cfg.kappa() - k))));
  }
  return worst;
}

/// HS distance between the projections onto the top-D eigenspaces of the
/// sample operator and of the quantized operator.
///
/// The bound is asserted only when 2 sqrt(kappa) ||eps'|| < delta_D / 2 with
/// delta_D = (lambda_D - lambda_{D+1}) / 2; otherwise the report carries
/// precondition_met = false and no verdict. Throws DegenerateGapError when
/// lambda_D and lambda_{D+1} coincide.
inline BoundReport projection_distance(const KernelConfig& cfg, const Points& x,
                                       const ReducedSet& rs, Index D) {
  detail::require_shadow_pair(x, rs, "projection_distance");
  const Index n = x.rows();
  detail::require(D >= 1 && D <= n, "projection_distance: D outside [1, n]");
  const auto count = static_cast<double>(n);

  const EigenDecomposition full = sym_eig(gram(cfg, x) / count);
  const double lambda_d = full.eigenvalues(D - 1);
  const double lambda_next = D < n ? full.eigenvalues(D) : 0.0;
  detail::require(lambda_d > 0.0, "projection_distance: lambda_D is not positive");
  if (lambda_d - lambda_next <= kGapTolerance) {
    throw DegenerateGapError("projection_distance: lambda_" + std::to_string(D) +
                             " and lambda_" + std::to_string(D + 1) + " coincide");
  }
  const double delta = 0.5 * (lambda_d - lambda_next);

  // Unit eigenfunctions: e_i = sum_k V_ki k_{x_k} / sqrt(n lambda_i) and
  // ebar_j = sum_c sqrt(w_c) U_cj k_{c} / sqrt(n lambdabar_j).
  const EigenDecomposition quant = sym_eig(weighted_gram(cfg, rs) / count);
  Index dq = 0;
  while (dq < std::min(D, quant.eigenvalues.size()) && quant.eigenvalues(dq) > kRankTolerance) ++dq;

  double overlap = 0.0;
  if (dq > 0) {
    Vector root(rs.size());
    for (Index c = 0; c < rs.size(); ++c) root(c) = std::sqrt(rs.weights[static_cast<std::size_t>(c)]);
    Matrix left = full.eigenvectors.leftCols(D);
    for (Index i = 0; i < D; ++i) left.col(i) /= std::sqrt(count * full.eigenvalues(i));
    Matrix right = root.asDiagonal() * quant.eigenvectors.leftCols(dq);
    for (Index j = 0; j < dq; ++j) right.col(j) /= std::sqrt(count * quant.eigenvalues(j));
    const Matrix inner = left.transpose() * cross_gram(cfg, x, rs.centers) * right;
    overlap = inner.squaredNorm();
  }
  const double empirical =
      std::sqrt(std::max(0.0, static_cast<double>(D + dq) - 2.0 * overlap));

  const double kappa = cfg.kappa();
  const double eps_prime = max_residual(cfg, x, rs);
  const double bound =
      2.0 * std::sqrt(2.0 * kappa * (kappa - shadow_boundary_profile(cfg, *rs.shadow_ell))) / delta;

  BoundReport r = detail::make_report(Theorem::Projection, cfg, rs, empirical, bound);
  r.D = D;
  r.residual_bound = 2.0 * std::sqrt(kappa) * eps_prime / delta;
  r.precondition_met = 2.0 * std::sqrt(kappa) * eps_prime < delta / 2.0;
  if (!r.precondition_met) r.satisfied.reset();
  return r;
}

struct Alignment {
  Matrix transform;  // r x r
  double error = 0.0;
  bool rank_deficient = false;
};

/// Least-squares A minimizing ||O - Otilde A||_F (unconstrained, not
/// Procrustes) and the residual norm.
inline Alignment align_embeddings(const Matrix& reference, const Matrix& approx) {
  detail::require(reference.rows() == approx.rows(), "align_embeddings: row counts differ");
  detail::require(reference.cols() == approx.cols(), "align_embeddings: column counts differ");
  const LeastSquaresResult ls = lstsq(approx, reference);
  Alignment out;
  out.transform = ls.solution;
  out.error = (reference - approx * ls.solution).norm();
  out.rank_deficient = ls.rank_deficient;
  return out;
}

}  // namespace rskpca
