#pragma once

// Sieve design matrices and the orthogonal projectors built from them.
//
// Each covariate coordinate x_l is expanded into J basis functions and the
// blocks are concatenated, so a d-dimensional covariate yields J*d columns
// (plus one for the intercept when enabled).

#include <algorithm>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "sidemat/types.hpp"

namespace sidemat {

enum class BasisFamily { polynomial };

struct SieveSpec {
  BasisFamily family = BasisFamily::polynomial;
  int degree = 5;  // J: basis functions per covariate coordinate
  bool include_intercept = true;
  // Center and scale each covariate column before expansion. Leaves the
  // column space unchanged when the intercept is present.
  bool standardize = false;

  Index width(Index dims) const {
    return static_cast<Index>(degree) * dims + (include_intercept ? 1 : 0);
  }

  void validate() const {
    if (degree < 1) throw DomainError("sieve degree J must be >= 1");
  }
};

struct DesignMatrix {
  Matrix values;  // n x q
  Index source_rows = 0;
  Index source_dims = 0;
  int degree = 0;
  bool intercept = false;

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
};

struct Projector {
  Matrix values;  // n x n
  Index rank = 0;

  Index size() const { return values.rows(); }

  /// I - P
  Matrix complement() const {
    return Matrix::Identity(size(), size()) - values;
  }
};

struct GramExtremes {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

/// phi(x): for each coordinate l the monomials x_l, x_l^2, ..., x_l^J in
/// order, with a leading 1 when the intercept is enabled.
inline Vector eval_basis(std::span<const double> x, const SieveSpec& spec) {
  spec.validate();
  const Index d = static_cast<Index>(x.size());
  Vector out(spec.width(d));
  Index k = 0;
  if (spec.include_intercept) out(k++) = 1.0;
  for (double v : x) {
    if (!std::isfinite(v)) throw DomainError("eval_basis: non-finite covariate");
    double power = 1.0;
    for (int j = 0; j < spec.degree; ++j) {
      power *= v;
      out(k++) = power;
    }
  }
  return out;
}

inline Vector eval_basis(const Vector& x, const SieveSpec& spec) {
  return eval_basis(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), spec);
}

/// Row-wise basis expansion without the width check. build_design is the
/// entry point for estimation; this is exposed for inspection and tests.
inline DesignMatrix expand_covariates(const Matrix& covariates, const SieveSpec& spec) {
  spec.validate();
  require_finite(covariates, "covariate matrix");
  const Index n = covariates.rows();
  const Index d = covariates.cols();
  const Index q = spec.width(d);

  Matrix c = covariates;
  if (spec.standardize) {
    for (Index l = 0; l < d; ++l) {
      const double mean = c.col(l).mean();
      c.col(l).array() -= mean;
      const double sd = std::sqrt(c.col(l).squaredNorm() / static_cast<double>(n));
      if (sd > 0.0) c.col(l) /= sd;
    }
  }

  DesignMatrix design{Matrix(n, q), n, d, spec.degree, spec.include_intercept};
  std::vector<double> row(static_cast<std::size_t>(d));
  for (Index i = 0; i < n; ++i) {
    for (Index l = 0; l < d; ++l) row[static_cast<std::size_t>(l)] = c(i, l);
    design.values.row(i) = eval_basis(row, spec).transpose();
  }
  return design;
}

/// Design matrix Phi(C) with one row per observation. Requires more rows than
/// basis columns, otherwise the projector would be the identity.
inline DesignMatrix build_design(const Matrix& covariates, const SieveSpec& spec) {
  spec.validate();
  const Index n = covariates.rows();
  const Index q = spec.width(covariates.cols());
  if (n <= q)
    throw DimensionError("design too wide: " + std::to_string(n) + " rows but " +
                         std::to_string(q) + " basis columns");
  return expand_covariates(covariates, spec);
}

/// Orthogonal projector onto the column space of the design, from a
/// column-pivoted QR. Columns whose pivot falls below
/// max(n, q) * eps * |r_11| are treated as dependent.
inline Projector projector(const Matrix& design) {
  require_finite(design, "design matrix");
  const Index n = design.rows();
  const Index q = design.cols();
  if (q == 0) return {Matrix::Zero(n, n), 0};

  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  qr.setThreshold(static_cast<double>(std::max(n, q)) *
                  std::numeric_limits<double>::epsilon());
  const Index rank = qr.rank();
  if (rank == 0) return {Matrix::Zero(n, n), 0};

  const Matrix basis = qr.householderQ() * Matrix::Identity(n, rank);
  Matrix p = basis * basis.transpose();
  p = 0.5 * (p + p.transpose()).eval();
  return {std::move(p), rank};
}

inline Projector projector(const DesignMatrix& design) { return projector(design.values); }

/// Extreme eigenvalues of n^-1 D'D.
inline GramExtremes condition_diagnostic(const Matrix& design, Index n) {
  if (design.size() == 0) throw DimensionError("condition_diagnostic: empty design");
  if (n <= 0) throw DomainError("condition_diagnostic: n must be positive");
  const Matrix gram = design.transpose() * design / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const Vector& ev = eig.eigenvalues();
  return {std::max(0.0, ev.minCoeff()), ev.maxCoeff()};
}

inline GramExtremes condition_diagnostic(const DesignMatrix& design) {
  return condition_diagnostic(design.values, design.rows());
}

inline constexpr double kDefaultGramFloor = 1e-6;

}  // namespace sidemat
