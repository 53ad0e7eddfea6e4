#pragma once

// Dense SVD helpers, singular value soft-thresholding, rank-K truncation,
// eigenvalue-ratio rank selection and Procrustes subspace distance.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/SVD>

#include "sidemat/types.hpp"

namespace sidemat {

struct SvdFactors {
  Matrix u;                // n x r, orthonormal columns
  Vector singular_values;  // length r, nonincreasing
  Matrix v;                // m x r, orthonormal columns

  Index size() const { return singular_values.size(); }

  Matrix reconstruct() const {
    return u * singular_values.asDiagonal() * v.transpose();
  }
};

inline SvdFactors full_svd(const Matrix& a) {
  require_finite(a, "full_svd input");
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

inline Vector singular_values(const Matrix& a) {
  require_finite(a, "singular_values input");
  Eigen::BDCSVD<Matrix> svd(a);
  return svd.singularValues();
}

inline double operator_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return singular_values(a)(0);
}

inline double nuclear_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return singular_values(a).sum();
}

/// Number of singular values above rel_tol * s_max (and above zero).
inline Index numerical_rank(const Vector& s, double rel_tol = 1e-10) {
  if (s.size() == 0 || s(0) <= 0.0) return 0;
  const double cut = rel_tol * s(0);
  Index r = 0;
  while (r < s.size() && s(r) > cut) ++r;
  return r;
}

struct Thresholded {
  Matrix value;
  Index rank = 0;
  double nuclear_norm = 0.0;  // of value
};

/// Closed-form minimizer of 0.5*||B - A||_F^2 + tau*||A||_*: every singular
/// value is shrunk by tau and floored at zero. When tau >= s_max the result
/// is the zero matrix itself, not an accumulation of rounding noise.
inline Thresholded svt_detail(const Matrix& b, double tau) {
  if (!(tau >= 0.0)) throw DomainError("svt: threshold must be nonnegative");
  Thresholded out{Matrix::Zero(b.rows(), b.cols()), 0, 0.0};
  if (b.size() == 0) return out;
  const SvdFactors f = full_svd(b);
  Index keep = 0;
  while (keep < f.size() && f.singular_values(keep) > tau) ++keep;
  if (keep == 0) return out;
  const Vector shrunk = f.singular_values.head(keep).array() - tau;
  out.value.noalias() = f.u.leftCols(keep) * shrunk.asDiagonal() * f.v.leftCols(keep).transpose();
  out.rank = keep;
  out.nuclear_norm = shrunk.sum();
  return out;
}

inline Matrix svt(const Matrix& b, double tau) { return svt_detail(b, tau).value; }

/// Best rank-K approximation in Frobenius norm.
inline Matrix truncated_svd(const Matrix& a, Index k) {
  const Index max_rank = std::min(a.rows(), a.cols());
  if (k < 1 || k > max_rank)
    throw DomainError("truncated_svd: rank " + std::to_string(k) + " outside [1, " +
                      std::to_string(max_rank) + "]");
  const SvdFactors f = full_svd(a);
  return f.u.leftCols(k) * f.singular_values.head(k).asDiagonal() * f.v.leftCols(k).transpose();
}

inline constexpr double kRatioFloor = 1e-12;

/// Ahn-Horenstein eigenvalue ratio: argmax_k s_k^2 / s_{k+1}^2 over
/// 1 <= k <= k_max. Ties go to the smaller k.
inline Index eigenvalue_ratio_rank(std::span<const double> s, Index k_max) {
  if (k_max < 1) throw DomainError("eigenvalue_ratio_rank: k_max must be >= 1");
  if (static_cast<Index>(s.size()) < k_max + 1)
    throw DomainError("eigenvalue_ratio_rank: need at least k_max + 1 singular values");
  if (std::all_of(s.begin(), s.end(), [](double v) { return v == 0.0; }))
    throw DomainError("degenerate spectrum");
  Index best = 1;
  double best_ratio = -1.0;
  for (Index k = 1; k <= k_max; ++k) {
    const double num = s[static_cast<std::size_t>(k - 1)] * s[static_cast<std::size_t>(k - 1)];
    const double den = s[static_cast<std::size_t>(k)] * s[static_cast<std::size_t>(k)] + kRatioFloor;
    const double ratio = num / den;
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = k;
    }
  }
  return best;
}

inline Index eigenvalue_ratio_rank(const Vector& s, Index k_max) {
  return eigenvalue_ratio_rank(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())),
                               k_max);
}

/// min(20, floor(min(N, T) / 2)), at least 1.
inline Index default_k_max(Index rows, Index cols) {
  return std::max<Index>(1, std::min<Index>(20, std::min(rows, cols) / 2));
}

/// min over orthogonal R of ||U_hat - U R||_F, via the singular values of
/// U' U_hat: d^2 = 2K - 2 * sum(sv).
inline double procrustes_distance(const Matrix& u_hat, const Matrix& u) {
  if (u_hat.rows() != u.rows() || u_hat.cols() != u.cols())
    throw DimensionError("procrustes_distance: shape mismatch");
  const Index k = u.cols();
  const Vector sv = singular_values(u.transpose() * u_hat);
  const double d2 = 2.0 * static_cast<double>(k) - 2.0 * sv.sum();
  return std::sqrt(std::max(0.0, d2));
}

/// Median of the Marchenko-Pastur law with aspect ratio beta in (0, 1].
/// Used to calibrate noise level from the median singular value.
inline double marchenko_pastur_median(double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) throw DomainError("marchenko_pastur_median: beta must be in (0, 1]");
  const double lo = (1.0 - std::sqrt(beta)) * (1.0 - std::sqrt(beta));
  const double hi = (1.0 + std::sqrt(beta)) * (1.0 + std::sqrt(beta));
  // With x = lo + (hi - lo) * sin^2(theta) the density times the Jacobian is
  // (hi - lo)^2 sin^2 cos^2 / (pi * beta * x), which is smooth on [0, pi/2].
  const double width = hi - lo;
  const auto integrand = [&](double th) {
    const double sn = std::sin(th), cs = std::cos(th);
    const double x = lo + width * sn * sn;
    if (x <= 0.0) return width * cs * cs / (M_PI * beta);
    return width * width * sn * sn * cs * cs / (M_PI * beta * x);
  };
  const auto cdf = [&](double x) {
    if (x <= lo) return 0.0;
    if (x >= hi) return 1.0;
    const double theta_max = std::asin(std::sqrt((x - lo) / width));
    constexpr int n = 400;
    const double h = theta_max / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      acc += w * integrand(i * h);
    }
    return acc * h / 3.0;
  };
  double a = lo, b = hi;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (a + b);
    (cdf(mid) < 0.5 ? a : b) = mid;
  }
  return 0.5 * (a + b);
}

}  // namespace sidemat
