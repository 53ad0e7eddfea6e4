#pragma once

#include <cstdint>

#include <Eigen/QR>

#include "sidemat/sidemat.hpp"

namespace testing_support {

using sidemat::Index;
using sidemat::Matrix;
using sidemat::StreamRng;

inline StreamRng rng_for(std::uint64_t seed) { return StreamRng(seed, sidemat::Stream::noise); }

inline Matrix gaussian(Index rows, Index cols, StreamRng& rng, double sd = 1.0) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, sd);
  return m;
}

inline Matrix uniform(Index rows, Index cols, StreamRng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

inline Index uniform_index(StreamRng& rng, Index lo, Index hi) {
  return lo + static_cast<Index>(rng.uniform() * static_cast<double>(hi - lo + 1));
}

/// n x k with orthonormal columns.
inline Matrix orthonormal(Index n, Index k, StreamRng& rng) {
  Eigen::HouseholderQR<Matrix> qr(gaussian(n, k, rng));
  return qr.householderQ() * Matrix::Identity(n, k);
}

inline Matrix low_rank(Index n, Index t, Index k, StreamRng& rng) {
  return gaussian(n, k, rng) * gaussian(t, k, rng).transpose();
}

/// Additive polynomial factors of degree <= j in the columns of c.
inline Matrix sieve_factor(const Matrix& c, int degree, Index k, StreamRng& rng) {
  const sidemat::SieveSpec s{sidemat::BasisFamily::polynomial, degree, true, false};
  const Matrix b = sidemat::expand_covariates(c, s).values;
  return b * gaussian(b.cols(), k, rng);
}

inline double max_abs(const Matrix& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

inline bool exactly_zero(const Matrix& a) { return (a.array() == 0.0).all(); }

}  // namespace testing_support

#include <Eigen/Eigenvalues>

namespace testing_support {

/// Nuclear-norm prox computed from the eigen-decomposition of C'C, a code
/// path independent of the library's SVD-based svt.
inline Matrix prox_nuclear_eig(const Matrix& c, double tau) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(c.transpose() * c);
  const Matrix& v = eig.eigenvectors();
  sidemat::Vector scale(v.cols());
  for (Index k = 0; k < v.cols(); ++k) {
    const double s = std::sqrt(std::max(0.0, eig.eigenvalues()(k)));
    scale(k) = s > tau ? 1.0 - tau / s : 0.0;
  }
  return c * v * scale.asDiagonal() * v.transpose();
}

/// Minimizer of ||B - A||_F^2 + nu ||A||_* by proximal gradient with step
/// 1/4 from A = 0, stopped when the update falls below 1e-15 or after
/// max_steps steps.
inline Matrix prox_iteration_oracle(const Matrix& b, double nu, int max_steps = 10000) {
  Matrix a = Matrix::Zero(b.rows(), b.cols());
  for (int step = 0; step < max_steps; ++step) {
    // A - t * 2 (A - B) with t = 1/4, then the prox of t * nu ||.||_*.
    Matrix next = prox_nuclear_eig(0.5 * a + 0.5 * b, 0.25 * nu);
    const double change = (next - a).norm();
    a = std::move(next);
    if (change < 1e-15 * std::max(1.0, b.norm())) break;
  }
  return a;
}

}  // namespace testing_support
