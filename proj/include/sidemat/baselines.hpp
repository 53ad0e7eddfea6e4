#pragma once

// Comparator estimators: double projection, plain nuclear-norm penalization,
// rank-K spectral truncation (known or eigenvalue-ratio rank) and the
// spectral block-missing estimator.

#include <optional>

#include "sidemat/estimator_full.hpp"
#include "sidemat/estimator_mar.hpp"
#include "sidemat/estimator_mnar.hpp"
#include "sidemat/lowrank.hpp"
#include "sidemat/types.hpp"

namespace sidemat {

/// P_X Y P_Z
inline Matrix double_projection(const Matrix& y, const Projector& px, const Projector& pz) {
  detail::check_projectors(y, px, pz);
  return px.values * y * pz.values;
}

/// p^-1 P_X (Omega o Y) P_Z
inline Matrix double_projection_mar(const Matrix& y, const ObservationMask& mask, double p,
                                    const Projector& px, const Projector& pz) {
  if (!(p > 0.0)) throw DomainError("double_projection_mar: p must be positive");
  detail::check_projectors(y, px, pz);
  return px.values * mask.apply(y) * pz.values / p;
}

/// argmin ||Y - A||_F^2 + nu ||A||_*
inline Matrix nuclear_norm_full(const Matrix& y, double nu) {
  require_finite(y, "outcome matrix");
  return svt(y, nu / 2.0);
}

/// 2 * sigma_hat * (sqrt(N) + sqrt(T)), sigma_hat from the same residual rule
/// the side-information estimator uses.
inline double nuclear_norm_auto_penalty(const Matrix& y, const Projector& px, const Projector& pz,
                                        SigmaRule rule = SigmaRule::spectral_median,
                                        double multiplier = 2.0) {
  const double sigma = estimate_sigma(y, px, pz, rule);
  return multiplier * sigma *
         (std::sqrt(static_cast<double>(y.rows())) + std::sqrt(static_cast<double>(y.cols())));
}

inline CompletionResult nuclear_norm_mar(const Matrix& y, const ObservationMask& mask, double nu,
                                         double m_max, const CompletionOptions& opts = {}) {
  return solve_completion(y, mask, nu, m_max, opts);
}

inline Matrix spectral_oracle(const Matrix& y, Index k) { return truncated_svd(y, k); }

struct SpectralEstimate {
  Matrix value;
  Index rank = 0;
};

inline SpectralEstimate spectral_estimated(const Matrix& y, Index k_max) {
  const SvdFactors f = full_svd(y);
  const Index k = eigenvalue_ratio_rank(f.singular_values, k_max);
  return {f.u.leftCols(k) * f.singular_values.head(k).asDiagonal() * f.v.leftCols(k).transpose(), k};
}

/// Same recombination as estimate_mnar, with rank-K truncations of the raw
/// tall and wide blocks in place of the side-information estimates.
inline MnarEstimate mnar_spectral(const Matrix& y, const BlockShape& shape, std::optional<Index> rank,
                                  const MnarOptions& opts = {}) {
  check_block_inputs(y, shape);
  const Matrix y_tall = y.leftCols(shape.t0);
  const Matrix y_wide = y.topRows(shape.n0);
  Index k;
  if (rank) {
    k = *rank;
    if (k < 1 || k > std::min(shape.n0, shape.t0))
      throw DomainError("MNAR rank must lie in [1, min(N0, T0)]");
  } else {
    const Index k_max = opts.k_max ? *opts.k_max : default_k_max(y_wide.rows(), y_wide.cols());
    const Vector s = singular_values(y_wide);
    k = s(0) > 0.0 ? eigenvalue_ratio_rank(s, k_max) : 1;
  }
  MnarEstimate est =
      combine_blocks(truncated_svd(y_tall, k), truncated_svd(y_wide, k), shape, k, opts);
  est.rank_auto = !rank.has_value();
  return est;
}

}  // namespace sidemat
