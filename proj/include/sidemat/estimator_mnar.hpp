#pragma once

// Estimation under a block-missing pattern (treated units after adoption).
//
// The tall block (all rows, pre-treatment columns) and the wide block
// (control rows, all columns) are fully observed. Each is estimated on its
// own, the top-K left singular vectors of the tall estimate are aligned to
// those of the wide estimate by least squares on the shared control rows,
// and the full matrix is rebuilt as U_tall H D_wide V_wide'.

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "sidemat/estimator_full.hpp"
#include "sidemat/lowrank.hpp"
#include "sidemat/sieve_basis.hpp"
#include "sidemat/types.hpp"

namespace sidemat {

inline constexpr double kMaxAlignmentCondition = 1e12;

/// H = (U_s' U_s)^-1 U_s' U_wide, solved through a pivoted QR of U_s.
inline Matrix rotation_adjust(const Matrix& u_tall_sub, const Matrix& u_wide) {
  if (u_tall_sub.rows() != u_wide.rows() || u_tall_sub.cols() != u_wide.cols())
    throw DimensionError("rotation_adjust: shape mismatch");
  const Index k = u_tall_sub.cols();
  if (u_tall_sub.rows() < k) throw DimensionError("rotation_adjust: fewer control rows than K");
  const Vector s = singular_values(u_tall_sub);
  const double cond = s(k - 1) > 0.0 ? s(0) / s(k - 1) : std::numeric_limits<double>::infinity();
  if (!(cond < kMaxAlignmentCondition))
    throw ConditioningError("rotation_adjust: regressor is rank deficient (condition number " +
                                std::to_string(cond) + ")",
                            cond);
  return Eigen::ColPivHouseholderQR<Matrix>(u_tall_sub).solve(u_wide);
}

struct IncoherenceDiagnostic {
  // Extreme eigenvalues of (N / N0) sum_{i < N0} u_i u_i' and of the
  // analogous column quantity over the pre-treatment periods.
  GramExtremes rows;
  GramExtremes cols;
  bool below_floor = false;
};

/// What to do when the requested K exceeds what the block estimates support.
enum class RankCap {
  none,        // fail with RankError
  numerical,   // lower K to the numerical rank of the block estimates
  // Lower K to the number of singular values above the noise edge of the
  // unpenalized double-projection block, sigma_hat * (sqrt(r_X) + sqrt(r_Z)).
  // Directions below it are indistinguishable from projected noise.
  noise_floor,
};

inline const char* to_string(RankCap c) {
  switch (c) {
    case RankCap::none: return "none";
    case RankCap::numerical: return "numerical";
    case RankCap::noise_floor: return "noise_floor";
  }
  return "unknown";
}

struct MnarOptions {
  std::optional<Index> rank;  // eigenvalue ratio on the wide estimate when empty
  PenaltyPlan plan;
  RankCap rank_cap = RankCap::none;
  double incoherence_floor = 0.05;
  std::optional<Index> k_max;
};

/// Singular values at or below these are not counted as signal.
struct BlockFloors {
  double tall = 0.0;
  double wide = 0.0;
};

struct MnarEstimate {
  Matrix m_hat;
  Index rank = 0;
  Index requested_rank = 0;
  bool rank_auto = false;
  Index achievable_rank = 0;  // numerical rank of the block estimates
  Index effective_rank = 0;   // above the noise floors (= achievable without floors)
  Matrix h_adj;
  double alignment_residual = 0.0;  // ||U_s H - U_wide||_F
  IncoherenceDiagnostic incoherence;
  std::optional<ComponentEstimate> tall, wide;  // set by estimate_mnar only
};

namespace detail {

inline GramExtremes scaled_leverage_extremes(const Matrix& basis_head, double scale) {
  const Matrix g = scale * basis_head.transpose() * basis_head;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g, Eigen::EigenvaluesOnly);
  return {eig.eigenvalues().minCoeff(), eig.eigenvalues().maxCoeff()};
}

inline Index count_above(const Vector& s, double floor) {
  Index k = 0;
  while (k < s.size() && s(k) > floor) ++k;
  return k;
}

inline double noise_edge(const ComponentEstimate& e) {
  return e.penalties.sigma_hat *
         (std::sqrt(static_cast<double>(e.rank_x)) + std::sqrt(static_cast<double>(e.rank_z)));
}

}  // namespace detail

/// Combines estimates of the tall and wide blocks into a full N x T matrix.
/// Shared by the side-information estimator and the spectral baseline.
inline MnarEstimate combine_blocks(const Matrix& tall_hat, const Matrix& wide_hat, const BlockShape& shape,
                                   std::optional<Index> rank, const MnarOptions& opts,
                                   BlockFloors floors = {}) {
  const SvdFactors ft = full_svd(tall_hat);
  const SvdFactors fw = full_svd(wide_hat);

  MnarEstimate est;
  est.achievable_rank = std::min(numerical_rank(ft.singular_values), numerical_rank(fw.singular_values));
  est.effective_rank = std::min({est.achievable_rank, detail::count_above(ft.singular_values, floors.tall),
                                 detail::count_above(fw.singular_values, floors.wide)});
  if (est.achievable_rank == 0) {
    // Both block estimates vanish: nothing to extrapolate.
    est.requested_rank = rank.value_or(0);
    est.rank_auto = !rank.has_value();
    est.m_hat = Matrix::Zero(shape.n, shape.t);
    est.h_adj = Matrix::Zero(0, 0);
    return est;
  }
  if (rank) {
    est.rank = *rank;
  } else {
    est.rank_auto = true;
    const Index k_max = opts.k_max ? *opts.k_max : default_k_max(wide_hat.rows(), wide_hat.cols());
    est.rank = eigenvalue_ratio_rank(fw.singular_values, k_max);
  }
  if (est.rank < 1) throw DomainError("MNAR rank must be >= 1");
  est.requested_rank = est.rank;

  const Index cap = opts.rank_cap == RankCap::noise_floor ? est.effective_rank : est.achievable_rank;
  if (est.rank > cap) {
    if (opts.rank_cap == RankCap::none || cap < 1)
      throw RankError("requested rank " + std::to_string(est.rank) + " exceeds the achievable rank " +
                          std::to_string(cap) + " of the block estimates",
                      cap);
    est.rank = cap;
  }
  const Index k = est.rank;
  const Matrix u_tall = ft.u.leftCols(k);
  const Matrix u_wide = fw.u.leftCols(k);
  const Matrix v_wide = fw.v.leftCols(k);
  const Matrix u_sub = u_tall.topRows(shape.n0);

  est.h_adj = rotation_adjust(u_sub, u_wide);
  est.alignment_residual = (u_sub * est.h_adj - u_wide).norm();
  est.m_hat = u_tall * est.h_adj * fw.singular_values.head(k).asDiagonal() * v_wide.transpose();

  est.incoherence.rows = detail::scaled_leverage_extremes(
      u_sub, static_cast<double>(shape.n) / static_cast<double>(shape.n0));
  est.incoherence.cols = detail::scaled_leverage_extremes(
      v_wide.topRows(shape.t0), static_cast<double>(shape.t) / static_cast<double>(shape.t0));
  est.incoherence.below_floor = est.incoherence.rows.lambda_min < opts.incoherence_floor ||
                                est.incoherence.cols.lambda_min < opts.incoherence_floor;
  return est;
}

inline void check_block_inputs(const Matrix& y, const BlockShape& shape) {
  shape.validate();
  if (y.rows() != shape.n || y.cols() != shape.t)
    throw DimensionError("outcome matrix does not match the block shape");
}

/// Missing-block cells of `y` are never read.
inline MnarEstimate estimate_mnar(const Matrix& y, const BlockShape& shape, const Matrix& x,
                                  const Matrix& z, const SieveSpec& spec_x, const SieveSpec& spec_z,
                                  const MnarOptions& opts = {}) {
  check_block_inputs(y, shape);
  if (x.rows() != shape.n || z.rows() != shape.t)
    throw DimensionError("covariate rows must match the outcome dimensions");
  if (opts.rank && *opts.rank > std::min(shape.n0, shape.t0))
    throw DomainError("MNAR rank exceeds min(N0, T0)");

  const Matrix y_tall = y.leftCols(shape.t0);
  const Matrix y_wide = y.topRows(shape.n0);
  auto tall = estimate_full(y_tall, x, z.topRows(shape.t0), spec_x, spec_z, opts.plan);
  auto wide = estimate_full(y_wide, x.topRows(shape.n0), z, spec_x, spec_z, opts.plan);

  const BlockFloors floors = opts.rank_cap == RankCap::noise_floor
                                ? BlockFloors{detail::noise_edge(tall), detail::noise_edge(wide)}
                                : BlockFloors{};
  MnarEstimate est = combine_blocks(tall.m_hat, wide.m_hat, shape, opts.rank, opts, floors);
  est.tall = std::move(tall);
  est.wide = std::move(wide);
  return est;
}

}  // namespace sidemat
