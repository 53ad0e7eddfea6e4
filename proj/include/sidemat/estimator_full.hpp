#pragma once

// Estimation with a fully observed outcome matrix.
//
//   M1_hat = P_X Y P_Z
//   M2_hat = svt(P_X Y (I - P_Z),       nu2 / 2)
//   M3_hat = svt((I - P_X) Y P_Z,       nu3 / 2)
//   M4_hat = svt((I - P_X) Y (I - P_Z), nu4 / 2)
//   M_hat  = M1_hat + M2_hat + M3_hat + M4_hat
//
// svt(B, nu / 2) is the exact minimizer of ||B - A||_F^2 + nu ||A||_*, so no
// iterative solver is involved.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "sidemat/lowrank.hpp"
#include "sidemat/sieve_basis.hpp"
#include "sidemat/types.hpp"

namespace sidemat {

enum class SigmaRule {
  // ||(I - P_X) Y (I - P_Z)||_F / sqrt((N - r_X)(T - r_Z)); inflated by any
  // low-rank signal left in that block.
  frobenius,
  // Median singular value of the same block matched to the Marchenko-Pastur
  // median; insensitive to a few large signal directions.
  spectral_median,
};

inline const char* to_string(SigmaRule r) {
  return r == SigmaRule::frobenius ? "frobenius" : "spectral_median";
}

struct PenaltyPlan {
  double c2 = 2.0;
  double c3 = 2.0;
  double c4 = 2.0;
  SigmaRule sigma_rule = SigmaRule::spectral_median;
  std::optional<double> sigma;                // supplied noise scale
  std::optional<std::array<double, 3>> nu;    // explicit nu2, nu3, nu4

  static PenaltyPlan automatic(double multiplier = 2.0) {
    PenaltyPlan p;
    p.c2 = p.c3 = p.c4 = multiplier;
    return p;
  }

  static PenaltyPlan fixed(double nu2, double nu3, double nu4) {
    PenaltyPlan p;
    p.nu = std::array<double, 3>{nu2, nu3, nu4};
    return p;
  }

  /// All penalties zero: the four blocks are returned untouched.
  static PenaltyPlan unpenalized() { return fixed(0.0, 0.0, 0.0); }

  /// The plan that goes with Y scaled by `factor`.
  PenaltyPlan scaled(double factor) const {
    PenaltyPlan p = *this;
    if (p.sigma) *p.sigma *= factor;
    if (p.nu)
      for (double& v : *p.nu) v *= factor;
    return p;
  }

  void validate() const {
    if (!(c2 >= 0.0 && c3 >= 0.0 && c4 >= 0.0))
      throw DomainError("penalty multipliers must be nonnegative");
    if (sigma && !(*sigma >= 0.0)) throw DomainError("supplied sigma must be nonnegative");
    if (nu)
      for (double v : *nu)
        if (!(v >= 0.0)) throw DomainError("explicit penalties must be nonnegative");
  }
};

struct ResolvedPenalties {
  double c2 = 0.0, c3 = 0.0, c4 = 0.0;
  double sigma_hat = 0.0;
  SigmaRule sigma_rule = SigmaRule::spectral_median;
  bool explicit_values = false;
  double nu2 = 0.0, nu3 = 0.0, nu4 = 0.0;
};

struct ComponentEstimate {
  Matrix m1_hat, m2_hat, m3_hat, m4_hat;
  Matrix m_hat;
  std::array<Index, 3> ranks{0, 0, 0};  // post-threshold ranks of M2..M4
  ResolvedPenalties penalties;
  Index rank_x = 0;
  Index rank_z = 0;
  GramExtremes gram_x, gram_z;
};

namespace detail {

inline void check_projectors(const Matrix& y, const Projector& px, const Projector& pz) {
  if (px.size() != y.rows() || pz.size() != y.cols())
    throw DimensionError("projector dimensions do not match the outcome matrix");
}

inline Matrix residual_block(const Matrix& y, const Projector& px, const Projector& pz) {
  const Matrix left = y - px.values * y;
  return left - left * pz.values;
}

}  // namespace detail

/// sigma_hat = ||(I - P_X) Y (I - P_Z)||_F / sqrt((N - r_X)(T - r_Z)).
inline double estimate_sigma(const Matrix& y, const Projector& px, const Projector& pz) {
  detail::check_projectors(y, px, pz);
  const Index dn = y.rows() - px.rank;
  const Index dt = y.cols() - pz.rank;
  if (dn <= 0 || dt <= 0)
    throw DimensionError("estimate_sigma: projector rank leaves no residual degrees of freedom");
  return detail::residual_block(y, px, pz).norm() /
         std::sqrt(static_cast<double>(dn) * static_cast<double>(dt));
}

/// Noise scale from the median singular value of (I - P_X) Y (I - P_Z),
/// which lives in an (N - r_X) x (T - r_Z) subspace.
inline double estimate_sigma_spectral(const Matrix& y, const Projector& px, const Projector& pz) {
  detail::check_projectors(y, px, pz);
  const Index dn = y.rows() - px.rank;
  const Index dt = y.cols() - pz.rank;
  if (dn <= 0 || dt <= 0)
    throw DimensionError("estimate_sigma: projector rank leaves no residual degrees of freedom");
  const Index small = std::min(dn, dt);
  const Index large = std::max(dn, dt);
  const Vector s = singular_values(detail::residual_block(y, px, pz));
  std::vector<double> top(s.data(), s.data() + std::min<Index>(small, s.size()));
  std::sort(top.begin(), top.end());
  const std::size_t h = top.size() / 2;
  const double med = top.size() % 2 ? top[h] : 0.5 * (top[h - 1] + top[h]);
  const double beta = static_cast<double>(small) / static_cast<double>(large);
  return med / std::sqrt(static_cast<double>(large) * marchenko_pastur_median(beta));
}

inline double estimate_sigma(const Matrix& y, const Projector& px, const Projector& pz,
                             SigmaRule rule) {
  return rule == SigmaRule::frobenius ? estimate_sigma(y, px, pz)
                                      : estimate_sigma_spectral(y, px, pz);
}

/// nu2 = c2 s (sqrt(T) + sqrt(q_x)), nu3 = c3 s (sqrt(N) + sqrt(q_z)),
/// nu4 = c4 s (sqrt(N) + sqrt(T)), where s is the noise scale.
inline ResolvedPenalties resolve_penalties(const PenaltyPlan& plan, const Matrix& y,
                                           const Projector& px, const Projector& pz) {
  plan.validate();
  ResolvedPenalties r;
  r.c2 = plan.c2;
  r.c3 = plan.c3;
  r.c4 = plan.c4;
  r.sigma_rule = plan.sigma_rule;
  if (plan.nu) {
    r.explicit_values = true;
    r.nu2 = (*plan.nu)[0];
    r.nu3 = (*plan.nu)[1];
    r.nu4 = (*plan.nu)[2];
    if (plan.sigma) r.sigma_hat = *plan.sigma;
    return r;
  }
  r.sigma_hat = plan.sigma ? *plan.sigma : estimate_sigma(y, px, pz, plan.sigma_rule);
  const double sn = std::sqrt(static_cast<double>(y.rows()));
  const double st = std::sqrt(static_cast<double>(y.cols()));
  r.nu2 = plan.c2 * r.sigma_hat * (st + std::sqrt(static_cast<double>(px.rank)));
  r.nu3 = plan.c3 * r.sigma_hat * (sn + std::sqrt(static_cast<double>(pz.rank)));
  r.nu4 = plan.c4 * r.sigma_hat * (sn + st);
  return r;
}

inline ComponentEstimate estimate_full(const Matrix& y, const Projector& px, const Projector& pz,
                                       const PenaltyPlan& plan = {}) {
  require_finite(y, "outcome matrix");
  detail::check_projectors(y, px, pz);

  ComponentEstimate est;
  est.penalties = resolve_penalties(plan, y, px, pz);
  est.rank_x = px.rank;
  est.rank_z = pz.rank;

  const Matrix px_y = px.values * y;
  const Matrix rest_y = y - px_y;  // (I - P_X) Y
  const Matrix px_y_pz = px_y * pz.values;
  const Matrix rest_y_pz = rest_y * pz.values;

  est.m1_hat = px_y_pz;
  auto b2 = svt_detail(px_y - px_y_pz, est.penalties.nu2 / 2.0);
  auto b3 = svt_detail(rest_y_pz, est.penalties.nu3 / 2.0);
  auto b4 = svt_detail(rest_y - rest_y_pz, est.penalties.nu4 / 2.0);
  est.ranks = {b2.rank, b3.rank, b4.rank};
  est.m2_hat = std::move(b2.value);
  est.m3_hat = std::move(b3.value);
  est.m4_hat = std::move(b4.value);
  est.m_hat = est.m1_hat + est.m2_hat + est.m3_hat + est.m4_hat;
  return est;
}

struct SieveProjectors {
  DesignMatrix design_x, design_z;
  Projector px, pz;
};

inline SieveProjectors build_projectors(const Matrix& x, const Matrix& z, const SieveSpec& spec_x,
                                        const SieveSpec& spec_z) {
  SieveProjectors s;
  s.design_x = build_design(x, spec_x);
  s.design_z = build_design(z, spec_z);
  s.px = projector(s.design_x);
  s.pz = projector(s.design_z);
  return s;
}

inline ComponentEstimate estimate_full(const Matrix& y, const Matrix& x, const Matrix& z,
                                       const SieveSpec& spec_x, const SieveSpec& spec_z,
                                       const PenaltyPlan& plan = {}) {
  if (x.rows() != y.rows() || z.rows() != y.cols())
    throw DimensionError("covariate rows must match the outcome dimensions");
  const auto proj = build_projectors(x, z, spec_x, spec_z);
  auto est = estimate_full(y, proj.px, proj.pz, plan);
  est.gram_x = condition_diagnostic(proj.design_x);
  est.gram_z = condition_diagnostic(proj.design_z);
  return est;
}

}  // namespace sidemat
