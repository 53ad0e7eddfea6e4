#pragma once

// Estimation when cells are missing at random with a common probability p.
//
//   M1_hat   = p^-1 P_X (Omega o Y) P_Z
//   M_rest   = argmin_{||A||_inf <= M_max} ||Omega o (Y - M1_hat - A)||_F^2 + nu ||A||_*
//   M_hat    = M1_hat + M_rest
//
// with nu = c * sigma_hat * sqrt(p) * (sqrt(N) + sqrt(T)).

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "sidemat/estimator_full.hpp"
#include "sidemat/lowrank.hpp"
#include "sidemat/sieve_basis.hpp"
#include "sidemat/types.hpp"

namespace sidemat {

/// Fraction of observed cells.
inline double estimate_p(const ObservationMask& mask) {
  if (mask.rows() == 0 || mask.cols() == 0) throw DomainError("estimate_p: empty mask");
  const Index ones = mask.count();
  if (ones == 0) throw DomainError("estimate_p: no observed cells");
  return static_cast<double>(ones) / static_cast<double>(mask.rows() * mask.cols());
}

struct CompletionOptions {
  double tol = 1e-7;  // relative change of the objective
  Index max_iter = 2000;
  bool record_trace = false;

  void validate() const {
    if (!(tol > 0.0)) throw DomainError("completion tolerance must be positive");
    if (max_iter < 1) throw DomainError("max_iter must be >= 1");
  }
};

struct CompletionResult {
  Matrix value;
  Index iterations = 0;
  bool converged = false;
  double objective = 0.0;
  Index rank = 0;
  bool clip_active = false;  // the box constraint bound on the final iterate
  std::vector<double> trace;  // objective after each iteration, if requested
};

/// Observed-entry objective ||Omega o (R - A)||_F^2 + nu ||A||_*.
inline double completion_objective(const Matrix& r_obs, const ObservationMask& mask, const Matrix& a,
                                   double nu, double nuclear) {
  double loss = 0.0;
  for (Index t = 0; t < a.cols(); ++t)
    for (Index i = 0; i < a.rows(); ++i)
      if (mask.observed(i, t)) {
        const double d = r_obs(i, t) - a(i, t);
        loss += d * d;
      }
  return loss + nu * nuclear;
}

/// Proximal gradient on the observed-entry objective, started from zero.
///
/// The smooth part has gradient 2 Omega o (A - R) with Lipschitz constant
/// L = 2, so the step is t = 1/2 and the prox of t * nu ||.||_* is
/// svt(., nu / 2):
///
///   A <- clip(svt(A - Omega o (A - R), nu / 2), -M_max, M_max)
///
/// The clip is applied after the prox rather than as part of it, which is an
/// inexact treatment of the box constraint. It is exact whenever the clip
/// does not bind. With a complete mask the first iterate is already
/// svt(R, nu / 2).
inline CompletionResult solve_completion(const Matrix& r, const ObservationMask& mask, double nu,
                                         double m_max, const CompletionOptions& opts = {}) {
  opts.validate();
  if (!(nu >= 0.0)) throw DomainError("solve_completion: nu must be nonnegative");
  if (!(m_max > 0.0)) throw DomainError("solve_completion: M_max must be positive");
  const Matrix r_obs = mask.apply(r);
  require_finite(r_obs, "observed residuals");

  CompletionResult res;
  res.value = Matrix::Zero(r.rows(), r.cols());
  double f_prev = completion_objective(r_obs, mask, res.value, nu, 0.0);

  for (Index it = 1; it <= opts.max_iter; ++it) {
    Matrix g = res.value;
    for (Index t = 0; t < g.cols(); ++t)
      for (Index i = 0; i < g.rows(); ++i)
        if (mask.observed(i, t)) g(i, t) = r_obs(i, t);

    auto th = svt_detail(g, nu / 2.0);
    bool clipped = false;
    for (Index k = 0; k < th.value.size(); ++k) {
      double& v = th.value.data()[k];
      if (v > m_max) {
        v = m_max;
        clipped = true;
      } else if (v < -m_max) {
        v = -m_max;
        clipped = true;
      }
    }
    const double nuclear = clipped ? nuclear_norm(th.value) : th.nuclear_norm;
    const double f = completion_objective(r_obs, mask, th.value, nu, nuclear);
    // Plain proximal gradient never increases the objective while the clip
    // is inactive.
    assert(clipped || f <= f_prev * (1.0 + 1e-10) + 1e-12);

    res.value = std::move(th.value);
    res.rank = clipped ? numerical_rank(singular_values(res.value)) : th.rank;
    res.clip_active = clipped;
    res.objective = f;
    res.iterations = it;
    if (opts.record_trace) res.trace.push_back(f);

    const double change = std::abs(f_prev - f) / std::max(std::abs(f_prev), std::numeric_limits<double>::min());
    f_prev = f;
    if (change < opts.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

struct MarConfig {
  std::optional<double> p;        // estimated from the mask when empty
  double nu_multiplier = 2.0;
  std::optional<double> m_max;    // 3 * max |observed Y| when empty
  std::optional<double> sigma;    // MAD rule on observed residuals when empty
  std::optional<double> nu;       // overrides the nu formula entirely
  double tol = 1e-7;
  Index max_iter = 2000;

  void validate() const {
    if (p && !(*p > 0.0 && *p <= 1.0)) throw DomainError("p must lie in (0, 1]");
    if (!(nu_multiplier > 0.0)) throw DomainError("nu multiplier must be positive");
    if (m_max && !(*m_max > 0.0)) throw DomainError("M_max must be positive");
    if (!(tol > 0.0)) throw DomainError("tol must be positive");
    if (max_iter < 1) throw DomainError("max_iter must be >= 1");
  }
};

struct MarEstimate {
  Matrix m1_hat;
  Matrix m_rest_hat;
  Matrix m_hat;
  double p = 1.0;
  double sigma_hat = 0.0;
  double nu = 0.0;
  double m_max = 0.0;
  Index iterations = 0;
  bool converged = false;
  Index rank_rest = 0;
  Index rank_x = 0;
  Index rank_z = 0;
  GramExtremes gram_x, gram_z;
};

/// 1.4826 * median absolute deviation of the observed entries.
inline double mad_sigma(const Matrix& values, const ObservationMask& mask) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(mask.count()));
  for (Index t = 0; t < values.cols(); ++t)
    for (Index i = 0; i < values.rows(); ++i)
      if (mask.observed(i, t)) v.push_back(values(i, t));
  if (v.empty()) return 0.0;
  const auto median = [](std::vector<double> w) {
    const std::size_t h = w.size() / 2;
    std::nth_element(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(h), w.end());
    const double hi = w[h];
    if (w.size() % 2) return hi;
    const double lo = *std::max_element(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(h));
    return 0.5 * (lo + hi);
  };
  const double med = median(v);
  for (double& x : v) x = std::abs(x - med);
  return 1.4826 * median(v);
}

inline double max_abs_observed(const Matrix& y, const ObservationMask& mask) {
  double m = 0.0;
  for (Index t = 0; t < y.cols(); ++t)
    for (Index i = 0; i < y.rows(); ++i)
      if (mask.observed(i, t)) m = std::max(m, std::abs(y(i, t)));
  return m;
}

/// c * sigma * sqrt(p) * (sqrt(N) + sqrt(T)).
inline double mar_penalty(double c, double sigma, double p, Index n, Index t) {
  return c * sigma * std::sqrt(p) *
         (std::sqrt(static_cast<double>(n)) + std::sqrt(static_cast<double>(t)));
}

/// Resolved tuning of one MAR fit. The nuclear-norm baseline reuses these so
/// both estimators are compared under the same penalty rule.
struct MarSettings {
  double p = 1.0;
  double sigma_hat = 0.0;
  double nu = 0.0;
  double m_max = 1.0;
  Matrix m1_hat;    // p^-1 P_X (Omega o Y) P_Z
  Matrix residual;  // Omega o (Y - m1_hat)
};

inline MarSettings resolve_mar_settings(const Matrix& y, const ObservationMask& mask, const Projector& px,
                                        const Projector& pz, const MarConfig& cfg) {
  cfg.validate();
  if (mask.rows() != y.rows() || mask.cols() != y.cols())
    throw DimensionError("mask shape does not match the outcome matrix");
  detail::check_projectors(y, px, pz);

  MarSettings s;
  s.p = cfg.p ? *cfg.p : estimate_p(mask);
  const Matrix y_obs = mask.apply(y);
  require_finite(y_obs, "observed outcomes");
  s.m1_hat = (px.values * y_obs * pz.values) / s.p;
  s.residual = mask.apply(y_obs - s.m1_hat);
  s.sigma_hat = cfg.sigma ? *cfg.sigma : mad_sigma(s.residual, mask);
  s.nu = cfg.nu ? *cfg.nu : mar_penalty(cfg.nu_multiplier, s.sigma_hat, s.p, y.rows(), y.cols());
  s.m_max = cfg.m_max ? *cfg.m_max : 3.0 * max_abs_observed(y_obs, mask);
  if (!(s.m_max > 0.0)) s.m_max = 1.0;  // every observed entry is zero
  return s;
}

/// Only cells with mask == 1 are read from `y`.
inline MarEstimate estimate_mar(const Matrix& y, const ObservationMask& mask, const Projector& px,
                                const Projector& pz, const MarConfig& cfg = {}) {
  MarSettings s = resolve_mar_settings(y, mask, px, pz, cfg);

  MarEstimate est;
  est.rank_x = px.rank;
  est.rank_z = pz.rank;
  est.p = s.p;
  est.sigma_hat = s.sigma_hat;
  est.nu = s.nu;
  est.m_max = s.m_max;
  est.m1_hat = std::move(s.m1_hat);

  auto sol = solve_completion(s.residual, mask, est.nu, est.m_max, {cfg.tol, cfg.max_iter, false});
  est.iterations = sol.iterations;
  est.converged = sol.converged;
  est.rank_rest = sol.rank;
  est.m_rest_hat = std::move(sol.value);
  est.m_hat = est.m1_hat + est.m_rest_hat;
  return est;
}

inline MarEstimate estimate_mar(const Matrix& y, const ObservationMask& mask, const Matrix& x,
                                const Matrix& z, const SieveSpec& spec_x, const SieveSpec& spec_z,
                                const MarConfig& cfg = {}) {
  if (x.rows() != y.rows() || z.rows() != y.cols())
    throw DimensionError("covariate rows must match the outcome dimensions");
  const auto proj = build_projectors(x, z, spec_x, spec_z);
  auto est = estimate_mar(y, mask, proj.px, proj.pz, cfg);
  est.gram_x = condition_diagnostic(proj.design_x);
  est.gram_z = condition_diagnostic(proj.design_z);
  return est;
}

}  // namespace sidemat
