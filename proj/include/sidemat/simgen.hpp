#pragma once

// Simulation designs: the alpha sweep (component weights) and the rank sweep
// (component ranks). Both build
//
//   M1 = G1(X) Q1(Z)'   M2 = G2(X) V1'   M3 = W1 Q2(Z)'   M4 = W2 V2'
//
// from additive polynomial link functions of four row and four column
// characteristics, normalize every component to Frobenius norm
// target_scale * sqrt(N T) and add Gaussian noise.

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "sidemat/rng.hpp"
#include "sidemat/types.hpp"

namespace sidemat {

enum class DgpVariant { alpha_study, rank_study };

inline const char* to_string(DgpVariant v) {
  return v == DgpVariant::alpha_study ? "alpha_study" : "rank_study";
}

struct DgpConfig {
  Index n = 200;
  Index t = 200;
  std::array<double, 4> alphas{0.25, 0.25, 0.25, 0.25};
  std::array<int, 4> ranks{17, 3, 3, 3};
  double noise_sd = 0.5;
  double target_scale = 2.0;
  DgpVariant variant = DgpVariant::alpha_study;
  std::uint64_t seed = 0;

  static DgpConfig alpha_study(Index n, Index t, std::array<double, 4> alphas) {
    DgpConfig c;
    c.n = n;
    c.t = t;
    c.alphas = alphas;
    return c;
  }

  static DgpConfig rank_study(Index n, Index t, std::array<int, 4> ranks) {
    DgpConfig c;
    c.n = n;
    c.t = t;
    c.ranks = ranks;
    c.alphas = {0.25, 0.25, 0.25, 0.25};
    c.noise_sd = 1.5;
    c.variant = DgpVariant::rank_study;
    return c;
  }

  int polynomial_degree() const { return variant == DgpVariant::alpha_study ? 4 : 3; }

  /// Rank of M when every weighted component is present.
  int total_rank() const {
    int k = 0;
    for (int r = 0; r < 4; ++r)
      if (alphas[static_cast<std::size_t>(r)] > 0.0) k += ranks[static_cast<std::size_t>(r)];
    return k;
  }

  void validate() const {
    if (n < 1 || t < 1) throw DomainError("DGP dimensions must be positive");
    double sum = 0.0;
    for (double a : alphas) {
      if (!(a >= 0.0)) throw DomainError("DGP weights must be nonnegative");
      sum += a;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw DomainError("DGP weights must sum to 1");
    for (int k : ranks)
      if (k < 1) throw DomainError("DGP ranks must be >= 1");
    if (!(noise_sd >= 0.0)) throw DomainError("noise sd must be nonnegative");
    if (!(target_scale > 0.0)) throw DomainError("target scale must be positive");
  }
};

/// Rescales weights that do not quite sum to one (the corner configurations
/// pin alpha_1 = 1 while keeping every other weight at 0.01).
inline std::array<double, 4> renormalized(std::array<double, 4> a) {
  const double s = a[0] + a[1] + a[2] + a[3];
  for (double& v : a) v /= s;
  return a;
}

struct SimulatedPanel {
  Matrix y;
  Matrix m;
  std::array<Matrix, 4> components;  // normalized, before alpha weighting
  Matrix e;
  Matrix x;  // N x 4
  Matrix z;  // T x 4
  ObservationMask mask;
  DgpConfig config;
};

struct Characteristics {
  Matrix x;
  Matrix z;
};

namespace detail {

// Column laws: Unif[-1,1], Unif[-0.5,0.5], N(0, 0.2^2), N(0, 0.3^2).
inline void draw_characteristic_rows(Matrix& c, StreamRng& rng) {
  for (Index i = 0; i < c.rows(); ++i) {
    c(i, 0) = rng.uniform(-1.0, 1.0);
    c(i, 1) = rng.uniform(-0.5, 0.5);
    c(i, 2) = rng.normal(0.0, 0.2);
    c(i, 3) = rng.normal(0.0, 0.3);
  }
}

/// K additive polynomials b0 + sum_d sum_{j<=degree} b_dj c_d^j evaluated at
/// each row of c. Coefficients are standard normal, drawn per function in
/// the order b0, (d=1, j=1..degree), (d=2, ...), ...
inline Matrix polynomial_factor(const Matrix& c, int degree, int k, StreamRng& rng) {
  const Index dims = c.cols();
  Matrix coef(1 + dims * degree, k);
  for (int col = 0; col < k; ++col)
    for (Index r = 0; r < coef.rows(); ++r) coef(r, col) = rng.normal();
  Matrix out(c.rows(), k);
  for (Index i = 0; i < c.rows(); ++i) {
    for (int col = 0; col < k; ++col) {
      double v = coef(0, col);
      Index idx = 1;
      for (Index d = 0; d < dims; ++d) {
        double power = 1.0;
        for (int j = 0; j < degree; ++j) {
          power *= c(i, d);
          v += coef(idx++, col) * power;
        }
      }
      out(i, col) = v;
    }
  }
  return out;
}

/// Rows drawn i.i.d. from N(0, diag(variances[0..k))).
inline Matrix gaussian_factor(Index rows, int k, const std::vector<double>& variances,
                              StreamRng& rng, const char* what) {
  if (static_cast<std::size_t>(k) > variances.size())
    throw DomainError(std::string("requested rank for ") + what + " exceeds covariance list length " +
                      std::to_string(variances.size()));
  Matrix out(rows, k);
  for (Index i = 0; i < rows; ++i)
    for (int j = 0; j < k; ++j)
      out(i, j) = std::sqrt(variances[static_cast<std::size_t>(j)]) * rng.normal();
  return out;
}

inline const std::vector<double>& alpha_study_variances() {
  static const std::vector<double> v{0.5, 1.0, 1.5};
  return v;
}

inline const std::vector<double>& rank_study_side_variances() {
  static const std::vector<double> v{1.0, 0.75 * 0.75, 1.25 * 1.25, 0.5 * 0.5,
                                     1.5 * 1.5, 0.25 * 0.25, 1.75 * 1.75};
  return v;
}

inline const std::vector<double>& rank_study_latent_variances() {
  static const std::vector<double> v{1.0,         0.75 * 0.75, 1.25 * 1.25, 0.75 * 0.75,
                                     1.25 * 1.25, 0.5 * 0.5,   1.5 * 1.5,   0.5 * 0.5,
                                     1.5 * 1.5,   0.25 * 0.25, 1.75 * 1.75, 0.25 * 0.25};
  return v;
}

}  // namespace detail

inline Characteristics gen_characteristics(Index n, Index t, StreamRng& rng) {
  if (n < 1 || t < 1) throw DomainError("gen_characteristics: dimensions must be positive");
  Characteristics c{Matrix(n, 4), Matrix(t, 4)};
  detail::draw_characteristic_rows(c.x, rng);
  detail::draw_characteristic_rows(c.z, rng);
  return c;
}

/// Unnormalized M1..M4. Coefficients come from `coef_rng` (G1, Q1, G2, Q2 in
/// that order), latent factors from `factor_rng` (V1, W1, W2, V2).
inline std::array<Matrix, 4> gen_components(const Matrix& x, const Matrix& z, const DgpConfig& cfg,
                                            StreamRng& coef_rng, StreamRng& factor_rng) {
  const int degree = cfg.polynomial_degree();
  const auto [k1, k2, k3, k4] = cfg.ranks;
  const bool alpha = cfg.variant == DgpVariant::alpha_study;
  const auto& side = alpha ? detail::alpha_study_variances() : detail::rank_study_side_variances();
  const auto& latent = alpha ? detail::alpha_study_variances() : detail::rank_study_latent_variances();
  const std::vector<double> v2_var(static_cast<std::size_t>(k4), 1.5 * 1.5);

  const Matrix g1 = detail::polynomial_factor(x, degree, k1, coef_rng);
  const Matrix q1 = detail::polynomial_factor(z, degree, k1, coef_rng);
  const Matrix g2 = detail::polynomial_factor(x, degree, k2, coef_rng);
  const Matrix q2 = detail::polynomial_factor(z, degree, k3, coef_rng);

  const Matrix v1 = detail::gaussian_factor(z.rows(), k2, side, factor_rng, "V1");
  const Matrix w1 = detail::gaussian_factor(x.rows(), k3, side, factor_rng, "W1");
  const Matrix w2 = detail::gaussian_factor(x.rows(), k4, latent, factor_rng, "W2");
  const Matrix v2 = detail::gaussian_factor(z.rows(), k4, v2_var, factor_rng, "V2");

  return {g1 * q1.transpose(), g2 * v1.transpose(), w1 * q2.transpose(), w2 * v2.transpose()};
}

inline Matrix normalize_component(const Matrix& m, Index n, Index t, double target_scale) {
  const double norm = m.norm();
  if (!(norm > 0.0)) throw DomainError("normalize_component: zero matrix");
  return m * (target_scale * std::sqrt(static_cast<double>(n) * static_cast<double>(t)) / norm);
}

inline SimulatedPanel gen_panel(const DgpConfig& cfg) {
  cfg.validate();
  StreamRng cov_rng(cfg.seed, Stream::covariates);
  StreamRng coef_rng(cfg.seed, Stream::coefficients);
  StreamRng factor_rng(cfg.seed, Stream::factors);
  StreamRng noise_rng(cfg.seed, Stream::noise);

  SimulatedPanel p;
  p.config = cfg;
  auto chars = gen_characteristics(cfg.n, cfg.t, cov_rng);
  p.x = std::move(chars.x);
  p.z = std::move(chars.z);
  auto raw = gen_components(p.x, p.z, cfg, coef_rng, factor_rng);

  p.m = Matrix::Zero(cfg.n, cfg.t);
  for (std::size_t r = 0; r < 4; ++r) {
    p.components[r] = normalize_component(raw[r], cfg.n, cfg.t, cfg.target_scale);
    p.m += cfg.alphas[r] * p.components[r];
  }
  p.e.resize(cfg.n, cfg.t);
  for (Index i = 0; i < cfg.n; ++i)
    for (Index c = 0; c < cfg.t; ++c) p.e(i, c) = cfg.noise_sd * noise_rng.normal();
  p.y = p.m + p.e;
  p.mask = ObservationMask::all(cfg.n, cfg.t);
  return p;
}

inline ObservationMask gen_mask_mar(Index n, Index t, double p, StreamRng& rng) {
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("gen_mask_mar: p must lie in (0, 1]");
  ObservationMask mask{ObservationMask::Cells(n, t), p == 1.0 ? MaskPattern::full : MaskPattern::bernoulli};
  for (Index i = 0; i < n; ++i)
    for (Index c = 0; c < t; ++c) mask.cells(i, c) = rng.uniform() < p ? 1 : 0;
  return mask;
}

inline ObservationMask gen_mask_mnar(const BlockShape& shape) {
  shape.validate();
  ObservationMask mask{ObservationMask::Cells::Ones(shape.n, shape.t), MaskPattern::block};
  mask.cells.bottomRightCorner(shape.n - shape.n0, shape.t - shape.t0).setZero();
  return mask;
}

// ---------------------------------------------------------------------------
// Sweep grids

/// alpha_1 and alpha_4 range over 0.01, 0.01 + step, ...; alpha_2 = alpha_3
/// absorbs the remainder and must itself be >= 0.01.
inline std::vector<DgpConfig> alpha_grid(Index n, Index t, double step = 0.11) {
  if (!(step > 0.0)) throw DomainError("alpha grid step must be positive");
  std::vector<double> mesh;
  for (int k = 0;; ++k) {
    const double a = 0.01 + step * k;
    if (a > 1.0 - 0.02 + 1e-12) break;
    mesh.push_back(a);
  }
  std::vector<DgpConfig> out;
  for (double a1 : mesh) {
    for (double a4 : mesh) {
      const double mid = (1.0 - a1 - a4) / 2.0;
      if (mid < 0.01 - 1e-12) continue;
      out.push_back(DgpConfig::alpha_study(n, t, {a1, mid, mid, a4}));
    }
  }
  return out;
}

/// K1 + K2 + K3 + K4 = 15 with K2 = K3, or K2 = K3 + 1 when the remainder
/// 15 - K1 - K4 is odd.
inline std::array<int, 4> rank_split(int k1, int k4, int total = 15) {
  const int rest = total - k1 - k4;
  if (k1 < 1 || k4 < 1 || rest < 2) throw DomainError("rank split leaves no room for K2, K3 >= 1");
  const int k3 = rest / 2;
  return {k1, rest - k3, k3, k4};
}

inline std::vector<DgpConfig> rank_grid(Index n, Index t, int total = 15) {
  std::vector<DgpConfig> out;
  for (int k1 = 1; k1 <= total - 3; ++k1)
    for (int k4 = 1; k1 + k4 <= total - 2; ++k4)
      out.push_back(DgpConfig::rank_study(n, t, rank_split(k1, k4, total)));
  return out;
}

inline std::vector<DgpConfig> sweep_grid(DgpVariant variant, Index n, Index t, double step = 0.11) {
  return variant == DgpVariant::alpha_study ? alpha_grid(n, t, step) : rank_grid(n, t);
}

/// Named corner configurations of the alpha sweep.
inline std::array<double, 4> corner_m1_heavy() { return renormalized({1.0, 0.01, 0.01, 0.01}); }
inline std::array<double, 4> corner_m4_heavy() { return renormalized({0.01, 0.01, 0.01, 1.0}); }
inline std::array<double, 4> corner_side_heavy() { return {0.01, 0.49, 0.49, 0.01}; }
inline std::array<double, 4> corner_balanced() { return {0.25, 0.25, 0.25, 0.25}; }

}  // namespace sidemat
