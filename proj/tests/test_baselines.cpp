#include <gtest/gtest.h>

#include "support.hpp"

using namespace sidemat;
using namespace testing_support;

namespace {

struct Proj {
  Matrix x, z;
  SieveProjectors p;
};

Proj make(Index n, Index t, std::uint64_t seed) {
  StreamRng r(seed, Stream::covariates);
  auto ch = gen_characteristics(n, t, r);
  const SieveSpec s{BasisFamily::polynomial, 2, true, false};
  return {ch.x, ch.z, build_projectors(ch.x, ch.z, s, s)};
}

}  // namespace

TEST(DoubleProjection, JointSpanAndOrthogonal) {
  const Proj f = make(30, 25, 1);
  auto rng = rng_for(2);
  const Matrix in_span = f.p.px.values * gaussian(30, 25, rng) * f.p.pz.values;
  EXPECT_LT(max_abs(double_projection(in_span, f.p.px, f.p.pz) - in_span), 1e-10);
  const Matrix orth = f.p.px.complement() * gaussian(30, 25, rng) * f.p.pz.complement();
  EXPECT_LT(max_abs(double_projection(orth, f.p.px, f.p.pz)), 1e-10);
  const Matrix y = gaussian(30, 25, rng);
  const Matrix once = double_projection(y, f.p.px, f.p.pz);
  EXPECT_LT(max_abs(double_projection(once, f.p.px, f.p.pz) - once), 1e-10);
}

TEST(DoubleProjection, MarVariant) {
  const Proj f = make(30, 25, 3);
  auto rng = rng_for(4);
  const Matrix y = gaussian(30, 25, rng);
  EXPECT_LT(max_abs(double_projection_mar(y, ObservationMask::all(30, 25), 1.0, f.p.px, f.p.pz) -
                    double_projection(y, f.p.px, f.p.pz)),
            1e-12);
  EXPECT_THROW(double_projection_mar(y, ObservationMask::all(30, 25), 0.0, f.p.px, f.p.pz), DomainError);
}

TEST(NuclearNorm, Examples) {
  auto rng = rng_for(5);
  const Matrix y = gaussian(10, 8, rng);
  EXPECT_LT(max_abs(nuclear_norm_full(y, 0.0) - y), 1e-12);
  EXPECT_TRUE(exactly_zero(nuclear_norm_full(y, 2.0 * operator_norm(y))));
  const Matrix z = low_rank(20, 15, 3, rng) + gaussian(20, 15, rng, 0.1);
  const double nu = 3.0;
  const Matrix a = nuclear_norm_full(z, nu);
  EXPECT_LT(max_abs(a - svt(z, nu / 2.0)), 1e-12);
  EXPECT_LE(numerical_rank(singular_values(a)), svt_detail(z, nu / 2.0).rank);
}

TEST(NuclearNorm, MarLimitMatchesFull) {
  auto rng = rng_for(6);
  const Matrix y = low_rank(25, 20, 2, rng) + gaussian(25, 20, rng, 0.2);
  const auto r = nuclear_norm_mar(y, ObservationMask::all(25, 20), 2.0, 1e9, {1e-10, 5000, false});
  EXPECT_LT(max_abs(r.value - nuclear_norm_full(y, 2.0)), 1e-6);
}

TEST(NuclearNorm, AutoPenaltyFormula) {
  const Proj f = make(40, 40, 7);
  auto rng = rng_for(8);
  const Matrix y = gaussian(40, 40, rng);
  const double sigma = estimate_sigma(y, f.p.px, f.p.pz, SigmaRule::spectral_median);
  EXPECT_NEAR(nuclear_norm_auto_penalty(y, f.p.px, f.p.pz), 2.0 * sigma * (2.0 * std::sqrt(40.0)), 1e-12);
}

TEST(Spectral, Examples) {
  auto rng = rng_for(9);
  const Matrix y = gaussian(7, 5, rng);
  EXPECT_LT(max_abs(spectral_oracle(y, 5) - y), 1e-12);
  const Matrix r1 = low_rank(9, 8, 1, rng);
  EXPECT_LT(max_abs(spectral_oracle(r1, 1) - r1), 1e-12);
  const auto est = spectral_estimated(r1, 3);
  EXPECT_EQ(est.rank, 1);
  EXPECT_LT(max_abs(est.value - r1), 1e-12);
}

TEST(Spectral, Deterministic) {
  auto rng = rng_for(10);
  const Matrix y = gaussian(30, 30, rng);
  EXPECT_EQ(spectral_estimated(y, 10).value, spectral_estimated(y, 10).value);
  EXPECT_EQ(spectral_oracle(y, 4), spectral_oracle(y, 4));
}

TEST(MnarSpectral, NoiselessRecoveryAndZero) {
  auto rng = rng_for(11);
  const Matrix m = low_rank(50, 40, 3, rng);
  const BlockShape shape{50, 40, 25, 20};
  const auto e = mnar_spectral(m, shape, 3);
  const Matrix diff = (e.m_hat - m).bottomRightCorner(25, 20);
  EXPECT_LE(diff.norm() / m.bottomRightCorner(25, 20).norm(), 1e-6);
  const auto a = mnar_spectral(m, shape, std::nullopt);
  EXPECT_EQ(a.rank, 3);
  EXPECT_TRUE(a.rank_auto);
  EXPECT_TRUE(exactly_zero(mnar_spectral(Matrix::Zero(50, 40), shape, 2).m_hat));
  EXPECT_TRUE(exactly_zero(mnar_spectral(Matrix::Zero(50, 40), shape, std::nullopt).m_hat));
  EXPECT_THROW(mnar_spectral(m, shape, 21), DomainError);
}

TEST(MnarSpectral, BeatsOursWhenLatentFactorsDominate) {
  // Sign of the comparison at the latent-heavy corner, recorded rather than
  // required to be large.
  DgpConfig cfg = DgpConfig::alpha_study(160, 160, corner_m4_heavy());
  cfg.seed = 12;
  const SimulatedPanel p = gen_panel(cfg);
  const BlockShape shape{160, 160, 80, 80};
  const ObservationMask target = missing_block(shape);
  const Index k = numerical_rank(singular_values(p.m));
  const double spec = amse(mnar_spectral(p.y, shape, k).m_hat, p.m, target);
  MnarOptions opts;
  opts.rank = k;
  opts.rank_cap = RankCap::noise_floor;
  const SieveSpec s{BasisFamily::polynomial, 5, true, false};
  const double ours = amse(estimate_mnar(p.y, shape, p.x, p.z, s, s, opts).m_hat, p.m, target);
  RecordProperty("spectral_amse", std::to_string(spec));
  RecordProperty("ours_amse", std::to_string(ours));
  EXPECT_LT(std::max(spec, ours) / std::min(spec, ours), 3.0);
}
