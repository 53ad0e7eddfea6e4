#include <cmath>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace sidemat;
using namespace testing_support;

namespace {

const SieveSpec kSieve{BasisFamily::polynomial, 3, true, false};

struct Fixture {
  Matrix x, z;
  SieveProjectors proj;
};

Fixture make_fixture(Index n, Index t, std::uint64_t seed, const SieveSpec& s = kSieve) {
  StreamRng rng(seed, Stream::covariates);
  auto ch = gen_characteristics(n, t, rng);
  Fixture f{ch.x, ch.z, {}};
  f.proj = build_projectors(f.x, f.z, s, s);
  return f;
}

}  // namespace

TEST(EstimateSigma, PureNoise) {
  const Fixture f = make_fixture(200, 200, 1);
  auto rng = rng_for(2);
  double mean = 0.0;
  const int reps = 50;
  for (int r = 0; r < reps; ++r) mean += estimate_sigma(gaussian(200, 200, rng, 0.7), f.proj.px, f.proj.pz);
  EXPECT_NEAR(mean / reps, 0.7, 0.07);
}

TEST(EstimateSigma, SpectralRuleOnPureNoise) {
  const Fixture f = make_fixture(200, 200, 1);
  auto rng = rng_for(3);
  EXPECT_NEAR(estimate_sigma_spectral(gaussian(200, 200, rng, 0.7), f.proj.px, f.proj.pz), 0.7, 0.07);
}

TEST(EstimateSigma, SpectralRuleIgnoresFewStrongDirections) {
  const Fixture f = make_fixture(150, 150, 4);
  auto rng = rng_for(5);
  const Matrix y = 5.0 * low_rank(150, 150, 3, rng) + gaussian(150, 150, rng, 0.5);
  EXPECT_NEAR(estimate_sigma_spectral(y, f.proj.px, f.proj.pz), 0.5, 0.06);
  EXPECT_GT(estimate_sigma(y, f.proj.px, f.proj.pz), 1.0);
}

TEST(EstimateSigma, NoiselessSieveSignalAndZero) {
  const Fixture f = make_fixture(60, 50, 6);
  auto rng = rng_for(7);
  const Matrix y = sieve_factor(f.x, 3, 4, rng) * sieve_factor(f.z, 3, 4, rng).transpose();
  EXPECT_LT(estimate_sigma(y, f.proj.px, f.proj.pz), 1e-10 * max_abs(y));
  EXPECT_EQ(estimate_sigma(Matrix::Zero(60, 50), f.proj.px, f.proj.pz), 0.0);
  EXPECT_EQ(estimate_sigma_spectral(Matrix::Zero(60, 50), f.proj.px, f.proj.pz), 0.0);
}

TEST(EstimateSigma, DegenerateDenominator) {
  const Projector full{Matrix::Identity(5, 5), 5};
  const Projector half = projector(Matrix(Matrix::Identity(5, 2)));
  EXPECT_THROW(estimate_sigma(Matrix::Ones(5, 5), full, half), DimensionError);
}

TEST(ResolvePenalties, AutoFormula) {
  const Fixture f = make_fixture(80, 60, 8);
  PenaltyPlan plan;
  plan.sigma = 0.5;
  const ResolvedPenalties r = resolve_penalties(plan, Matrix::Zero(80, 60), f.proj.px, f.proj.pz);
  const double qx = static_cast<double>(f.proj.px.rank), qz = static_cast<double>(f.proj.pz.rank);
  EXPECT_NEAR(r.nu2, 2.0 * 0.5 * (std::sqrt(60.0) + std::sqrt(qx)), 1e-12);
  EXPECT_NEAR(r.nu3, 2.0 * 0.5 * (std::sqrt(80.0) + std::sqrt(qz)), 1e-12);
  EXPECT_NEAR(r.nu4, 2.0 * 0.5 * (std::sqrt(80.0) + std::sqrt(60.0)), 1e-12);
  EXPECT_FALSE(r.explicit_values);
}

TEST(ResolvePenalties, ValidationAndExplicitValues) {
  const Fixture f = make_fixture(40, 40, 9);
  PenaltyPlan bad;
  bad.c3 = -1.0;
  EXPECT_THROW(resolve_penalties(bad, Matrix::Zero(40, 40), f.proj.px, f.proj.pz), DomainError);
  EXPECT_THROW(resolve_penalties(PenaltyPlan::fixed(1, -2, 3), Matrix::Zero(40, 40), f.proj.px, f.proj.pz),
               DomainError);
  const auto r = resolve_penalties(PenaltyPlan::fixed(1, 2, 3), Matrix::Zero(40, 40), f.proj.px, f.proj.pz);
  EXPECT_TRUE(r.explicit_values);
  EXPECT_EQ(r.nu3, 2.0);
}

TEST(EstimateFull, NoiselessSieveSpanIsExact) {
  const Fixture f = make_fixture(70, 60, 10);
  auto rng = rng_for(11);
  const Matrix y = sieve_factor(f.x, 3, 5, rng) * sieve_factor(f.z, 3, 5, rng).transpose();
  const ComponentEstimate e = estimate_full(y, f.x, f.z, kSieve, kSieve);
  EXPECT_LE((e.m_hat - y).norm() / y.norm(), 1e-8);
  // sigma_hat is at roundoff level here, so the off-span blocks are only
  // zero up to roundoff.
  EXPECT_LE(max_abs(e.m2_hat), 1e-10 * max_abs(y));
  EXPECT_LE(max_abs(e.m3_hat), 1e-10 * max_abs(y));
  EXPECT_LE(max_abs(e.m4_hat), 1e-10 * max_abs(y));
}

TEST(EstimateFull, ZeroInput) {
  const Fixture f = make_fixture(40, 30, 12);
  const ComponentEstimate e = estimate_full(Matrix::Zero(40, 30), f.x, f.z, kSieve, kSieve);
  for (const Matrix* m : {&e.m1_hat, &e.m2_hat, &e.m3_hat, &e.m4_hat, &e.m_hat}) EXPECT_TRUE(exactly_zero(*m));
}

TEST(EstimateFull, SumOfComponents) {
  const Fixture f = make_fixture(50, 45, 13);
  auto rng = rng_for(14);
  const Matrix y = gaussian(50, 45, rng) + low_rank(50, 45, 2, rng);
  const ComponentEstimate e = estimate_full(y, f.proj.px, f.proj.pz);
  EXPECT_EQ(e.m_hat, e.m1_hat + e.m2_hat + e.m3_hat + e.m4_hat);
  EXPECT_TRUE(e.m_hat.allFinite());
}

TEST(EstimateFull, CompletenessWithoutPenalty) {
  const Fixture f = make_fixture(40, 35, 15);
  auto rng = rng_for(16);
  const Matrix y = gaussian(40, 35, rng);
  const ComponentEstimate e = estimate_full(y, f.proj.px, f.proj.pz, PenaltyPlan::unpenalized());
  EXPECT_LE((e.m_hat - y).norm() / y.norm(), 1e-10);
}

TEST(EstimateFull, BlockInputsAreOrthogonal) {
  const Fixture f = make_fixture(40, 35, 17);
  auto rng = rng_for(18);
  const Matrix y = gaussian(40, 35, rng);
  const Matrix& px = f.proj.px.values;
  const Matrix& pz = f.proj.pz.values;
  const Matrix b2 = px * y * f.proj.pz.complement();
  const Matrix b3 = f.proj.px.complement() * y * pz;
  EXPECT_LT(max_abs(b2 * pz), 1e-8);
  EXPECT_LT(max_abs(px * b3), 1e-8);
}

TEST(EstimateFull, ZeroComponentWhenBelowThreshold) {
  const Fixture f = make_fixture(60, 60, 19);
  auto rng = rng_for(20);
  const Matrix y = gaussian(60, 60, rng, 0.3);
  const Matrix b2 = f.proj.px.values * y * f.proj.pz.complement();
  const double s = operator_norm(b2);
  // nu2 / 2 just above the block's operator norm.
  const ComponentEstimate e = estimate_full(y, f.proj.px, f.proj.pz, PenaltyPlan::fixed(2.0 * s * 1.0001, 0, 0));
  EXPECT_TRUE(exactly_zero(e.m2_hat));
  EXPECT_EQ(e.ranks[0], 0);
}

TEST(EstimateFull, RankMonotoneInPenalty) {
  const Fixture f = make_fixture(60, 60, 21);
  auto rng = rng_for(22);
  const Matrix y = low_rank(60, 60, 4, rng) + gaussian(60, 60, rng, 0.5);
  Index prev = 1000;
  for (double nu = 0.0; nu < 40.0; nu += 2.0) {
    const auto e = estimate_full(y, f.proj.px, f.proj.pz, PenaltyPlan::fixed(nu, nu, nu));
    EXPECT_LE(e.ranks[2], prev);
    prev = e.ranks[2];
  }
}

TEST(EstimateFull, ScaleEquivariance) {
  const Fixture f = make_fixture(50, 50, 23);
  auto rng = rng_for(24);
  const Matrix y = low_rank(50, 50, 3, rng) + gaussian(50, 50, rng, 0.5);
  PenaltyPlan plan;
  plan.sigma = 0.5;
  const double c = 3.5;
  const auto a = estimate_full(y, f.proj.px, f.proj.pz, plan);
  const auto b = estimate_full(c * y, f.proj.px, f.proj.pz, plan.scaled(c));
  EXPECT_LT((b.m_hat - c * a.m_hat).norm() / b.m_hat.norm(), 1e-10);
  // The automatic rule is itself scale equivariant.
  const auto a2 = estimate_full(y, f.proj.px, f.proj.pz);
  const auto b2 = estimate_full(c * y, f.proj.px, f.proj.pz);
  EXPECT_LT((b2.m_hat - c * a2.m_hat).norm() / b2.m_hat.norm(), 1e-8);
}

TEST(EstimateFull, Errors) {
  const Fixture f = make_fixture(30, 30, 25);
  EXPECT_THROW(estimate_full(Matrix::Zero(31, 30), f.proj.px, f.proj.pz), DimensionError);
  EXPECT_THROW(estimate_full(Matrix::Zero(30, 30), f.x.topRows(29), f.z, kSieve, kSieve), DimensionError);
  const SieveSpec wide{BasisFamily::polynomial, 8, true, false};
  EXPECT_THROW(estimate_full(Matrix::Zero(30, 30), f.x, f.z, wide, wide), DimensionError);  // q = 33
  Matrix y = Matrix::Zero(30, 30);
  y(3, 3) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(estimate_full(y, f.proj.px, f.proj.pz), DomainError);
}

TEST(EstimateFull, ReportsDiagnostics) {
  const Fixture f = make_fixture(80, 70, 26);
  auto rng = rng_for(27);
  const auto e = estimate_full(gaussian(80, 70, rng), f.x, f.z, kSieve, kSieve);
  EXPECT_EQ(e.rank_x, 13);
  EXPECT_EQ(e.rank_z, 13);
  EXPECT_GT(e.gram_x.lambda_min, 0.0);
  EXPECT_GT(e.penalties.sigma_hat, 0.0);
}

TEST(EstimateFull, BeatsNuclearNormNearPureFirstComponent) {
  DgpConfig cfg = DgpConfig::alpha_study(120, 120, corner_m1_heavy());
  const SieveSpec s{BasisFamily::polynomial, 5, true, false};
  double ours = 0.0, nn = 0.0;
  for (int r = 0; r < 3; ++r) {
    cfg.seed = derive_seed(31, 0, static_cast<std::uint64_t>(r));
    const SimulatedPanel p = gen_panel(cfg);
    const auto proj = build_projectors(p.x, p.z, s, s);
    ours += (estimate_full(p.y, proj.px, proj.pz).m_hat - p.m).squaredNorm();
    nn += (nuclear_norm_full(p.y, nuclear_norm_auto_penalty(p.y, proj.px, proj.pz)) - p.m).squaredNorm();
  }
  EXPECT_GT(relative_improvement(nn, ours), 3.0);
}
