#include <cmath>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace sidemat;
using namespace testing_support;

TEST(Amse, TargetSubset) {
  const Matrix truth = Matrix::Zero(3, 3);
  Matrix est = Matrix::Zero(3, 3);
  est(0, 0) = 1.0;
  est(2, 1) = 3.0;
  est(1, 1) = 100.0;
  ObservationMask target{ObservationMask::Cells::Zero(3, 3), MaskPattern::general};
  target.cells(0, 0) = 1;
  target.cells(2, 1) = 1;
  EXPECT_DOUBLE_EQ(amse(est, truth, target), 5.0);
  target.cells.setZero();
  EXPECT_THROW(amse(est, truth, target), DomainError);
}

TEST(Amse, ConstantShift) {
  const Matrix truth = Matrix::Constant(4, 5, 2.0);
  EXPECT_DOUBLE_EQ(amse(truth.array() + 0.5, truth), 0.25);
  EXPECT_THROW(amse(Matrix::Zero(2, 2), Matrix::Zero(2, 3)), DimensionError);
}

TEST(Amse, Additivity) {
  auto rng = rng_for(1);
  for (int c = 0; c < 20; ++c) {
    const Matrix truth = gaussian(6, 7, rng);
    const Matrix est = gaussian(6, 7, rng);
    ObservationMask a{ObservationMask::Cells::Zero(6, 7), MaskPattern::general};
    ObservationMask b = a;
    for (Index t = 0; t < 7; ++t)
      for (Index i = 0; i < 6; ++i) ((i + t) % 3 == 0 ? a : b).cells(i, t) = 1;
    const double na = static_cast<double>(a.count()), nb = static_cast<double>(b.count());
    EXPECT_NEAR(amse(est, truth), (na * amse(est, truth, a) + nb * amse(est, truth, b)) / (na + nb), 1e-12);
  }
}

TEST(AveragedTargets, CancellingErrors) {
  const BlockShape shape{3, 3, 1, 1};
  Matrix est = Matrix::Zero(3, 3);
  est.bottomRightCorner(2, 2) << 1, -1, 1, -1;
  const auto r = averaged_targets(est, Matrix::Zero(3, 3), shape);
  EXPECT_DOUBLE_EQ(r.per_year, 1.0);
  EXPECT_DOUBLE_EQ(r.overall, 0.0);
}

TEST(MissingBlock, Cells) {
  const auto m = missing_block({5, 4, 3, 1});
  EXPECT_EQ(m.count(), 6);
  EXPECT_TRUE(m.observed(4, 3));
  EXPECT_FALSE(m.observed(2, 3));
}

TEST(RelativeImprovement, Examples) {
  EXPECT_DOUBLE_EQ(relative_improvement(3.0, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(relative_improvement(1.0, 1.0), 0.0);
  EXPECT_THROW(relative_improvement(1.0, 0.0), DomainError);
}

namespace {

ExperimentSpec tiny_full() {
  ExperimentSpec s;
  s.name = "tiny";
  s.grid = {DgpConfig::alpha_study(60, 50, {1.0, 0.0, 0.0, 0.0}),
            DgpConfig::alpha_study(60, 50, {0.25, 0.25, 0.25, 0.25})};
  s.methods = default_methods(Setting::full);
  s.reps = 2;
  s.degree = 4;
  return s;
}

}  // namespace

TEST(RunExperiment, NoiselessSieveOnlyIsRecovered) {
  ExperimentSpec s = tiny_full();
  s.grid = {DgpConfig::alpha_study(80, 80, {1.0, 0.0, 0.0, 0.0})};
  s.grid[0].noise_sd = 0.0;
  s.reps = 1;
  s.degree = 5;
  s.methods = {Method::ours_full};
  const auto rec = run_experiment(s);
  ASSERT_EQ(rec.size(), 1u);
  EXPECT_LE(rec[0].amse, 1e-10);
}

TEST(RunExperiment, RecordLayout) {
  const ExperimentSpec s = tiny_full();
  const auto rec = run_experiment(s);
  ASSERT_EQ(rec.size(), s.grid.size() * s.methods.size());
  for (const auto& r : rec) {
    EXPECT_EQ(r.reps, 2);
    EXPECT_EQ(r.rep_errors.size(), 2u);
    EXPECT_EQ(r.failures, 0);
    EXPECT_TRUE(std::isfinite(r.amse));
    EXPECT_DOUBLE_EQ(find_amse(rec, r.config_id, r.method), r.amse);
  }
  EXPECT_TRUE(std::isnan(find_amse(rec, 7, Method::ours_full)));
}

TEST(RunExperiment, ReproducibleAndThreadIndependent) {
  ExperimentSpec s = tiny_full();
  const auto a = run_experiment(s);
  const auto b = run_experiment(s);
  s.jobs = 3;
  const auto c = run_experiment(s);
  ASSERT_EQ(a.size(), c.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].rep_errors, b[i].rep_errors);
    EXPECT_EQ(a[i].rep_errors, c[i].rep_errors);
    EXPECT_EQ(a[i].method, c[i].method);
  }
  s.seed += 1;
  EXPECT_NE(run_experiment(s)[0].rep_errors, a[0].rep_errors);
}

TEST(RunExperiment, PairedPanelsAcrossMethods) {
  ExperimentSpec s = tiny_full();
  const SimulatedPanel p0 = experiment_panel(s, 1, 1);
  const SimulatedPanel p1 = experiment_panel(s, 1, 1);
  EXPECT_EQ(p0.y, p1.y);
  EXPECT_NE(experiment_panel(s, 1, 0).y, p0.y);
}

TEST(RunExperiment, MarAndMnarSettings) {
  ExperimentSpec s = tiny_full();
  s.grid.resize(1);
  s.reps = 1;
  s.setting = Setting::mar;
  s.methods = default_methods(Setting::mar);
  for (const auto& r : run_experiment(s)) EXPECT_TRUE(std::isfinite(r.amse)) << to_string(r.method);
  s.setting = Setting::mnar;
  s.grid = {DgpConfig::alpha_study(100, 100, {1.0, 0.0, 0.0, 0.0})};
  s.methods = default_methods(Setting::mnar);
  const auto rec = run_experiment(s);
  ASSERT_EQ(rec.size(), 2u);
  for (const auto& r : rec) EXPECT_EQ(r.failures, 0) << (r.messages.empty() ? "" : r.messages[0]);
}

TEST(RunExperiment, RejectsInvalidSpecs) {
  ExperimentSpec s = tiny_full();
  s.methods = {Method::ours_mar};
  EXPECT_THROW(run_experiment(s), DomainError);
  s = tiny_full();
  s.reps = 0;
  EXPECT_THROW(run_experiment(s), DomainError);
  s = tiny_full();
  s.grid[0].n = 10;
  EXPECT_THROW(run_experiment(s), DomainError);
  s = tiny_full();
  s.grid.clear();
  EXPECT_THROW(run_experiment(s), DomainError);
}

TEST(Presets, Shapes) {
  for (const auto& name : preset_names()) {
    const ExperimentSpec s = preset(name);
    EXPECT_NO_THROW(s.validate()) << name;
  }
  const ExperimentSpec desk = preset("alpha-full-desk");
  EXPECT_EQ(desk.grid.size(), 4u);
  EXPECT_EQ(desk.methods.size(), 5u);
  EXPECT_EQ(preset("alpha-full").grid.size(), alpha_grid(200, 200).size());
  EXPECT_THROW(preset("nope"), DomainError);
}
