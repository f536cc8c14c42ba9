#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "noisesphere/error.hpp"
#include "noisesphere/staticfit.hpp"

using namespace noisesphere;

namespace {

TriMesh small_sphere() {
  TriMesh m = make_icosphere(2);
  m.colors.resize(m.vertices.size());
  for (std::size_t i = 0; i < m.vertices.size(); ++i) m.colors[i] = (m.vertices[i] * 0.5).array() + 0.5;
  normalize_mesh(m, 0.8);
  return m;
}

FitConfig small_config(int iterations) {
  FitConfig c;
  c.iterations = iterations;
  c.learning_rate = 0.1;
  c.seed = 5;
  c.views.width = 16;
  c.views.height = 16;
  c.render.num_samples = 48;
  return c;
}

Grid4D small_grid() { return Grid4D({12, 12, 12, 2}, Box{}, 50.0, -4.0); }

}  // namespace

TEST(Adam, FirstStepMovesByLearningRate) {
  Grid4D g({2, 2, 2, 1}, Box{}, 1.0, 0.0);
  Adam adam(g.parameter_count(), 0.25);
  std::vector<double> grad(g.parameter_count(), 0.0);
  grad[0] = 3.0;
  grad[5] = -1e-3;
  adam.step(g, grad);
  EXPECT_NEAR(g.parameter(0), -0.25, 1e-7);
  EXPECT_NEAR(g.parameter(5), 0.25, 1e-4);
  EXPECT_EQ(g.parameter(1), 0.0);
  EXPECT_EQ(adam.steps(), 1);
  EXPECT_THROW(adam.step(g, std::vector<double>(3, 0.0)), ShapeError);
}

TEST(FitStatic, ZeroIterationsLeaveGridUnchanged) {
  const Grid4D g = small_grid();
  const FitResult r = fit_static(small_sphere(), g, small_config(0));
  EXPECT_TRUE(r.history.empty());
  EXPECT_TRUE(std::equal(r.grid.parameters().begin(), r.grid.parameters().end(), g.parameters().begin()));
}

TEST(FitStatic, DeterministicUnderFixedSeed) {
  const TriMesh mesh = small_sphere();
  FitConfig cfg = small_config(12);
  cfg.final_lr_fraction = 0.5;
  cfg.time_coupling = 0.5;
  const FitResult a = fit_static(mesh, small_grid(), cfg);
  const FitResult b = fit_static(mesh, small_grid(), cfg);
  ASSERT_EQ(a.history.size(), 12u);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].loss, b.history[i].loss);
    EXPECT_EQ(a.history[i].azimuth, b.history[i].azimuth);
  }
  EXPECT_TRUE(std::equal(a.grid.parameters().begin(), a.grid.parameters().end(), b.grid.parameters().begin()));
  cfg.seed = 6;
  const FitResult c = fit_static(mesh, small_grid(), cfg);
  EXPECT_NE(a.history[0].azimuth, c.history[0].azimuth);
}

TEST(FitStatic, LossDecreases) {
  FitConfig cfg = small_config(300);
  cfg.final_lr_fraction = 0.1;
  cfg.time_coupling = 1.0;
  int calls = 0;
  const FitResult r = fit_static(small_sphere(), Grid4D({20, 20, 20, 2}, Box{}, 50.0, -4.0), cfg, [&](const FitRecord&, const Grid4D&) { ++calls; });
  EXPECT_EQ(calls, 300);
  const auto smooth = smoothed_loss(r.history, 50);
  EXPECT_LT(smooth.back(), 0.5 * smooth[49]);
  for (const FitRecord& rec : r.history) {
    EXPECT_GE(rec.elevation, cfg.views.elevation_min);
    EXPECT_LE(rec.elevation, cfg.views.elevation_max);
    EXPECT_GE(rec.time, 0.0);
    EXPECT_LE(rec.time, 1.0);
  }
}

TEST(FitStatic, RejectsBadSettings) {
  const TriMesh mesh = small_sphere();
  FitConfig cfg = small_config(1);
  cfg.final_lr_fraction = 0.0;
  EXPECT_THROW(fit_static(mesh, small_grid(), cfg), ConfigError);
  cfg = small_config(1);
  cfg.time_coupling = 1.5;
  EXPECT_THROW(fit_static(mesh, small_grid(), cfg), ConfigError);
  cfg = small_config(-1);
  EXPECT_THROW(fit_static(mesh, small_grid(), cfg), ConfigError);
  EXPECT_THROW(fit_static(TriMesh{}, small_grid(), small_config(1)), ConfigError);
}

TEST(FitStatic, DivergenceIsReported) {
  FitConfig cfg = small_config(3);
  cfg.learning_rate = std::numeric_limits<double>::infinity();
  EXPECT_THROW(fit_static(small_sphere(), small_grid(), cfg), NumericError);
}

TEST(TimeCoupling, ShrinksTowardLayerMean) {
  Grid4D g({3, 2, 2, 3}, Box{}, 1.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> d;
  for (std::size_t i = 0; i < g.parameter_count(); ++i) g.set_parameter(i, d(rng));
  const Grid4D before = g;
  const std::size_t layer = g.parameter_count() / 3;
  apply_time_coupling(g, 0.25);
  for (std::size_t i = 0; i < layer; ++i) {
    const double mean = (before.parameter(i) + before.parameter(layer + i) + before.parameter(2 * layer + i)) / 3.0;
    double after_mean = 0.0;
    for (int t = 0; t < 3; ++t) {
      const double b = before.parameter(t * layer + i);
      EXPECT_NEAR(g.parameter(t * layer + i) - mean, 0.75 * (b - mean), 1e-12);
      after_mean += g.parameter(t * layer + i) / 3.0;
    }
    EXPECT_NEAR(after_mean, mean, 1e-12);
  }
  apply_time_coupling(g, 1.0);
  for (std::size_t i = 0; i < layer; ++i) {
    EXPECT_EQ(g.parameter(i), g.parameter(layer + i));
    EXPECT_EQ(g.parameter(i), g.parameter(2 * layer + i));
  }
  EXPECT_THROW(apply_time_coupling(g, -0.1), ConfigError);
}

TEST(SmoothedLoss, TrailingMean) {
  std::vector<FitRecord> h(5);
  for (int i = 0; i < 5; ++i) h[i].loss = i + 1.0;
  const auto s = smoothed_loss(h, 2);
  EXPECT_EQ(s, (std::vector<double>{1.0, 1.5, 2.5, 3.5, 4.5}));
}
