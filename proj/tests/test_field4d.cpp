#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "noisesphere/error.hpp"
#include "noisesphere/field4d.hpp"
#include "noisesphere/parallel.hpp"

using namespace noisesphere;

namespace {

double lerp(double a, double b, double f) { return a + f * (b - a); }

// Nested one-axis interpolation, written independently of the grid code.
double oracle_channel(const Grid4D& g, const Vec3& p, double t, int ch) {
  const auto& s = g.shape();
  const Vec3 rel = (p - g.box().lo).cwiseQuotient(g.box().hi - g.box().lo);
  auto split = [](double u, int n, int& i0, double& f) {
    u *= (n - 1);
    i0 = std::min(static_cast<int>(std::floor(u)), n - 2);
    if (n == 1) i0 = 0;
    f = n == 1 ? 0.0 : u - i0;
  };
  int ix, iy, iz, it;
  double fx, fy, fz, ft;
  split(rel.x(), s.nx, ix, fx);
  split(rel.y(), s.ny, iy, fy);
  split(rel.z(), s.nz, iz, fz);
  split(t, s.nt, it, ft);
  auto node = [&](int dx, int dy, int dz, int dt) {
    const int tt = s.nt == 1 ? 0 : it + dt;
    return g.activated(g.node_index(ix + dx, iy + dy, iz + dz, tt), ch);
  };
  double by_t[2];
  for (int dt = 0; dt < 2; ++dt) {
    double by_z[2];
    for (int dz = 0; dz < 2; ++dz) {
      const double y0 = lerp(node(0, 0, dz, dt), node(1, 0, dz, dt), fx);
      const double y1 = lerp(node(0, 1, dz, dt), node(1, 1, dz, dt), fx);
      by_z[dz] = lerp(y0, y1, fy);
    }
    by_t[dt] = lerp(by_z[0], by_z[1], fz);
  }
  return lerp(by_t[0], by_t[1], ft);
}

Grid4D random_grid(GridShape shape, std::uint64_t seed, double density_scale = 5.0) {
  Grid4D g(shape, Box{}, density_scale);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::vector<double> p(g.parameter_count());
  for (double& x : p) x = u(rng);
  g.set_parameters(p);
  return g;
}

Camera test_camera(double az, double el, int n) {
  return camera_from_view(az, el, 3.0, 25.0 * std::numbers::pi / 180.0, n, n, 1.5, 4.5);
}

PixelGradients random_upstream(std::size_t pixels, std::uint64_t seed, bool normals) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PixelGradients g;
  g.rgb.resize(3 * pixels);
  g.depth.resize(pixels);
  g.alpha.resize(pixels);
  for (double& x : g.rgb) x = u(rng);
  for (double& x : g.depth) x = u(rng);
  for (double& x : g.alpha) x = u(rng);
  if (normals) {
    g.normal.resize(3 * pixels);
    for (double& x : g.normal) x = u(rng);
  }
  return g;
}

double weighted_sum(const Frame& f, const PixelGradients& g) {
  double s = 0.0;
  for (std::size_t k = 0; k < f.rgb.size(); ++k) s += f.rgb[k] * g.rgb[k];
  for (std::size_t k = 0; k < f.depth.size(); ++k) s += f.depth[k] * g.depth[k] + f.alpha[k] * g.alpha[k];
  for (std::size_t k = 0; k < g.normal.size(); ++k) s += f.normal[k] * g.normal[k];
  return s;
}

}  // namespace

TEST(Activations, SoftplusAndSigmoid) {
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
  EXPECT_EQ(softplus(-800.0), 0.0);
  EXPECT_NEAR(softplus(40.0), 40.0, 1e-12);
  EXPECT_NEAR(sigmoid(0.0), 0.5, 1e-15);
  EXPECT_NEAR(sigmoid(3.0) + sigmoid(-3.0), 1.0, 1e-15);
}

TEST(Grid4D, InterpolationMatchesNestedLerpOracle) {
  const Grid4D g = random_grid({5, 4, 6, 3}, 1);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-0.5, 0.5), ut(0.0, 1.0);
  for (int k = 0; k < 2000; ++k) {
    const Vec3 p(u(rng), u(rng), u(rng));
    const double t = ut(rng);
    const FieldSample s = g.sample(p, t);
    EXPECT_NEAR(s.density, oracle_channel(g, p, t, 0), 1e-12);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(s.rgb[c], oracle_channel(g, p, t, c + 1), 1e-12);
    EXPECT_NEAR(g.density(p, t), s.density, 1e-12);
  }
}

TEST(Grid4D, NodesReproduceActivatedValuesAndOutsideIsZero) {
  const Grid4D g = random_grid({3, 3, 3, 2}, 3);
  const Vec3 p = g.node_position(1, 2, 0);
  EXPECT_NEAR(g.sample(p, 1.0).density, g.activated(g.node_index(1, 2, 0, 1), 0), 1e-12);
  EXPECT_EQ(g.sample(Vec3(0.6, 0, 0), 0.5).density, 0.0);
  EXPECT_EQ(g.sample(Vec3(0, 0, -0.51), 0.5).rgb, Vec3::Zero());
}

TEST(Grid4D, SingleTimeLayer) {
  const Grid4D g = random_grid({3, 3, 3, 1}, 4);
  const Vec3 p(0.1, -0.2, 0.3);
  EXPECT_EQ(g.sample(p, 0.0).density, g.sample(p, 0.7).density);
  EXPECT_DOUBLE_EQ(g.node_time(0), 0.0);
}

TEST(Grid4D, RejectsBadShapes) {
  EXPECT_THROW(Grid4D({1, 4, 4, 2}, Box{}), ConfigError);
  EXPECT_THROW(Grid4D({4, 4, 4, 0}, Box{}), ConfigError);
  EXPECT_THROW(Grid4D({4, 4, 4, 2}, Box{Vec3::Zero(), Vec3::Zero()}), ConfigError);
}

TEST(Grid4D, CheckpointRoundTrip) {
  const Grid4D g = random_grid({4, 3, 5, 2}, 5, 7.5);
  const auto ts = g.to_tensors();
  const Grid4D back = Grid4D::from_tensors(ts);
  EXPECT_TRUE(back.shape() == g.shape());
  EXPECT_EQ(back.density_scale(), 7.5);
  EXPECT_TRUE(std::equal(back.parameters().begin(), back.parameters().end(), g.parameters().begin()));
  auto broken = ts;
  broken[1].dims[0] = 3;
  EXPECT_ANY_THROW(Grid4D::from_tensors(broken));
  EXPECT_THROW(Grid4D::from_tensors(std::vector<Tensor>{ts[0]}), IoError);
}

TEST(Grid4D, ParameterGradientChainsActivations) {
  const Grid4D g = random_grid({2, 2, 2, 1}, 6);
  ActivatedGradient act(g.parameter_count(), 1.0);
  const auto pg = g.to_parameter_gradient(act);
  for (std::size_t i = 0; i < g.parameter_count(); ++i) {
    const double x = g.parameter(i);
    const double h = 1e-6;
    const double f = (i % 4 == 0) ? g.density_scale() * (softplus(x + h) - softplus(x - h)) / (2 * h)
                                  : (sigmoid(x + h) - sigmoid(x - h)) / (2 * h);
    EXPECT_NEAR(pg[i], f, 1e-7);
  }
}

TEST(Render, EmptyFieldShowsBackground) {
  Grid4D g({4, 4, 4, 2}, Box{}, 10.0, -800.0);
  RenderConfig rc;
  rc.background = Vec3(0.2, 0.3, 0.4);
  const Camera cam = test_camera(0.3, 0.2, 8);
  const Frame f = render_frame(g, cam, 0.5, rc);
  for (std::size_t p = 0; p < f.pixel_count(); ++p) {
    EXPECT_EQ(f.alpha[p], 0.0);
    EXPECT_EQ(f.depth[p], cam.far);
    EXPECT_EQ(f.rgb[3 * p], 0.2);
    EXPECT_EQ(f.rgb[3 * p + 2], 0.4);
    EXPECT_EQ(f.normal[3 * p], 0.0);
  }
}

TEST(Render, OpaqueSlabFrontAndColor) {
  const int n = 41;  // node spacing 0.025
  Grid4D g({n, n, n, 2}, Box{}, 1e5, -800.0);
  std::vector<double> p(g.parameters().begin(), g.parameters().end());
  for (int t = 0; t < 2; ++t) {
    for (int z = 0; z < n; ++z) {
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          const std::size_t k = g.node_index(x, y, z, t) * 4;
          if (g.node_position(x, y, z).x() <= 0.1 + 1e-12) p[k] = 10.0;
          p[k + 1] = 20.0;
          p[k + 2] = -20.0;
          p[k + 3] = -20.0;
        }
      }
    }
  }
  g.set_parameters(p);
  RenderConfig rc;
  const Camera cam = camera_from_view(0.0, 0.0, 3.0, 0.3, 9, 9, 1.5, 4.5);
  const Frame f = render_frame(g, cam, 0.25, rc);
  const std::size_t c = 4 * 9 + 4;
  EXPECT_NEAR(f.rgb[3 * c], 1.0, 1e-6);
  EXPECT_NEAR(f.rgb[3 * c + 1], 0.0, 1e-6);
  EXPECT_NEAR(f.alpha[c], 1.0, 1e-9);
  // density support ends at the first empty node plane, x = 0.125
  EXPECT_NEAR(f.depth[c], 3.0 - 0.125, rc.step(cam));
  EXPECT_GT(f.normal[3 * c], 0.99);
}

TEST(Render, OutputsStayInPhysicalRange) {
  const Grid4D g = random_grid({6, 6, 6, 3}, 7, 20.0);
  RenderConfig rc;
  const Camera cam = test_camera(1.1, -0.3, 16);
  const Frame f = render_frame(g, cam, 0.4, rc);
  for (std::size_t p = 0; p < f.pixel_count(); ++p) {
    EXPECT_GE(f.alpha[p], 0.0);
    EXPECT_LE(f.alpha[p], 1.0);
    EXPECT_GE(f.depth[p], cam.near);
    EXPECT_LE(f.depth[p], cam.far);
    for (int c = 0; c < 3; ++c) {
      EXPECT_GE(f.rgb[3 * p + c], 0.0);
      EXPECT_LE(f.rgb[3 * p + c], 1.0);
    }
    const Vec3 nrm(f.normal[3 * p], f.normal[3 * p + 1], f.normal[3 * p + 2]);
    EXPECT_LE(nrm.norm(), f.alpha[p] + 1e-12);
  }
}

TEST(Render, RejectsBadTimes) {
  const Grid4D g = random_grid({2, 2, 2, 2}, 8);
  RenderConfig rc;
  EXPECT_THROW(render_frame(g, test_camera(0, 0, 4), 1.01, rc), DomainError);
  EXPECT_THROW(render_frame(g, test_camera(0, 0, 4), -0.1, rc), DomainError);
}

TEST(Backprop, MatchesCentralFiniteDifferences) {
  Grid4D g = random_grid({4, 4, 4, 2}, 9);
  RenderConfig rc;
  rc.termination_eps = 0.0;
  rc.num_samples = 64;
  const Camera cam = test_camera(0.4, 0.25, 8);
  const double t = 0.37;
  const PixelGradients up = random_upstream(64, 10, true);
  const auto analytic = backprop_render(g, cam, t, rc, up);

  std::mt19937_64 rng(11);
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < g.parameter_count(); ++i) {
    if (analytic[i] != 0.0) candidates.push_back(i);
  }
  ASSERT_GE(candidates.size(), 100u);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  const double h = 1e-3;
  int checked = 0;
  for (std::size_t k = 0; k < 100; ++k) {
    const std::size_t i = candidates[k];
    const double x = g.parameter(i);
    g.set_parameter(i, x + h);
    const double lp = weighted_sum(render_frame(g, cam, t, rc), up);
    g.set_parameter(i, x - h);
    const double lm = weighted_sum(render_frame(g, cam, t, rc), up);
    g.set_parameter(i, x);
    const double fd = (lp - lm) / (2 * h);
    const double rel = std::abs(fd - analytic[i]) / std::max({std::abs(fd), std::abs(analytic[i]), 1e-9});
    EXPECT_LT(rel, 1e-3) << "param " << i << " fd " << fd << " analytic " << analytic[i];
    ++checked;
  }
  EXPECT_EQ(checked, 100);
}

TEST(Backprop, TapeMatchesFreshRender) {
  const Grid4D g = random_grid({5, 5, 5, 3}, 12);
  RenderConfig rc;
  const Camera cam = test_camera(2.0, 0.1, 12);
  const PixelGradients up = random_upstream(144, 13, true);
  const TapedFrame taped = render_frame_taped(g, cam, 0.6, rc);
  const Frame plain = render_frame(g, cam, 0.6, rc);
  EXPECT_EQ(taped.frame.rgb, plain.rgb);
  EXPECT_EQ(taped.frame.depth, plain.depth);
  ActivatedGradient a(g.parameter_count(), 0.0), b(g.parameter_count(), 0.0);
  backprop_tape_accumulate(g, taped, up, a);
  backprop_render_accumulate(g, cam, 0.6, rc, up, b);
  EXPECT_EQ(a, b);
  EXPECT_THROW(backprop_tape_accumulate(g, render_frame_taped(g, cam, 0.6, rc, false), up, a), ShapeError);
}

TEST(Backprop, BitIdenticalAcrossThreadCounts) {
  const Grid4D g = random_grid({6, 6, 6, 2}, 14, 15.0);
  RenderConfig rc;
  const Camera cam = test_camera(0.9, 0.4, 16);
  const PixelGradients up = random_upstream(256, 15, true);
  set_thread_count(1);
  const auto one = backprop_render(g, cam, 0.5, rc, up);
  const Frame f1 = render_frame(g, cam, 0.5, rc);
  set_thread_count(3);
  const auto three = backprop_render(g, cam, 0.5, rc, up);
  const Frame f3 = render_frame(g, cam, 0.5, rc);
  set_thread_count(1);
  EXPECT_EQ(one, three);
  EXPECT_EQ(f1.rgb, f3.rgb);
  EXPECT_EQ(f1.normal, f3.normal);
}

TEST(Backprop, RejectsBadUpstream) {
  const Grid4D g = random_grid({2, 2, 2, 2}, 16);
  RenderConfig rc;
  const Camera cam = test_camera(0, 0, 4);
  PixelGradients up;
  up.rgb.assign(5, 0.0);
  EXPECT_THROW(backprop_render(g, cam, 0.5, rc, up), ShapeError);
  up.rgb.assign(48, 0.0);
  up.rgb[3] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(backprop_render(g, cam, 0.5, rc, up), NumericError);
  up.rgb[3] = 0.0;
  up.normal.assign(48, 1.0);
  rc.normals = false;
  EXPECT_THROW(backprop_render(g, cam, 0.5, rc, up), ShapeError);
}

TEST(Render, CompositingWeightsSumToOne) {
  Grid4D g = random_grid({6, 6, 6, 2}, 17, 30.0);
  std::vector<double> p(g.parameters().begin(), g.parameters().end());
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (k % 4 != 0) p[k] = 800.0;  // every color saturates to exactly 1
  }
  g.set_parameters(p);
  RenderConfig rc;
  rc.termination_eps = 0.0;
  rc.background = Vec3::Ones();
  const Frame f = render_frame(g, test_camera(0.7, 0.2, 12), 0.3, rc);
  for (double v : f.rgb) EXPECT_NEAR(v, 1.0, 1e-5);
}

TEST(Render, LinearInColorsForFixedDensity) {
  const GridShape shape{5, 5, 5, 2};
  Grid4D a = random_grid(shape, 18, 12.0);
  Grid4D b = a, mix = a;
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  auto logit = [](double c) { return std::log(c / (1.0 - c)); };
  for (std::size_t k = 0; k < a.parameter_count(); ++k) {
    if (k % 4 == 0) continue;
    const double ca = u(rng), cb = u(rng);
    a.set_parameter(k, logit(ca));
    b.set_parameter(k, logit(cb));
    mix.set_parameter(k, logit(0.3 * ca + 0.7 * cb));
  }
  RenderConfig rc;
  rc.background = Vec3(0.1, 0.5, 0.9);
  const Camera cam = test_camera(-0.4, 0.3, 10);
  const Frame fa = render_frame(a, cam, 0.8, rc);
  const Frame fb = render_frame(b, cam, 0.8, rc);
  const Frame fm = render_frame(mix, cam, 0.8, rc);
  for (std::size_t k = 0; k < fm.rgb.size(); ++k) EXPECT_NEAR(fm.rgb[k], 0.3 * fa.rgb[k] + 0.7 * fb.rgb[k], 1e-9);
}

TEST(Render, StaticGridGivesIdenticalFrames) {
  Grid4D g = random_grid({5, 5, 5, 3}, 20);
  for (int t = 1; t < 3; ++t) {
    const std::size_t layer = g.parameter_count() / 3;
    for (std::size_t i = 0; i < layer; ++i) g.set_parameter(t * layer + i, g.parameter(i));
  }
  RenderConfig rc;
  const std::vector<double> times{0.0, 0.21, 0.5, 0.77, 1.0};
  const auto frames = render_video(g, test_camera(1.0, 0.0, 8), times, rc);
  ASSERT_EQ(frames.size(), times.size());
  for (const Frame& f : frames) {
    EXPECT_EQ(f.rgb, frames[0].rgb);
    EXPECT_EQ(f.depth, frames[0].depth);
  }
  EXPECT_EQ(frames[3].time, 0.77);
}

TEST(Backprop, ZeroUpstreamAndLocality) {
  const Grid4D g = random_grid({6, 6, 6, 2}, 21);
  RenderConfig rc;
  const Camera wide = test_camera(0.0, 0.0, 8);
  PixelGradients zero;
  zero.rgb.assign(192, 0.0);
  for (double v : backprop_render(g, wide, 0.5, rc, zero)) EXPECT_EQ(v, 0.0);

  // a narrow view straight down the x axis only sees the centre of the box
  const Camera narrow = camera_from_view(0.0, 0.0, 3.0, 0.02, 4, 4, 1.5, 4.5);
  const auto grad = backprop_render(g, narrow, 0.25, rc, random_upstream(16, 22, true));
  EXPECT_EQ(grad[g.node_index(0, 0, 0, 0) * 4], 0.0);
  EXPECT_EQ(grad[g.node_index(5, 5, 5, 1) * 4 + 1], 0.0);
  double centre = 0.0;
  for (int c = 0; c < 4; ++c) centre += std::abs(grad[g.node_index(3, 3, 3, 0) * 4 + c]);
  EXPECT_GT(centre, 0.0);
}
