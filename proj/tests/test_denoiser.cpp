#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "noisesphere/denoiser.hpp"
#include "noisesphere/error.hpp"

using namespace noisesphere;

namespace {

LatentImage random_image(int h, int w, int c, std::uint64_t seed) {
  LatentImage img(h, w, c);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& x : img.data) x = u(rng);
  return img;
}

LatentVideo gaussian_video(int h, int w, int v, int c, std::uint64_t seed) {
  LatentVideo out(h, w, v, c);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  for (auto& x : out.data) x = d(rng);
  return out;
}

LatentImage blob(int size, double cx, double cy, double radius) {
  LatentImage img(size, size, 3);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const bool in = (x - cx) * (x - cx) + (y - cy) * (y - cy) <= radius * radius;
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = in ? 1.0 : 0.0;
    }
  }
  return img;
}

}  // namespace

TEST(Schedule, EndpointsAndMonotone) {
  const NoiseSchedule s;
  EXPECT_EQ(s.alpha_bar(0.0), 1.0);
  EXPECT_EQ(s.steps(), 1000);
  double prev = 1.0;
  for (int k = 1; k <= 1000; ++k) {
    const double a = s.alpha_bar(k / 1000.0);
    EXPECT_LT(a, prev);
    prev = a;
  }
  // first step uses beta_start
  EXPECT_NEAR(s.alpha_bar(0.001), 1.0 - 1e-4, 1e-15);
  EXPECT_LT(s.alpha_bar(1.0), 1e-4);
  EXPECT_THROW(NoiseSchedule(0), ConfigError);
}

TEST(AddNoise, Endpoints) {
  const NoiseSchedule s;
  const LatentVideo x0 = gaussian_video(4, 4, 2, 3, 1);
  const LatentVideo eps = gaussian_video(4, 4, 2, 3, 2);
  const LatentVideo near0 = add_noise(x0, eps, 1e-6, s);
  const LatentVideo near1 = add_noise(x0, eps, 1.0 - 1e-9, s);
  for (std::size_t k = 0; k < x0.data.size(); ++k) {
    EXPECT_NEAR(near0.data[k], x0.data[k], 1e-3);
    EXPECT_NEAR(near1.data[k], eps.data[k], 2e-2 * (1.0 + std::abs(x0.data[k])));
  }
  EXPECT_THROW(add_noise(x0, eps, 0.0, s), DomainError);
  EXPECT_THROW(add_noise(x0, eps, 1.0, s), DomainError);
  EXPECT_THROW(add_noise(x0, gaussian_video(4, 4, 2, 4, 3), 0.5, s), ShapeError);
}

TEST(AddNoise, VariancePreservation) {
  const NoiseSchedule s;
  const LatentVideo x0 = gaussian_video(64, 64, 8, 4, 4);
  const LatentVideo eps = gaussian_video(64, 64, 8, 4, 5);
  const double n = static_cast<double>(x0.data.size());
  for (double t : {0.1, 0.5, 0.9}) {
    const LatentVideo z = add_noise(x0, eps, t, s);
    double mean = 0.0, sq = 0.0;
    for (double v : z.data) {
      mean += v;
      sq += v * v;
    }
    mean /= n;
    const double var = sq / n - mean * mean;
    // Var[z] = abar * 1 + (1 - abar) * 1; sample variance of N(0,1) has sd sqrt(2/n)
    EXPECT_NEAR(var, 1.0, 4.0 * std::sqrt(2.0 / n)) << "t_d " << t;
  }
}

TEST(MotionTarget, StaticAndTranslated) {
  const LatentImage cond = random_image(8, 10, 3, 6);
  const LatentVideo still = motion_target(cond, {}, 4);
  for (int i = 0; i < 4; ++i) {
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 10; ++x) EXPECT_EQ(still.at(y, x, i, 1), cond.at(y, x, 1));
    }
  }
  const LatentVideo moving = motion_target(cond, {1.0, 0.0, 0.0}, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 10; ++x) {
      for (int c = 0; c < 3; ++c) {
        EXPECT_EQ(moving.at(y, x, 0, c), cond.at(y, x, c));
        EXPECT_EQ(moving.at(y, (x + 5) % 10, 5, c), moving.at(y, x, 0, c));
      }
    }
  }
}

TEST(MotionTarget, FractionalShiftAndGrowth) {
  const LatentImage cond = random_image(6, 6, 1, 7);
  const LatentVideo half = motion_target(cond, {0.5, 0.0, 0.0}, 2);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 6; ++x) {
      EXPECT_NEAR(half.at(y, x, 1, 0), 0.5 * (cond.at(y, x, 0) + cond.at(y, (x + 5) % 6, 0)), 1e-15);
    }
  }
  const LatentVideo grow = motion_target(cond, {0.0, 0.0, 0.1}, 3);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 6; ++x) EXPECT_NEAR(grow.at(y, x, 0, 0), cond.at(y, x, 0), 1e-15);
  }
  EXPECT_THROW(motion_target(cond, {0.0, 0.0, -0.6}, 3), DomainError);
}

TEST(ToyDenoiser, FixedPoint) {
  ToyDenoiser den;
  const LatentImage cond = random_image(32, 32, 4, 8);
  const MotionDescriptor prompt{0.3, -0.2, 0.0};
  const LatentVideo target = motion_target(cond, prompt, 16);
  const LatentVideo eps = gaussian_video(32, 32, 16, 4, 9);
  auto sched = std::make_shared<NoiseSchedule>();
  for (double t : {0.02, 0.1, 0.5, 0.9, 0.98}) {
    const LatentVideo z = add_noise(target, eps, t, *sched);
    const DenoiserOutput out = den.denoise(z, {cond, prompt, t, sched});
    double worst = 0.0;
    for (std::size_t k = 0; k < eps.data.size(); ++k) worst = std::max(worst, std::abs(out.eps_pred.data[k] - eps.data[k]));
    EXPECT_LT(worst, 1e-5) << "t_d " << t;
  }
}

TEST(ToyDenoiser, TranslationEquivariance) {
  ToyDenoiser den;
  const LatentImage cond = random_image(12, 10, 3, 10);
  const LatentVideo z = gaussian_video(12, 10, 5, 3, 11);
  auto sched = std::make_shared<NoiseSchedule>();
  for (const MotionDescriptor& prompt : {MotionDescriptor{0.7, 0.2, 0.0}, MotionDescriptor{1.0, 0.0, 0.0}}) {
    const DenoiserOutput base = den.denoise(z, {cond, prompt, 0.4, sched});
    const DenoiserOutput moved = den.denoise(shift_video(z, 3, -2), {shift_image(cond, 3, -2), prompt, 0.4, sched});
    EXPECT_EQ(moved.eps_pred.data, shift_video(base.eps_pred, 3, -2).data);
    for (int y = 0; y < 12; ++y) {
      for (int x = 0; x < 10; ++x) {
        EXPECT_EQ(moved.mask.at((y + 10) % 12, (x + 3) % 10), base.mask.at(y, x));
      }
    }
  }
}

TEST(ToyDenoiser, Deterministic) {
  ToyDenoiser den;
  const LatentImage cond = random_image(8, 8, 4, 12);
  const LatentVideo z = gaussian_video(8, 8, 4, 4, 13);
  const DenoiserContext ctx{cond, {0.4, 0.1, 0.02}, 0.6};
  EXPECT_EQ(den.denoise(z, ctx).eps_pred.data, den.denoise(z, ctx).eps_pred.data);
}

TEST(ToyDenoiser, Errors) {
  ToyDenoiser den;
  const LatentVideo z = gaussian_video(8, 8, 4, 4, 14);
  EXPECT_THROW(den.denoise(z, {random_image(8, 8, 4, 1), {}, 0.0}), DomainError);
  EXPECT_THROW(den.denoise(z, {random_image(8, 8, 4, 1), {}, 1.0}), DomainError);
  EXPECT_THROW(den.denoise(z, {random_image(8, 6, 4, 1), {}, 0.5}), ShapeError);
}

TEST(AttentionMask, ZeroMotionFallsBackToOnes) {
  const LatentImage cond = random_image(8, 8, 4, 15);
  const AttentionMask m = attention_mask(gaussian_video(8, 8, 4, 4, 16), {cond, {}, 0.5});
  for (double v : m.values) EXPECT_EQ(v, 1.0);
}

TEST(AttentionMask, SupportFollowsMovingBlob) {
  const int n = 32;
  const LatentImage cond = blob(n, 8.0, 16.0, 3.0);
  const MotionDescriptor prompt{1.0, 0.0, 0.0};
  const int frames = 8;
  const AttentionMask m = attention_mask(LatentVideo(n, n, frames, 3), {cond, prompt, 0.5});
  // swept region: pixels covered by the blob in some frame but not in frame 0, or vice versa
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double v = m.at(y, x);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      bool swept = false, near_swept = false;
      for (int i = 1; i < frames; ++i) {
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if (yy < 0 || yy >= n || xx < 0 || xx >= n) continue;
            const bool in0 = cond.at(yy, xx, 0) > 0.5;
            const bool ini = cond.at(yy, ((xx - i) % n + n) % n, 0) > 0.5;
            if (in0 != ini) {
              near_swept = true;
              if (dx == 0 && dy == 0) swept = true;
            }
          }
        }
      }
      if (swept) EXPECT_GT(v, 0.0) << x << "," << y;
      if (!near_swept) EXPECT_EQ(v, 0.0) << x << "," << y;
    }
  }
  EXPECT_EQ(*std::max_element(m.values.begin(), m.values.end()), 1.0);
}

TEST(Shift, RoundTrip) {
  const LatentImage img = random_image(5, 7, 2, 17);
  EXPECT_EQ(shift_image(shift_image(img, 3, -4), -3, 4).data, img.data);
  EXPECT_EQ(shift_image(img, 7, 5).data, img.data);
  EXPECT_EQ(shift_image(img, 1, 0).at(2, 0, 1), img.at(2, 6, 1));
}
