#include "noisesphere/denoiser.hpp"

#include <algorithm>
#include <cmath>

#include "noisesphere/error.hpp"

namespace noisesphere {

LatentVideo LatentVideo::from_noise(const NoiseField& n) {
  LatentVideo v(n.height, n.width, n.frames, n.channels);
  std::copy(n.data.begin(), n.data.end(), v.data.begin());
  return v;
}

NoiseSchedule::NoiseSchedule(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw ConfigError("schedule needs at least one step");
  alpha_bar_.resize(static_cast<std::size_t>(steps) + 1);
  alpha_bar_[0] = 1.0;
  for (int k = 1; k <= steps; ++k) {
    const double beta = steps == 1 ? beta_start
                                   : beta_start + (beta_end - beta_start) * (k - 1) / (steps - 1);
    alpha_bar_[static_cast<std::size_t>(k)] = alpha_bar_[static_cast<std::size_t>(k - 1)] * (1.0 - beta);
  }
}

double NoiseSchedule::alpha_bar(double t_d) const {
  const double x = std::clamp(t_d, 0.0, 1.0) * steps();
  const auto k = std::min(static_cast<std::size_t>(x), alpha_bar_.size() - 2);
  const double f = x - static_cast<double>(k);
  return (1.0 - f) * alpha_bar_[k] + f * alpha_bar_[k + 1];
}

void DenoiserContext::validate() const {
  if (!(t_d > 0.0 && t_d < 1.0)) throw DomainError("diffusion time must lie in (0, 1)");
  if (!schedule) throw ConfigError("denoiser context has no schedule");
}

LatentVideo add_noise(const LatentVideo& x0, const LatentVideo& eps, double t_d, const NoiseSchedule& schedule) {
  if (!(t_d > 0.0 && t_d < 1.0)) throw DomainError("diffusion time must lie in (0, 1)");
  if (!x0.same_shape(eps)) throw ShapeError("x0 and noise shapes differ");
  const double ab = schedule.alpha_bar(t_d);
  const double a = std::sqrt(ab);
  const double b = std::sqrt(1.0 - ab);
  LatentVideo z = x0;
  for (std::size_t k = 0; k < z.data.size(); ++k) z.data[k] = a * x0.data[k] + b * eps.data[k];
  return z;
}

namespace {

int wrap(int i, int n) {
  const int r = i % n;
  return r < 0 ? r + n : r;
}

double bilinear_wrapped(const LatentImage& img, double sx, double sy, int c) {
  const double fx0 = std::floor(sx);
  const double fy0 = std::floor(sy);
  const double fx = sx - fx0;
  const double fy = sy - fy0;
  const int x0 = wrap(static_cast<int>(fx0), img.width);
  const int y0 = wrap(static_cast<int>(fy0), img.height);
  const int x1 = wrap(x0 + 1, img.width);
  const int y1 = wrap(y0 + 1, img.height);
  double v = (1.0 - fx) * (1.0 - fy) * img.at(y0, x0, c);
  if (fx > 0.0) v += fx * (1.0 - fy) * img.at(y0, x1, c);
  if (fy > 0.0) v += (1.0 - fx) * fy * img.at(y1, x0, c);
  if (fx > 0.0 && fy > 0.0) v += fx * fy * img.at(y1, x1, c);
  return v;
}

// Splits a shift into floor and fraction once per frame so that the result
// is exactly equivariant under integer translations of the input.
struct Shift1D {
  int whole;
  double frac;
};

Shift1D split_shift(double s) {
  const double w = std::floor(s);
  return {static_cast<int>(w), s - w};
}

}  // namespace

LatentVideo motion_target(const LatentImage& cond, const MotionDescriptor& prompt, int frames) {
  if (frames < 1) throw ShapeError("need at least one frame");
  LatentVideo out(cond.height, cond.width, frames, cond.channels);
  const double cx = 0.5 * (cond.width - 1);
  const double cy = 0.5 * (cond.height - 1);
  for (int i = 0; i < frames; ++i) {
    const double scale = 1.0 + prompt.growth * i;
    if (!(scale > 0.0)) throw DomainError("growth makes the target scale non-positive");
    const Shift1D sx = split_shift(prompt.velocity_x * i);
    const Shift1D sy = split_shift(prompt.velocity_y * i);
    for (int y = 0; y < cond.height; ++y) {
      for (int x = 0; x < cond.width; ++x) {
        for (int c = 0; c < cond.channels; ++c) {
          double v;
          if (prompt.growth == 0.0) {
            // value at x comes from x - shift = (x - whole) - frac
            const int bx = x - sx.whole;
            const int by = y - sy.whole;
            const int x0 = wrap(bx, cond.width), xm = wrap(bx - 1, cond.width);
            const int y0 = wrap(by, cond.height), ym = wrap(by - 1, cond.height);
            v = (1.0 - sx.frac) * (1.0 - sy.frac) * cond.at(y0, x0, c);
            if (sx.frac > 0.0) v += sx.frac * (1.0 - sy.frac) * cond.at(y0, xm, c);
            if (sy.frac > 0.0) v += (1.0 - sx.frac) * sy.frac * cond.at(ym, x0, c);
            if (sx.frac > 0.0 && sy.frac > 0.0) v += sx.frac * sy.frac * cond.at(ym, xm, c);
          } else {
            const double srcx = cx + (x - cx - prompt.velocity_x * i) / scale;
            const double srcy = cy + (y - cy - prompt.velocity_y * i) / scale;
            v = bilinear_wrapped(cond, srcx, srcy, c);
          }
          out.at(y, x, i, c) = v;
        }
      }
    }
  }
  return out;
}

AttentionMask saliency_mask(const LatentVideo& target) {
  AttentionMask m = AttentionMask::constant(target.height, target.width, 0.0);
  double peak = 0.0;
  for (int y = 0; y < target.height; ++y) {
    for (int x = 0; x < target.width; ++x) {
      double best = 0.0;
      for (int i = 1; i < target.frames; ++i) {
        double diff = 0.0;
        for (int c = 0; c < target.channels; ++c) diff += std::abs(target.at(y, x, i, c) - target.at(y, x, 0, c));
        best = std::max(best, diff / target.channels);
      }
      m.values[static_cast<std::size_t>(y) * target.width + x] = best;
      peak = std::max(peak, best);
    }
  }
  if (peak == 0.0) return AttentionMask::constant(target.height, target.width, 1.0);
  for (auto& v : m.values) v = std::clamp(v / peak, 0.0, 1.0);
  return m;
}

LatentVideo ToyDenoiser::predict_noise(const LatentVideo& z, const LatentVideo& target, double alpha_bar) {
  if (!z.same_shape(target)) throw ShapeError("latent and target shapes differ");
  const double a = std::sqrt(alpha_bar);
  const double b = std::sqrt(std::max(1.0 - alpha_bar, kMinNoiseVariance));
  LatentVideo eps(z.height, z.width, z.frames, z.channels);
  for (std::size_t k = 0; k < eps.data.size(); ++k) eps.data[k] = (z.data[k] - a * target.data[k]) / b;
  return eps;
}

namespace {

LatentVideo checked_target(const LatentVideo& z, const DenoiserContext& ctx) {
  ctx.validate();
  if (ctx.condition.height != z.height || ctx.condition.width != z.width ||
      ctx.condition.channels != z.channels) {
    throw ShapeError("condition image does not match the latent shape");
  }
  return motion_target(ctx.condition, ctx.prompt, z.frames);
}

}  // namespace

DenoiserOutput ToyDenoiser::denoise(const LatentVideo& z, const DenoiserContext& ctx) const {
  const LatentVideo target = checked_target(z, ctx);
  return {predict_noise(z, target, ctx.schedule->alpha_bar(ctx.t_d)), saliency_mask(target)};
}

AttentionMask attention_mask(const LatentVideo& z, const DenoiserContext& ctx) {
  return saliency_mask(checked_target(z, ctx));
}

LatentImage shift_image(const LatentImage& img, int dx, int dy) {
  LatentImage out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        out.at(wrap(y + dy, img.height), wrap(x + dx, img.width), c) = img.at(y, x, c);
      }
    }
  }
  return out;
}

LatentVideo shift_video(const LatentVideo& v, int dx, int dy) {
  LatentVideo out(v.height, v.width, v.frames, v.channels);
  for (int y = 0; y < v.height; ++y) {
    for (int x = 0; x < v.width; ++x) {
      for (int i = 0; i < v.frames; ++i) {
        for (int c = 0; c < v.channels; ++c) {
          out.at(wrap(y + dy, v.height), wrap(x + dx, v.width), i, c) = v.at(y, x, i, c);
        }
      }
    }
  }
  return out;
}

}  // namespace noisesphere
