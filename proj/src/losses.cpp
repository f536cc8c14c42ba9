#include "noisesphere/losses.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "noisesphere/error.hpp"

namespace noisesphere {
namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Mean over pixels of the per-pixel channel-mean absolute residual, with the
// subgradient w.r.t. `pred` written to `grad` (scaled by `scale`).
double mae_term(const std::vector<double>& target, const std::vector<double>& pred, int channels,
                std::size_t pixels, const std::vector<double>* pixel_weight, double scale,
                std::vector<double>& grad) {
  grad.assign(pred.size(), 0.0);
  const double norm = 1.0 / (static_cast<double>(pixels) * channels);
  double sum = 0.0;
  for (std::size_t p = 0; p < pixels; ++p) {
    const double w = pixel_weight ? (*pixel_weight)[p] : 1.0;
    for (int c = 0; c < channels; ++c) {
      const auto k = p * channels + c;
      const double r = pred[k] - target[k];
      sum += w * std::abs(r);
      grad[k] = scale * w * sign(r) * norm;
    }
  }
  return sum * norm;
}

double l2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

StaticLoss static_loss(const GBuffer& target, const Frame& frame) {
  if (target.width != frame.width || target.height != frame.height) {
    throw ShapeError("static loss: G-buffer and frame resolutions differ");
  }
  if (frame.normal.empty()) throw ShapeError("static loss needs a frame rendered with normals");
  const std::size_t n = target.pixel_count();
  StaticLoss out;
  out.rgb = mae_term(target.rgb, frame.rgb, 3, n, nullptr, 1.0, out.grad.rgb);
  out.depth = mae_term(target.depth, frame.depth, 1, n, nullptr, 1.0, out.grad.depth);
  out.normal = mae_term(target.normal, frame.normal, 3, n, nullptr, 1.0, out.grad.normal);
  out.value = out.rgb + out.depth + out.normal;
  return out;
}

Frame frame_from_gbuffer(const GBuffer& g, double time) {
  Frame f;
  f.width = g.width;
  f.height = g.height;
  f.time = time;
  f.rgb = g.rgb;
  f.depth = g.depth;
  f.normal = g.normal;
  f.alpha.resize(g.mask.size());
  std::transform(g.mask.begin(), g.mask.end(), f.alpha.begin(), [](auto m) { return m ? 1.0 : 0.0; });
  return f;
}

GBuffer gbuffer_from_frame(const Frame& f) {
  GBuffer g;
  g.width = f.width;
  g.height = f.height;
  g.rgb = f.rgb;
  g.depth = f.depth;
  g.normal = f.normal;
  g.mask.resize(f.alpha.size());
  std::transform(f.alpha.begin(), f.alpha.end(), g.mask.begin(),
                 [](double a) { return static_cast<std::uint8_t>(a >= 0.5); });
  return g;
}

namespace {

void check_factor(int width, int height, int factor) {
  if (factor < 1 || width % factor != 0 || height % factor != 0) {
    throw ShapeError("render resolution must be a multiple of the latent downsampling factor");
  }
}

// value(p, c) for c in [0, 4): rgb then coverage
template <typename Pixel>
void box_average(int width, int height, int channels, int factor, Pixel&& value,
                 const std::function<double&(int, int, int)>& out) {
  const double inv = 1.0 / (factor * factor);
  for (int y = 0; y < height / factor; ++y) {
    for (int x = 0; x < width / factor; ++x) {
      for (int c = 0; c < std::min(channels, 4); ++c) {
        double s = 0.0;
        for (int dy = 0; dy < factor; ++dy) {
          for (int dx = 0; dx < factor; ++dx) {
            s += value(static_cast<std::size_t>(y * factor + dy) * width + (x * factor + dx), c);
          }
        }
        out(y, x, c) = s * inv;
      }
    }
  }
}

}  // namespace

LatentImage latent_from_gbuffer(const GBuffer& g, int channels, int factor) {
  check_factor(g.width, g.height, factor);
  LatentImage img(g.height / factor, g.width / factor, channels);
  box_average(
      g.width, g.height, channels, factor,
      [&](std::size_t p, int c) { return c < 3 ? g.rgb[3 * p + c] : static_cast<double>(g.mask[p]); },
      [&](int y, int x, int c) -> double& { return img.at(y, x, c); });
  return img;
}

LatentVideo latent_from_frames(const std::vector<Frame>& frames, int channels, int factor) {
  if (frames.empty()) throw ShapeError("no frames to encode");
  const int w = frames.front().width;
  const int h = frames.front().height;
  check_factor(w, h, factor);
  LatentVideo out(h / factor, w / factor, static_cast<int>(frames.size()), channels);
  for (int i = 0; i < out.frames; ++i) {
    const Frame& f = frames[static_cast<std::size_t>(i)];
    if (f.width != w || f.height != h) throw ShapeError("frames differ in resolution");
    box_average(
        w, h, channels, factor, [&](std::size_t p, int c) { return c < 3 ? f.rgb[3 * p + c] : f.alpha[p]; },
        [&](int y, int x, int c) -> double& { return out.at(y, x, i, c); });
  }
  return out;
}

PixelGradients pixel_gradients_from_latent(const LatentVideo& grad, int frame, int factor) {
  const int w = grad.width * factor;
  const int h = grad.height * factor;
  const double inv = 1.0 / (factor * factor);
  PixelGradients pg;
  pg.rgb.assign(static_cast<std::size_t>(w) * h * 3, 0.0);
  if (grad.channels > 3) pg.alpha.assign(static_cast<std::size_t>(w) * h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto p = static_cast<std::size_t>(y) * w + x;
      for (int c = 0; c < std::min(grad.channels, 3); ++c) pg.rgb[3 * p + c] = grad.at(y / factor, x / factor, frame, c) * inv;
      if (grad.channels > 3) pg.alpha[p] = grad.at(y / factor, x / factor, frame, 3) * inv;
    }
  }
  return pg;
}

void SdsConfig::validate() const {
  if (!(t_min >= 0.0 && t_min < t_max && t_max <= 1.0)) throw ConfigError("need 0 <= t_min < t_max <= 1");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
}

double SdsConfig::weight(double t_d, const NoiseSchedule& schedule) const {
  return weighting == WeightingMode::constant ? 1.0 : 1.0 - schedule.alpha_bar(t_d);
}

SdsResult sds_gradient(const Denoiser& denoiser, const LatentVideo& video, const LatentImage& condition,
                       const MotionDescriptor& prompt, double t_d, const NoiseField& noise,
                       const SdsConfig& config, std::shared_ptr<const NoiseSchedule> schedule) {
  config.validate();
  const LatentVideo eps = LatentVideo::from_noise(noise);
  if (!eps.same_shape(video)) throw ShapeError("noise and latent video shapes differ");
  SdsResult out;
  // keep strictly inside (0, 1) for the forward process
  out.t_d = std::clamp(t_d, std::max(config.t_min, 1e-6), std::min(config.t_max, 1.0 - 1e-6));
  out.weight = config.weight(out.t_d, *schedule);
  DenoiserContext ctx{condition, prompt, out.t_d, schedule};
  const LatentVideo z = add_noise(video, eps, out.t_d, *schedule);
  DenoiserOutput pred = denoiser.denoise(z, ctx);
  if (!pred.eps_pred.same_shape(video)) throw ShapeError("denoiser returned a mis-shaped prediction");
  out.gradient = LatentVideo(video.height, video.width, video.frames, video.channels);
  for (std::size_t k = 0; k < eps.data.size(); ++k) {
    out.gradient.data[k] = out.weight * (pred.eps_pred.data[k] - eps.data[k]);
  }
  out.mask = std::move(pred.mask);
  return out;
}

LatentVideo masked_sds(const AttentionMask& mask, const LatentVideo& grad) {
  if (mask.height != grad.height || mask.width != grad.width ||
      mask.values.size() != static_cast<std::size_t>(mask.height) * mask.width) {
    throw ShapeError("mask shape does not match the gradient");
  }
  LatentVideo out = grad;
  for (int y = 0; y < grad.height; ++y) {
    for (int x = 0; x < grad.width; ++x) {
      const double m = mask.at(y, x);
      for (int i = 0; i < grad.frames; ++i) {
        for (int c = 0; c < grad.channels; ++c) out.at(y, x, i, c) = m * grad.at(y, x, i, c);
      }
    }
  }
  return out;
}

StepResult total_step(const Grid4D& grid, const StepSetup& setup, const StepInputs& in) {
  if (!setup.mesh || !setup.denoiser) throw ConfigError("step setup needs a mesh and a denoiser");
  setup.sds.validate();
  const Camera& cam = in.camera;
  const std::size_t n_params = grid.parameter_count();

  RenderConfig plain = setup.render;
  plain.normals = false;
  RenderConfig with_normals = setup.render;
  with_normals.normals = true;

  StepResult result;
  LossReport& rep = result.report;
  rep.lambda = setup.sds.lambda;

  const GBuffer target = render_gbuffer(*setup.mesh, cam, setup.gbuffer);
  const LatentImage condition = latent_from_gbuffer(target, setup.latent_channels, setup.latent_factor);

  // image-to-video SDS over all frames
  std::vector<TapedFrame> taped;
  std::vector<Frame> frames;
  for (double t : in.times.times) {
    taped.push_back(render_frame_taped(grid, cam, t, plain));
    frames.push_back(taped.back().frame);
  }
  const LatentVideo video = latent_from_frames(frames, setup.latent_channels, setup.latent_factor);
  SdsResult sds = sds_gradient(*setup.denoiser, video, condition, setup.prompt, in.t_d, in.noise, setup.sds,
                               setup.schedule);
  rep.t_d = sds.t_d;
  const AttentionMask& mask = in.forced_mask ? *in.forced_mask : sds.mask;
  LatentVideo g = setup.sds.mask_enabled ? masked_sds(mask, sds.gradient) : std::move(sds.gradient);
  rep.i2v = l2(g.data);

  ActivatedGradient act_i2v(n_params, 0.0);
  if (rep.i2v > 0.0) {
    const double mean_scale = 1.0 / static_cast<double>(g.data.size());
    for (auto& v : g.data) v *= mean_scale;
    for (int i = 0; i < video.frames; ++i) {
      backprop_tape_accumulate(grid, taped[static_cast<std::size_t>(i)],
                               pixel_gradients_from_latent(g, i, setup.latent_factor), act_i2v);
    }
  }

  // static term on the t = 0 render
  ActivatedGradient act_static(n_params, 0.0);
  {
    const TapedFrame f0 = render_frame_taped(grid, cam, 0.0, with_normals, setup.sds.lambda > 0.0);
    StaticLoss sl = static_loss(target, f0.frame);
    rep.static_value = sl.value;
    if (setup.sds.lambda > 0.0) {
      for (auto* v : {&sl.grad.rgb, &sl.grad.depth, &sl.grad.normal}) {
        for (auto& x : *v) x *= setup.sds.lambda;
      }
      backprop_tape_accumulate(grid, f0, sl.grad, act_static);
    }
  }

  // identity-preserving multi-view term, weighted away from the masked region
  ActivatedGradient act_mv(n_params, 0.0);
  if (setup.sds.mv_mode == MvMode::identity_preserve && in.mv_camera) {
    const Camera& mv = *in.mv_camera;
    if (in.mv_frame < 0 || static_cast<std::size_t>(in.mv_frame) >= in.times.size()) {
      throw DomainError("multi-view frame index out of range");
    }
    const GBuffer mv_target = render_gbuffer(*setup.mesh, mv, setup.gbuffer);
    const TapedFrame tf = render_frame_taped(grid, mv, in.times.times[static_cast<std::size_t>(in.mv_frame)], plain);
    const Frame& f = tf.frame;
    std::vector<double> weight(f.pixel_count());
    for (int y = 0; y < f.height; ++y) {
      for (int x = 0; x < f.width; ++x) {
        const int ly = std::min(y * mask.height / f.height, mask.height - 1);
        const int lx = std::min(x * mask.width / f.width, mask.width - 1);
        weight[static_cast<std::size_t>(y) * f.width + x] = 1.0 - mask.at(ly, lx);
      }
    }
    PixelGradients pg;
    rep.mv = mae_term(mv_target.rgb, f.rgb, 3, f.pixel_count(), &weight, 1.0, pg.rgb);
    backprop_tape_accumulate(grid, tf, pg, act_mv);
  }

  const auto gi = grid.to_parameter_gradient(act_i2v);
  const auto gs = grid.to_parameter_gradient(act_static);
  const auto gm = grid.to_parameter_gradient(act_mv);
  rep.i2v_grad_norm = l2(gi);
  rep.static_grad_norm = l2(gs);
  rep.mv_grad_norm = l2(gm);
  result.gradient.resize(n_params);
  for (std::size_t k = 0; k < n_params; ++k) result.gradient[k] = gi[k] + gm[k] + gs[k];
  rep.total = rep.i2v + rep.mv + rep.lambda * rep.static_value;
  return result;
}

}  // namespace noisesphere
