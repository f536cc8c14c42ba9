#pragma once

// Denoiser interface and an analytic stand-in for an image-to-video model.

#include <memory>
#include <vector>

#include "noisesphere/noisefield.hpp"

namespace noisesphere {

/// H x W x V x C double tensor with the same layout as NoiseField.
struct LatentVideo {
  int height = 0;
  int width = 0;
  int frames = 0;
  int channels = 0;
  std::vector<double> data;

  LatentVideo() = default;
  LatentVideo(int h, int w, int v, int c)
      : height(h), width(w), frames(v), channels(c), data(static_cast<std::size_t>(h) * w * v * c, 0.0) {}
  static LatentVideo from_noise(const NoiseField& n);

  std::size_t index(int y, int x, int frame, int c) const {
    return ((static_cast<std::size_t>(y) * width + x) * frames + frame) * channels + c;
  }
  double at(int y, int x, int frame, int c) const { return data[index(y, x, frame, c)]; }
  double& at(int y, int x, int frame, int c) { return data[index(y, x, frame, c)]; }
  bool same_shape(const LatentVideo& o) const {
    return height == o.height && width == o.width && frames == o.frames && channels == o.channels;
  }
};

/// H x W x C single image.
struct LatentImage {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  LatentImage() = default;
  LatentImage(int h, int w, int c)
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, 0.0) {}
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  double at(int y, int x, int c) const { return data[index(y, x, c)]; }
  double& at(int y, int x, int c) { return data[index(y, x, c)]; }
};

/// Discrete DDPM schedule with linear betas, evaluated at continuous
/// diffusion time t_d in (0, 1) by interpolating the cumulative product.
class NoiseSchedule {
 public:
  explicit NoiseSchedule(int steps = 1000, double beta_start = 1e-4, double beta_end = 2e-2);
  /// alpha_bar(t_d); strictly decreasing, alpha_bar(0) = 1.
  double alpha_bar(double t_d) const;
  int steps() const { return static_cast<int>(alpha_bar_.size()) - 1; }

 private:
  std::vector<double> alpha_bar_;  // [0] = 1, [k] = prod_{j<=k} (1 - beta_j)
};

/// Prompt stand-in: translation in latent pixels per frame (x right, y down)
/// and an optional isotropic scale growth per frame.
struct MotionDescriptor {
  double velocity_x = 0.0;
  double velocity_y = 0.0;
  double growth = 0.0;
};

struct DenoiserContext {
  LatentImage condition;  // X^obj at latent resolution
  MotionDescriptor prompt;
  double t_d = 0.5;
  std::shared_ptr<const NoiseSchedule> schedule = std::make_shared<NoiseSchedule>();

  void validate() const;
};

/// Attention-style relevance mask, H x W in [0, 1].
struct AttentionMask {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  static AttentionMask constant(int h, int w, double v) {
    return {h, w, std::vector<double>(static_cast<std::size_t>(h) * w, v)};
  }
  double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

struct DenoiserOutput {
  LatentVideo eps_pred;
  AttentionMask mask;
};

/// Extension point for a real video model: (z, t_d, y, X^obj) -> (eps, M).
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual DenoiserOutput denoise(const LatentVideo& z, const DenoiserContext& ctx) const = 0;
};

/// z = sqrt(abar) x0 + sqrt(1 - abar) eps. Throws DomainError unless t_d in (0, 1).
LatentVideo add_noise(const LatentVideo& x0, const LatentVideo& eps, double t_d, const NoiseSchedule& schedule);

/// Target video: frame i is the condition translated by i * velocity and
/// scaled by (1 + i * growth) about the image center, toroidally wrapped
/// and bilinearly resampled. Frame 0 equals the condition exactly.
LatentVideo motion_target(const LatentImage& condition, const MotionDescriptor& prompt, int frames);

/// Per-pixel max over frames of |target_i - target_0| (channel mean),
/// normalized by its maximum; all ones when the target never moves.
AttentionMask saliency_mask(const LatentVideo& target);

class ToyDenoiser final : public Denoiser {
 public:
  /// Lower bound on 1 - abar used in the noise prediction.
  static constexpr double kMinNoiseVariance = 1e-8;

  DenoiserOutput denoise(const LatentVideo& z, const DenoiserContext& ctx) const override;
  /// Noise the toy model would predict for a given clean target.
  static LatentVideo predict_noise(const LatentVideo& z, const LatentVideo& target, double alpha_bar);
};

/// Convenience: the mask half of ToyDenoiser::denoise.
AttentionMask attention_mask(const LatentVideo& z, const DenoiserContext& ctx);

/// Integer toroidal shift of a latent image (dx right, dy down).
LatentImage shift_image(const LatentImage& img, int dx, int dy);
LatentVideo shift_video(const LatentVideo& v, int dx, int dy);

}  // namespace noisesphere
