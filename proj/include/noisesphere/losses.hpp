#pragma once

// Static supervision, score-distillation gradients and the combined
// objective for one animation step.

#include <cstdint>
#include <optional>
#include <vector>

#include "noisesphere/denoiser.hpp"
#include "noisesphere/field4d.hpp"
#include "noisesphere/geometry.hpp"

namespace noisesphere {

// ---------------------------------------------------------------------------
// Static term: MAE(rgb) + MAE(depth) + MAE(normal), each a mean over pixels
// of the per-pixel channel mean.

struct StaticLoss {
  double rgb = 0.0;
  double depth = 0.0;
  double normal = 0.0;
  double value = 0.0;
  PixelGradients grad;  // subgradient: sign of the residual, 0 at ties
};

/// Throws ShapeError when resolutions differ or the frame has no normals.
StaticLoss static_loss(const GBuffer& target, const Frame& frame);

/// The frame a perfect field would render for this G-buffer.
Frame frame_from_gbuffer(const GBuffer& g, double time = 0.0);
GBuffer gbuffer_from_frame(const Frame& f);

// ---------------------------------------------------------------------------
// Latent stand-in: the RGB render plus coverage, box-averaged by `factor`.
// Channels 0-2 carry RGB, channel 3 carries alpha (mask for the G-buffer);
// channels beyond 4 stay zero.

LatentImage latent_from_gbuffer(const GBuffer& g, int channels, int factor);
LatentVideo latent_from_frames(const std::vector<Frame>& frames, int channels, int factor);
/// Backward of latent_from_frames for one frame.
PixelGradients pixel_gradients_from_latent(const LatentVideo& grad, int frame, int factor);

// ---------------------------------------------------------------------------
// Score distillation

enum class WeightingMode : std::uint8_t { constant, alpha_bar };
enum class MvMode : std::uint8_t { off, identity_preserve };

struct SdsConfig {
  WeightingMode weighting = WeightingMode::constant;
  double t_min = 0.02;
  double t_max = 0.98;
  double lambda = 1.0;
  bool mask_enabled = true;
  MvMode mv_mode = MvMode::off;

  void validate() const;
  /// omega(t_d): 1, or 1 - alpha_bar(t_d).
  double weight(double t_d, const NoiseSchedule& schedule) const;
};

struct SdsResult {
  LatentVideo gradient;  // omega (eps_pred - eps), w.r.t. the latent video
  AttentionMask mask;    // as reported by the denoiser
  double t_d = 0.0;      // after clamping to [t_min, t_max]
  double weight = 0.0;
};

SdsResult sds_gradient(const Denoiser& denoiser, const LatentVideo& video, const LatentImage& condition,
                       const MotionDescriptor& prompt, double t_d, const NoiseField& noise,
                       const SdsConfig& config, std::shared_ptr<const NoiseSchedule> schedule);

/// Pointwise M * grad, M broadcast over frames and channels.
LatentVideo masked_sds(const AttentionMask& mask, const LatentVideo& grad);

// ---------------------------------------------------------------------------
// One step of the combined objective.

struct StepInputs {
  Camera camera;  // latent-resolution aspect; render resolution comes from here
  TimeVector times;
  NoiseField noise;  // epsilon for this step
  double t_d = 0.5;
  std::optional<Camera> mv_camera;
  int mv_frame = 0;
  std::optional<AttentionMask> forced_mask;  // replaces the denoiser's mask when set
};

struct StepSetup {
  const TriMesh* mesh = nullptr;
  const Denoiser* denoiser = nullptr;
  std::shared_ptr<const NoiseSchedule> schedule = std::make_shared<NoiseSchedule>();
  MotionDescriptor prompt;
  RenderConfig render;
  GBufferOptions gbuffer;
  SdsConfig sds;
  int latent_channels = 4;
  int latent_factor = 2;
};

struct LossReport {
  double i2v = 0.0;          // L2 norm of the (masked) latent SDS gradient
  double mv = 0.0;           // multi-view term value
  double static_value = 0.0; // static term value at t = 0
  double lambda = 0.0;
  double total = 0.0;        // i2v + mv + lambda * static_value
  double t_d = 0.0;
  double i2v_grad_norm = 0.0;   // parameter-space norms, for rebalancing
  double mv_grad_norm = 0.0;
  double static_grad_norm = 0.0;
};

struct StepResult {
  std::vector<double> gradient;  // parameter space
  LossReport report;
};

/// The latent SDS gradient is mean-reduced over latent entries before being
/// chained into the renderer, matching the pixel-mean static term.
StepResult total_step(const Grid4D& grid, const StepSetup& setup, const StepInputs& inputs);

}  // namespace noisesphere
