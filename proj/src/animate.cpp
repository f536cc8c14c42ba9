#include "noisesphere/animate.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "noisesphere/denoiser.hpp"
#include "noisesphere/error.hpp"
#include "noisesphere/noisefield.hpp"
#include "noisesphere/staticfit.hpp"
#include "noisesphere/timesampler.hpp"

namespace noisesphere {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Stream separation for the per-run random draws.
constexpr std::uint64_t kViewStream = 0x616e696d61746531ULL;
constexpr std::uint64_t kNoiseStream = 0x9e3779b97f4a7c15ULL;

}  // namespace

AnimateResult animate(const TriMesh& mesh, Grid4D grid, const RunConfig& config, const AnimateCallback& callback) {
  config.validate();
  if (mesh.empty()) throw ConfigError("animation needs a non-empty mesh");

  const ToyDenoiser denoiser;
  StepSetup setup;
  setup.mesh = &mesh;
  setup.denoiser = &denoiser;
  setup.prompt = config.prompt();
  setup.render = config.render_config();
  setup.gbuffer.background = config.background;
  setup.sds = config.sds_config();
  setup.latent_channels = config.channels;
  setup.latent_factor = config.render_size / config.latent_size;

  const TriMesh sphere = make_icosphere(config.sphere_subdivisions);
  SeededUniform draw(config.seed ^ kViewStream);
  SamplerConfig sampler = config.sampler_config();
  Adam adam(grid.parameter_count(), config.animate_learning_rate);

  AnimateResult result;
  result.history.reserve(static_cast<std::size_t>(config.animate_iterations));
  for (int it = 0; it < config.animate_iterations; ++it) {
    const double az = config.animate_azimuth_min_deg +
                      draw() * (config.animate_azimuth_max_deg - config.animate_azimuth_min_deg);
    const double el = config.animate_elevation_min_deg +
                      draw() * (config.animate_elevation_max_deg - config.animate_elevation_min_deg);
    const double t_d = config.t_min + draw() * (config.t_max - config.t_min);

    StepInputs in;
    in.camera = config.camera(az, el, config.render_size);
    in.times = sample_times(sampler, std::ref(draw));
    in.t_d = t_d;

    NoiseConfig ncfg = config.noise_config();
    ncfg.seed = config.seed + kNoiseStream * static_cast<std::uint64_t>(it + 1);
    const Camera latent_cam = config.camera(az, el, config.latent_size);
    const NoiseField anchor = render_noise_field(sphere, latent_cam, ncfg, NoiseLayer::anchor);
    const NoiseField aux = render_noise_field(sphere, latent_cam, ncfg, NoiseLayer::aux);
    in.noise = interpolate_noise(anchor, aux, in.times, config.role_swap);

    if (config.mv_mode == MvMode::identity_preserve) {
      in.mv_camera = config.camera(az + 90.0, el, config.render_size);
      in.mv_frame = config.frames - 1;
    }
    if (config.forced_mask_zero) in.forced_mask = AttentionMask::constant(config.latent_size, config.latent_size, 0.0);

    const StepResult step = total_step(grid, setup, in);
    adam.step(grid, step.gradient);
    for (double p : grid.parameters()) {
      if (!std::isfinite(p)) {
        throw NumericError("animation diverged at iteration " + std::to_string(it) +
                           " (non-finite parameter; try a lower learning rate)");
      }
    }
    AnimateRecord rec{it, step.report, in.camera.azimuth, el * kDeg};
    result.history.push_back(rec);
    if (callback) callback(rec, grid);
  }
  result.grid = std::move(grid);
  return result;
}

Eigen::Vector2d alpha_centroid(const Frame& frame) {
  double sum = 0.0, sx = 0.0, sy = 0.0;
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      const double a = frame.alpha[static_cast<std::size_t>(y) * frame.width + x];
      sum += a;
      sx += a * x;
      sy += a * y;
    }
  }
  if (sum <= 0.0) return {0.5 * (frame.width - 1), 0.5 * (frame.height - 1)};
  return {sx / sum, sy / sum};
}

}  // namespace noisesphere
