#pragma once

// Flat `key = value` run configuration shared by all subcommands.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "noisesphere/geometry.hpp"
#include "noisesphere/losses.hpp"
#include "noisesphere/noisefield.hpp"
#include "noisesphere/timesampler.hpp"

namespace noisesphere {

struct RunConfig {
  // general
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: use NOISESPHERE_THREADS, else 1
  std::filesystem::path out = "out";
  std::filesystem::path mesh;
  std::filesystem::path checkpoint;
  double mesh_extent = 0.9;

  // cameras
  double camera_radius = 3.0;
  double fov_y_deg = 35.0;
  double near = 1.5;
  double far = 4.5;
  int render_size = 64;
  Vec3 background = Vec3::Ones();
  double azimuth_min_deg = 0.0;
  double azimuth_max_deg = 360.0;
  double elevation_min_deg = -45.0;
  double elevation_max_deg = 84.6;

  // grid and renderer
  int grid_res = 48;
  int grid_frames = 8;
  double grid_half_extent = 0.5;
  double density_scale = 50.0;
  double density_init = -4.0;
  int samples_per_ray = 192;
  double termination_eps = 1e-4;

  // static fit
  int fit_iterations = 2000;
  int views_per_iter = 1;
  double learning_rate = 0.1;
  double final_lr_fraction = 0.1;
  double time_coupling = 1.0;
  int checkpoint_every = 0;  // 0: only the final checkpoint

  // noise
  int latent_size = 32;
  int frames = 16;
  int channels = 4;
  int sphere_subdivisions = 3;
  AuxMode aux_mode = AuxMode::per_face;
  bool role_swap = false;
  SamplerMode time_mode = SamplerMode::anchored;

  // score distillation
  WeightingMode weighting = WeightingMode::constant;
  double t_min = 0.02;
  double t_max = 0.98;
  double lambda = 1.0;
  bool mask_enabled = true;
  MvMode mv_mode = MvMode::off;

  // toy denoiser prompt
  double velocity_x = 0.0;
  double velocity_y = 0.0;
  double growth = 0.0;

  // animation
  int animate_iterations = 200;
  double animate_learning_rate = 0.05;
  double animate_azimuth_min_deg = -20.0;
  double animate_azimuth_max_deg = 20.0;
  double animate_elevation_min_deg = 0.0;
  double animate_elevation_max_deg = 20.0;
  bool forced_mask_zero = false;

  // cross-view sweep
  std::string sweep_object = "icosphere";  // "icosphere" or "mesh"
  int sweep_icosphere_subdivisions = 2;
  double sweep_step_deg = 5.0;
  double sweep_elevation_deg = 0.0;
  int sweep_seeds = 1;
  double sweep_t_start = 0.6;
  double sweep_t_out = 0.2;
  double noise_amplitude = 1.0;
  bool sweep_wrap = false;

  // noise export
  std::vector<double> noise_azimuths_deg = {0.0, 30.0};
  double noise_elevation_deg = 0.0;
  std::vector<double> noise_times;  // empty: drawn by the time sampler

  // rendering
  std::vector<double> render_azimuths_deg = {0.0, 90.0, 180.0, 270.0};
  double render_elevation_deg = 0.0;
  std::vector<double> render_times = {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};

  /// Throws ConfigError on inconsistent values.
  void validate() const;

  NoiseConfig noise_config() const;
  SamplerConfig sampler_config() const;
  RenderConfig render_config() const;
  SdsConfig sds_config() const;
  MotionDescriptor prompt() const;
  Camera camera(double azimuth_deg, double elevation_deg, int size) const;
};

/// Parses `key = value` lines; `#` starts a comment. Unknown keys and
/// malformed values throw ConfigError naming the line.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path);

/// Applies one assignment; used for command-line overrides as well.
void set_config_value(RunConfig& config, std::string_view key, std::string_view value);

/// Every key with its current value, one per line, in a stable order.
std::string format_config(const RunConfig& config);

}  // namespace noisesphere
