#pragma once

// Cross-view consistency experiment: generate a short video per camera angle
// with view-consistent or independent noise, then compare adjacent angles.

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "noisesphere/denoiser.hpp"
#include "noisesphere/geometry.hpp"
#include "noisesphere/run_config.hpp"

namespace noisesphere {

struct SweepPair {
  double angle_a = 0.0;  // degrees
  double angle_b = 0.0;
  double mse_consistent = 0.0;
  double mse_random = 0.0;
};

struct SweepResult {
  std::uint64_t seed = 0;
  std::vector<SweepPair> pairs;
  double mean_consistent = 0.0;
  double mean_random = 0.0;
};

/// The default sweep object: an icosphere colored by its surface normal.
TriMesh make_sweep_icosphere(int subdivisions);

/// Index pairs (k, k+1) over `count` angles; the pair (count-1, 0) is added
/// only when `wrap` is set.
std::vector<std::pair<int, int>> adjacent_pairs(int count, bool wrap);

/// One deterministic denoiser pass: noise the condition's motion target to
/// `t_start` with `amplitude * noise`, reconstruct the clean video, then
/// re-noise it to `t_out` with the predicted noise.
LatentVideo generate_video(const Denoiser& denoiser, const LatentImage& condition, const MotionDescriptor& prompt,
                           const LatentVideo& noise, double amplitude, double t_start, double t_out,
                           const NoiseSchedule& schedule);

/// Mean squared difference over pixels, frames and the RGB channels (0-2).
double video_mse(const LatentVideo& a, const LatentVideo& b);

/// Runs the sweep for one seed on a mesh already normalized into the scene.
SweepResult run_mse_sweep(const TriMesh& object, const RunConfig& config, std::uint64_t seed);

}  // namespace noisesphere
