#pragma once

// Stage two: distill motion from the denoiser into the space-time grid while
// anchoring the first frame to the input object.

#include <functional>
#include <vector>

#include "noisesphere/field4d.hpp"
#include "noisesphere/losses.hpp"
#include "noisesphere/run_config.hpp"

namespace noisesphere {

struct AnimateRecord {
  int iteration = 0;
  LossReport report;
  double azimuth = 0.0;  // radians
  double elevation = 0.0;
};

struct AnimateResult {
  Grid4D grid;
  std::vector<AnimateRecord> history;
};

using AnimateCallback = std::function<void(const AnimateRecord&, const Grid4D&)>;

/// Runs `config.animate_iterations` steps with the toy denoiser. Each step
/// draws a view, renders sphere noise from that view, samples anchored frame
/// times and applies one optimizer update. `mesh` must already be normalized
/// into the grid box.
AnimateResult animate(const TriMesh& mesh, Grid4D grid, const RunConfig& config,
                      const AnimateCallback& callback = {});

/// Alpha-weighted pixel centroid (x, y) of a frame, in frame pixels.
/// Returns the image center for an empty frame.
Eigen::Vector2d alpha_centroid(const Frame& frame);

}  // namespace noisesphere
