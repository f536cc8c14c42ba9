#pragma once

// Stage one: fit the space-time grid so that every time slice reproduces the
// input mesh's color, depth and normals.

#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include "noisesphere/field4d.hpp"
#include "noisesphere/geometry.hpp"

namespace noisesphere {

/// First-order adaptive-moment update.
class Adam {
 public:
  explicit Adam(std::size_t size, double learning_rate = 1e-2, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(Grid4D& grid, std::span<const double> gradient);
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  long steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

/// Orbit over which training cameras are drawn.
struct ViewSampling {
  double azimuth_min = 0.0;
  double azimuth_max = 2.0 * std::numbers::pi;
  double elevation_min = -std::numbers::pi / 4;
  double elevation_max = 0.47 * std::numbers::pi;  // stays clear of straight-down views
  double radius = 3.0;
  double fov_y = 35.0 * std::numbers::pi / 180.0;
  int width = 64;
  int height = 64;
  double near = 1.5;
  double far = 4.5;
};

struct FitConfig {
  int iterations = 2000;
  int views_per_iter = 1;
  double learning_rate = 1e-2;
  /// Learning rate at the last iteration as a fraction of `learning_rate`;
  /// the rate decays exponentially in between.
  double final_lr_fraction = 1.0;
  /// Fraction in [0, 1] of each logit's deviation from its mean over the
  /// time layers removed after every update. Keeps the time slices of a
  /// static fit in agreement where the views leave the field
  /// under-determined; 1 ties the layers together.
  double time_coupling = 0.0;
  std::uint64_t seed = 0;
  ViewSampling views;
  RenderConfig render;
  GBufferOptions gbuffer;
};

struct FitRecord {
  int iteration = 0;
  double loss = 0.0;  // mean over the iteration's views
  double rgb = 0.0;
  double depth = 0.0;
  double normal = 0.0;
  double azimuth = 0.0;
  double elevation = 0.0;
  double time = 0.0;
};

struct FitResult {
  Grid4D grid;
  std::vector<FitRecord> history;
};

/// Called after each iteration with the updated grid.
using FitCallback = std::function<void(const FitRecord&, const Grid4D&)>;

/// Runs `iterations` steps of random-view, random-time static supervision.
/// The mesh is expected to already sit inside the grid box. Throws
/// NumericError if a parameter becomes non-finite.
FitResult fit_static(const TriMesh& mesh, Grid4D grid, const FitConfig& config,
                     const FitCallback& callback = {});

/// Moves every logit a fraction `strength` of the way toward its mean over
/// the time layers.
void apply_time_coupling(Grid4D& grid, double strength);

/// Trailing moving average of the loss history.
std::vector<double> smoothed_loss(const std::vector<FitRecord>& history, std::size_t window);

}  // namespace noisesphere
