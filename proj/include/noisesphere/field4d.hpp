#pragma once

// Dense space-time radiance grid with emission-absorption rendering and
// exact reverse-mode gradients.
//
// Each lattice node stores four logits: density (softplus, scaled) and RGB
// (sigmoid). Queries interpolate the *activated* node values quadrilinearly
// in (x, y, z, t).

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "noisesphere/geometry.hpp"
#include "noisesphere/tensor_file.hpp"

namespace noisesphere {

struct GridShape {
  int nx = 48;
  int ny = 48;
  int nz = 48;
  int nt = 8;

  std::size_t node_count() const {
    return static_cast<std::size_t>(nx) * ny * nz * nt;
  }
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

struct Box {
  Vec3 lo = Vec3::Constant(-0.5);
  Vec3 hi = Vec3::Constant(0.5);

  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
};

struct FieldSample {
  double density = 0.0;
  Vec3 rgb = Vec3::Zero();
};

/// Gradient with respect to the activated node values, same layout as the
/// parameters (4 per node).
using ActivatedGradient = std::vector<double>;

class Grid4D {
 public:
  static constexpr int kChannels = 4;  // density, r, g, b

  Grid4D() = default;
  Grid4D(GridShape shape, Box box, double density_scale = 10.0, double density_logit = -3.0,
         double color_logit = 0.0);

  const GridShape& shape() const { return shape_; }
  const Box& box() const { return box_; }
  double density_scale() const { return density_scale_; }

  std::size_t parameter_count() const { return params_.size(); }
  std::span<const double> parameters() const { return params_; }
  double parameter(std::size_t i) const { return params_[i]; }
  void set_parameter(std::size_t i, double value);
  void set_parameters(std::vector<double> values);

  std::size_t node_index(int x, int y, int z, int t) const {
    return ((static_cast<std::size_t>(t) * shape_.nz + z) * shape_.ny + y) * shape_.nx + x;
  }
  /// Activated value of channel ch at a node (density >= 0, colors in [0,1]).
  double activated(std::size_t node, int ch) const { return activated_[node * kChannels + ch]; }
  Vec3 node_position(int x, int y, int z) const;
  double node_time(int t) const;
  Vec3 cell_size() const;

  /// Quadrilinear interpolation of activated values. Zero outside the box.
  FieldSample sample(const Vec3& p, double t) const;
  double density(const Vec3& p, double t) const;

  /// Adds d(loss)/d(sample) back onto the activated node values.
  void accumulate(const Vec3& p, double t, double d_density, const double* d_rgb,
                  ActivatedGradient& grad) const;

  /// Chains an activated-space gradient through the activations.
  std::vector<double> to_parameter_gradient(const ActivatedGradient& grad) const;

  /// Throws NumericError when any parameter is not finite.
  void check_finite() const;

  /// Checkpoint = header tensor (f64: shape, box, density scale) followed by
  /// the parameter tensor (f64, dims [nt, nz, ny, nx, 4]).
  std::vector<Tensor> to_tensors() const;
  static Grid4D from_tensors(std::span<const Tensor> tensors);

 private:
  void refresh(std::size_t i);

  GridShape shape_{};
  Box box_{};
  double density_scale_ = 10.0;
  std::vector<double> params_;
  std::vector<double> activated_;
};

double softplus(double x);
double sigmoid(double x);

struct RenderConfig {
  /// Samples spaced evenly over [near, far]; only those inside the grid box
  /// are evaluated. The step size is (far - near) / num_samples.
  int num_samples = 192;
  Vec3 background = Vec3::Ones();
  /// Rays stop once transmittance drops below this; 0 marches every sample.
  double termination_eps = 1e-4;
  bool normals = true;

  double step(const Camera& camera) const { return (camera.far - camera.near) / num_samples; }
  void validate() const;
};

/// Rendered frame; resolution is the camera's.
struct Frame {
  int width = 0;
  int height = 0;
  double time = 0.0;
  std::vector<double> rgb;     // width*height*3
  std::vector<double> depth;   // background composites as far
  std::vector<double> alpha;   // 1 - final transmittance
  std::vector<double> normal;  // width*height*3, empty when normals are off

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

Frame render_frame(const Grid4D& grid, const Camera& camera, double t, const RenderConfig& config);
std::vector<Frame> render_video(const Grid4D& grid, const Camera& camera, std::span<const double> times,
                                const RenderConfig& config);

/// Upstream gradients on a frame's outputs. Empty vectors mean zero.
struct PixelGradients {
  std::vector<double> rgb;
  std::vector<double> depth;
  std::vector<double> normal;
  std::vector<double> alpha;
};

struct RenderTape;

/// A frame plus the per-ray samples recorded while rendering it.
struct TapedFrame {
  Frame frame;
  std::shared_ptr<const RenderTape> tape;  // null unless requested
};

TapedFrame render_frame_taped(const Grid4D& grid, const Camera& camera, double t, const RenderConfig& config,
                              bool keep_tape = true);

/// Backward pass reusing a recorded forward pass. The grid must not have
/// changed since the frame was rendered.
void backprop_tape_accumulate(const Grid4D& grid, const TapedFrame& frame, const PixelGradients& upstream,
                              ActivatedGradient& grad);

/// Adds the gradient of sum(upstream * frame outputs) onto `grad`
/// (activated space). Throws NumericError on non-finite upstream values.
void backprop_render_accumulate(const Grid4D& grid, const Camera& camera, double t,
                                const RenderConfig& config, const PixelGradients& upstream,
                                ActivatedGradient& grad);

/// Parameter (logit-space) gradient for a single frame.
std::vector<double> backprop_render(const Grid4D& grid, const Camera& camera, double t,
                                    const RenderConfig& config, const PixelGradients& upstream);

}  // namespace noisesphere
