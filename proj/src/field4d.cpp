#include "noisesphere/field4d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <span>

#include "noisesphere/error.hpp"
#include "noisesphere/parallel.hpp"

namespace noisesphere {

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace {

struct AxisLerp {
  int i0 = 0;
  int i1 = 0;
  double w0 = 1.0;
  double w1 = 0.0;
};

AxisLerp axis_lerp(double u, int n) {
  if (n == 1) return {};
  u = std::clamp(u, 0.0, static_cast<double>(n - 1));
  const int i0 = std::min(static_cast<int>(u), n - 2);
  const double f = u - i0;
  return {i0, i0 + 1, 1.0 - f, f};
}

struct Stencil {
  std::array<std::size_t, 16> node{};
  std::array<double, 16> weight{};
};

}  // namespace

Grid4D::Grid4D(GridShape shape, Box box, double density_scale, double density_logit, double color_logit)
    : shape_(shape), box_(box), density_scale_(density_scale) {
  if (shape.nx < 2 || shape.ny < 2 || shape.nz < 2 || shape.nt < 1) {
    throw ConfigError("grid needs at least 2 nodes per spatial axis and 1 in time");
  }
  if (!((box.hi.array() > box.lo.array()).all())) throw ConfigError("grid box must have positive extent");
  if (!(density_scale > 0.0)) throw ConfigError("density scale must be positive");
  params_.resize(shape.node_count() * kChannels);
  for (std::size_t n = 0; n < shape.node_count(); ++n) {
    params_[n * kChannels] = density_logit;
    for (int c = 1; c < kChannels; ++c) params_[n * kChannels + c] = color_logit;
  }
  activated_.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) refresh(i);
}

void Grid4D::refresh(std::size_t i) {
  activated_[i] = (i % kChannels == 0) ? density_scale_ * softplus(params_[i]) : sigmoid(params_[i]);
}

void Grid4D::set_parameter(std::size_t i, double value) {
  params_[i] = value;
  refresh(i);
}

void Grid4D::set_parameters(std::vector<double> values) {
  if (values.size() != params_.size()) throw ShapeError("parameter vector size mismatch");
  params_ = std::move(values);
  for (std::size_t i = 0; i < params_.size(); ++i) refresh(i);
}

Vec3 Grid4D::cell_size() const {
  const Vec3 extent = box_.hi - box_.lo;
  return {extent.x() / (shape_.nx - 1), extent.y() / (shape_.ny - 1), extent.z() / (shape_.nz - 1)};
}

Vec3 Grid4D::node_position(int x, int y, int z) const {
  const Vec3 h = cell_size();
  return box_.lo + Vec3(x * h.x(), y * h.y(), z * h.z());
}

double Grid4D::node_time(int t) const {
  return shape_.nt == 1 ? 0.0 : static_cast<double>(t) / (shape_.nt - 1);
}

namespace {

Stencil make_stencil(const Grid4D& g, const Vec3& p, double t) {
  const auto& s = g.shape();
  const Vec3 rel = (p - g.box().lo).cwiseQuotient(g.box().hi - g.box().lo);
  const AxisLerp ax = axis_lerp(rel.x() * (s.nx - 1), s.nx);
  const AxisLerp ay = axis_lerp(rel.y() * (s.ny - 1), s.ny);
  const AxisLerp az = axis_lerp(rel.z() * (s.nz - 1), s.nz);
  const AxisLerp at = axis_lerp(std::clamp(t, 0.0, 1.0) * (s.nt - 1), s.nt);
  Stencil st;
  int k = 0;
  for (int it = 0; it < 2; ++it) {
    const int ti = it ? at.i1 : at.i0;
    const double wt = it ? at.w1 : at.w0;
    for (int iz = 0; iz < 2; ++iz) {
      const int zi = iz ? az.i1 : az.i0;
      const double wz = wt * (iz ? az.w1 : az.w0);
      for (int iy = 0; iy < 2; ++iy) {
        const int yi = iy ? ay.i1 : ay.i0;
        const double wy = wz * (iy ? ay.w1 : ay.w0);
        for (int ix = 0; ix < 2; ++ix) {
          st.node[k] = g.node_index(ix ? ax.i1 : ax.i0, yi, zi, ti);
          st.weight[k] = wy * (ix ? ax.w1 : ax.w0);
          ++k;
        }
      }
    }
  }
  return st;
}

}  // namespace

FieldSample Grid4D::sample(const Vec3& p, double t) const {
  FieldSample out;
  if (!box_.contains(p)) return out;
  const Stencil st = make_stencil(*this, p, t);
  for (int k = 0; k < 16; ++k) {
    const double w = st.weight[k];
    if (w == 0.0) continue;
    const double* a = &activated_[st.node[k] * kChannels];
    out.density += w * a[0];
    out.rgb += w * Vec3(a[1], a[2], a[3]);
  }
  return out;
}

double Grid4D::density(const Vec3& p, double t) const {
  if (!box_.contains(p)) return 0.0;
  const Stencil st = make_stencil(*this, p, t);
  double d = 0.0;
  for (int k = 0; k < 16; ++k) d += st.weight[k] * activated_[st.node[k] * kChannels];
  return d;
}

void Grid4D::accumulate(const Vec3& p, double t, double d_density, const double* d_rgb,
                        ActivatedGradient& grad) const {
  if (!box_.contains(p)) return;
  const Stencil st = make_stencil(*this, p, t);
  for (int k = 0; k < 16; ++k) {
    const double w = st.weight[k];
    if (w == 0.0) continue;
    double* g = &grad[st.node[k] * kChannels];
    g[0] += w * d_density;
    if (d_rgb) {
      g[1] += w * d_rgb[0];
      g[2] += w * d_rgb[1];
      g[3] += w * d_rgb[2];
    }
  }
}

std::vector<double> Grid4D::to_parameter_gradient(const ActivatedGradient& grad) const {
  if (grad.size() != params_.size()) throw ShapeError("gradient size mismatch");
  std::vector<double> out(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (grad[i] == 0.0) continue;
    const double s = sigmoid(params_[i]);
    // softplus' = sigmoid; sigmoid' = s (1 - s)
    out[i] = grad[i] * ((i % kChannels == 0) ? density_scale_ * s : s * (1.0 - s));
  }
  return out;
}

void Grid4D::check_finite() const {
  for (double v : params_) {
    if (!std::isfinite(v)) throw NumericError("non-finite grid parameter");
  }
}

std::vector<Tensor> Grid4D::to_tensors() const {
  const std::vector<double> header = {static_cast<double>(shape_.nx), static_cast<double>(shape_.ny),
                                      static_cast<double>(shape_.nz), static_cast<double>(shape_.nt),
                                      box_.lo.x(), box_.lo.y(), box_.lo.z(),
                                      box_.hi.x(), box_.hi.y(), box_.hi.z(),
                                      density_scale_};
  std::vector<Tensor> out;
  out.push_back(Tensor::from_f64({static_cast<std::uint32_t>(header.size())}, header));
  out.push_back(Tensor::from_f64({static_cast<std::uint32_t>(shape_.nt), static_cast<std::uint32_t>(shape_.nz),
                                  static_cast<std::uint32_t>(shape_.ny), static_cast<std::uint32_t>(shape_.nx),
                                  static_cast<std::uint32_t>(kChannels)},
                                 params_));
  return out;
}

Grid4D Grid4D::from_tensors(std::span<const Tensor> tensors) {
  if (tensors.size() != 2) throw IoError("grid checkpoint must hold a header and a parameter tensor");
  const auto header = tensors[0].as_f64();
  if (header.size() != 11) throw IoError("grid checkpoint header has the wrong length");
  GridShape shape{static_cast<int>(header[0]), static_cast<int>(header[1]), static_cast<int>(header[2]),
                  static_cast<int>(header[3])};
  Box box{Vec3(header[4], header[5], header[6]), Vec3(header[7], header[8], header[9])};
  Grid4D grid(shape, box, header[10]);
  const std::vector<std::uint32_t> dims = {static_cast<std::uint32_t>(shape.nt), static_cast<std::uint32_t>(shape.nz),
                                           static_cast<std::uint32_t>(shape.ny), static_cast<std::uint32_t>(shape.nx),
                                           static_cast<std::uint32_t>(kChannels)};
  if (tensors[1].dims != dims) throw IoError("grid checkpoint parameter dims disagree with header");
  grid.set_parameters(tensors[1].as_f64());
  return grid;
}

void RenderConfig::validate() const {
  if (num_samples < 2) throw ConfigError("need at least 2 samples per ray");
  if (!(termination_eps >= 0.0 && termination_eps < 1.0)) throw ConfigError("termination_eps must be in [0, 1)");
}

// ---------------------------------------------------------------------------
// Ray marching

namespace {

// Output channel layout used by the compositor: rgb(3), depth, normal(3), alpha.
constexpr int kOut = 8;

// The grid interpolated to one time, so that every lookup during a frame is
// trilinear. Density and color live in separate arrays because the normal
// stencil only reads density.
class TimeSlice {
 public:
  TimeSlice(const Grid4D& grid, double t) : box_(grid.box()) {
    const GridShape& s = grid.shape();
    nx_ = s.nx;
    ny_ = s.ny;
    nz_ = s.nz;
    sy_ = nx_;
    sz_ = static_cast<std::size_t>(nx_) * ny_;
    const Vec3 extent = box_.hi - box_.lo;
    scale_ = Vec3((nx_ - 1) / extent.x(), (ny_ - 1) / extent.y(), (nz_ - 1) / extent.z());
    const std::size_t n = sz_ * nz_;
    density_.resize(n);
    color_.resize(3 * n);
    if (s.nt == 1) {
      t0_ = t1_ = 0;
      w0_ = 1.0;
      w1_ = 0.0;
    } else {
      const double u = std::clamp(t, 0.0, 1.0) * (s.nt - 1);
      t0_ = std::min(static_cast<int>(u), s.nt - 2);
      t1_ = t0_ + 1;
      w1_ = u - t0_;
      w0_ = 1.0 - w1_;
    }
    const std::size_t base0 = grid.node_index(0, 0, 0, t0_);
    const std::size_t base1 = grid.node_index(0, 0, 0, t1_);
    for (std::size_t i = 0; i < n; ++i) {
      double v[4];
      for (int c = 0; c < 4; ++c) {
        // a + w1 (b - a) keeps layers that agree exactly equal to the blend
        const double a = grid.activated(base0 + i, c);
        v[c] = w1_ == 0.0 ? a : a + w1_ * (grid.activated(base1 + i, c) - a);
      }
      density_[i] = v[0];
      color_[3 * i] = v[1];
      color_[3 * i + 1] = v[2];
      color_[3 * i + 2] = v[3];
    }
  }

  std::size_t size() const { return density_.size(); }
  const Box& box() const { return box_; }

  struct Corners {
    std::size_t base;
    double fx, fy, fz;
  };

  // Caller guarantees p is inside the box.
  Corners locate(const Vec3& p) const {
    Corners c;
    const int ix = axis(p.x() - box_.lo.x(), scale_.x(), nx_, c.fx);
    const int iy = axis(p.y() - box_.lo.y(), scale_.y(), ny_, c.fy);
    const int iz = axis(p.z() - box_.lo.z(), scale_.z(), nz_, c.fz);
    c.base = static_cast<std::size_t>(iz) * sz_ + static_cast<std::size_t>(iy) * sy_ + ix;
    return c;
  }

  template <typename F>
  void for_corners(const Corners& c, F&& f) const {
    const double gx[2] = {1.0 - c.fx, c.fx};
    const double gy[2] = {1.0 - c.fy, c.fy};
    const double gz[2] = {1.0 - c.fz, c.fz};
    for (int z = 0; z < 2; ++z) {
      for (int y = 0; y < 2; ++y) {
        const double wzy = gz[z] * gy[y];
        const std::size_t row = c.base + z * sz_ + y * sy_;
        f(row, wzy * gx[0]);
        f(row + 1, wzy * gx[1]);
      }
    }
  }

  double density(const Vec3& p) const {
    if (!box_.contains(p)) return 0.0;
    double d = 0.0;
    for_corners(locate(p), [&](std::size_t i, double w) { d += w * density_[i]; });
    return d;
  }

  FieldSample sample(const Vec3& p) const {
    FieldSample out;
    if (!box_.contains(p)) return out;
    double r = 0.0, g = 0.0, b = 0.0, d = 0.0;
    for_corners(locate(p), [&](std::size_t i, double w) {
      d += w * density_[i];
      r += w * color_[3 * i];
      g += w * color_[3 * i + 1];
      b += w * color_[3 * i + 2];
    });
    out.density = d;
    out.rgb = Vec3(r, g, b);
    return out;
  }

  // Gradient buffer layout matches the slice: 4 values per spatial node.
  void accumulate(const Vec3& p, double d_density, const double* d_rgb, std::vector<double>& g) const {
    if (!box_.contains(p)) return;
    for_corners(locate(p), [&](std::size_t i, double w) {
      double* x = &g[4 * i];
      x[0] += w * d_density;
      if (d_rgb) {
        x[1] += w * d_rgb[0];
        x[2] += w * d_rgb[1];
        x[3] += w * d_rgb[2];
      }
    });
  }

  // Spreads a slice gradient onto the two bracketing time layers.
  void scatter(const Grid4D& grid, const std::vector<double>& g, ActivatedGradient& out) const {
    const std::size_t base0 = grid.node_index(0, 0, 0, t0_) * Grid4D::kChannels;
    const std::size_t base1 = grid.node_index(0, 0, 0, t1_) * Grid4D::kChannels;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g[i] == 0.0) continue;
      out[base0 + i] += w0_ * g[i];
      if (w1_ != 0.0) out[base1 + i] += w1_ * g[i];
    }
  }

 private:
  static int axis(double offset, double scale, int n, double& frac) {
    const double u = std::clamp(offset * scale, 0.0, static_cast<double>(n - 1));
    const int i0 = std::min(static_cast<int>(u), n - 2);
    frac = u - i0;
    return i0;
  }

  Box box_;
  int nx_ = 0, ny_ = 0, nz_ = 0;
  std::size_t sy_ = 0, sz_ = 0;
  Vec3 scale_;
  int t0_ = 0, t1_ = 0;
  double w0_ = 1.0, w1_ = 0.0;
  std::vector<double> density_;
  std::vector<double> color_;
};

struct MarchSample {
  Vec3 p;
  double distance;
  double alpha;
  double transmittance;  // before this sample
  Vec3 rgb;
  Vec3 normal;       // unit, or zero
  Vec3 grad;         // raw central-difference density gradient
  double grad_norm;  // |grad|
};

struct RayResult {
  std::array<double, kOut> out{};
  double final_transmittance = 1.0;
};

// Index range of samples near + (j + 0.5) * step that can fall inside the box.
std::pair<int, int> sample_range(const Box& box, const Vec3& origin, const Vec3& dir, double near,
                                 double step, int n) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (origin[a] < box.lo[a] || origin[a] > box.hi[a]) return {0, 0};
      continue;
    }
    double ta = (box.lo[a] - origin[a]) / dir[a];
    double tb = (box.hi[a] - origin[a]) / dir[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t1 >= t0)) return {0, 0};
  // one extra sample of slack on each side; out-of-box samples have zero density
  const int j0 = std::max(0, static_cast<int>(std::floor((t0 - near) / step - 0.5)) - 1);
  const int j1 = std::min(n, static_cast<int>(std::ceil((t1 - near) / step - 0.5)) + 2);
  return {j0, std::max(j0, j1)};
}

class RayMarcher {
 public:
  RayMarcher(const TimeSlice& slice, const Vec3& cell, const Camera& camera, const RenderConfig& config)
      : slice_(slice), cam_(camera), cfg_(config), step_(config.step(camera)), h_(cell) {}

  // Appends this ray's samples to `samples`.
  RayResult forward(int u, int v, std::vector<MarchSample>& samples) const {
    const Vec3 dir = cam_.pixel_direction(u, v);
    RayResult r;
    double T = 1.0;
    const Box& box = slice_.box();
    const auto [j0, j1] = sample_range(box, cam_.eye, dir, cam_.near, step_, cfg_.num_samples);
    for (int j = j0; j < j1; ++j) {
      const double d = cam_.near + (j + 0.5) * step_;
      const Vec3 p = cam_.eye + d * dir;
      if (!box.contains(p)) continue;
      const FieldSample fs = slice_.sample(p);
      MarchSample s{p, d, 0.0, T, fs.rgb, Vec3::Zero(), Vec3::Zero(), 0.0};
      s.alpha = -std::expm1(-fs.density * step_);
      if (cfg_.normals) {
        for (int a = 0; a < 3; ++a) {
          Vec3 off = Vec3::Zero();
          off[a] = h_[a];
          s.grad[a] = (slice_.density(p + off) - slice_.density(p - off)) / (2.0 * h_[a]);
        }
        s.grad_norm = s.grad.norm();
        if (s.grad_norm > 1e-12) s.normal = -s.grad / s.grad_norm;
      }
      const double w = T * s.alpha;
      for (int c = 0; c < 3; ++c) r.out[c] += w * s.rgb[c];
      r.out[3] += w * d;
      for (int c = 0; c < 3; ++c) r.out[4 + c] += w * s.normal[c];
      T *= 1.0 - s.alpha;
      samples.push_back(s);
      if (T < cfg_.termination_eps) break;
    }
    for (int c = 0; c < 3; ++c) r.out[c] += T * cfg_.background[c];
    r.out[3] += T * cam_.far;
    r.out[7] = 1.0 - T;
    r.final_transmittance = T;
    return r;
  }

  // Emits (point, d_density, d_rgb or null) in a fixed order.
  template <typename Sink>
  void backward(std::span<const MarchSample> samples, const std::array<double, kOut>& g, Sink&& emit) const {
    std::array<double, kOut> R{};  // radiance composited behind the current sample
    for (int c = 0; c < 3; ++c) R[c] = cfg_.background[c];
    R[3] = cam_.far;
    for (std::size_t jj = samples.size(); jj-- > 0;) {
      const MarchSample& s = samples[jj];
      const std::array<double, kOut> val = {s.rgb[0],    s.rgb[1],    s.rgb[2],    s.distance,
                                            s.normal[0], s.normal[1], s.normal[2], 1.0};
      double d_alpha = 0.0;
      for (int c = 0; c < kOut; ++c) d_alpha += g[c] * (val[c] - R[c]);
      d_alpha *= s.transmittance;
      const double d_density = d_alpha * step_ * (1.0 - s.alpha);
      const double w = s.transmittance * s.alpha;
      const std::array<double, 3> d_rgb = {w * g[0], w * g[1], w * g[2]};
      for (int c = 0; c < kOut; ++c) R[c] = s.alpha * val[c] + (1.0 - s.alpha) * R[c];
      emit(s.p, d_density, d_rgb.data());

      if (cfg_.normals && s.grad_norm > 1e-12) {
        const Vec3 dn = w * Vec3(g[4], g[5], g[6]);
        if (dn.isZero(0.0)) continue;
        const Vec3 ghat = s.grad / s.grad_norm;
        const Vec3 dgrad = -(dn - ghat * ghat.dot(dn)) / s.grad_norm;
        for (int a = 0; a < 3; ++a) {
          Vec3 off = Vec3::Zero();
          off[a] = h_[a];
          const double k = dgrad[a] / (2.0 * h_[a]);
          emit(s.p + off, k, nullptr);
          emit(s.p - off, -k, nullptr);
        }
      }
    }
  }

 private:
  const TimeSlice& slice_;
  const Camera& cam_;
  const RenderConfig& cfg_;
  double step_;
  Vec3 h_;
};

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("render time must lie in [0, 1]");
}

}  // namespace

// Everything the backward pass needs from one forward render.
struct RenderTape {
  RenderTape(const Grid4D& grid, const Camera& cam, const RenderConfig& cfg, double t)
      : slice(grid, t), camera(cam), config(cfg), cell(grid.cell_size()) {}

  TimeSlice slice;
  Camera camera;
  RenderConfig config;
  Vec3 cell;
  std::vector<std::vector<MarchSample>> row_samples;        // per image row
  std::vector<std::vector<std::uint32_t>> row_offsets;      // width + 1 per row
};

TapedFrame render_frame_taped(const Grid4D& grid, const Camera& camera, double t, const RenderConfig& config,
                              bool keep_tape) {
  check_time(t);
  config.validate();
  auto tape = std::make_shared<RenderTape>(grid, camera, config, t);
  TapedFrame out;
  Frame& f = out.frame;
  f.width = camera.width;
  f.height = camera.height;
  f.time = t;
  const std::size_t n = f.pixel_count();
  f.rgb.assign(3 * n, 0.0);
  f.depth.assign(n, 0.0);
  f.alpha.assign(n, 0.0);
  if (config.normals) f.normal.assign(3 * n, 0.0);
  const auto rows = static_cast<std::size_t>(camera.height);
  if (keep_tape) {
    tape->row_samples.resize(rows);
    tape->row_offsets.resize(rows);
  }
  const RayMarcher marcher(tape->slice, tape->cell, tape->camera, tape->config);
  parallel_for(rows, [&](std::size_t row) {
    std::vector<MarchSample> scratch;
    std::vector<MarchSample>& samples = keep_tape ? tape->row_samples[row] : scratch;
    if (keep_tape) tape->row_offsets[row].assign(1, 0);
    const int v = static_cast<int>(row);
    for (int u = 0; u < camera.width; ++u) {
      if (!keep_tape) samples.clear();
      const auto p = static_cast<std::size_t>(v) * camera.width + u;
      const RayResult r = marcher.forward(u, v, samples);
      if (keep_tape) tape->row_offsets[row].push_back(static_cast<std::uint32_t>(samples.size()));
      for (int c = 0; c < 3; ++c) f.rgb[3 * p + c] = r.out[c];
      f.depth[p] = r.out[3];
      if (config.normals) {
        for (int c = 0; c < 3; ++c) f.normal[3 * p + c] = r.out[4 + c];
      }
      f.alpha[p] = r.out[7];
    }
  });
  if (keep_tape) out.tape = std::move(tape);
  return out;
}

Frame render_frame(const Grid4D& grid, const Camera& camera, double t, const RenderConfig& config) {
  return render_frame_taped(grid, camera, t, config, false).frame;
}

std::vector<Frame> render_video(const Grid4D& grid, const Camera& camera, std::span<const double> times,
                                const RenderConfig& config) {
  std::vector<Frame> frames;
  frames.reserve(times.size());
  for (double t : times) frames.push_back(render_frame(grid, camera, t, config));
  return frames;
}

namespace {

void check_upstream(const std::vector<double>& g, std::size_t expected, const char* name) {
  if (g.empty()) return;
  if (g.size() != expected) throw ShapeError(std::string("upstream ") + name + " gradient has the wrong size");
  for (double v : g) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite upstream ") + name + " gradient");
  }
}

struct PointGradient {
  Vec3 p;
  double d_density;
  std::array<double, 3> d_rgb;
  bool has_rgb;
};

}  // namespace

void backprop_tape_accumulate(const Grid4D& grid, const TapedFrame& taped, const PixelGradients& up,
                              ActivatedGradient& grad) {
  if (!taped.tape) throw ShapeError("frame was rendered without a tape");
  const RenderTape& tape = *taped.tape;
  const Camera& camera = tape.camera;
  const auto n = static_cast<std::size_t>(camera.pixel_count());
  check_upstream(up.rgb, 3 * n, "rgb");
  check_upstream(up.depth, n, "depth");
  check_upstream(up.normal, 3 * n, "normal");
  check_upstream(up.alpha, n, "alpha");
  if (grad.size() != grid.parameter_count()) throw ShapeError("gradient buffer size mismatch");
  if (!up.normal.empty() && !tape.config.normals) throw ShapeError("normal gradients need config.normals");

  const RayMarcher marcher(tape.slice, tape.cell, camera, tape.config);

  auto upstream_at = [&](std::size_t p) {
    std::array<double, kOut> g{};
    if (!up.rgb.empty()) {
      for (int c = 0; c < 3; ++c) g[c] = up.rgb[3 * p + c];
    }
    if (!up.depth.empty()) g[3] = up.depth[p];
    if (!up.normal.empty()) {
      for (int c = 0; c < 3; ++c) g[4 + c] = up.normal[3 * p + c];
    }
    if (!up.alpha.empty()) g[7] = up.alpha[p];
    return g;
  };
  auto is_zero = [](const std::array<double, kOut>& g) {
    return std::all_of(g.begin(), g.end(), [](double x) { return x == 0.0; });
  };
  auto ray_samples = [&](std::size_t row, int u) {
    const auto& off = tape.row_offsets[row];
    return std::span<const MarchSample>(tape.row_samples[row]).subspan(off[u], off[u + 1] - off[u]);
  };

  std::vector<double> slice_grad(4 * tape.slice.size(), 0.0);
  // Rows produce point gradients independently; they are applied in
  // row-major order so the sum is identical for any worker count.
  if (thread_count() <= 1) {
    for (int v = 0; v < camera.height; ++v) {
      for (int u = 0; u < camera.width; ++u) {
        const auto g = upstream_at(static_cast<std::size_t>(v) * camera.width + u);
        if (is_zero(g)) continue;
        marcher.backward(ray_samples(v, u), g, [&](const Vec3& x, double dd, const double* drgb) {
          tape.slice.accumulate(x, dd, drgb, slice_grad);
        });
      }
    }
  } else {
    std::vector<std::vector<PointGradient>> rows(static_cast<std::size_t>(camera.height));
    parallel_for(rows.size(), [&](std::size_t row) {
      auto& out = rows[row];
      for (int u = 0; u < camera.width; ++u) {
        const auto g = upstream_at(row * camera.width + u);
        if (is_zero(g)) continue;
        marcher.backward(ray_samples(row, u), g, [&](const Vec3& x, double dd, const double* drgb) {
          PointGradient pg{x, dd, {0, 0, 0}, drgb != nullptr};
          if (drgb) pg.d_rgb = {drgb[0], drgb[1], drgb[2]};
          out.push_back(pg);
        });
      }
    });
    for (const auto& row : rows) {
      for (const auto& pg : row) {
        tape.slice.accumulate(pg.p, pg.d_density, pg.has_rgb ? pg.d_rgb.data() : nullptr, slice_grad);
      }
    }
  }
  tape.slice.scatter(grid, slice_grad, grad);
}

void backprop_render_accumulate(const Grid4D& grid, const Camera& camera, double t,
                                const RenderConfig& config, const PixelGradients& up,
                                ActivatedGradient& grad) {
  backprop_tape_accumulate(grid, render_frame_taped(grid, camera, t, config, true), up, grad);
}

std::vector<double> backprop_render(const Grid4D& grid, const Camera& camera, double t,
                                    const RenderConfig& config, const PixelGradients& upstream) {
  ActivatedGradient grad(grid.parameter_count(), 0.0);
  backprop_render_accumulate(grid, camera, t, config, upstream, grad);
  return grid.to_parameter_gradient(grad);
}

}  // namespace noisesphere
