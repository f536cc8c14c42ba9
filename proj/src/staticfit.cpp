#include "noisesphere/staticfit.hpp"

#include <cmath>
#include <string>

#include "noisesphere/error.hpp"
#include "noisesphere/losses.hpp"
#include "noisesphere/timesampler.hpp"

namespace noisesphere {

Adam::Adam(std::size_t size, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(Grid4D& grid, std::span<const double> gradient) {
  if (gradient.size() != m_.size() || grid.parameter_count() != m_.size()) {
    throw ShapeError("optimizer state does not match the grid");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < m_.size(); ++i) {
    const double g = gradient[i];
    if (g == 0.0 && m_[i] == 0.0) continue;
    m_[i] = b1_ * m_[i] + (1.0 - b1_) * g;
    v_[i] = b2_ * v_[i] + (1.0 - b2_) * g * g;
    const double update = lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    grid.set_parameter(i, grid.parameter(i) - update);
  }
}

FitResult fit_static(const TriMesh& mesh, Grid4D grid, const FitConfig& config, const FitCallback& callback) {
  if (mesh.empty()) throw ConfigError("static fit needs a non-empty mesh");
  if (config.iterations < 0 || config.views_per_iter < 1) throw ConfigError("bad iteration settings");
  if (!(config.learning_rate > 0.0) || !(config.final_lr_fraction > 0.0 && config.final_lr_fraction <= 1.0)) {
    throw ConfigError("learning rate must be positive and final_lr_fraction in (0, 1]");
  }
  if (!(config.time_coupling >= 0.0 && config.time_coupling <= 1.0)) {
    throw ConfigError("time coupling must lie in [0, 1]");
  }
  config.render.validate();

  FitResult result;
  result.history.reserve(static_cast<std::size_t>(config.iterations));
  Adam adam(grid.parameter_count(), config.learning_rate);
  SeededUniform draw(config.seed);
  const ViewSampling& vs = config.views;
  RenderConfig render = config.render;
  render.normals = true;

  for (int it = 0; it < config.iterations; ++it) {
    ActivatedGradient grad(grid.parameter_count(), 0.0);
    FitRecord rec;
    rec.iteration = it;
    for (int k = 0; k < config.views_per_iter; ++k) {
      const double az = vs.azimuth_min + draw() * (vs.azimuth_max - vs.azimuth_min);
      const double el = vs.elevation_min + draw() * (vs.elevation_max - vs.elevation_min);
      const double t = draw();
      const Camera cam = camera_from_view(az, el, vs.radius, vs.fov_y, vs.width, vs.height, vs.near, vs.far);
      const GBuffer target = render_gbuffer(mesh, cam, config.gbuffer);
      const TapedFrame taped = render_frame_taped(grid, cam, t, render);
      StaticLoss loss = static_loss(target, taped.frame);
      const double inv = 1.0 / config.views_per_iter;
      for (auto* v : {&loss.grad.rgb, &loss.grad.depth, &loss.grad.normal}) {
        for (auto& x : *v) x *= inv;
      }
      backprop_tape_accumulate(grid, taped, loss.grad, grad);
      rec.loss += loss.value * inv;
      rec.rgb += loss.rgb * inv;
      rec.depth += loss.depth * inv;
      rec.normal += loss.normal * inv;
      rec.azimuth = cam.azimuth;
      rec.elevation = el;
      rec.time = t;
    }
    if (config.iterations > 1) {
      adam.set_learning_rate(config.learning_rate *
                             std::pow(config.final_lr_fraction, static_cast<double>(it) / (config.iterations - 1)));
    }
    adam.step(grid, grid.to_parameter_gradient(grad));
    if (config.time_coupling > 0.0) apply_time_coupling(grid, config.time_coupling);
    for (double p : grid.parameters()) {
      if (!std::isfinite(p)) {
        throw NumericError("static fit diverged at iteration " + std::to_string(it) +
                           " (non-finite parameter; try a lower learning rate)");
      }
    }
    result.history.push_back(rec);
    if (callback) callback(rec, grid);
  }
  result.grid = std::move(grid);
  return result;
}

void apply_time_coupling(Grid4D& grid, double strength) {
  if (!(strength >= 0.0 && strength <= 1.0)) throw ConfigError("time coupling must lie in [0, 1]");
  const int nt = grid.shape().nt;
  if (nt < 2 || strength == 0.0) return;
  const std::size_t layer = grid.parameter_count() / static_cast<std::size_t>(nt);
  for (std::size_t i = 0; i < layer; ++i) {
    double mean = 0.0;
    bool equal = true;
    const double first = grid.parameter(i);
    for (int t = 0; t < nt; ++t) {
      const double v = grid.parameter(t * layer + i);
      mean += v;
      equal = equal && v == first;
    }
    if (equal) continue;
    mean /= nt;
    for (int t = 0; t < nt; ++t) {
      const std::size_t k = t * layer + i;
      grid.set_parameter(k, strength == 1.0 ? mean : grid.parameter(k) + strength * (mean - grid.parameter(k)));
    }
  }
}

std::vector<double> smoothed_loss(const std::vector<FitRecord>& history, std::size_t window) {
  std::vector<double> out(history.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < history.size(); ++i) {
    sum += history[i].loss;
    if (i >= window) sum -= history[i - window].loss;
    out[i] = sum / static_cast<double>(std::min(window, i + 1));
  }
  return out;
}

}  // namespace noisesphere
