#include "noisesphere/sweep.hpp"

#include <cmath>

#include "noisesphere/error.hpp"
#include "noisesphere/losses.hpp"
#include "noisesphere/noisefield.hpp"
#include "noisesphere/parallel.hpp"
#include "noisesphere/timesampler.hpp"

namespace noisesphere {

namespace {

constexpr std::uint64_t kRandomStream = 0x72616e646f6d5f6eULL;

}  // namespace

TriMesh make_sweep_icosphere(int subdivisions) {
  TriMesh m = make_icosphere(subdivisions);
  m.colors.resize(m.vertices.size());
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    m.colors[i] = (0.5 * (m.vertices[i].normalized() + Vec3::Ones())).eval();
  }
  normalize_mesh(m, 0.9);
  return m;
}

std::vector<std::pair<int, int>> adjacent_pairs(int count, bool wrap) {
  std::vector<std::pair<int, int>> out;
  for (int k = 0; k + 1 < count; ++k) out.emplace_back(k, k + 1);
  if (wrap && count > 2) out.emplace_back(count - 1, 0);
  return out;
}

LatentVideo generate_video(const Denoiser& denoiser, const LatentImage& condition, const MotionDescriptor& prompt,
                           const LatentVideo& noise, double amplitude, double t_start, double t_out,
                           const NoiseSchedule& schedule) {
  if (!(t_out >= 0.0 && t_out < t_start)) throw DomainError("need 0 <= t_out < t_start");
  const LatentVideo target = motion_target(condition, prompt, noise.frames);
  if (!target.same_shape(noise)) throw ShapeError("noise does not match the condition");
  LatentVideo eps = noise;
  for (auto& v : eps.data) v *= amplitude;
  const LatentVideo z = add_noise(target, eps, t_start, schedule);
  auto sched = std::make_shared<NoiseSchedule>(schedule);
  const DenoiserOutput pred = denoiser.denoise(z, DenoiserContext{condition, prompt, t_start, sched});

  const double a = std::sqrt(schedule.alpha_bar(t_start));
  const double b = std::sqrt(1.0 - schedule.alpha_bar(t_start));
  const double a_out = std::sqrt(schedule.alpha_bar(t_out));
  const double b_out = std::sqrt(std::max(0.0, 1.0 - schedule.alpha_bar(t_out)));
  LatentVideo out = z;
  for (std::size_t k = 0; k < out.data.size(); ++k) {
    const double x0 = (z.data[k] - b * pred.eps_pred.data[k]) / a;
    out.data[k] = a_out * x0 + b_out * pred.eps_pred.data[k];
  }
  return out;
}

double video_mse(const LatentVideo& a, const LatentVideo& b) {
  if (!a.same_shape(b)) throw ShapeError("videos differ in shape");
  const int channels = std::min(3, a.channels);
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      for (int i = 0; i < a.frames; ++i) {
        for (int c = 0; c < channels; ++c) {
          const double d = a.at(y, x, i, c) - b.at(y, x, i, c);
          sum += d * d;
          ++n;
        }
      }
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

SweepResult run_mse_sweep(const TriMesh& object, const RunConfig& base, std::uint64_t seed) {
  RunConfig config = base;
  config.seed = seed;
  config.validate();
  const int count = static_cast<int>(std::floor(360.0 / config.sweep_step_deg + 1e-9));
  if (count < 2) throw ConfigError("the sweep needs at least two angles");

  const ToyDenoiser denoiser;
  const NoiseSchedule schedule;
  const TriMesh sphere = make_icosphere(config.sphere_subdivisions);
  const NoiseConfig ncfg = config.noise_config();
  SeededUniform draw(seed);
  const TimeVector times = sample_times(config.sampler_config(), std::ref(draw));
  const int factor = config.render_size / config.latent_size;
  GBufferOptions gopt;
  gopt.background = config.background;

  std::vector<LatentVideo> consistent(static_cast<std::size_t>(count));
  std::vector<LatentVideo> random(static_cast<std::size_t>(count));
  parallel_for(static_cast<std::size_t>(count), [&](std::size_t k) {
    const double az = config.sweep_step_deg * static_cast<double>(k);
    const Camera cam = config.camera(az, config.sweep_elevation_deg, config.render_size);
    const LatentImage condition =
        latent_from_gbuffer(render_gbuffer(object, cam, gopt), config.channels, factor);

    const Camera latent_cam = config.camera(az, config.sweep_elevation_deg, config.latent_size);
    const NoiseField anchor = render_noise_field(sphere, latent_cam, ncfg, NoiseLayer::anchor);
    const NoiseField aux = render_noise_field(sphere, latent_cam, ncfg, NoiseLayer::aux);
    const LatentVideo eps_view = LatentVideo::from_noise(interpolate_noise(anchor, aux, times, config.role_swap));

    NoiseConfig rcfg = ncfg;
    rcfg.seed = seed ^ (kRandomStream + static_cast<std::uint64_t>(k));
    const LatentVideo eps_random = LatentVideo::from_noise(random_noise(rcfg));

    consistent[k] = generate_video(denoiser, condition, config.prompt(), eps_view, config.noise_amplitude,
                                   config.sweep_t_start, config.sweep_t_out, schedule);
    random[k] = generate_video(denoiser, condition, config.prompt(), eps_random, config.noise_amplitude,
                               config.sweep_t_start, config.sweep_t_out, schedule);
  });

  SweepResult out;
  out.seed = seed;
  for (const auto& [i, j] : adjacent_pairs(count, config.sweep_wrap)) {
    SweepPair p;
    p.angle_a = config.sweep_step_deg * i;
    p.angle_b = config.sweep_step_deg * j;
    p.mse_consistent = video_mse(consistent[static_cast<std::size_t>(i)], consistent[static_cast<std::size_t>(j)]);
    p.mse_random = video_mse(random[static_cast<std::size_t>(i)], random[static_cast<std::size_t>(j)]);
    out.mean_consistent += p.mse_consistent;
    out.mean_random += p.mse_random;
    out.pairs.push_back(p);
  }
  out.mean_consistent /= static_cast<double>(out.pairs.size());
  out.mean_random /= static_cast<double>(out.pairs.size());
  return out;
}

}  // namespace noisesphere
