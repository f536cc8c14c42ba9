#include "noisesphere/commands.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>

#include "noisesphere/animate.hpp"
#include "noisesphere/error.hpp"
#include "noisesphere/image_io.hpp"
#include "noisesphere/noisefield.hpp"
#include "noisesphere/sweep.hpp"
#include "noisesphere/tensor_file.hpp"
#include "noisesphere/timesampler.hpp"

namespace fs = std::filesystem;

namespace noisesphere {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::ofstream open_text(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  return out;
}

void close_text(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw IoError("error while writing " + path.string());
}

void require_file(const fs::path& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("no ") + what + " given");
  if (!fs::is_regular_file(path)) throw IoError(std::string(what) + " not found: " + path.string());
}

void make_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
}

void write_effective_config(const RunConfig& config) {
  const fs::path path = config.out / "config.txt";
  auto out = open_text(path);
  out << format_config(config);
  close_text(out, path);
}

std::string angle_tag(double deg) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, deg);
  return std::string(buf, r.ptr);
}

Tensor noise_tensor(const NoiseField& n) {
  return Tensor::from_f32({static_cast<std::uint32_t>(n.height), static_cast<std::uint32_t>(n.width),
                           static_cast<std::uint32_t>(n.frames), static_cast<std::uint32_t>(n.channels)},
                          n.data);
}

}  // namespace

unsigned resolve_threads(std::optional<unsigned> flag, unsigned config_threads) {
  if (flag) {
    if (*flag == 0) throw ConfigError("--threads must be at least 1");
    return *flag;
  }
  if (config_threads > 0) return config_threads;
  if (const char* env = std::getenv("NOISESPHERE_THREADS"); env && *env) {
    const std::string_view v(env);
    unsigned n = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
    if (ec != std::errc() || ptr != v.data() + v.size() || n == 0) {
      throw ConfigError("NOISESPHERE_THREADS must be a positive integer, got '" + std::string(v) + "'");
    }
    return n;
  }
  return 1;
}

TriMesh load_scene_mesh(const fs::path& path, double extent) {
  require_file(path, "mesh");
  LoadedMesh loaded = load_obj(path);
  if (loaded.dropped_degenerate > 0) {
    std::cerr << "note: dropped " << loaded.dropped_degenerate << " degenerate faces from " << path.string() << "\n";
  }
  normalize_mesh(loaded.mesh, extent);
  return std::move(loaded.mesh);
}

Grid4D make_grid(const RunConfig& c) {
  const GridShape shape{c.grid_res, c.grid_res, c.grid_res, c.grid_frames};
  const Box box{Vec3::Constant(-c.grid_half_extent), Vec3::Constant(c.grid_half_extent)};
  return Grid4D(shape, box, c.density_scale, c.density_init);
}

FitConfig fit_config(const RunConfig& c) {
  FitConfig f;
  f.iterations = c.fit_iterations;
  f.views_per_iter = c.views_per_iter;
  f.learning_rate = c.learning_rate;
  f.final_lr_fraction = c.final_lr_fraction;
  f.time_coupling = c.time_coupling;
  f.seed = c.seed;
  f.views.azimuth_min = c.azimuth_min_deg * kDeg;
  f.views.azimuth_max = c.azimuth_max_deg * kDeg;
  f.views.elevation_min = c.elevation_min_deg * kDeg;
  f.views.elevation_max = c.elevation_max_deg * kDeg;
  f.views.radius = c.camera_radius;
  f.views.fov_y = c.fov_y_deg * kDeg;
  f.views.width = c.render_size;
  f.views.height = c.render_size;
  f.views.near = c.near;
  f.views.far = c.far;
  f.render = c.render_config();
  f.gbuffer.background = c.background;
  return f;
}

void write_checkpoint(const fs::path& path, const Grid4D& grid) {
  write_tensor_file(path, grid.to_tensors());
}

Grid4D read_checkpoint(const fs::path& path) {
  require_file(path, "checkpoint");
  return Grid4D::from_tensors(read_tensor_file(path));
}

// ---------------------------------------------------------------------------

void cmd_fit_static(const RunConfig& config) {
  config.validate();
  const TriMesh mesh = load_scene_mesh(config.mesh, config.mesh_extent);
  make_out_dir(config.out);
  write_effective_config(config);

  const fs::path csv_path = config.out / "fit_loss.csv";
  auto csv = open_text(csv_path);
  csv << "iteration,loss,rgb,depth,normal,azimuth,elevation,time\n";
  const FitConfig fit = fit_config(config);
  const FitResult result = fit_static(mesh, make_grid(config), fit, [&](const FitRecord& r, const Grid4D& grid) {
    csv << r.iteration << ',' << r.loss << ',' << r.rgb << ',' << r.depth << ',' << r.normal << ',' << r.azimuth
        << ',' << r.elevation << ',' << r.time << '\n';
    const int done = r.iteration + 1;
    if (config.checkpoint_every > 0 && done % config.checkpoint_every == 0 && done < fit.iterations) {
      write_checkpoint(config.out / ("static_iter" + std::to_string(done) + ".ckpt"), grid);
    }
    if (done % 100 == 0 || done == fit.iterations) {
      std::cerr << "fit-static " << done << "/" << fit.iterations << " loss " << r.loss << "\n";
    }
  });
  close_text(csv, csv_path);
  write_checkpoint(config.out / "static.ckpt", result.grid);
  std::cout << "wrote " << (config.out / "static.ckpt").string() << " and " << csv_path.string() << "\n";
}

namespace {

void check_checkpoint_matches(const Grid4D& grid, const RunConfig& c) {
  const GridShape expected{c.grid_res, c.grid_res, c.grid_res, c.grid_frames};
  const Box& box = grid.box();
  const bool box_ok = (box.lo - Vec3::Constant(-c.grid_half_extent)).isZero(0.0) &&
                      (box.hi - Vec3::Constant(c.grid_half_extent)).isZero(0.0);
  if (!(grid.shape() == expected) || !box_ok) {
    throw ConfigError("checkpoint grid does not match the config (grid_res, grid_frames, grid_half_extent)");
  }
}

void write_previews(const Grid4D& grid, const RunConfig& c, const fs::path& dir) {
  make_out_dir(dir);
  RenderConfig render = c.render_config();
  render.normals = false;
  const double times[] = {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};
  for (double az : c.render_azimuths_deg) {
    const Camera cam = c.camera(az, c.render_elevation_deg, c.render_size);
    for (int k = 0; k < 4; ++k) {
      const Frame f = render_frame(grid, cam, times[k], render);
      write_png(dir / ("az" + angle_tag(az) + "_t" + std::to_string(k) + ".png"),
                to_image8(f.width, f.height, f.rgb));
    }
  }
}

double frame_static_mae(const TriMesh& mesh, const Grid4D& grid, const RunConfig& c, const Camera& cam) {
  RenderConfig render = c.render_config();
  render.normals = true;
  GBufferOptions gopt;
  gopt.background = c.background;
  return static_loss(render_gbuffer(mesh, cam, gopt), render_frame(grid, cam, 0.0, render)).value;
}

}  // namespace

void cmd_animate(const RunConfig& config) {
  config.validate();
  const TriMesh mesh = load_scene_mesh(config.mesh, config.mesh_extent);
  Grid4D grid = read_checkpoint(config.checkpoint);
  check_checkpoint_matches(grid, config);
  make_out_dir(config.out);
  write_effective_config(config);

  const Camera front = config.camera(0.0, 0.0, config.render_size);
  const double mae_before = frame_static_mae(mesh, grid, config, front);

  const fs::path csv_path = config.out / "animate_loss.csv";
  auto csv = open_text(csv_path);
  csv << "iteration,i2v,mv,static,lambda,total,t_d,azimuth,elevation,i2v_grad_norm,mv_grad_norm,static_grad_norm\n";
  const AnimateResult result = animate(mesh, std::move(grid), config, [&](const AnimateRecord& r, const Grid4D&) {
    const LossReport& l = r.report;
    csv << r.iteration << ',' << l.i2v << ',' << l.mv << ',' << l.static_value << ',' << l.lambda << ',' << l.total
        << ',' << l.t_d << ',' << r.azimuth << ',' << r.elevation << ',' << l.i2v_grad_norm << ','
        << l.mv_grad_norm << ',' << l.static_grad_norm << '\n';
    const int done = r.iteration + 1;
    if (done % 10 == 0 || done == config.animate_iterations) {
      std::cerr << "animate " << done << "/" << config.animate_iterations << " total " << l.total << "\n";
    }
  });
  close_text(csv, csv_path);
  write_checkpoint(config.out / "animated.ckpt", result.grid);
  write_previews(result.grid, config, config.out / "preview");

  RenderConfig plain = config.render_config();
  plain.normals = false;
  const Eigen::Vector2d c0 = alpha_centroid(render_frame(result.grid, front, 0.0, plain));
  const Eigen::Vector2d c1 = alpha_centroid(render_frame(result.grid, front, 1.0, plain));
  const double factor = static_cast<double>(config.render_size) / config.latent_size;
  const fs::path summary_path = config.out / "animate_summary.txt";
  auto summary = open_text(summary_path);
  summary << "front_centroid_shift_latent_x = " << (c1.x() - c0.x()) / factor << "\n"
          << "front_centroid_shift_latent_y = " << (c1.y() - c0.y()) / factor << "\n"
          << "front_t0_static_loss_before = " << mae_before << "\n"
          << "front_t0_static_loss_after = " << frame_static_mae(mesh, result.grid, config, front) << "\n";
  close_text(summary, summary_path);
  std::cout << "wrote " << (config.out / "animated.ckpt").string() << ", " << csv_path.string() << " and previews\n";
}

void cmd_gen_noise(const RunConfig& config) {
  config.validate();
  if (config.noise_azimuths_deg.empty()) throw ConfigError("noise_azimuths_deg is empty");
  TimeVector times;
  if (config.noise_times.empty()) {
    SeededUniform draw(config.seed);
    times = sample_times(config.sampler_config(), std::ref(draw));
  } else {
    if (static_cast<int>(config.noise_times.size()) != config.frames) {
      throw ConfigError("noise_times must list exactly `frames` values");
    }
    times = make_time_vector(config.noise_times, config.frames);
  }
  const fs::path dir = config.out / "noise";
  make_out_dir(dir);
  write_effective_config(config);

  const TriMesh sphere = make_icosphere(config.sphere_subdivisions);
  const NoiseConfig ncfg = config.noise_config();
  write_tensor_file(dir / "times.vnt",
                    Tensor::from_f64({static_cast<std::uint32_t>(times.size())}, times.times));
  for (std::size_t k = 0; k < config.noise_azimuths_deg.size(); ++k) {
    const Camera cam = config.camera(config.noise_azimuths_deg[k], config.noise_elevation_deg, config.latent_size);
    const FaceMap faces = rasterize_face_map(sphere, cam);
    const NoiseField anchor = render_noise_field(faces, ncfg, NoiseLayer::anchor);
    const NoiseField aux = render_noise_field(faces, ncfg, NoiseLayer::aux);
    const NoiseField noise = interpolate_noise(anchor, aux, times, config.role_swap);
    const std::string tag = "view" + std::to_string(k);
    write_tensor_file(dir / (tag + "_noise.vnt"), noise_tensor(noise));
    write_tensor_file(dir / (tag + "_anchor.vnt"), noise_tensor(anchor));
    write_tensor_file(dir / (tag + "_aux.vnt"), noise_tensor(aux));
    write_tensor_file(dir / (tag + "_faces.vnt"),
                      Tensor::from_i32({static_cast<std::uint32_t>(faces.height),
                                        static_cast<std::uint32_t>(faces.width)},
                                       faces.face));
    for (int i = 0; i < noise.frames; ++i) {
      write_png(dir / (tag + "_frame" + std::to_string(i) + ".png"), noise_to_image8(noise, i));
    }
  }
  std::cout << "wrote noise for " << config.noise_azimuths_deg.size() << " views to " << dir.string() << "\n";
}

void cmd_mse_sweep(const RunConfig& config) {
  config.validate();
  TriMesh object;
  if (config.sweep_object == "mesh") {
    object = load_scene_mesh(config.mesh, config.mesh_extent);
  } else {
    object = make_sweep_icosphere(config.sweep_icosphere_subdivisions);
  }
  make_out_dir(config.out);
  write_effective_config(config);

  const fs::path csv_path = config.out / "sweep_pairs.csv";
  auto csv = open_text(csv_path);
  csv << "# mse: mean squared difference over latent pixels, frames and RGB channels (values in [0, 1])\n"
      << "seed,angle_a,angle_b,mse_consistent,mse_random\n";
  const fs::path summary_path = config.out / "sweep_summary.txt";
  auto summary = open_text(summary_path);
  int wins = 0;
  for (int s = 0; s < config.sweep_seeds; ++s) {
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(s);
    const SweepResult r = run_mse_sweep(object, config, seed);
    for (const SweepPair& p : r.pairs) {
      csv << seed << ',' << p.angle_a << ',' << p.angle_b << ',' << p.mse_consistent << ',' << p.mse_random << '\n';
    }
    const bool lower = r.mean_consistent < r.mean_random;
    wins += lower ? 1 : 0;
    summary << "seed " << seed << ": pairs " << r.pairs.size() << ", mean_consistent " << r.mean_consistent
            << ", mean_random " << r.mean_random << ", lower "
            << (lower ? "consistent" : (r.mean_consistent == r.mean_random ? "tie" : "random")) << "\n";
  }
  summary << "consistent lower in " << wins << "/" << config.sweep_seeds << " seeds\n";
  close_text(csv, csv_path);
  close_text(summary, summary_path);
  std::cout << "consistent noise lower in " << wins << "/" << config.sweep_seeds << " seeds; see "
            << summary_path.string() << "\n";
}

void cmd_render(const RunConfig& config) {
  config.validate();
  for (double t : config.render_times) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("render time " + angle_tag(t) + " is outside [0, 1]");
  }
  if (config.render_azimuths_deg.empty() || config.render_times.empty()) {
    throw ConfigError("render_azimuths_deg and render_times must be non-empty");
  }
  const Grid4D grid = read_checkpoint(config.checkpoint);
  const fs::path dir = config.out / "render";
  make_out_dir(dir);
  RenderConfig render = config.render_config();
  render.normals = false;
  for (double az : config.render_azimuths_deg) {
    const Camera cam = config.camera(az, config.render_elevation_deg, config.render_size);
    for (std::size_t k = 0; k < config.render_times.size(); ++k) {
      const Frame f = render_frame(grid, cam, config.render_times[k], render);
      const std::string stem = "az" + angle_tag(az) + "_t" + std::to_string(k);
      write_png(dir / (stem + ".png"), to_image8(f.width, f.height, f.rgb));
      write_depth_png16(dir / (stem + "_depth.png"), f, cam.near, cam.far);
    }
  }
  std::cout << "wrote " << config.render_azimuths_deg.size() * config.render_times.size() << " frames to "
            << dir.string() << "\n";
}

}  // namespace noisesphere
