#include "noisesphere/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

#include "noisesphere/error.hpp"

namespace noisesphere {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
  throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) + " (expected " +
                    expected + ")");
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) bad_value(key, v, "a number");
  return out;
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view v) {
  Int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "true or false");
}

std::vector<double> parse_list(std::string_view key, std::string_view v) {
  std::vector<double> out;
  if (v.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = v.find(',', start);
    out.push_back(parse_double(key, trim(v.substr(start, comma - start))));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string fmt(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string fmt_list(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ",";
    s += fmt(xs[i]);
  }
  return s;
}

struct Entry {
  const char* key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Entry number(const char* key, T RunConfig::*m) {
  if constexpr (std::is_floating_point_v<T>) {
    return {key, [=](RunConfig& c, std::string_view v) { c.*m = parse_double(key, v); },
            [=](const RunConfig& c) { return fmt(c.*m); }};
  } else {
    return {key, [=](RunConfig& c, std::string_view v) { c.*m = parse_int<T>(key, v); },
            [=](const RunConfig& c) { return std::to_string(c.*m); }};
  }
}

Entry flag(const char* key, bool RunConfig::*m) {
  return {key, [=](RunConfig& c, std::string_view v) { c.*m = parse_bool(key, v); },
          [=](const RunConfig& c) { return std::string(c.*m ? "true" : "false"); }};
}

Entry path(const char* key, std::filesystem::path RunConfig::*m) {
  return {key, [=](RunConfig& c, std::string_view v) { c.*m = std::filesystem::path(std::string(v)); },
          [=](const RunConfig& c) { return (c.*m).string(); }};
}

Entry list(const char* key, std::vector<double> RunConfig::*m) {
  return {key, [=](RunConfig& c, std::string_view v) { c.*m = parse_list(key, v); },
          [=](const RunConfig& c) { return fmt_list(c.*m); }};
}

template <typename E>
Entry choice(const char* key, E RunConfig::*m, std::vector<std::pair<const char*, E>> names) {
  return {key,
          [=](RunConfig& c, std::string_view v) {
            std::string expected;
            for (const auto& [name, value] : names) {
              if (v == name) {
                c.*m = value;
                return;
              }
              expected += expected.empty() ? name : std::string(" or ") + name;
            }
            bad_value(key, v, expected.c_str());
          },
          [=](const RunConfig& c) {
            for (const auto& [name, value] : names) {
              if (c.*m == value) return std::string(name);
            }
            return std::string("?");
          }};
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      number("seed", &RunConfig::seed),
      number("threads", &RunConfig::threads),
      path("out", &RunConfig::out),
      path("mesh", &RunConfig::mesh),
      path("checkpoint", &RunConfig::checkpoint),
      number("mesh_extent", &RunConfig::mesh_extent),
      number("camera_radius", &RunConfig::camera_radius),
      number("fov_y_deg", &RunConfig::fov_y_deg),
      number("near", &RunConfig::near),
      number("far", &RunConfig::far),
      number("render_size", &RunConfig::render_size),
      {"background",
       [](RunConfig& c, std::string_view v) {
         const auto xs = parse_list("background", v);
         if (xs.size() != 3) bad_value("background", v, "three comma-separated numbers");
         c.background = Vec3(xs[0], xs[1], xs[2]);
       },
       [](const RunConfig& c) { return fmt_list({c.background.x(), c.background.y(), c.background.z()}); }},
      number("azimuth_min_deg", &RunConfig::azimuth_min_deg),
      number("azimuth_max_deg", &RunConfig::azimuth_max_deg),
      number("elevation_min_deg", &RunConfig::elevation_min_deg),
      number("elevation_max_deg", &RunConfig::elevation_max_deg),
      number("grid_res", &RunConfig::grid_res),
      number("grid_frames", &RunConfig::grid_frames),
      number("grid_half_extent", &RunConfig::grid_half_extent),
      number("density_scale", &RunConfig::density_scale),
      number("density_init", &RunConfig::density_init),
      number("samples_per_ray", &RunConfig::samples_per_ray),
      number("termination_eps", &RunConfig::termination_eps),
      number("fit_iterations", &RunConfig::fit_iterations),
      number("views_per_iter", &RunConfig::views_per_iter),
      number("learning_rate", &RunConfig::learning_rate),
      number("final_lr_fraction", &RunConfig::final_lr_fraction),
      number("time_coupling", &RunConfig::time_coupling),
      number("checkpoint_every", &RunConfig::checkpoint_every),
      number("latent_size", &RunConfig::latent_size),
      number("frames", &RunConfig::frames),
      number("channels", &RunConfig::channels),
      number("sphere_subdivisions", &RunConfig::sphere_subdivisions),
      choice("aux_mode", &RunConfig::aux_mode,
             {{"per_face", AuxMode::per_face}, {"screen_fixed", AuxMode::screen_fixed}}),
      flag("role_swap", &RunConfig::role_swap),
      choice("time_mode", &RunConfig::time_mode,
             {{"anchored", SamplerMode::anchored}, {"legacy", SamplerMode::legacy}}),
      choice("weighting", &RunConfig::weighting,
             {{"constant", WeightingMode::constant}, {"alpha_bar", WeightingMode::alpha_bar}}),
      number("t_min", &RunConfig::t_min),
      number("t_max", &RunConfig::t_max),
      number("lambda", &RunConfig::lambda),
      flag("mask_enabled", &RunConfig::mask_enabled),
      choice("mv_mode", &RunConfig::mv_mode, {{"off", MvMode::off}, {"identity_preserve", MvMode::identity_preserve}}),
      number("velocity_x", &RunConfig::velocity_x),
      number("velocity_y", &RunConfig::velocity_y),
      number("growth", &RunConfig::growth),
      number("animate_iterations", &RunConfig::animate_iterations),
      number("animate_learning_rate", &RunConfig::animate_learning_rate),
      number("animate_azimuth_min_deg", &RunConfig::animate_azimuth_min_deg),
      number("animate_azimuth_max_deg", &RunConfig::animate_azimuth_max_deg),
      number("animate_elevation_min_deg", &RunConfig::animate_elevation_min_deg),
      number("animate_elevation_max_deg", &RunConfig::animate_elevation_max_deg),
      flag("forced_mask_zero", &RunConfig::forced_mask_zero),
      {"sweep_object",
       [](RunConfig& c, std::string_view v) {
         if (v != "icosphere" && v != "mesh") bad_value("sweep_object", v, "icosphere or mesh");
         c.sweep_object = std::string(v);
       },
       [](const RunConfig& c) { return c.sweep_object; }},
      number("sweep_icosphere_subdivisions", &RunConfig::sweep_icosphere_subdivisions),
      number("sweep_step_deg", &RunConfig::sweep_step_deg),
      number("sweep_elevation_deg", &RunConfig::sweep_elevation_deg),
      number("sweep_seeds", &RunConfig::sweep_seeds),
      number("sweep_t_start", &RunConfig::sweep_t_start),
      number("sweep_t_out", &RunConfig::sweep_t_out),
      number("noise_amplitude", &RunConfig::noise_amplitude),
      flag("sweep_wrap", &RunConfig::sweep_wrap),
      list("noise_azimuths_deg", &RunConfig::noise_azimuths_deg),
      number("noise_elevation_deg", &RunConfig::noise_elevation_deg),
      list("noise_times", &RunConfig::noise_times),
      list("render_azimuths_deg", &RunConfig::render_azimuths_deg),
      number("render_elevation_deg", &RunConfig::render_elevation_deg),
      list("render_times", &RunConfig::render_times),
  };
  return table;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
  for (const Entry& e : entries()) {
    if (key == e.key) {
      e.set(config, trim(value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      set_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string format_config(const RunConfig& config) {
  std::string out;
  for (const Entry& e : entries()) out += std::string(e.key) + " = " + e.get(config) + "\n";
  return out;
}

void RunConfig::validate() const {
  require(mesh_extent > 0.0 && mesh_extent <= 2.0 * grid_half_extent, "mesh_extent must fit inside the grid box");
  require(camera_radius > 0.0, "camera_radius must be positive");
  require(fov_y_deg > 0.0 && fov_y_deg < 180.0, "fov_y_deg must be in (0, 180)");
  require(near > 0.0 && far > near, "need 0 < near < far");
  require(render_size >= 2, "render_size must be at least 2");
  require(render_size % 2 == 0, "render_size must be even (latents are 2x2 box averages)");
  require(azimuth_max_deg > azimuth_min_deg, "azimuth range is empty");
  require(elevation_min_deg <= elevation_max_deg && elevation_min_deg > -90.0 && elevation_max_deg < 90.0,
          "elevation range must lie inside (-90, 90)");
  require(grid_res >= 2 && grid_frames >= 1, "grid needs grid_res >= 2 and grid_frames >= 1");
  require(grid_half_extent > 0.0, "grid_half_extent must be positive");
  require(density_scale > 0.0, "density_scale must be positive");
  require(samples_per_ray >= 2, "samples_per_ray must be at least 2");
  require(termination_eps >= 0.0 && termination_eps < 1.0, "termination_eps must be in [0, 1)");
  require(fit_iterations >= 0 && views_per_iter >= 1, "bad fit iteration settings");
  require(learning_rate > 0.0 && animate_learning_rate > 0.0, "learning rates must be positive");
  require(time_coupling >= 0.0 && time_coupling <= 1.0, "time_coupling must lie in [0, 1]");
  require(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0, "final_lr_fraction must lie in (0, 1]");
  require(checkpoint_every >= 0, "checkpoint_every must be non-negative");
  require(latent_size * 2 == render_size, "latent_size must be render_size / 2");
  require(animate_iterations >= 0, "animate_iterations must be non-negative");
  require(animate_azimuth_max_deg >= animate_azimuth_min_deg, "animation azimuth range is empty");
  require(animate_elevation_min_deg <= animate_elevation_max_deg && animate_elevation_min_deg > -90.0 &&
              animate_elevation_max_deg < 90.0,
          "animation elevation range must lie inside (-90, 90)");
  require(sweep_step_deg > 0.0 && sweep_step_deg <= 360.0, "sweep_step_deg must be in (0, 360]");
  require(sweep_seeds >= 1, "sweep_seeds must be at least 1");
  require(sweep_t_start > 0.0 && sweep_t_start < 1.0, "sweep_t_start must be in (0, 1)");
  require(sweep_t_out >= 0.0 && sweep_t_out < 1.0, "sweep_t_out must be in [0, 1)");
  require(noise_amplitude >= 0.0, "noise_amplitude must be non-negative");
  require(sweep_icosphere_subdivisions >= 0 && sweep_icosphere_subdivisions <= 7,
          "sweep_icosphere_subdivisions must be in [0, 7]");
  noise_config().validate();
  require(frames >= 2, "frames must be at least 2");
  sds_config().validate();
  require(prompt().growth > -1.0, "growth must exceed -1");
}

NoiseConfig RunConfig::noise_config() const {
  NoiseConfig c;
  c.height = latent_size;
  c.width = latent_size;
  c.frames = frames;
  c.channels = channels;
  c.seed = seed;
  c.sphere_subdivisions = sphere_subdivisions;
  c.aux_mode = aux_mode;
  return c;
}

SamplerConfig RunConfig::sampler_config() const {
  SamplerConfig c;
  c.frames = frames;
  c.mode = time_mode;
  c.seed = seed;
  return c;
}

RenderConfig RunConfig::render_config() const {
  RenderConfig c;
  c.num_samples = samples_per_ray;
  c.background = background;
  c.termination_eps = termination_eps;
  return c;
}

SdsConfig RunConfig::sds_config() const {
  SdsConfig c;
  c.weighting = weighting;
  c.t_min = t_min;
  c.t_max = t_max;
  c.lambda = lambda;
  c.mask_enabled = mask_enabled;
  c.mv_mode = mv_mode;
  return c;
}

MotionDescriptor RunConfig::prompt() const { return {velocity_x, velocity_y, growth}; }

Camera RunConfig::camera(double azimuth_deg, double elevation_deg, int size) const {
  return camera_from_view(azimuth_deg * kDeg, elevation_deg * kDeg, camera_radius, fov_y_deg * kDeg, size, size,
                          near, far);
}

}  // namespace noisesphere
