#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numbers>

#include "noisesphere/error.hpp"
#include "noisesphere/run_config.hpp"

using namespace noisesphere;

TEST(RunConfig, DefaultsValidate) {
  const RunConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.frames, 16);
  EXPECT_EQ(c.render_azimuths_deg, (std::vector<double>{0.0, 90.0, 180.0, 270.0}));
  EXPECT_EQ(c.noise_config().height, 32);
  EXPECT_EQ(c.render_config().num_samples, c.samples_per_ray);
}

TEST(RunConfig, ParsesValuesCommentsAndBlankLines) {
  const RunConfig c = parse_config(
      "# scene\n"
      "seed = 18446744073709551615\n"
      "\n"
      "  mesh = data/cube.obj   # trailing comment\n"
      "lambda=1000\n"
      "background = 0, 0.5 ,1\n"
      "aux_mode = screen_fixed\n"
      "mask_enabled = false\n"
      "render_times = 0, 0.25,1\n"
      "noise_times =\n"
      "velocity_x = 0.3\r\n");
  EXPECT_EQ(c.seed, 18446744073709551615ull);
  EXPECT_EQ(c.mesh, std::filesystem::path("data/cube.obj"));
  EXPECT_EQ(c.lambda, 1000.0);
  EXPECT_EQ(c.background, Vec3(0.0, 0.5, 1.0));
  EXPECT_EQ(c.aux_mode, AuxMode::screen_fixed);
  EXPECT_FALSE(c.mask_enabled);
  EXPECT_EQ(c.render_times, (std::vector<double>{0.0, 0.25, 1.0}));
  EXPECT_TRUE(c.noise_times.empty());
  EXPECT_EQ(c.prompt().velocity_x, 0.3);
}

TEST(RunConfig, ErrorsNameTheLine) {
  auto message = [](const char* text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("seed = 1\nbogus_key = 3\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("seed = 1\nbogus_key = 3\n").find("bogus_key"), std::string::npos);
  EXPECT_NE(message("frames 16\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("frames = sixteen\n").find("integer"), std::string::npos);
  EXPECT_NE(message("lambda = 1e400\n").find("number"), std::string::npos);
  EXPECT_NE(message("seed = -1\n").find("seed"), std::string::npos);
  EXPECT_NE(message("aux_mode = sideways\n").find("per_face"), std::string::npos);
  EXPECT_NE(message("background = 1, 2\n").find("three"), std::string::npos);
  EXPECT_NE(message("mask_enabled = maybe\n").find("true or false"), std::string::npos);
}

TEST(RunConfig, FormatRoundTrips) {
  RunConfig c;
  c.seed = 99;
  c.fov_y_deg = 1.0 / 3.0;
  c.noise_times = {0.1, 0.7};
  c.mv_mode = MvMode::identity_preserve;
  c.out = "some dir/x";
  const RunConfig back = parse_config(format_config(c));
  EXPECT_EQ(format_config(back), format_config(c));
  EXPECT_EQ(back.fov_y_deg, c.fov_y_deg);
  EXPECT_EQ(back.out, c.out);
}

TEST(RunConfig, OverridesApplyOnTopOfBase) {
  RunConfig base;
  base.frames = 8;
  const RunConfig c = parse_config("channels = 3\n", base);
  EXPECT_EQ(c.frames, 8);
  EXPECT_EQ(c.channels, 3);
  RunConfig d;
  set_config_value(d, "sweep_object", "mesh");
  EXPECT_EQ(d.sweep_object, "mesh");
  EXPECT_THROW(set_config_value(d, "sweep_object", "teapot"), ConfigError);
  EXPECT_THROW(set_config_value(d, "nope", "1"), ConfigError);
}

TEST(RunConfig, ValidationCatchesInconsistencies) {
  auto invalid = [](auto mutate) {
    RunConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  invalid([](RunConfig& c) { c.latent_size = 20; });
  invalid([](RunConfig& c) { c.render_size = 63; });
  invalid([](RunConfig& c) { c.far = c.near; });
  invalid([](RunConfig& c) { c.frames = 1; });
  invalid([](RunConfig& c) { c.t_min = 0.9; c.t_max = 0.1; });
  invalid([](RunConfig& c) { c.lambda = -1.0; });
  invalid([](RunConfig& c) { c.time_coupling = 2.0; });
  invalid([](RunConfig& c) { c.final_lr_fraction = 0.0; });
  invalid([](RunConfig& c) { c.elevation_max_deg = 90.0; });
  invalid([](RunConfig& c) { c.mesh_extent = 1.5; });
  invalid([](RunConfig& c) { c.sweep_step_deg = 0.0; });
  invalid([](RunConfig& c) { c.growth = -1.0; });
}

TEST(RunConfig, LoadFromFile) {
  const auto dir = std::filesystem::temp_directory_path() / "noisesphere_run_config_test";
  std::filesystem::create_directories(dir);
  const auto p = dir / "a.cfg";
  std::ofstream(p) << "frames = 4\nbad = 1\n";
  try {
    load_config(p);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("a.cfg"), std::string::npos);
  }
  std::ofstream(p) << "frames = 4\n";
  EXPECT_EQ(load_config(p).frames, 4);
  EXPECT_THROW(load_config(dir / "missing.cfg"), IoError);
  std::filesystem::remove_all(dir);
}

TEST(RunConfig, CameraUsesDegrees) {
  RunConfig c;
  const Camera cam = c.camera(90.0, 0.0, 8);
  EXPECT_NEAR(cam.azimuth, std::numbers::pi / 2, 1e-15);
  EXPECT_EQ(cam.width, 8);
  EXPECT_EQ(cam.far, c.far);
}
