#pragma once

// Subcommand implementations behind the command-line tool. Each reads a
// validated RunConfig and writes its artifacts under `config.out`.

#include <filesystem>
#include <optional>

#include "noisesphere/field4d.hpp"
#include "noisesphere/run_config.hpp"
#include "noisesphere/staticfit.hpp"

namespace noisesphere {

/// Worker count: the explicit flag, else a nonzero `threads` config value,
/// else NOISESPHERE_THREADS, else 1. Throws ConfigError on a malformed
/// environment value.
unsigned resolve_threads(std::optional<unsigned> flag, unsigned config_threads);

/// Loads an OBJ file and scales it into the scene's unit box.
TriMesh load_scene_mesh(const std::filesystem::path& path, double extent);

Grid4D make_grid(const RunConfig& config);
FitConfig fit_config(const RunConfig& config);

void write_checkpoint(const std::filesystem::path& path, const Grid4D& grid);
Grid4D read_checkpoint(const std::filesystem::path& path);

void cmd_fit_static(const RunConfig& config);
void cmd_animate(const RunConfig& config);
void cmd_gen_noise(const RunConfig& config);
void cmd_mse_sweep(const RunConfig& config);
void cmd_render(const RunConfig& config);

}  // namespace noisesphere
