// noisesphere: command-line driver.
//
//   noisesphere <fit-static|animate|gen-noise|mse-sweep|render>
//               [--config PATH] [--seed U64] [--out DIR] [--threads N] [--set key=value]...
//
// Exit codes: 0 success, 1 user error (bad config, missing input, invalid
// value), 2 internal error.

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "noisesphere/commands.hpp"
#include "noisesphere/error.hpp"
#include "noisesphere/parallel.hpp"
#include "noisesphere/run_config.hpp"

namespace ns = noisesphere;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
  std::vector<std::string> overrides;
};

ns::RunConfig build_config(const Options& o) {
  ns::RunConfig c = o.config_path.empty() ? ns::RunConfig{} : ns::load_config(o.config_path);
  for (const std::string& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ns::ConfigError("--set expects key=value, got '" + kv + "'");
    ns::set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out = *o.out;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"View-consistent noise and space-time grid toolkit"};
  app.require_subcommand(1);

  Options opts;
  const std::map<std::string, std::function<void(const ns::RunConfig&)>> commands = {
      {"fit-static", ns::cmd_fit_static}, {"animate", ns::cmd_animate},   {"gen-noise", ns::cmd_gen_noise},
      {"mse-sweep", ns::cmd_mse_sweep},   {"render", ns::cmd_render},
  };
  const std::map<std::string, std::string> help = {
      {"fit-static", "Fit the grid so every time slice reproduces the input mesh"},
      {"animate", "Distill motion into a fitted grid with the toy denoiser"},
      {"gen-noise", "Export view-consistent noise tensors and previews"},
      {"mse-sweep", "Compare adjacent-view MSE with consistent and random noise"},
      {"render", "Render RGB and depth frames from a checkpoint"},
  };
  for (const auto& [name, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", opts.config_path, "Key/value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opts.seed, "Random seed (unsigned 64-bit)");
    sub->add_option("--out", opts.out, "Output directory");
    sub->add_option("--threads", opts.threads, "Worker threads (default: NOISESPHERE_THREADS, else 1)");
    sub->add_option("--set", opts.overrides, "Override one config key, as key=value");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    const ns::RunConfig config = build_config(opts);
    ns::set_thread_count(ns::resolve_threads(opts.threads, config.threads));
    for (const auto& [name, fn] : commands) {
      if (app.got_subcommand(name)) fn(config);
    }
    return 0;
  } catch (const ns::UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
