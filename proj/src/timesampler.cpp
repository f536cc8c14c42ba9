#include "noisesphere/timesampler.hpp"

#include <algorithm>
#include <cmath>

#include "noisesphere/error.hpp"

namespace noisesphere {
namespace {

void check(const SamplerConfig& config) {
  if (config.frames < 2) throw ConfigError("time sampler needs at least 2 frames");
}

}  // namespace

TimeVector sample_times_anchored(const SamplerConfig& config, const UniformDraw& draw) {
  check(config);
  const int v = config.frames;
  std::vector<double> times(static_cast<std::size_t>(v));
  times[0] = 0.0;
  for (int i = 1; i < v; ++i) {
    const double lo = static_cast<double>(i) / v;
    const double hi = static_cast<double>(i + 1) / v;
    double t = lo + draw() / v;
    if (t >= hi) t = std::nextafter(hi, 0.0);
    times[static_cast<std::size_t>(i)] = t;
  }
  return make_time_vector(std::move(times), v);
}

TimeVector sample_times_legacy(const SamplerConfig& config, const UniformDraw& draw) {
  check(config);
  const int v = config.frames;
  std::vector<double> times(static_cast<std::size_t>(v));
  times[0] = draw() / v;
  for (int i = 1; i < v; ++i) times[static_cast<std::size_t>(i)] = times[0] + draw() * (1.0 - times[0]);
  std::sort(times.begin() + 1, times.end());
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (times[i] <= times[i - 1]) times[i] = times[i - 1] + kLegacyJitter;
  }
  if (times.back() > 1.0) {
    times.back() = 1.0;
    for (std::size_t i = times.size() - 1; i-- > 0;) {
      if (times[i] >= times[i + 1]) times[i] = times[i + 1] - kLegacyJitter;
    }
  }
  return make_time_vector(std::move(times), v);
}

TimeVector sample_times(const SamplerConfig& config, const UniformDraw& draw) {
  return config.mode == SamplerMode::anchored ? sample_times_anchored(config, draw)
                                              : sample_times_legacy(config, draw);
}

}  // namespace noisesphere
