#pragma once

#include <cstdint>
#include <functional>
#include <random>

#include "noisesphere/noisefield.hpp"

namespace noisesphere {

/// Source of uniform variates in [0, 1).
using UniformDraw = std::function<double()>;

/// Seeded uniform source with a portable bit-level definition (the standard
/// distributions are implementation-defined).
class SeededUniform {
 public:
  explicit SeededUniform(std::uint64_t seed) : engine_(seed) {}
  // Copying would silently replay the stream; pass std::ref(draw) where a
  // UniformDraw is expected.
  SeededUniform(const SeededUniform&) = delete;
  SeededUniform& operator=(const SeededUniform&) = delete;
  SeededUniform(SeededUniform&&) = default;
  SeededUniform& operator=(SeededUniform&&) = default;
  double operator()() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

enum class SamplerMode : std::uint8_t { anchored, legacy };

struct SamplerConfig {
  int frames = 16;
  SamplerMode mode = SamplerMode::anchored;
  std::uint64_t seed = 0;
};

/// t_0 = 0; t_i = i/V + eps_i with eps_i ~ U[0, 1/V).
TimeVector sample_times_anchored(const SamplerConfig& config, const UniformDraw& draw);

/// t_0 ~ U[0, 1/V]; the other V-1 times i.i.d. U[t_0, 1], sorted, then nudged
/// by 1e-6 steps where needed so the sequence is strictly increasing.
TimeVector sample_times_legacy(const SamplerConfig& config, const UniformDraw& draw);

TimeVector sample_times(const SamplerConfig& config, const UniformDraw& draw);

inline constexpr double kLegacyJitter = 1e-6;

}  // namespace noisesphere
