#pragma once

// PNG export for frames, depth maps and noise visualizations.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "noisesphere/field4d.hpp"
#include "noisesphere/noisefield.hpp"

namespace noisesphere {

struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 3;  // 1 or 3
  std::vector<std::uint8_t> data;
};

struct Image16 {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> data;  // single channel
};

void write_png(const std::filesystem::path& path, const Image8& image);
void write_png16(const std::filesystem::path& path, const Image16& image);
Image8 read_png(const std::filesystem::path& path);
Image16 read_png16(const std::filesystem::path& path);

/// Values in [0,1] per channel, rounded to 8 bits; out-of-range values clamp.
Image8 to_image8(int width, int height, const std::vector<double>& rgb);

/// Affine map of [near, far] onto [0, 65535].
Image16 depth_to_image16(int width, int height, const std::vector<double>& depth, double near, double far);

/// Writes `<path>` and a sidecar `<path>.txt` recording the depth mapping.
void write_depth_png16(const std::filesystem::path& path, const Frame& frame, double near, double far);

/// Channels 0-2 of one noise frame, [-3, 3] mapped to [0, 255].
Image8 noise_to_image8(const NoiseField& noise, int frame);

}  // namespace noisesphere
