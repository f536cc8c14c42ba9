#pragma once

// View-consistent latent noise. Every face of a canonical sphere carries a
// V x C block of standard-normal values; rendering the sphere from a camera
// maps those blocks to pixels, so a face seen from two cameras contributes
// bit-identical noise to both images.

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "noisesphere/geometry.hpp"

namespace noisesphere {

/// Deterministic standard-normal value for a key. Counter-based: the result
/// depends only on (seed, key), never on call order.
double hash_normal(std::uint64_t seed, std::initializer_list<std::uint64_t> key);

/// Uniform in [0, 1) with the same keying as hash_normal.
double hash_uniform(std::uint64_t seed, std::initializer_list<std::uint64_t> key);

enum class NoiseLayer : std::uint8_t { anchor = 0, aux = 1 };

enum class AuxMode : std::uint8_t {
  per_face,      // the auxiliary tensor is a second per-face attribute, rendered per view
  screen_fixed,  // the auxiliary tensor is one fixed H x W x V x C block
};

struct NoiseConfig {
  int height = 32;
  int width = 32;
  int frames = 16;
  int channels = 4;
  std::uint64_t seed = 0;
  int sphere_subdivisions = 3;
  AuxMode aux_mode = AuxMode::per_face;

  void validate() const;
};

enum class NoiseProvenance : std::uint8_t { anchor, aux, interpolated, random };

/// H x W x V x C float tensor, row-major in that order.
struct NoiseField {
  int height = 0;
  int width = 0;
  int frames = 0;
  int channels = 0;
  NoiseProvenance provenance = NoiseProvenance::random;
  std::vector<float> data;

  NoiseField() = default;
  NoiseField(int h, int w, int v, int c, NoiseProvenance p);

  std::size_t index(int y, int x, int frame, int c) const {
    return ((static_cast<std::size_t>(y) * width + x) * frames + frame) * channels + c;
  }
  float at(int y, int x, int frame, int c) const { return data[index(y, x, frame, c)]; }
  float& at(int y, int x, int frame, int c) { return data[index(y, x, frame, c)]; }
  bool same_shape(const NoiseField& o) const {
    return height == o.height && width == o.width && frames == o.frames && channels == o.channels;
  }
};

/// Noise attribute of one sphere face.
float face_noise(std::uint64_t seed, std::int32_t face_id, int frame, int channel, NoiseLayer layer);

/// Noise for a pixel that the sphere does not cover.
float background_noise(std::uint64_t seed, int x, int y, int frame, int channel, NoiseLayer layer);

/// Renders S (anchor) or the auxiliary tensor for one camera. The camera
/// resolution must equal (width, height) of the config.
NoiseField render_noise_field(const TriMesh& sphere, const Camera& camera, const NoiseConfig& config,
                              NoiseLayer layer);
NoiseField render_noise_field(const FaceMap& faces, const NoiseConfig& config, NoiseLayer layer);

/// Frame times with their preceding anchors i/V and offsets tau = t - anchor.
struct TimeVector {
  std::vector<double> times;
  std::vector<double> anchors;
  std::vector<double> offsets;

  std::size_t size() const { return times.size(); }
};

/// Builds the anchor/offset decomposition for V = frames anchors. Throws
/// DomainError unless times are strictly increasing inside [0, 1].
TimeVector make_time_vector(std::vector<double> times, int frames);

/// Per frame i: sqrt(1 - tau_i) * aux + sqrt(tau_i) * anchor.
/// With swap_roles the two tensors trade weights. Throws DomainError when a
/// tau falls outside [0, 1] and ShapeError when shapes disagree.
NoiseField interpolate_noise(const NoiseField& anchor, const NoiseField& aux, const TimeVector& times,
                             bool swap_roles = false);

/// I.i.d. standard normal field keyed by config.seed.
NoiseField random_noise(const NoiseConfig& config);

}  // namespace noisesphere
