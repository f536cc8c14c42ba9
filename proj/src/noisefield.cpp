#include "noisesphere/noisefield.hpp"

#include <cmath>
#include <numbers>

#include "noisesphere/error.hpp"
#include "noisesphere/parallel.hpp"

namespace noisesphere {
namespace {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// domain tags keep face, background and i.i.d. streams disjoint
constexpr std::uint64_t kFaceDomain = 0xfaceULL;
constexpr std::uint64_t kBackgroundDomain = 0xb6ULL;
constexpr std::uint64_t kRandomDomain = 0x4a4dULL;

std::uint64_t hash_key(std::uint64_t seed, std::initializer_list<std::uint64_t> key) {
  std::uint64_t h = splitmix64(seed);
  for (auto k : key) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

double normal_from_hash(std::uint64_t h) {
  const double u1 = to_unit(splitmix64(h ^ 0x1ULL)) + 0x1.0p-53;  // (0, 1]
  const double u2 = to_unit(splitmix64(h ^ 0x2ULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

double hash_normal(std::uint64_t seed, std::initializer_list<std::uint64_t> key) {
  return normal_from_hash(hash_key(seed, key));
}

double hash_uniform(std::uint64_t seed, std::initializer_list<std::uint64_t> key) {
  return to_unit(splitmix64(hash_key(seed, key)));
}

void NoiseConfig::validate() const {
  if (height < 1 || width < 1 || frames < 1 || channels < 1) {
    throw ConfigError("noise dimensions must be positive");
  }
  if (sphere_subdivisions < 0 || sphere_subdivisions > kMaxIcosphereSubdivisions) {
    throw LimitError("sphere_subdivisions out of range");
  }
}

NoiseField::NoiseField(int h, int w, int v, int c, NoiseProvenance p)
    : height(h), width(w), frames(v), channels(c), provenance(p),
      data(static_cast<std::size_t>(h) * w * v * c, 0.0f) {}

float face_noise(std::uint64_t seed, std::int32_t face_id, int frame, int channel, NoiseLayer layer) {
  return static_cast<float>(hash_normal(seed, {kFaceDomain, static_cast<std::uint64_t>(face_id),
                                               static_cast<std::uint64_t>(frame),
                                               static_cast<std::uint64_t>(channel),
                                               static_cast<std::uint64_t>(layer)}));
}

float background_noise(std::uint64_t seed, int x, int y, int frame, int channel, NoiseLayer layer) {
  return static_cast<float>(hash_normal(
      seed, {kBackgroundDomain, static_cast<std::uint64_t>(x), static_cast<std::uint64_t>(y),
             static_cast<std::uint64_t>(frame), static_cast<std::uint64_t>(channel),
             static_cast<std::uint64_t>(layer)}));
}

NoiseField render_noise_field(const FaceMap& faces, const NoiseConfig& config, NoiseLayer layer) {
  config.validate();
  if (faces.width != config.width || faces.height != config.height) {
    throw ShapeError("face map resolution must equal the noise latent resolution");
  }
  const bool screen_fixed = layer == NoiseLayer::aux && config.aux_mode == AuxMode::screen_fixed;
  NoiseField out(config.height, config.width, config.frames, config.channels,
                 layer == NoiseLayer::anchor ? NoiseProvenance::anchor : NoiseProvenance::aux);
  parallel_for(static_cast<std::size_t>(config.height), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < config.width; ++x) {
      const auto face = faces.at(x, y);
      for (int i = 0; i < config.frames; ++i) {
        for (int c = 0; c < config.channels; ++c) {
          out.at(y, x, i, c) = (screen_fixed || face == FaceMap::kBackground)
                                   ? background_noise(config.seed, x, y, i, c, layer)
                                   : face_noise(config.seed, face, i, c, layer);
        }
      }
    }
  });
  return out;
}

NoiseField render_noise_field(const TriMesh& sphere, const Camera& camera, const NoiseConfig& config,
                              NoiseLayer layer) {
  if (camera.width != config.width || camera.height != config.height) {
    throw ShapeError("camera resolution must equal the noise latent resolution");
  }
  const bool screen_fixed = layer == NoiseLayer::aux && config.aux_mode == AuxMode::screen_fixed;
  if (screen_fixed) {
    FaceMap empty;
    empty.width = config.width;
    empty.height = config.height;
    empty.face.assign(static_cast<std::size_t>(config.width) * config.height, FaceMap::kBackground);
    return render_noise_field(empty, config, layer);
  }
  return render_noise_field(rasterize_face_map(sphere, camera), config, layer);
}

TimeVector make_time_vector(std::vector<double> times, int frames) {
  if (frames < 1) throw DomainError("need at least one anchor");
  TimeVector tv;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("frame times must lie in [0, 1]");
    if (i > 0 && !(t > times[i - 1])) throw DomainError("frame times must be strictly increasing");
    const double slot = std::min(std::floor(t * frames), static_cast<double>(frames - 1));
    tv.anchors.push_back(slot / frames);
    tv.offsets.push_back(t - slot / frames);
  }
  tv.times = std::move(times);
  return tv;
}

NoiseField interpolate_noise(const NoiseField& anchor, const NoiseField& aux, const TimeVector& times,
                             bool swap_roles) {
  if (!anchor.same_shape(aux)) throw ShapeError("anchor and aux noise shapes differ");
  if (times.size() != static_cast<std::size_t>(anchor.frames)) {
    throw ShapeError("time vector length must equal the frame count");
  }
  for (double tau : times.offsets) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw DomainError("tau outside [0, 1]");
  }
  const NoiseField& lead = swap_roles ? anchor : aux;   // weight sqrt(1 - tau)
  const NoiseField& trail = swap_roles ? aux : anchor;  // weight sqrt(tau)
  NoiseField out(anchor.height, anchor.width, anchor.frames, anchor.channels,
                 NoiseProvenance::interpolated);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      for (int i = 0; i < out.frames; ++i) {
        const double tau = times.offsets[static_cast<std::size_t>(i)];
        const double wl = std::sqrt(1.0 - tau);
        const double wt = std::sqrt(tau);
        for (int c = 0; c < out.channels; ++c) {
          const auto k = out.index(y, x, i, c);
          if (tau == 0.0) {
            out.data[k] = lead.data[k];
          } else if (tau == 1.0) {
            out.data[k] = trail.data[k];
          } else {
            out.data[k] = static_cast<float>(wl * lead.data[k] + wt * trail.data[k]);
          }
        }
      }
    }
  }
  return out;
}

NoiseField random_noise(const NoiseConfig& config) {
  config.validate();
  NoiseField out(config.height, config.width, config.frames, config.channels, NoiseProvenance::random);
  for (std::size_t k = 0; k < out.data.size(); ++k) {
    out.data[k] = static_cast<float>(hash_normal(config.seed, {kRandomDomain, k}));
  }
  return out;
}

}  // namespace noisesphere
