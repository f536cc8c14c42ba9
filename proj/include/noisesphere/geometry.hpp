#pragma once

// Cameras, triangle meshes and the CPU ray caster used for both the input
// mesh G-buffer and the noise sphere's pixel-to-face map.

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace noisesphere {

using Vec3 = Eigen::Vector3d;

/// Orbit camera looking at the origin with +z up.
///
/// Pixel (u, v) has column u and row v, row 0 at the top of the image. The
/// ray through a pixel passes through its center.
struct Camera {
  double azimuth = 0.0;    // radians, reduced to [0, 2pi)
  double elevation = 0.0;  // radians, |elevation| < pi/2
  double radius = 3.0;
  double fov_y = 0.6;  // radians
  int width = 1;
  int height = 1;
  double near = 0.1;
  double far = 10.0;

  Vec3 eye = Vec3::Zero();
  Vec3 forward = Vec3::UnitX();
  Vec3 right = Vec3::UnitY();
  Vec3 up = Vec3::UnitZ();

  /// Unit direction of the ray through the center of pixel (u, v).
  Vec3 pixel_direction(int u, int v) const;
  int pixel_count() const { return width * height; }
};

/// Builds a camera at radius*(cos e cos a, cos e sin a, sin e).
/// near/far default to radius -/+ 1.5 (near clamped to stay positive).
/// Throws DomainError when |elevation| >= pi/2 or any intrinsic is invalid.
Camera camera_from_view(double azimuth, double elevation, double radius, double fov_y,
                        int width, int height, std::optional<double> near = std::nullopt,
                        std::optional<double> far = std::nullopt);

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::int32_t, 3>> faces;
  /// Per-vertex RGB in [0,1]; empty means uniform gray.
  std::vector<Vec3> colors;

  static constexpr double kFallbackGray = 0.5;

  Vec3 vertex_color(std::size_t i) const;
  Vec3 face_normal(std::size_t f) const;  // unit, right-hand winding
  double face_area(std::size_t f) const;
  bool empty() const { return faces.empty(); }
};

/// Throws ShapeError when a face index is out of range or colors are mis-sized.
void validate_mesh(const TriMesh& mesh);

/// Removes zero-area faces in place and returns how many were dropped.
std::size_t drop_degenerate_faces(TriMesh& mesh, double min_area = 1e-14);

/// Uniformly scales and translates the mesh so that its axis-aligned bounds
/// are centered at the origin with the largest side equal to `extent`.
void normalize_mesh(TriMesh& mesh, double extent = 0.9);

/// Unit icosphere; 20 * 4^subdivisions faces. Throws LimitError above 7.
TriMesh make_icosphere(int subdivisions);

inline constexpr int kMaxIcosphereSubdivisions = 7;

struct TriangleHit {
  double t = 0.0;
  std::array<double, 3> barycentric{};  // weights of vertices a, b, c
};

/// Moller-Trumbore intersection. Returns a hit only for t > 0.
std::optional<TriangleHit> intersect_ray_triangle(const Vec3& origin, const Vec3& direction,
                                                  const Vec3& a, const Vec3& b, const Vec3& c);

struct FaceMap {
  static constexpr std::int32_t kBackground = -1;

  int width = 0;
  int height = 0;
  std::vector<std::int32_t> face;  // row-major, kBackground where nothing was hit
  std::vector<double> depth;       // hit distance along the unit ray; far for background

  std::int32_t at(int u, int v) const { return face[static_cast<std::size_t>(v) * width + u]; }
};

/// Nearest face hit by each pixel-center ray, restricted to [near, far].
/// Equal distances resolve to the lower face id.
FaceMap rasterize_face_map(const TriMesh& mesh, const Camera& camera);

struct GBuffer {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;     // width*height*3
  std::vector<double> depth;   // width*height, far on background
  std::vector<double> normal;  // width*height*3, zero on background
  std::vector<std::uint8_t> mask;

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

struct GBufferOptions {
  Vec3 background = Vec3::Ones();
  bool smooth_normals = false;
};

GBuffer render_gbuffer(const TriMesh& mesh, const Camera& camera,
                       const GBufferOptions& options = {});

// OBJ subset: `v x y z [r g b]` and `f i j k ...` (1-based or negative
// relative indices, `i/j/k` tokens accepted, polygons fan-triangulated).
struct LoadedMesh {
  TriMesh mesh;
  std::size_t dropped_degenerate = 0;
};

LoadedMesh load_obj(const std::filesystem::path& path);
void write_obj(const std::filesystem::path& path, const TriMesh& mesh);

}  // namespace noisesphere
