#include "noisesphere/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <string>

#include "noisesphere/error.hpp"
#include "noisesphere/parallel.hpp"

namespace noisesphere {

Vec3 Camera::pixel_direction(int u, int v) const {
  const double tan_half = std::tan(0.5 * fov_y);
  const double aspect = static_cast<double>(width) / height;
  const double x = ((u + 0.5) / width * 2.0 - 1.0) * tan_half * aspect;
  const double y = (1.0 - (v + 0.5) / height * 2.0) * tan_half;
  return (forward + x * right + y * up).normalized();
}

Camera camera_from_view(double azimuth, double elevation, double radius, double fov_y,
                        int width, int height, std::optional<double> near,
                        std::optional<double> far) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  if (!(std::abs(elevation) < 0.5 * std::numbers::pi)) {
    throw DomainError("camera elevation must satisfy |e| < pi/2 (degenerate up vector)");
  }
  if (!(radius > 0.0)) throw DomainError("camera radius must be positive");
  if (!(fov_y > 0.0 && fov_y < std::numbers::pi)) throw DomainError("fov_y must lie in (0, pi)");
  if (width < 1 || height < 1) throw DomainError("camera resolution must be at least 1x1");

  Camera cam;
  double a = std::fmod(azimuth, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  cam.azimuth = a;
  cam.elevation = elevation;
  cam.radius = radius;
  cam.fov_y = fov_y;
  cam.width = width;
  cam.height = height;
  cam.near = near.value_or(std::max(1e-3, radius - 1.5));
  cam.far = far.value_or(radius + 1.5);
  if (!(cam.near > 0.0 && cam.near < cam.far)) throw DomainError("need 0 < near < far");

  const double ce = std::cos(elevation);
  cam.eye = radius * Vec3(ce * std::cos(a), ce * std::sin(a), std::sin(elevation));
  cam.forward = (-cam.eye).normalized();
  cam.right = cam.forward.cross(Vec3::UnitZ()).normalized();
  cam.up = cam.right.cross(cam.forward);
  return cam;
}

Vec3 TriMesh::vertex_color(std::size_t i) const {
  if (colors.empty()) return Vec3::Constant(kFallbackGray);
  return colors[i];
}

Vec3 TriMesh::face_normal(std::size_t f) const {
  const auto& [i, j, k] = faces[f];
  return (vertices[j] - vertices[i]).cross(vertices[k] - vertices[i]).normalized();
}

double TriMesh::face_area(std::size_t f) const {
  const auto& [i, j, k] = faces[f];
  return 0.5 * (vertices[j] - vertices[i]).cross(vertices[k] - vertices[i]).norm();
}

void validate_mesh(const TriMesh& mesh) {
  const auto n = static_cast<std::int64_t>(mesh.vertices.size());
  for (const auto& face : mesh.faces) {
    for (auto idx : face) {
      if (idx < 0 || idx >= n) throw ShapeError("face index out of range");
    }
  }
  if (!mesh.colors.empty() && mesh.colors.size() != mesh.vertices.size()) {
    throw ShapeError("per-vertex colors must match vertex count");
  }
}

std::size_t drop_degenerate_faces(TriMesh& mesh, double min_area) {
  const auto before = mesh.faces.size();
  std::erase_if(mesh.faces, [&](const auto& f) {
    const Vec3& a = mesh.vertices[f[0]];
    return 0.5 * (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a).norm() <= min_area;
  });
  return before - mesh.faces.size();
}

void normalize_mesh(TriMesh& mesh, double extent) {
  if (mesh.vertices.empty()) return;
  Vec3 lo = mesh.vertices.front();
  Vec3 hi = lo;
  for (const auto& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const Vec3 center = 0.5 * (lo + hi);
  const double side = (hi - lo).maxCoeff();
  const double scale = side > 0.0 ? extent / side : 1.0;
  for (auto& v : mesh.vertices) v = (v - center) * scale;
}

TriMesh make_icosphere(int subdivisions) {
  if (subdivisions < 0 || subdivisions > kMaxIcosphereSubdivisions) {
    throw LimitError("icosphere subdivisions must be in [0, " +
                     std::to_string(kMaxIcosphereSubdivisions) + "]");
  }
  const double g = std::numbers::phi;
  TriMesh mesh;
  mesh.vertices = {{-1, g, 0}, {1, g, 0},  {-1, -g, 0}, {1, -g, 0}, {0, -1, g},  {0, 1, g},
                   {0, -1, -g}, {0, 1, -g}, {g, 0, -1},  {g, 0, 1},  {-g, 0, -1}, {-g, 0, 1}};
  for (auto& v : mesh.vertices) v.normalize();
  mesh.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<std::int32_t, std::int32_t>, std::int32_t> midpoints;
    auto midpoint = [&](std::int32_t i, std::int32_t j) {
      const auto key = std::minmax(i, j);
      if (auto it = midpoints.find(key); it != midpoints.end()) return it->second;
      const auto idx = static_cast<std::int32_t>(mesh.vertices.size());
      mesh.vertices.push_back((mesh.vertices[i] + mesh.vertices[j]).normalized());
      midpoints.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<std::int32_t, 3>> next;
    next.reserve(mesh.faces.size() * 4);
    for (const auto& [a, b, c] : mesh.faces) {
      const auto ab = midpoint(a, b);
      const auto bc = midpoint(b, c);
      const auto ca = midpoint(c, a);
      next.push_back({a, ab, ca});
      next.push_back({b, bc, ab});
      next.push_back({c, ca, bc});
      next.push_back({ab, bc, ca});
    }
    mesh.faces = std::move(next);
  }
  return mesh;
}

std::optional<TriangleHit> intersect_ray_triangle(const Vec3& origin, const Vec3& direction,
                                                  const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 p = direction.cross(e2);
  const double det = e1.dot(p);
  const double scale = e1.norm() * e2.norm() * direction.norm();
  if (std::abs(det) <= 1e-12 * scale) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 s = origin - a;
  const double u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double v = direction.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(q) * inv;
  if (!(t > 0.0)) return std::nullopt;
  return TriangleHit{t, {1.0 - u - v, u, v}};
}

namespace {

struct ScreenBox {
  int u0, u1, v0, v1;  // inclusive
};

// Conservative pixel bounds of a triangle's projection. Triangles reaching
// behind the eye cover the whole screen.
ScreenBox project_bounds(const Camera& cam, const Vec3& a, const Vec3& b, const Vec3& c) {
  const double tan_half = std::tan(0.5 * cam.fov_y);
  const double aspect = static_cast<double>(cam.width) / cam.height;
  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -xmin;
  double ymin = xmin;
  double ymax = -xmin;
  for (const Vec3* p : {&a, &b, &c}) {
    const Vec3 d = *p - cam.eye;
    const double z = d.dot(cam.forward);
    if (z <= 1e-9) return {0, cam.width - 1, 0, cam.height - 1};
    const double x = d.dot(cam.right) / (z * tan_half * aspect);
    const double y = d.dot(cam.up) / (z * tan_half);
    // continuous pixel coordinates where pixel centers sit at integer + 0.5
    const double px = (x + 1.0) * 0.5 * cam.width;
    const double py = (1.0 - y) * 0.5 * cam.height;
    xmin = std::min(xmin, px);
    xmax = std::max(xmax, px);
    ymin = std::min(ymin, py);
    ymax = std::max(ymax, py);
  }
  auto clamp_floor = [](double x, int hi) {
    return static_cast<int>(std::clamp(std::floor(x), -1.0, static_cast<double>(hi)));
  };
  ScreenBox box{clamp_floor(xmin - 1.0, cam.width), clamp_floor(xmax + 1.0, cam.width),
                clamp_floor(ymin - 1.0, cam.height), clamp_floor(ymax + 1.0, cam.height)};
  box.u0 = std::max(box.u0, 0);
  box.v0 = std::max(box.v0, 0);
  box.u1 = std::min(box.u1, cam.width - 1);
  box.v1 = std::min(box.v1, cam.height - 1);
  return box;
}

}  // namespace

FaceMap rasterize_face_map(const TriMesh& mesh, const Camera& camera) {
  FaceMap map;
  map.width = camera.width;
  map.height = camera.height;
  const auto n = static_cast<std::size_t>(camera.pixel_count());
  map.face.assign(n, FaceMap::kBackground);
  map.depth.assign(n, camera.far);

  std::vector<Vec3> directions(n);
  for (int v = 0; v < camera.height; ++v) {
    for (int u = 0; u < camera.width; ++u) {
      directions[static_cast<std::size_t>(v) * camera.width + u] = camera.pixel_direction(u, v);
    }
  }
  std::vector<double> best(n, std::numeric_limits<double>::infinity());

  // Faces are visited in id order and only strictly nearer hits replace the
  // current one, so ties keep the lower id.
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& [i, j, k] = mesh.faces[f];
    const Vec3& a = mesh.vertices[i];
    const Vec3& b = mesh.vertices[j];
    const Vec3& c = mesh.vertices[k];
    const ScreenBox box = project_bounds(camera, a, b, c);
    for (int v = box.v0; v <= box.v1; ++v) {
      for (int u = box.u0; u <= box.u1; ++u) {
        const auto p = static_cast<std::size_t>(v) * camera.width + u;
        const auto hit = intersect_ray_triangle(camera.eye, directions[p], a, b, c);
        if (!hit || hit->t < camera.near || hit->t > camera.far) continue;
        if (hit->t < best[p]) {
          best[p] = hit->t;
          map.face[p] = static_cast<std::int32_t>(f);
          map.depth[p] = hit->t;
        }
      }
    }
  }
  return map;
}

GBuffer render_gbuffer(const TriMesh& mesh, const Camera& camera, const GBufferOptions& options) {
  const FaceMap map = rasterize_face_map(mesh, camera);
  GBuffer g;
  g.width = camera.width;
  g.height = camera.height;
  const std::size_t n = g.pixel_count();
  g.rgb.assign(3 * n, 0.0);
  g.depth.assign(n, camera.far);
  g.normal.assign(3 * n, 0.0);
  g.mask.assign(n, 0);

  std::vector<Vec3> vertex_normals;
  if (options.smooth_normals) {
    vertex_normals.assign(mesh.vertices.size(), Vec3::Zero());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
      const auto& [i, j, k] = mesh.faces[f];
      const Vec3 area_n = (mesh.vertices[j] - mesh.vertices[i]).cross(mesh.vertices[k] - mesh.vertices[i]);
      for (auto idx : mesh.faces[f]) vertex_normals[idx] += area_n;
    }
    for (auto& vn : vertex_normals) {
      if (vn.norm() > 0.0) vn.normalize();
    }
  }

  parallel_for(static_cast<std::size_t>(camera.height), [&](std::size_t row) {
    const int v = static_cast<int>(row);
    for (int u = 0; u < camera.width; ++u) {
      const auto p = static_cast<std::size_t>(v) * camera.width + u;
      const auto face_id = map.face[p];
      if (face_id == FaceMap::kBackground) {
        for (int c = 0; c < 3; ++c) g.rgb[3 * p + c] = options.background[c];
        continue;
      }
      const auto& face = mesh.faces[static_cast<std::size_t>(face_id)];
      const Vec3 dir = camera.pixel_direction(u, v);
      const auto hit = intersect_ray_triangle(camera.eye, dir, mesh.vertices[face[0]],
                                              mesh.vertices[face[1]], mesh.vertices[face[2]]);
      const auto bary = hit ? hit->barycentric : std::array<double, 3>{1.0 / 3, 1.0 / 3, 1.0 / 3};
      Vec3 color = Vec3::Zero();
      for (int c = 0; c < 3; ++c) color += bary[c] * mesh.vertex_color(face[c]);
      Vec3 normal;
      if (options.smooth_normals) {
        normal = Vec3::Zero();
        for (int c = 0; c < 3; ++c) normal += bary[c] * vertex_normals[face[c]];
        normal.normalize();
      } else {
        normal = mesh.face_normal(static_cast<std::size_t>(face_id));
      }
      if (normal.dot(dir) > 0.0) normal = -normal;
      for (int c = 0; c < 3; ++c) {
        g.rgb[3 * p + c] = color[c];
        g.normal[3 * p + c] = normal[c];
      }
      g.depth[p] = map.depth[p];
      g.mask[p] = 1;
    }
  });
  return g;
}

}  // namespace noisesphere
