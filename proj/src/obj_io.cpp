#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

#include "noisesphere/error.hpp"
#include "noisesphere/geometry.hpp"

namespace noisesphere {
namespace {

std::int32_t parse_index(const std::string& token, std::size_t vertex_count, int line_no) {
  const auto slash = token.find('/');
  const std::string head = token.substr(0, slash);
  long value = 0;
  const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), value);
  if (ec != std::errc{} || ptr != head.data() + head.size() || value == 0) {
    throw IoError("obj line " + std::to_string(line_no) + ": bad face index '" + token + "'");
  }
  const long resolved = value > 0 ? value - 1 : static_cast<long>(vertex_count) + value;
  if (resolved < 0 || resolved >= static_cast<long>(vertex_count)) {
    throw IoError("obj line " + std::to_string(line_no) + ": face index out of range");
  }
  return static_cast<std::int32_t>(resolved);
}

}  // namespace

LoadedMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh: " + path.string());

  LoadedMesh out;
  TriMesh& mesh = out.mesh;
  std::vector<Vec3> colors;
  bool any_color = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ss >> x >> y >> z)) throw IoError("obj line " + std::to_string(line_no) + ": bad vertex");
      mesh.vertices.emplace_back(x, y, z);
      double r, g, b;
      if (ss >> r >> g >> b) {
        colors.emplace_back(r, g, b);
        any_color = true;
      } else {
        colors.emplace_back(Vec3::Constant(TriMesh::kFallbackGray));
      }
    } else if (tag == "f") {
      std::vector<std::int32_t> poly;
      std::string token;
      while (ss >> token) poly.push_back(parse_index(token, mesh.vertices.size(), line_no));
      if (poly.size() < 3) throw IoError("obj line " + std::to_string(line_no) + ": face needs 3 indices");
      for (std::size_t i = 1; i + 1 < poly.size(); ++i) mesh.faces.push_back({poly[0], poly[i], poly[i + 1]});
    }
  }
  if (any_color) mesh.colors = std::move(colors);
  validate_mesh(mesh);
  out.dropped_degenerate = drop_degenerate_faces(mesh);
  if (mesh.empty()) throw IoError("mesh has no usable faces: " + path.string());
  return out;
}

void write_obj(const std::filesystem::path& path, const TriMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.precision(17);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    out << "v " << v.x() << ' ' << v.y() << ' ' << v.z();
    if (!mesh.colors.empty()) {
      const auto& c = mesh.colors[i];
      out << ' ' << c.x() << ' ' << c.y() << ' ' << c.z();
    }
    out << '\n';
  }
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw IoError("failed writing mesh: " + path.string());
}

}  // namespace noisesphere
