#include "noisesphere/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "noisesphere/error.hpp"

namespace noisesphere {

namespace {

png_image blank_image() {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  return img;
}

void fail(const std::filesystem::path& path, const png_image& img, const char* what) {
  throw IoError(std::string(what) + " " + path.string() + ": " + img.message);
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image8& image) {
  if (image.channels != 1 && image.channels != 3) throw ShapeError("PNG export supports 1 or 3 channels");
  if (image.data.size() != static_cast<std::size_t>(image.width) * image.height * image.channels) {
    throw ShapeError("image buffer does not match its dimensions");
  }
  png_image img = blank_image();
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, image.data.data(), 0, nullptr)) {
    fail(path, img, "cannot write");
  }
}

void write_png16(const std::filesystem::path& path, const Image16& image) {
  if (image.data.size() != static_cast<std::size_t>(image.width) * image.height) {
    throw ShapeError("image buffer does not match its dimensions");
  }
  png_image img = blank_image();
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_LINEAR_Y;
  if (!png_image_write_to_file(&img, path.c_str(), 0, image.data.data(), 0, nullptr)) {
    fail(path, img, "cannot write");
  }
}

Image8 read_png(const std::filesystem::path& path) {
  png_image img = blank_image();
  if (!png_image_begin_read_from_file(&img, path.c_str())) fail(path, img, "cannot read");
  Image8 out;
  out.channels = (img.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1;
  img.format = out.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  out.width = static_cast<int>(img.width);
  out.height = static_cast<int>(img.height);
  out.data.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.data.data(), 0, nullptr)) fail(path, img, "cannot decode");
  return out;
}

Image16 read_png16(const std::filesystem::path& path) {
  png_image img = blank_image();
  if (!png_image_begin_read_from_file(&img, path.c_str())) fail(path, img, "cannot read");
  img.format = PNG_FORMAT_LINEAR_Y;
  Image16 out;
  out.width = static_cast<int>(img.width);
  out.height = static_cast<int>(img.height);
  out.data.resize(static_cast<std::size_t>(out.width) * out.height);
  if (!png_image_finish_read(&img, nullptr, out.data.data(), 0, nullptr)) fail(path, img, "cannot decode");
  return out;
}

Image8 to_image8(int width, int height, const std::vector<double>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) throw ShapeError("rgb buffer size mismatch");
  Image8 out{width, height, 3, std::vector<std::uint8_t>(rgb.size())};
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    out.data[i] = static_cast<std::uint8_t>(std::lround(std::clamp(rgb[i], 0.0, 1.0) * 255.0));
  }
  return out;
}

Image16 depth_to_image16(int width, int height, const std::vector<double>& depth, double near, double far) {
  if (depth.size() != static_cast<std::size_t>(width) * height) throw ShapeError("depth buffer size mismatch");
  if (!(far > near)) throw DomainError("depth range must satisfy far > near");
  Image16 out{width, height, std::vector<std::uint16_t>(depth.size())};
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const double u = std::clamp((depth[i] - near) / (far - near), 0.0, 1.0);
    out.data[i] = static_cast<std::uint16_t>(std::lround(u * 65535.0));
  }
  return out;
}

void write_depth_png16(const std::filesystem::path& path, const Frame& frame, double near, double far) {
  write_png16(path, depth_to_image16(frame.width, frame.height, frame.depth, near, far));
  std::filesystem::path sidecar = path;
  sidecar += ".txt";
  std::ofstream s(sidecar);
  s.precision(17);
  s << "# depth = near + value / 65535 * (far - near)\n"
    << "near=" << near << "\nfar=" << far << "\n";
  if (!s) throw IoError("cannot write " + sidecar.string());
}

Image8 noise_to_image8(const NoiseField& noise, int frame) {
  if (frame < 0 || frame >= noise.frames) throw ShapeError("noise frame index out of range");
  Image8 out{noise.width, noise.height, 3,
             std::vector<std::uint8_t>(static_cast<std::size_t>(noise.width) * noise.height * 3, 0)};
  const int used = std::min(3, noise.channels);
  for (int y = 0; y < noise.height; ++y) {
    for (int x = 0; x < noise.width; ++x) {
      for (int c = 0; c < used; ++c) {
        const double u = (std::clamp(static_cast<double>(noise.at(y, x, frame, c)), -3.0, 3.0) + 3.0) / 6.0;
        out.data[(static_cast<std::size_t>(y) * noise.width + x) * 3 + c] =
            static_cast<std::uint8_t>(std::lround(u * 255.0));
      }
    }
  }
  return out;
}

}  // namespace noisesphere
