#pragma once

// Binary tensor container shared by every command.
//
// Layout (little-endian):
//   "VNT1"            4 bytes magic
//   u32 rank
//   u32 dims[rank]
//   u8  dtype         0 = f32, 1 = f64, 2 = i32, 3 = u8
//   payload           row-major, product(dims) * sizeof(dtype) bytes
//
// Several records may be concatenated in one file; readers consume them in
// order.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace noisesphere {

enum class DType : std::uint8_t { f32 = 0, f64 = 1, i32 = 2, u8 = 3 };

std::size_t dtype_size(DType d);

struct Tensor {
  std::vector<std::uint32_t> dims;
  DType dtype = DType::f32;
  std::vector<std::byte> payload;

  std::size_t element_count() const;

  static Tensor from_f32(std::vector<std::uint32_t> dims, std::span<const float> values);
  static Tensor from_f64(std::vector<std::uint32_t> dims, std::span<const double> values);
  static Tensor from_i32(std::vector<std::uint32_t> dims, std::span<const std::int32_t> values);
  static Tensor from_u8(std::vector<std::uint32_t> dims, std::span<const std::uint8_t> values);

  std::vector<float> as_f32() const;
  std::vector<double> as_f64() const;
  std::vector<std::int32_t> as_i32() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

void write_tensor(std::ostream& out, const Tensor& t);
/// Throws IoError on a truncated or malformed record.
Tensor read_tensor(std::istream& in);

void write_tensor_file(const std::filesystem::path& path, std::span<const Tensor> tensors);
void write_tensor_file(const std::filesystem::path& path, const Tensor& tensor);
std::vector<Tensor> read_tensor_file(const std::filesystem::path& path);

}  // namespace noisesphere
