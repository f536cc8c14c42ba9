#include "noisesphere/tensor_file.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "noisesphere/error.hpp"

namespace noisesphere {
namespace {

static_assert(std::endian::native == std::endian::little,
              "tensor files are written in native little-endian order");

constexpr std::array<char, 4> kMagic = {'V', 'N', 'T', '1'};
constexpr std::uint32_t kMaxRank = 16;

template <typename T>
Tensor pack(std::vector<std::uint32_t> dims, DType dtype, std::span<const T> values) {
  Tensor t;
  t.dims = std::move(dims);
  t.dtype = dtype;
  if (t.element_count() != values.size()) {
    throw ShapeError("tensor dims do not match value count");
  }
  t.payload.resize(values.size_bytes());
  if (!values.empty()) std::memcpy(t.payload.data(), values.data(), values.size_bytes());
  return t;
}

template <typename T>
std::vector<T> unpack(const Tensor& t, DType expected) {
  if (t.dtype != expected) throw ShapeError("tensor dtype mismatch");
  std::vector<T> out(t.element_count());
  if (!out.empty()) std::memcpy(out.data(), t.payload.data(), t.payload.size());
  return out;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError("truncated tensor header");
  return v;
}

}  // namespace

std::size_t dtype_size(DType d) {
  switch (d) {
    case DType::f32: return 4;
    case DType::f64: return 8;
    case DType::i32: return 4;
    case DType::u8: return 1;
  }
  throw IoError("unknown tensor dtype");
}

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

Tensor Tensor::from_f32(std::vector<std::uint32_t> dims, std::span<const float> values) {
  return pack(std::move(dims), DType::f32, values);
}
Tensor Tensor::from_f64(std::vector<std::uint32_t> dims, std::span<const double> values) {
  return pack(std::move(dims), DType::f64, values);
}
Tensor Tensor::from_i32(std::vector<std::uint32_t> dims, std::span<const std::int32_t> values) {
  return pack(std::move(dims), DType::i32, values);
}
Tensor Tensor::from_u8(std::vector<std::uint32_t> dims, std::span<const std::uint8_t> values) {
  return pack(std::move(dims), DType::u8, values);
}

std::vector<float> Tensor::as_f32() const { return unpack<float>(*this, DType::f32); }
std::vector<double> Tensor::as_f64() const { return unpack<double>(*this, DType::f64); }
std::vector<std::int32_t> Tensor::as_i32() const { return unpack<std::int32_t>(*this, DType::i32); }

void write_tensor(std::ostream& out, const Tensor& t) {
  if (t.payload.size() != t.element_count() * dtype_size(t.dtype)) {
    throw ShapeError("tensor payload length does not match dims");
  }
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
  for (auto d : t.dims) put_u32(out, d);
  const auto code = static_cast<char>(t.dtype);
  out.write(&code, 1);
  out.write(reinterpret_cast<const char*>(t.payload.data()),
            static_cast<std::streamsize>(t.payload.size()));
  if (!out) throw IoError("failed writing tensor");
}

Tensor read_tensor(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw IoError("bad tensor magic");
  }
  Tensor t;
  const auto rank = get_u32(in);
  if (rank > kMaxRank) throw IoError("tensor rank too large");
  t.dims.resize(rank);
  for (auto& d : t.dims) d = get_u32(in);
  char code = 0;
  if (!in.read(&code, 1)) throw IoError("truncated tensor header");
  if (static_cast<unsigned char>(code) > 3) throw IoError("unknown tensor dtype");
  t.dtype = static_cast<DType>(code);
  t.payload.resize(t.element_count() * dtype_size(t.dtype));
  if (!in.read(reinterpret_cast<char*>(t.payload.data()),
               static_cast<std::streamsize>(t.payload.size()))) {
    throw IoError("tensor payload shorter than dims require");
  }
  return t;
}

void write_tensor_file(const std::filesystem::path& path, std::span<const Tensor> tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  for (const auto& t : tensors) write_tensor(out, t);
}

void write_tensor_file(const std::filesystem::path& path, const Tensor& tensor) {
  write_tensor_file(path, std::span<const Tensor>(&tensor, 1));
}

std::vector<Tensor> read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::vector<Tensor> out;
  while (in.peek() != std::char_traits<char>::eof()) out.push_back(read_tensor(in));
  if (out.empty()) throw IoError("empty tensor file: " + path.string());
  return out;
}

}  // namespace noisesphere
