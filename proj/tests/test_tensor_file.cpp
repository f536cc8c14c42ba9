#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <cstring>
#include <sstream>

#include "noisesphere/error.hpp"
#include "noisesphere/tensor_file.hpp"

using namespace noisesphere;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("ns_tensor_" + name);
}

// Hand-assembled little-endian record used as an independent oracle.
std::string manual_record_f32(std::uint32_t n, float value) {
  std::string s = "VNT1";
  auto put32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  put32(1);
  put32(n);
  s.push_back(0);
  std::uint32_t bits;
  std::memcpy(&bits, &value, 4);
  for (std::uint32_t i = 0; i < n; ++i) put32(bits);
  return s;
}

}  // namespace

TEST(TensorFile, RoundTripsEveryDtype) {
  const std::vector<float> f = {1.5f, -2.25f, 3.0f, 0.0f, -0.0f, 1e-30f};
  const std::vector<double> d = {1.0 / 3.0, -7.5, 1e300};
  const std::vector<std::int32_t> i = {-1, 0, 2147483647};
  const std::vector<std::uint8_t> u = {0, 255, 17, 3};
  const std::vector<Tensor> ts = {Tensor::from_f32({2, 3}, f), Tensor::from_f64({3}, d), Tensor::from_i32({1, 3}, i),
                                  Tensor::from_u8({2, 2}, u)};
  const auto path = temp_path("all.vnt");
  write_tensor_file(path, ts);
  const auto back = read_tensor_file(path);
  ASSERT_EQ(back.size(), ts.size());
  for (std::size_t k = 0; k < ts.size(); ++k) EXPECT_EQ(back[k], ts[k]);
  EXPECT_EQ(back[0].as_f32(), f);
  EXPECT_EQ(back[1].as_f64(), d);
  EXPECT_EQ(back[2].as_i32(), i);
  std::filesystem::remove(path);
}

TEST(TensorFile, MatchesHandAssembledBytes) {
  std::ostringstream out;
  write_tensor(out, Tensor::from_f32({3}, std::vector<float>(3, 0.75f)));
  EXPECT_EQ(out.str(), manual_record_f32(3, 0.75f));
}

TEST(TensorFile, RejectsBadMagic) {
  std::istringstream in(std::string("VNT2") + std::string(16, '\0'));
  EXPECT_THROW(read_tensor(in), IoError);
}

TEST(TensorFile, RejectsTruncatedPayload) {
  std::string bytes = manual_record_f32(4, 1.0f);
  bytes.pop_back();
  std::istringstream in(bytes);
  EXPECT_THROW(read_tensor(in), IoError);
}

TEST(TensorFile, RejectsUnknownDtype) {
  std::string bytes = manual_record_f32(1, 1.0f);
  bytes[12] = 9;
  std::istringstream in(bytes);
  EXPECT_THROW(read_tensor(in), IoError);
}

TEST(TensorFile, RejectsLengthMismatchOnWrite) {
  EXPECT_THROW(Tensor::from_f32({2, 2}, std::vector<float>(3)), ShapeError);
  Tensor t = Tensor::from_f32({2}, std::vector<float>(2));
  t.dims = {3};
  std::ostringstream out;
  EXPECT_THROW(write_tensor(out, t), ShapeError);
}

TEST(TensorFile, DtypeAccessorsCheckType) {
  const Tensor t = Tensor::from_f64({1}, std::vector<double>{1.0});
  EXPECT_THROW(t.as_f32(), ShapeError);
}

TEST(TensorFile, MissingFileIsIoError) {
  EXPECT_THROW(read_tensor_file(temp_path("does_not_exist.vnt")), IoError);
}
