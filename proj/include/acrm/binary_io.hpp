#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace acrm {

/// Little-endian primitive writer.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}
  void u8(std::uint8_t v);
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void bytes(std::span<const std::uint8_t> data);
  void floats(std::span<const float> data);
  void string(const std::string& s);  // u32 length + bytes

 private:
  std::ostream& out_;
};

/// Little-endian primitive reader; truncation raises a Format error.
class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}
  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::vector<std::uint8_t> bytes(std::size_t n);
  std::vector<float> floats(std::size_t n);
  std::string string(std::size_t max_len = 1u << 20);

 private:
  void raw(void* dst, std::size_t n);
  std::istream& in_;
};

}  // namespace acrm
