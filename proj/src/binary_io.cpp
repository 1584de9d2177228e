#include "acrm/binary_io.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include "acrm/error.hpp"

namespace acrm {

namespace {

template <typename T>
void put_le(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
  if (!out) fail(ErrorKind::Io, "write failed");
}

template <typename T>
T get_le(const unsigned char* buf) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(buf[i]) << (8 * i));
  return v;
}

}  // namespace

void BinaryWriter::u8(std::uint8_t v) { put_le(out_, v); }
void BinaryWriter::u16(std::uint16_t v) { put_le(out_, v); }
void BinaryWriter::u32(std::uint32_t v) { put_le(out_, v); }
void BinaryWriter::u64(std::uint64_t v) { put_le(out_, v); }
void BinaryWriter::f32(float v) { put_le(out_, std::bit_cast<std::uint32_t>(v)); }
void BinaryWriter::f64(double v) { put_le(out_, std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::bytes(std::span<const std::uint8_t> data) {
  out_.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out_) fail(ErrorKind::Io, "write failed");
}

void BinaryWriter::floats(std::span<const float> data) {
  for (float v : data) f32(v);
}

void BinaryWriter::string(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!out_) fail(ErrorKind::Io, "write failed");
}

void BinaryReader::raw(void* dst, std::size_t n) {
  in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) fail(ErrorKind::Format, "unexpected end of data");
}

std::uint8_t BinaryReader::u8() {
  unsigned char b[1];
  raw(b, 1);
  return b[0];
}

std::uint16_t BinaryReader::u16() {
  unsigned char b[2];
  raw(b, 2);
  return get_le<std::uint16_t>(b);
}

std::uint32_t BinaryReader::u32() {
  unsigned char b[4];
  raw(b, 4);
  return get_le<std::uint32_t>(b);
}

std::uint64_t BinaryReader::u64() {
  unsigned char b[8];
  raw(b, 8);
  return get_le<std::uint64_t>(b);
}

float BinaryReader::f32() { return std::bit_cast<float>(u32()); }
double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::vector<std::uint8_t> BinaryReader::bytes(std::size_t n) {
  std::vector<std::uint8_t> out(n);
  if (n) raw(out.data(), n);
  return out;
}

std::vector<float> BinaryReader::floats(std::size_t n) {
  std::vector<float> out(n);
  for (auto& v : out) v = f32();
  return out;
}

std::string BinaryReader::string(std::size_t max_len) {
  const std::uint32_t n = u32();
  if (n > max_len) fail(ErrorKind::Format, "string field too long");
  std::string s(n, '\0');
  if (n) raw(s.data(), n);
  return s;
}

}  // namespace acrm
