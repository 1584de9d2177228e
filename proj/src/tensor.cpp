#include "acrm/tensor.hpp"

#include <cassert>
#include <cmath>
#include <cstring>
#include <sstream>

#include <zlib.h>

#include "acrm/error.hpp"

namespace acrm {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
  for (auto d : shape_)
    if (d == 0) fail(ErrorKind::Dimension, "tensor dimensions must be positive, got " + shape_str(shape_));
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_)
    if (d == 0) fail(ErrorKind::Dimension, "tensor dimensions must be positive, got " + shape_str(shape_));
  if (data_.size() != shape_numel(shape_))
    fail(ErrorKind::Dimension, "data length " + std::to_string(data_.size()) + " does not match shape " +
                                   shape_str(shape_));
}

void Tensor::reshape(Shape shape) {
  if (shape_numel(shape) != data_.size())
    fail(ErrorKind::Dimension, "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  shape_ = std::move(shape);
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor out = *this;
  out.drop_grad();
  out.reshape(std::move(shape));
  return out;
}

std::span<float> Tensor::grad() {
  if (grad_.size() != data_.size()) grad_.assign(data_.size(), 0.0f);
  return grad_;
}

void Tensor::zero_grad() { grad_.assign(data_.size(), 0.0f); }

Tensor Tensor::slice(std::size_t sample) const {
  if (shape_.empty() || sample >= shape_[0])
    fail(ErrorKind::Dimension, "slice index out of range for " + shape_str(shape_));
  Shape s = shape_;
  s[0] = 1;
  const std::size_t stride = data_.size() / shape_[0];
  std::vector<float> d(data_.begin() + static_cast<std::ptrdiff_t>(sample * stride),
                       data_.begin() + static_cast<std::ptrdiff_t>((sample + 1) * stride));
  return Tensor(std::move(s), std::move(d));
}

Tensor Tensor::stack(std::span<const Tensor> items) {
  if (items.empty()) fail(ErrorKind::Dimension, "cannot stack zero tensors");
  Shape inner = items[0].shape();
  if (!inner.empty() && inner[0] == 1) inner.erase(inner.begin());
  Shape s = inner;
  s.insert(s.begin(), items.size());
  std::vector<float> d;
  d.reserve(shape_numel(s));
  const std::size_t per = shape_numel(inner);
  for (const auto& t : items) {
    if (t.numel() != per) fail(ErrorKind::Dimension, "stack: inconsistent item shapes");
    d.insert(d.end(), t.data().begin(), t.data().end());
  }
  return Tensor(std::move(s), std::move(d));
}

bool Tensor::same_values(const Tensor& other) const {
  return shape_ == other.shape_ &&
         std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

void expect_shape(const Tensor& t, const Shape& expected, const char* what) {
  if (t.shape() != expected)
    fail(ErrorKind::Dimension,
         std::string(what) + ": expected shape " + shape_str(expected) + ", got " + shape_str(t.shape()));
}

void expect_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank)
    fail(ErrorKind::Dimension, std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                                   shape_str(t.shape()));
}

Crc32& Crc32::update(std::span<const std::uint8_t> bytes) {
  crc_ = static_cast<std::uint32_t>(::crc32(crc_, bytes.data(), static_cast<uInt>(bytes.size())));
  return *this;
}

Crc32& Crc32::update(std::span<const float> values) {
  return update(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(values.data()),
                                              values.size_bytes()));
}

void debug_check_finite([[maybe_unused]] std::span<const float> values, [[maybe_unused]] const char* what) {
#ifndef NDEBUG
  for (float v : values) {
    if (!std::isfinite(v)) {
      assert(false && "non-finite value");
    }
  }
#endif
}

}  // namespace acrm
