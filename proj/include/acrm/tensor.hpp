#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace acrm {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major float32 array with an optional gradient buffer.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  const Shape& shape() const { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  float* raw() { return data_.data(); }
  const float* raw() const { return data_.data(); }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  /// Reinterprets the buffer with a new shape of equal element count.
  void reshape(Shape shape);
  Tensor reshaped(Shape shape) const;

  bool has_grad() const { return !grad_.empty(); }
  /// Allocates a zero gradient buffer if absent.
  std::span<float> grad();
  std::span<const float> grad() const { return grad_; }
  void zero_grad();
  void drop_grad() { grad_.clear(); grad_.shrink_to_fit(); }

  /// Copy of the sample-th slice along the leading dimension, keeping a leading 1.
  Tensor slice(std::size_t sample) const;
  /// Stacks tensors of identical shape along a new leading dimension.
  static Tensor stack(std::span<const Tensor> items);

  bool same_values(const Tensor& other) const;

 private:
  Shape shape_;
  std::vector<float> data_;
  std::vector<float> grad_;
};

/// Throws a Dimension error unless `t` has exactly `expected` shape.
void expect_shape(const Tensor& t, const Shape& expected, const char* what);
void expect_rank(const Tensor& t, std::size_t rank, const char* what);

/// Running CRC-32 over raw bytes; floats are hashed as their in-memory bytes.
class Crc32 {
 public:
  Crc32& update(std::span<const std::uint8_t> bytes);
  Crc32& update(std::span<const float> values);
  Crc32& update(const Tensor& t) { return update(t.data()); }
  std::uint32_t value() const { return crc_; }

 private:
  std::uint32_t crc_ = 0;
};

/// Aborts in debug builds if any element is NaN or Inf.
void debug_check_finite(std::span<const float> values, const char* what);

}  // namespace acrm
