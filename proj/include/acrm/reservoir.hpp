#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace acrm {

class Rng;

/// Shape of one stored code grid: s x H x W one-byte codes, each < k.
struct CodeShape {
  std::uint32_t s = 0, h = 0, w = 0, k = 0;
  std::size_t bytes() const { return std::size_t{s} * h * w; }
  bool operator==(const CodeShape&) const = default;
};

struct QuantizedExemplar {
  std::vector<std::uint8_t> codes;  // s x H x W
  std::uint16_t label = 0;
  std::uint16_t task_id = 0;
  bool operator==(const QuantizedExemplar&) const = default;
};

/// Bounded exemplar memory. When full, an insert evicts a uniformly chosen
/// member of a uniformly chosen class among those with the most entries.
class Reservoir {
 public:
  Reservoir() = default;
  Reservoir(std::size_t capacity, CodeShape shape);

  /// Returns the evicted exemplar, if any.
  std::optional<QuantizedExemplar> insert(QuantizedExemplar exemplar, Rng& rng);

  /// Indices of min(n, size()) distinct entries drawn uniformly without replacement.
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;
  /// n indices drawn independently and uniformly (empty when the reservoir is).
  std::vector<std::size_t> sample_indices_with_replacement(std::size_t n, Rng& rng) const;
  std::vector<QuantizedExemplar> sample_batch(std::size_t n, Rng& rng) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool full() const { return entries_.size() >= capacity_; }
  const CodeShape& shape() const { return shape_; }
  const std::vector<QuantizedExemplar>& entries() const { return entries_; }
  const std::map<std::uint16_t, std::size_t>& class_counts() const { return counts_; }
  /// Recounts labels and compares against the maintained per-class counts.
  bool counts_consistent() const;

  /// Snapshot format, little-endian: u32 capacity, u32 count, u32 s, u32 H,
  /// u32 W, u32 k, then per entry u16 task_id, u16 label, s*H*W code bytes.
  void write(std::ostream& out) const;
  static Reservoir read(std::istream& in);

  bool operator==(const Reservoir& other) const {
    return capacity_ == other.capacity_ && shape_ == other.shape_ && entries_ == other.entries_;
  }

 private:
  std::size_t capacity_ = 0;
  CodeShape shape_;
  std::vector<QuantizedExemplar> entries_;
  std::map<std::uint16_t, std::size_t> counts_;
};

/// count * prod(shape) * bytes_per_element, with overflow detection.
std::uint64_t memory_bytes(std::uint64_t count, std::span<const std::uint64_t> shape,
                           std::uint64_t bytes_per_element = 1);
/// Decimal megabytes (10^6 bytes).
double as_mb(std::uint64_t bytes);
/// Exact decimal rendering of bytes / 10^6 without trailing zeros, e.g. "50.96".
std::string format_mb_exact(std::uint64_t bytes);
/// bytes / 10^6 rounded half-up to `decimals` places, e.g. "301.06".
std::string format_mb_rounded(std::uint64_t bytes, int decimals);

}  // namespace acrm
