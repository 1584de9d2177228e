#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "acrm/tensor.hpp"

namespace acrm {

/// Images as an N x C x H x W float tensor in [0, 1] plus integer labels.
struct Dataset {
  Tensor images;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  Shape image_shape() const;
  /// 1 x C x H x W copy of one image.
  Tensor image(std::size_t i) const { return images.slice(i); }
  Dataset subset(std::span<const std::size_t> indices) const;
  /// Indices of samples whose label is in `classes`.
  std::vector<std::size_t> indices_of(std::span<const int> classes) const;
  int max_label() const;
};

/// IDX pair: magic 0x00 0x00 <dtype> <ndims>, big-endian u32 dims, raw
/// payload. Images must be unsigned bytes with 3 (N,H,W) or 4 (N,C,H,W) dims;
/// labels unsigned bytes with 1 dim.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// CIFAR binary records: 1 label byte + 3 x 32 x 32 channel-planar pixels.
Dataset load_cifar_bin(const std::filesystem::path& path);
Dataset load_cifar_bin(std::span<const std::filesystem::path> paths);

struct SyntheticSpec {
  std::size_t classes = 10;
  std::size_t per_class = 100;
  std::size_t channels = 3;
  std::size_t height = 16;
  std::size_t width = 16;
  double noise = 0.1;   // pixel noise standard deviation
  double jitter = 1.0;  // blob center standard deviation in pixels
  std::uint64_t seed = 0;
};

/// Each class is an anisotropic Gaussian blob with a class-specific vertical
/// position, covariance and colour; samples add positional jitter and pixel
/// noise. Class appearance depends only on `spec.seed`; `split` selects an
/// independent sample stream (e.g. 0 = train, 1 = test). Samples are ordered
/// class by class.
Dataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t split = 0);

struct ChannelStats {
  std::vector<double> mean, stddev;
};

/// Per-channel mean and standard deviation over the given samples.
ChannelStats channel_stats(const Dataset& d, std::span<const std::size_t> samples);
/// In place (x - mean) / stddev per channel; zero deviations count as 1.
void standardize(Dataset& d, const ChannelStats& stats);

struct Task {
  std::uint32_t id = 0;            // 1-based
  std::vector<int> classes;
  std::vector<std::size_t> samples;  // indices into the training set, in stream order
};

struct TaskStream {
  std::vector<Task> tasks;
  std::vector<int> class_order;
};

/// Seeded permutation of 0..num_classes-1.
std::vector<int> class_order(std::size_t num_classes, std::uint64_t seed);

/// First task takes `first_classes` classes of `order`, the rest are split into
/// `steps` equal tasks. Samples within a task are shuffled with `seed`.
TaskStream make_task_stream(const Dataset& train, std::span<const int> order, std::size_t first_classes,
                            std::size_t steps, std::uint64_t seed);

/// Checks the stream invariants: disjoint class sets, labels within their task's
/// classes, ids 1..T in order.
void validate_stream(const TaskStream& stream, const Dataset& train);

}  // namespace acrm
