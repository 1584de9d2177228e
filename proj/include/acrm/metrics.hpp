#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "acrm/tensor.hpp"

namespace acrm {

/// Fraction of rows whose label is among the k largest logits. Ties rank the
/// lower class index first.
double top_k_accuracy(const Tensor& logits, std::span<const int> labels, std::size_t k);

/// Arithmetic mean of the per-step accuracies.
double aoc(std::span<const double> accuracies);

struct MetricRecord {
  std::uint64_t step = 0;  // online optimizer steps taken so far
  std::uint32_t task = 0;  // 1-based task index just completed
  std::uint32_t seen_classes = 0;
  double top1 = 0.0;
  std::optional<double> top5;
  bool operator==(const MetricRecord&) const = default;
};

struct MetricsLog {
  std::vector<MetricRecord> records;

  std::vector<double> top1_series() const;
  double aoc() const;
  /// Accuracy of the final record.
  double last() const;
  bool operator==(const MetricsLog&) const = default;
};

}  // namespace acrm
