#include "acrm/metrics.hpp"

#include <numeric>
#include <string>

#include "acrm/error.hpp"

namespace acrm {

double top_k_accuracy(const Tensor& logits, std::span<const int> labels, std::size_t k) {
  expect_rank(logits, 2, "top_k_accuracy");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.empty()) fail(ErrorKind::Input, "top_k_accuracy: empty batch");
  if (labels.size() != n) fail(ErrorKind::Dimension, "top_k_accuracy: label count does not match logits");
  if (k == 0 || k > c) fail(ErrorKind::Input, "top_k_accuracy: k must be in [1, " + std::to_string(c) + "]");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c) fail(ErrorKind::Input, "top_k_accuracy: label out of range");
    const float* row = logits.raw() + i * c;
    const float target = row[y];
    std::size_t rank = 0;  // classes ordered strictly before the label
    for (std::size_t j = 0; j < c; ++j)
      if (row[j] > target || (row[j] == target && j < static_cast<std::size_t>(y))) ++rank;
    hits += rank < k;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

double aoc(std::span<const double> accuracies) {
  if (accuracies.empty()) fail(ErrorKind::Input, "aoc: no accuracies");
  return std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / static_cast<double>(accuracies.size());
}

std::vector<double> MetricsLog::top1_series() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.top1);
  return out;
}

double MetricsLog::aoc() const {
  const auto series = top1_series();
  return acrm::aoc(series);
}

double MetricsLog::last() const {
  if (records.empty()) fail(ErrorKind::Input, "last: empty metrics log");
  return records.back().top1;
}

}  // namespace acrm
