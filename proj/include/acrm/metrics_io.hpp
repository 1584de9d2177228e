#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "acrm/metrics.hpp"

namespace acrm {

/// Summary columns, in order.
inline constexpr const char* kSummaryHeader = "aoc,last,memory_bytes,exemplar_count,exemplar_shape";

struct MemoryInfo {
  std::uint64_t exemplar_count = 0;       // reservoir capacity
  std::vector<std::uint64_t> shape;       // s, H, W
  std::uint64_t bytes = 0;                // memory_bytes(count, shape, 1)
};

/// One JSON object per record with keys step, task, seen_classes, top1, top5
/// (top5 is null when not recorded).
std::string metrics_jsonl(const MetricsLog& log);
/// Header line plus one summary row; an empty log yields the header only.
std::string summary_csv(const MetricsLog& log, const MemoryInfo& memory);

/// Writes metrics.jsonl and summary.csv into `dir` (created if needed).
void emit_metrics(const MetricsLog& log, const MemoryInfo& memory, const std::filesystem::path& dir);

/// Parses metrics_jsonl output back into a log.
MetricsLog read_metrics_jsonl(const std::string& text);

}  // namespace acrm
