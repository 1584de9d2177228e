#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "acrm/config.hpp"
#include "acrm/engine.hpp"

namespace acrm {

struct StudyPoint {
  std::size_t frozen_blocks = 0;  // blocks 1..n kept at their task-1 values
  double accuracy = 0.0;          // test accuracy over all classes
};

struct StudyResult {
  double task1_accuracy = 0.0;  // task-1 model on task-1 test classes
  std::vector<StudyPoint> points;
};

/// Trains on task 1, then for each n freezes blocks 1..n of a copy and trains
/// the remaining layers on the full training set (all classes, offline). n = 0
/// is plain joint training from the task-1 weights.
StudyResult frozen_backbone_study(const RunConfig& config, const PreparedData& data,
                                  std::span<const std::size_t> frozen_blocks);

}  // namespace acrm
