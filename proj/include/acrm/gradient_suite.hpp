#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "acrm/gradcheck.hpp"

namespace acrm {

/// One finite-difference comparison: a named check, the tensor whose gradient
/// was compared, and the outcome.
struct GradSuiteEntry {
  std::string check;
  std::string tensor;
  std::uint64_t seed = 0;
  GradCheckResult result;
};

struct GradSuiteOptions {
  std::size_t seeds = 20;
  std::uint64_t base_seed = 1;
  float eps = 1e-3f;
  /// Entries with |gradient| below this fraction of the tensor's largest
  /// gradient are compared against that fraction instead of their own size.
  double relative_floor = 1e-3;
  std::size_t max_entries = 0;  // per tensor; 0 = all
};

struct GradSuiteReport {
  std::vector<GradSuiteEntry> entries;
  double max_error() const;
  /// Largest error per check name, in first-seen order.
  std::vector<std::pair<std::string, double>> worst_by_check() const;
};

/// Names of the available checks: every layer plus the network
/// cross-entropy and the ACAE loss (with and without the CE term).
std::vector<std::string> gradient_check_names();

/// Runs one named check at one seed. The numeric side evaluates the objective
/// with an independent double-precision forward pass.
std::vector<GradSuiteEntry> run_gradient_check(const std::string& check, std::uint64_t seed,
                                               const GradSuiteOptions& options = {});

GradSuiteReport run_gradient_suite(const GradSuiteOptions& options = {});

}  // namespace acrm
