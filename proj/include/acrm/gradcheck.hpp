#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

namespace acrm {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // entries whose regime changed within +-eps
};

/// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps entries whose
/// true gradient is ~0 from dividing float32 round-off by zero.
double relative_gradient_error(double analytic, double numeric, double floor = 1e-2);

/// Compares `analytic` to central differences of `loss` taken by perturbing
/// each entry of `values` by +-eps in place (restored afterwards). `loss`
/// must evaluate the scalar objective at the current contents of `values`.
/// When `max_entries` is nonzero only that many evenly spaced entries are
/// checked. `regime`, if set, fingerprints the piecewise-linear region of the
/// objective (e.g. relu sign pattern); entries where the fingerprint differs
/// between the +eps and -eps evaluations sit on a kink and are skipped.
GradCheckResult finite_diff_check(const std::function<double()>& loss, std::span<float> values,
                                  std::span<const float> analytic, float eps = 1e-3f,
                                  std::size_t max_entries = 0, double floor = 1e-2,
                                  const std::function<std::uint64_t()>& regime = {});

}  // namespace acrm
