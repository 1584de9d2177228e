#include "acrm/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "acrm/error.hpp"

namespace acrm {

double relative_gradient_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradCheckResult finite_diff_check(const std::function<double()>& loss, std::span<float> values,
                                  std::span<const float> analytic, float eps, std::size_t max_entries,
                                  double floor, const std::function<std::uint64_t()>& regime) {
  if (analytic.size() != values.size())
    fail(ErrorKind::Dimension, "finite_diff_check: gradient and value sizes differ");
  GradCheckResult result;
  const std::size_t n = values.size();
  const std::size_t stride = (max_entries == 0 || max_entries >= n) ? 1 : n / max_entries;
  for (std::size_t i = 0; i < n; i += stride) {
    const float original = values[i];
    values[i] = original + eps;
    const double plus = loss();
    const std::uint64_t regime_plus = regime ? regime() : 0;
    values[i] = original - eps;
    const double minus = loss();
    const std::uint64_t regime_minus = regime ? regime() : 0;
    values[i] = original;
    if (regime_plus != regime_minus) {
      ++result.skipped;
      continue;
    }
    // use the actually representable step
    const double h = static_cast<double>(original + eps) - static_cast<double>(original - eps);
    const double numeric = (plus - minus) / h;
    const double err = relative_gradient_error(analytic[i], numeric, floor);
    ++result.checked;
    if (result.checked == 1 || err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_index = i;
      result.analytic = analytic[i];
      result.numeric = numeric;
    }
  }
  return result;
}

}  // namespace acrm
