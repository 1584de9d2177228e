#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <doctest.h>

#include "acrm/error.hpp"
#include "acrm/rng.hpp"
#include "acrm/tensor.hpp"

namespace testutil {

inline acrm::Tensor randn(acrm::Shape shape, std::uint64_t seed, double scale = 1.0) {
  acrm::Rng rng(seed);
  acrm::Tensor t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<float>(scale * rng.normal());
  return t;
}

inline double max_rel_diff(std::span<const float> got, std::span<const double> want) {
  double worst = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i) {
    const double denom = std::max(std::abs(want[i]), 1e-30);
    worst = std::max(worst, std::abs(static_cast<double>(got[i]) - want[i]) / denom);
  }
  return worst;
}

template <class Fn>
acrm::ErrorKind error_kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const acrm::Error& e) {
    return e.kind();
  }
  FAIL("expected an acrm::Error");
  return acrm::ErrorKind::Io;
}

}  // namespace testutil
