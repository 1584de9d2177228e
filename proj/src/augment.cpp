#include "acrm/augment.hpp"

#include <algorithm>
#include <cmath>

#include "acrm/error.hpp"
#include "acrm/rng.hpp"

namespace acrm {

Tensor augment_crop_flip(const Tensor& images, std::size_t pad, Rng& rng) {
  expect_rank(images, 4, "augment_crop_flip");
  const std::size_t n = images.dim(0), c = images.dim(1), h = images.dim(2), w = images.dim(3);
  Tensor out(images.shape());
  for (std::size_t i = 0; i < n; ++i) {
    // offsets into the padded image, in [0, 2*pad]
    const auto dy = static_cast<std::ptrdiff_t>(rng.uniform_index(2 * pad + 1)) - static_cast<std::ptrdiff_t>(pad);
    const auto dx = static_cast<std::ptrdiff_t>(rng.uniform_index(2 * pad + 1)) - static_cast<std::ptrdiff_t>(pad);
    const bool flip = rng.coin();
    for (std::size_t ch = 0; ch < c; ++ch) {
      const float* src = images.raw() + (i * c + ch) * h * w;
      float* dst = out.raw() + (i * c + ch) * h * w;
      for (std::size_t y = 0; y < h; ++y) {
        const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + dy;
        for (std::size_t x = 0; x < w; ++x) {
          const std::size_t xx = flip ? w - 1 - x : x;
          const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx) + dx;
          const bool inside = sy >= 0 && sy < static_cast<std::ptrdiff_t>(h) && sx >= 0 &&
                              sx < static_cast<std::ptrdiff_t>(w);
          dst[y * w + x] = inside ? src[static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx)] : 0.0f;
        }
      }
    }
  }
  return out;
}

Tensor feature_random_resized_crop(const Tensor& maps, double scale_min, double scale_max, Rng& rng) {
  expect_rank(maps, 4, "feature_random_resized_crop");
  if (!(scale_min > 0.0 && scale_min <= scale_max && scale_max <= 1.0))
    fail(ErrorKind::Config, "feature crop scale range must satisfy 0 < min <= max <= 1");
  const std::size_t n = maps.dim(0), c = maps.dim(1), h = maps.dim(2), w = maps.dim(3);
  if (h < 2 || w < 2) fail(ErrorKind::Config, "feature crop needs spatial dims >= 2");
  Tensor out(maps.shape());
  std::vector<std::size_t> y0(h), y1(h), x0(w), x1(w);
  std::vector<float> ty(h), tx(w);
  for (std::size_t i = 0; i < n; ++i) {
    const double area = scale_min == scale_max ? scale_min : rng.uniform(scale_min, scale_max);
    const double side = std::sqrt(area);
    const double ch = side * static_cast<double>(h), cw = side * static_cast<double>(w);
    const double oy = rng.uniform() * (static_cast<double>(h) - ch);
    const double ox = rng.uniform() * (static_cast<double>(w) - cw);
    auto axis = [](std::size_t extent, double origin, double size, std::vector<std::size_t>& lo,
                   std::vector<std::size_t>& hi, std::vector<float>& t) {
      const double ratio = size / static_cast<double>(extent);
      for (std::size_t k = 0; k < extent; ++k) {
        // sample position of the output pixel center in input pixel coordinates
        double pos = origin + (static_cast<double>(k) + 0.5) * ratio - 0.5;
        pos = std::clamp(pos, 0.0, static_cast<double>(extent - 1));
        const auto base = static_cast<std::size_t>(std::floor(pos));
        lo[k] = base;
        hi[k] = std::min(base + 1, extent - 1);
        t[k] = static_cast<float>(pos - static_cast<double>(base));
      }
    };
    axis(h, oy, ch, y0, y1, ty);
    axis(w, ox, cw, x0, x1, tx);
    for (std::size_t ch_i = 0; ch_i < c; ++ch_i) {
      const float* src = maps.raw() + (i * c + ch_i) * h * w;
      float* dst = out.raw() + (i * c + ch_i) * h * w;
      for (std::size_t y = 0; y < h; ++y) {
        const float* r0 = src + y0[y] * w;
        const float* r1 = src + y1[y] * w;
        for (std::size_t x = 0; x < w; ++x) {
          // a + t * (b - a) keeps constants exact and is the identity at t = 0
          const float top = r0[x0[x]] + tx[x] * (r0[x1[x]] - r0[x0[x]]);
          const float bottom = r1[x0[x]] + tx[x] * (r1[x1[x]] - r1[x0[x]]);
          dst[y * w + x] = top + ty[y] * (bottom - top);
        }
      }
    }
  }
  return out;
}

}  // namespace acrm
