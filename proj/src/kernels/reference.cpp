// Serial, element-at-a-time versions of the parallel kernels. Each output
// element sums its terms in the same order as the parallel kernel, so results
// must match bit for bit.

#include "acrm/kernels.hpp"

#include <limits>

namespace acrm::kernels::reference {

namespace {

bool tap(std::size_t out_idx, std::size_t k, const ConvGeometry& g, std::size_t extent,
         std::size_t& in_idx) {
  const std::ptrdiff_t i = static_cast<std::ptrdiff_t>(out_idx * g.stride + k) -
                           static_cast<std::ptrdiff_t>(g.pad);
  if (i < 0 || i >= static_cast<std::ptrdiff_t>(extent)) return false;
  in_idx = static_cast<std::size_t>(i);
  return true;
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                    std::span<const float> b, std::span<float> y) {
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t o = 0; o < g.out_channels; ++o)
      for (std::size_t oh = 0; oh < g.out_h; ++oh)
        for (std::size_t ow = 0; ow < g.out_w; ++ow) {
          double acc = 0.0;
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (std::size_t kh = 0; kh < g.kernel; ++kh) {
              std::size_t ih;
              if (!tap(oh, kh, g, g.in_h, ih)) continue;
              for (std::size_t kw = 0; kw < g.kernel; ++kw) {
                std::size_t iw;
                if (!tap(ow, kw, g, g.in_w, iw)) continue;
                acc += static_cast<double>(w[((o * g.in_channels + c) * g.kernel + kh) * g.kernel + kw]) *
                       static_cast<double>(x[((n * g.in_channels + c) * g.in_h + ih) * g.in_w + iw]);
              }
            }
          y[((n * g.out_channels + o) * g.out_h + oh) * g.out_w + ow] =
              static_cast<float>(acc + static_cast<double>(b[o]));
        }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const float> w,
                           std::span<const float> dy, std::span<float> dx) {
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t c = 0; c < g.in_channels; ++c)
      for (std::size_t ih = 0; ih < g.in_h; ++ih)
        for (std::size_t iw = 0; iw < g.in_w; ++iw) {
          double acc = 0.0;
          for (std::size_t o = 0; o < g.out_channels; ++o)
            for (std::size_t kh = 0; kh < g.kernel; ++kh) {
              const std::ptrdiff_t th = static_cast<std::ptrdiff_t>(ih + g.pad) - static_cast<std::ptrdiff_t>(kh);
              if (th < 0 || th % static_cast<std::ptrdiff_t>(g.stride) != 0) continue;
              const std::size_t oh = static_cast<std::size_t>(th) / g.stride;
              if (oh >= g.out_h) continue;
              for (std::size_t kw = 0; kw < g.kernel; ++kw) {
                const std::ptrdiff_t tw = static_cast<std::ptrdiff_t>(iw + g.pad) - static_cast<std::ptrdiff_t>(kw);
                if (tw < 0 || tw % static_cast<std::ptrdiff_t>(g.stride) != 0) continue;
                const std::size_t ow = static_cast<std::size_t>(tw) / g.stride;
                if (ow >= g.out_w) continue;
                acc += static_cast<double>(w[((o * g.in_channels + c) * g.kernel + kh) * g.kernel + kw]) *
                       static_cast<double>(dy[((n * g.out_channels + o) * g.out_h + oh) * g.out_w + ow]);
              }
            }
          dx[((n * g.in_channels + c) * g.in_h + ih) * g.in_w + iw] = static_cast<float>(acc);
        }
}

void conv2d_backward_params(const ConvGeometry& g, std::span<const float> x,
                            std::span<const float> dy, std::span<float> dw, std::span<float> db) {
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    for (std::size_t c = 0; c < g.in_channels; ++c)
      for (std::size_t kh = 0; kh < g.kernel; ++kh)
        for (std::size_t kw = 0; kw < g.kernel; ++kw) {
          double acc = 0.0;
          for (std::size_t n = 0; n < g.batch; ++n) {
            double sum = 0.0;
            for (std::size_t oh = 0; oh < g.out_h; ++oh) {
              std::size_t ih;
              if (!tap(oh, kh, g, g.in_h, ih)) continue;
              for (std::size_t ow = 0; ow < g.out_w; ++ow) {
                std::size_t iw;
                if (!tap(ow, kw, g, g.in_w, iw)) continue;
                sum += static_cast<double>(dy[((n * g.out_channels + o) * g.out_h + oh) * g.out_w + ow]) *
                       static_cast<double>(x[((n * g.in_channels + c) * g.in_h + ih) * g.in_w + iw]);
              }
            }
            acc += sum;
          }
          dw[((o * g.in_channels + c) * g.kernel + kh) * g.kernel + kw] += static_cast<float>(acc);
        }
    double bias_acc = 0.0;
    for (std::size_t n = 0; n < g.batch; ++n) {
      double bsum = 0.0;
      for (std::size_t p = 0; p < g.out_h * g.out_w; ++p)
        bsum += dy[(n * g.out_channels + o) * g.out_h * g.out_w + p];
      bias_acc += bsum;
    }
    db[o] += static_cast<float>(bias_acc);
  }
}

void linear_forward(std::size_t n, std::size_t in, std::size_t out, std::span<const float> x,
                    std::span<const float> w, std::span<const float> b, std::span<float> y) {
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < out; ++c) {
      double acc = 0.0;
      for (std::size_t d = 0; d < in; ++d)
        acc += static_cast<double>(x[r * in + d]) * static_cast<double>(w[c * in + d]);
      y[r * out + c] = static_cast<float>(acc + static_cast<double>(b[c]));
    }
}

void linear_backward_input(std::size_t n, std::size_t in, std::size_t out,
                           std::span<const float> w, std::span<const float> dy,
                           std::span<float> dx) {
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t d = 0; d < in; ++d) {
      double acc = 0.0;
      for (std::size_t c = 0; c < out; ++c)
        acc += static_cast<double>(dy[r * out + c]) * static_cast<double>(w[c * in + d]);
      dx[r * in + d] = static_cast<float>(acc);
    }
}

void linear_backward_params(std::size_t n, std::size_t in, std::size_t out,
                            std::span<const float> x, std::span<const float> dy,
                            std::span<float> dw, std::span<float> db) {
  for (std::size_t c = 0; c < out; ++c) {
    for (std::size_t d = 0; d < in; ++d) {
      double acc = 0.0;
      for (std::size_t r = 0; r < n; ++r)
        acc += static_cast<double>(dy[r * out + c]) * static_cast<double>(x[r * in + d]);
      dw[c * in + d] += static_cast<float>(acc);
    }
    double bias_acc = 0.0;
    for (std::size_t r = 0; r < n; ++r) bias_acc += dy[r * out + c];
    db[c] += static_cast<float>(bias_acc);
  }
}

void nearest_centroid(std::size_t n, std::size_t dim, std::span<const float> points,
                      std::size_t k, std::span<const float> centroids,
                      std::span<std::uint32_t> assign, std::span<double> dist) {
  for (std::size_t p = 0; p < n; ++p) {
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_j = 0;
    for (std::size_t j = 0; j < k; ++j) {
      double d2 = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = static_cast<double>(points[p * dim + d]) -
                            static_cast<double>(centroids[j * dim + d]);
        d2 += diff * diff;
      }
      if (d2 < best) {
        best = d2;
        best_j = static_cast<std::uint32_t>(j);
      }
    }
    assign[p] = best_j;
    dist[p] = best;
  }
}

}  // namespace acrm::kernels::reference
