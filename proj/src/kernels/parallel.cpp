#include "acrm/kernels.hpp"

#include <algorithm>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace acrm::kernels {

namespace {

using Index = std::ptrdiff_t;

// Output columns [lo, hi) whose input column ow*stride + kw - pad lies in [0, w).
void valid_range(std::size_t kw, const ConvGeometry& g, std::size_t extent, std::size_t out,
                 std::size_t& lo, std::size_t& hi) {
  const Index s = static_cast<Index>(g.stride);
  const Index off = static_cast<Index>(kw) - static_cast<Index>(g.pad);
  // smallest ow with ow*s + off >= 0
  Index first = off >= 0 ? 0 : (-off + s - 1) / s;
  // largest ow with ow*s + off <= extent - 1
  Index last = (static_cast<Index>(extent) - 1 - off);
  last = last < 0 ? -1 : last / s;
  last = std::min<Index>(last, static_cast<Index>(out) - 1);
  if (first > last) {
    lo = hi = 0;
    return;
  }
  lo = static_cast<std::size_t>(first);
  hi = static_cast<std::size_t>(last) + 1;
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
}

void conv2d_forward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                    std::span<const float> b, std::span<float> y) {
  const std::size_t plane = g.out_h * g.out_w;
  const Index jobs = static_cast<Index>(g.batch * g.out_channels);
#pragma omp parallel
  {
    std::vector<double> acc(plane);
#pragma omp for schedule(static)
    for (Index job = 0; job < jobs; ++job) {
      const std::size_t n = static_cast<std::size_t>(job) / g.out_channels;
      const std::size_t o = static_cast<std::size_t>(job) % g.out_channels;
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t c = 0; c < g.in_channels; ++c) {
        const float* xc = x.data() + (n * g.in_channels + c) * g.in_h * g.in_w;
        for (std::size_t kh = 0; kh < g.kernel; ++kh) {
          std::size_t oh_lo, oh_hi;
          valid_range(kh, g, g.in_h, g.out_h, oh_lo, oh_hi);
          for (std::size_t kw = 0; kw < g.kernel; ++kw) {
            const double wv = w[((o * g.in_channels + c) * g.kernel + kh) * g.kernel + kw];
            std::size_t ow_lo, ow_hi;
            valid_range(kw, g, g.in_w, g.out_w, ow_lo, ow_hi);
            for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
              const float* xrow = xc + (oh * g.stride + kh - g.pad) * g.in_w;
              double* arow = acc.data() + oh * g.out_w;
              if (g.stride == 1) {
                const float* xs = xrow + kw - g.pad;
                for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) arow[ow] += wv * static_cast<double>(xs[ow]);
              } else {
                for (std::size_t ow = ow_lo; ow < ow_hi; ++ow)
                  arow[ow] += wv * static_cast<double>(xrow[ow * g.stride + kw - g.pad]);
              }
            }
          }
        }
      }
      const double bias = b[o];
      float* yp = y.data() + (n * g.out_channels + o) * plane;
      for (std::size_t p = 0; p < plane; ++p) yp[p] = static_cast<float>(acc[p] + bias);
    }
  }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const float> w,
                           std::span<const float> dy, std::span<float> dx) {
  const std::size_t in_plane = g.in_h * g.in_w;
  const std::size_t out_plane = g.out_h * g.out_w;
  const Index batch = static_cast<Index>(g.batch);
#pragma omp parallel
  {
    std::vector<double> acc(g.in_channels * in_plane);
#pragma omp for schedule(static)
    for (Index ni = 0; ni < batch; ++ni) {
      const std::size_t n = static_cast<std::size_t>(ni);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t o = 0; o < g.out_channels; ++o) {
        const float* dyo = dy.data() + (n * g.out_channels + o) * out_plane;
        for (std::size_t c = 0; c < g.in_channels; ++c) {
          double* ac = acc.data() + c * in_plane;
          for (std::size_t kh = 0; kh < g.kernel; ++kh) {
            std::size_t oh_lo, oh_hi;
            valid_range(kh, g, g.in_h, g.out_h, oh_lo, oh_hi);
            for (std::size_t kw = 0; kw < g.kernel; ++kw) {
              const double wv = w[((o * g.in_channels + c) * g.kernel + kh) * g.kernel + kw];
              std::size_t ow_lo, ow_hi;
              valid_range(kw, g, g.in_w, g.out_w, ow_lo, ow_hi);
              for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
                double* arow = ac + (oh * g.stride + kh - g.pad) * g.in_w;
                const float* drow = dyo + oh * g.out_w;
                for (std::size_t ow = ow_lo; ow < ow_hi; ++ow)
                  arow[ow * g.stride + kw - g.pad] += wv * static_cast<double>(drow[ow]);
              }
            }
          }
        }
      }
      float* dxn = dx.data() + n * g.in_channels * in_plane;
      for (std::size_t i = 0; i < acc.size(); ++i) dxn[i] = static_cast<float>(acc[i]);
    }
  }
}

void conv2d_backward_params(const ConvGeometry& g, std::span<const float> x,
                            std::span<const float> dy, std::span<float> dw, std::span<float> db) {
  const std::size_t in_plane = g.in_h * g.in_w;
  const std::size_t out_plane = g.out_h * g.out_w;
  const std::size_t taps = g.in_channels * g.kernel * g.kernel;
  const Index outs = static_cast<Index>(g.out_channels);
#pragma omp parallel
  {
    std::vector<double> acc(taps);
#pragma omp for schedule(static)
    for (Index oi = 0; oi < outs; ++oi) {
      const std::size_t o = static_cast<std::size_t>(oi);
      std::fill(acc.begin(), acc.end(), 0.0);
      double bias_acc = 0.0;
      for (std::size_t n = 0; n < g.batch; ++n) {
        const float* dyo = dy.data() + (n * g.out_channels + o) * out_plane;
        double bsum = 0.0;
        for (std::size_t p = 0; p < out_plane; ++p) bsum += dyo[p];
        bias_acc += bsum;
        for (std::size_t c = 0; c < g.in_channels; ++c) {
          const float* xc = x.data() + (n * g.in_channels + c) * in_plane;
          for (std::size_t kh = 0; kh < g.kernel; ++kh) {
            std::size_t oh_lo, oh_hi;
            valid_range(kh, g, g.in_h, g.out_h, oh_lo, oh_hi);
            for (std::size_t kw = 0; kw < g.kernel; ++kw) {
              std::size_t ow_lo, ow_hi;
              valid_range(kw, g, g.in_w, g.out_w, ow_lo, ow_hi);
              double sum = 0.0;
              for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
                const float* xrow = xc + (oh * g.stride + kh - g.pad) * g.in_w;
                const float* drow = dyo + oh * g.out_w;
                for (std::size_t ow = ow_lo; ow < ow_hi; ++ow)
                  sum += static_cast<double>(drow[ow]) *
                         static_cast<double>(xrow[ow * g.stride + kw - g.pad]);
              }
              acc[(c * g.kernel + kh) * g.kernel + kw] += sum;
            }
          }
        }
      }
      float* dwo = dw.data() + o * taps;
      for (std::size_t t = 0; t < taps; ++t) dwo[t] += static_cast<float>(acc[t]);
      db[o] += static_cast<float>(bias_acc);
    }
  }
}

void linear_forward(std::size_t n, std::size_t in, std::size_t out, std::span<const float> x,
                    std::span<const float> w, std::span<const float> b, std::span<float> y) {
#pragma omp parallel for schedule(static)
  for (Index ri = 0; ri < static_cast<Index>(n); ++ri) {
    const std::size_t r = static_cast<std::size_t>(ri);
    const float* xr = x.data() + r * in;
    for (std::size_t c = 0; c < out; ++c) {
      const float* wc = w.data() + c * in;
      double acc = 0.0;
      for (std::size_t d = 0; d < in; ++d) acc += static_cast<double>(xr[d]) * static_cast<double>(wc[d]);
      y[r * out + c] = static_cast<float>(acc + static_cast<double>(b[c]));
    }
  }
}

void linear_backward_input(std::size_t n, std::size_t in, std::size_t out,
                           std::span<const float> w, std::span<const float> dy,
                           std::span<float> dx) {
#pragma omp parallel
  {
    std::vector<double> acc(in);
#pragma omp for schedule(static)
    for (Index ri = 0; ri < static_cast<Index>(n); ++ri) {
      const std::size_t r = static_cast<std::size_t>(ri);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t c = 0; c < out; ++c) {
        const double g = dy[r * out + c];
        const float* wc = w.data() + c * in;
        for (std::size_t d = 0; d < in; ++d) acc[d] += g * static_cast<double>(wc[d]);
      }
      for (std::size_t d = 0; d < in; ++d) dx[r * in + d] = static_cast<float>(acc[d]);
    }
  }
}

void linear_backward_params(std::size_t n, std::size_t in, std::size_t out,
                            std::span<const float> x, std::span<const float> dy,
                            std::span<float> dw, std::span<float> db) {
#pragma omp parallel
  {
    std::vector<double> acc(in);
#pragma omp for schedule(static)
    for (Index ci = 0; ci < static_cast<Index>(out); ++ci) {
      const std::size_t c = static_cast<std::size_t>(ci);
      std::fill(acc.begin(), acc.end(), 0.0);
      double bias_acc = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        const double g = dy[r * out + c];
        bias_acc += g;
        const float* xr = x.data() + r * in;
        for (std::size_t d = 0; d < in; ++d) acc[d] += g * static_cast<double>(xr[d]);
      }
      for (std::size_t d = 0; d < in; ++d) dw[c * in + d] += static_cast<float>(acc[d]);
      db[c] += static_cast<float>(bias_acc);
    }
  }
}

void nearest_centroid(std::size_t n, std::size_t dim, std::span<const float> points,
                      std::size_t k, std::span<const float> centroids,
                      std::span<std::uint32_t> assign, std::span<double> dist) {
#pragma omp parallel for schedule(static)
  for (Index pi = 0; pi < static_cast<Index>(n); ++pi) {
    const std::size_t p = static_cast<std::size_t>(pi);
    const float* v = points.data() + p * dim;
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_j = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const float* c = centroids.data() + j * dim;
      double d2 = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = static_cast<double>(v[d]) - static_cast<double>(c[d]);
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

}  // namespace acrm::kernels
