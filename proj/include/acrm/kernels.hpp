#pragma once

// Data-parallel compute kernels.
//
// Every kernel in `acrm::kernels` is OpenMP-parallel over an outer index whose
// iterations write disjoint outputs, and every reduction runs in a fixed
// sequential order in double precision. The results are therefore bit-identical
// to the serial versions in `acrm::kernels::reference` for any thread count;
// the reference versions exist for tests and benchmarks.

#include <cstddef>
#include <cstdint>
#include <span>

namespace acrm::kernels {

struct ConvGeometry {
  std::size_t batch = 0;
  std::size_t in_channels = 0;
  std::size_t in_h = 0;
  std::size_t in_w = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::size_t out_h = 0;
  std::size_t out_w = 0;

  std::size_t input_size() const { return batch * in_channels * in_h * in_w; }
  std::size_t weight_size() const { return out_channels * in_channels * kernel * kernel; }
  std::size_t output_size() const { return batch * out_channels * out_h * out_w; }
};

// y = conv(x, w) + b
void conv2d_forward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                    std::span<const float> b, std::span<float> y);
// dx = conv_transpose(dy, w); overwrites dx
void conv2d_backward_input(const ConvGeometry& g, std::span<const float> w,
                           std::span<const float> dy, std::span<float> dx);
// dw += ..., db += ... (accumulates into existing gradient buffers)
void conv2d_backward_params(const ConvGeometry& g, std::span<const float> x,
                            std::span<const float> dy, std::span<float> dw, std::span<float> db);

// y[n, c] = sum_d x[n, d] * w[c, d] + b[c]
void linear_forward(std::size_t n, std::size_t in, std::size_t out, std::span<const float> x,
                    std::span<const float> w, std::span<const float> b, std::span<float> y);
void linear_backward_input(std::size_t n, std::size_t in, std::size_t out,
                           std::span<const float> w, std::span<const float> dy,
                           std::span<float> dx);
void linear_backward_params(std::size_t n, std::size_t in, std::size_t out,
                            std::span<const float> x, std::span<const float> dy,
                            std::span<float> dw, std::span<float> db);

/// For each of `n` points of dimension `dim`, the index of the nearest of `k`
/// centroids by squared Euclidean distance, lowest index on ties. `dist`
/// receives the squared distance to the chosen centroid.
void nearest_centroid(std::size_t n, std::size_t dim, std::span<const float> points,
                      std::size_t k, std::span<const float> centroids,
                      std::span<std::uint32_t> assign, std::span<double> dist);

namespace reference {

void conv2d_forward(const ConvGeometry& g, std::span<const float> x, std::span<const float> w,
                    std::span<const float> b, std::span<float> y);
void conv2d_backward_input(const ConvGeometry& g, std::span<const float> w,
                           std::span<const float> dy, std::span<float> dx);
void conv2d_backward_params(const ConvGeometry& g, std::span<const float> x,
                            std::span<const float> dy, std::span<float> dw, std::span<float> db);
void linear_forward(std::size_t n, std::size_t in, std::size_t out, std::span<const float> x,
                    std::span<const float> w, std::span<const float> b, std::span<float> y);
void linear_backward_input(std::size_t n, std::size_t in, std::size_t out,
                           std::span<const float> w, std::span<const float> dy,
                           std::span<float> dx);
void linear_backward_params(std::size_t n, std::size_t in, std::size_t out,
                            std::span<const float> x, std::span<const float> dy,
                            std::span<float> dw, std::span<float> db);
void nearest_centroid(std::size_t n, std::size_t dim, std::span<const float> points,
                      std::size_t k, std::span<const float> centroids,
                      std::span<std::uint32_t> assign, std::span<double> dist);

}  // namespace reference

/// Number of OpenMP threads kernels will use (1 when built without OpenMP).
int max_threads();
void set_threads(int n);

}  // namespace acrm::kernels
