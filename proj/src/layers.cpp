#include "acrm/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "acrm/error.hpp"
#include "acrm/kernels.hpp"

namespace acrm {

namespace {

kernels::ConvGeometry geometry(const Shape& x, const Shape& w, std::size_t stride, std::size_t pad) {
  if (x.size() != 4) fail(ErrorKind::Dimension, "conv2d: input must be NCHW, got " + shape_str(x));
  if (w.size() != 4 || w[2] != w[3])
    fail(ErrorKind::Dimension, "conv2d: weight must be OxIxKxK, got " + shape_str(w));
  if (x[1] != w[1])
    fail(ErrorKind::Dimension, "conv2d: input has " + std::to_string(x[1]) + " channels, weight expects " +
                                   std::to_string(w[1]));
  kernels::ConvGeometry g;
  g.batch = x[0];
  g.in_channels = x[1];
  g.in_h = x[2];
  g.in_w = x[3];
  g.out_channels = w[0];
  g.kernel = w[2];
  g.stride = stride;
  g.pad = pad;
  g.out_h = conv_out_extent(g.in_h, g.kernel, stride, pad);
  g.out_w = conv_out_extent(g.in_w, g.kernel, stride, pad);
  return g;
}

}  // namespace

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (stride == 0) fail(ErrorKind::Config, "conv2d: stride must be positive");
  const std::size_t padded = in + 2 * pad;
  if (padded < kernel || (padded - kernel) % stride != 0)
    fail(ErrorKind::Config, "conv2d: extent " + std::to_string(in) + " with kernel " + std::to_string(kernel) +
                                ", stride " + std::to_string(stride) + ", pad " + std::to_string(pad) +
                                " does not give an integer output size");
  return (padded - kernel) / stride + 1;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad) {
  const auto g = geometry(x.shape(), w.shape(), stride, pad);
  expect_shape(b, {g.out_channels}, "conv2d bias");
  Tensor y({g.batch, g.out_channels, g.out_h, g.out_w});
  kernels::conv2d_forward(g, x.data(), w.data(), b.data(), y.data());
  debug_check_finite(y.data(), "conv2d");
  return y;
}

Tensor conv2d_backward_input(const Shape& x_shape, const Tensor& w, const Tensor& dy, std::size_t stride,
                             std::size_t pad) {
  const auto g = geometry(x_shape, w.shape(), stride, pad);
  expect_shape(dy, {g.batch, g.out_channels, g.out_h, g.out_w}, "conv2d output gradient");
  Tensor dx(x_shape);
  kernels::conv2d_backward_input(g, w.data(), dy.data(), dx.data());
  return dx;
}

void conv2d_backward_params(const Tensor& x, const Tensor& dy, std::size_t stride, std::size_t pad, Tensor& w,
                            Tensor& b) {
  const auto g = geometry(x.shape(), w.shape(), stride, pad);
  expect_shape(dy, {g.batch, g.out_channels, g.out_h, g.out_w}, "conv2d output gradient");
  expect_shape(b, {g.out_channels}, "conv2d bias");
  kernels::conv2d_backward_params(g, x.data(), dy.data(), w.grad(), b.grad());
}

Tensor relu(const Tensor& x) {
  Tensor y(x.shape());
  auto in = x.data();
  auto out = y.data();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0f ? in[i] : 0.0f;
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
  expect_shape(dy, x.shape(), "relu gradient");
  Tensor dx(x.shape());
  auto in = x.data();
  auto g = dy.data();
  auto out = dx.data();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0f ? g[i] : 0.0f;
  return dx;
}

Tensor avgpool2(const Tensor& x) {
  expect_rank(x, 4, "avgpool2");
  const std::size_t h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0)
    fail(ErrorKind::Config, "avgpool2: spatial dims must be even, got " + shape_str(x.shape()));
  const std::size_t planes = x.dim(0) * x.dim(1), oh = h / 2, ow = w / 2;
  Tensor y({x.dim(0), x.dim(1), oh, ow});
  const float* in = x.raw();
  float* out = y.raw();
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        const float* r0 = in + (p * h + 2 * i) * w + 2 * j;
        const float* r1 = r0 + w;
        const double s = static_cast<double>(r0[0]) + r0[1] + r1[0] + r1[1];
        out[(p * oh + i) * ow + j] = static_cast<float>(s * 0.25);
      }
  return y;
}

Tensor avgpool2_backward(const Tensor& dy) {
  expect_rank(dy, 4, "avgpool2 gradient");
  const std::size_t oh = dy.dim(2), ow = dy.dim(3), h = oh * 2, w = ow * 2;
  const std::size_t planes = dy.dim(0) * dy.dim(1);
  Tensor dx({dy.dim(0), dy.dim(1), h, w});
  const float* g = dy.raw();
  float* out = dx.raw();
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) out[(p * h + i) * w + j] = g[(p * oh + i / 2) * ow + j / 2] * 0.25f;
  return dx;
}

Tensor global_avgpool(const Tensor& x) {
  expect_rank(x, 4, "global_avgpool");
  const std::size_t planes = x.dim(0) * x.dim(1), area = x.dim(2) * x.dim(3);
  Tensor y({x.dim(0), x.dim(1)});
  for (std::size_t p = 0; p < planes; ++p) {
    double s = 0.0;
    const float* in = x.raw() + p * area;
    for (std::size_t i = 0; i < area; ++i) s += in[i];
    y[p] = static_cast<float>(s / static_cast<double>(area));
  }
  return y;
}

Tensor global_avgpool_backward(const Shape& x_shape, const Tensor& dy) {
  if (x_shape.size() != 4) fail(ErrorKind::Dimension, "global_avgpool: input must be NCHW");
  expect_shape(dy, {x_shape[0], x_shape[1]}, "global_avgpool gradient");
  const std::size_t planes = x_shape[0] * x_shape[1], area = x_shape[2] * x_shape[3];
  Tensor dx(x_shape);
  const double inv = 1.0 / static_cast<double>(area);
  for (std::size_t p = 0; p < planes; ++p) {
    const auto v = static_cast<float>(dy[p] * inv);
    std::fill_n(dx.raw() + p * area, area, v);
  }
  return dx;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  expect_rank(x, 2, "linear input");
  expect_rank(w, 2, "linear weight");
  if (x.dim(1) != w.dim(1))
    fail(ErrorKind::Dimension, "linear: input width " + std::to_string(x.dim(1)) + " does not match weight " +
                                   shape_str(w.shape()));
  expect_shape(b, {w.dim(0)}, "linear bias");
  Tensor y({x.dim(0), w.dim(0)});
  kernels::linear_forward(x.dim(0), x.dim(1), w.dim(0), x.data(), w.data(), b.data(), y.data());
  debug_check_finite(y.data(), "linear");
  return y;
}

Tensor linear_backward_input(const Tensor& w, const Tensor& dy) {
  expect_rank(dy, 2, "linear gradient");
  if (dy.dim(1) != w.dim(0)) fail(ErrorKind::Dimension, "linear: gradient width does not match weight rows");
  Tensor dx({dy.dim(0), w.dim(1)});
  kernels::linear_backward_input(dy.dim(0), w.dim(1), w.dim(0), w.data(), dy.data(), dx.data());
  return dx;
}

void linear_backward_params(const Tensor& x, const Tensor& dy, Tensor& w, Tensor& b) {
  expect_rank(x, 2, "linear input");
  expect_rank(dy, 2, "linear gradient");
  if (x.dim(0) != dy.dim(0)) fail(ErrorKind::Dimension, "linear: input and gradient batch sizes differ");
  expect_shape(w, {dy.dim(1), x.dim(1)}, "linear weight");
  expect_shape(b, {dy.dim(1)}, "linear bias");
  kernels::linear_backward_params(x.dim(0), x.dim(1), dy.dim(1), x.data(), dy.data(), w.grad(), b.grad());
}

LossGrad softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  expect_rank(logits, 2, "softmax_cross_entropy");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.size() != n)
    fail(ErrorKind::Dimension, "softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                                   std::to_string(n));
  LossGrad out{0.0, Tensor(logits.shape())};
  std::vector<double> p(c);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c)
      fail(ErrorKind::Input, "label " + std::to_string(y) + " outside [0, " + std::to_string(c) + ")");
    const float* row = logits.raw() + i * c;
    double mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      p[j] = std::exp(static_cast<double>(row[j]) - mx);
      z += p[j];
    }
    total += std::log(z) - (static_cast<double>(row[y]) - mx);
    float* g = out.grad.raw() + i * c;
    for (std::size_t j = 0; j < c; ++j) {
      const double pj = p[j] / z - (j == static_cast<std::size_t>(y) ? 1.0 : 0.0);
      g[j] = static_cast<float>(pj / static_cast<double>(n));
    }
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

LossGrad mse_loss(const Tensor& prediction, const Tensor& target) {
  expect_shape(target, prediction.shape(), "mse_loss target");
  LossGrad out{0.0, Tensor(prediction.shape())};
  const double n = static_cast<double>(prediction.numel());
  double total = 0.0;
  for (std::size_t i = 0; i < prediction.numel(); ++i) {
    const double d = static_cast<double>(prediction[i]) - static_cast<double>(target[i]);
    total += d * d;
    out.grad[i] = static_cast<float>(2.0 * d / n);
  }
  out.loss = total / n;
  return out;
}

}  // namespace acrm
