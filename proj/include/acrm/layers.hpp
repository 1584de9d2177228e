#pragma once

// Forward and backward passes for the layers of the network. Backward
// functions either return the input gradient or accumulate into the gradient
// buffers of the parameter tensors.

#include <cstddef>
#include <span>

#include "acrm/tensor.hpp"

namespace acrm {

/// Output spatial extent of a convolution; throws a Config error when the
/// geometry does not produce a positive integer size.
std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);

// NCHW input, OIKK weight, O bias.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride = 1, std::size_t pad = 0);
Tensor conv2d_backward_input(const Shape& x_shape, const Tensor& w, const Tensor& dy, std::size_t stride = 1,
                             std::size_t pad = 0);
/// Accumulates into w.grad() and b.grad().
void conv2d_backward_params(const Tensor& x, const Tensor& dy, std::size_t stride, std::size_t pad, Tensor& w,
                            Tensor& b);

Tensor relu(const Tensor& x);
/// Gradient is passed where x > 0 and zeroed elsewhere.
Tensor relu_backward(const Tensor& x, const Tensor& dy);

/// 2x2 non-overlapping mean pooling; H and W must be even.
Tensor avgpool2(const Tensor& x);
Tensor avgpool2_backward(const Tensor& dy);

/// NCHW -> NC spatial mean.
Tensor global_avgpool(const Tensor& x);
Tensor global_avgpool_backward(const Shape& x_shape, const Tensor& dy);

// N x D input, C x D weight, C bias.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor linear_backward_input(const Tensor& w, const Tensor& dy);
/// Accumulates into w.grad() and b.grad().
void linear_backward_params(const Tensor& x, const Tensor& dy, Tensor& w, Tensor& b);

struct LossGrad {
  double loss = 0.0;
  Tensor grad;  // d loss / d input, same shape as the input
};

/// Mean over the batch of -log softmax(logits)[label]. The gradient is
/// (softmax - onehot) / N.
LossGrad softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Mean squared error over every element; gradient is w.r.t. `prediction`.
LossGrad mse_loss(const Tensor& prediction, const Tensor& target);

}  // namespace acrm
