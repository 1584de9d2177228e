#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "acrm/tensor.hpp"

namespace acrm {

enum class OptimKind : std::uint32_t { SgdMomentum = 0, Adam = 1 };

struct OptimHyper {
  double lr = 0.01;
  double momentum = 0.9;  // beta1 for Adam
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// Optimizer moments for an ordered parameter list. Buffers are created on the
/// first step and must keep matching the parameter sizes afterwards.
struct OptimState {
  OptimKind kind = OptimKind::SgdMomentum;
  OptimHyper hyper;
  std::vector<std::vector<float>> first;   // velocity (SGD) or m (Adam)
  std::vector<std::vector<float>> second;  // v (Adam only)
  std::uint64_t step = 0;

  static OptimState sgd(double lr, double momentum, double weight_decay = 0.0);
  static OptimState adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
                         double weight_decay = 0.0);
};

// Gradients are read from each parameter's grad buffer.
void sgd_step(std::span<Tensor* const> params, OptimState& state);
void adam_step(std::span<Tensor* const> params, OptimState& state);
void optimizer_step(std::span<Tensor* const> params, OptimState& state);

void zero_grads(std::span<Tensor* const> params);

}  // namespace acrm
