#include "acrm/optim.hpp"

#include <cmath>
#include <string>

#include "acrm/error.hpp"

namespace acrm {

namespace {

void prepare(std::span<Tensor* const> params, OptimState& state, bool need_second) {
  if (state.first.empty()) {
    for (auto* p : params) {
      state.first.emplace_back(p->numel(), 0.0f);
      if (need_second) state.second.emplace_back(p->numel(), 0.0f);
    }
  }
  if (state.first.size() != params.size() || (need_second && state.second.size() != params.size()))
    fail(ErrorKind::Dimension, "optimizer state tracks " + std::to_string(state.first.size()) +
                                   " parameters, step received " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.first[i].size() != params[i]->numel() || (need_second && state.second[i].size() != params[i]->numel()))
      fail(ErrorKind::Dimension, "optimizer moment buffer " + std::to_string(i) + " does not match parameter " +
                                     shape_str(params[i]->shape()));
  }
}

}  // namespace

OptimState OptimState::sgd(double lr, double momentum, double weight_decay) {
  OptimState s;
  s.kind = OptimKind::SgdMomentum;
  s.hyper.lr = lr;
  s.hyper.momentum = momentum;
  s.hyper.weight_decay = weight_decay;
  return s;
}

OptimState OptimState::adam(double lr, double beta1, double beta2, double eps, double weight_decay) {
  OptimState s;
  s.kind = OptimKind::Adam;
  s.hyper = {lr, beta1, beta2, eps, weight_decay};
  return s;
}

void sgd_step(std::span<Tensor* const> params, OptimState& state) {
  if (state.kind != OptimKind::SgdMomentum) fail(ErrorKind::Contract, "sgd_step on Adam state");
  prepare(params, state, false);
  const auto& h = state.hyper;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto data = params[i]->data();
    auto grad = params[i]->grad();
    auto& vel = state.first[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double g = static_cast<double>(grad[j]) + h.weight_decay * static_cast<double>(data[j]);
      const double v = h.momentum * static_cast<double>(vel[j]) + g;
      vel[j] = static_cast<float>(v);
      data[j] = static_cast<float>(static_cast<double>(data[j]) - h.lr * v);
    }
  }
  ++state.step;
}

void adam_step(std::span<Tensor* const> params, OptimState& state) {
  if (state.kind != OptimKind::Adam) fail(ErrorKind::Contract, "adam_step on SGD state");
  prepare(params, state, true);
  const auto& h = state.hyper;
  const double t = static_cast<double>(state.step + 1);
  const double c1 = 1.0 - std::pow(h.momentum, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto data = params[i]->data();
    auto grad = params[i]->grad();
    auto& m = state.first[i];
    auto& v = state.second[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double g = static_cast<double>(grad[j]) + h.weight_decay * static_cast<double>(data[j]);
      const double mj = h.momentum * static_cast<double>(m[j]) + (1.0 - h.momentum) * g;
      const double vj = h.beta2 * static_cast<double>(v[j]) + (1.0 - h.beta2) * g * g;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      const double update = h.lr * (mj / c1) / (std::sqrt(vj / c2) + h.eps);
      data[j] = static_cast<float>(static_cast<double>(data[j]) - update);
    }
  }
  ++state.step;
}

void optimizer_step(std::span<Tensor* const> params, OptimState& state) {
  if (state.kind == OptimKind::Adam)
    adam_step(params, state);
  else
    sgd_step(params, state);
}

void zero_grads(std::span<Tensor* const> params) {
  for (auto* p : params) p->zero_grad();
}

}  // namespace acrm
