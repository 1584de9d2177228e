#include "acrm/acae.hpp"

#include <cmath>
#include <numeric>

#include "acrm/augment.hpp"
#include "acrm/error.hpp"
#include "acrm/layers.hpp"
#include "acrm/model.hpp"
#include "acrm/optim.hpp"
#include "acrm/rng.hpp"

namespace acrm {

namespace {

void check_channels(const Tensor& t, std::size_t c, const char* what) {
  expect_rank(t, 4, what);
  if (t.dim(1) != c)
    fail(ErrorKind::Dimension, std::string(what) + ": expected " + std::to_string(c) + " channels, got " +
                                   shape_str(t.shape()));
}

void require_frozen_head(const SplitModel& model) {
  if (!model.head_frozen()) fail(ErrorKind::Contract, "ACAE loss requires the head parameters to be frozen");
}

// Shared forward; when `grads` is set, backpropagates into it.
AcaeLoss evaluate(const Tensor& z, std::span<const int> labels, const AcaeParams& params, const SplitModel& model,
                  bool use_ce, AcaeParams* grads) {
  require_frozen_head(model);
  check_channels(z, params.channels(), "acae_loss");
  const Tensor pre = conv2d(z, params.enc_w, params.enc_b);
  const Tensor u = relu(pre);
  const Tensor z_hat = conv2d(u, params.dec_w, params.dec_b);
  AcaeLoss out;
  auto rec = mse_loss(z_hat, z);
  out.mse = rec.loss;
  Tensor dz_hat = std::move(rec.grad);
  if (use_ce) {
    ForwardTrace trace;
    const Tensor logits = model.forward_from(z_hat, model.split(), trace);
    auto ce = softmax_cross_entropy(logits, labels);
    out.ce = ce.loss;
    if (grads) {
      const Tensor dz = model.input_gradient(trace, ce.grad);
      for (std::size_t i = 0; i < dz_hat.numel(); ++i) dz_hat[i] += dz[i];
    }
  }
  out.total = out.ce + out.mse;
  if (grads) {
    conv2d_backward_params(u, dz_hat, 1, 0, grads->dec_w, grads->dec_b);
    const Tensor du = conv2d_backward_input(u.shape(), params.dec_w, dz_hat);
    const Tensor dpre = relu_backward(pre, du);
    conv2d_backward_params(z, dpre, 1, 0, grads->enc_w, grads->enc_b);
  }
  return out;
}

}  // namespace

AcaeParams AcaeParams::build(std::size_t channels, std::size_t latent_channels, std::uint64_t seed) {
  if (channels == 0 || latent_channels == 0) fail(ErrorKind::Config, "ACAE channel counts must be positive");
  Rng rng(seed);
  AcaeParams p;
  p.enc_w = Tensor({latent_channels, channels, 1, 1});
  p.enc_b = Tensor({latent_channels});
  p.dec_w = Tensor({channels, latent_channels, 1, 1});
  p.dec_b = Tensor({channels});
  const double enc_std = std::sqrt(2.0 / static_cast<double>(channels));
  const double dec_std = std::sqrt(1.0 / static_cast<double>(latent_channels));
  for (auto& v : p.enc_w.data()) v = static_cast<float>(rng.normal() * enc_std);
  for (auto& v : p.dec_w.data()) v = static_cast<float>(rng.normal() * dec_std);
  return p;
}

AcaeParams AcaeParams::identity(std::size_t channels) {
  AcaeParams p;
  p.enc_w = Tensor({channels, channels, 1, 1});
  p.enc_b = Tensor({channels});
  p.dec_w = Tensor({channels, channels, 1, 1});
  p.dec_b = Tensor({channels});
  for (std::size_t c = 0; c < channels; ++c) {
    p.enc_w[c * channels + c] = 1.0f;
    p.dec_w[c * channels + c] = 1.0f;
  }
  return p;
}

std::uint32_t AcaeParams::encoder_checksum() const { return Crc32{}.update(enc_w).update(enc_b).value(); }
std::uint32_t AcaeParams::decoder_checksum() const { return Crc32{}.update(dec_w).update(dec_b).value(); }

Tensor acae_encode(const Tensor& z, const AcaeParams& params) {
  check_channels(z, params.channels(), "acae_encode");
  return relu(conv2d(z, params.enc_w, params.enc_b));
}

Tensor acae_decode(const Tensor& u, const AcaeParams& params) {
  check_channels(u, params.latent_channels(), "acae_decode");
  return conv2d(u, params.dec_w, params.dec_b);
}

AcaeLoss acae_loss(const Tensor& z, std::span<const int> labels, const AcaeParams& params, const SplitModel& model,
                   bool use_ce) {
  return evaluate(z, labels, params, model, use_ce, nullptr);
}

AcaeLoss acae_loss_backward(const Tensor& z, std::span<const int> labels, AcaeParams& params,
                            const SplitModel& model, bool use_ce) {
  return evaluate(z, labels, params, model, use_ce, &params);
}

double acae_reconstruction_mse(const SplitModel& model, const AcaeParams& params, const Tensor& images) {
  expect_rank(images, 4, "acae_reconstruction_mse");
  double total = 0.0;
  std::size_t count = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < images.dim(0); start += 128) {
    const std::size_t end = std::min(images.dim(0), start + 128);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor z = model.forward_backbone(gather_rows(images, idx));
    const Tensor z_hat = acae_decode(acae_encode(z, params), params);
    total += mse_loss(z_hat, z).loss * static_cast<double>(z.numel());
    count += z.numel();
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

AcaeTrainResult train_acae(const SplitModel& model, const Tensor& images, std::span<const int> labels,
                           const AcaeTrainOptions& options) {
  if (labels.empty()) fail(ErrorKind::Input, "train_acae: empty dataset");
  if (images.dim(0) != labels.size()) fail(ErrorKind::Dimension, "train_acae: image and label counts differ");
  if (!model.backbone_frozen() || !model.head_frozen())
    fail(ErrorKind::Contract, "train_acae requires a frozen backbone and head");
  if (options.batch_size == 0) fail(ErrorKind::Config, "acae.batch_size must be positive");
  const std::size_t channels = model.config().channels[model.split() - 1];
  AcaeTrainResult result;
  result.params = AcaeParams::build(channels, options.latent_channels, options.seed);
  result.initial_mse = acae_reconstruction_mse(model, result.params, images);

  Rng rng(derive_seed(options.seed, 1));
  auto params = result.params.params();
  auto optim = OptimState::adam(options.lr);
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      Tensor x = gather_rows(images, idx);
      if (options.augment) x = augment_crop_flip(x, 2, rng);
      std::vector<int> y(idx.size());
      for (std::size_t j = 0; j < idx.size(); ++j) y[j] = labels[idx[j]];
      const Tensor z = model.forward_backbone(x);
      zero_grads(params);
      const auto loss = acae_loss_backward(z, y, result.params, model, options.use_ce);
      adam_step(params, optim);
      loss_sum += loss.total * static_cast<double>(y.size());
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));
  }
  for (auto* p : params) p->drop_grad();
  result.final_mse = acae_reconstruction_mse(model, result.params, images);
  return result;
}

}  // namespace acrm
