#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "acrm/tensor.hpp"

namespace acrm {

class SplitModel;

/// Auxiliary-classifier auto-encoder at the replay block: a channel-reducing
/// 1x1 conv + relu encoder and a 1x1 conv decoder. Spatial extent is kept.
struct AcaeParams {
  Tensor enc_w, enc_b;  // C' x C x 1 x 1, C'
  Tensor dec_w, dec_b;  // C x C' x 1 x 1, C

  std::size_t channels() const { return enc_w.dim(1); }
  std::size_t latent_channels() const { return enc_w.dim(0); }

  /// Fan-in scaled random initialization.
  static AcaeParams build(std::size_t channels, std::size_t latent_channels, std::uint64_t seed);
  /// Identity encoder/decoder with C' = C (exact on non-negative inputs).
  static AcaeParams identity(std::size_t channels);

  std::vector<Tensor*> encoder_params() { return {&enc_w, &enc_b}; }
  std::vector<Tensor*> decoder_params() { return {&dec_w, &dec_b}; }
  std::vector<Tensor*> params() { return {&enc_w, &enc_b, &dec_w, &dec_b}; }
  std::uint32_t encoder_checksum() const;
  std::uint32_t decoder_checksum() const;
};

/// u = relu(conv1x1(z)); z is N x C x H x W.
Tensor acae_encode(const Tensor& z, const AcaeParams& params);
/// z_hat = conv1x1(u).
Tensor acae_decode(const Tensor& u, const AcaeParams& params);

struct AcaeLoss {
  double total = 0.0;
  double ce = 0.0;
  double mse = 0.0;
};

/// CE(label, h(z_hat)) + MSE(z, z_hat) when `use_ce`, the MSE term alone
/// otherwise (labels are then ignored). The head of `model` must be frozen.
AcaeLoss acae_loss(const Tensor& z, std::span<const int> labels, const AcaeParams& params, const SplitModel& model,
                   bool use_ce);
/// Same value as acae_loss; also accumulates d loss / d (enc, dec) into the
/// grad buffers of `params`. The head receives no gradient.
AcaeLoss acae_loss_backward(const Tensor& z, std::span<const int> labels, AcaeParams& params,
                            const SplitModel& model, bool use_ce);

struct AcaeTrainOptions {
  std::size_t latent_channels = 8;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  bool use_ce = true;
  bool augment = true;
  std::uint64_t seed = 0;
};

struct AcaeTrainResult {
  AcaeParams params;
  double initial_mse = 0.0;  // reconstruction MSE on the un-augmented data before training
  double final_mse = 0.0;    // and after
  std::vector<double> epoch_loss;
};

/// Trains encoder and decoder with Adam against a frozen model; only the ACAE
/// parameters change. The backbone and head of `model` must both be frozen.
AcaeTrainResult train_acae(const SplitModel& model, const Tensor& images, std::span<const int> labels,
                           const AcaeTrainOptions& options);

/// Mean reconstruction MSE of the ACAE over backbone features of `images`.
double acae_reconstruction_mse(const SplitModel& model, const AcaeParams& params, const Tensor& images);

}  // namespace acrm
