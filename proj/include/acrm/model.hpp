#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "acrm/optim.hpp"
#include "acrm/tensor.hpp"

namespace acrm {

class Rng;

/// Block-structured CNN. Each block is conv3x3 -> relu -> conv3x3 -> relu ->
/// avgpool2; the head ends with a global average pool and a linear classifier.
struct NetConfig {
  std::size_t in_channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;
  std::vector<std::size_t> channels{16, 32, 64};
  std::size_t num_classes = 10;
  std::size_t replay_block = 2;  // backbone = blocks 1..replay_block

  std::size_t num_blocks() const { return channels.size(); }
  /// Throws a Config error describing the first violated constraint.
  void validate() const;
  /// C x H x W shape of the activations after `blocks` blocks (0 = input).
  Shape feature_shape(std::size_t blocks) const;
};

struct ConvBlock {
  Tensor conv1_w, conv1_b, conv2_w, conv2_b;
};

/// Activations saved by a forward pass for the matching backward pass.
struct ForwardTrace {
  struct Block {
    Tensor input, pre1, act1, pre2, act2;
  };
  std::size_t first_block = 0;
  std::vector<Block> blocks;
  Tensor final_map;  // input of the global pool
  Tensor pooled;     // input of the classifier
};

enum class ParamGroup { Backbone, Head };

struct NamedParam {
  std::string name;
  ParamGroup group;
  Tensor* tensor;
};

/// The network split at the replay block into backbone g(.; theta1) and head
/// h(.; theta2).
class SplitModel {
 public:
  SplitModel() = default;
  /// Kaiming-style fan-in initialization, deterministic in `seed`.
  static SplitModel build(const NetConfig& config, std::uint64_t seed);

  const NetConfig& config() const { return config_; }
  std::size_t split() const { return config_.replay_block; }

  /// z = g(x): blocks 1..n. Accepts N x C x H x W.
  Tensor forward_backbone(const Tensor& x) const;
  /// logits = h(z): blocks n+1..B, global pool, classifier.
  Tensor forward_head(const Tensor& z) const;
  /// Unsplit forward pass through every block.
  Tensor forward(const Tensor& x) const;

  /// Runs blocks [first, last) without recording activations.
  Tensor forward_blocks(const Tensor& x, std::size_t first, std::size_t last) const;
  /// Runs blocks [first, B) plus the classifier, recording a trace.
  Tensor forward_from(const Tensor& x, std::size_t first, ForwardTrace& trace) const;

  struct BackwardOptions {
    bool accumulate_params = true;
    bool input_grad = false;
  };
  /// Backpropagates `dlogits` through the traced layers. Parameter gradients
  /// are accumulated into the grad buffers of blocks >= trace.first_block and
  /// the classifier; returns the gradient w.r.t. the trace input if requested.
  Tensor backward(const ForwardTrace& trace, const Tensor& dlogits, BackwardOptions options);
  /// Gradient w.r.t. the trace input only; parameters are untouched.
  Tensor input_gradient(const ForwardTrace& trace, const Tensor& dlogits) const;

  std::vector<NamedParam> named_params();
  std::vector<Tensor*> backbone_params();
  std::vector<Tensor*> head_params();
  /// Parameters of blocks >= first (0-based) and the classifier.
  std::vector<Tensor*> params_from(std::size_t first);
  std::vector<Tensor*> all_params();

  std::uint32_t backbone_checksum() const;
  std::uint32_t head_checksum() const;

  bool backbone_frozen() const { return backbone_frozen_; }
  bool head_frozen() const { return head_frozen_; }
  void set_backbone_frozen(bool frozen) { backbone_frozen_ = frozen; }
  void set_head_frozen(bool frozen) { head_frozen_ = frozen; }

  std::vector<ConvBlock>& blocks() { return blocks_; }
  const std::vector<ConvBlock>& blocks() const { return blocks_; }
  Tensor& classifier_w() { return fc_w_; }
  Tensor& classifier_b() { return fc_b_; }
  const Tensor& classifier_w() const { return fc_w_; }
  const Tensor& classifier_b() const { return fc_b_; }

 private:
  Tensor backprop(const ForwardTrace& trace, const Tensor& dlogits, bool input_grad, SplitModel* accumulate) const;

  NetConfig config_;
  std::vector<ConvBlock> blocks_;
  Tensor fc_w_, fc_b_;
  bool backbone_frozen_ = false;
  bool head_frozen_ = false;
};

struct TrainOptions {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  bool augment = true;
  std::uint64_t seed = 0;
};

struct TrainReport {
  std::vector<double> epoch_loss;      // mean training loss of each epoch
  std::vector<double> epoch_accuracy;  // running training accuracy of each epoch
  std::uint64_t steps = 0;
};

/// Multi-epoch minibatch SGD over shuffled data, updating the parameters of
/// blocks >= first_trainable (0-based) and the classifier. The input to those
/// blocks is computed by the frozen earlier blocks.
TrainReport train_offline(SplitModel& model, const Tensor& images, std::span<const int> labels,
                          const TrainOptions& options, std::size_t first_trainable = 0);

/// Top-1 accuracy of the unsplit network, evaluated in batches.
double evaluate_accuracy(const SplitModel& model, const Tensor& images, std::span<const int> labels,
                         std::size_t batch_size = 128);

/// Gathers rows of an N x ... tensor.
Tensor gather_rows(const Tensor& t, std::span<const std::size_t> rows);

}  // namespace acrm
