#include "acrm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "acrm/augment.hpp"
#include "acrm/error.hpp"
#include "acrm/layers.hpp"
#include "acrm/rng.hpp"

namespace acrm {

namespace {

constexpr std::size_t kKernel = 3;
constexpr std::size_t kPad = 1;

Tensor kaiming(Shape shape, std::size_t fan_in, double gain, Rng& rng) {
  Tensor t(std::move(shape));
  const double stddev = std::sqrt(gain / static_cast<double>(fan_in));
  for (auto& v : t.data()) v = static_cast<float>(rng.normal() * stddev);
  return t;
}

}  // namespace

void NetConfig::validate() const {
  if (in_channels == 0 || height == 0 || width == 0) fail(ErrorKind::Config, "net.input dimensions must be positive");
  if (channels.empty()) fail(ErrorKind::Config, "net.channels must list at least one block");
  for (auto c : channels)
    if (c == 0) fail(ErrorKind::Config, "net.channels entries must be positive");
  if (num_classes < 2) fail(ErrorKind::Config, "net.num_classes must be at least 2");
  const std::size_t div = std::size_t{1} << channels.size();
  if (height % div != 0 || width % div != 0)
    fail(ErrorKind::Config, "net.input height and width must be divisible by 2^" + std::to_string(channels.size()));
  if (replay_block < 1 || replay_block > channels.size())
    fail(ErrorKind::Config, "net.replay_block must be in [1, " + std::to_string(channels.size()) + "]");
}

Shape NetConfig::feature_shape(std::size_t blocks) const {
  if (blocks > channels.size()) fail(ErrorKind::Config, "block index beyond network depth");
  if (blocks == 0) return {in_channels, height, width};
  return {channels[blocks - 1], height >> blocks, width >> blocks};
}

SplitModel SplitModel::build(const NetConfig& config, std::uint64_t seed) {
  config.validate();
  SplitModel m;
  m.config_ = config;
  Rng rng(seed);
  std::size_t in = config.in_channels;
  for (std::size_t c : config.channels) {
    ConvBlock b;
    b.conv1_w = kaiming({c, in, kKernel, kKernel}, in * kKernel * kKernel, 2.0, rng);
    b.conv1_b = Tensor({c});
    b.conv2_w = kaiming({c, c, kKernel, kKernel}, c * kKernel * kKernel, 2.0, rng);
    b.conv2_b = Tensor({c});
    m.blocks_.push_back(std::move(b));
    in = c;
  }
  m.fc_w_ = kaiming({config.num_classes, in}, in, 1.0, rng);
  m.fc_b_ = Tensor({config.num_classes});
  return m;
}

Tensor SplitModel::forward_blocks(const Tensor& x, std::size_t first, std::size_t last) const {
  if (first > last || last > blocks_.size()) fail(ErrorKind::Config, "forward_blocks: invalid block range");
  expect_rank(x, 4, "forward_blocks");
  Shape expected = config_.feature_shape(first);
  expected.insert(expected.begin(), x.dim(0));
  expect_shape(x, expected, "forward_blocks input");
  Tensor h = x;
  h.drop_grad();
  for (std::size_t i = first; i < last; ++i) {
    const auto& b = blocks_[i];
    h = avgpool2(relu(conv2d(relu(conv2d(h, b.conv1_w, b.conv1_b, 1, kPad)), b.conv2_w, b.conv2_b, 1, kPad)));
  }
  return h;
}

Tensor SplitModel::forward_backbone(const Tensor& x) const { return forward_blocks(x, 0, split()); }

Tensor SplitModel::forward_head(const Tensor& z) const {
  const Tensor h = forward_blocks(z, split(), blocks_.size());
  return linear(global_avgpool(h), fc_w_, fc_b_);
}

Tensor SplitModel::forward(const Tensor& x) const {
  return linear(global_avgpool(forward_blocks(x, 0, blocks_.size())), fc_w_, fc_b_);
}

Tensor SplitModel::forward_from(const Tensor& x, std::size_t first, ForwardTrace& trace) const {
  if (first > blocks_.size()) fail(ErrorKind::Config, "forward_from: invalid block");
  expect_rank(x, 4, "forward_from");
  Shape expected = config_.feature_shape(first);
  expected.insert(expected.begin(), x.dim(0));
  expect_shape(x, expected, "forward_from input");
  trace = ForwardTrace{};
  trace.first_block = first;
  Tensor h = x;
  h.drop_grad();
  for (std::size_t i = first; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    ForwardTrace::Block t;
    t.input = std::move(h);
    t.pre1 = conv2d(t.input, b.conv1_w, b.conv1_b, 1, kPad);
    t.act1 = relu(t.pre1);
    t.pre2 = conv2d(t.act1, b.conv2_w, b.conv2_b, 1, kPad);
    t.act2 = relu(t.pre2);
    h = avgpool2(t.act2);
    trace.blocks.push_back(std::move(t));
  }
  trace.final_map = std::move(h);
  trace.pooled = global_avgpool(trace.final_map);
  return linear(trace.pooled, fc_w_, fc_b_);
}

Tensor SplitModel::backprop(const ForwardTrace& trace, const Tensor& dlogits, bool input_grad,
                            SplitModel* accumulate) const {
  if (accumulate) linear_backward_params(trace.pooled, dlogits, accumulate->fc_w_, accumulate->fc_b_);
  Tensor g = global_avgpool_backward(trace.final_map.shape(), linear_backward_input(fc_w_, dlogits));
  for (std::size_t k = trace.blocks.size(); k-- > 0;) {
    const std::size_t i = trace.first_block + k;
    const auto& b = blocks_[i];
    const auto& t = trace.blocks[k];
    g = relu_backward(t.pre2, avgpool2_backward(g));
    if (accumulate) {
      auto& ab = accumulate->blocks_[i];
      conv2d_backward_params(t.act1, g, 1, kPad, ab.conv2_w, ab.conv2_b);
    }
    g = relu_backward(t.pre1, conv2d_backward_input(t.act1.shape(), b.conv2_w, g, 1, kPad));
    if (accumulate) {
      auto& ab = accumulate->blocks_[i];
      conv2d_backward_params(t.input, g, 1, kPad, ab.conv1_w, ab.conv1_b);
    }
    if (k == 0 && !input_grad) return Tensor{};
    g = conv2d_backward_input(t.input.shape(), b.conv1_w, g, 1, kPad);
  }
  return input_grad ? g : Tensor{};
}

Tensor SplitModel::backward(const ForwardTrace& trace, const Tensor& dlogits, BackwardOptions options) {
  return backprop(trace, dlogits, options.input_grad, options.accumulate_params ? this : nullptr);
}

Tensor SplitModel::input_gradient(const ForwardTrace& trace, const Tensor& dlogits) const {
  return backprop(trace, dlogits, true, nullptr);
}

std::vector<NamedParam> SplitModel::named_params() {
  std::vector<NamedParam> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto group = i < split() ? ParamGroup::Backbone : ParamGroup::Head;
    const std::string prefix = "block" + std::to_string(i + 1) + ".";
    auto& b = blocks_[i];
    out.push_back({prefix + "conv1.weight", group, &b.conv1_w});
    out.push_back({prefix + "conv1.bias", group, &b.conv1_b});
    out.push_back({prefix + "conv2.weight", group, &b.conv2_w});
    out.push_back({prefix + "conv2.bias", group, &b.conv2_b});
  }
  out.push_back({"classifier.weight", ParamGroup::Head, &fc_w_});
  out.push_back({"classifier.bias", ParamGroup::Head, &fc_b_});
  return out;
}

std::vector<Tensor*> SplitModel::backbone_params() {
  std::vector<Tensor*> out;
  for (auto& p : named_params())
    if (p.group == ParamGroup::Backbone) out.push_back(p.tensor);
  return out;
}

std::vector<Tensor*> SplitModel::head_params() { return params_from(split()); }

std::vector<Tensor*> SplitModel::params_from(std::size_t first) {
  std::vector<Tensor*> out;
  for (std::size_t i = first; i < blocks_.size(); ++i) {
    auto& b = blocks_[i];
    out.insert(out.end(), {&b.conv1_w, &b.conv1_b, &b.conv2_w, &b.conv2_b});
  }
  out.push_back(&fc_w_);
  out.push_back(&fc_b_);
  return out;
}

std::vector<Tensor*> SplitModel::all_params() { return params_from(0); }

std::uint32_t SplitModel::backbone_checksum() const {
  Crc32 crc;
  for (std::size_t i = 0; i < split(); ++i) {
    const auto& b = blocks_[i];
    crc.update(b.conv1_w).update(b.conv1_b).update(b.conv2_w).update(b.conv2_b);
  }
  return crc.value();
}

std::uint32_t SplitModel::head_checksum() const {
  Crc32 crc;
  for (std::size_t i = split(); i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    crc.update(b.conv1_w).update(b.conv1_b).update(b.conv2_w).update(b.conv2_b);
  }
  crc.update(fc_w_).update(fc_b_);
  return crc.value();
}

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> rows) {
  if (t.rank() == 0) fail(ErrorKind::Dimension, "gather_rows on a scalar");
  Shape s = t.shape();
  const std::size_t stride = t.numel() / s[0];
  s[0] = rows.size();
  std::vector<float> d(rows.size() * stride);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= t.dim(0)) fail(ErrorKind::Dimension, "gather_rows: row index out of range");
    std::copy_n(t.raw() + rows[i] * stride, stride, d.data() + i * stride);
  }
  return Tensor(std::move(s), std::move(d));
}

TrainReport train_offline(SplitModel& model, const Tensor& images, std::span<const int> labels,
                          const TrainOptions& options, std::size_t first_trainable) {
  if (labels.empty()) fail(ErrorKind::Input, "train_offline: empty dataset");
  expect_rank(images, 4, "train_offline images");
  if (images.dim(0) != labels.size()) fail(ErrorKind::Dimension, "train_offline: image and label counts differ");
  if (options.batch_size == 0 || options.epochs == 0)
    fail(ErrorKind::Config, "train_offline: epochs and batch size must be positive");
  if (first_trainable > model.config().num_blocks())
    fail(ErrorKind::Config, "train_offline: first trainable block beyond network depth");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= model.config().num_classes)
      fail(ErrorKind::Input, "train_offline: label " + std::to_string(y) + " outside the class universe");

  Rng rng(options.seed);
  auto params = model.params_from(first_trainable);
  auto optim = OptimState::sgd(options.lr, options.momentum, options.weight_decay);
  TrainReport report;
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  ForwardTrace trace;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      Tensor x = gather_rows(images, idx);
      if (options.augment) x = augment_crop_flip(x, 2, rng);
      std::vector<int> y(idx.size());
      for (std::size_t j = 0; j < idx.size(); ++j) y[j] = labels[idx[j]];
      if (first_trainable > 0) x = model.forward_blocks(x, 0, first_trainable);
      const Tensor logits = model.forward_from(x, first_trainable, trace);
      auto ce = softmax_cross_entropy(logits, y);
      for (std::size_t j = 0; j < y.size(); ++j) {
        const float* row = logits.raw() + j * logits.dim(1);
        const auto pred = static_cast<int>(std::max_element(row, row + logits.dim(1)) - row);
        correct += pred == y[j];
      }
      loss_sum += ce.loss * static_cast<double>(y.size());
      zero_grads(params);
      model.backward(trace, ce.grad, {.accumulate_params = true, .input_grad = false});
      sgd_step(params, optim);
      ++report.steps;
    }
    report.epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));
    report.epoch_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(order.size()));
  }
  for (auto* p : params) p->drop_grad();
  return report;
}

double evaluate_accuracy(const SplitModel& model, const Tensor& images, std::span<const int> labels,
                         std::size_t batch_size) {
  if (labels.empty()) fail(ErrorKind::Input, "evaluate_accuracy: empty dataset");
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < labels.size(); start += batch_size) {
    const std::size_t end = std::min(labels.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor logits = model.forward(gather_rows(images, idx));
    const std::size_t c = logits.dim(1);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const float* row = logits.raw() + j * c;
      const auto pred = static_cast<int>(std::max_element(row, row + c) - row);
      correct += pred == labels[start + j];
    }
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace acrm
