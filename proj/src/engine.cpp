#include "acrm/engine.hpp"

#include <algorithm>
#include <sstream>

#include "acrm/augment.hpp"
#include "acrm/error.hpp"
#include "acrm/layers.hpp"

namespace acrm {

namespace {

std::uint64_t tagged(std::uint64_t seed, SeedTag tag) { return derive_seed(seed, static_cast<std::uint64_t>(tag)); }

std::vector<std::filesystem::path> split_paths(const std::string& list) {
  std::vector<std::filesystem::path> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.emplace_back(item);
  return out;
}

// Applies `fn` to consecutive row batches and stacks the results.
template <class Fn>
Tensor map_batches(const Tensor& x, std::size_t batch, Fn fn) {
  const std::size_t n = x.dim(0);
  if (n <= batch) return fn(x);
  std::vector<float> data;
  Shape out_shape;
  for (std::size_t start = 0; start < n; start += batch) {
    std::vector<std::size_t> rows(std::min(batch, n - start));
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = start + i;
    const Tensor y = fn(gather_rows(x, rows));
    out_shape = y.shape();
    data.insert(data.end(), y.data().begin(), y.data().end());
  }
  out_shape[0] = n;
  return Tensor(std::move(out_shape), std::move(data));
}

constexpr std::size_t kEvalBatch = 128;

}  // namespace

PreparedData prepare_data(const RunConfig& config) {
  PreparedData d;
  std::size_t num_classes = 0;
  if (config.dataset_kind == "synthetic") {
    SyntheticSpec spec;
    spec.classes = config.synthetic_classes;
    spec.channels = config.synthetic_channels;
    spec.height = config.synthetic_height;
    spec.width = config.synthetic_width;
    spec.noise = config.synthetic_noise;
    spec.jitter = config.synthetic_jitter;
    spec.seed = config.seed;
    spec.per_class = config.synthetic_train_per_class;
    d.train = gen_synthetic(spec, 0);
    spec.per_class = config.synthetic_test_per_class;
    d.test = gen_synthetic(spec, 1);
    num_classes = spec.classes;
  } else if (config.dataset_kind == "idx") {
    d.train = load_idx(config.train_images, config.train_labels);
    d.test = load_idx(config.test_images, config.test_labels);
  } else if (config.dataset_kind == "cifar") {
    d.train = load_cifar_bin(split_paths(config.train_images));
    d.test = load_cifar_bin(split_paths(config.test_images));
  } else {
    fail(ErrorKind::Config, "dataset.kind: unknown kind '" + config.dataset_kind + "'");
  }
  if (num_classes == 0) num_classes = static_cast<std::size_t>(std::max(d.train.max_label(), d.test.max_label()) + 1);
  if (d.train.image_shape() != d.test.image_shape())
    fail(ErrorKind::Input, "train and test images differ in shape: " + shape_str(d.train.image_shape()) + " vs " +
                               shape_str(d.test.image_shape()));
  const Shape img = d.train.image_shape();
  d.net.in_channels = img[0];
  d.net.height = img[1];
  d.net.width = img[2];
  d.net.channels = config.net_channels;
  d.net.num_classes = num_classes;
  d.net.replay_block = config.replay_block;
  d.net.validate();
  const auto order = class_order(num_classes, config.order_seed);
  d.stream = make_task_stream(d.train, order, config.first_task_classes, config.steps, tagged(config.seed, SeedTag::Stream));
  if (config.standardize) {
    const ChannelStats stats = channel_stats(d.train, d.stream.tasks.front().samples);
    standardize(d.train, stats);
    standardize(d.test, stats);
  }
  return d;
}

std::vector<int> Engine::seen_classes(const TaskStream& stream, std::uint32_t task) {
  std::vector<int> out;
  for (std::uint32_t t = 0; t < task && t < stream.tasks.size(); ++t)
    out.insert(out.end(), stream.tasks[t].classes.begin(), stream.tasks[t].classes.end());
  return out;
}

Engine Engine::initialize(const RunConfig& config, const PreparedData& data, InitReport* report) {
  validate_config(config);
  if (data.stream.tasks.empty()) fail(ErrorKind::Input, "task stream is empty");
  const Task& first = data.stream.tasks.front();
  const Dataset task1 = data.train.subset(first.samples);

  Engine e;
  e.config_ = config;

  // step 1: offline training on task 1
  e.model_ = SplitModel::build(data.net, tagged(config.seed, SeedTag::Model));
  TrainOptions train;
  train.epochs = config.train_epochs;
  train.batch_size = config.train_batch;
  train.lr = config.train_lr;
  train.momentum = config.train_momentum;
  train.weight_decay = config.train_weight_decay;
  train.augment = config.train_augment;
  train.seed = tagged(config.seed, SeedTag::Offline);
  TrainReport offline = train_offline(e.model_, task1.images, task1.labels, train);

  // step 2: auto-encoder against the frozen network
  e.model_.set_backbone_frozen(true);
  e.model_.set_head_frozen(true);
  AcaeTrainOptions ae;
  ae.latent_channels = config.acae_latent_channels;
  ae.epochs = config.acae_epochs;
  ae.batch_size = config.acae_batch;
  ae.lr = config.acae_lr;
  ae.use_ce = config.acae_use_ce;
  ae.augment = config.acae_augment;
  ae.seed = tagged(config.seed, SeedTag::Acae);
  AcaeTrainResult acae = train_acae(e.model_, task1.images, task1.labels, ae);
  e.acae_ = std::move(acae.params);

  // step 3: product quantizer on un-augmented task-1 latents
  const Tensor latents = map_batches(task1.images, kEvalBatch, [&](const Tensor& x) {
    return acae_encode(e.model_.forward_backbone(x), e.acae_);
  });
  PqOptions pq;
  pq.subquantizers = config.pq_s;
  pq.k = config.pq_k;
  pq.iters = config.pq_iters;
  pq.seed = tagged(config.seed, SeedTag::Pq);
  PqTrainReport pq_report;
  e.books_ = train_pq(latents, pq, &pq_report);

  // buffer task 1
  const Shape lat = latents.shape();
  e.reservoir_ = Reservoir(config.reservoir_capacity,
                           CodeShape{static_cast<std::uint32_t>(config.pq_s), static_cast<std::uint32_t>(lat[2]),
                                     static_cast<std::uint32_t>(lat[3]), static_cast<std::uint32_t>(config.pq_k)});
  e.rng_ = Rng(tagged(config.seed, SeedTag::Engine));
  const auto codes = pq_encode_batch(latents, e.books_);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    QuantizedExemplar ex;
    ex.codes = codes[i];
    ex.label = static_cast<std::uint16_t>(task1.labels[i]);
    ex.task_id = static_cast<std::uint16_t>(first.id);
    e.reservoir_.insert(std::move(ex), e.rng_);
  }

  e.model_.set_head_frozen(false);
  e.optim_ = OptimState::sgd(config.online_lr, config.online_momentum, config.online_weight_decay);
  e.next_task_ = 2;
  e.baseline_ = e.frozen_checksums();

  const auto seen = seen_classes(data.stream, 1);
  MetricRecord rec = e.evaluate(data.test, seen, 1);
  e.log_.records.push_back(rec);

  if (report) {
    report->offline = std::move(offline);
    report->acae_initial_mse = acae.initial_mse;
    report->acae_final_mse = acae.final_mse;
    report->pq_objective = std::move(pq_report.objective);
    report->pq_mse = reconstruction_mse(latents, e.books_);
    const Dataset held = data.test.subset(data.test.indices_of(seen));
    if (held.size() > 0) {
      const Tensor direct = map_batches(held.images, kEvalBatch, [&](const Tensor& x) { return e.model_.forward(x); });
      report->task1_direct_accuracy = top_k_accuracy(direct, held.labels, 1);
      const Tensor comp =
          map_batches(held.images, kEvalBatch, [&](const Tensor& x) { return e.compressed_logits(x); });
      report->task1_compressed_accuracy = top_k_accuracy(comp, held.labels, 1);
    }
  }
  return e;
}

QuantizedExemplar Engine::encode_sample(const Tensor& x, int label, std::uint16_t task) const {
  expect_rank(x, 4, "encode_sample");
  if (x.dim(0) != 1) fail(ErrorKind::Dimension, "encode_sample expects a single image, got " + shape_str(x.shape()));
  QuantizedExemplar ex;
  ex.codes = pq_encode(acae_encode(model_.forward_backbone(x), acae_), books_);
  ex.label = static_cast<std::uint16_t>(label);
  ex.task_id = task;
  return ex;
}

Tensor Engine::decode_exemplar(const QuantizedExemplar& exemplar) const {
  const CodeShape& shape = reservoir_.shape();
  if (exemplar.codes.size() != shape.bytes())
    fail(ErrorKind::Dimension, "exemplar has " + std::to_string(exemplar.codes.size()) + " codes, expected " +
                                   std::to_string(shape.bytes()));
  return acae_decode(pq_decode(exemplar.codes, shape.h, shape.w, books_), acae_);
}

void Engine::online_step(const Tensor& x, int label, std::uint16_t task) {
  if (label < 0 || static_cast<std::size_t>(label) >= model_.config().num_classes)
    fail(ErrorKind::Input, "label " + std::to_string(label) + " is outside the " +
                               std::to_string(model_.config().num_classes) + "-class universe");
  QuantizedExemplar current = encode_sample(x, label, task);
  const auto picks = config_.replay_with_replacement ? reservoir_.sample_indices_with_replacement(config_.replay_n, rng_)
                                                     : reservoir_.sample_indices(config_.replay_n, rng_);
  std::vector<Tensor> features;
  std::vector<int> labels;
  features.reserve(picks.size() + 1);
  features.push_back(decode_exemplar(current).reshaped(model_.config().feature_shape(model_.split())));
  labels.push_back(label);
  for (auto i : picks) {
    const auto& ex = reservoir_.entries()[i];
    features.push_back(decode_exemplar(ex).reshaped(model_.config().feature_shape(model_.split())));
    labels.push_back(ex.label);
  }
  Tensor batch = Tensor::stack(features);
  if (config_.online_augment)
    batch = feature_random_resized_crop(batch, config_.online_crop_min, config_.online_crop_max, rng_);

  auto head = model_.head_params();
  zero_grads(head);
  ForwardTrace trace;
  const Tensor logits = model_.forward_from(batch, model_.split(), trace);
  const LossGrad ce = softmax_cross_entropy(logits, labels);
  model_.backward(trace, ce.grad, {});
  optimizer_step(head, optim_);
  last_replay_count_ = picks.size();

  reservoir_.insert(std::move(current), rng_);
}

void Engine::run_stream(const PreparedData& data, const EvalHook& hook, std::uint32_t stop_after_task) {
  const auto& tasks = data.stream.tasks;
  for (std::size_t t = 0; t < tasks.size(); ++t)
    if (tasks[t].id != t + 1) fail(ErrorKind::Input, "task ids are out of order at position " + std::to_string(t + 1));
  while (next_task_ <= tasks.size()) {
    const Task& task = tasks[next_task_ - 1];
    const auto seen = seen_classes(data.stream, task.id);
    for (auto i : task.samples) {
      online_step(data.train.image(i), data.train.labels[i], static_cast<std::uint16_t>(task.id));
      if (config_.eval_every && optim_.step % config_.eval_every == 0 && i != task.samples.back()) {
        log_.records.push_back(evaluate(data.test, seen, task.id));
        if (hook) hook(log_.records.back());
      }
    }
    log_.records.push_back(evaluate(data.test, seen, task.id));
    if (hook) hook(log_.records.back());
    ++next_task_;
    if (stop_after_task && task.id >= stop_after_task) break;
  }
}

Tensor Engine::eval_logits(const Tensor& images) const {
  return config_.eval_path == "direct" ? model_.forward(images) : compressed_logits(images);
}

Tensor Engine::compressed_logits(const Tensor& images) const {
  const Tensor z = model_.forward_backbone(images);
  const auto codes = pq_encode_batch(acae_encode(z, acae_), books_);
  std::vector<Tensor> latents;
  latents.reserve(codes.size());
  for (const auto& c : codes) latents.push_back(pq_decode(c, z.dim(2), z.dim(3), books_).reshaped(
                                  {books_.latent_channels(), z.dim(2), z.dim(3)}));
  return model_.forward_head(acae_decode(Tensor::stack(latents), acae_));
}

MetricRecord Engine::evaluate(const Dataset& test, std::span<const int> seen_classes, std::uint32_t task) const {
  MetricRecord rec;
  rec.step = optim_.step;
  rec.task = task;
  rec.seen_classes = static_cast<std::uint32_t>(seen_classes.size());
  const Dataset held = test.subset(test.indices_of(seen_classes));
  if (held.size() == 0) fail(ErrorKind::Input, "no test samples for the classes seen by task " + std::to_string(task));
  const Tensor logits = map_batches(held.images, kEvalBatch, [&](const Tensor& x) { return eval_logits(x); });
  rec.top1 = top_k_accuracy(logits, held.labels, 1);
  if (config_.eval_top5 && logits.dim(1) >= 5) rec.top5 = top_k_accuracy(logits, held.labels, 5);
  return rec;
}

FrozenChecksums Engine::frozen_checksums() const {
  return {model_.backbone_checksum(), acae_.encoder_checksum(), acae_.decoder_checksum(), books_.checksum()};
}

}  // namespace acrm
