#include "acrm/study.hpp"

#include "acrm/error.hpp"

namespace acrm {

StudyResult frozen_backbone_study(const RunConfig& config, const PreparedData& data,
                                  std::span<const std::size_t> frozen_blocks) {
  if (data.stream.tasks.empty()) fail(ErrorKind::Input, "task stream is empty");
  TrainOptions train;
  train.epochs = config.train_epochs;
  train.batch_size = config.train_batch;
  train.lr = config.train_lr;
  train.momentum = config.train_momentum;
  train.weight_decay = config.train_weight_decay;
  train.augment = config.train_augment;
  train.seed = derive_seed(config.seed, static_cast<std::uint64_t>(SeedTag::Offline));

  const Dataset task1 = data.train.subset(data.stream.tasks.front().samples);
  SplitModel base = SplitModel::build(data.net, derive_seed(config.seed, static_cast<std::uint64_t>(SeedTag::Model)));
  train_offline(base, task1.images, task1.labels, train);

  StudyResult result;
  const Dataset task1_test = data.test.subset(data.test.indices_of(data.stream.tasks.front().classes));
  result.task1_accuracy = evaluate_accuracy(base, task1_test.images, task1_test.labels);

  for (auto n : frozen_blocks) {
    if (n > data.net.num_blocks())
      fail(ErrorKind::Config, "cannot freeze " + std::to_string(n) + " of " + std::to_string(data.net.num_blocks()) +
                                  " blocks");
    SplitModel model = base;
    TrainOptions joint = train;
    joint.seed = derive_seed(train.seed, 100 + n);
    train_offline(model, data.train.images, data.train.labels, joint, n);
    result.points.push_back({n, evaluate_accuracy(model, data.test.images, data.test.labels)});
  }
  return result;
}

}  // namespace acrm
