#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "acrm/acae.hpp"
#include "acrm/config.hpp"
#include "acrm/dataset.hpp"
#include "acrm/metrics.hpp"
#include "acrm/model.hpp"
#include "acrm/optim.hpp"
#include "acrm/pq.hpp"
#include "acrm/reservoir.hpp"
#include "acrm/rng.hpp"

namespace acrm {

/// Datasets, class order and task stream derived deterministically from a config.
struct PreparedData {
  Dataset train;
  Dataset test;
  TaskStream stream;
  NetConfig net;
};

PreparedData prepare_data(const RunConfig& config);

/// Byte checksums of everything that must stay fixed after initialization.
struct FrozenChecksums {
  std::uint32_t backbone = 0;
  std::uint32_t encoder = 0;
  std::uint32_t decoder = 0;
  std::uint32_t codebooks = 0;
  bool operator==(const FrozenChecksums&) const = default;
};

struct InitReport {
  TrainReport offline;
  double acae_initial_mse = 0.0;
  double acae_final_mse = 0.0;
  std::vector<std::vector<double>> pq_objective;
  double pq_mse = 0.0;
  double task1_direct_accuracy = 0.0;      // h(g(x)) on task-1 test data
  double task1_compressed_accuracy = 0.0;  // through the ACAE and PQ round trip
};

/// Seed tags for the independent random streams of a run.
enum class SeedTag : std::uint64_t { Model = 1, Offline = 2, Acae = 3, Pq = 4, Engine = 5, Stream = 6 };

class Engine {
 public:
  using EvalHook = std::function<void(const MetricRecord&)>;

  /// Offline training on task 1, ACAE training, PQ training on un-augmented
  /// task-1 latents, then every task-1 sample is encoded into the reservoir and
  /// the post-initialization evaluation is recorded.
  static Engine initialize(const RunConfig& config, const PreparedData& data, InitReport* report = nullptr);

  /// P_enc(D_enc(g(x))) for one 1 x C x H x W image.
  QuantizedExemplar encode_sample(const Tensor& x, int label, std::uint16_t task) const;
  /// D_dec(P_dec(codes)) as a 1 x C x h x w feature map.
  Tensor decode_exemplar(const QuantizedExemplar& exemplar) const;

  /// One online update: quantize the sample, draw replay exemplars, train the
  /// head on the N+1 reconstructed features with one SGD step, then insert the
  /// sample into the reservoir. Head gradients stay readable afterwards.
  void online_step(const Tensor& x, int label, std::uint16_t task);

  /// Streams tasks next_task()..T in order, one online step per sample, and
  /// evaluates after each task. Stops after `stop_after_task` when nonzero.
  void run_stream(const PreparedData& data, const EvalHook& hook = {}, std::uint32_t stop_after_task = 0);

  /// Task-agnostic evaluation over the test samples of the given classes.
  MetricRecord evaluate(const Dataset& test, std::span<const int> seen_classes, std::uint32_t task) const;
  /// Logits of a batch through the configured evaluation path.
  Tensor eval_logits(const Tensor& images) const;
  /// h(D_dec(P_dec(P_enc(D_enc(g(x)))))).
  Tensor compressed_logits(const Tensor& images) const;

  FrozenChecksums frozen_checksums() const;
  const FrozenChecksums& baseline() const { return baseline_; }

  const RunConfig& config() const { return config_; }
  const SplitModel& model() const { return model_; }
  SplitModel& model() { return model_; }
  const AcaeParams& acae() const { return acae_; }
  const Codebooks& codebooks() const { return books_; }
  const Reservoir& reservoir() const { return reservoir_; }
  const OptimState& optimizer() const { return optim_; }
  const MetricsLog& log() const { return log_; }
  const Rng& rng() const { return rng_; }
  std::uint32_t next_task() const { return next_task_; }
  std::uint64_t steps() const { return optim_.step; }
  /// Replay exemplars mixed into the most recent online step.
  std::size_t last_replay_count() const { return last_replay_count_; }

  /// Classes of tasks 1..task.
  static std::vector<int> seen_classes(const TaskStream& stream, std::uint32_t task);

 private:
  friend struct CheckpointAccess;

  RunConfig config_;
  SplitModel model_;
  AcaeParams acae_;
  Codebooks books_;
  Reservoir reservoir_;
  OptimState optim_;
  Rng rng_;
  std::uint32_t next_task_ = 2;
  MetricsLog log_;
  FrozenChecksums baseline_;
  std::size_t last_replay_count_ = 0;
};

}  // namespace acrm
