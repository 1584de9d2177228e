#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace acrm {

/// Everything a run needs. Text form: one `key = value` per line, `#` starts
/// a comment. See `config_keys()` for the documented key list and defaults.
struct RunConfig {
  std::uint64_t seed = 1;

  // dataset.kind: synthetic | idx | cifar
  std::string dataset_kind = "synthetic";
  std::string train_images;  // idx images file, or comma-separated cifar batch files
  std::string train_labels;  // idx only
  std::string test_images;
  std::string test_labels;
  std::uint64_t order_seed = 0;  // class-order permutation seed
  bool standardize = true;       // per-channel standardization with task-1 statistics

  std::size_t synthetic_classes = 10;
  std::size_t synthetic_train_per_class = 100;
  std::size_t synthetic_test_per_class = 50;
  std::size_t synthetic_channels = 3;
  std::size_t synthetic_height = 16;
  std::size_t synthetic_width = 16;
  double synthetic_noise = 0.1;
  double synthetic_jitter = 1.0;

  std::size_t first_task_classes = 2;
  std::size_t steps = 4;

  std::vector<std::size_t> net_channels{8, 16, 32};
  std::size_t replay_block = 2;

  std::size_t train_epochs = 10;
  std::size_t train_batch = 32;
  double train_lr = 0.01;
  double train_momentum = 0.9;
  double train_weight_decay = 5e-4;
  bool train_augment = true;

  std::size_t acae_latent_channels = 8;
  std::size_t acae_epochs = 10;
  std::size_t acae_batch = 32;
  double acae_lr = 3e-3;
  bool acae_use_ce = true;
  bool acae_augment = true;

  std::size_t pq_s = 4;
  std::size_t pq_k = 256;
  std::size_t pq_iters = 25;

  std::size_t reservoir_capacity = 200;
  std::size_t replay_n = 10;
  bool replay_with_replacement = false;

  double online_lr = 0.01;
  double online_momentum = 0.9;
  double online_weight_decay = 0.0;
  bool online_augment = true;
  double online_crop_min = 0.64;
  double online_crop_max = 1.0;

  // eval.path: compressed (h of the decoded replay features) | direct (h(g(x)))
  std::string eval_path = "compressed";
  std::size_t eval_every = 0;  // extra evaluation every E online steps; 0 = task boundaries only
  bool eval_top5 = true;

  std::string output_dir = "out";

  bool operator==(const RunConfig&) const = default;
};

struct ConfigKey {
  std::string key;
  std::string default_value;
  std::string doc;
};

/// Every recognised key with its default and a one-line description.
std::vector<ConfigKey> config_keys();

/// Parses key=value text onto the defaults and validates the result. Errors
/// are Config errors naming the key and line.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Canonical text form (every key, in documented order); parse_config of the
/// output reproduces the config exactly.
std::string serialize_config(const RunConfig& config);

/// Cross-field checks. `lines` maps keys to the line they were set on, for
/// error messages.
void validate_config(const RunConfig& config, const std::map<std::string, std::size_t>& lines = {});

}  // namespace acrm
