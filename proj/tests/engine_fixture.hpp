#pragma once

#include "acrm/engine.hpp"

namespace testutil {

// Small end-to-end configuration that initializes in about a second.
inline acrm::RunConfig small_config(std::uint64_t seed = 1) {
  acrm::RunConfig c;
  c.seed = seed;
  c.synthetic_train_per_class = 40;
  c.synthetic_test_per_class = 10;
  c.net_channels = {8, 16, 16};
  c.acae_latent_channels = 4;
  c.pq_s = 2;
  c.pq_k = 16;
  c.pq_iters = 10;
  c.train_epochs = 5;
  c.train_batch = 8;
  c.train_lr = 0.01;
  c.train_augment = false;
  c.acae_epochs = 2;
  c.reservoir_capacity = 30;
  c.replay_n = 4;
  return c;
}

}  // namespace testutil
