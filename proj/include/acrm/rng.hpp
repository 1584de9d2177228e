#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace acrm {

/// Seeded 64-bit Mersenne twister with portable draw helpers.
///
/// Draws go through explicit arithmetic instead of <random> distributions so
/// that sequences are identical across standard library implementations and
/// the full state can be serialized.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Uniform float in [0, 1) with 53 bits of randomness.
  double uniform();

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (no cached second value).
  double normal();

  bool coin() { return (next() >> 63) != 0; }

  std::string serialize() const;
  void deserialize(const std::string& state);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Derives an independent stream seed from a base seed and a tag.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);

}  // namespace acrm
