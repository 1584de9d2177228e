#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "acrm/tensor.hpp"

namespace acrm {

/// s independent codebooks of k centroids over contiguous d'-dimensional
/// slices of a C' = s * d' channel vector. The same table encodes and decodes.
struct Codebooks {
  std::size_t subquantizers = 0;  // s
  std::size_t k = 0;              // centroids per subquantizer, <= 256
  std::size_t sub_dim = 0;        // d'
  std::vector<float> centroids;   // s x k x d'

  std::size_t latent_channels() const { return subquantizers * sub_dim; }
  std::span<const float> table(std::size_t sub) const {
    return std::span<const float>(centroids).subspan(sub * k * sub_dim, k * sub_dim);
  }
  void validate() const;
  std::uint32_t checksum() const;
  bool operator==(const Codebooks&) const = default;
};

struct KMeansResult {
  std::vector<float> centroids;          // k x dim
  std::vector<std::uint32_t> assignment;
  std::vector<double> objective;         // sum of squared distances after each assignment step
  std::size_t iterations = 0;
};

/// k-means++ seeding followed by at most `max_iters` Lloyd iterations; stops
/// early when assignments no longer change. An empty cluster is re-seeded at
/// the point farthest from its current centroid.
KMeansResult kmeans(std::span<const float> points, std::size_t n, std::size_t dim, std::size_t k,
                    std::size_t max_iters, std::uint64_t seed);

struct PqOptions {
  std::size_t subquantizers = 8;
  std::size_t k = 256;
  std::size_t iters = 25;
  std::uint64_t seed = 0;
};

struct PqTrainReport {
  std::vector<std::vector<double>> objective;  // per subquantizer, per Lloyd iteration
};

/// Trains one codebook per subspace on the channel vectors at every spatial
/// position of an N x C' x H x W latent set. Subspace j uses seed + j.
Codebooks train_pq(const Tensor& latents, const PqOptions& options, PqTrainReport* report = nullptr);

/// Encodes one latent map (C' x H x W, or 1 x C' x H x W) into s x H x W codes.
std::vector<std::uint8_t> pq_encode(const Tensor& latent, const Codebooks& books);
/// Encodes an N x C' x H x W batch; returns N code grids.
std::vector<std::vector<std::uint8_t>> pq_encode_batch(const Tensor& latents, const Codebooks& books);

/// Decodes s x H x W codes into a 1 x C' x H x W latent.
Tensor pq_decode(std::span<const std::uint8_t> codes, std::size_t h, std::size_t w, const Codebooks& books);

/// Mean squared error of decode(encode(u)) over all elements of the set.
double reconstruction_mse(const Tensor& latents, const Codebooks& books);

/// Position-major copy: row p holds the C' channel values at spatial position p.
std::vector<float> latents_to_rows(const Tensor& latents);

}  // namespace acrm
