#include "acrm/pq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "acrm/error.hpp"
#include "acrm/kernels.hpp"
#include "acrm/rng.hpp"

namespace acrm {

namespace {

double sq_dist(const float* a, const float* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double diff = static_cast<double>(a[d]) - static_cast<double>(b[d]);
    s += diff * diff;
  }
  return s;
}

// k-means++: first center uniform, later ones with probability ~ D^2.
std::vector<float> seed_centers(std::span<const float> points, std::size_t n, std::size_t dim, std::size_t k,
                                Rng& rng) {
  std::vector<float> centers(k * dim);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.uniform_index(n);
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (double v : d2) total += v;
      if (total <= 0.0) {
        pick = rng.uniform_index(n);
      } else {
        double target = rng.uniform() * total;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          target -= d2[i];
          if (target < 0.0) {
            pick = i;
            break;
          }
        }
      }
    }
    std::copy_n(points.data() + pick * dim, dim, centers.data() + c * dim);
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], sq_dist(points.data() + i * dim, centers.data() + c * dim, dim));
  }
  return centers;
}

void check_latent(const Tensor& t, const Codebooks& books, const char* what) {
  books.validate();
  if (t.rank() != 4 || t.dim(1) != books.latent_channels())
    fail(ErrorKind::Dimension, std::string(what) + ": expected N x " + std::to_string(books.latent_channels()) +
                                   " x H x W, got " + shape_str(t.shape()));
}

}  // namespace

void Codebooks::validate() const {
  if (subquantizers == 0 || sub_dim == 0) fail(ErrorKind::Config, "codebooks need s >= 1 and d' >= 1");
  if (k == 0 || k > 256) fail(ErrorKind::Config, "codebook size k must be in [1, 256]");
  if (centroids.size() != subquantizers * k * sub_dim)
    fail(ErrorKind::Format, "centroid table size does not match s x k x d'");
}

std::uint32_t Codebooks::checksum() const {
  Crc32 crc;
  const std::uint64_t header[3] = {subquantizers, k, sub_dim};
  crc.update(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(header), sizeof header));
  crc.update(centroids);
  return crc.value();
}

KMeansResult kmeans(std::span<const float> points, std::size_t n, std::size_t dim, std::size_t k,
                    std::size_t max_iters, std::uint64_t seed) {
  if (k == 0 || dim == 0) fail(ErrorKind::Config, "kmeans: k and dim must be positive");
  if (n < k)
    fail(ErrorKind::Input, "kmeans: " + std::to_string(n) + " training vectors cannot support k = " +
                               std::to_string(k));
  if (points.size() != n * dim) fail(ErrorKind::Dimension, "kmeans: point buffer size mismatch");
  Rng rng(seed);
  KMeansResult r;
  r.centroids = seed_centers(points, n, dim, k, rng);
  r.assignment.assign(n, 0);
  std::vector<std::uint32_t> next(n);
  std::vector<double> dist(n);
  std::vector<double> sums(k * dim);
  std::vector<std::size_t> counts(k);
  for (std::size_t iter = 0; iter <= max_iters; ++iter) {
    kernels::nearest_centroid(n, dim, points, k, r.centroids, next, dist);
    double objective = 0.0;
    for (double d : dist) objective += d;
    const bool changed = iter == 0 || next != r.assignment;
    r.assignment.swap(next);
    r.objective.push_back(objective);
    if (r.objective.size() >= 2) {
      const double prev = r.objective[r.objective.size() - 2];
      // Lloyd never increases the objective; allow float32 centroid rounding
      if (objective > prev * (1.0 + 1e-6) + 1e-12)
        fail(ErrorKind::Arithmetic, "kmeans objective increased from " + std::to_string(prev) + " to " +
                                        std::to_string(objective));
    }
    if (!changed || iter == max_iters) break;
    ++r.iterations;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = r.assignment[i];
      ++counts[c];
      for (std::size_t d = 0; d < dim; ++d) sums[c * dim + d] += points[i * dim + d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t d = 0; d < dim; ++d)
        r.centroids[c * dim + d] = static_cast<float>(sums[c * dim + d] / static_cast<double>(counts[c]));
    }
    // empty clusters take over the points farthest from their centroids
    bool any_empty = false;
    for (std::size_t c = 0; c < k; ++c) any_empty |= counts[c] == 0;
    if (any_empty) {
      for (std::size_t i = 0; i < n; ++i)
        dist[i] = sq_dist(points.data() + i * dim, r.centroids.data() + r.assignment[i] * dim, dim);
      for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] != 0) continue;
        std::size_t far = 0;
        for (std::size_t i = 1; i < n; ++i)
          if (dist[i] > dist[far]) far = i;
        std::copy_n(points.data() + far * dim, dim, r.centroids.data() + c * dim);
        dist[far] = -1.0;
      }
    }
  }
  return r;
}

std::vector<float> latents_to_rows(const Tensor& latents) {
  expect_rank(latents, 4, "latents_to_rows");
  const std::size_t n = latents.dim(0), c = latents.dim(1), area = latents.dim(2) * latents.dim(3);
  std::vector<float> rows(n * area * c);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const float* src = latents.raw() + (i * c + ch) * area;
      for (std::size_t p = 0; p < area; ++p) rows[(i * area + p) * c + ch] = src[p];
    }
  return rows;
}

Codebooks train_pq(const Tensor& latents, const PqOptions& options, PqTrainReport* report) {
  expect_rank(latents, 4, "train_pq");
  const std::size_t channels = latents.dim(1);
  if (options.subquantizers == 0 || channels % options.subquantizers != 0)
    fail(ErrorKind::Config, "pq.s = " + std::to_string(options.subquantizers) + " does not divide latent channels " +
                                std::to_string(channels));
  if (options.k == 0 || options.k > 256) fail(ErrorKind::Config, "pq.k must be in [1, 256]");
  Codebooks books;
  books.subquantizers = options.subquantizers;
  books.k = options.k;
  books.sub_dim = channels / options.subquantizers;
  books.centroids.resize(books.subquantizers * books.k * books.sub_dim);
  const std::vector<float> rows = latents_to_rows(latents);
  const std::size_t n = rows.size() / channels;
  if (report) report->objective.assign(books.subquantizers, {});
  std::vector<float> sub(n * books.sub_dim);
  for (std::size_t j = 0; j < books.subquantizers; ++j) {
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(rows.data() + i * channels + j * books.sub_dim, books.sub_dim, sub.data() + i * books.sub_dim);
    auto km = kmeans(sub, n, books.sub_dim, books.k, options.iters, options.seed + j);
    std::copy(km.centroids.begin(), km.centroids.end(),
              books.centroids.begin() + static_cast<std::ptrdiff_t>(j * books.k * books.sub_dim));
    if (report) report->objective[j] = std::move(km.objective);
  }
  return books;
}

std::vector<std::vector<std::uint8_t>> pq_encode_batch(const Tensor& latents, const Codebooks& books) {
  check_latent(latents, books, "pq_encode");
  const std::size_t n = latents.dim(0), area = latents.dim(2) * latents.dim(3), c = books.latent_channels();
  const std::vector<float> rows = latents_to_rows(latents);
  const std::size_t total = n * area;
  std::vector<float> sub(total * books.sub_dim);
  std::vector<std::uint32_t> assign(total);
  std::vector<double> dist(total);
  std::vector<std::vector<std::uint8_t>> codes(n, std::vector<std::uint8_t>(books.subquantizers * area));
  for (std::size_t j = 0; j < books.subquantizers; ++j) {
    for (std::size_t i = 0; i < total; ++i)
      std::copy_n(rows.data() + i * c + j * books.sub_dim, books.sub_dim, sub.data() + i * books.sub_dim);
    kernels::nearest_centroid(total, books.sub_dim, sub, books.k, books.table(j), assign, dist);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < area; ++p)
        codes[i][j * area + p] = static_cast<std::uint8_t>(assign[i * area + p]);
  }
  return codes;
}

std::vector<std::uint8_t> pq_encode(const Tensor& latent, const Codebooks& books) {
  if (latent.rank() == 3) return pq_encode_batch(latent.reshaped({1, latent.dim(0), latent.dim(1), latent.dim(2)}), books)[0];
  if (latent.rank() != 4 || latent.dim(0) != 1)
    fail(ErrorKind::Dimension, "pq_encode: expected a single C' x H x W map, got " + shape_str(latent.shape()));
  return pq_encode_batch(latent, books)[0];
}

Tensor pq_decode(std::span<const std::uint8_t> codes, std::size_t h, std::size_t w, const Codebooks& books) {
  books.validate();
  const std::size_t area = h * w;
  if (codes.size() != books.subquantizers * area)
    fail(ErrorKind::Dimension, "pq_decode: expected " + std::to_string(books.subquantizers * area) + " codes, got " +
                                   std::to_string(codes.size()));
  Tensor out({1, books.latent_channels(), h, w});
  for (std::size_t j = 0; j < books.subquantizers; ++j) {
    const auto table = books.table(j);
    for (std::size_t p = 0; p < area; ++p) {
      const std::size_t code = codes[j * area + p];
      if (code >= books.k)
        fail(ErrorKind::Input, "pq_decode: code " + std::to_string(code) + " >= k = " + std::to_string(books.k));
      for (std::size_t d = 0; d < books.sub_dim; ++d)
        out[(j * books.sub_dim + d) * area + p] = table[code * books.sub_dim + d];
    }
  }
  return out;
}

double reconstruction_mse(const Tensor& latents, const Codebooks& books) {
  check_latent(latents, books, "reconstruction_mse");
  if (latents.dim(0) == 0) fail(ErrorKind::Input, "reconstruction_mse: empty set");
  const std::size_t h = latents.dim(2), w = latents.dim(3);
  const auto codes = pq_encode_batch(latents, books);
  const std::size_t per = latents.numel() / latents.dim(0);
  double total = 0.0;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const Tensor rec = pq_decode(codes[i], h, w, books);
    for (std::size_t e = 0; e < per; ++e) {
      const double d = static_cast<double>(rec[e]) - static_cast<double>(latents[i * per + e]);
      total += d * d;
    }
  }
  return total / static_cast<double>(latents.numel());
}

}  // namespace acrm
