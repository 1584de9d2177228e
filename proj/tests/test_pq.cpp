#include <algorithm>
#include <cmath>
#include <limits>

#include "acrm/pq.hpp"
#include "test_util.hpp"

using namespace acrm;
using testutil::randn;

namespace {

// N x C' x 1 x 1 latents from row vectors
Tensor from_rows(const std::vector<std::vector<float>>& rows) {
  std::vector<float> data;
  for (const auto& r : rows) data.insert(data.end(), r.begin(), r.end());
  return Tensor({rows.size(), rows[0].size(), 1, 1}, std::move(data));
}

// best 2-partition SSE of 1-d values by exhaustive search
double exhaustive_two_means(const std::vector<double>& v) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = v.size();
  for (std::size_t mask = 1; mask + 1 < (std::size_t{1} << n); ++mask) {
    double s[2] = {0, 0}, c[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      s[(mask >> i) & 1] += v[i];
      c[(mask >> i) & 1] += 1;
    }
    double sse = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const int g = (mask >> i) & 1;
      sse += (v[i] - s[g] / c[g]) * (v[i] - s[g] / c[g]);
    }
    best = std::min(best, sse);
  }
  return best;
}

}  // namespace

TEST_CASE("a single vector with k = 1 becomes the centroid") {
  const Tensor u = from_rows({{1.5f, -2.0f, 0.25f, 4.0f}});
  const auto books = train_pq(u, {2, 1, 10, 3});
  CHECK(books.centroids == std::vector<float>{1.5f, -2.0f, 0.25f, 4.0f});
  CHECK(reconstruction_mse(u, books) == 0.0);
}

TEST_CASE("four-point example reaches the exhaustive k-means optimum") {
  const Tensor u = from_rows({{0, 0}, {0, 2}, {10, 0}, {10, 2}});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto books = train_pq(u, {2, 2, 25, seed});
    auto t0 = std::vector<float>(books.table(0).begin(), books.table(0).end());
    auto t1 = std::vector<float>(books.table(1).begin(), books.table(1).end());
    std::sort(t0.begin(), t0.end());
    std::sort(t1.begin(), t1.end());
    CHECK(t0 == std::vector<float>{0, 10});
    CHECK(t1 == std::vector<float>{0, 2});
    CHECK(reconstruction_mse(u, books) == 0.0);
    CHECK(exhaustive_two_means({0, 0, 10, 10}) == 0.0);
    CHECK(exhaustive_two_means({0, 2, 0, 2}) == 0.0);
  }
}

TEST_CASE("k-means matches the exhaustive optimum on small 1-d sets") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    std::vector<float> pts(8);
    std::vector<double> pd(8);
    for (std::size_t i = 0; i < 8; ++i) {
      pts[i] = static_cast<float>(rng.normal() + (i < 4 ? -3.0 : 3.0));
      pd[i] = pts[i];
    }
    const auto km = kmeans(pts, 8, 1, 2, 50, seed);
    CHECK(km.objective.back() == doctest::Approx(exhaustive_two_means(pd)).epsilon(1e-5));
  }
}

TEST_CASE("codebook training is deterministic") {
  const Tensor u = randn({50, 4, 3, 3}, 8);
  const auto a = train_pq(u, {2, 16, 10, 5}), b = train_pq(u, {2, 16, 10, 5});
  CHECK(a == b);
  CHECK(a.checksum() == b.checksum());
}

TEST_CASE("encode and decode at centroid values is a bit-exact fixed point") {
  const Tensor train = randn({40, 6, 2, 2}, 9);
  const auto books = train_pq(train, {3, 8, 10, 1});
  // build a latent whose sub-vectors are centroids
  Rng rng(4);
  std::vector<std::uint8_t> codes(3 * 4);
  for (auto& c : codes) c = static_cast<std::uint8_t>(rng.uniform_index(8));
  const Tensor u = pq_decode(codes, 2, 2, books);
  const auto again = pq_encode(u, books);
  CHECK(pq_decode(again, 2, 2, books).same_values(u));
}

TEST_CASE("k = 1 encodes everything to zero") {
  const Tensor u = randn({10, 4, 2, 2}, 2);
  const auto books = train_pq(u, {2, 1, 5, 0});
  for (const auto& codes : pq_encode_batch(u, books))
    for (auto c : codes) CHECK(c == 0);
}

TEST_CASE("encoding matches a brute-force nearest-centroid scan") {
  const Tensor train = randn({60, 8, 2, 2}, 3);
  const auto books = train_pq(train, {4, 16, 10, 2});
  const Tensor u = randn({1, 8, 5, 5}, 12);
  const auto codes = pq_encode(u, books);
  REQUIRE(codes.size() == 4 * 25);
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t p = 0; p < 25; ++p) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t c = 0; c < 16; ++c) {
        double d = 0;
        for (std::size_t e = 0; e < 2; ++e) {
          const double diff = static_cast<double>(u[(j * 2 + e) * 25 + p]) - books.table(j)[c * 2 + e];
          d += diff * diff;
        }
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      CHECK(codes[j * 25 + p] == arg);
    }
}

TEST_CASE("ties go to the lowest centroid index") {
  Codebooks books;
  books.subquantizers = 1;
  books.k = 3;
  books.sub_dim = 1;
  books.centroids = {1.0f, -1.0f, 1.0f};
  const Tensor u({1, 1, 1, 1}, 0.0f);
  CHECK(pq_encode(u, books)[0] == 0);
}

TEST_CASE("decode rejects out-of-range codes and wrong lengths") {
  const auto books = train_pq(randn({10, 2, 1, 1}, 1), {1, 4, 5, 0});
  const std::vector<std::uint8_t> bad{4};
  CHECK(testutil::error_kind_of([&] { pq_decode(bad, 1, 1, books); }) == ErrorKind::Input);
  const std::vector<std::uint8_t> wrong{0, 1};
  CHECK(testutil::error_kind_of([&] { pq_decode(wrong, 1, 1, books); }) == ErrorKind::Dimension);
}

TEST_CASE("training errors") {
  CHECK(testutil::error_kind_of([] { train_pq(randn({2, 2, 1, 1}, 1), {1, 4, 5, 0}); }) == ErrorKind::Input);
  CHECK(testutil::error_kind_of([] { train_pq(randn({20, 6, 1, 1}, 1), {4, 2, 5, 0}); }) == ErrorKind::Config);
  CHECK(testutil::error_kind_of([] { train_pq(randn({300, 2, 1, 1}, 1), {1, 257, 5, 0}); }) == ErrorKind::Config);
}

TEST_CASE("reconstruction error is zero on centroid data and shrinks with k") {
  const Tensor u = randn({200, 4, 2, 2}, 21);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k : {1, 4, 16, 64}) {
    const auto books = train_pq(u, {2, k, 25, 7});
    const double mse = reconstruction_mse(u, books);
    CHECK(mse <= prev);
    prev = mse;
  }
  const auto books = train_pq(u, {2, 8, 10, 7});
  std::vector<Tensor> maps;
  for (const auto& c : pq_encode_batch(u, books)) maps.push_back(pq_decode(c, 2, 2, books));
  CHECK(reconstruction_mse(Tensor::stack(maps), books) == 0.0);
}

TEST_CASE("k = 1 error equals the summed per-subspace variance") {
  const Tensor u = randn({100, 6, 2, 2}, 31, 2.0);
  const auto books = train_pq(u, {3, 1, 5, 0});
  const auto rows = latents_to_rows(u);
  const std::size_t n = rows.size() / 6;
  double total = 0.0;
  for (std::size_t c = 0; c < 6; ++c) {
    double mean = 0;
    for (std::size_t i = 0; i < n; ++i) mean += rows[i * 6 + c];
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) total += (rows[i * 6 + c] - mean) * (rows[i * 6 + c] - mean);
  }
  CHECK(reconstruction_mse(u, books) == doctest::Approx(total / static_cast<double>(rows.size())).epsilon(1e-6));
}

TEST_CASE("decode of encode is idempotent and codes are in range") {
  const Tensor u = randn({30, 8, 3, 3}, 41);
  const auto books = train_pq(u, {4, 32, 15, 3});
  for (std::size_t i = 0; i < 30; ++i) {
    const Tensor one = u.slice(i);
    const auto c1 = pq_encode(one, books);
    CHECK(c1.size() == 4 * 3 * 3);
    for (auto c : c1) CHECK(c < 32);
    const Tensor d1 = pq_decode(c1, 3, 3, books);
    const Tensor d2 = pq_decode(pq_encode(d1, books), 3, 3, books);
    CHECK(d2.same_values(d1));
  }
}

TEST_CASE("Lloyd iterations never increase the objective and handle duplicates") {
  PqTrainReport report;
  train_pq(randn({80, 4, 2, 2}, 51), {2, 16, 25, 1}, &report);
  for (const auto& obj : report.objective)
    for (std::size_t i = 1; i < obj.size(); ++i) CHECK(obj[i] <= obj[i - 1] * (1 + 1e-6));
  std::vector<float> dup{1, 1, 1, 1, 1, 5};
  const auto km = kmeans(dup, 6, 1, 3, 10, 0);
  for (float c : km.centroids) CHECK(std::isfinite(c));
  CHECK(km.objective.back() == 0.0);
}
