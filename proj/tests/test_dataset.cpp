#include <filesystem>
#include <fstream>
#include <limits>
#include <set>

#include "acrm/dataset.hpp"
#include "test_util.hpp"

using namespace acrm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) { return fs::temp_directory_path() / ("acrm_test_" + name); }

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> idx_file(std::vector<std::uint32_t> dims, const std::vector<std::uint8_t>& payload) {
  std::vector<std::uint8_t> b{0, 0, 0x08, static_cast<std::uint8_t>(dims.size())};
  for (auto d : dims)
    for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(d >> s));
  b.insert(b.end(), payload.begin(), payload.end());
  return b;
}

}  // namespace

TEST_CASE("a one-image IDX pair round-trips") {
  const auto img = scratch("one.idx3"), lab = scratch("one.idx1");
  write_bytes(img, idx_file({1, 2, 2}, {0, 51, 102, 255}));
  write_bytes(lab, idx_file({1}, {7}));
  const Dataset d = load_idx(img, lab);
  CHECK(d.images.shape() == Shape{1, 1, 2, 2});
  CHECK(d.labels == std::vector<int>{7});
  CHECK(d.images[0] == 0.0f);
  CHECK(d.images[1] == doctest::Approx(0.2));
  CHECK(d.images[3] == 1.0f);
}

TEST_CASE("IDX payload byte i lands at its row-major pixel") {
  const std::uint32_t n = 3, c = 2, h = 4, w = 5;
  std::vector<std::uint8_t> payload(n * c * h * w);
  for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<std::uint8_t>((i * 37 + 11) % 256);
  const auto img = scratch("grid.idx4"), lab = scratch("grid.idx1");
  write_bytes(img, idx_file({n, c, h, w}, payload));
  write_bytes(lab, idx_file({n}, {0, 1, 2}));
  const Dataset d = load_idx(img, lab);
  for (std::uint32_t s = 0; s < n; ++s)
    for (std::uint32_t ch = 0; ch < c; ++ch)
      for (std::uint32_t y = 0; y < h; ++y)
        for (std::uint32_t x = 0; x < w; ++x) {
          const std::size_t byte = ((s * c + ch) * h + y) * w + x;
          CHECK(d.images[byte] == static_cast<float>(payload[byte]) / 255.0f);
        }
}

TEST_CASE("malformed IDX files are format errors") {
  const auto img = scratch("bad.idx3"), lab = scratch("bad.idx1");
  write_bytes(lab, idx_file({1}, {0}));
  auto bad = idx_file({1, 2, 2}, {1, 2, 3, 4});
  bad[1] = 8;
  write_bytes(img, bad);
  CHECK(testutil::error_kind_of([&] { load_idx(img, lab); }) == ErrorKind::Format);
  write_bytes(img, idx_file({1, 2, 2}, {1, 2, 3}));
  CHECK(testutil::error_kind_of([&] { load_idx(img, lab); }) == ErrorKind::Format);
  write_bytes(img, {0, 0, 8});
  CHECK(testutil::error_kind_of([&] { load_idx(img, lab); }) == ErrorKind::Format);
  write_bytes(img, idx_file({2, 2, 2}, std::vector<std::uint8_t>(8)));
  CHECK(testutil::error_kind_of([&] { load_idx(img, lab); }) == ErrorKind::Format);
  CHECK(testutil::error_kind_of([&] { load_idx(scratch("missing"), lab); }) == ErrorKind::Io);
}

TEST_CASE("CIFAR records decode channel-planar pixels") {
  std::vector<std::uint8_t> bytes;
  for (int r = 0; r < 2; ++r) {
    bytes.push_back(static_cast<std::uint8_t>(3 + r));
    for (std::size_t i = 0; i < 3072; ++i) bytes.push_back(static_cast<std::uint8_t>((i * 7 + r) % 256));
  }
  const auto path = scratch("cifar.bin");
  write_bytes(path, bytes);
  const Dataset d = load_cifar_bin(path);
  CHECK(d.images.shape() == Shape{2, 3, 32, 32});
  CHECK(d.labels == std::vector<int>{3, 4});
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t i = 0; i < 3072; i += 13) {
      const std::size_t ch = i / 1024, y = (i % 1024) / 32, x = i % 32;
      CHECK(d.images[((r * 3 + ch) * 32 + y) * 32 + x] == static_cast<float>(bytes[r * 3073 + 1 + i]) / 255.0f);
    }
  const std::vector<fs::path> two{path, path};
  CHECK(load_cifar_bin(two).size() == 4);
  bytes.pop_back();
  write_bytes(path, bytes);
  CHECK(testutil::error_kind_of([&] { load_cifar_bin(path); }) == ErrorKind::Format);
  write_bytes(path, {});
  CHECK(testutil::error_kind_of([&] { load_cifar_bin(path); }) == ErrorKind::Format);
}

TEST_CASE("noise-free synthetic classes render identical images") {
  SyntheticSpec spec;
  spec.noise = 0.0;
  spec.jitter = 0.0;
  spec.per_class = 5;
  const Dataset d = gen_synthetic(spec);
  const std::size_t per = d.images.numel() / d.size();
  for (std::size_t c = 0; c < spec.classes; ++c)
    for (std::size_t s = 1; s < spec.per_class; ++s)
      CHECK(std::equal(d.images.raw() + (c * 5 + s) * per, d.images.raw() + (c * 5 + s + 1) * per,
                       d.images.raw() + c * 5 * per));
}

TEST_CASE("synthetic data is deterministic and bounded") {
  SyntheticSpec spec;
  spec.seed = 9;
  const Dataset a = gen_synthetic(spec), b = gen_synthetic(spec);
  CHECK(a.images.same_values(b.images));
  CHECK(a.labels == b.labels);
  CHECK_FALSE(gen_synthetic(spec, 1).images.same_values(a.images));
  for (float v : a.images.data()) REQUIRE((v >= 0.0f && v <= 1.0f));
  CHECK(a.size() == spec.classes * spec.per_class);
  CHECK(a.max_label() == 9);
}

TEST_CASE("a nearest-centroid classifier separates the default synthetic classes") {
  for (std::uint64_t seed : {1, 2, 3}) {
    SyntheticSpec spec;
    spec.seed = seed;
    const Dataset train = gen_synthetic(spec, 0), test = gen_synthetic(spec, 1);
    const std::size_t per = train.images.numel() / train.size();
    std::vector<double> centroids(spec.classes * per);
    for (std::size_t i = 0; i < train.size(); ++i)
      for (std::size_t e = 0; e < per; ++e)
        centroids[static_cast<std::size_t>(train.labels[i]) * per + e] += train.images[i * per + e] / spec.per_class;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      int pick = -1;
      for (std::size_t c = 0; c < spec.classes; ++c) {
        double dist = 0.0;
        for (std::size_t e = 0; e < per; ++e) {
          const double diff = test.images[i * per + e] - centroids[c * per + e];
          dist += diff * diff;
        }
        if (dist < best) best = dist, pick = static_cast<int>(c);
      }
      correct += pick == test.labels[i];
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(test.size()) >= 0.9);
  }
}

TEST_CASE("task streams partition the classes") {
  SyntheticSpec spec;
  spec.per_class = 12;
  const Dataset train = gen_synthetic(spec);
  const auto order = class_order(10, 4);
  CHECK(std::set<int>(order.begin(), order.end()).size() == 10);
  CHECK(order == class_order(10, 4));
  const TaskStream s = make_task_stream(train, order, 2, 4, 5);
  REQUIRE(s.tasks.size() == 5);
  std::size_t samples = 0;
  std::set<std::size_t> all;
  for (std::size_t t = 0; t < 5; ++t) {
    CHECK(s.tasks[t].id == t + 1);
    CHECK(s.tasks[t].classes.size() == 2);
    CHECK(s.tasks[t].samples.size() == 24);
    samples += s.tasks[t].samples.size();
    all.insert(s.tasks[t].samples.begin(), s.tasks[t].samples.end());
  }
  CHECK(samples == train.size());
  CHECK(all.size() == train.size());
  CHECK(s.tasks[0].classes == std::vector<int>{order[0], order[1]});
  CHECK(make_task_stream(train, order, 2, 4, 5).tasks[3].samples == s.tasks[3].samples);
  CHECK(testutil::error_kind_of([&] { make_task_stream(train, order, 2, 3, 5); }) == ErrorKind::Config);
  CHECK(testutil::error_kind_of([&] { make_task_stream(train, order, 11, 1, 5); }) == ErrorKind::Config);
  TaskStream broken = s;
  broken.tasks[2].classes.push_back(order[0]);
  CHECK(testutil::error_kind_of([&] { validate_stream(broken, train); }) == ErrorKind::Input);
}
