#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "acrm/reservoir.hpp"
#include "test_util.hpp"

using namespace acrm;

namespace {

const CodeShape kShape{2, 2, 2, 16};

QuantizedExemplar make(std::uint16_t label, std::uint8_t fill = 0, std::uint16_t task = 1) {
  return {std::vector<std::uint8_t>(kShape.bytes(), fill), label, task};
}

}  // namespace

TEST_CASE("inserts below capacity never evict") {
  Reservoir r(4, kShape);
  Rng rng(1);
  for (std::uint16_t i = 0; i < 4; ++i) CHECK_FALSE(r.insert(make(i % 2), rng).has_value());
  CHECK(r.size() == 4);
  CHECK(r.full());
}

TEST_CASE("eviction comes from a class tied at the maximum") {
  Rng rng(2);
  std::map<int, int> seen;
  for (int trial = 0; trial < 200; ++trial) {
    Reservoir r(4, kShape);
    for (std::uint16_t l : {0, 0, 1, 1}) r.insert(make(l), rng);
    const auto ev = r.insert(make(2), rng);
    REQUIRE(ev.has_value());
    CHECK(ev->label != 2);
    ++seen[ev->label];
  }
  CHECK(seen[0] > 50);
  CHECK(seen[1] > 50);
}

TEST_CASE("the single largest class is always the victim") {
  Rng rng(3);
  int from_zero = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    Reservoir r(4, kShape);
    for (std::uint16_t l : {0, 1, 0, 0}) r.insert(make(l), rng);
    const auto ev = r.insert(make(1), rng);
    from_zero += ev && ev->label == 0;
  }
  CHECK(from_zero == 10000);
}

TEST_CASE("eviction within the largest class is uniform") {
  Rng rng(4);
  std::map<int, int> hits;
  for (int trial = 0; trial < 30000; ++trial) {
    Reservoir r(3, kShape);
    for (std::uint8_t f = 0; f < 3; ++f) r.insert(make(0, f), rng);
    hits[r.insert(make(1), rng)->codes[0]]++;
  }
  for (int f = 0; f < 3; ++f) CHECK(std::abs(hits[f] / 30000.0 - 1.0 / 3) < 0.02);
}

TEST_CASE("random insert sequences keep the reservoir invariants") {
  Rng rng(5), labels(6);
  Reservoir r(25, kShape);
  for (int i = 0; i < 2000; ++i) {
    const auto label = static_cast<std::uint16_t>(labels.uniform_index(7));
    std::size_t most = 0;
    for (const auto& [l, c] : r.class_counts()) most = std::max(most, c);
    const auto before = r.class_counts();
    const std::size_t size_before = r.size();
    const auto ev = r.insert(make(label), rng);
    CHECK(r.size() <= r.capacity());
    CHECK(r.counts_consistent());
    if (ev) {
      CHECK(size_before == r.capacity());
      CHECK(before.at(ev->label) == most);
      CHECK(r.size() == size_before);
    } else {
      CHECK(r.size() == size_before + 1);
    }
  }
}

TEST_CASE("sampling returns everything when asked for at least the size") {
  Reservoir r(10, kShape);
  Rng rng(7);
  for (std::uint8_t i = 0; i < 6; ++i) r.insert(make(i % 3, i), rng);
  auto all = r.sample_indices(6, rng);
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
  CHECK(r.sample_batch(100, rng).size() == 6);
  CHECK(r.sample_batch(0, rng).empty());
  const auto some = r.sample_indices(4, rng);
  CHECK(std::set<std::size_t>(some.begin(), some.end()).size() == 4);
  CHECK(Reservoir(3, kShape).sample_batch(2, rng).empty());
  CHECK(r.sample_indices_with_replacement(9, rng).size() == 9);
}

TEST_CASE("single draws are uniform over entries") {
  Reservoir r(10, kShape);
  Rng rng(8);
  for (std::uint8_t i = 0; i < 10; ++i) r.insert(make(i, i), rng);
  std::vector<int> hits(10);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) hits[r.sample_indices(1, rng)[0]]++;
  double chi2 = 0.0;
  for (int h : hits) {
    CHECK(std::abs(h / static_cast<double>(draws) - 0.1) <= 0.01);
    chi2 += (h - draws / 10.0) * (h - draws / 10.0) / (draws / 10.0);
  }
  CHECK(chi2 < 27.88);  // 99.9th percentile, 9 degrees of freedom
}

TEST_CASE("inserts validate code shape and range") {
  Reservoir r(4, kShape);
  Rng rng(9);
  CHECK(testutil::error_kind_of([&] { r.insert({std::vector<std::uint8_t>(3), 0, 1}, rng); }) ==
        ErrorKind::Dimension);
  CHECK(testutil::error_kind_of([&] { r.insert(make(0, 16), rng); }) == ErrorKind::Input);
}

TEST_CASE("snapshot round trip is bit-identical and follows the documented layout") {
  Reservoir r(5, kShape);
  Rng rng(10);
  for (std::uint8_t i = 0; i < 7; ++i) r.insert(make(i % 3, i, static_cast<std::uint16_t>(1 + i / 3)), rng);
  std::stringstream ss;
  r.write(ss);
  const std::string bytes = ss.str();
  CHECK(bytes.size() == 6 * 4 + 5 * (4 + kShape.bytes()));
  CHECK(static_cast<unsigned char>(bytes[0]) == 5);   // capacity, little-endian
  CHECK(static_cast<unsigned char>(bytes[4]) == 5);   // count
  CHECK(static_cast<unsigned char>(bytes[20]) == 16); // k
  const auto& first = r.entries()[0];
  CHECK(static_cast<unsigned char>(bytes[24]) == first.task_id);
  CHECK(static_cast<unsigned char>(bytes[26]) == first.label);
  CHECK(static_cast<unsigned char>(bytes[28]) == first.codes[0]);
  std::stringstream in(bytes);
  const Reservoir back = Reservoir::read(in);
  CHECK(back == r);
  CHECK(back.class_counts() == r.class_counts());
  std::stringstream again;
  back.write(again);
  CHECK(again.str() == bytes);
  std::stringstream cut(bytes.substr(0, bytes.size() - 3));
  CHECK(testutil::error_kind_of([&] { Reservoir::read(cut); }) == ErrorKind::Format);
}

TEST_CASE("memory accounting reproduces the exemplar tables") {
  struct Row {
    std::uint64_t count;
    std::vector<std::uint64_t> shape;
    const char* exact;
    const char* two_dp;
  };
  const std::vector<Row> rows = {
      {130000, {8, 7, 7}, "50.96", "50.96"},   {130000, {32, 7, 7}, "203.84", "203.84"},
      {2000, {3, 224, 224}, "301.056", "301.06"}, {2000, {3, 32, 32}, "6.144", "6.14"},
      {25000, {4, 8, 8}, "6.4", "6.40"},        {50000, {4, 8, 8}, "12.8", "12.80"},
      {500, {3, 32, 32}, "1.536", "1.54"},      {24000, {1, 8, 8}, "1.536", "1.54"},
  };
  for (const auto& r : rows) {
    const auto bytes = memory_bytes(r.count, r.shape, 1);
    CHECK(format_mb_exact(bytes) == r.exact);
    CHECK(format_mb_rounded(bytes, 2) == r.two_dp);
  }
  CHECK(format_mb_rounded(memory_bytes(130000, std::vector<std::uint64_t>{8, 7, 7}), 0) == "51");
  CHECK(memory_bytes(500, std::vector<std::uint64_t>{3, 32, 32}) ==
        memory_bytes(24000, std::vector<std::uint64_t>{1, 8, 8}));
  CHECK(as_mb(memory_bytes(2000, std::vector<std::uint64_t>{3, 224, 224})) == doctest::Approx(301.056));
  CHECK(memory_bytes(10, std::vector<std::uint64_t>{2, 3}, 4) == 240);
}

TEST_CASE("memory accounting rejects overflow and non-positive inputs") {
  CHECK(testutil::error_kind_of([] { memory_bytes(1ull << 40, std::vector<std::uint64_t>{1ull << 30}); }) ==
        ErrorKind::Arithmetic);
  CHECK(testutil::error_kind_of([] { memory_bytes(0, std::vector<std::uint64_t>{1}); }) == ErrorKind::Input);
  CHECK(testutil::error_kind_of([] { memory_bytes(5, std::vector<std::uint64_t>{2, 0}); }) == ErrorKind::Input);
}
