#include <algorithm>
#include <numeric>
#include <sstream>

#include "acrm/metrics.hpp"
#include "acrm/metrics_io.hpp"
#include "acrm/reservoir.hpp"
#include "test_util.hpp"

using namespace acrm;

namespace {

// Full stable sort of class indices by descending logit.
double sort_oracle(const Tensor& logits, const std::vector<int>& labels, std::size_t k) {
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> order(c);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return logits[i * c + a] > logits[i * c + b]; });
    hits += std::find(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                      static_cast<std::size_t>(labels[i])) != order.begin() + static_cast<std::ptrdiff_t>(k);
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

MetricsLog sample_log() {
  MetricsLog log;
  log.records = {{0, 1, 2, 0.95, 1.0}, {40, 2, 4, 0.7125, std::nullopt}, {80, 3, 6, 0.5, 0.875}};
  return log;
}

}  // namespace

TEST_CASE("perfect logits and k equal to the class count give full accuracy") {
  Tensor logits({3, 4});
  const std::vector<int> labels{2, 0, 3};
  for (std::size_t i = 0; i < 3; ++i) logits[i * 4 + static_cast<std::size_t>(labels[i])] = 5.0f;
  CHECK(top_k_accuracy(logits, labels, 1) == 1.0);
  const Tensor noise = testutil::randn({3, 4}, 1);
  CHECK(top_k_accuracy(noise, labels, 4) == 1.0);
}

TEST_CASE("top-k matches a full-sort oracle and is monotone in k") {
  Rng rng(11);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Tensor logits = testutil::randn({50, 7}, seed);
    for (std::size_t i = 0; i < logits.numel(); i += 5) logits[i] = std::round(logits[i]);  // force some ties
    std::vector<int> labels(50);
    for (auto& y : labels) y = static_cast<int>(rng.uniform_index(7));
    double prev = 0.0;
    for (std::size_t k = 1; k <= 7; ++k) {
      const double acc = top_k_accuracy(logits, labels, k);
      CHECK(acc == sort_oracle(logits, labels, k));
      CHECK(acc >= prev);
      prev = acc;
    }
  }
}

TEST_CASE("ties rank the lower class index first") {
  Tensor logits({1, 3}, {1.0f, 1.0f, 1.0f});
  CHECK(top_k_accuracy(logits, std::vector<int>{0}, 1) == 1.0);
  CHECK(top_k_accuracy(logits, std::vector<int>{1}, 1) == 0.0);
  CHECK(top_k_accuracy(logits, std::vector<int>{2}, 2) == 0.0);
}

TEST_CASE("top-k rejects empty batches and bad k") {
  const std::vector<int> none;
  CHECK(testutil::error_kind_of([&] { top_k_accuracy(Tensor({1, 3}), none, 1); }) == ErrorKind::Input);
  const std::vector<int> one{0};
  CHECK(testutil::error_kind_of([&] { top_k_accuracy(Tensor({1, 3}), one, 4); }) == ErrorKind::Input);
  CHECK(testutil::error_kind_of([&] { top_k_accuracy(Tensor({1, 3}), one, 0); }) == ErrorKind::Input);
}

TEST_CASE("AOC of the published accuracy columns") {
  const std::vector<double> icarl{99.3, 97.2, 93.5, 91.0, 87.5, 82.1, 77.1, 72.8, 67.1, 63.5};
  const std::vector<double> remind{98.4, 91.6, 87.1, 82.2, 79.7, 77.7, 74.8, 72.8, 72.2, 70.9};
  CHECK(aoc(icarl) == doctest::Approx(83.11).epsilon(1e-12));
  CHECK(aoc(remind) == doctest::Approx(80.74).epsilon(1e-12));
  CHECK(std::abs(aoc(icarl) - 83.1) <= 0.05);
  CHECK(std::abs(aoc(remind) - 80.7) <= 0.05);
  MetricsLog log;
  for (std::size_t i = 0; i < icarl.size(); ++i) log.records.push_back({i, static_cast<std::uint32_t>(i + 1), 0, icarl[i], {}});
  CHECK(log.last() == 63.5);
  CHECK(log.aoc() == aoc(icarl));
}

TEST_CASE("AOC basics") {
  CHECK(aoc(std::vector<double>{42.0}) == 42.0);
  CHECK(aoc(std::vector<double>(9, 0.37)) == doctest::Approx(0.37));
  std::vector<double> v{5, 1, 4, 2, 3};
  const double a = aoc(v);
  std::reverse(v.begin(), v.end());
  CHECK(aoc(v) == doctest::Approx(a));
  CHECK(testutil::error_kind_of([] { aoc(std::vector<double>{}); }) == ErrorKind::Input);
  CHECK(testutil::error_kind_of([] { MetricsLog{}.last(); }) == ErrorKind::Input);
}

TEST_CASE("metrics jsonl round trips and has a fixed key order") {
  const MetricsLog log = sample_log();
  const std::string text = metrics_jsonl(log);
  std::istringstream lines(text);
  std::string first;
  std::getline(lines, first);
  CHECK(first == R"({"step":0,"task":1,"seen_classes":2,"top1":0.95,"top5":1.0})");
  CHECK(text.find("\"top5\":null") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
  CHECK(read_metrics_jsonl(text) == log);
}

TEST_CASE("summary csv agrees with the emitted records") {
  const MetricsLog log = sample_log();
  const MemoryInfo mem{25000, {4, 8, 8}, memory_bytes(25000, std::vector<std::uint64_t>{4, 8, 8})};
  const std::string csv = summary_csv(log, mem);
  std::istringstream in(csv);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == kSummaryHeader);
  std::vector<std::string> cols;
  std::stringstream rs(row);
  for (std::string f; std::getline(rs, f, ',');) cols.push_back(f);
  REQUIRE(cols.size() == 5);
  CHECK(std::stod(cols[0]) == doctest::Approx(read_metrics_jsonl(metrics_jsonl(log)).aoc()));
  CHECK(std::stod(cols[1]) == 0.5);
  CHECK(cols[2] == "6400000");
  CHECK(cols[3] == "25000");
  CHECK(cols[4] == "4x8x8");
  CHECK(summary_csv(MetricsLog{}, mem) == std::string(kSummaryHeader) + "\n");
}

TEST_CASE("emit_metrics writes both files") {
  const auto dir = std::filesystem::temp_directory_path() / "acrm_test_metrics";
  std::filesystem::remove_all(dir);
  emit_metrics(sample_log(), {10, {1, 2, 2}, 40}, dir);
  CHECK(std::filesystem::exists(dir / "metrics.jsonl"));
  CHECK(std::filesystem::exists(dir / "summary.csv"));
  std::filesystem::remove_all(dir);
}
