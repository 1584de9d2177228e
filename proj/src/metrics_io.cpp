#include "acrm/metrics_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "acrm/error.hpp"

namespace acrm {

namespace {

std::string shortest(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace

std::string metrics_jsonl(const MetricsLog& log) {
  std::string out;
  for (const auto& r : log.records) {
    nlohmann::ordered_json j;
    j["step"] = r.step;
    j["task"] = r.task;
    j["seen_classes"] = r.seen_classes;
    j["top1"] = r.top1;
    j["top5"] = r.top5 ? nlohmann::ordered_json(*r.top5) : nlohmann::ordered_json(nullptr);
    out += j.dump() + "\n";
  }
  return out;
}

std::string summary_csv(const MetricsLog& log, const MemoryInfo& memory) {
  std::string out = std::string(kSummaryHeader) + "\n";
  if (log.records.empty()) return out;
  std::string shape;
  for (auto d : memory.shape) shape += (shape.empty() ? "" : "x") + std::to_string(d);
  out += shortest(log.aoc()) + "," + shortest(log.last()) + "," + std::to_string(memory.bytes) + "," +
         std::to_string(memory.exemplar_count) + "," + shape + "\n";
  return out;
}

void emit_metrics(const MetricsLog& log, const MemoryInfo& memory, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  write_text(dir / "metrics.jsonl", metrics_jsonl(log));
  write_text(dir / "summary.csv", summary_csv(log, memory));
}

MetricsLog read_metrics_jsonl(const std::string& text) {
  MetricsLog log;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      MetricRecord r;
      r.step = j.at("step").get<std::uint64_t>();
      r.task = j.at("task").get<std::uint32_t>();
      r.seen_classes = j.at("seen_classes").get<std::uint32_t>();
      r.top1 = j.at("top1").get<double>();
      if (!j.at("top5").is_null()) r.top5 = j.at("top5").get<double>();
      log.records.push_back(r);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Format, "metrics line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return log;
}

}  // namespace acrm
