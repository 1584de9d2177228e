#include "acrm/reservoir.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>

#include "acrm/binary_io.hpp"
#include "acrm/error.hpp"
#include "acrm/rng.hpp"

namespace acrm {

Reservoir::Reservoir(std::size_t capacity, CodeShape shape) : capacity_(capacity), shape_(shape) {
  if (capacity == 0) fail(ErrorKind::Config, "reservoir capacity must be positive");
  if (shape.s == 0 || shape.h == 0 || shape.w == 0 || shape.k == 0 || shape.k > 256)
    fail(ErrorKind::Config, "invalid exemplar code shape");
}

std::optional<QuantizedExemplar> Reservoir::insert(QuantizedExemplar exemplar, Rng& rng) {
  if (exemplar.codes.size() != shape_.bytes())
    fail(ErrorKind::Dimension, "exemplar has " + std::to_string(exemplar.codes.size()) + " codes, reservoir expects " +
                                   std::to_string(shape_.bytes()));
  for (auto c : exemplar.codes)
    if (c >= shape_.k) fail(ErrorKind::Input, "exemplar code " + std::to_string(c) + " >= k");

  std::optional<QuantizedExemplar> evicted;
  if (full()) {
    std::size_t most = 0;
    for (const auto& [label, count] : counts_) most = std::max(most, count);
    std::vector<std::uint16_t> tied;
    for (const auto& [label, count] : counts_)
      if (count == most) tied.push_back(label);
    const std::uint16_t victim_class = tied[rng.uniform_index(tied.size())];
    std::vector<std::size_t> members;
    members.reserve(most);
    for (std::size_t i = 0; i < entries_.size(); ++i)
      if (entries_[i].label == victim_class) members.push_back(i);
    const std::size_t victim = members[rng.uniform_index(members.size())];
    evicted = std::move(entries_[victim]);
    if (victim != entries_.size() - 1) entries_[victim] = std::move(entries_.back());
    entries_.pop_back();
    if (--counts_[victim_class] == 0) counts_.erase(victim_class);
  }
  ++counts_[exemplar.label];
  entries_.push_back(std::move(exemplar));
  return evicted;
}

std::vector<std::size_t> Reservoir::sample_indices(std::size_t n, Rng& rng) const {
  std::vector<std::size_t> idx(entries_.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n >= idx.size()) return idx;
  // partial Fisher-Yates
  for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + rng.uniform_index(idx.size() - i)]);
  idx.resize(n);
  return idx;
}

std::vector<std::size_t> Reservoir::sample_indices_with_replacement(std::size_t n, Rng& rng) const {
  std::vector<std::size_t> idx;
  if (entries_.empty()) return idx;
  idx.reserve(n);
  for (std::size_t i = 0; i < n; ++i) idx.push_back(rng.uniform_index(entries_.size()));
  return idx;
}

std::vector<QuantizedExemplar> Reservoir::sample_batch(std::size_t n, Rng& rng) const {
  std::vector<QuantizedExemplar> out;
  for (auto i : sample_indices(n, rng)) out.push_back(entries_[i]);
  return out;
}

bool Reservoir::counts_consistent() const {
  std::map<std::uint16_t, std::size_t> recount;
  for (const auto& e : entries_) ++recount[e.label];
  return recount == counts_ && entries_.size() <= capacity_;
}

void Reservoir::write(std::ostream& out) const {
  BinaryWriter w(out);
  w.u32(static_cast<std::uint32_t>(capacity_));
  w.u32(static_cast<std::uint32_t>(entries_.size()));
  w.u32(shape_.s);
  w.u32(shape_.h);
  w.u32(shape_.w);
  w.u32(shape_.k);
  for (const auto& e : entries_) {
    w.u16(e.task_id);
    w.u16(e.label);
    w.bytes(e.codes);
  }
}

Reservoir Reservoir::read(std::istream& in) {
  BinaryReader r(in);
  const std::uint32_t capacity = r.u32();
  const std::uint32_t count = r.u32();
  CodeShape shape;
  shape.s = r.u32();
  shape.h = r.u32();
  shape.w = r.u32();
  shape.k = r.u32();
  if (count > capacity) fail(ErrorKind::Format, "reservoir snapshot holds more entries than its capacity");
  if (shape.s == 0 || shape.h == 0 || shape.w == 0 || shape.k == 0 || shape.k > 256 || shape.bytes() > (1u << 24))
    fail(ErrorKind::Format, "reservoir snapshot has an invalid code shape");
  Reservoir res(capacity, shape);
  res.entries_.reserve(std::min<std::size_t>(count, 1u << 16));
  for (std::uint32_t i = 0; i < count; ++i) {
    QuantizedExemplar e;
    e.task_id = r.u16();
    e.label = r.u16();
    e.codes = r.bytes(shape.bytes());
    for (auto c : e.codes)
      if (c >= shape.k) fail(ErrorKind::Format, "reservoir snapshot contains a code >= k");
    ++res.counts_[e.label];
    res.entries_.push_back(std::move(e));
  }
  return res;
}

std::uint64_t memory_bytes(std::uint64_t count, std::span<const std::uint64_t> shape,
                           std::uint64_t bytes_per_element) {
  if (count == 0 || bytes_per_element == 0 || shape.empty())
    fail(ErrorKind::Input, "memory_bytes: inputs must be positive");
  std::uint64_t total = count;
  auto mul = [&total](std::uint64_t f) {
    if (f == 0) fail(ErrorKind::Input, "memory_bytes: shape dimensions must be positive");
    if (__builtin_mul_overflow(total, f, &total)) fail(ErrorKind::Arithmetic, "memory_bytes: 64-bit overflow");
  };
  for (auto d : shape) mul(d);
  mul(bytes_per_element);
  return total;
}

double as_mb(std::uint64_t bytes) { return static_cast<double>(bytes) / 1e6; }

std::string format_mb_exact(std::uint64_t bytes) {
  std::string frac = std::to_string(bytes % 1000000);
  frac.insert(0, 6 - frac.size(), '0');
  while (!frac.empty() && frac.back() == '0') frac.pop_back();
  return std::to_string(bytes / 1000000) + (frac.empty() ? "" : "." + frac);
}

std::string format_mb_rounded(std::uint64_t bytes, int decimals) {
  if (decimals < 0 || decimals > 6) fail(ErrorKind::Input, "format_mb_rounded: decimals must be in [0, 6]");
  std::uint64_t unit = 1;
  for (int i = 0; i < 6 - decimals; ++i) unit *= 10;
  const std::uint64_t scaled = (bytes + unit / 2) / unit;  // half-up in integer arithmetic
  std::uint64_t div = 1;
  for (int i = 0; i < decimals; ++i) div *= 10;
  std::string out = std::to_string(scaled / div);
  if (decimals > 0) {
    std::string frac = std::to_string(scaled % div);
    frac.insert(0, static_cast<std::size_t>(decimals) - frac.size(), '0');
    out += "." + frac;
  }
  return out;
}

}  // namespace acrm
