#include "acrm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <set>
#include <string>

#include "acrm/error.hpp"
#include "acrm/rng.hpp"

namespace acrm {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

struct IdxFile {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> bytes;
  std::size_t payload = 0;  // offset of the first data byte
};

IdxFile parse_idx(const std::filesystem::path& path) {
  IdxFile f;
  f.bytes = read_file(path);
  const auto& b = f.bytes;
  if (b.size() < 4 || b[0] != 0 || b[1] != 0)
    fail(ErrorKind::Format, path.string() + ": bad IDX magic");
  if (b[2] != 0x08) fail(ErrorKind::Format, path.string() + ": only unsigned byte IDX data is supported");
  const std::size_t ndims = b[3];
  if (ndims == 0) fail(ErrorKind::Format, path.string() + ": IDX file declares no dimensions");
  if (b.size() < 4 + 4 * ndims) fail(ErrorKind::Format, path.string() + ": truncated IDX header");
  std::size_t total = 1;
  for (std::size_t i = 0; i < ndims; ++i) {
    const std::uint32_t d = be32(b.data() + 4 + 4 * i);
    if (d == 0) fail(ErrorKind::Format, path.string() + ": zero IDX dimension");
    f.dims.push_back(d);
    total *= d;
  }
  f.payload = 4 + 4 * ndims;
  if (b.size() - f.payload < total)
    fail(ErrorKind::Format, path.string() + ": truncated IDX payload (" + std::to_string(b.size() - f.payload) +
                                " of " + std::to_string(total) + " bytes)");
  return f;
}

}  // namespace

Shape Dataset::image_shape() const { return {images.dim(1), images.dim(2), images.dim(3)}; }

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  if (indices.empty()) return out;
  Shape s = images.shape();
  const std::size_t per = images.numel() / s[0];
  s[0] = indices.size();
  std::vector<float> data(indices.size() * per);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) fail(ErrorKind::Input, "dataset subset index out of range");
    std::copy_n(images.raw() + indices[i] * per, per, data.data() + i * per);
    out.labels.push_back(labels[indices[i]]);
  }
  out.images = Tensor(std::move(s), std::move(data));
  return out;
}

std::vector<std::size_t> Dataset::indices_of(std::span<const int> classes) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (std::find(classes.begin(), classes.end(), labels[i]) != classes.end()) out.push_back(i);
  return out;
}

int Dataset::max_label() const {
  return labels.empty() ? -1 : *std::max_element(labels.begin(), labels.end());
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const IdxFile img = parse_idx(images);
  const IdxFile lab = parse_idx(labels);
  if (img.dims.size() != 3 && img.dims.size() != 4)
    fail(ErrorKind::Format, images.string() + ": IDX images must have 3 or 4 dimensions");
  if (lab.dims.size() != 1) fail(ErrorKind::Format, labels.string() + ": IDX labels must have 1 dimension");
  const std::size_t n = img.dims[0];
  if (lab.dims[0] != n) fail(ErrorKind::Format, "IDX image and label counts differ");
  const std::size_t c = img.dims.size() == 4 ? img.dims[1] : 1;
  const std::size_t h = img.dims[img.dims.size() - 2], w = img.dims.back();
  Dataset d;
  std::vector<float> px(n * c * h * w);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<float>(img.bytes[img.payload + i]) / 255.0f;
  d.images = Tensor({n, c, h, w}, std::move(px));
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.labels[i] = lab.bytes[lab.payload + i];
  return d;
}

Dataset load_cifar_bin(std::span<const std::filesystem::path> paths) {
  constexpr std::size_t kRecord = 3073, kPixels = 3 * 32 * 32;
  std::vector<float> px;
  std::vector<int> labels;
  for (const auto& path : paths) {
    const auto bytes = read_file(path);
    if (bytes.empty() || bytes.size() % kRecord != 0)
      fail(ErrorKind::Format, path.string() + ": size " + std::to_string(bytes.size()) +
                                  " is not a positive multiple of 3073");
    for (std::size_t r = 0; r < bytes.size() / kRecord; ++r) {
      const std::uint8_t* rec = bytes.data() + r * kRecord;
      labels.push_back(rec[0]);
      for (std::size_t i = 0; i < kPixels; ++i) px.push_back(static_cast<float>(rec[1 + i]) / 255.0f);
    }
  }
  if (labels.empty()) fail(ErrorKind::Input, "no CIFAR files given");
  Dataset d;
  d.images = Tensor({labels.size(), 3, 32, 32}, std::move(px));
  d.labels = std::move(labels);
  return d;
}

Dataset load_cifar_bin(const std::filesystem::path& path) {
  return load_cifar_bin(std::span<const std::filesystem::path>(&path, 1));
}

Dataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t split) {
  if (spec.classes == 0 || spec.per_class == 0 || spec.channels == 0 || spec.height == 0 || spec.width == 0)
    fail(ErrorKind::Config, "synthetic dataset dimensions must be positive");
  struct ClassLook {
    double cy, cx, sy, sx, rot;
    std::vector<double> colour;
  };
  Rng class_rng(derive_seed(spec.seed, 0x5eed));
  const double h = static_cast<double>(spec.height), w = static_cast<double>(spec.width);
  std::vector<ClassLook> looks(spec.classes);
  for (auto& look : looks) {
    look.cy = class_rng.uniform(0.2, 0.8) * h;
    look.cx = class_rng.uniform(0.2, 0.8) * w;
    look.sy = class_rng.uniform(0.12, 0.3) * h;
    look.sx = class_rng.uniform(0.12, 0.3) * w;
    look.rot = class_rng.uniform(0.0, std::numbers::pi);
    look.colour.resize(spec.channels);
    for (auto& v : look.colour) v = class_rng.uniform(0.15, 1.0);
  }
  Rng rng(derive_seed(spec.seed, 0x1000 + split));
  const std::size_t n = spec.classes * spec.per_class;
  const std::size_t plane = spec.height * spec.width;
  std::vector<float> px(n * spec.channels * plane);
  Dataset d;
  d.labels.reserve(n);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    const auto& look = looks[c];
    const double cr = std::cos(look.rot), sr = std::sin(look.rot);
    for (std::size_t s = 0; s < spec.per_class; ++s) {
      const std::size_t idx = d.labels.size();
      d.labels.push_back(static_cast<int>(c));
      const double cy = look.cy + spec.jitter * rng.normal();
      const double cx = look.cx + spec.jitter * rng.normal();
      float* img = px.data() + idx * spec.channels * plane;
      for (std::size_t y = 0; y < spec.height; ++y)
        for (std::size_t x = 0; x < spec.width; ++x) {
          const double dy = static_cast<double>(y) + 0.5 - cy, dx = static_cast<double>(x) + 0.5 - cx;
          const double u = (cr * dx + sr * dy) / look.sx, v = (-sr * dx + cr * dy) / look.sy;
          const double g = std::exp(-0.5 * (u * u + v * v));
          for (std::size_t ch = 0; ch < spec.channels; ++ch) {
            const double noise = spec.noise > 0.0 ? spec.noise * rng.normal() : 0.0;
            img[ch * plane + y * spec.width + x] = static_cast<float>(std::clamp(look.colour[ch] * g + noise, 0.0, 1.0));
          }
        }
    }
  }
  d.images = Tensor({n, spec.channels, spec.height, spec.width}, std::move(px));
  return d;
}

ChannelStats channel_stats(const Dataset& d, std::span<const std::size_t> samples) {
  expect_rank(d.images, 4, "channel_stats");
  if (samples.empty()) fail(ErrorKind::Input, "channel_stats: no samples");
  const std::size_t c = d.images.dim(1), plane = d.images.dim(2) * d.images.dim(3);
  ChannelStats st;
  st.mean.assign(c, 0.0);
  st.stddev.assign(c, 0.0);
  std::vector<double> sq(c, 0.0);
  for (auto i : samples) {
    if (i >= d.size()) fail(ErrorKind::Input, "channel_stats: sample index out of range");
    for (std::size_t ch = 0; ch < c; ++ch) {
      const float* p = d.images.raw() + (i * c + ch) * plane;
      for (std::size_t k = 0; k < plane; ++k) {
        st.mean[ch] += p[k];
        sq[ch] += static_cast<double>(p[k]) * p[k];
      }
    }
  }
  const double n = static_cast<double>(samples.size() * plane);
  for (std::size_t ch = 0; ch < c; ++ch) {
    st.mean[ch] /= n;
    st.stddev[ch] = std::sqrt(std::max(0.0, sq[ch] / n - st.mean[ch] * st.mean[ch]));
  }
  return st;
}

void standardize(Dataset& d, const ChannelStats& stats) {
  expect_rank(d.images, 4, "standardize");
  const std::size_t c = d.images.dim(1), plane = d.images.dim(2) * d.images.dim(3);
  if (stats.mean.size() != c || stats.stddev.size() != c)
    fail(ErrorKind::Dimension, "standardize: statistics do not match the channel count");
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double sd = stats.stddev[ch] > 0.0 ? stats.stddev[ch] : 1.0;
      float* p = d.images.raw() + (i * c + ch) * plane;
      for (std::size_t k = 0; k < plane; ++k) p[k] = static_cast<float>((p[k] - stats.mean[ch]) / sd);
    }
}

std::vector<int> class_order(std::size_t num_classes, std::uint64_t seed) {
  std::vector<int> order(num_classes);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
  return order;
}

TaskStream make_task_stream(const Dataset& train, std::span<const int> order, std::size_t first_classes,
                            std::size_t steps, std::uint64_t seed) {
  if (first_classes == 0 || first_classes > order.size())
    fail(ErrorKind::Config, "split.first_task_classes must be in [1, " + std::to_string(order.size()) + "]");
  const std::size_t rest = order.size() - first_classes;
  if (steps == 0 ? rest != 0 : rest % steps != 0)
    fail(ErrorKind::Config, "split.steps = " + std::to_string(steps) + " does not divide the remaining " +
                                std::to_string(rest) + " classes");
  TaskStream stream;
  stream.class_order.assign(order.begin(), order.end());
  const std::size_t per = steps ? rest / steps : 0;
  Rng rng(seed);
  std::size_t pos = 0;
  for (std::size_t t = 0; t <= steps; ++t) {
    const std::size_t count = t == 0 ? first_classes : per;
    Task task;
    task.id = static_cast<std::uint32_t>(t + 1);
    task.classes.assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                        order.begin() + static_cast<std::ptrdiff_t>(pos + count));
    pos += count;
    task.samples = train.indices_of(task.classes);
    if (task.samples.empty()) fail(ErrorKind::Input, "task " + std::to_string(task.id) + " has no training samples");
    for (std::size_t i = task.samples.size(); i > 1; --i)
      std::swap(task.samples[i - 1], task.samples[rng.uniform_index(i)]);
    stream.tasks.push_back(std::move(task));
  }
  validate_stream(stream, train);
  return stream;
}

void validate_stream(const TaskStream& stream, const Dataset& train) {
  std::set<int> seen;
  for (std::size_t t = 0; t < stream.tasks.size(); ++t) {
    const auto& task = stream.tasks[t];
    if (task.id != t + 1) fail(ErrorKind::Input, "task ids must be 1..T in order");
    for (int c : task.classes)
      if (!seen.insert(c).second) fail(ErrorKind::Input, "class " + std::to_string(c) + " appears in two tasks");
    for (auto i : task.samples) {
      if (i >= train.size()) fail(ErrorKind::Input, "task sample index out of range");
      if (std::find(task.classes.begin(), task.classes.end(), train.labels[i]) == task.classes.end())
        fail(ErrorKind::Input, "task " + std::to_string(task.id) + " contains a sample of a foreign class");
    }
  }
}

}  // namespace acrm
