#include "acrm/checkpoint.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "acrm/binary_io.hpp"
#include "acrm/error.hpp"

namespace acrm {

namespace {

constexpr char kMagic[4] = {'A', 'C', 'R', 'M'};
constexpr std::uint8_t kDtypeF32 = 0;
constexpr std::size_t kHeaderBytes = 4 + 4 + 8;

void write_blob(BinaryWriter& w, const std::string& name, const Tensor& t) {
  w.string(name);
  w.u8(kDtypeF32);
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
  w.floats(t.data());
}

void write_buffers(BinaryWriter& w, const std::vector<std::vector<float>>& buffers) {
  w.u32(static_cast<std::uint32_t>(buffers.size()));
  for (const auto& b : buffers) {
    w.u64(b.size());
    w.floats(b);
  }
}

std::vector<std::vector<float>> read_buffers(BinaryReader& r, std::size_t max_elems) {
  const std::uint32_t n = r.u32();
  if (n > 4096) fail(ErrorKind::Format, "checkpoint optimizer block is implausibly large");
  std::vector<std::vector<float>> out(n);
  for (auto& b : out) {
    const std::uint64_t len = r.u64();
    if (len > max_elems) fail(ErrorKind::Format, "checkpoint optimizer buffer exceeds the file size");
    b = r.floats(len);
  }
  return out;
}

std::vector<std::pair<std::string, Tensor*>> acae_named(AcaeParams& p) {
  return {{"acae.encoder.weight", &p.enc_w},
          {"acae.encoder.bias", &p.enc_b},
          {"acae.decoder.weight", &p.dec_w},
          {"acae.decoder.bias", &p.dec_b}};
}

}  // namespace

struct CheckpointAccess {
  static void save(const Engine& e, const std::filesystem::path& path) {
    std::ostringstream body;
    BinaryWriter w(body);
    body.write(kMagic, 4);
    w.u32(kCheckpointVersion);
    w.u64(0);  // reservoir offset, patched below

    const NetConfig& net = e.model_.config();
    w.u32(static_cast<std::uint32_t>(net.in_channels));
    w.u32(static_cast<std::uint32_t>(net.height));
    w.u32(static_cast<std::uint32_t>(net.width));
    w.u32(static_cast<std::uint32_t>(net.num_classes));
    w.u32(static_cast<std::uint32_t>(net.replay_block));
    w.u32(static_cast<std::uint32_t>(net.channels.size()));
    for (auto c : net.channels) w.u32(static_cast<std::uint32_t>(c));

    SplitModel model = e.model_;
    AcaeParams acae_params = e.acae_;
    auto model_params = model.named_params();
    const auto acae = acae_named(acae_params);
    w.u32(static_cast<std::uint32_t>(model_params.size() + acae.size()));
    for (const auto& p : model_params) write_blob(w, "model." + p.name, *p.tensor);
    for (const auto& [name, t] : acae) write_blob(w, name, *t);

    w.u32(static_cast<std::uint32_t>(e.books_.subquantizers));
    w.u32(static_cast<std::uint32_t>(e.books_.k));
    w.u32(static_cast<std::uint32_t>(e.books_.sub_dim));
    w.floats(e.books_.centroids);

    w.string(serialize_config(e.config_));
    w.u32(static_cast<std::uint32_t>(e.optim_.kind));
    w.f64(e.optim_.hyper.lr);
    w.f64(e.optim_.hyper.momentum);
    w.f64(e.optim_.hyper.beta2);
    w.f64(e.optim_.hyper.eps);
    w.f64(e.optim_.hyper.weight_decay);
    w.u64(e.optim_.step);
    write_buffers(w, e.optim_.first);
    write_buffers(w, e.optim_.second);
    w.string(e.rng_.serialize());
    w.u32(e.next_task_);
    w.u64(e.last_replay_count_);
    w.u8(e.model_.backbone_frozen() ? 1 : 0);
    w.u8(e.model_.head_frozen() ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(e.log_.records.size()));
    for (const auto& rec : e.log_.records) {
      w.u64(rec.step);
      w.u32(rec.task);
      w.u32(rec.seen_classes);
      w.f64(rec.top1);
      w.u8(rec.top5 ? 1 : 0);
      w.f64(rec.top5.value_or(0.0));
    }
    w.u32(e.baseline_.backbone);
    w.u32(e.baseline_.encoder);
    w.u32(e.baseline_.decoder);
    w.u32(e.baseline_.codebooks);

    const std::uint64_t offset = static_cast<std::uint64_t>(body.tellp());
    e.reservoir_.write(body);

    std::string bytes = body.str();
    for (int i = 0; i < 8; ++i) bytes[8 + i] = static_cast<char>((offset >> (8 * i)) & 0xff);
    const std::uint32_t crc =
        Crc32{}.update(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size())).value();

    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write checkpoint " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    BinaryWriter(out).u32(crc);
    if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
  }

  static Engine load(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) fail(ErrorKind::Io, "cannot open checkpoint " + path.string());
    std::stringstream buf;
    buf << file.rdbuf();
    const std::string bytes = buf.str();
    if (bytes.size() < kHeaderBytes + 4 || bytes.compare(0, 4, kMagic, 4) != 0)
      fail(ErrorKind::Format, path.string() + ": not an ACRM checkpoint");
    const std::size_t body_size = bytes.size() - 4;
    {
      std::istringstream tail(bytes.substr(body_size));
      const std::uint32_t stored = BinaryReader(tail).u32();
      const std::uint32_t actual =
          Crc32{}.update(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), body_size)).value();
      std::istringstream head(bytes.substr(4, 4));
      const std::uint32_t version = BinaryReader(head).u32();
      if (version != kCheckpointVersion)
        fail(ErrorKind::Format, path.string() + ": unsupported checkpoint version " + std::to_string(version));
      if (stored != actual) fail(ErrorKind::Format, path.string() + ": checksum mismatch (corrupt or truncated)");
    }
    std::istringstream in(bytes.substr(0, body_size));
    in.seekg(8);
    BinaryReader r(in);
    const std::uint64_t offset = r.u64();
    const std::size_t max_elems = body_size / 4;

    NetConfig net;
    net.in_channels = r.u32();
    net.height = r.u32();
    net.width = r.u32();
    net.num_classes = r.u32();
    net.replay_block = r.u32();
    const std::uint32_t blocks = r.u32();
    if (blocks > 64) fail(ErrorKind::Format, "checkpoint declares too many blocks");
    net.channels.resize(blocks);
    for (auto& c : net.channels) c = r.u32();
    try {
      net.validate();
    } catch (const Error& err) {
      fail(ErrorKind::Format, std::string("checkpoint network shape is invalid: ") + err.what());
    }

    Engine e;
    e.model_ = SplitModel::build(net, 0);
    std::map<std::string, Tensor*> slots;
    for (auto& p : e.model_.named_params()) slots["model." + p.name] = p.tensor;
    const std::uint32_t count = r.u32();
    std::set<std::string> seen;
    std::map<std::string, Tensor> acae_blobs;
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::string name = r.string(4096);
      if (r.u8() != kDtypeF32) fail(ErrorKind::Format, "checkpoint blob " + name + " has an unknown dtype");
      const std::uint32_t rank = r.u32();
      if (rank == 0 || rank > 8) fail(ErrorKind::Format, "checkpoint blob " + name + " has an invalid rank");
      Shape shape(rank);
      std::size_t numel = 1;
      for (auto& d : shape) {
        d = r.u32();
        if (d == 0) fail(ErrorKind::Format, "checkpoint blob " + name + " has a zero dimension");
        numel *= d;
        if (numel > max_elems) fail(ErrorKind::Format, "checkpoint blob " + name + " exceeds the file size");
      }
      Tensor t(shape, r.floats(numel));
      if (!seen.insert(name).second) fail(ErrorKind::Format, "checkpoint blob " + name + " appears twice");
      if (auto it = slots.find(name); it != slots.end()) {
        if (it->second->shape() != shape)
          fail(ErrorKind::Format, "checkpoint blob " + name + " has shape " + shape_str(shape) + ", expected " +
                                      shape_str(it->second->shape()));
        *it->second = std::move(t);
      } else if (name.rfind("acae.", 0) == 0) {
        acae_blobs[name] = std::move(t);
      } else {
        fail(ErrorKind::Format, "checkpoint contains unknown blob " + name);
      }
    }
    for (const auto& [name, t] : slots)
      if (!seen.count(name)) fail(ErrorKind::Format, "checkpoint is missing " + name);
    for (const auto& [name, t] : acae_named(e.acae_)) {
      auto it = acae_blobs.find(name);
      if (it == acae_blobs.end()) fail(ErrorKind::Format, "checkpoint is missing " + name);
      *t = std::move(it->second);
    }

    e.books_.subquantizers = r.u32();
    e.books_.k = r.u32();
    e.books_.sub_dim = r.u32();
    const std::size_t cells = e.books_.subquantizers * e.books_.k * e.books_.sub_dim;
    if (cells > max_elems) fail(ErrorKind::Format, "checkpoint codebook block exceeds the file size");
    e.books_.centroids = r.floats(cells);
    try {
      e.books_.validate();
    } catch (const Error& err) {
      fail(ErrorKind::Format, std::string("checkpoint codebooks are invalid: ") + err.what());
    }

    e.config_ = parse_config(r.string(1u << 20));
    e.optim_.kind = static_cast<OptimKind>(r.u32());
    if (e.optim_.kind != OptimKind::SgdMomentum && e.optim_.kind != OptimKind::Adam)
      fail(ErrorKind::Format, "checkpoint has an unknown optimizer kind");
    e.optim_.hyper.lr = r.f64();
    e.optim_.hyper.momentum = r.f64();
    e.optim_.hyper.beta2 = r.f64();
    e.optim_.hyper.eps = r.f64();
    e.optim_.hyper.weight_decay = r.f64();
    e.optim_.step = r.u64();
    e.optim_.first = read_buffers(r, max_elems);
    e.optim_.second = read_buffers(r, max_elems);
    e.rng_.deserialize(r.string(1u << 16));
    e.next_task_ = r.u32();
    e.last_replay_count_ = r.u64();
    e.model_.set_backbone_frozen(r.u8() != 0);
    e.model_.set_head_frozen(r.u8() != 0);
    const std::uint32_t records = r.u32();
    if (records > max_elems) fail(ErrorKind::Format, "checkpoint metrics block exceeds the file size");
    for (std::uint32_t i = 0; i < records; ++i) {
      MetricRecord rec;
      rec.step = r.u64();
      rec.task = r.u32();
      rec.seen_classes = r.u32();
      rec.top1 = r.f64();
      const bool has5 = r.u8() != 0;
      const double top5 = r.f64();
      if (has5) rec.top5 = top5;
      e.log_.records.push_back(rec);
    }
    e.baseline_.backbone = r.u32();
    e.baseline_.encoder = r.u32();
    e.baseline_.decoder = r.u32();
    e.baseline_.codebooks = r.u32();

    if (static_cast<std::uint64_t>(in.tellg()) != offset)
      fail(ErrorKind::Format, "checkpoint reservoir offset does not match its contents");
    e.reservoir_ = Reservoir::read(in);
    if (in.peek() != std::char_traits<char>::eof()) fail(ErrorKind::Format, "checkpoint has trailing bytes");
    return e;
  }
};

void save_checkpoint(const Engine& engine, const std::filesystem::path& path) { CheckpointAccess::save(engine, path); }

Engine load_checkpoint(const std::filesystem::path& path) { return CheckpointAccess::load(path); }

}  // namespace acrm
