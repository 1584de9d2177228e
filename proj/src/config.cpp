#include "acrm/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "acrm/error.hpp"

namespace acrm {

namespace {

struct Field {
  std::string key;
  std::string doc;
  std::function<void(RunConfig&, const std::string&)> set;  // throws std::invalid_argument with a reason
  std::function<std::string(const RunConfig&)> get;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::uint64_t parse_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty())
    throw std::invalid_argument("expected a non-negative integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty() || !std::isfinite(out))
    throw std::invalid_argument("expected a finite number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + v + "'");
}

std::string fmt_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

template <class T>
Field u64_field(std::string key, std::string doc, T RunConfig::*member) {
  return {std::move(key), std::move(doc),
          [member](RunConfig& c, const std::string& v) { c.*member = static_cast<T>(parse_u64(v)); },
          [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

Field real_field(std::string key, std::string doc, double RunConfig::*member) {
  return {std::move(key), std::move(doc), [member](RunConfig& c, const std::string& v) { c.*member = parse_double(v); },
          [member](const RunConfig& c) { return fmt_double(c.*member); }};
}

Field bool_field(std::string key, std::string doc, bool RunConfig::*member) {
  return {std::move(key), std::move(doc), [member](RunConfig& c, const std::string& v) { c.*member = parse_bool(v); },
          [member](const RunConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

Field text_field(std::string key, std::string doc, std::string RunConfig::*member,
                 std::vector<std::string> choices = {}) {
  return {std::move(key), std::move(doc),
          [member, choices](RunConfig& c, const std::string& v) {
            if (!choices.empty() && std::find(choices.begin(), choices.end(), v) == choices.end()) {
              std::string all;
              for (const auto& ch : choices) all += (all.empty() ? "" : "|") + ch;
              throw std::invalid_argument("expected one of " + all + ", got '" + v + "'");
            }
            c.*member = v;
          },
          [member](const RunConfig& c) { return c.*member; }};
}

Field list_field(std::string key, std::string doc, std::vector<std::size_t> RunConfig::*member) {
  return {std::move(key), std::move(doc),
          [member](RunConfig& c, const std::string& v) {
            std::vector<std::size_t> out;
            std::stringstream ss(v);
            std::string item;
            while (std::getline(ss, item, ',')) out.push_back(static_cast<std::size_t>(parse_u64(trim(item))));
            if (out.empty()) throw std::invalid_argument("expected a comma-separated list of integers");
            c.*member = std::move(out);
          },
          [member](const RunConfig& c) {
            std::string s;
            for (auto v : c.*member) s += (s.empty() ? "" : ",") + std::to_string(v);
            return s;
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      u64_field("seed", "global seed for initialization, shuffling and sampling", &RunConfig::seed),
      text_field("dataset.kind", "synthetic | idx | cifar", &RunConfig::dataset_kind, {"synthetic", "idx", "cifar"}),
      text_field("dataset.train_images", "idx image file or comma-separated cifar batch files", &RunConfig::train_images),
      text_field("dataset.train_labels", "idx label file", &RunConfig::train_labels),
      text_field("dataset.test_images", "idx image file or comma-separated cifar batch files", &RunConfig::test_images),
      text_field("dataset.test_labels", "idx label file", &RunConfig::test_labels),
      u64_field("dataset.order_seed", "seed of the class presentation order", &RunConfig::order_seed),
      bool_field("dataset.standardize", "standardize each channel with task-1 training statistics",
                 &RunConfig::standardize),
      u64_field("synthetic.classes", "number of classes", &RunConfig::synthetic_classes),
      u64_field("synthetic.train_per_class", "training samples per class", &RunConfig::synthetic_train_per_class),
      u64_field("synthetic.test_per_class", "test samples per class", &RunConfig::synthetic_test_per_class),
      u64_field("synthetic.channels", "image channels", &RunConfig::synthetic_channels),
      u64_field("synthetic.height", "image height", &RunConfig::synthetic_height),
      u64_field("synthetic.width", "image width", &RunConfig::synthetic_width),
      real_field("synthetic.noise", "pixel noise standard deviation", &RunConfig::synthetic_noise),
      real_field("synthetic.jitter", "blob position standard deviation in pixels", &RunConfig::synthetic_jitter),
      u64_field("split.first_task_classes", "classes in the first (offline) task", &RunConfig::first_task_classes),
      u64_field("split.steps", "number of online tasks sharing the remaining classes", &RunConfig::steps),
      list_field("net.channels", "output channels of each block", &RunConfig::net_channels),
      u64_field("net.replay_block", "block after which features are compressed and replayed (1..B)",
                &RunConfig::replay_block),
      u64_field("train.epochs", "offline epochs on the first task", &RunConfig::train_epochs),
      u64_field("train.batch_size", "offline minibatch size", &RunConfig::train_batch),
      real_field("train.lr", "offline SGD learning rate", &RunConfig::train_lr),
      real_field("train.momentum", "offline SGD momentum", &RunConfig::train_momentum),
      real_field("train.weight_decay", "offline SGD weight decay", &RunConfig::train_weight_decay),
      bool_field("train.augment", "random crop and flip during offline training", &RunConfig::train_augment),
      u64_field("acae.latent_channels", "channels of the compressed latent", &RunConfig::acae_latent_channels),
      u64_field("acae.epochs", "auto-encoder epochs", &RunConfig::acae_epochs),
      u64_field("acae.batch_size", "auto-encoder minibatch size", &RunConfig::acae_batch),
      real_field("acae.lr", "auto-encoder Adam learning rate", &RunConfig::acae_lr),
      bool_field("acae.use_ce", "add the frozen-head cross-entropy to the reconstruction loss", &RunConfig::acae_use_ce),
      bool_field("acae.augment", "random crop and flip during auto-encoder training", &RunConfig::acae_augment),
      u64_field("pq.s", "number of subquantizers (codes per spatial position)", &RunConfig::pq_s),
      u64_field("pq.k", "centroids per subquantizer (1..256)", &RunConfig::pq_k),
      u64_field("pq.iters", "maximum Lloyd iterations", &RunConfig::pq_iters),
      u64_field("reservoir.capacity", "maximum stored exemplars", &RunConfig::reservoir_capacity),
      u64_field("replay.n", "stored exemplars mixed into each online step", &RunConfig::replay_n),
      bool_field("replay.with_replacement", "draw replay exemplars with replacement", &RunConfig::replay_with_replacement),
      real_field("online.lr", "online SGD learning rate", &RunConfig::online_lr),
      real_field("online.momentum", "online SGD momentum", &RunConfig::online_momentum),
      real_field("online.weight_decay", "online SGD weight decay", &RunConfig::online_weight_decay),
      bool_field("online.augment", "random resized crop of reconstructed features", &RunConfig::online_augment),
      real_field("online.crop_min", "smallest crop area fraction", &RunConfig::online_crop_min),
      real_field("online.crop_max", "largest crop area fraction", &RunConfig::online_crop_max),
      text_field("eval.path", "compressed | direct", &RunConfig::eval_path, {"compressed", "direct"}),
      u64_field("eval.every", "also evaluate every E online steps (0 = task boundaries only)", &RunConfig::eval_every),
      bool_field("eval.top5", "record top-5 accuracy", &RunConfig::eval_top5),
      text_field("output.dir", "directory for checkpoints and metrics", &RunConfig::output_dir),
  };
  return all;
}

[[noreturn]] void key_error(const std::string& key, const std::map<std::string, std::size_t>& lines,
                            const std::string& what) {
  auto it = lines.find(key);
  const std::string where = it == lines.end() ? "" : " (line " + std::to_string(it->second) + ")";
  fail(ErrorKind::Config, key + where + ": " + what);
}

}  // namespace

std::vector<ConfigKey> config_keys() {
  const RunConfig defaults;
  std::vector<ConfigKey> out;
  for (const auto& f : fields()) out.push_back({f.key, f.get(defaults), f.doc});
  return out;
}

void validate_config(const RunConfig& c, const std::map<std::string, std::size_t>& lines) {
  auto need_positive = [&](const char* key, std::size_t v) {
    if (v == 0) key_error(key, lines, "must be positive");
  };
  need_positive("synthetic.classes", c.synthetic_classes);
  need_positive("synthetic.train_per_class", c.synthetic_train_per_class);
  need_positive("synthetic.test_per_class", c.synthetic_test_per_class);
  need_positive("synthetic.channels", c.synthetic_channels);
  need_positive("synthetic.height", c.synthetic_height);
  need_positive("synthetic.width", c.synthetic_width);
  need_positive("split.first_task_classes", c.first_task_classes);
  need_positive("train.batch_size", c.train_batch);
  need_positive("acae.latent_channels", c.acae_latent_channels);
  need_positive("acae.batch_size", c.acae_batch);
  need_positive("pq.s", c.pq_s);
  need_positive("pq.k", c.pq_k);
  need_positive("reservoir.capacity", c.reservoir_capacity);
  for (auto v : c.net_channels)
    if (v == 0) key_error("net.channels", lines, "channel counts must be positive");
  if (c.synthetic_noise < 0) key_error("synthetic.noise", lines, "must be non-negative");
  if (c.synthetic_jitter < 0) key_error("synthetic.jitter", lines, "must be non-negative");
  if (c.replay_block < 1 || c.replay_block > c.net_channels.size())
    key_error("net.replay_block", lines, "must be in [1, " + std::to_string(c.net_channels.size()) + "]");
  if (c.pq_k > 256) key_error("pq.k", lines, "must be at most 256 so each code fits one byte");
  if (c.acae_latent_channels % c.pq_s != 0) {
    auto line_of = [&](const char* k) {
      auto it = lines.find(k);
      return it == lines.end() ? std::string() : " (line " + std::to_string(it->second) + ")";
    };
    fail(ErrorKind::Config, "pq.s" + line_of("pq.s") + " = " + std::to_string(c.pq_s) +
                                " does not divide acae.latent_channels" + line_of("acae.latent_channels") + " = " +
                                std::to_string(c.acae_latent_channels));
  }
  const std::size_t replay_channels = c.net_channels[c.replay_block - 1];
  if (c.acae_latent_channels >= replay_channels)
    key_error("acae.latent_channels", lines,
              "must be smaller than the " + std::to_string(replay_channels) + " channels at net.replay_block");
  if (!(c.train_lr > 0)) key_error("train.lr", lines, "must be positive");
  if (!(c.acae_lr > 0)) key_error("acae.lr", lines, "must be positive");
  if (!(c.online_lr > 0)) key_error("online.lr", lines, "must be positive");
  if (!(c.online_crop_min > 0 && c.online_crop_min <= c.online_crop_max && c.online_crop_max <= 1))
    key_error("online.crop_min", lines, "need 0 < online.crop_min <= online.crop_max <= 1");
  if (c.dataset_kind == "synthetic") {
    if (c.first_task_classes > c.synthetic_classes)
      key_error("split.first_task_classes", lines, "exceeds synthetic.classes");
    const std::size_t rest = c.synthetic_classes - c.first_task_classes;
    if (c.steps == 0 ? rest != 0 : rest % c.steps != 0)
      key_error("split.steps", lines,
                "must divide the " + std::to_string(rest) + " classes left after the first task");
    const std::size_t div = std::size_t{1} << std::min<std::size_t>(c.net_channels.size(), 30);
    if (c.synthetic_height % div != 0 || c.synthetic_width % div != 0)
      key_error("net.channels", lines, "image height and width must be divisible by 2^blocks");
  } else if (c.train_images.empty() || c.test_images.empty()) {
    key_error("dataset.train_images", lines, "dataset files are required for dataset.kind = " + c.dataset_kind);
  } else if (c.dataset_kind == "idx" && (c.train_labels.empty() || c.test_labels.empty())) {
    key_error("dataset.train_labels", lines, "idx datasets need label files");
  }
}

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::map<std::string, std::size_t> lines;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::Config, "line " + std::to_string(line_no) + ": expected key = value, got '" + line + "'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto& all = fields();
    auto it = std::find_if(all.begin(), all.end(), [&](const Field& f) { return f.key == key; });
    if (it == all.end()) fail(ErrorKind::Config, "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (lines.count(key))
      fail(ErrorKind::Config, key + " (line " + std::to_string(line_no) + "): duplicate key, first set on line " +
                                  std::to_string(lines[key]));
    try {
      it->set(config, value);
    } catch (const std::invalid_argument& e) {
      fail(ErrorKind::Config, key + " (line " + std::to_string(line_no) + "): " + e.what());
    }
    lines[key] = line_no;
  }
  validate_config(config, lines);
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

}  // namespace acrm
