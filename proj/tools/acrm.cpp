#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "acrm/checkpoint.hpp"
#include "acrm/config.hpp"
#include "acrm/engine.hpp"
#include "acrm/error.hpp"
#include "acrm/gradient_suite.hpp"
#include "acrm/metrics_io.hpp"
#include "acrm/reservoir.hpp"
#include "acrm/study.hpp"

using namespace acrm;
namespace fs = std::filesystem;

namespace {

// 0 = results only, 1 = summaries (default), 2 = every evaluation record
int verbosity() {
  const char* v = std::getenv("ACRM_VERBOSE");
  return v && *v ? std::atoi(v) : 1;
}

void note(const std::string& line) {
  if (verbosity() >= 1) std::cerr << line << "\n";
}

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;

  void add_to(CLI::App* cmd) {
    cmd->add_option("-c,--config", path, "key = value config file (defaults when omitted)");
    cmd->add_option("-s,--set", overrides, "override one key, e.g. --set pq.k=64")->take_all();
  }

  RunConfig load() const {
    std::string text;
    if (!path.empty()) {
      std::ifstream in(path);
      if (!in) fail(ErrorKind::Io, "cannot open config " + path);
      std::stringstream ss;
      ss << in.rdbuf();
      text = ss.str();
    }
    if (overrides.empty()) return parse_config(text);
    // overridden keys replace their file lines so the duplicate check stays strict
    std::vector<std::string> keys;
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) fail(ErrorKind::Config, "--set expects key=value, got '" + o + "'");
      std::string key = o.substr(0, eq);
      key.erase(key.find_last_not_of(" \t") + 1);
      keys.push_back(key);
    }
    std::istringstream in(text);
    std::string merged, line;
    while (std::getline(in, line)) {
      const std::string body = line.substr(0, line.find('#'));
      const auto eq = body.find('=');
      bool replaced = false;
      if (eq != std::string::npos) {
        std::string key = body.substr(0, eq);
        key.erase(0, key.find_first_not_of(" \t"));
        key.erase(key.find_last_not_of(" \t") + 1);
        for (const auto& k : keys) replaced |= k == key;
      }
      merged += (replaced ? "# " : "") + line + "\n";
    }
    for (const auto& o : overrides) merged += o + "\n";
    return parse_config(merged);
  }
};

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

MemoryInfo memory_of(const Reservoir& r) {
  MemoryInfo m;
  m.exemplar_count = r.capacity();
  m.shape = {r.shape().s, r.shape().h, r.shape().w};
  m.bytes = memory_bytes(m.exemplar_count, m.shape, 1);
  return m;
}

void print_record(const MetricRecord& r) {
  if (verbosity() < 2) return;
  std::cerr << "task " << r.task << " step " << r.step << " seen " << r.seen_classes << " top1 " << fmt(r.top1)
            << (r.top5 ? " top5 " + fmt(*r.top5) : "") << "\n";
}

void print_checksums(const char* label, const FrozenChecksums& c) {
  std::cout << label << " backbone=" << hex32(c.backbone) << " encoder=" << hex32(c.encoder)
            << " decoder=" << hex32(c.decoder) << " codebooks=" << hex32(c.codebooks) << "\n";
}

int cmd_init(const ConfigArgs& args, std::string checkpoint) {
  const RunConfig config = args.load();
  const PreparedData data = prepare_data(config);
  note("class_order " + join(data.stream.class_order) + " (dataset.order_seed = " + std::to_string(config.order_seed) +
       ")");
  InitReport report;
  const Engine engine = Engine::initialize(config, data, &report);
  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  if (checkpoint.empty()) checkpoint = (dir / "init.ckpt").string();
  save_checkpoint(engine, checkpoint);
  emit_metrics(engine.log(), memory_of(engine.reservoir()), dir);
  std::cout << "offline_final_loss " << fmt(report.offline.epoch_loss.back()) << "\n"
            << "acae_mse " << fmt(report.acae_initial_mse) << " -> " << fmt(report.acae_final_mse) << "\n"
            << "pq_mse " << fmt(report.pq_mse, 6) << "\n"
            << "task1_direct_accuracy " << fmt(report.task1_direct_accuracy) << "\n"
            << "task1_compressed_accuracy " << fmt(report.task1_compressed_accuracy) << "\n"
            << "reservoir " << engine.reservoir().size() << "/" << engine.reservoir().capacity() << "\n";
  print_checksums("frozen", engine.frozen_checksums());
  std::cout << "checkpoint " << checkpoint << "\n";
  return 0;
}

int cmd_stream(const std::string& in, std::string out, std::string out_dir, std::uint32_t stop_after) {
  Engine engine = load_checkpoint(in);
  const PreparedData data = prepare_data(engine.config());
  const fs::path dir = out_dir.empty() ? fs::path(engine.config().output_dir) : fs::path(out_dir);
  fs::create_directories(dir);
  if (engine.next_task() > data.stream.tasks.size()) note("stream already complete");
  engine.run_stream(data, print_record, stop_after);
  if (!(engine.frozen_checksums() == engine.baseline()))
    fail(ErrorKind::Contract, "frozen parameters changed during the stream");
  if (out.empty()) out = (dir / "stream.ckpt").string();
  save_checkpoint(engine, out);
  emit_metrics(engine.log(), memory_of(engine.reservoir()), dir);
  const auto& log = engine.log();
  std::cout << "steps " << engine.steps() << "\n"
            << "next_task " << engine.next_task() << "\n"
            << "aoc " << fmt(log.aoc()) << "\n"
            << "last " << fmt(log.last()) << "\n";
  print_checksums("frozen", engine.frozen_checksums());
  print_checksums("baseline", engine.baseline());
  std::cout << "checkpoint " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& in, const std::string& path) {
  const Engine engine = load_checkpoint(in);
  const PreparedData data = prepare_data(engine.config());
  const std::uint32_t task = engine.next_task() - 1;
  const auto seen = Engine::seen_classes(data.stream, task);
  const Dataset held = data.test.subset(data.test.indices_of(seen));
  if (held.size() == 0) fail(ErrorKind::Input, "no test samples for the seen classes");
  const std::string which = path.empty() ? engine.config().eval_path : path;
  const Tensor logits = which == "direct" ? engine.model().forward(held.images) : engine.compressed_logits(held.images);
  std::cout << "task " << task << "\nseen_classes " << seen.size() << "\npath " << which << "\n"
            << "top1 " << fmt(top_k_accuracy(logits, held.labels, 1)) << "\n";
  if (logits.dim(1) >= 5) std::cout << "top5 " << fmt(top_k_accuracy(logits, held.labels, 5)) << "\n";
  return 0;
}

std::vector<std::uint64_t> parse_shape(const std::string& text) {
  std::vector<std::uint64_t> dims;
  std::string cur;
  for (char ch : text + "x") {
    if (ch == 'x' || ch == 'X' || ch == ',' || ch == '*') {
      if (cur.empty()) fail(ErrorKind::Input, "bad shape '" + text + "'");
      std::size_t used = 0;
      unsigned long long v = 0;
      try {
        v = std::stoull(cur, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cur.size()) fail(ErrorKind::Input, "bad shape '" + text + "'");
      dims.push_back(v);
      cur.clear();
    } else if (ch != ' ') {
      cur += ch;
    }
  }
  return dims;
}

void print_budget(std::uint64_t count, const std::vector<std::uint64_t>& shape, std::uint64_t bpe) {
  const std::uint64_t bytes = memory_bytes(count, shape, bpe);
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
  std::cout << "exemplars=" << count << " shape=" << s << " bytes_per_element=" << bpe << " bytes=" << bytes
            << " mb=" << format_mb_exact(bytes) << " mb_2dp=" << format_mb_rounded(bytes, 2) << "\n";
}

int cmd_membudget(const ConfigArgs& args, std::uint64_t count, const std::string& shape, std::uint64_t bpe) {
  if (!shape.empty() || count) {
    if (shape.empty() || !count) fail(ErrorKind::Input, "--count and --shape go together");
    print_budget(count, parse_shape(shape), bpe);
    return 0;
  }
  const RunConfig c = args.load();
  std::uint64_t h = c.synthetic_height, w = c.synthetic_width, channels = c.synthetic_channels;
  if (c.dataset_kind != "synthetic") {
    const PreparedData d = prepare_data(c);
    channels = d.net.in_channels;
    h = d.net.height;
    w = d.net.width;
  }
  h >>= c.replay_block;
  w >>= c.replay_block;
  std::cout << "# quantized feature exemplars at block " << c.replay_block << "\n";
  print_budget(c.reservoir_capacity, {c.pq_s, h, w}, 1);
  std::cout << "# raw feature maps of the same count (float32)\n";
  print_budget(c.reservoir_capacity, {c.net_channels[c.replay_block - 1], h, w}, 4);
  std::cout << "# raw images of the same count (uint8)\n";
  print_budget(c.reservoir_capacity, {channels, h << c.replay_block, w << c.replay_block}, 1);
  return 0;
}

int cmd_frozen_study(const ConfigArgs& args, std::vector<std::size_t> blocks) {
  const RunConfig config = args.load();
  const PreparedData data = prepare_data(config);
  if (blocks.empty())
    for (std::size_t n = 0; n <= data.net.num_blocks(); ++n) blocks.push_back(n);
  const StudyResult r = frozen_backbone_study(config, data, blocks);
  std::cout << "task1_accuracy " << fmt(r.task1_accuracy) << "\n";
  for (const auto& p : r.points) std::cout << "frozen_blocks " << p.frozen_blocks << " accuracy " << fmt(p.accuracy) << "\n";
  return 0;
}

int cmd_gradcheck(const GradSuiteOptions& options, double tolerance) {
  const GradSuiteReport report = run_gradient_suite(options);
  std::size_t checked = 0, skipped = 0;
  for (const auto& e : report.entries) {
    checked += e.result.checked;
    skipped += e.result.skipped;
  }
  for (const auto& [name, err] : report.worst_by_check()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", err);
    std::cout << name << " " << buf << "\n";
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", report.max_error());
  std::cout << "max_rel_error " << buf << "\nentries_checked " << checked << "\nentries_skipped " << skipped << "\n";
  const bool ok = report.max_error() <= tolerance;
  std::cout << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? 0 : 1;
}

int cmd_keys() {
  for (const auto& k : config_keys()) std::cout << k.key << " = " << k.default_value << "  # " << k.doc << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ACAE-REMIND online continual learning"};
  app.require_subcommand(1);

  ConfigArgs init_cfg, budget_cfg, study_cfg;
  std::string init_ckpt;
  auto* init = app.add_subcommand("init", "train on task 1, fit the auto-encoder and quantizer, buffer task 1");
  init_cfg.add_to(init);
  init->add_option("-o,--checkpoint", init_ckpt, "output checkpoint (default <output.dir>/init.ckpt)");

  std::string stream_in, stream_out, stream_dir;
  std::uint32_t stop_after = 0;
  auto* stream = app.add_subcommand("stream", "run the online phase from a checkpoint");
  stream->add_option("checkpoint", stream_in, "checkpoint from init or an earlier stream")->required();
  stream->add_option("-o,--save", stream_out, "output checkpoint (default <dir>/stream.ckpt)");
  stream->add_option("-d,--output-dir", stream_dir, "metrics directory (default output.dir of the run)");
  stream->add_option("--stop-after-task", stop_after, "stop once this task is done (0 = run to the end)");

  std::string eval_in, eval_path;
  auto* eval = app.add_subcommand("eval", "task-agnostic accuracy over the classes seen so far");
  eval->add_option("checkpoint", eval_in)->required();
  eval->add_option("--path", eval_path, "compressed | direct (default eval.path of the run)")
      ->check(CLI::IsMember({"compressed", "direct"}));

  std::uint64_t count = 0, bpe = 1;
  std::string shape;
  auto* budget = app.add_subcommand("membudget", "exemplar memory accounting");
  budget_cfg.add_to(budget);
  budget->add_option("--count", count, "number of stored exemplars");
  budget->add_option("--shape", shape, "exemplar shape, e.g. 8x7x7");
  budget->add_option("--bytes-per-element", bpe, "bytes per stored element")->check(CLI::PositiveNumber);

  std::vector<std::size_t> blocks;
  auto* study = app.add_subcommand("frozen-study", "accuracy after joint training with the first n blocks frozen");
  study_cfg.add_to(study);
  study->add_option("--blocks", blocks, "frozen block counts to evaluate (default 0..B)")->delimiter(',');

  GradSuiteOptions grad;
  double tolerance = 1e-3;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference checks of every layer and loss");
  gradcheck->add_option("--seeds", grad.seeds, "random seeds per check");
  gradcheck->add_option("--base-seed", grad.base_seed, "first seed");
  gradcheck->add_option("--max-entries", grad.max_entries, "entries per tensor (0 = all)");
  gradcheck->add_option("--tolerance", tolerance, "largest accepted relative error");

  auto* keys = app.add_subcommand("keys", "list config keys with defaults");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*init) return cmd_init(init_cfg, init_ckpt);
    if (*stream) return cmd_stream(stream_in, stream_out, stream_dir, stop_after);
    if (*eval) return cmd_eval(eval_in, eval_path);
    if (*budget) return cmd_membudget(budget_cfg, count, shape, bpe);
    if (*study) return cmd_frozen_study(study_cfg, blocks);
    if (*gradcheck) return cmd_gradcheck(grad, tolerance);
    if (*keys) return cmd_keys();
  } catch (const Error& e) {
    std::cerr << "error[" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
