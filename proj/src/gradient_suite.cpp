#include "acrm/gradient_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "acrm/acae.hpp"
#include "acrm/error.hpp"
#include "acrm/layers.hpp"
#include "acrm/model.hpp"
#include "acrm/rng.hpp"

namespace acrm {

namespace {

// Double-precision forward evaluator used as the numeric side of every check.
struct DMap {
  Shape shape;
  std::vector<double> v;
};

struct Fingerprint {
  std::uint64_t h = 1469598103934665603ull;
  void bit(bool b) { h = (h ^ (b ? 1u : 0u)) * 1099511628211ull; }
};

DMap to_double(const Tensor& t) { return {t.shape(), std::vector<double>(t.data().begin(), t.data().end())}; }

DMap d_conv(const DMap& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad) {
  const std::size_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3];
  const std::size_t o = w.dim(0), k = w.dim(2);
  const std::size_t oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
  DMap y{{n, o, oh, ow}, std::vector<double>(n * o * oh * ow)};
  for (std::size_t in = 0; in < n; ++in)
    for (std::size_t io = 0; io < o; ++io)
      for (std::size_t yh = 0; yh < oh; ++yh)
        for (std::size_t yw = 0; yw < ow; ++yw) {
          double acc = b[io];
          for (std::size_t ic = 0; ic < c; ++ic)
            for (std::size_t kh = 0; kh < k; ++kh)
              for (std::size_t kw = 0; kw < k; ++kw) {
                const auto ih = static_cast<std::ptrdiff_t>(yh * stride + kh) - static_cast<std::ptrdiff_t>(pad);
                const auto iw = static_cast<std::ptrdiff_t>(yw * stride + kw) - static_cast<std::ptrdiff_t>(pad);
                if (ih < 0 || iw < 0 || ih >= static_cast<std::ptrdiff_t>(h) || iw >= static_cast<std::ptrdiff_t>(wd))
                  continue;
                acc += x.v[((in * c + ic) * h + static_cast<std::size_t>(ih)) * wd + static_cast<std::size_t>(iw)] *
                       w[((io * c + ic) * k + kh) * k + kw];
              }
          y.v[((in * o + io) * oh + yh) * ow + yw] = acc;
        }
  return y;
}

DMap d_relu(DMap x, Fingerprint* fp) {
  for (auto& v : x.v) {
    if (fp) fp->bit(v > 0.0);
    v = std::max(v, 0.0);
  }
  return x;
}

DMap d_pool2(const DMap& x) {
  const std::size_t n = x.shape[0], c = x.shape[1], h = x.shape[2] / 2, w = x.shape[3] / 2;
  DMap y{{n, c, h, w}, std::vector<double>(n * c * h * w)};
  for (std::size_t p = 0; p < n * c; ++p)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        const double* src = x.v.data() + p * 4 * h * w;
        const std::size_t row = 2 * w;
        y.v[(p * h + i) * w + j] =
            (src[2 * i * row + 2 * j] + src[2 * i * row + 2 * j + 1] + src[(2 * i + 1) * row + 2 * j] +
             src[(2 * i + 1) * row + 2 * j + 1]) / 4.0;
      }
  return y;
}

DMap d_gap(const DMap& x) {
  const std::size_t n = x.shape[0], c = x.shape[1], hw = x.shape[2] * x.shape[3];
  DMap y{{n, c}, std::vector<double>(n * c)};
  for (std::size_t p = 0; p < n * c; ++p) {
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) s += x.v[p * hw + i];
    y.v[p] = s / static_cast<double>(hw);
  }
  return y;
}

DMap d_linear(const DMap& x, const Tensor& w, const Tensor& b) {
  const std::size_t n = x.shape[0], d = x.shape[1], c = w.dim(0);
  DMap y{{n, c}, std::vector<double>(n * c)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      double acc = b[j];
      for (std::size_t t = 0; t < d; ++t) acc += x.v[i * d + t] * w[j * d + t];
      y.v[i * c + j] = acc;
    }
  return y;
}

double d_cross_entropy(const DMap& logits, std::span<const int> labels) {
  const std::size_t n = logits.shape[0], c = logits.shape[1];
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = logits.v.data() + i * c;
    const double m = *std::max_element(row, row + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(row[j] - m);
    total += m + std::log(s) - row[labels[i]];
  }
  return total / static_cast<double>(n);
}

double d_mse(const DMap& a, const DMap& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) s += (a.v[i] - b.v[i]) * (a.v[i] - b.v[i]);
  return s / static_cast<double>(a.v.size());
}

double d_dot(const DMap& y, const std::vector<double>& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) s += y.v[i] * r[i];
  return s;
}

// Blocks [first, B), global pool and classifier.
DMap d_network_from(const SplitModel& model, DMap x, std::size_t first, Fingerprint* fp) {
  const auto& blocks = model.blocks();
  for (std::size_t i = first; i < blocks.size(); ++i) {
    x = d_relu(d_conv(x, blocks[i].conv1_w, blocks[i].conv1_b, 1, 1), fp);
    x = d_relu(d_conv(x, blocks[i].conv2_w, blocks[i].conv2_b, 1, 1), fp);
    x = d_pool2(x);
  }
  return d_linear(d_gap(x), model.classifier_w(), model.classifier_b());
}

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<float>(scale * rng.normal());
  return t;
}

std::vector<double> random_weights(std::size_t n, Rng& rng) {
  std::vector<double> r(n);
  for (auto& v : r) v = rng.normal();
  return r;
}

std::vector<float> to_floats(const std::vector<double>& v) { return std::vector<float>(v.begin(), v.end()); }

double tensor_floor(std::span<const float> analytic, double relative) {
  double m = 0.0;
  for (float a : analytic) m = std::max(m, static_cast<double>(std::abs(a)));
  return std::max(relative * m, 1e-12);
}

struct Checker {
  std::string check;
  std::uint64_t seed;
  const GradSuiteOptions& options;
  std::vector<GradSuiteEntry> entries;

  void run(const std::string& tensor, std::span<float> values, std::span<const float> analytic,
           const std::function<double()>& loss, const std::function<std::uint64_t()>& regime = {}) {
    const std::vector<float> grad(analytic.begin(), analytic.end());
    GradSuiteEntry e{check, tensor, seed, {}};
    e.result = finite_diff_check(loss, values, grad, options.eps, options.max_entries,
                                 tensor_floor(grad, options.relative_floor), regime);
    entries.push_back(std::move(e));
  }
};

SplitModel small_model(std::uint64_t seed, std::size_t replay_block) {
  NetConfig cfg;
  cfg.in_channels = 2;
  cfg.height = 8;
  cfg.width = 8;
  cfg.channels = {4, 6};
  cfg.num_classes = 5;
  cfg.replay_block = replay_block;
  auto model = SplitModel::build(cfg, seed);
  // nonzero biases so the checks exercise them
  Rng rng(derive_seed(seed, 77));
  for (auto* p : model.all_params())
    if (p->rank() == 1)
      for (auto& v : p->data()) v = static_cast<float>(0.1 * rng.normal());
  return model;
}

std::vector<int> random_labels(std::size_t n, std::size_t classes, Rng& rng) {
  std::vector<int> labels(n);
  for (auto& l : labels) l = static_cast<int>(rng.uniform_index(classes));
  return labels;
}

void check_conv(Checker& ck, Rng& rng, Shape x_shape, std::size_t out, std::size_t k, std::size_t stride,
                std::size_t pad) {
  Tensor x = random_tensor(x_shape, rng);
  Tensor w = random_tensor({out, x_shape[1], k, k}, rng, 0.5);
  Tensor b = random_tensor({out}, rng, 0.5);
  const Tensor y = conv2d(x, w, b, stride, pad);
  const auto r = random_weights(y.numel(), rng);
  const Tensor dy(y.shape(), to_floats(r));
  const Tensor dx = conv2d_backward_input(x.shape(), w, dy, stride, pad);
  conv2d_backward_params(x, dy, stride, pad, w, b);
  const std::vector<float> gw(w.grad().begin(), w.grad().end()), gb(b.grad().begin(), b.grad().end());
  auto loss = [&] { return d_dot(d_conv(to_double(x), w, b, stride, pad), r); };
  ck.run("input", x.data(), dx.data(), loss);
  ck.run("weight", w.data(), gw, loss);
  ck.run("bias", b.data(), gb, loss);
}

std::vector<GradSuiteEntry> run_check(const std::string& check, std::uint64_t seed, const GradSuiteOptions& options) {
  Checker ck{check, seed, options, {}};
  std::uint64_t tag = 0;
  for (char c : check) tag = tag * 131 + static_cast<unsigned char>(c);
  Rng rng(derive_seed(seed, tag));
  if (check == "conv2d") {
    check_conv(ck, rng, {2, 3, 6, 6}, 4, 3, 1, 1);
  } else if (check == "conv2d_strided") {
    check_conv(ck, rng, {1, 2, 7, 7}, 3, 3, 2, 1);
  } else if (check == "relu") {
    Tensor x({2, 3, 4, 4});
    for (auto& v : x.data()) v = static_cast<float>((rng.coin() ? 1.0 : -1.0) * rng.uniform(0.1, 1.0));
    const auto r = random_weights(x.numel(), rng);
    const Tensor dx = relu_backward(x, Tensor(x.shape(), to_floats(r)));
    ck.run("input", x.data(), dx.data(), [&] { return d_dot(d_relu(to_double(x), nullptr), r); });
  } else if (check == "avgpool2") {
    Tensor x = random_tensor({2, 3, 4, 6}, rng);
    const auto r = random_weights(x.numel() / 4, rng);
    const Tensor dx = avgpool2_backward(Tensor({2, 3, 2, 3}, to_floats(r)));
    ck.run("input", x.data(), dx.data(), [&] { return d_dot(d_pool2(to_double(x)), r); });
  } else if (check == "global_avgpool") {
    Tensor x = random_tensor({2, 3, 4, 4}, rng);
    const auto r = random_weights(6, rng);
    const Tensor dx = global_avgpool_backward(x.shape(), Tensor({2, 3}, to_floats(r)));
    ck.run("input", x.data(), dx.data(), [&] { return d_dot(d_gap(to_double(x)), r); });
  } else if (check == "linear") {
    Tensor x = random_tensor({4, 5}, rng);
    Tensor w = random_tensor({3, 5}, rng, 0.5);
    Tensor b = random_tensor({3}, rng, 0.5);
    const auto r = random_weights(12, rng);
    const Tensor dy({4, 3}, to_floats(r));
    const Tensor dx = linear_backward_input(w, dy);
    linear_backward_params(x, dy, w, b);
    const std::vector<float> gw(w.grad().begin(), w.grad().end()), gb(b.grad().begin(), b.grad().end());
    auto loss = [&] { return d_dot(d_linear(to_double(x), w, b), r); };
    ck.run("input", x.data(), dx.data(), loss);
    ck.run("weight", w.data(), gw, loss);
    ck.run("bias", b.data(), gb, loss);
  } else if (check == "softmax_cross_entropy") {
    Tensor logits = random_tensor({4, 6}, rng, 2.0);
    const auto labels = random_labels(4, 6, rng);
    const LossGrad lg = softmax_cross_entropy(logits, labels);
    ck.run("logits", logits.data(), lg.grad.data(), [&] { return d_cross_entropy(to_double(logits), labels); });
  } else if (check == "mse") {
    Tensor pred = random_tensor({2, 3, 4}, rng);
    const Tensor target = random_tensor({2, 3, 4}, rng);
    const LossGrad lg = mse_loss(pred, target);
    ck.run("prediction", pred.data(), lg.grad.data(), [&] { return d_mse(to_double(pred), to_double(target)); });
  } else if (check == "network_cross_entropy") {
    SplitModel model = small_model(seed, 1);
    const Tensor x = random_tensor({3, 2, 8, 8}, rng);
    const auto labels = random_labels(3, 5, rng);
    ForwardTrace trace;
    const Tensor logits = model.forward_from(x, 0, trace);
    const LossGrad lg = softmax_cross_entropy(logits, labels);
    auto params = model.named_params();
    for (auto& p : params) p.tensor->zero_grad();
    model.backward(trace, lg.grad, {});
    Fingerprint fp;
    auto loss = [&] {
      fp = {};
      return d_cross_entropy(d_network_from(model, to_double(x), 0, &fp), labels);
    };
    for (auto& p : params) {
      const std::vector<float> g(p.tensor->grad().begin(), p.tensor->grad().end());
      ck.run(p.name, p.tensor->data(), g, loss, [&] { return fp.h; });
    }
  } else if (check == "acae_loss" || check == "acae_loss_mse_only") {
    const bool use_ce = check == "acae_loss";
    // split after the last block: the head is pool + classifier, so the only
    // kinks are the encoder's
    SplitModel model = small_model(seed, 2);
    model.set_backbone_frozen(true);
    model.set_head_frozen(true);
    const auto labels = random_labels(3, 5, rng);
    AcaeParams acae = AcaeParams::build(model.config().channels[1], 2, derive_seed(seed, 5));
    // redraw inputs and biases until no encoder unit sits within reach of its kink
    Tensor z;
    for (int attempt = 0;; ++attempt) {
      for (auto* p : {&acae.enc_b, &acae.dec_b})
        for (auto& v : p->data()) v = static_cast<float>(0.1 * rng.normal());
      z = model.forward_backbone(random_tensor({3, 2, 8, 8}, rng));
      const Tensor pre = conv2d(z, acae.enc_w, acae.enc_b);
      const bool clear = std::all_of(pre.data().begin(), pre.data().end(), [](float v) { return std::abs(v) > 1e-2f; });
      if (clear || attempt == 200) break;
    }
    for (auto* p : acae.params()) p->zero_grad();
    acae_loss_backward(z, labels, acae, model, use_ce);
    const DMap zd = to_double(z);
    Fingerprint fp;
    auto loss = [&] {
      fp = {};
      const DMap u = d_relu(d_conv(zd, acae.enc_w, acae.enc_b, 1, 0), &fp);
      const DMap zhat = d_conv(u, acae.dec_w, acae.dec_b, 1, 0);
      double total = d_mse(zhat, zd);
      if (use_ce) total += d_cross_entropy(d_network_from(model, zhat, model.split(), &fp), labels);
      return total;
    };
    const char* names[] = {"encoder.weight", "encoder.bias", "decoder.weight", "decoder.bias"};
    auto params = acae.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const std::vector<float> g(params[i]->grad().begin(), params[i]->grad().end());
      ck.run(names[i], params[i]->data(), g, loss, [&] { return fp.h; });
    }
  } else {
    fail(ErrorKind::Config, "unknown gradient check '" + check + "'");
  }
  return ck.entries;
}

}  // namespace

double GradSuiteReport::max_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.result.max_rel_error);
  return m;
}

std::vector<std::pair<std::string, double>> GradSuiteReport::worst_by_check() const {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& e : entries) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& p) { return p.first == e.check; });
    if (it == out.end())
      out.emplace_back(e.check, e.result.max_rel_error);
    else
      it->second = std::max(it->second, e.result.max_rel_error);
  }
  return out;
}

std::vector<std::string> gradient_check_names() {
  return {"conv2d", "conv2d_strided", "relu", "avgpool2", "global_avgpool", "linear", "softmax_cross_entropy",
          "mse", "network_cross_entropy", "acae_loss", "acae_loss_mse_only"};
}

std::vector<GradSuiteEntry> run_gradient_check(const std::string& check, std::uint64_t seed,
                                               const GradSuiteOptions& options) {
  return run_check(check, seed, options);
}

GradSuiteReport run_gradient_suite(const GradSuiteOptions& options) {
  GradSuiteReport report;
  for (const auto& name : gradient_check_names())
    for (std::size_t s = 0; s < options.seeds; ++s) {
      auto entries = run_check(name, options.base_seed + s, options);
      report.entries.insert(report.entries.end(), entries.begin(), entries.end());
    }
  return report;
}

}  // namespace acrm
