#include <cmath>

#include "acrm/gradient_suite.hpp"
#include "acrm/layers.hpp"
#include "test_util.hpp"

using namespace acrm;
using testutil::randn;

namespace {

// six nested loops, double accumulation
std::vector<double> naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
                               std::size_t pad) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3), o = w.dim(0), k = w.dim(2);
  const std::size_t oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
  std::vector<double> y(n * o * oh * ow);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t f = 0; f < o; ++f)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double s = b[f];
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t u = 0; u < k; ++u)
              for (std::size_t v = 0; v < k; ++v) {
                const long r = static_cast<long>(i * stride + u) - static_cast<long>(pad);
                const long q = static_cast<long>(j * stride + v) - static_cast<long>(pad);
                if (r < 0 || q < 0 || r >= static_cast<long>(h) || q >= static_cast<long>(wd)) continue;
                s += static_cast<double>(x[((a * c + ch) * h + r) * wd + q]) * w[((f * c + ch) * k + u) * k + v];
              }
          y[((a * o + f) * oh + i) * ow + j] = s;
        }
  return y;
}

}  // namespace

TEST_CASE("conv2d with a scalar kernel multiplies") {
  const Tensor x({1, 1, 3, 3}, 1.0f);
  const Tensor w({1, 1, 1, 1}, 2.0f);
  const Tensor b({1}, 0.0f);
  const Tensor y = conv2d(x, w, b);
  CHECK(y.shape() == Shape{1, 1, 3, 3});
  for (float v : y.data()) CHECK(v == 2.0f);
}

TEST_CASE("conv2d with an identity-centred kernel and pad 1 returns the input") {
  const Tensor x = randn({2, 3, 5, 4}, 11);
  Tensor w({3, 3, 3, 3});
  for (std::size_t c = 0; c < 3; ++c) w[((c * 3 + c) * 3 + 1) * 3 + 1] = 1.0f;
  const Tensor y = conv2d(x, w, Tensor({3}), 1, 1);
  CHECK(y.same_values(x));
}

TEST_CASE("conv2d matches a six-loop oracle over 20 seeds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor x = randn({2, 3, 8, 8}, seed);
    const Tensor w = randn({4, 3, 3, 3}, seed + 1000);
    const Tensor b = randn({4}, seed + 2000);
    const std::size_t stride = seed % 3 == 2 ? 2 : 1, pad = seed % 2;
    if ((8 + 2 * pad - 3) % stride != 0) continue;
    const Tensor y = conv2d(x, w, b, stride, pad);
    CHECK(testutil::max_rel_diff(y.data(), naive_conv(x, w, b, stride, pad)) <= 1e-5);
  }
}

TEST_CASE("conv2d is pure") {
  const Tensor x = randn({2, 3, 8, 8}, 5), w = randn({4, 3, 3, 3}, 6), b = randn({4}, 7);
  CHECK(conv2d(x, w, b, 1, 1).same_values(conv2d(x, w, b, 1, 1)));
}

TEST_CASE("conv2d reports shape and geometry errors") {
  const Tensor x = randn({1, 3, 4, 4}, 1);
  CHECK(testutil::error_kind_of([&] { conv2d(x, Tensor({2, 2, 3, 3}), Tensor({2})); }) == ErrorKind::Dimension);
  CHECK(testutil::error_kind_of([&] { conv2d(x, Tensor({2, 3, 3, 3}), Tensor({3})); }) == ErrorKind::Dimension);
  // (4 - 3) / 2 is not an integer
  CHECK(testutil::error_kind_of([&] { conv2d(x, Tensor({2, 3, 3, 3}), Tensor({2}), 2, 0); }) == ErrorKind::Config);
  CHECK(testutil::error_kind_of([&] { conv2d(x, Tensor({2, 3, 5, 5}), Tensor({2})); }) == ErrorKind::Config);
}

TEST_CASE("relu forward and backward") {
  const Tensor x({3}, std::vector<float>{-1, 0, 2});
  CHECK(relu(x).same_values(Tensor({3}, std::vector<float>{0, 0, 2})));
  const Tensor neg({2, 2}, -1.0f);
  CHECK(relu(neg).same_values(Tensor({2, 2})));
  CHECK(relu_backward(neg, Tensor({2, 2}, 5.0f)).same_values(Tensor({2, 2})));
  // masked at exactly zero
  CHECK(relu_backward(x, Tensor({3}, 1.0f)).same_values(Tensor({3}, std::vector<float>{0, 0, 1})));
}

TEST_CASE("avgpool2 averages 2x2 patches") {
  const Tensor c({1, 2, 4, 6}, 3.25f);
  CHECK(avgpool2(c).same_values(Tensor({1, 2, 2, 3}, 3.25f)));
  const Tensor p({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  CHECK(avgpool2(p)[0] == 2.5f);
  CHECK(testutil::error_kind_of([] { avgpool2(Tensor({1, 1, 3, 4})); }) == ErrorKind::Config);
  const Tensor g = avgpool2_backward(Tensor({1, 1, 1, 1}, 1.0f));
  CHECK(g.same_values(Tensor({1, 1, 2, 2}, 0.25f)));
}

TEST_CASE("global average pool") {
  CHECK(global_avgpool(Tensor({2, 3, 4, 4}, -1.5f)).same_values(Tensor({2, 3}, -1.5f)));
  const Tensor single = randn({2, 5, 1, 1}, 3);
  CHECK(global_avgpool(single).same_values(single.reshaped({2, 5})));
}

TEST_CASE("linear layer") {
  const Tensor x = randn({3, 4}, 9);
  Tensor eye({4, 4});
  for (std::size_t i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0f;
  CHECK(linear(x, eye, Tensor({4})).same_values(x));
  const Tensor b({2}, std::vector<float>{0.5f, -2.0f});
  const Tensor y = linear(x, Tensor({2, 4}), b);
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(y[r * 2] == 0.5f);
    CHECK(y[r * 2 + 1] == -2.0f);
  }
  CHECK(testutil::error_kind_of([&] { linear(x, Tensor({2, 5}), b); }) == ErrorKind::Dimension);
}

TEST_CASE("linear matches a triple-loop oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor x = randn({5, 7}, seed), w = randn({3, 7}, seed + 50), b = randn({3}, seed + 90);
    std::vector<double> want(15);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 3; ++j) {
        double s = b[j];
        for (std::size_t t = 0; t < 7; ++t) s += static_cast<double>(x[i * 7 + t]) * w[j * 7 + t];
        want[i * 3 + j] = s;
      }
    CHECK(testutil::max_rel_diff(linear(x, w, b).data(), want) <= 1e-5);
  }
}

TEST_CASE("softmax cross-entropy values and errors") {
  const std::vector<int> labels{3, 7};
  CHECK(softmax_cross_entropy(Tensor({2, 10}), labels).loss == doctest::Approx(std::log(10.0)).epsilon(1e-9));
  Tensor confident({1, 10});
  confident[4] = 50.0f;
  CHECK(softmax_cross_entropy(confident, std::vector<int>{4}).loss < 1e-12);
  const auto lg = softmax_cross_entropy(Tensor({2, 10}), labels);
  CHECK(lg.grad[3] == doctest::Approx((0.1 - 1.0) / 2));
  CHECK(lg.grad[0] == doctest::Approx(0.1 / 2));
  CHECK(testutil::error_kind_of([] { softmax_cross_entropy(Tensor({1, 3}), std::vector<int>{3}); }) ==
        ErrorKind::Input);
  CHECK(testutil::error_kind_of([] { softmax_cross_entropy(Tensor({1, 3}), std::vector<int>{-1}); }) ==
        ErrorKind::Input);
}

TEST_CASE("mse loss is the mean over elements") {
  const Tensor a({2, 2}, std::vector<float>{1, 2, 3, 4}), b({2, 2}, std::vector<float>{1, 0, 3, 0});
  const auto lg = mse_loss(a, b);
  CHECK(lg.loss == doctest::Approx((4.0 + 16.0) / 4));
  CHECK(lg.grad[1] == doctest::Approx(2.0 * 2 / 4));
}

TEST_CASE("every layer's analytic gradient agrees with central differences") {
  for (const auto& name : gradient_check_names()) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      for (const auto& e : run_gradient_check(name, seed)) {
        INFO(name << " / " << e.tensor << " seed " << seed << " analytic " << e.result.analytic << " numeric "
                  << e.result.numeric);
        CHECK(e.result.checked > 0);
        CHECK(e.result.max_rel_error <= 1e-3);
      }
    }
  }
}

TEST_CASE("finite_diff_check flags a wrong gradient") {
  std::vector<float> p{0.5f, -1.0f};
  auto loss = [&] { return static_cast<double>(p[0]) * p[0] + 3.0 * p[1]; };
  const std::vector<float> good{1.0f, 3.0f}, bad{1.0f, 2.0f};
  CHECK(finite_diff_check(loss, p, good).max_rel_error < 1e-3);
  const auto r = finite_diff_check(loss, p, bad);
  CHECK(r.max_rel_error > 0.1);
  CHECK(r.worst_index == 1);
}
