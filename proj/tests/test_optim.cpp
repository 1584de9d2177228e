#include <cmath>

#include "acrm/optim.hpp"
#include "test_util.hpp"

using namespace acrm;

namespace {

Tensor scalar(float v) { return Tensor({1}, v); }

}  // namespace

TEST_CASE("sgd with zero gradient and zero velocity leaves parameters bit-identical") {
  Tensor p = testutil::randn({3, 4}, 1);
  const Tensor before = p;
  p.zero_grad();
  auto state = OptimState::sgd(0.1, 0.9);
  std::vector<Tensor*> params{&p};
  sgd_step(params, state);
  CHECK(p.same_values(before));
  CHECK(state.step == 1);
}

TEST_CASE("sgd without momentum is a plain gradient step") {
  Tensor p = testutil::randn({5}, 2);
  const Tensor g = testutil::randn({5}, 3);
  const Tensor before = p;
  std::copy(g.data().begin(), g.data().end(), p.grad().begin());
  auto state = OptimState::sgd(0.1, 0.0);
  std::vector<Tensor*> params{&p};
  sgd_step(params, state);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(p[i] == static_cast<float>(static_cast<double>(before[i]) - 0.1 * static_cast<double>(g[i])));
}

TEST_CASE("sgd with momentum on p^2 follows the scalar recurrence") {
  Tensor p = scalar(1.0f);
  auto state = OptimState::sgd(0.1, 0.9);
  std::vector<Tensor*> params{&p};
  double q = 1.0, v = 0.0;
  for (int i = 0; i < 50; ++i) {
    p.grad()[0] = 2.0f * p[0];
    sgd_step(params, state);
    v = 0.9 * v + 2.0 * q;
    q -= 0.1 * v;
  }
  CHECK(std::abs(p[0]) < 0.05);
  CHECK(p[0] == doctest::Approx(q).epsilon(1e-4));
  CHECK(state.step == 50);
}

TEST_CASE("adam with zero gradient from zero moments leaves parameters bit-identical") {
  Tensor p = testutil::randn({6}, 4);
  const Tensor before = p;
  p.zero_grad();
  auto state = OptimState::adam(0.1);
  std::vector<Tensor*> params{&p};
  adam_step(params, state);
  CHECK(p.same_values(before));
}

TEST_CASE("adam's first step moves each parameter by about the learning rate") {
  Tensor p({3}, 0.0f);
  p.grad()[0] = 0.5f;
  p.grad()[1] = -20.0f;
  p.grad()[2] = 1e-3f;
  auto state = OptimState::adam(0.01);
  std::vector<Tensor*> params{&p};
  adam_step(params, state);
  CHECK(p[0] == doctest::Approx(-0.01).epsilon(1e-4));
  CHECK(p[1] == doctest::Approx(0.01).epsilon(1e-4));
  CHECK(p[2] == doctest::Approx(-0.01).epsilon(1e-3));
}

TEST_CASE("adam on (p-3)^2 follows the scalar recurrence") {
  Tensor p = scalar(0.0f);
  auto state = OptimState::adam(0.1);
  std::vector<Tensor*> params{&p};
  double q = 0.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 200; ++t) {
    p.grad()[0] = 2.0f * (p[0] - 3.0f);
    adam_step(params, state);
    const double g = 2.0 * (q - 3.0);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    q -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
  }
  CHECK(std::abs(p[0] - 3.0f) < 0.1);
  CHECK(p[0] == doctest::Approx(q).epsilon(1e-3));
}

TEST_CASE("optimizer rejects moment buffers that no longer match") {
  Tensor a({4}), b({2});
  a.zero_grad();
  auto state = OptimState::sgd(0.1, 0.9);
  std::vector<Tensor*> one{&a};
  sgd_step(one, state);
  b.zero_grad();
  std::vector<Tensor*> other{&b};
  CHECK(testutil::error_kind_of([&] { sgd_step(other, state); }) == ErrorKind::Dimension);
  auto adam = OptimState::adam(0.1);
  adam_step(one, adam);
  CHECK(testutil::error_kind_of([&] { adam_step(other, adam); }) == ErrorKind::Dimension);
}

TEST_CASE("step counter increases by one per step") {
  Tensor a({2});
  a.zero_grad();
  auto state = OptimState::adam(0.1);
  std::vector<Tensor*> params{&a};
  for (int i = 1; i <= 5; ++i) {
    optimizer_step(params, state);
    CHECK(state.step == static_cast<std::uint64_t>(i));
  }
}
