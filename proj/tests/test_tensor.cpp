#include <algorithm>
#include <cstring>

#include "acrm/kernels.hpp"
#include "test_util.hpp"

using namespace acrm;
using testutil::randn;

TEST_CASE("tensor construction checks shape and length") {
  Tensor t({2, 3}, 1.5f);
  CHECK(t.numel() == 6);
  CHECK(t.rank() == 2);
  CHECK(t[5] == 1.5f);
  CHECK(testutil::error_kind_of([] { Tensor({2, 0}); }) == ErrorKind::Dimension);
  CHECK(testutil::error_kind_of([] { Tensor({2, 2}, std::vector<float>(3)); }) == ErrorKind::Dimension);
}

TEST_CASE("gradient buffer is lazily allocated with matching length") {
  Tensor t({4, 2});
  CHECK_FALSE(t.has_grad());
  auto g = t.grad();
  CHECK(g.size() == t.numel());
  for (float v : g) CHECK(v == 0.0f);
  g[3] = 2.0f;
  t.zero_grad();
  CHECK(t.grad()[3] == 0.0f);
  t.drop_grad();
  CHECK_FALSE(t.has_grad());
}

TEST_CASE("reshape keeps data and rejects a different element count") {
  Tensor t({2, 6}, std::vector<float>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  Tensor r = t.reshaped({3, 4});
  CHECK(std::equal(r.data().begin(), r.data().end(), t.data().begin()));
  CHECK(r.shape() == Shape{3, 4});
  CHECK(testutil::error_kind_of([&] { t.reshape({5}); }) == ErrorKind::Dimension);
}

TEST_CASE("slice and stack are inverse along the leading dimension") {
  const Tensor t = randn({3, 2, 2}, 4);
  std::vector<Tensor> parts{t.slice(0), t.slice(1), t.slice(2)};
  CHECK(parts[1].shape() == Shape{1, 2, 2});
  const Tensor back = Tensor::stack(parts);
  CHECK(back.shape() == t.shape());
  CHECK(back.same_values(t));
}

TEST_CASE("crc32 matches the standard check value") {
  const char* s = "123456789";
  Crc32 c;
  c.update(std::span(reinterpret_cast<const std::uint8_t*>(s), 9));
  CHECK(c.value() == 0xCBF43926u);
}

namespace {

kernels::ConvGeometry geometry(std::size_t n, std::size_t c, std::size_t h, std::size_t w, std::size_t o,
                               std::size_t k, std::size_t stride, std::size_t pad) {
  kernels::ConvGeometry g{n, c, h, w, o, k, stride, pad, 0, 0};
  g.out_h = (h + 2 * pad - k) / stride + 1;
  g.out_w = (w + 2 * pad - k) / stride + 1;
  return g;
}

bool bit_equal(std::span<const float> a, std::span<const float> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("parallel kernels are bit-identical to the serial reference for any thread count") {
  const int saved = kernels::max_threads();
  for (int threads : {1, 2, 3, 4}) {
    kernels::set_threads(threads);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto g = geometry(3, 4, 9, 7, 5, 3, 1 + seed % 2, seed % 2);
      const Tensor x = randn({g.input_size()}, seed);
      const Tensor w = randn({g.weight_size()}, seed + 100);
      const Tensor b = randn({g.out_channels}, seed + 200);
      const Tensor dy = randn({g.output_size()}, seed + 300);
      std::vector<float> y1(g.output_size()), y2(g.output_size());
      kernels::conv2d_forward(g, x.data(), w.data(), b.data(), y1);
      kernels::reference::conv2d_forward(g, x.data(), w.data(), b.data(), y2);
      CHECK(bit_equal(y1, y2));

      std::vector<float> dx1(g.input_size(), 7.0f), dx2(g.input_size(), -3.0f);
      kernels::conv2d_backward_input(g, w.data(), dy.data(), dx1);
      kernels::reference::conv2d_backward_input(g, w.data(), dy.data(), dx2);
      CHECK(bit_equal(dx1, dx2));

      std::vector<float> dw1(g.weight_size(), 0.5f), dw2(g.weight_size(), 0.5f), db1(g.out_channels, 1.0f),
          db2(g.out_channels, 1.0f);
      kernels::conv2d_backward_params(g, x.data(), dy.data(), dw1, db1);
      kernels::reference::conv2d_backward_params(g, x.data(), dy.data(), dw2, db2);
      CHECK(bit_equal(dw1, dw2));
      CHECK(bit_equal(db1, db2));

      const std::size_t n = 6, in = 11, out = 4;
      const Tensor lx = randn({n * in}, seed + 400), lw = randn({out * in}, seed + 500), lb = randn({out}, seed + 600);
      const Tensor ldy = randn({n * out}, seed + 700);
      std::vector<float> ly1(n * out), ly2(n * out), ldx1(n * in), ldx2(n * in);
      kernels::linear_forward(n, in, out, lx.data(), lw.data(), lb.data(), ly1);
      kernels::reference::linear_forward(n, in, out, lx.data(), lw.data(), lb.data(), ly2);
      CHECK(bit_equal(ly1, ly2));
      kernels::linear_backward_input(n, in, out, lw.data(), ldy.data(), ldx1);
      kernels::reference::linear_backward_input(n, in, out, lw.data(), ldy.data(), ldx2);
      CHECK(bit_equal(ldx1, ldx2));
      std::vector<float> ldw1(out * in, 0.25f), ldw2(out * in, 0.25f), ldb1(out), ldb2(out);
      kernels::linear_backward_params(n, in, out, lx.data(), ldy.data(), ldw1, ldb1);
      kernels::reference::linear_backward_params(n, in, out, lx.data(), ldy.data(), ldw2, ldb2);
      CHECK(bit_equal(ldw1, ldw2));
      CHECK(bit_equal(ldb1, ldb2));

      const std::size_t pts = 50, dim = 3, k = 7;
      const Tensor p = randn({pts * dim}, seed + 800), cen = randn({k * dim}, seed + 900);
      std::vector<std::uint32_t> a1(pts), a2(pts);
      std::vector<double> d1(pts), d2(pts);
      kernels::nearest_centroid(pts, dim, p.data(), k, cen.data(), a1, d1);
      kernels::reference::nearest_centroid(pts, dim, p.data(), k, cen.data(), a2, d2);
      CHECK(a1 == a2);
      CHECK(d1 == d2);
    }
  }
  kernels::set_threads(saved);
}
