#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "forgekit/encoder.hpp"
#include "test_util.hpp"

using namespace fk;
using fktest::random_tensor;

TEST_CASE("encoder config validation") {
  std::mt19937_64 rng(1);
  CHECK_NOTHROW(Encoder::make(4, 8, 2, 4, 64, 8, rng));
  // backbone channels not divisible by depth
  CHECK_THROWS(Encoder::make(4, 8, 2, 4, 62, 8, rng));
  CHECK_THROWS(Encoder::make(4, 8, 3, 4, 64, 8, rng));
  CHECK_THROWS(Encoder::make(4, 8, 1, 4, 64, 8, rng));
}

TEST_CASE("encoder shape contract at two strides") {
  std::mt19937_64 rng(2);
  // toy: 32x32 inputs, stride 2, depth 16 -> 16^3 grid
  Encoder toy = Encoder::make(4, 8, 2, 16, 64, 8, rng);
  Tensor img = random_tensor({4, 32, 32}, rng, 0, 1);
  Tensor grid = toy(img);
  CHECK(grid.shape() == Shape{8, 16, 16, 16});

  // stride-8 interface on a small image
  Encoder s8 = Encoder::make(4, 4, 8, 4, 32, 6, rng);
  Tensor img2 = random_tensor({4, 32, 32}, rng, 0, 1);
  CHECK(s8(img2).shape() == Shape{6, 4, 4, 4});

  Tensor wrong = random_tensor({4, 16, 32}, rng, 0, 1);
  CHECK_THROWS(toy(wrong));
}

TEST_CASE("deprojection index law via a planted one-hot feature") {
  // 2D channel z*cq + q must land at voxel (z,u,v), channel q
  const int d = 3, cq = 4, h = 5, w = 5;
  Tensor z2d = Tensor::zeros({d * cq, h, w});
  const int z = 2, q = 1, u = 3, v = 1;
  z2d.data()[((z * cq + q) * h + u) * w + v] = 7.5;
  Tensor vox = Encoder::deproject(z2d, d);
  CHECK(vox.shape() == Shape{cq, d, h, w});
  for (int qq = 0; qq < cq; ++qq)
    for (int zz = 0; zz < d; ++zz)
      for (int uu = 0; uu < h; ++uu)
        for (int vv = 0; vv < w; ++vv) {
          const real got = vox.data()[((qq * d + zz) * h + uu) * w + vv];
          const real want =
              (qq == q && zz == z && uu == u && vv == v) ? 7.5 : 0.0;
          CHECK(got == want);
        }
}

TEST_CASE("encoder determinism") {
  std::mt19937_64 rng(3);
  Encoder e = Encoder::make(4, 8, 2, 8, 32, 8, rng);
  Tensor img = random_tensor({4, 16, 16}, rng, 0, 1);
  Tensor a = e(img);
  Tensor b = e(img);
  CHECK(a.values() == b.values());
}

TEST_CASE("convolutional locality: left-half edits barely move right voxels") {
  std::mt19937_64 rng(4);
  Encoder e = Encoder::make(4, 8, 2, 16, 64, 8, rng);
  Tensor img = random_tensor({4, 32, 32}, rng, 0, 1);
  Tensor zeroed = Tensor::from_data(img.shape(), img.values());
  for (int c = 0; c < 4; ++c)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 16; ++x) zeroed.data()[(c * 32 + y) * 32 + x] = 0;
  Tensor a = e(img);
  Tensor b = e(zeroed);
  // right-quarter voxels: w index >= 12 of 16
  real num = 0, den = 0;
  const int c = 8, d = 16;
  for (int cc = 0; cc < c; ++cc)
    for (int z = 0; z < d; ++z)
      for (int y = 0; y < d; ++y)
        for (int x = 12; x < d; ++x) {
          const int64_t i = ((static_cast<int64_t>(cc) * d + z) * d + y) * d + x;
          const real diff = a.data()[i] - b.data()[i];
          num += diff * diff;
          den += a.data()[i] * a.data()[i];
        }
  CHECK(std::sqrt(num) < 0.10 * std::sqrt(den));
}

TEST_CASE("encoder gradients flow to all parameters") {
  std::mt19937_64 rng(5);
  Encoder e = Encoder::make(4, 4, 2, 4, 8, 4, rng);
  ParamMap params;
  e.register_params(params, "enc");
  for (auto& [name, p] : params) p.set_requires_grad(true);
  Tensor img = random_tensor({4, 8, 8}, rng, 0, 1);
  Tensor loss = sum(pow2(e(img)));
  backward(loss);
  for (auto& [name, p] : params) {
    CHECK(p.grad().size() == p.values().size());
    real g = 0;
    for (real v : p.grad()) g += v * v;
    CHECK(g > 0);
  }
}
