#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "forgekit/volume.hpp"
#include "test_util.hpp"

using namespace fk;
using fktest::grad_check;
using fktest::random_tensor;

namespace {

NeuralVolume make_volume(int d, int f, real density_logit) {
  NeuralVolume v;
  v.density = Tensor::full({1, d, d, d}, density_logit);
  v.features = Tensor::full({f, d, d, d}, 0.0);
  return v;
}

// smooth low-frequency density logits so sample-count studies converge
NeuralVolume smooth_random_volume(int d, int f, std::mt19937_64& rng) {
  NeuralVolume v = make_volume(d, f, 0.0);
  std::uniform_real_distribution<real> ph(0, 2 * M_PI);
  const real p1 = ph(rng), p2 = ph(rng), p3 = ph(rng);
  for (int z = 0; z < d; ++z)
    for (int y = 0; y < d; ++y)
      for (int x = 0; x < d; ++x) {
        const real val = std::sin(2.0 * M_PI * z / d + p1) +
                         std::cos(2.0 * M_PI * y / d + p2) +
                         std::sin(2.0 * M_PI * x / d + p3);
        v.density.values()[(static_cast<int64_t>(z) * d + y) * d + x] =
            val - 1.0;
      }
  for (auto& fv : v.features.values()) fv = ph(rng) / (2 * M_PI);
  return v;
}

Camera front_camera(int res, real focal) {
  return make_camera(identity_pose(), focal, res, res);
}

}  // namespace

TEST_CASE("generate_rays: optical axis, unit norms, corner pixel") {
  // principal point at a pixel center: direction is the optical axis
  Camera cam = front_camera(3, 8.0);  // principal (1.5,1.5) = center of (1,1)
  RayBatch rays = generate_rays(cam, 3, 3);
  const int64_t mid = 1 * 3 + 1;
  CHECK(rays.dirs.data()[mid * 3 + 0] == doctest::Approx(0.0));
  CHECK(rays.dirs.data()[mid * 3 + 1] == doctest::Approx(0.0));
  CHECK(rays.dirs.data()[mid * 3 + 2] == doctest::Approx(1.0));
  CHECK(rays.origins.data()[0] == 0.0);

  Camera big = front_camera(64, 64.0);
  RayBatch rb = generate_rays(big, 64, 64);
  for (int64_t i = 0; i < 64 * 64; ++i) {
    const real* d = rb.dirs.data() + i * 3;
    const real n = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    CHECK(std::fabs(n - 1.0) < 1e-9);
  }
  // corner pixel (0,0): pinhole gives direction prop to (31.5/64, 31.5/64, 1)
  const real* d0 = rb.dirs.data();
  const real s = 31.5 / 64.0;
  const real n0 = std::sqrt(2 * s * s + 1);
  CHECK(d0[0] == doctest::Approx(s / n0));
  CHECK(d0[1] == doctest::Approx(s / n0));
  CHECK(d0[2] == doctest::Approx(1.0 / n0));
}

TEST_CASE("render: suppressed density gives zero mask and features") {
  NeuralVolume v = make_volume(8, 3, -40.0);
  for (auto& f : v.features.values()) f = 0.7;
  Camera cam = front_camera(4, 4.0);
  RayBatch rays = generate_rays(cam, 4, 4);
  RenderOutput out = render(v, rays, 4, 4, 16);
  for (int64_t i = 0; i < out.mask.numel(); ++i)
    CHECK(out.mask.data()[i] < 1e-12);
  for (int64_t i = 0; i < out.feature_map.numel(); ++i)
    CHECK(std::fabs(out.feature_map.data()[i]) < 1e-12);
}

TEST_CASE("render: constant density matches closed-form transmittance") {
  // sigma = softplus(logit) = 0.2; central chord through the cube has length
  // 1.0 so mask -> 1 - exp(-0.2)
  const real sigma = 0.2;
  const real logit = std::log(std::exp(sigma) - 1.0);
  NeuralVolume v = make_volume(64, 1, logit);
  Camera cam = front_camera(1, 10.0);
  cam.principal = {0.5, 0.5};
  RayBatch rays = generate_rays(cam, 1, 1);
  RenderOutput out = render(v, rays, 1, 1, 256);
  CHECK(std::fabs(out.mask.data()[0] - (1.0 - std::exp(-sigma))) < 1e-3);
}

TEST_CASE("render: opaque sphere depth at the center pixel") {
  const int d = 32;
  NeuralVolume v = make_volume(d, 1, -20.0);
  const real radius = 0.3;
  for (int z = 0; z < d; ++z)
    for (int y = 0; y < d; ++y)
      for (int x = 0; x < d; ++x) {
        const Vec3 p{(x + 0.5 - d / 2.0) / d, (y + 0.5 - d / 2.0) / d,
                     1.5 + (z + 0.5 - d / 2.0) / d};
        const real r = std::sqrt(p[0] * p[0] + p[1] * p[1] +
                                 (p[2] - 1.5) * (p[2] - 1.5));
        if (r < radius)
          v.density.values()[(static_cast<int64_t>(z) * d + y) * d + x] = 40.0;
      }
  Camera cam = front_camera(1, 10.0);
  cam.principal = {0.5, 0.5};
  RayBatch rays = generate_rays(cam, 1, 1);
  RenderOutput out = render(v, rays, 1, 1, 256);
  CHECK(out.mask.data()[0] > 0.99);
  CHECK(std::fabs(out.depth.data()[0] - (1.5 - radius)) < 2.0 / d);
}

TEST_CASE("render: mask stays in [0,1] on random volumes") {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 3; ++trial) {
    NeuralVolume v = make_volume(8, 2, 0.0);
    std::uniform_real_distribution<real> u(-2, 3);
    for (auto& x : v.density.values()) x = u(rng);
    for (auto& x : v.features.values()) x = u(rng);
    Camera cam = front_camera(8, 8.0);
    RayBatch rays = generate_rays(cam, 8, 8);
    RenderOutput out = render(v, rays, 8, 8, 32);
    for (int64_t i = 0; i < out.mask.numel(); ++i) {
      CHECK(out.mask.data()[i] >= 0.0);
      CHECK(out.mask.data()[i] <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("render: sample-count convergence on smooth volumes") {
  std::mt19937_64 rng(53);
  NeuralVolume v = smooth_random_volume(16, 2, rng);
  Camera cam = front_camera(8, 8.0);
  RayBatch rays = generate_rays(cam, 8, 8);
  RenderOutput lo = render(v, rays, 8, 8, 64);
  RenderOutput hi = render(v, rays, 8, 8, 1024);
  RenderOutput mid = render(v, rays, 8, 8, 128);
  real err_ref = 0, err_double = 0;
  for (int64_t i = 0; i < lo.mask.numel(); ++i) {
    err_ref += std::fabs(lo.mask.data()[i] - hi.mask.data()[i]);
    err_double += std::fabs(lo.mask.data()[i] - mid.mask.data()[i]);
  }
  CHECK(err_ref / lo.mask.numel() < 5e-3);
  CHECK(err_double / lo.mask.numel() < 2e-3);
}

TEST_CASE("render: gradients wrt density, features, and pose") {
  std::mt19937_64 rng(57);
  NeuralVolume v = smooth_random_volume(8, 2, rng);
  CameraPose pose;  // slight off-axis view so pose gradients are non-trivial
  pose.rotation = Quaternion::from_axis_angle({0, 1, 0}, 0.1);
  pose.translation = {0.05, -0.02, 0.01};
  Tensor pose7 = pose_tensor(pose);
  // depth is excluded from the loss: its 1/max(mask,eps) normalization is
  // ill-conditioned on near-empty pixels and defeats finite differences
  auto loss_of = [](const Tensor& density, const Tensor& features,
                    const Tensor& p7) {
    NeuralVolume vol;
    vol.density = density;
    vol.features = features;
    RayBatch rays = generate_rays_ad(p7, 4.0, 2.0, 2.0, 4, 4);
    RenderOutput out = render(vol, rays, 4, 4, 16);
    return sum(pow2(out.mask)) + sum(pow2(out.feature_map));
  };
  auto build2 = [&](std::vector<Tensor>& in) {
    return loss_of(in[0], in[1], pose7);
  };
  auto build1 = [&](std::vector<Tensor>& in) {
    return loss_of(v.density, v.features, in[0]);
  };
  CHECK(grad_check({v.density, v.features}, build2, 1e-4, 48) < 1e-2);
  // pose perturbations move every sample point, so a 1e-4 step can cross
  // trilinear cell boundaries where the rendered loss has derivative kinks;
  // a smaller step keeps the finite difference on one smooth piece
  CHECK(grad_check({pose7}, build1, 1e-6) < 1e-2);
}

TEST_CASE("decoder doubles resolution and is deterministic") {
  std::mt19937_64 rng(59);
  VolumeDecoder dec = VolumeDecoder::make(8, 8, 4, rng);
  Tensor fused = random_tensor({8, 8, 8, 8}, rng);
  NeuralVolume a = dec(fused, {0, 0, 1.5}, 1.0);
  CHECK(a.density.shape() == Shape{1, 16, 16, 16});
  CHECK(a.features.shape() == Shape{4, 16, 16, 16});
  NeuralVolume b = dec(fused, {0, 0, 1.5}, 1.0);
  CHECK(a.density.values() == b.density.values());
  CHECK(a.features.values() == b.features.values());
}

TEST_CASE("rgb head: 2x upsample, 4 bounded channels") {
  std::mt19937_64 rng(61);
  RgbHead head = RgbHead::make(8, 8, rng);
  Tensor fm = random_tensor({8, 16, 16}, rng, -3, 3);
  Tensor out = head(fm);
  CHECK(out.shape() == Shape{4, 32, 32});
  for (int64_t i = 0; i < out.numel(); ++i) {
    CHECK(out.data()[i] > 0.0);
    CHECK(out.data()[i] < 1.0);
  }
}

TEST_CASE("extract_voxels thresholds softplus density") {
  NeuralVolume empty = make_volume(6, 1, -30.0);
  OccupancyGrid g0 = extract_voxels(empty, 1.0);
  for (uint8_t o : g0.occ) CHECK(o == 0);

  NeuralVolume solid = make_volume(6, 1, 10.0);  // sigma ~ 10
  OccupancyGrid g1 = extract_voxels(solid, 5.0);
  for (uint8_t o : g1.occ) CHECK(o == 1);
  CHECK_THROWS(extract_voxels(solid, 0.0));
}

TEST_CASE("occupancy rle round trip") {
  std::mt19937_64 rng(67);
  OccupancyGrid g;
  g.dim = 9;
  g.extent = 1.25;
  g.occ.resize(9 * 9 * 9);
  std::bernoulli_distribution coin(0.3);
  for (auto& o : g.occ) o = coin(rng) ? 1 : 0;
  auto bytes = encode_occupancy_rle(g);
  CHECK(bytes.size() >= 16);
  OccupancyGrid h = decode_occupancy_rle(bytes);
  CHECK(h.dim == g.dim);
  CHECK(h.extent == g.extent);
  CHECK(h.occ == g.occ);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS(decode_occupancy_rle(bad));
}
