#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "forgekit/eval.hpp"

using namespace fk;

namespace {

Tensor constant_image(real v, int c = 3, int h = 16, int w = 16) {
  Tensor t = Tensor::zeros({c, h, w});
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = v;
  return t;
}

Tensor textured_image(int c = 3, int h = 24, int w = 24) {
  Tensor t = Tensor::zeros({c, h, w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        t.data()[(ch * h + y) * w + x] =
            0.5 + 0.3 * std::sin(0.9 * x + 0.2 * ch) * std::cos(0.8 * y);
  return t;
}

CameraPose random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<real> u(-1, 1);
  CameraPose p;
  p.rotation = Quaternion{u(rng), u(rng), u(rng), u(rng)}.normalized();
  p.translation = {u(rng), u(rng), 1.5 + 0.2 * u(rng)};
  return p;
}

}  // namespace

TEST_CASE("psnr: cap, calibrated offsets, monotone in noise") {
  Tensor a = textured_image();
  CHECK(psnr(a, a) == 100.0);

  // uniform offsets of 0.1 and 0.01 give 20 and 40 dB
  Tensor lo = constant_image(0.3), hi = constant_image(0.4);
  CHECK(psnr(lo, hi) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(psnr(constant_image(0.30), constant_image(0.31)) ==
        doctest::Approx(40.0).epsilon(1e-12));

  std::mt19937_64 rng(5);
  std::normal_distribution<real> n(0, 1);
  real prev = 1e9;
  for (real amp : {0.01, 0.03, 0.1, 0.3}) {
    Tensor b = a;
    Tensor noisy = Tensor::zeros(a.shape());
    for (int64_t i = 0; i < a.numel(); ++i)
      noisy.data()[i] = a.data()[i] + amp * n(rng);
    const real p = psnr(a, noisy);
    CHECK(p < prev);
    prev = p;
  }
  CHECK_THROWS(psnr(a, constant_image(0.5, 3, 8, 8)));
}

TEST_CASE("psnr_masked: restricted support and empty mask") {
  Tensor a = constant_image(0.2, 3, 8, 8), b = constant_image(0.2, 3, 8, 8);
  // corrupt one pixel outside the mask, one inside
  Tensor mask = Tensor::zeros({1, 8, 8});
  mask.data()[9] = 1.0;
  b.data()[3] = 0.9;             // pixel 3: masked out
  b.data()[9] = 0.2 + 0.1;       // pixel 9, channel 0
  const real p = psnr_masked(a, b, mask);
  // MSE over 3 masked samples = 0.01/3
  CHECK(p == doctest::Approx(10.0 * std::log10(3.0 / 0.01)).epsilon(1e-12));
  CHECK(psnr_masked(a, b, Tensor::zeros({1, 8, 8})) == 100.0);
}

TEST_CASE("ssim: identity, symmetry, degradation ordering") {
  Tensor a = textured_image();
  CHECK(ssim(a, a) == 1.0);

  Tensor inv = Tensor::zeros(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) inv.data()[i] = 1.0 - a.data()[i];
  CHECK(ssim(a, inv) < 0.3);

  std::mt19937_64 rng(7);
  std::normal_distribution<real> n(0, 0.1);
  Tensor noisy = Tensor::zeros(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i)
    noisy.data()[i] = a.data()[i] + n(rng);
  const real s_ab = ssim(a, noisy), s_ba = ssim(noisy, a);
  CHECK(s_ab < 1.0);
  CHECK(s_ab > ssim(a, inv));
  CHECK(std::fabs(s_ab - s_ba) < 1e-9);

  CHECK_THROWS(ssim(constant_image(0.5, 1, 8, 8), constant_image(0.5, 1, 8, 8)));
}

TEST_CASE("pose_errors: zero at identity, known rotation, rebasing invariance") {
  std::mt19937_64 rng(9);
  RelativePoseSet gt, pred;
  for (int i = 0; i < 4; ++i) gt.poses.push_back(random_pose(rng));
  pred = gt;
  PoseErrors z = pose_errors(gt, pred);
  CHECK(z.rotation_deg == 0.0);
  CHECK(z.translation_m == 0.0);
  REQUIRE(z.per_query_deg.size() == 4);

  // perturb one query by a 30 degree rotation and 0.25 m
  pred.poses[2].rotation =
      Quaternion::from_axis_angle({0, 0, 1}, 30.0 * M_PI / 180.0) *
      pred.poses[2].rotation;
  pred.poses[2].translation[0] += 0.25;
  PoseErrors e = pose_errors(gt, pred);
  CHECK(e.per_query_deg[2] == doctest::Approx(30.0).epsilon(1e-9));
  CHECK(e.rotation_deg == doctest::Approx(30.0 / 4).epsilon(1e-9));
  CHECK(e.translation_m == doctest::Approx(0.25 / 4).epsilon(1e-9));

  // re-basing all absolute cameras by a rigid transform leaves relative
  // poses (hence errors) unchanged
  std::vector<CameraPose> abs_gt, abs_pred;
  for (int i = 0; i < 5; ++i) abs_gt.push_back(random_pose(rng));
  abs_pred = abs_gt;
  abs_pred[3].translation[1] += 0.1;
  auto rel_of = [](const std::vector<CameraPose>& cams) {
    RelativePoseSet r;
    for (size_t i = 1; i < cams.size(); ++i)
      r.poses.push_back(relative_pose(cams[0], cams[i]));
    return r;
  };
  PoseErrors before = pose_errors(rel_of(abs_gt), rel_of(abs_pred));
  CameraPose g = random_pose(rng);
  std::vector<CameraPose> gt2, pred2;
  for (const auto& c : abs_gt) gt2.push_back(compose(c, g));
  for (const auto& c : abs_pred) pred2.push_back(compose(c, g));
  PoseErrors after = pose_errors(rel_of(gt2), rel_of(pred2));
  CHECK(std::fabs(before.rotation_deg - after.rotation_deg) < 1e-5);
  CHECK(std::fabs(before.translation_m - after.translation_m) < 1e-9);

  RelativePoseSet short_set;
  short_set.poses.push_back(gt.poses[0]);
  CHECK_THROWS(pose_errors(gt, short_set));
}

TEST_CASE("depth_l1: masked mean and empty flag") {
  Tensor gt = constant_image(1.5, 1, 4, 4), pred = constant_image(1.5, 1, 4, 4);
  Tensor mask = Tensor::zeros({1, 4, 4});
  mask.data()[0] = 1.0;
  mask.data()[5] = 1.0;
  pred.data()[0] = 1.7;   // in mask: error 0.2
  pred.data()[10] = 9.0;  // outside mask: ignored
  bool empty = true;
  CHECK(depth_l1(gt, pred, mask, &empty) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(!empty);
  CHECK(depth_l1(gt, pred, Tensor::zeros({1, 4, 4}), &empty) == 0.0);
  CHECK(empty);
}

TEST_CASE("voxel_iou: exact counts against a brute-force oracle") {
  auto sphere_grid = [](int d, real r) {
    OccupancyGrid g;
    g.dim = d;
    g.occ.assign(static_cast<size_t>(d) * d * d, 0);
    for (int z = 0; z < d; ++z)
      for (int y = 0; y < d; ++y)
        for (int x = 0; x < d; ++x) {
          const real px = (x + 0.5) / d - 0.5, py = (y + 0.5) / d - 0.5,
                     pz = (z + 0.5) / d - 0.5;
          if (px * px + py * py + pz * pz <= r * r)
            g.occ[(static_cast<size_t>(z) * d + y) * d + x] = 1;
        }
    return g;
  };
  OccupancyGrid a = sphere_grid(32, 0.3), b = sphere_grid(32, 0.36);
  CHECK(voxel_iou(a, a) == 1.0);

  int64_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.occ.size(); ++i) {
    inter += (a.occ[i] && b.occ[i]);
    uni += (a.occ[i] || b.occ[i]);
  }
  CHECK(voxel_iou(a, b) == static_cast<real>(inter) / uni);
  CHECK(voxel_iou(a, b) < 1.0);
  CHECK(voxel_iou(a, b) > 0.4);  // dilated sphere keeps substantial overlap

  OccupancyGrid empty;
  empty.dim = 32;
  empty.occ.assign(a.occ.size(), 0);
  CHECK(voxel_iou(empty, a) == 0.0);
  CHECK(voxel_iou(empty, empty) == 1.0);  // empty union counts as a match

  OccupancyGrid small;
  small.dim = 8;
  small.occ.assign(8 * 8 * 8, 0);
  CHECK_THROWS(voxel_iou(small, a));
}

TEST_CASE("median") {
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 2, 3}) == 2.5);
  CHECK(median({7}) == 7.0);
  CHECK(median({}) == 0.0);
}

TEST_CASE("EvalReport: aggregate means, json schema, table shape") {
  EvalReport rep;
  rep.variant = "forge";
  rep.dataset_id = "toy";
  rep.config_hash = "deadbeef";
  SceneMetrics a;
  a.scene_id = "scene_0000";
  a.psnr = 20;
  a.ssim = 0.8;
  a.rot_err_mean = 10;
  a.has_pose = true;
  SceneMetrics b;
  b.scene_id = "scene_0001";
  b.psnr = 30;
  b.ssim = 0.6;
  b.rot_err_mean = 20;
  b.has_pose = true;
  rep.scenes = {a, b};
  SceneMetrics agg = rep.aggregate();
  CHECK(agg.psnr == doctest::Approx(25.0));
  CHECK(agg.ssim == doctest::Approx(0.7));
  CHECK(agg.rot_err_mean == doctest::Approx(15.0));

  auto j = nlohmann::json::parse(rep.to_json());
  CHECK(j["schema_version"] == 1);
  CHECK(j["variant"] == "forge");
  CHECK(j["scenes"].size() == 2);
  CHECK(j["scenes"][0]["lpips"].is_null());
  CHECK(j["aggregate"]["psnr"].get<double>() == doctest::Approx(25.0));

  // GT-pose variant reports null pose columns
  rep.scenes[0].has_pose = rep.scenes[1].has_pose = false;
  auto j2 = nlohmann::json::parse(rep.to_json());
  CHECK(j2["scenes"][0]["rot_err_mean"].is_null());

  const std::string table = rep.to_table();
  CHECK(table.find("scene_0000") != std::string::npos);
  CHECK(table.find("scene_0001") != std::string::npos);
  CHECK(table.find("psnr") != std::string::npos);
  // header + 2 scenes + aggregate + title line
  int lines = 0;
  for (char c : table)
    if (c == '\n') ++lines;
  CHECK(lines == 5);
}
