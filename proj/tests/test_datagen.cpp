#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "forgekit/datagen.hpp"
#include "forgekit/image_io.hpp"

using namespace fk;
namespace fs = std::filesystem;

namespace {

Camera canonical_camera(int res, real focal) {
  CameraPose p;
  p.translation = {0, 0, 1.5};
  Camera c = make_camera(p, focal, res, res);
  return c;
}

SceneSpec sphere_scene(real radius) {
  SceneSpec s;
  Primitive p;
  p.kind = Primitive::Sphere;
  p.center = {0, 0, 0};
  p.size = {radius, 0, 0};
  p.albedo = {0.9, 0.4, 0.2};
  s.prims.push_back(p);
  return s;
}

std::string temp_dir(const char* tag) {
  auto d = fs::temp_directory_path() / (std::string("fk_test_") + tag);
  fs::remove_all(d);
  fs::create_directories(d);
  return d.string();
}

}  // namespace

TEST_CASE("sample_cameras: look-at, shell distance, determinism") {
  std::mt19937_64 rng(11);
  auto cams = sample_cameras(20, rng, 32.0, 32);
  for (const Camera& c : cams) {
    const Vec3 center = camera_center(c.pose);
    const real d = std::sqrt(center[0] * center[0] + center[1] * center[1] +
                             center[2] * center[2]);
    CHECK(d >= 1.4);
    CHECK(d <= 1.6);
    // optical axis (camera +z in world) must point at the origin
    const auto m = c.pose.rotation.to_matrix();
    const Vec3 axis{m[6], m[7], m[8]};  // third row of R = z_cam in world
    const Vec3 to_origin{-center[0] / d, -center[1] / d, -center[2] / d};
    const Vec3 cr{axis[1] * to_origin[2] - axis[2] * to_origin[1],
                  axis[2] * to_origin[0] - axis[0] * to_origin[2],
                  axis[0] * to_origin[1] - axis[1] * to_origin[0]};
    CHECK(std::sqrt(cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2]) < 1e-9);
  }
  std::mt19937_64 rng2(11);
  auto cams2 = sample_cameras(20, rng2, 32.0, 32);
  for (size_t i = 0; i < cams.size(); ++i) {
    auto a = pose_to_array(cams[i].pose), b = pose_to_array(cams2[i].pose);
    CHECK(a == b);
  }
  CHECK_THROWS(sample_cameras(0, rng, 32.0, 32));
}

TEST_CASE("oracle_render: empty scene, sphere depth, silhouette area") {
  SceneSpec empty;
  Camera cam = canonical_camera(16, 16.0);
  OracleImages img = oracle_render(empty, cam);
  for (int64_t i = 0; i < img.mask.numel(); ++i)
    CHECK(img.mask.data()[i] == 0.0);

  // camera at distance exactly 1.5 on the z axis; center-pixel depth 1.2
  Camera c1 = canonical_camera(1, 10.0);
  c1.principal = {0.5, 0.5};
  OracleImages sp = oracle_render(sphere_scene(0.3), c1);
  CHECK(sp.mask.data()[0] == 1.0);
  CHECK(sp.depth.data()[0] == doctest::Approx(1.2).epsilon(1e-9));

  // silhouette: pinhole projects the sphere to a disc of radius
  // f * tan(asin(r/d))
  const int res = 128;
  Camera c2 = canonical_camera(res, res);
  OracleImages sil = oracle_render(sphere_scene(0.3), c2);
  real area = 0;
  for (int64_t i = 0; i < sil.mask.numel(); ++i) area += sil.mask.data()[i];
  const real alpha = std::asin(0.3 / 1.5);
  const real expect = M_PI * std::pow(res * std::tan(alpha), 2);
  CHECK(std::fabs(area - expect) / expect < 0.02);
}

TEST_CASE("oracle_render: supersampling changes mask area by < 1%") {
  std::mt19937_64 rng(13);
  SceneSpec scene = random_scene(rng);
  auto cams = sample_cameras(1, rng, 64.0, 64);
  OracleImages a = oracle_render(scene, cams[0], 1);
  OracleImages b = oracle_render(scene, cams[0], 2);
  real area_a = 0, area_b = 0;
  for (int64_t i = 0; i < a.mask.numel(); ++i) {
    area_a += a.mask.data()[i];
    area_b += b.mask.data()[i];
  }
  REQUIRE(area_a > 0);
  CHECK(std::fabs(area_a - area_b) / area_a < 0.01);
}

TEST_CASE("oracle depth bounded by distance plus half cube diagonal") {
  std::mt19937_64 rng(17);
  SceneSpec scene = random_scene(rng);
  auto cams = sample_cameras(3, rng, 32.0, 32);
  for (const Camera& c : cams) {
    const Vec3 ctr = camera_center(c.pose);
    const real d = std::sqrt(ctr[0] * ctr[0] + ctr[1] * ctr[1] +
                             ctr[2] * ctr[2]);
    OracleImages img = oracle_render(scene, c);
    for (int64_t i = 0; i < img.mask.numel(); ++i)
      if (img.mask.data()[i] == 1.0)
        CHECK(img.depth.data()[i] <= d + 0.87);
  }
}

TEST_CASE("voxelize: trivial grids and sphere volume fraction") {
  SceneSpec empty;
  OccupancyGrid g0 = voxelize(empty, 8);
  for (uint8_t o : g0.occ) CHECK(o == 0);

  SceneSpec cube;
  Primitive box;
  box.kind = Primitive::Box;
  box.center = {0, 0, 0};
  box.size = {0.5, 0.5, 0.5};
  cube.prims.push_back(box);
  OccupancyGrid g1 = voxelize(cube, 8);
  for (uint8_t o : g1.occ) CHECK(o == 1);

  OccupancyGrid gs = voxelize(sphere_scene(0.3), 64);
  real frac = 0;
  for (uint8_t o : gs.occ) frac += o;
  frac /= gs.occ.size();
  const real expect = 4.0 / 3.0 * M_PI * 0.3 * 0.3 * 0.3;
  CHECK(std::fabs(frac - expect) / expect < 0.03);

  CHECK_THROWS(voxelize(empty, 1));
}

TEST_CASE("voxelize_camera agrees with point tests in the camera frame") {
  SceneSpec s = sphere_scene(0.25);
  CameraPose cam;
  cam.rotation = Quaternion::from_axis_angle({0, 1, 0}, 0.4);
  cam.translation = {0.02, -0.03, 1.5};
  OccupancyGrid g = voxelize_camera(s, 16, cam, {0, 0, 1.5}, 1.0);
  real frac = 0;
  for (uint8_t o : g.occ) frac += o;
  frac /= g.occ.size();
  const real expect = 4.0 / 3.0 * M_PI * std::pow(0.25, 3);
  CHECK(std::fabs(frac - expect) / expect < 0.1);
}

TEST_CASE("scene json round trip") {
  std::mt19937_64 rng(19);
  SceneSpec s = random_scene(rng);
  SceneSpec t = scene_from_json(scene_to_json(s));
  REQUIRE(t.prims.size() == s.prims.size());
  for (size_t i = 0; i < s.prims.size(); ++i) {
    CHECK(t.prims[i].kind == s.prims[i].kind);
    CHECK(t.prims[i].center == s.prims[i].center);
    CHECK(t.prims[i].size == s.prims[i].size);
    CHECK(t.prims[i].albedo == s.prims[i].albedo);
  }
}

TEST_CASE("make_dataset: layout, determinism, episode round trip") {
  const std::string d1 = temp_dir("ds1"), d2 = temp_dir("ds2");
  const std::string m1 = make_dataset(2, 3, 99, d1, 16, 16.0);
  CHECK(fs::exists(m1));
  for (int s = 0; s < 2; ++s) {
    char name[32];
    std::snprintf(name, sizeof(name), "%s/scene_%04d", d1.c_str(), s);
    for (int v = 0; v < 6; ++v) {
      char f[64];
      std::snprintf(f, sizeof(f), "%s/view_%02d.png", name, v);
      CHECK(fs::exists(f));
      std::snprintf(f, sizeof(f), "%s/mask_%02d.png", name, v);
      CHECK(fs::exists(f));
      std::snprintf(f, sizeof(f), "%s/depth_%02d.bin", name, v);
      CHECK(fs::exists(f));
    }
  }
  const std::string m2 = make_dataset(2, 3, 99, d2, 16, 16.0);
  CHECK(read_bytes(m1) == read_bytes(m2));
  CHECK(read_bytes(d1 + "/scene_0000/meta.json") ==
        read_bytes(d2 + "/scene_0000/meta.json"));

  auto scenes = list_scenes(m1);
  REQUIRE(scenes.size() == 2);
  Episode ep = load_episode(scenes[0]);
  CHECK(ep.cameras.size() == 6);
  CHECK(ep.input_views == std::vector<int>{0, 1, 2});
  CHECK(ep.eval_views == std::vector<int>{3, 4, 5});
  CHECK(ep.gt_relative_poses.poses.size() == 2);
  // relative poses must recompose each camera from the canonical one
  for (int i = 1; i < 3; ++i) {
    CameraPose recomposed =
        compose(ep.gt_relative_poses.poses[i - 1], ep.cameras[0].pose);
    CHECK(rotation_error_deg(recomposed.rotation,
                             ep.cameras[i].pose.rotation) < 1e-7);
    CHECK(translation_error(recomposed.translation,
                            ep.cameras[i].pose.translation) < 1e-9);
  }
  for (const Camera& c : ep.cameras) {
    const Vec3 ctr = camera_center(c.pose);
    const real dist = std::sqrt(ctr[0] * ctr[0] + ctr[1] * ctr[1] +
                                ctr[2] * ctr[2]);
    CHECK(dist >= 1.4 - 1e-9);
    CHECK(dist <= 1.6 + 1e-9);
  }
  CHECK(ep.images[0].shape() == Shape{3, 16, 16});
  CHECK(ep.masks[0].shape() == Shape{1, 16, 16});
  CHECK(ep.depths[0].shape() == Shape{1, 16, 16});

  // empty dataset still writes a valid manifest
  const std::string d3 = temp_dir("ds3");
  const std::string m3 = make_dataset(0, 3, 1, d3, 16, 16.0);
  CHECK(list_scenes(m3).empty());
  fs::remove_all(d1);
  fs::remove_all(d2);
  fs::remove_all(d3);
}

TEST_CASE("png and depth round trips") {
  const std::string dir = temp_dir("io");
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<real> u(0, 1);
  Tensor img = Tensor::zeros({3, 9, 7});
  for (int64_t i = 0; i < img.numel(); ++i) img.data()[i] = u(rng);
  write_png_rgb(dir + "/a.png", img);
  Tensor back = read_png_rgb(dir + "/a.png");
  for (int64_t i = 0; i < img.numel(); ++i)
    CHECK(std::fabs(back.data()[i] - img.data()[i]) <= 0.5 / 255 + 1e-12);

  Tensor depth = Tensor::zeros({1, 5, 4});
  for (int64_t i = 0; i < depth.numel(); ++i) depth.data()[i] = u(rng) * 3;
  write_depth_bin(dir + "/d.bin", depth);
  Tensor dback = read_depth_bin(dir + "/d.bin", 5, 4);
  for (int64_t i = 0; i < depth.numel(); ++i)
    CHECK(std::fabs(dback.data()[i] - depth.data()[i]) < 1e-6);
  fs::remove_all(dir);
}
