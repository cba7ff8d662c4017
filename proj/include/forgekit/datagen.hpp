#pragma once

#include <random>
#include <string>
#include <vector>

#include "forgekit/geometry.hpp"
#include "forgekit/pose.hpp"
#include "forgekit/tensor.hpp"
#include "forgekit/volume.hpp"

namespace fk {

struct Primitive {
  enum Kind { Sphere, Box, Capsule };
  Kind kind = Sphere;
  Vec3 center{0, 0, 0};
  // sphere: size[0]=radius; box: size=half extents;
  // capsule: size[0]=radius, size[1]=segment half length along `axis`
  Vec3 size{0.2, 0.2, 0.2};
  Vec3 axis{0, 0, 1};
  Vec3 albedo{0.8, 0.8, 0.8};
};

struct SceneSpec {
  std::vector<Primitive> prims;
};

struct Episode {
  SceneSpec scene;
  std::vector<Camera> cameras;
  std::vector<Tensor> images;  // [3,H,W]
  std::vector<Tensor> masks;   // [1,H,W]
  std::vector<Tensor> depths;  // [1,H,W]
  std::vector<int> input_views, eval_views;
  RelativePoseSet gt_relative_poses;  // canonical = input_views[0]
};

// 1-4 primitives, rejection-sampled into the unit object cube
SceneSpec random_scene(std::mt19937_64& rng);

// look-at cameras on the [1.4,1.6] m shell around the origin, uniform
// viewpoint and roll, deterministic from rng state
std::vector<Camera> sample_cameras(int k, std::mt19937_64& rng, real focal,
                                   int res);

// analytic ray-primitive renderer; Lambert shading, black background.
// supersample >= 1 averages an s x s pixel subgrid.
struct OracleImages {
  Tensor rgb, mask, depth;
};
OracleImages oracle_render(const SceneSpec& scene, const Camera& camera,
                           int supersample = 1);

// signed distance and closest-hit machinery exposed for the tests
bool point_inside(const SceneSpec& scene, const Vec3& p);

// occupancy at voxel centers of the unit cube centered at the origin
// (object frame)
OccupancyGrid voxelize(const SceneSpec& scene, int d);
// same, but on the reconstruction cube (center, extent) in `cam`'s frame
OccupancyGrid voxelize_camera(const SceneSpec& scene, int d,
                              const CameraPose& cam, const Vec3& center,
                              real extent);

// serialized scene round trip (stored in meta.json)
std::string scene_to_json(const SceneSpec& s);
SceneSpec scene_from_json(const std::string& j);

// n_scenes episodes x 2k views (k input + k eval) under out_dir; returns the
// manifest path. Layout per scene: view_<n>.png, mask_<n>.png, depth_<n>.bin,
// meta.json; top-level manifest.json.
std::string make_dataset(int n_scenes, int k, uint64_t seed,
                         const std::string& out_dir, int res, real focal);

Episode load_episode(const std::string& scene_dir);
std::vector<std::string> list_scenes(const std::string& manifest_path);

}  // namespace fk
