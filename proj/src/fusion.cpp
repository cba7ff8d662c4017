#include "forgekit/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fk {

std::vector<VoxelGrid> transform_all(const FusionInput& in) {
  const int k = static_cast<int>(in.grids.size());
  if (k == 0) throw std::invalid_argument("transform_all: no grids");
  std::vector<VoxelGrid> out;
  out.reserve(k);
  int q = 0;
  for (int i = 0; i < k; ++i) {
    if (i == in.rel_poses.canonical_index) {
      out.push_back(in.grids[i]);
    } else {
      // camera-i -> canonical coordinates is the inverse of DeltaPhi_1^i
      out.push_back(grid_resample(in.grids[i], invert(in.rel_poses.poses[q])));
      ++q;
    }
  }
  return out;
}

Tensor transform_grid_ad(const Tensor& grid, const Tensor& rel_pose7,
                         const Vec3& center, real extent) {
  const int c = grid.dim(0), d = grid.dim(1), h = grid.dim(2), w = grid.dim(3);
  // target voxel centers in canonical metric coordinates, (x,y,z) columns
  std::vector<real> pts(static_cast<size_t>(d) * h * w * 3);
  int64_t n = 0;
  for (int z = 0; z < d; ++z)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        pts[n * 3 + 0] = center[0] + ((x + 0.5) / w - 0.5) * extent;
        pts[n * 3 + 1] = center[1] + ((y + 0.5) / h - 0.5) * extent;
        pts[n * 3 + 2] = center[2] + ((z + 0.5) / d - 0.5) * extent;
        ++n;
      }
  Tensor p = Tensor::from_data({static_cast<int>(n), 3}, std::move(pts));
  // inverse warp: pull target centers through DeltaPhi into the query frame
  Tensor src = pose_apply_ad(rel_pose7, p);
  Tensor ix = (narrow(src, 1, 0, 1) - center[0]) * (w / extent) + (w * 0.5 - 0.5);
  Tensor iy = (narrow(src, 1, 1, 1) - center[1]) * (h / extent) + (h * 0.5 - 0.5);
  Tensor iz = (narrow(src, 1, 2, 1) - center[2]) * (d / extent) + (d * 0.5 - 0.5);
  Tensor sampled = trilinear_sample(grid, concat({iz, iy, ix}, 1));  // [N,c]
  return reshape(transpose2d(sampled), {c, d, h, w});
}

std::vector<int> fusion_order(int k, const RelativePoseSet& rel) {
  struct Key {
    real rot, tnorm;
    int idx;
  };
  std::vector<Key> keys;
  int q = 0;
  for (int i = 0; i < k; ++i) {
    if (i == rel.canonical_index) {
      keys.push_back({0.0, 0.0, i});
    } else {
      const CameraPose& p = rel.poses[q++];
      const Vec3& t = p.translation;
      keys.push_back({rotation_error_deg(p.rotation, Quaternion{}),
                      std::sqrt(t[0] * t[0] + t[1] * t[1] + t[2] * t[2]), i});
    }
  }
  std::stable_sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
    if (a.rot != b.rot) return a.rot < b.rot;
    if (a.tnorm != b.tnorm) return a.tnorm < b.tnorm;
    return a.idx < b.idx;
  });
  std::vector<int> order;
  for (const Key& key : keys) order.push_back(key.idx);
  return order;
}

Fusion Fusion::make(int channels, std::mt19937_64& rng) {
  Fusion f;
  f.gru = ConvGRU3d::make(channels, rng);
  return f;
}

Tensor Fusion::fuse(const std::vector<Tensor>& transformed,
                    const RelativePoseSet& rel, const std::string& mode) const {
  const int k = static_cast<int>(transformed.size());
  if (k == 0) throw std::invalid_argument("fuse: no grids");
  // running mean: exact (no rounding drift) when all grids are identical
  Tensor mean = transformed[0];
  for (int i = 1; i < k; ++i)
    mean = mean + (transformed[i] - mean) / static_cast<real>(i + 1);
  if (mode == "avg") return mean;

  Tensor hidden = mode == "seq" ? Tensor::zeros(mean.shape()) : mean;
  if (mode != "seq" && mode != "both")
    throw std::invalid_argument("fuse: unknown mode " + mode);
  for (int i : fusion_order(k, rel)) hidden = gru(hidden, transformed[i]);
  return hidden;
}

void Fusion::register_params(ParamMap& m, const std::string& prefix) const {
  gru.register_params(m, prefix + ".gru");
}

}  // namespace fk
