#pragma once

#include <random>
#include <string>
#include <vector>

#include "forgekit/geometry.hpp"
#include "forgekit/nn.hpp"
#include "forgekit/pose.hpp"
#include "forgekit/tensor.hpp"

namespace fk {

struct FusionInput {
  std::vector<VoxelGrid> grids;  // input order, one per view
  RelativePoseSet rel_poses;     // k-1 relative poses, query order
  CameraPose canonical_pose;     // Phi^1 (reference: R=I, t=[0,0,1.5])
};

// Resamples every query grid into the canonical camera frame; the canonical
// grid passes through untouched. Plain-buffer oracle path.
std::vector<VoxelGrid> transform_all(const FusionInput& in);

// Autodiff path for one grid: [c,d,h,w] attached to the cube
// (center, extent) in a query camera frame, inverse-warped into the same
// cube in the canonical frame. rel_pose7 is DeltaPhi_1^i (canonical->query).
Tensor transform_grid_ad(const Tensor& grid, const Tensor& rel_pose7,
                         const Vec3& center, real extent);

// Fusion order: indices of all k views sorted by ascending rotation geodesic
// distance of their relative pose from identity, ties by translation norm
// then input index. The canonical view has distance 0.
std::vector<int> fusion_order(int k, const RelativePoseSet& rel);

// Mean-pool initialization plus a sequential gated recurrent pass in fusion
// order. mode: "avg" (mean only), "seq" (recurrent from zero hidden),
// "both" (mean init + recurrent; default pipeline).
struct Fusion {
  ConvGRU3d gru;
  static Fusion make(int channels, std::mt19937_64& rng);
  Tensor fuse(const std::vector<Tensor>& transformed,
              const RelativePoseSet& rel,
              const std::string& mode = "both") const;
  void register_params(ParamMap& m, const std::string& prefix) const;
};

}  // namespace fk
