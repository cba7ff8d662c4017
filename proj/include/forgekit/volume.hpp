#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "forgekit/geometry.hpp"
#include "forgekit/nn.hpp"
#include "forgekit/tensor.hpp"

namespace fk {

// Density logits + feature lattice on a metric cube. Rendered density is
// sigma = softplus(density), so "empty" means strongly negative logits.
struct NeuralVolume {
  Tensor density;   // [1,D,D,D]
  Tensor features;  // [F,D,D,D]
  Vec3 center{0, 0, 1.5};
  real extent = 1.0;

  int dim() const { return density.dim(1); }
  int feat_channels() const { return features.dim(0); }
};

struct RenderOutput {
  Tensor feature_map;  // [F,H,W]
  Tensor rgb;          // [3,Ho,Wo]; only set once rgb_head has run
  Tensor mask;         // [1,H,W], pre-head sum of weights
  Tensor depth;        // [1,H,W], meters
};

struct RayBatch {
  Tensor origins;  // [N,3], volume/world frame
  Tensor dirs;     // [N,3], unit norm
};

// One ray per pixel center, row-major over (v,u). Plain variant bakes the
// pose in as constants; the _ad variant keeps gradients flowing to pose7 so
// test-time pose refinement can backprop through rendering.
RayBatch generate_rays(const Camera& cam, int height, int width);
RayBatch generate_rays_ad(const Tensor& pose7, real focal, real cx, real cy,
                          int height, int width);

// Stratified volume rendering over the ray-cube intersection. `jitter`, if
// non-null, holds n_samples offsets in [0,1) (one per bin); null means bin
// midpoints (deterministic eval). delta is the uniform bin length per ray.
RenderOutput render(const NeuralVolume& vol, const RayBatch& rays, int height,
                    int width, int n_samples,
                    const std::vector<real>* jitter = nullptr);

// fused [c,D,H,W] -> NeuralVolume at 2x resolution, split heads.
struct VolumeDecoder {
  Conv3dLayer pre, post, density_head, feature_head;
  static VolumeDecoder make(int c_in, int mid, int f_out, std::mt19937_64& rng);
  NeuralVolume operator()(const Tensor& fused, const Vec3& center,
                          real extent) const;
  void register_params(ParamMap& m, const std::string& prefix) const;
};

// feature_map [F,H,W] -> [4,2H,2W] in [0,1]; channels 0..2 RGB, 3 mask.
struct RgbHead {
  Conv2dLayer c1, c2, c3;
  static RgbHead make(int f_in, int mid, std::mt19937_64& rng);
  Tensor operator()(const Tensor& feature_map) const;
  void register_params(ParamMap& m, const std::string& prefix) const;
};

struct OccupancyGrid {
  int dim = 0;
  real extent = 1.0;
  std::vector<uint8_t> occ;  // [d][h][w], 0/1
};

// occupancy = (softplus(density) > threshold)
OccupancyGrid extract_voxels(const NeuralVolume& vol, real threshold);

// 16-byte header (magic "FKO1", u32 dim, f64 extent) + u32 run lengths,
// alternating and starting with a zero-run.
std::vector<uint8_t> encode_occupancy_rle(const OccupancyGrid& g);
OccupancyGrid decode_occupancy_rle(const std::vector<uint8_t>& bytes);

}  // namespace fk
