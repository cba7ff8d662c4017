#pragma once

#include <random>
#include <string>
#include <vector>

#include "forgekit/config.hpp"
#include "forgekit/encoder.hpp"
#include "forgekit/fusion.hpp"
#include "forgekit/pose.hpp"
#include "forgekit/volume.hpp"

namespace fk {

// Full pipeline: per-view voxel encoding, relative pose estimation, rigid
// fusion into the canonical frame, volume decoding, and rendering. The
// reconstruction cube is 1 m sided, centered 1.5 m down the canonical
// camera's optical axis.
struct Model {
  int res = 32, grid_d = 16, grid_c = 8, volume_f = 4, render_samples = 32;
  real focal = 32;
  std::string fusion_mode = "both";
  std::string pose_branch = "both";  // global | pairwise | both (ablations)
  Vec3 cube_center{0, 0, 1.5};
  // the volume cube lives in the canonical *camera* frame, so containment
  // must hold for every scene rotation: scenes are generated with
  // circumscribed radius <= 0.65 and camera distance jitter is +-0.1, so
  // half-extent 0.8 always contains the object. Much larger and the cube is
  // mostly empty space, which lets the background mask term starve the
  // density field early in training.
  real extent = 1.6;
  std::string config_hash;

  Encoder encoder;
  PoseEstimator pose_est;
  Fusion fusion;
  VolumeDecoder decoder;
  RgbHead rgb_head;

  static Model make(const Config& cfg, std::mt19937_64& rng);

  // parameter registries; pose head and reconstruction path train in
  // different stages, so they are exposed separately as well as merged
  ParamMap params();
  ParamMap recon_params();  // encoder + fusion + decoder + rgb head
  ParamMap pose_params();

  std::vector<Tensor> encode(const std::vector<Tensor>& images) const;

  // grids in input order; rel7 holds k-1 pose tensors [7] in query order
  // (DeltaPhi from the canonical camera to each query camera). rel_plain
  // supplies canonical_index and the fusion ordering keys.
  NeuralVolume build_volume(const std::vector<Tensor>& grids,
                            const std::vector<Tensor>& rel7,
                            const RelativePoseSet& rel_plain) const;
  // non-AD pose convenience path
  NeuralVolume reconstruct(const std::vector<Tensor>& images,
                           const RelativePoseSet& rel) const;

  struct ViewRender {
    RenderOutput raw;  // half-resolution feature map / mask / depth
    Tensor rgb;        // [3,res,res]
    Tensor mask;       // [1,res,res]
  };
  // cam_pose7 maps canonical-frame coordinates to the target camera frame
  ViewRender render_view(const NeuralVolume& vol, const Tensor& cam_pose7) const;

  // AD rows [k-1,7] for training; plain set for inference
  Tensor predict_pose_rows(const std::vector<Tensor>& images,
                           const std::vector<Tensor>& grids,
                           int canonical_index, bool training,
                           std::mt19937_64* rng) const;
  RelativePoseSet predict_poses(const std::vector<Tensor>& images,
                                int canonical_index) const;
};

// query-order pose tensors from a plain set (constants, no grad)
std::vector<Tensor> pose_tensors(const RelativePoseSet& rel);

}  // namespace fk
