#pragma once

#include <random>
#include <vector>

#include "forgekit/geometry.hpp"
#include "forgekit/nn.hpp"
#include "forgekit/tensor.hpp"

namespace fk {

struct RelativePoseSet {
  std::vector<CameraPose> poses;  // k-1 relative poses, query order
  int canonical_index = 0;
};

// Relative pose estimator: a global branch (cross/self attention between the
// canonical view's 2D tokens and all query tokens) and a pairwise branch
// (3D feature correlation against a positional-embedding codebook), fused by
// an MLP regressing quaternion + translation per query view.
struct PoseEstimator {
  struct Config {
    int img_ch = 4;
    int img_res = 32;
    int backbone_base = 8;
    int stride = 2;        // token map = img_res / stride per side
    int tok_ch = 16;       // per-token channels (reference 256)
    int heads = 4;
    int feat_dim = 64;     // per-view pose feature (reference 1024)
    int grid_ch = 8;       // encoder grid channels in
    int grid_dim = 16;     // encoder grid resolution in
    int pair_dim = 4;      // downsampled correlation resolution (reference 16)
    int pair_ch = 8;       // downsampled correlation channels (reference 64)
    int pe_ch = 12;        // PE_1D channels, divisible by 6 (reference 66)
    bool pairwise_softmax = true;
    real dropout_p = 0.6;
    int mlp_hidden = 64;
  };

  struct Gpr {
    AttentionBlock cross, self;
  };

  Config cfg;
  // global branch
  Conv2dLayer g_stem;
  struct Stage {
    Conv2dLayer down, r1, r2;
  };
  std::vector<Stage> g_stages;
  Conv2dLayer g_head;
  Tensor learned_pe;  // [N2d, tok_ch], shared by every view
  std::vector<Gpr> gpr;
  std::vector<Conv2dLayer> g_collapse;
  // pairwise branch
  std::vector<Conv3dLayer> pair_down;
  AttentionBlock pair_attn;
  std::vector<Conv3dLayer> pair_reduce;
  PositionalEmbedding3D pe1d;
  Tensor pe1d_t;  // [N3d, pe_ch] constant
  // regression
  Linear mlp1, mlp2;

  static PoseEstimator make(const Config& cfg, std::mt19937_64& rng);

  // images: k tensors [img_ch,H,W] -> [k-1, feat_dim], query order
  Tensor global_features(const std::vector<Tensor>& images,
                         int canonical_index) const;
  // one query grid vs the canonical grid, both [c,d,d,d] -> [1, feat_dim]
  Tensor pairwise_pair(const Tensor& z_query, const Tensor& z_canonical) const;
  Tensor pairwise_features(const std::vector<Tensor>& grids,
                           int canonical_index) const;
  // downsampled flattened grid tokens [N3d, pair_ch] (exposed for tests)
  Tensor pair_tokens(const Tensor& grid) const;
  // [k-1, 2*feat_dim] -> [k-1, 7]; rows are unit hemisphere-fixed quaternion
  // (w,x,y,z) then translation. rng required when training.
  Tensor regress(const Tensor& p_global, const Tensor& p_pairwise,
                 bool training, std::mt19937_64* rng) const;
  RelativePoseSet estimate(const std::vector<Tensor>& images,
                           const std::vector<Tensor>& grids,
                           int canonical_index) const;

  void register_params(ParamMap& m, const std::string& prefix);
};

RelativePoseSet pose_set_from_tensor(const Tensor& rows7, int canonical_index);

// Correlation core: S = (q c^T) * inv_temp, optionally row-softmaxed, then
// multiplied by the positional codebook `pe` as values.
Tensor correlation_1d(const Tensor& q, const Tensor& c, const Tensor& pe,
                      bool softmax_norm, real inv_temp);

}  // namespace fk
