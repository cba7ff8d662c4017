#pragma once

#include <string>
#include <vector>

#include "forgekit/pose.hpp"
#include "forgekit/tensor.hpp"
#include "forgekit/volume.hpp"

namespace fk {

// Peak signal-to-noise ratio in dB over [0,1] images; capped at 100 dB when
// the MSE underflows 1e-10.
real psnr(const Tensor& a, const Tensor& b);
// same, restricted to pixels where mask > 0.5 (diagnostic column)
real psnr_masked(const Tensor& a, const Tensor& b, const Tensor& mask);

// structural similarity, 11x11 Gaussian window sigma=1.5, channel-averaged
real ssim(const Tensor& a, const Tensor& b);

struct PoseErrors {
  real rotation_deg = 0;   // mean over queries
  real translation_m = 0;  // mean over queries
  std::vector<real> per_query_deg;
};
PoseErrors pose_errors(const RelativePoseSet& gt, const RelativePoseSet& pred);

// mean |gt - pred| over pixels with gt_mask = 1; empty mask -> 0, and
// *empty_mask (if given) is set
real depth_l1(const Tensor& gt_depth, const Tensor& pred_depth,
              const Tensor& gt_mask, bool* empty_mask = nullptr);

real voxel_iou(const OccupancyGrid& pred, const OccupancyGrid& gt);

real median(std::vector<real> v);

struct SceneMetrics {
  std::string scene_id;
  real psnr = 0, masked_psnr = 0, ssim = 0;
  real rot_err_mean = 0, rot_err_median = 0, trans_err = 0;
  real depth_l1 = 0, voxel_iou = 0;
  bool has_pose = false;  // false for the GT-pose variant (columns null)
};

struct EvalReport {
  int schema_version = 1;
  std::string variant, dataset_id, config_hash;
  std::vector<SceneMetrics> scenes;

  SceneMetrics aggregate() const;  // plain means over scenes
  std::string to_json() const;     // lpips slot kept null for schema stability
  std::string to_table() const;    // aligned plain text
};

}  // namespace fk
