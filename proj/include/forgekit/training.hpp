#pragma once

#include <random>
#include <string>
#include <vector>

#include "forgekit/config.hpp"
#include "forgekit/datagen.hpp"
#include "forgekit/model.hpp"
#include "forgekit/tensor.hpp"

namespace fk {

struct LossWeights {
  real lambda_img = 5, lambda_p = 0.02, lambda_pose = 1;
  bool perceptual = false;  // hook only; no pretrained network shipped
  static LossWeights from_config(const Config& cfg);
};

// Eq-style photometric loss: MAE(mask) + lambda_img * MAE(image)
Tensor loss_l2d(const Tensor& gt_mask, const Tensor& pred_mask,
                const Tensor& gt_img, const Tensor& pred_img,
                const LossWeights& w);

struct ViewPair {
  Tensor gt_img, gt_mask, pred_img, pred_mask;
};
// mean over views of (L_2D + lambda_p * perceptual); perceptual term is 0
// while the hook is disabled
Tensor loss_mv(const std::vector<ViewPair>& views, const LossWeights& w);

// mean over queries of squared-L2 on hemisphere-fixed quaternions plus
// squared-L2 on translations; pred_rows7 is [k-1,7] in query order
Tensor loss_pose(const RelativePoseSet& gt, const Tensor& pred_rows7);

// Episode unpacked into model-ready tensors (input views first).
struct SceneSample {
  std::vector<Tensor> imgs, masks;            // input views
  std::vector<Tensor> eval_imgs, eval_masks;  // held cameras
  std::vector<CameraPose> cams, eval_cams;    // absolute poses
  RelativePoseSet gt_rel;                     // canonical = input view 0
};
SceneSample make_sample(const Episode& ep);

// cross-split consistency: volume from the first split_n input views renders
// the remaining input views (GT poses), and vice versa; mean of both
// directions. Requires 1 <= split_n < k.
Tensor loss_corr(const Model& model, const SceneSample& s, int split_n,
                 const LossWeights& w);

struct TrainResult {
  std::string checkpoint_path, log_path;
  std::vector<real> losses;  // per-iteration totals
};

// One stage of the 1 -> 2 -> 3 protocol on the dataset under manifest_path.
// Writes stage<N>.ckpt and stage<N>_loss.csv into out_dir; stages 2 and 3
// load the preceding stage's checkpoint from out_dir and throw when it is
// missing. Aborts (throws) on non-finite loss.
TrainResult train_stage(Model& model, const Config& cfg, int stage,
                        const std::string& manifest_path,
                        const std::string& out_dir);

// Photometric refinement of the k-1 relative poses with frozen weights;
// returns the iterate with the lowest objective (final <= initial). iters=0
// returns init unchanged.
RelativePoseSet test_time_optimize(const Model& model,
                                   const std::vector<Tensor>& images,
                                   const std::vector<Tensor>& masks,
                                   const RelativePoseSet& init, int iters,
                                   real lr, const LossWeights& w);

struct CanonicalChoice {
  int index = 0;
  real criterion = 0;
  RelativePoseSet poses;  // prediction under the winning canonical
};
// k inferences, one per canonical candidate; criterion = summed input-view
// L_2D; ties break to the lowest index; k=1 skips inference entirely
CanonicalChoice canonical_selection(const Model& model,
                                    const std::vector<Tensor>& images,
                                    const std::vector<Tensor>& masks,
                                    const LossWeights& w);
// argmin with lowest-index tie-break (selection criterion, injectable)
int argmin_index(const std::vector<real>& losses);

}  // namespace fk
