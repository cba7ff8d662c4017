#pragma once

#include <string>

#include "forgekit/config.hpp"
#include "forgekit/eval.hpp"
#include "forgekit/model.hpp"

namespace fk {

// Variant recipes: "forge-star" reconstructs under ground-truth relative
// poses (pose-error columns null); "forge-dagger" uses predicted poses with
// the first view canonical; "forge" adds canonical view selection and
// photometric test-time optimization (tto_iters > 0).
EvalReport run_eval(const Model& model, const Config& cfg,
                    const std::string& manifest_path,
                    const std::string& variant, int tto_iters);

// Renders `orbit` novel views on a horizontal ring around the volume built
// from one scene's input views (GT poses); writes orbit_<n>.png and
// orbit_<n>_depth.bin, plus voxels.rle when threshold > 0.
void run_render(const Model& model, const std::string& scene_dir,
                int orbit, const std::string& out_dir, real voxel_threshold);

// suite "fusion": avg / seq / both under GT poses, PSNR + SSIM columns.
// suite "pose": global / pairwise / both branches, rotation + translation
// error columns. ckpt_path (optional) preloads weights into every variant;
// variants share one architecture, so blocks transfer across the sweep.
std::string run_ablation(const Config& base, const std::string& suite,
                         const std::string& manifest_path,
                         const std::string& ckpt_path);

// 2x2 box filter, used to compare half-resolution render outputs with
// full-resolution ground truth
Tensor downsample2x(const Tensor& img);

}  // namespace fk
