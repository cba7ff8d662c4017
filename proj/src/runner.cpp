#include "forgekit/runner.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "forgekit/checkpoint.hpp"
#include "forgekit/image_io.hpp"
#include "forgekit/training.hpp"

namespace fk {

namespace {

std::string scene_name(const std::string& dir) {
  return std::filesystem::path(dir).filename().string();
}

}  // namespace

Tensor downsample2x(const Tensor& img) {
  const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  const int oh = h / 2, ow = w / 2;
  std::vector<real> out(static_cast<size_t>(c) * oh * ow);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        const real* p = img.data() + (static_cast<int64_t>(ch) * h + 2 * y) * w;
        out[(static_cast<size_t>(ch) * oh + y) * ow + x] =
            0.25 * (p[2 * x] + p[2 * x + 1] + p[w + 2 * x] + p[w + 2 * x + 1]);
      }
  return Tensor::from_data({c, oh, ow}, std::move(out));
}

EvalReport run_eval(const Model& model, const Config& cfg,
                    const std::string& manifest_path,
                    const std::string& variant, int tto_iters) {
  if (variant != "forge-star" && variant != "forge-dagger" &&
      variant != "forge")
    throw std::invalid_argument("run_eval: unknown variant " + variant);
  const LossWeights w = LossWeights::from_config(cfg);
  const real threshold = cfg.getf("eval.voxel_threshold");
  const real tto_lr = cfg.getf("tto.lr");

  EvalReport rep;
  rep.variant = variant;
  rep.dataset_id = manifest_path;
  rep.config_hash = model.config_hash;

  for (const std::string& dir : list_scenes(manifest_path)) {
    Episode ep = load_episode(dir);
    SceneSample s = make_sample(ep);
    const int k = static_cast<int>(s.imgs.size());

    int canon = 0;
    RelativePoseSet rel;
    bool has_pose = true;
    if (variant == "forge-star") {
      rel = s.gt_rel;
      has_pose = false;
    } else if (variant == "forge-dagger") {
      rel = model.predict_poses(s.imgs, 0);
    } else {
      CanonicalChoice choice = canonical_selection(model, s.imgs, s.masks, w);
      canon = choice.index;
      rel = tto_iters > 0 ? test_time_optimize(model, s.imgs, s.masks,
                                               choice.poses, tto_iters,
                                               tto_lr, w)
                          : choice.poses;
    }

    NeuralVolume vol = model.reconstruct(s.imgs, rel);
    SceneMetrics m;
    m.scene_id = scene_name(dir);
    m.has_pose = has_pose;

    const int ne = static_cast<int>(s.eval_imgs.size());
    for (int i = 0; i < ne; ++i) {
      Model::ViewRender vr = model.render_view(
          vol, pose_tensor(relative_pose(s.cams[canon], s.eval_cams[i])));
      m.psnr += psnr(s.eval_imgs[i], vr.rgb) / ne;
      m.masked_psnr +=
          psnr_masked(s.eval_imgs[i], vr.rgb, s.eval_masks[i]) / ne;
      m.ssim += ssim(s.eval_imgs[i], vr.rgb) / ne;
      Tensor gt_depth = downsample2x(ep.depths[ep.eval_views[i]]);
      Tensor gt_mask = downsample2x(s.eval_masks[i]);
      m.depth_l1 += depth_l1(gt_depth, vr.raw.depth, gt_mask) / ne;
    }

    OccupancyGrid pred = extract_voxels(vol, threshold);
    OccupancyGrid gt = voxelize_camera(ep.scene, vol.dim(), s.cams[canon],
                                       vol.center, vol.extent);
    m.voxel_iou = voxel_iou(pred, gt);

    if (has_pose) {
      RelativePoseSet gt_rel;
      gt_rel.canonical_index = canon;
      for (int j = 0; j < k; ++j)
        if (j != canon)
          gt_rel.poses.push_back(relative_pose(s.cams[canon], s.cams[j]));
      PoseErrors pe = pose_errors(gt_rel, rel);
      m.rot_err_mean = pe.rotation_deg;
      m.rot_err_median = median(pe.per_query_deg);
      m.trans_err = pe.translation_m;
    }
    rep.scenes.push_back(std::move(m));
  }
  return rep;
}

void run_render(const Model& model, const std::string& scene_dir, int orbit,
                const std::string& out_dir, real voxel_threshold) {
  if (orbit < 1) throw std::invalid_argument("run_render: orbit must be >= 1");
  Episode ep = load_episode(scene_dir);
  SceneSample s = make_sample(ep);
  NeuralVolume vol = model.reconstruct(s.imgs, s.gt_rel);
  std::filesystem::create_directories(out_dir);
  for (int n = 0; n < orbit; ++n) {
    const real angle = 2.0 * M_PI * n / orbit;
    // rotate the viewpoint about the vertical axis through the cube center
    const Quaternion q = Quaternion::from_axis_angle({0, 1, 0}, angle);
    CameraPose p;
    p.rotation = q;
    const Vec3 rc = q.rotate(vol.center);
    p.translation = {vol.center[0] - rc[0], vol.center[1] - rc[1],
                     vol.center[2] - rc[2]};
    Model::ViewRender vr = model.render_view(vol, pose_tensor(p));
    char name[64];
    std::snprintf(name, sizeof(name), "/orbit_%02d.png", n);
    write_png_rgb(out_dir + name, vr.rgb);
    std::snprintf(name, sizeof(name), "/orbit_%02d_depth.bin", n);
    write_depth_bin(out_dir + name, vr.raw.depth);
  }
  if (voxel_threshold > 0) {
    const std::vector<uint8_t> bytes =
        encode_occupancy_rle(extract_voxels(vol, voxel_threshold));
    atomic_write_bytes(out_dir + "/voxels.rle",
                       std::string(bytes.begin(), bytes.end()));
  }
}

std::string run_ablation(const Config& base, const std::string& suite,
                         const std::string& manifest_path,
                         const std::string& ckpt_path) {
  std::string key, eval_variant;
  std::vector<std::string> variants;
  if (suite == "fusion") {
    key = "fusion.mode";
    variants = {"avg", "seq", "both"};
    eval_variant = "forge-star";
  } else if (suite == "pose") {
    key = "pose.branch";
    variants = {"global", "pairwise", "both"};
    eval_variant = "forge-dagger";
  } else {
    throw std::invalid_argument("run_ablation: unknown suite " + suite);
  }

  std::string table = "suite: " + suite + "  dataset: " + manifest_path + "\n";
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-10s %9s %9s\n", "variant",
                suite == "fusion" ? "psnr" : "rot_deg",
                suite == "fusion" ? "ssim" : "trans_m");
  table += buf;
  for (const std::string& v : variants) {
    Config cfg = base;
    cfg.set(key, v);
    std::mt19937_64 rng(cfg.geti("train.seed"));
    Model m = Model::make(cfg, rng);
    if (!ckpt_path.empty()) {
      // variants share one architecture; skip the hash guard on purpose
      ParamMap params = m.params();
      load_params(load_checkpoint(ckpt_path), params);
    }
    EvalReport rep = run_eval(m, cfg, manifest_path, eval_variant, 0);
    SceneMetrics agg = rep.aggregate();
    if (suite == "fusion")
      std::snprintf(buf, sizeof(buf), "%-10s %9.3f %9.4f\n", v.c_str(),
                    agg.psnr, agg.ssim);
    else
      std::snprintf(buf, sizeof(buf), "%-10s %9.3f %9.4f\n", v.c_str(),
                    agg.rot_err_mean, agg.trans_err);
    table += buf;
  }
  return table;
}

}  // namespace fk
