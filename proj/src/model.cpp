#include "forgekit/model.hpp"

#include <stdexcept>

namespace fk {

Model Model::make(const Config& cfg, std::mt19937_64& rng) {
  Model m;
  m.res = cfg.geti("data.res");
  m.focal = cfg.getf("data.focal");
  m.grid_d = cfg.geti("model.grid_d");
  m.grid_c = cfg.geti("model.grid_c");
  m.volume_f = cfg.geti("model.volume_f");
  m.render_samples = cfg.geti("render.samples");
  m.extent = cfg.getf("model.extent");
  m.fusion_mode = cfg.get("fusion.mode");
  m.pose_branch = cfg.get("pose.branch");
  if (m.pose_branch != "global" && m.pose_branch != "pairwise" &&
      m.pose_branch != "both")
    throw std::invalid_argument("config: pose.branch must be global, "
                                "pairwise or both");
  m.config_hash = cfg.hash();

  m.encoder = Encoder::make(cfg.geti("model.in_ch"),
                            cfg.geti("model.backbone_base"),
                            cfg.geti("model.stride"), m.grid_d,
                            cfg.geti("model.c2d"), m.grid_c, rng);

  PoseEstimator::Config pc;
  pc.img_ch = cfg.geti("model.in_ch");
  pc.img_res = m.res;
  pc.backbone_base = cfg.geti("pose.backbone_base");
  pc.stride = cfg.geti("pose.stride");
  pc.tok_ch = cfg.geti("pose.tok_ch");
  pc.heads = cfg.geti("pose.heads");
  pc.feat_dim = cfg.geti("pose.feat_dim");
  pc.grid_ch = m.grid_c;
  pc.grid_dim = m.grid_d;
  pc.pair_dim = cfg.geti("pose.pair_dim");
  pc.pair_ch = cfg.geti("pose.pair_ch");
  pc.pe_ch = cfg.geti("pose.pe_ch");
  const std::string norm = cfg.get("pose.pairwise_norm");
  if (norm != "softmax" && norm != "none")
    throw std::invalid_argument("config: pose.pairwise_norm must be softmax "
                                "or none");
  pc.pairwise_softmax = norm == "softmax";
  pc.dropout_p = cfg.getf("pose.dropout");
  pc.mlp_hidden = cfg.geti("pose.mlp_hidden");
  m.pose_est = PoseEstimator::make(pc, rng);

  m.fusion = Fusion::make(m.grid_c, rng);
  m.decoder = VolumeDecoder::make(m.grid_c, cfg.geti("model.volume_mid"),
                                  m.volume_f, rng);
  m.rgb_head = RgbHead::make(m.volume_f, cfg.geti("model.rgb_mid"), rng);
  return m;
}

ParamMap Model::params() {
  ParamMap m = recon_params();
  for (auto& [k, v] : pose_params()) m.emplace(k, v);
  return m;
}

ParamMap Model::recon_params() {
  ParamMap m;
  encoder.register_params(m, "enc");
  fusion.register_params(m, "fus");
  decoder.register_params(m, "dec");
  rgb_head.register_params(m, "rgb");
  return m;
}

ParamMap Model::pose_params() {
  ParamMap m;
  pose_est.register_params(m, "pose");
  return m;
}

std::vector<Tensor> Model::encode(const std::vector<Tensor>& images) const {
  std::vector<Tensor> grids;
  grids.reserve(images.size());
  for (const Tensor& img : images) grids.push_back(encoder(img));
  return grids;
}

NeuralVolume Model::build_volume(const std::vector<Tensor>& grids,
                                 const std::vector<Tensor>& rel7,
                                 const RelativePoseSet& rel_plain) const {
  const int k = static_cast<int>(grids.size());
  if (rel7.size() + 1 != grids.size())
    throw std::invalid_argument("build_volume: pose/grid arity mismatch");
  std::vector<Tensor> transformed;
  transformed.reserve(k);
  int q = 0;
  for (int i = 0; i < k; ++i) {
    if (i == rel_plain.canonical_index)
      transformed.push_back(grids[i]);
    else
      transformed.push_back(
          transform_grid_ad(grids[i], rel7[q++], cube_center, extent));
  }
  Tensor fused = fusion.fuse(transformed, rel_plain, fusion_mode);
  return decoder(fused, cube_center, extent);
}

NeuralVolume Model::reconstruct(const std::vector<Tensor>& images,
                                const RelativePoseSet& rel) const {
  return build_volume(encode(images), pose_tensors(rel), rel);
}

Model::ViewRender Model::render_view(const NeuralVolume& vol,
                                     const Tensor& cam_pose7) const {
  const int hr = res / 2;  // feature map renders at half resolution
  RayBatch rays = generate_rays_ad(cam_pose7, focal / 2, hr * 0.5, hr * 0.5,
                                   hr, hr);
  ViewRender out;
  out.raw = render(vol, rays, hr, hr, render_samples);
  Tensor head = rgb_head(out.raw.feature_map);  // [4,res,res]
  out.rgb = narrow(head, 0, 0, 3);
  // the reported mask is the rendered alpha, not the head's 4th channel:
  // supervising alpha is what carves density, otherwise an everywhere-opaque
  // volume with per-view painted faces is a stable optimum
  out.mask = upsample2x_2d(out.raw.mask);
  return out;
}

Tensor Model::predict_pose_rows(const std::vector<Tensor>& images,
                                const std::vector<Tensor>& grids,
                                int canonical_index, bool training,
                                std::mt19937_64* rng) const {
  const int kq = static_cast<int>(images.size()) - 1;
  const Shape feat{kq, pose_est.cfg.feat_dim};
  // disabled branch feeds zeros so the regression MLP keeps its input width
  Tensor g = pose_branch == "pairwise"
                 ? Tensor::zeros(feat)
                 : pose_est.global_features(images, canonical_index);
  Tensor p = pose_branch == "global"
                 ? Tensor::zeros(feat)
                 : pose_est.pairwise_features(grids, canonical_index);
  return pose_est.regress(g, p, training, rng);
}

RelativePoseSet Model::predict_poses(const std::vector<Tensor>& images,
                                     int canonical_index) const {
  std::vector<Tensor> grids = encode(images);
  Tensor rows =
      predict_pose_rows(images, grids, canonical_index, false, nullptr);
  return pose_set_from_tensor(rows, canonical_index);
}

std::vector<Tensor> pose_tensors(const RelativePoseSet& rel) {
  std::vector<Tensor> out;
  out.reserve(rel.poses.size());
  for (const CameraPose& p : rel.poses) out.push_back(pose_tensor(p));
  return out;
}

}  // namespace fk
