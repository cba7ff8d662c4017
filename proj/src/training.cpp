#include "forgekit/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "forgekit/checkpoint.hpp"

namespace fk {

namespace {

Tensor mae(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument("loss: shape mismatch");
  return mean(abs(a - b));
}

Tensor pose_row(const Tensor& rows, int q) {
  return reshape(narrow(rows, 0, q, 1), {7});
}

// hemisphere flip mask from current values (constant w.r.t. the graph)
std::vector<char> flip_mask(const Tensor& rows) {
  const int k = rows.dim(0);
  std::vector<char> m(static_cast<size_t>(k) * 7, 0);
  for (int q = 0; q < k; ++q) {
    const real* r = rows.data() + static_cast<int64_t>(q) * 7;
    bool flip = r[0] < 0;
    if (r[0] == 0) {
      for (int i = 1; i < 4; ++i) {
        if (r[i] != 0) {
          flip = r[i] < 0;
          break;
        }
      }
    }
    if (flip)
      for (int i = 0; i < 4; ++i) m[q * 7 + i] = 1;
  }
  return m;
}

Tensor rel_pose_rows(const RelativePoseSet& rel) {
  std::vector<real> data;
  for (const CameraPose& p : rel.poses) {
    const auto a = pose_to_array({p.rotation.hemisphere(), p.translation});
    data.insert(data.end(), a.begin(), a.end());
  }
  return Tensor::from_data({static_cast<int>(rel.poses.size()), 7},
                           std::move(data));
}

}  // namespace

LossWeights LossWeights::from_config(const Config& cfg) {
  LossWeights w;
  w.lambda_img = cfg.getf("loss.lambda_img");
  w.lambda_p = cfg.getf("loss.lambda_p");
  w.lambda_pose = cfg.getf("loss.lambda_pose");
  w.perceptual = cfg.getb("loss.perceptual");
  if (w.lambda_img < 0 || w.lambda_p < 0 || w.lambda_pose < 0)
    throw std::invalid_argument("loss weights must be nonnegative");
  return w;
}

Tensor loss_l2d(const Tensor& gt_mask, const Tensor& pred_mask,
                const Tensor& gt_img, const Tensor& pred_img,
                const LossWeights& w) {
  return mae(gt_mask, pred_mask) + w.lambda_img * mae(gt_img, pred_img);
}

Tensor loss_mv(const std::vector<ViewPair>& views, const LossWeights& w) {
  if (views.empty()) throw std::invalid_argument("loss_mv: no views");
  Tensor acc;
  for (const ViewPair& v : views) {
    Tensor l = loss_l2d(v.gt_mask, v.pred_mask, v.gt_img, v.pred_img, w);
    // perceptual hook disabled: contributes exactly zero
    acc = acc.defined() ? acc + l : l;
  }
  return acc / static_cast<real>(views.size());
}

Tensor loss_pose(const RelativePoseSet& gt, const Tensor& pred_rows7) {
  const int k = static_cast<int>(gt.poses.size());
  if (pred_rows7.dim(0) != k || pred_rows7.dim(1) != 7)
    throw std::invalid_argument("loss_pose: arity mismatch");
  Tensor pred = where(flip_mask(pred_rows7), -pred_rows7, pred_rows7);
  Tensor d = pred - rel_pose_rows(gt);
  return sum(pow2(d)) / static_cast<real>(k);
}

SceneSample make_sample(const Episode& ep) {
  SceneSample s;
  for (int i : ep.input_views) {
    s.imgs.push_back(ep.images[i]);
    s.masks.push_back(ep.masks[i]);
    s.cams.push_back(ep.cameras[i].pose);
  }
  for (int i : ep.eval_views) {
    s.eval_imgs.push_back(ep.images[i]);
    s.eval_masks.push_back(ep.masks[i]);
    s.eval_cams.push_back(ep.cameras[i].pose);
  }
  s.gt_rel = ep.gt_relative_poses;
  return s;
}

Tensor loss_corr(const Model& model, const SceneSample& s, int split_n,
                 const LossWeights& w) {
  const int k = static_cast<int>(s.imgs.size());
  if (split_n < 1 || split_n >= k)
    throw std::invalid_argument("loss_corr: need 1 <= split_n < k");
  auto direction = [&](int lo, int hi) {  // build [lo,hi), render the rest
    std::vector<Tensor> imgs;
    RelativePoseSet rel;
    rel.canonical_index = 0;
    for (int i = lo; i < hi; ++i) {
      imgs.push_back(s.imgs[i]);
      if (i > lo) rel.poses.push_back(relative_pose(s.cams[lo], s.cams[i]));
    }
    NeuralVolume vol = model.reconstruct(imgs, rel);
    std::vector<ViewPair> pairs;
    for (int j = 0; j < k; ++j) {
      if (j >= lo && j < hi) continue;
      Model::ViewRender vr = model.render_view(
          vol, pose_tensor(relative_pose(s.cams[lo], s.cams[j])));
      pairs.push_back({s.imgs[j], s.masks[j], vr.rgb, vr.mask});
    }
    return loss_mv(pairs, w);
  };
  return (direction(0, split_n) + direction(split_n, k)) * 0.5;
}

int argmin_index(const std::vector<real>& losses) {
  if (losses.empty()) throw std::invalid_argument("argmin of empty set");
  int best = 0;
  for (int i = 1; i < static_cast<int>(losses.size()); ++i)
    if (losses[i] < losses[best]) best = i;
  return best;
}

namespace {

// sum of input-view L_2D for a reconstruction under the given poses; the
// canonical view renders with the identity pose
real input_view_criterion(const Model& model, const std::vector<Tensor>& imgs,
                          const std::vector<Tensor>& masks,
                          const NeuralVolume& vol, const RelativePoseSet& rel,
                          const LossWeights& w) {
  real total = 0;
  int q = 0;
  for (int i = 0; i < static_cast<int>(imgs.size()); ++i) {
    const CameraPose cam =
        i == rel.canonical_index ? identity_pose() : rel.poses[q++];
    Model::ViewRender vr = model.render_view(vol, pose_tensor(cam));
    total += loss_l2d(masks[i], vr.mask, imgs[i], vr.rgb, w).item();
  }
  return total;
}

}  // namespace

CanonicalChoice canonical_selection(const Model& model,
                                    const std::vector<Tensor>& images,
                                    const std::vector<Tensor>& masks,
                                    const LossWeights& w) {
  const int k = static_cast<int>(images.size());
  if (k < 1) throw std::invalid_argument("canonical_selection: no views");
  CanonicalChoice out;
  if (k == 1) {
    out.poses.canonical_index = 0;
    return out;  // nothing to choose; no inference spent
  }
  std::vector<Tensor> grids = model.encode(images);
  std::vector<real> criteria;
  std::vector<RelativePoseSet> sets;
  for (int c = 0; c < k; ++c) {
    Tensor rows = model.predict_pose_rows(images, grids, c, false, nullptr);
    RelativePoseSet set = pose_set_from_tensor(rows, c);
    NeuralVolume vol = model.build_volume(grids, pose_tensors(set), set);
    criteria.push_back(
        input_view_criterion(model, images, masks, vol, set, w));
    sets.push_back(std::move(set));
  }
  out.index = argmin_index(criteria);
  out.criterion = criteria[out.index];
  out.poses = sets[out.index];
  return out;
}

RelativePoseSet test_time_optimize(const Model& model,
                                   const std::vector<Tensor>& images,
                                   const std::vector<Tensor>& masks,
                                   const RelativePoseSet& init, int iters,
                                   real lr, const LossWeights& w) {
  if (iters == 0) return init;
  const int k = static_cast<int>(images.size());
  if (static_cast<int>(init.poses.size()) + 1 != k)
    throw std::invalid_argument("test_time_optimize: pose arity mismatch");

  std::vector<Tensor> grids;
  for (const Tensor& g : model.encode(images)) grids.push_back(detach(g));

  std::vector<Tensor> pose7;
  for (const CameraPose& p : init.poses) pose7.push_back(pose_tensor(p, true));

  Adam opt;
  opt.lr = lr;
  opt.reset(pose7.size());

  RelativePoseSet best = init;
  real best_loss = std::numeric_limits<real>::infinity();
  for (int it = 0; it < iters; ++it) {
    RelativePoseSet cur;
    cur.canonical_index = init.canonical_index;
    for (const Tensor& p : pose7) cur.poses.push_back(pose_from_tensor(p));

    NeuralVolume vol = model.build_volume(grids, pose7, cur);
    Tensor loss;
    int q = 0;
    for (int i = 0; i < k; ++i) {
      Tensor cam = i == cur.canonical_index ? pose_tensor(identity_pose())
                                            : pose7[q++];
      Model::ViewRender vr = model.render_view(vol, cam);
      Tensor l = loss_l2d(masks[i], vr.mask, images[i], vr.rgb, w);
      loss = loss.defined() ? loss + l : l;
    }
    const real lv = loss.item();
    if (!std::isfinite(lv))
      throw std::runtime_error("test_time_optimize: non-finite loss");
    if (lv < best_loss) {
      best_loss = lv;
      best = cur;
    }
    backward(loss);
    opt.step(pose7);
    for (Tensor& p : pose7) {
      // re-project onto the unit-quaternion manifold after the raw step
      const CameraPose fixed = pose_from_tensor(p);
      const auto a = pose_to_array(fixed);
      std::copy(a.begin(), a.end(), p.data());
      p.zero_grad();
    }
  }
  return best;
}

TrainResult train_stage(Model& model, const Config& cfg, int stage,
                        const std::string& manifest_path,
                        const std::string& out_dir) {
  namespace fs = std::filesystem;
  if (stage < 1 || stage > 3)
    throw std::invalid_argument("train_stage: stage must be 1, 2 or 3");
  std::vector<SceneSample> samples;
  for (const std::string& dir : list_scenes(manifest_path))
    samples.push_back(make_sample(load_episode(dir)));
  if (samples.empty())
    throw std::invalid_argument("train_stage: dataset has no scenes");

  const LossWeights w = LossWeights::from_config(cfg);
  const int iters = cfg.geti("train.iters" + std::to_string(stage));
  const int batch = cfg.geti("train.batch");
  const int log_every = cfg.geti("train.log_every");
  const int split_n = cfg.geti("data.split_n");
  const real base_lr = cfg.getf("train.lr");
  std::mt19937_64 rng(cfg.geti("train.seed") * 1000003ULL + stage);

  fs::create_directories(out_dir);
  ParamMap all = model.params();
  if (stage >= 2) {
    const std::string prev =
        out_dir + "/stage" + std::to_string(stage - 1) + ".ckpt";
    if (!fs::exists(prev))
      throw std::invalid_argument("train_stage: stage " +
                                  std::to_string(stage) + " requires " + prev);
    load_params(load_checkpoint(prev), all, model.config_hash);
  }

  ParamMap recon = model.recon_params();
  ParamMap pose = model.pose_params();
  // stage-2 sub-phases: global-only, pairwise-only, then joint fine-tuning
  auto stage2_phase = [&](int it) {
    if (it <= iters / 3) return 0;
    if (it <= 2 * iters / 3) return 1;
    return 2;
  };
  auto pose_subset = [&](int phase) {
    // single-branch ablations skip the alternating sub-phases
    if (model.pose_branch != "both") return pose;
    ParamMap sel;
    for (auto& [name, t] : pose) {
      const bool global = name.find(".g_") != std::string::npos ||
                          name.find(".gpr") != std::string::npos ||
                          name.find("learned_pe") != std::string::npos;
      const bool shared = name.find(".mlp") != std::string::npos;
      if (phase == 2 || shared || (phase == 0 && global) ||
          (phase == 1 && !global))
        sel.emplace(name, t);
    }
    return sel;
  };

  TrainResult res;
  res.checkpoint_path = out_dir + "/stage" + std::to_string(stage) + ".ckpt";
  res.log_path = out_dir + "/stage" + std::to_string(stage) + "_loss.csv";
  std::ofstream log(res.log_path);
  if (!log) throw std::runtime_error("train_stage: cannot write " + res.log_path);
  log << "iteration,stage,l_mv,l_corr,l_pose,total\n";

  Adam opt;
  int cur_phase = -1;
  std::vector<Tensor> trainable;
  int64_t cursor = 0;
  for (int it = 1; it <= iters; ++it) {
    const int phase = stage == 2 ? stage2_phase(it) : 0;
    if (phase != cur_phase) {
      cur_phase = phase;
      ParamMap sel = stage == 1 ? recon : stage == 2 ? pose_subset(phase) : all;
      trainable = param_list(sel);
      opt.reset(trainable.size());
    }
    opt.lr = base_lr *
             (it > 3 * iters / 4 ? 0.25 : it > iters / 2 ? 0.5 : 1.0);

    Tensor total;
    real v_mv = 0, v_corr = 0, v_pose = 0;
    for (int b = 0; b < batch; ++b) {
      const SceneSample& s = samples[cursor++ % samples.size()];
      const int k = static_cast<int>(s.imgs.size());
      Tensor scene_loss;
      if (stage == 1 || stage == 3) {
        std::vector<Tensor> grids = model.encode(s.imgs);
        std::vector<Tensor> rel7;
        RelativePoseSet rel = s.gt_rel;
        Tensor rows;
        if (stage == 3) {
          rows = model.predict_pose_rows(s.imgs, grids, 0, true, &rng);
          rel = pose_set_from_tensor(rows, 0);
          for (int q = 0; q < k - 1; ++q) rel7.push_back(pose_row(rows, q));
        } else {
          rel7 = pose_tensors(rel);
        }
        NeuralVolume vol = model.build_volume(grids, rel7, rel);
        std::vector<ViewPair> pairs;
        int q = 0;
        for (int i = 0; i < k; ++i) {
          Tensor cam =
              i == 0 ? pose_tensor(identity_pose()) : rel7[q++];
          Model::ViewRender vr = model.render_view(vol, cam);
          pairs.push_back({s.imgs[i], s.masks[i], vr.rgb, vr.mask});
        }
        Tensor l_mv = loss_mv(pairs, w);
        Tensor l_corr = loss_corr(model, s, split_n, w);
        v_mv += l_mv.item();
        v_corr += l_corr.item();
        scene_loss = l_mv + l_corr;
        if (stage == 3) {
          Tensor l_pose = loss_pose(s.gt_rel, rows);
          v_pose += l_pose.item();
          scene_loss = scene_loss + w.lambda_pose * l_pose;
        }
      } else {  // stage 2: pose branch only, encoder grids detached
        std::vector<Tensor> grids;
        for (const Tensor& g : model.encode(s.imgs)) grids.push_back(detach(g));
        Tensor rows = model.predict_pose_rows(s.imgs, grids, 0, true, &rng);
        Tensor l_pose = loss_pose(s.gt_rel, rows);
        v_pose += l_pose.item();
        scene_loss = l_pose;
      }
      total = total.defined() ? total + scene_loss : scene_loss;
    }
    total = total / static_cast<real>(batch);
    const real tv = total.item();
    if (!std::isfinite(tv))
      throw std::runtime_error("train_stage: non-finite loss at iteration " +
                               std::to_string(it) + " (stage " +
                               std::to_string(stage) + ")");
    res.losses.push_back(tv);
    if (it == 1 || it == iters || it % log_every == 0)
      log << it << "," << stage << "," << v_mv / batch << "," << v_corr / batch
          << "," << v_pose / batch << "," << tv << "\n";

    backward(total);
    opt.step(trainable);
    for (auto& [name, t] : all) t.zero_grad();
  }
  log.close();

  Checkpoint ckpt;
  ckpt.stage = static_cast<uint32_t>(stage);
  ckpt.config_hash = model.config_hash;
  store_params(ckpt, all);
  store_adam(ckpt, opt, "opt");
  save_checkpoint(res.checkpoint_path, ckpt);
  return res;
}

}  // namespace fk
