#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "forgekit/checkpoint.hpp"
#include "forgekit/image_io.hpp"
#include "forgekit/model.hpp"

using namespace fk;
namespace fs = std::filesystem;

namespace {

Config tiny_config() {
  Config c = Config::defaults();
  c.set("data.k", "3");
  c.set("data.res", "16");
  c.set("data.focal", "16");
  c.set("model.grid_d", "8");
  c.set("model.grid_c", "4");
  c.set("model.c2d", "16");
  c.set("model.backbone_base", "8");
  c.set("model.volume_mid", "4");
  c.set("model.volume_f", "2");
  c.set("model.rgb_mid", "4");
  c.set("render.samples", "8");
  c.set("pose.backbone_base", "4");
  c.set("pose.tok_ch", "8");
  c.set("pose.heads", "2");
  c.set("pose.feat_dim", "16");
  c.set("pose.pair_dim", "2");
  c.set("pose.pair_ch", "4");
  c.set("pose.pe_ch", "6");
  c.set("pose.mlp_hidden", "16");
  return c;
}

std::vector<Tensor> random_images(int k, int res, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<real> u(0, 1);
  std::vector<Tensor> imgs;
  for (int i = 0; i < k; ++i) {
    Tensor t = Tensor::zeros({3, res, res});
    for (int64_t j = 0; j < t.numel(); ++j) t.data()[j] = u(rng);
    imgs.push_back(t);
  }
  return imgs;
}

RelativePoseSet small_rel(int k) {
  RelativePoseSet rel;
  rel.canonical_index = 0;
  for (int q = 1; q < k; ++q) {
    CameraPose p;
    p.rotation = Quaternion::from_axis_angle({0, 1, 0}, 0.15 * q);
    p.translation = {0.01 * q, -0.02 * q, 0.03 * q};
    rel.poses.push_back(p);
  }
  return rel;
}

}  // namespace

TEST_CASE("config: defaults, layering, unknown keys, hash") {
  Config c = Config::defaults();
  CHECK(c.geti("data.k") == 5);
  CHECK(c.getf("loss.lambda_img") == 5.0);
  CHECK(c.get("fusion.mode") == "both");
  CHECK(!c.getb("loss.perceptual"));

  CHECK_THROWS(c.set("data.kk", "3"));
  CHECK_THROWS(c.get("no.such.key"));
  CHECK_THROWS(Config::load("", {"bogus.key=1"}));
  CHECK_THROWS(Config::load("/nonexistent/path.cfg"));

  const std::string h = Config::defaults().hash();
  CHECK(h.size() == 16);
  CHECK(h == Config::defaults().hash());
  Config d = Config::defaults();
  d.set("data.k", "4");
  CHECK(d.hash() != h);

  // file < overrides layering
  const auto dir = fs::temp_directory_path() / "fk_test_cfg";
  fs::create_directories(dir);
  const std::string path = (dir / "a.cfg").string();
  {
    FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("# comment\ndata.k = 4\ntrain.lr = 0.01\n", f);
    std::fclose(f);
  }
  Config l = Config::load(path, {"train.lr=0.02"});
  CHECK(l.geti("data.k") == 4);
  CHECK(l.getf("train.lr") == 0.02);
  fs::remove_all(dir);
}

TEST_CASE("checkpoint: round trip, hash guard, missing blocks") {
  const auto dir = fs::temp_directory_path() / "fk_test_ckpt";
  fs::create_directories(dir);
  const std::string path = (dir / "a.ckpt").string();

  std::mt19937_64 rng(3);
  Model m = Model::make(tiny_config(), rng);
  ParamMap params = m.params();
  Checkpoint ck;
  ck.stage = 1;
  ck.config_hash = m.config_hash;
  store_params(ck, params);
  Adam opt;
  opt.lr = 0.5;
  opt.reset(2);
  opt.step_count = 7;
  opt.m = {{1, 2}, {3}};
  opt.v = {{4, 5}, {6}};
  store_adam(ck, opt, "opt");
  save_checkpoint(path, ck);

  Checkpoint back = load_checkpoint(path);
  CHECK(back.stage == 1);
  CHECK(back.config_hash == m.config_hash);
  CHECK(back.blocks.size() == ck.blocks.size());

  // perturb the live params, then restore from the checkpoint
  Tensor& first = params.begin()->second;
  const real orig = first.data()[0];
  first.data()[0] = orig + 1;
  load_params(back, params, m.config_hash);
  CHECK(first.data()[0] == orig);

  CHECK_THROWS(load_params(back, params, "0000000000000000"));
  ParamMap extra = params;
  extra.emplace("not.a.block", Tensor::zeros({2}));
  CHECK_THROWS(load_params(back, extra));

  Adam opt2;
  CHECK(load_adam(back, opt2, "opt"));
  CHECK(opt2.step_count == 7);
  CHECK(opt2.m == opt.m);
  CHECK(opt2.v == opt.v);
  CHECK(!load_adam(back, opt2, "nope"));

  atomic_write_bytes(path, "BAD!garbage");
  CHECK_THROWS(load_checkpoint(path));
  fs::remove_all(dir);
}

TEST_CASE("model: shape contracts through the full pipeline") {
  std::mt19937_64 rng(11);
  Model m = Model::make(tiny_config(), rng);
  auto imgs = random_images(3, 16, 21);

  auto grids = m.encode(imgs);
  REQUIRE(grids.size() == 3);
  CHECK(grids[0].shape() == Shape{4, 8, 8, 8});

  RelativePoseSet rel = small_rel(3);
  NeuralVolume vol = m.build_volume(grids, pose_tensors(rel), rel);
  CHECK(vol.density.shape() == Shape{1, 16, 16, 16});
  CHECK(vol.features.shape() == Shape{2, 16, 16, 16});
  CHECK(vol.center == Vec3{0, 0, 1.5});

  Model::ViewRender vr = m.render_view(vol, pose_tensor(identity_pose()));
  CHECK(vr.rgb.shape() == Shape{3, 16, 16});
  CHECK(vr.mask.shape() == Shape{1, 16, 16});
  CHECK(vr.raw.depth.shape() == Shape{1, 8, 8});
  for (int64_t i = 0; i < vr.rgb.numel(); ++i) {
    CHECK(vr.rgb.data()[i] >= 0.0);
    CHECK(vr.rgb.data()[i] <= 1.0);
  }

  RelativePoseSet pred = m.predict_poses(imgs, 0);
  REQUIRE(pred.poses.size() == 2);
  for (const CameraPose& p : pred.poses) {
    CHECK(p.rotation.norm() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(p.rotation.w >= 0.0);
  }

  CHECK_THROWS(m.build_volume(grids, {pose_tensor(identity_pose())}, rel));
}

TEST_CASE("model: deterministic construction and inference") {
  std::mt19937_64 r1(5), r2(5);
  Model a = Model::make(tiny_config(), r1);
  Model b = Model::make(tiny_config(), r2);
  auto imgs = random_images(3, 16, 33);
  RelativePoseSet rel = small_rel(3);
  NeuralVolume va = a.reconstruct(imgs, rel), vb = b.reconstruct(imgs, rel);
  CHECK(va.density.values() == vb.density.values());
  CHECK(va.features.values() == vb.features.values());
  RelativePoseSet pa = a.predict_poses(imgs, 0), pb = b.predict_poses(imgs, 0);
  for (size_t i = 0; i < pa.poses.size(); ++i)
    CHECK(pose_to_array(pa.poses[i]) == pose_to_array(pb.poses[i]));
}

TEST_CASE("model: parameter registries split by training stage") {
  std::mt19937_64 rng(7);
  Model m = Model::make(tiny_config(), rng);
  ParamMap all = m.params(), recon = m.recon_params(), pose = m.pose_params();
  CHECK(all.size() == recon.size() + pose.size());
  for (const auto& [k, v] : recon) CHECK(all.count(k) == 1);
  for (const auto& [k, v] : pose) {
    CHECK(all.count(k) == 1);
    CHECK(recon.count(k) == 0);
    CHECK(k.rfind("pose", 0) == 0);
  }
}

TEST_CASE("model: pairwise_norm config is validated") {
  Config c = tiny_config();
  c.set("pose.pairwise_norm", "bogus");
  std::mt19937_64 rng(1);
  CHECK_THROWS(Model::make(c, rng));
  c.set("pose.pairwise_norm", "none");
  CHECK_NOTHROW(Model::make(c, rng));
}
