#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <forgekit.h>

namespace fs = std::filesystem;

namespace {

const char* kTiny[] = {
    "data.k=3",           "data.res=16",        "data.focal=16",
    "data.split_n=1",     "model.grid_d=8",     "model.grid_c=4",
    "model.c2d=16",       "model.backbone_base=8", "model.volume_mid=4",
    "model.volume_f=2",   "model.rgb_mid=4",    "render.samples=8",
    "pose.backbone_base=4", "pose.tok_ch=8",    "pose.heads=2",
    "pose.feat_dim=16",   "pose.pair_dim=2",    "pose.pair_ch=4",
    "pose.pe_ch=6",       "pose.mlp_hidden=16", "train.batch=1",
    "train.iters1=2",     "train.iters2=3",     "train.iters3=1",
};
const int kTinyN = sizeof(kTiny) / sizeof(kTiny[0]);

std::string temp_dir(const char* tag) {
  auto d = fs::temp_directory_path() / (std::string("fk_capi_") + tag);
  fs::remove_all(d);
  fs::create_directories(d);
  return d.string();
}

}  // namespace

TEST_CASE("config handle: layering, hash, unknown keys") {
  fk_config* cfg = nullptr;
  REQUIRE(fk_config_create(nullptr, kTiny, kTinyN, &cfg) == FK_OK);
  char buf[64];
  CHECK(fk_config_get(cfg, "data.k", buf, sizeof(buf)) == FK_OK);
  CHECK(std::string(buf) == "3");
  CHECK(fk_config_get(cfg, "bogus.key", buf, sizeof(buf)) == FK_ERR_USAGE);
  CHECK(std::string(fk_last_error()).find("bogus.key") != std::string::npos);

  char h1[17], h2[17];
  CHECK(fk_config_hash(cfg, h1, sizeof(h1)) == FK_OK);
  CHECK(std::strlen(h1) == 16);
  CHECK(fk_config_hash(cfg, h2, 4) == FK_ERR_USAGE);

  const char* bad[] = {"no.such=1"};
  fk_config* cfg2 = nullptr;
  CHECK(fk_config_create(nullptr, bad, 1, &cfg2) == FK_ERR_USAGE);
  CHECK(cfg2 == nullptr);
  fk_config_destroy(cfg);
}

TEST_CASE("full pipeline through the C API") {
  fk_config* cfg = nullptr;
  REQUIRE(fk_config_create(nullptr, kTiny, kTinyN, &cfg) == FK_OK);
  const std::string ds = temp_dir("ds"), run = temp_dir("run"),
                    out = temp_dir("out");

  char manifest[4096];
  REQUIRE(fk_gen_data(cfg, 2, 3, 11, ds.c_str(), manifest,
                      sizeof(manifest)) == FK_OK);
  CHECK(fs::exists(manifest));
  CHECK(fk_gen_data(cfg, -1, 3, 11, ds.c_str(), nullptr, 0) == FK_ERR_USAGE);

  fk_session* s = nullptr;
  REQUIRE(fk_session_create(cfg, &s) == FK_OK);

  // prerequisites enforced through the API boundary
  CHECK(fk_train(s, 2, manifest, run.c_str()) == FK_ERR_USAGE);
  CHECK(fk_train(s, 0, manifest, run.c_str()) == FK_ERR_USAGE);
  REQUIRE(fk_train(s, 1, manifest, run.c_str()) == FK_OK);
  REQUIRE(fk_train(s, 2, manifest, run.c_str()) == FK_OK);
  REQUIRE(fk_train(s, 3, manifest, run.c_str()) == FK_OK);
  CHECK(fs::exists(run + "/stage3.ckpt"));
  CHECK(fs::exists(run + "/stage2_loss.csv"));

  const std::string ckpt = run + "/stage1.ckpt";
  CHECK(fk_session_load_checkpoint(s, ckpt.c_str()) == FK_OK);
  CHECK(fk_session_load_checkpoint(s, "/nonexistent.ckpt") == FK_ERR_IO);

  const std::string json = out + "/rep.json", table = out + "/rep.txt";
  CHECK(fk_eval(s, manifest, "forge-star", 0, json.c_str(), table.c_str()) ==
        FK_OK);
  CHECK(fs::exists(json));
  CHECK(fs::exists(table));
  CHECK(fk_eval(s, manifest, "bogus", 0, nullptr, nullptr) == FK_ERR_USAGE);

  const std::string scene = ds + "/scene_0000";
  CHECK(fk_render(s, scene.c_str(), 2, out.c_str(), 1.0) == FK_OK);
  CHECK(fs::exists(out + "/orbit_01.png"));
  CHECK(fs::exists(out + "/voxels.rle"));
  CHECK(fk_render(s, scene.c_str(), 0, out.c_str(), 1.0) == FK_ERR_USAGE);

  const std::string abl = out + "/abl.txt";
  CHECK(fk_ablate(cfg, "fusion", manifest, ckpt.c_str(), abl.c_str()) == FK_OK);
  CHECK(fs::exists(abl));
  CHECK(fk_ablate(cfg, "bogus", manifest, nullptr, abl.c_str()) ==
        FK_ERR_USAGE);

  fk_session_destroy(s);
  fk_config_destroy(cfg);
  fs::remove_all(ds);
  fs::remove_all(run);
  fs::remove_all(out);
}

TEST_CASE("null-handle guards") {
  CHECK(fk_config_create(nullptr, nullptr, 0, nullptr) == FK_ERR_USAGE);
  fk_session* s = nullptr;
  CHECK(fk_session_create(nullptr, &s) == FK_ERR_USAGE);
  CHECK(fk_train(nullptr, 1, "m", "o") == FK_ERR_USAGE);
  CHECK(fk_eval(nullptr, "m", "forge", 0, nullptr, nullptr) == FK_ERR_USAGE);
  CHECK(fk_render(nullptr, "s", 1, "o", 0) == FK_ERR_USAGE);
  fk_config_destroy(nullptr);   // must be safe no-ops
  fk_session_destroy(nullptr);
}
