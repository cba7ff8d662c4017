#include "forgekit.h"

#include <cstring>
#include <random>
#include <stdexcept>
#include <string>

#include "forgekit/checkpoint.hpp"
#include "forgekit/datagen.hpp"
#include "forgekit/image_io.hpp"
#include "forgekit/model.hpp"
#include "forgekit/runner.hpp"
#include "forgekit/training.hpp"

struct fk_config {
  fk::Config cfg;
};

struct fk_session {
  fk::Config cfg;
  fk::Model model;
};

namespace {

thread_local std::string g_error;

fk_status fail(fk_status code, const std::string& msg) {
  g_error = msg;
  return code;
}

template <typename F>
fk_status guarded(F&& f) {
  try {
    f();
    return FK_OK;
  } catch (const std::invalid_argument& e) {
    return fail(FK_ERR_USAGE, e.what());
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    return fail(msg.find("non-finite") != std::string::npos ? FK_ERR_NUMERIC
                                                            : FK_ERR_IO,
                msg);
  }
}

fk_status copy_out(const std::string& s, char* buf, int buflen) {
  if (!buf) return FK_OK;
  if (buflen <= static_cast<int>(s.size()))
    return fail(FK_ERR_USAGE, "output buffer too small");
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return FK_OK;
}

}  // namespace

extern "C" {

const char* fk_last_error(void) { return g_error.c_str(); }

fk_status fk_config_create(const char* path, const char* const* overrides,
                           int n_overrides, fk_config** out) {
  if (!out) return fail(FK_ERR_USAGE, "out handle is null");
  *out = nullptr;
  return guarded([&] {
    std::vector<std::string> ov;
    for (int i = 0; i < n_overrides; ++i) ov.emplace_back(overrides[i]);
    *out = new fk_config{fk::Config::load(path ? path : "", ov)};
  });
}

void fk_config_destroy(fk_config* cfg) { delete cfg; }

fk_status fk_config_hash(const fk_config* cfg, char* buf, int buflen) {
  if (!cfg) return fail(FK_ERR_USAGE, "config handle is null");
  return copy_out(cfg->cfg.hash(), buf, buflen);
}

fk_status fk_config_get(const fk_config* cfg, const char* key, char* buf,
                        int buflen) {
  if (!cfg || !key) return fail(FK_ERR_USAGE, "null argument");
  fk_status rc = FK_OK;
  fk_status g = guarded([&] { rc = copy_out(cfg->cfg.get(key), buf, buflen); });
  return g != FK_OK ? g : rc;
}

fk_status fk_gen_data(const fk_config* cfg, int scenes, int views,
                      unsigned long long seed, const char* out_dir,
                      char* manifest_buf, int buflen) {
  if (!cfg || !out_dir) return fail(FK_ERR_USAGE, "null argument");
  if (scenes < 0 || views < 1)
    return fail(FK_ERR_USAGE, "need scenes >= 0 and views >= 1");
  fk_status rc = FK_OK;
  fk_status g = guarded([&] {
    const std::string manifest =
        fk::make_dataset(scenes, views, seed, out_dir,
                         cfg->cfg.geti("data.res"), cfg->cfg.getf("data.focal"));
    rc = copy_out(manifest, manifest_buf, buflen);
  });
  return g != FK_OK ? g : rc;
}

fk_status fk_session_create(const fk_config* cfg, fk_session** out) {
  if (!cfg || !out) return fail(FK_ERR_USAGE, "null argument");
  *out = nullptr;
  return guarded([&] {
    std::mt19937_64 rng(cfg->cfg.geti("train.seed"));
    *out = new fk_session{cfg->cfg, fk::Model::make(cfg->cfg, rng)};
  });
}

void fk_session_destroy(fk_session* s) { delete s; }

fk_status fk_session_load_checkpoint(fk_session* s, const char* path) {
  if (!s || !path) return fail(FK_ERR_USAGE, "null argument");
  return guarded([&] {
    fk::ParamMap params = s->model.params();
    fk::load_params(fk::load_checkpoint(path), params, s->model.config_hash);
  });
}

fk_status fk_train(fk_session* s, int stage, const char* manifest,
                   const char* out_dir) {
  if (!s || !manifest || !out_dir) return fail(FK_ERR_USAGE, "null argument");
  return guarded(
      [&] { fk::train_stage(s->model, s->cfg, stage, manifest, out_dir); });
}

fk_status fk_eval(fk_session* s, const char* manifest, const char* variant,
                  int tto_iters, const char* json_path,
                  const char* table_path) {
  if (!s || !manifest || !variant) return fail(FK_ERR_USAGE, "null argument");
  return guarded([&] {
    fk::EvalReport rep =
        fk::run_eval(s->model, s->cfg, manifest, variant, tto_iters);
    if (json_path) fk::atomic_write_bytes(json_path, rep.to_json());
    if (table_path) fk::atomic_write_bytes(table_path, rep.to_table());
  });
}

fk_status fk_render(fk_session* s, const char* scene_dir, int orbit,
                    const char* out_dir, double voxel_threshold) {
  if (!s || !scene_dir || !out_dir) return fail(FK_ERR_USAGE, "null argument");
  return guarded([&] {
    fk::run_render(s->model, scene_dir, orbit, out_dir, voxel_threshold);
  });
}

fk_status fk_ablate(const fk_config* cfg, const char* suite,
                    const char* manifest, const char* ckpt_path,
                    const char* table_path) {
  if (!cfg || !suite || !manifest || !table_path)
    return fail(FK_ERR_USAGE, "null argument");
  return guarded([&] {
    const std::string table = fk::run_ablation(
        cfg->cfg, suite, manifest, ckpt_path ? ckpt_path : "");
    fk::atomic_write_bytes(table_path, table);
  });
}

}  // extern "C"
