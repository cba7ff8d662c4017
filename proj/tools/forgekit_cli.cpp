#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "forgekit.h"

namespace {

// exit-code contract: 0 ok, 1 usage/precondition, 2 I/O, 3 numerical
int report(fk_status rc) {
  if (rc != FK_OK) std::fprintf(stderr, "error: %s\n", fk_last_error());
  return static_cast<int>(rc);
}

struct ConfigHandle {
  fk_config* ptr = nullptr;
  ~ConfigHandle() { fk_config_destroy(ptr); }
};

struct SessionHandle {
  fk_session* ptr = nullptr;
  ~SessionHandle() { fk_session_destroy(ptr); }
};

unsigned long long env_seed(unsigned long long fallback) {
  const char* s = std::getenv("FORGEKIT_SEED");
  return s ? std::strtoull(s, nullptr, 10) : fallback;
}

int make_config(const std::string& path, std::vector<std::string> sets,
                ConfigHandle& out) {
  // FORGEKIT_SEED provides the default training seed unless overridden
  if (const char* s = std::getenv("FORGEKIT_SEED")) {
    bool has_seed = false;
    for (const std::string& kv : sets)
      if (kv.rfind("train.seed=", 0) == 0) has_seed = true;
    if (!has_seed) sets.push_back(std::string("train.seed=") + s);
  }
  std::vector<const char*> raw;
  for (const std::string& s : sets) raw.push_back(s.c_str());
  return report(fk_config_create(path.empty() ? nullptr : path.c_str(),
                                 raw.data(), static_cast<int>(raw.size()),
                                 &out.ptr));
}

int print_hash(const ConfigHandle& cfg) {
  char hash[17];
  if (int rc = report(fk_config_hash(cfg.ptr, hash, sizeof(hash)))) return rc;
  std::printf("config %s\n", hash);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"few-view object reconstruction with joint pose estimation"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "key=value config file");
  app.add_option("--set", sets, "override a config key (key=value)");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a procedural dataset");
  int g_scenes = 5, g_views = 5;
  unsigned long long g_seed = env_seed(0);
  std::string g_out;
  gen->add_option("--scenes", g_scenes, "episode count");
  gen->add_option("--views", g_views, "input views per episode (k)");
  gen->add_option("--seed", g_seed, "dataset seed");
  gen->add_option("--out", g_out, "output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "run training stages");
  std::string t_stage = "all", t_data, t_out;
  train->add_option("--stage", t_stage, "1 | 2 | 3 | all");
  train->add_option("--data", t_data, "dataset manifest path")->required();
  train->add_option("--out", t_out, "checkpoint/log directory")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string e_data, e_ckpt, e_variant = "forge-star";
  std::string e_json = "report.json", e_table = "report.txt";
  int e_tto = -1;
  eval->add_option("--data", e_data, "dataset manifest path")->required();
  eval->add_option("--ckpt", e_ckpt, "checkpoint path")->required();
  eval->add_option("--variant", e_variant, "forge-star | forge-dagger | forge");
  eval->add_option("--tto-iters", e_tto, "test-time optimization iterations");
  eval->add_option("--out-json", e_json, "JSON report path");
  eval->add_option("--out-table", e_table, "text table path");

  // render
  auto* render = app.add_subcommand("render", "render novel views");
  std::string r_ckpt, r_scene, r_out = ".";
  int r_orbit = 8;
  bool r_voxels = false;
  double r_threshold = 1.0;
  render->add_option("--ckpt", r_ckpt, "checkpoint path")->required();
  render->add_option("--scene", r_scene, "scene directory")->required();
  render->add_option("--orbit", r_orbit, "number of orbit views");
  render->add_option("--out", r_out, "output directory");
  render->add_flag("--voxels", r_voxels, "export occupancy grid");
  render->add_option("--threshold", r_threshold, "density threshold");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "run an ablation suite");
  std::string a_suite, a_data, a_ckpt, a_out = "ablation.txt";
  ablate->add_option("--suite", a_suite, "fusion | pose")->required();
  ablate->add_option("--data", a_data, "dataset manifest path")->required();
  ablate->add_option("--ckpt", a_ckpt, "shared checkpoint (optional)");
  ablate->add_option("--out", a_out, "table output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  ConfigHandle cfg;
  if (int rc = make_config(config_path, sets, cfg)) return rc;
  if (int rc = print_hash(cfg)) return rc;

  if (gen->parsed()) {
    char manifest[4096];
    if (int rc = report(fk_gen_data(cfg.ptr, g_scenes, g_views, g_seed,
                                    g_out.c_str(), manifest,
                                    sizeof(manifest))))
      return rc;
    std::printf("manifest %s\n", manifest);
    return 0;
  }

  if (train->parsed()) {
    SessionHandle s;
    if (int rc = report(fk_session_create(cfg.ptr, &s.ptr))) return rc;
    std::vector<int> stages;
    if (t_stage == "all")
      stages = {1, 2, 3};
    else if (t_stage == "1" || t_stage == "2" || t_stage == "3")
      stages = {std::stoi(t_stage)};
    else {
      std::fprintf(stderr, "error: --stage must be 1, 2, 3 or all\n");
      return 1;
    }
    for (int st : stages) {
      if (int rc = report(fk_train(s.ptr, st, t_data.c_str(), t_out.c_str())))
        return rc;
      std::printf("stage %d checkpoint %s/stage%d.ckpt\n", st, t_out.c_str(),
                  st);
    }
    return 0;
  }

  if (eval->parsed()) {
    SessionHandle s;
    if (int rc = report(fk_session_create(cfg.ptr, &s.ptr))) return rc;
    if (int rc = report(fk_session_load_checkpoint(s.ptr, e_ckpt.c_str())))
      return rc;
    if (e_tto < 0) {
      char buf[32];
      if (int rc = report(fk_config_get(cfg.ptr, "tto.iters", buf,
                                        sizeof(buf))))
        return rc;
      e_tto = std::atoi(buf);
    }
    if (int rc = report(fk_eval(s.ptr, e_data.c_str(), e_variant.c_str(),
                                e_tto, e_json.c_str(), e_table.c_str())))
      return rc;
    std::printf("report %s %s\n", e_json.c_str(), e_table.c_str());
    return 0;
  }

  if (render->parsed()) {
    if (!std::filesystem::exists(r_ckpt)) {
      std::fprintf(stderr, "error: checkpoint %s does not exist\n",
                   r_ckpt.c_str());
      return 1;
    }
    SessionHandle s;
    if (int rc = report(fk_session_create(cfg.ptr, &s.ptr))) return rc;
    if (int rc = report(fk_session_load_checkpoint(s.ptr, r_ckpt.c_str())))
      return rc;
    if (int rc = report(fk_render(s.ptr, r_scene.c_str(), r_orbit,
                                  r_out.c_str(),
                                  r_voxels ? r_threshold : 0.0)))
      return rc;
    std::printf("rendered %d views to %s\n", r_orbit, r_out.c_str());
    return 0;
  }

  if (ablate->parsed()) {
    if (int rc = report(fk_ablate(cfg.ptr, a_suite.c_str(), a_data.c_str(),
                                  a_ckpt.empty() ? nullptr : a_ckpt.c_str(),
                                  a_out.c_str())))
      return rc;
    std::printf("table %s\n", a_out.c_str());
    return 0;
  }
  return 1;
}
