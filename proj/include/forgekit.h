#ifndef FORGEKIT_H
#define FORGEKIT_H

/* C API over the reconstruction pipeline. All functions return fk_status;
 * on failure fk_last_error() describes the most recent error in the calling
 * thread. Handles are opaque and must be released with their destroy call. */

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  FK_OK = 0,
  FK_ERR_USAGE = 1,   /* bad arguments / unmet precondition */
  FK_ERR_IO = 2,      /* filesystem or serialization failure */
  FK_ERR_NUMERIC = 3  /* non-finite loss or numerical breakdown */
} fk_status;

typedef struct fk_config fk_config;
typedef struct fk_session fk_session;

const char* fk_last_error(void);

/* Layered configuration: defaults < file (may be NULL) < overrides
 * ("key=value" strings). Unknown keys are rejected. */
fk_status fk_config_create(const char* path, const char* const* overrides,
                           int n_overrides, fk_config** out);
void fk_config_destroy(fk_config* cfg);
/* buf receives a NUL-terminated 16-character hex hash; buflen >= 17 */
fk_status fk_config_hash(const fk_config* cfg, char* buf, int buflen);
fk_status fk_config_get(const fk_config* cfg, const char* key, char* buf,
                        int buflen);

/* Procedural dataset: `scenes` episodes of 2*views images (views input +
 * views eval) under out_dir; resolution and focal come from the config.
 * manifest_buf (optional) receives the manifest path. */
fk_status fk_gen_data(const fk_config* cfg, int scenes, int views,
                      unsigned long long seed, const char* out_dir,
                      char* manifest_buf, int buflen);

/* A session owns one model initialized from the config (train.seed). */
fk_status fk_session_create(const fk_config* cfg, fk_session** out);
void fk_session_destroy(fk_session* s);
fk_status fk_session_load_checkpoint(fk_session* s, const char* path);

/* One training stage (1..3) on the dataset under manifest; writes
 * stage<N>.ckpt and stage<N>_loss.csv into out_dir. Stages 2 and 3 require
 * the preceding checkpoint in out_dir. */
fk_status fk_train(fk_session* s, int stage, const char* manifest,
                   const char* out_dir);

/* variant: "forge-star" | "forge-dagger" | "forge". Writes the JSON report
 * and aligned text table to the given paths (either may be NULL). */
fk_status fk_eval(fk_session* s, const char* manifest, const char* variant,
                  int tto_iters, const char* json_path,
                  const char* table_path);

/* Renders `orbit` ring views of one scene; voxel_threshold > 0 additionally
 * exports a run-length-encoded occupancy grid. */
fk_status fk_render(fk_session* s, const char* scene_dir, int orbit,
                    const char* out_dir, double voxel_threshold);

/* suite: "fusion" | "pose". Writes a 3-variant comparison table to
 * table_path; ckpt_path (may be NULL) preloads shared weights. */
fk_status fk_ablate(const fk_config* cfg, const char* suite,
                    const char* manifest, const char* ckpt_path,
                    const char* table_path);

#ifdef __cplusplus
}
#endif

#endif /* FORGEKIT_H */
