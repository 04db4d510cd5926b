/* shoal: closed-loop guidance of a simulated fish school by trained virtual agents.
 *
 * Plain C interface. Objects are opaque handles created by *_new / *_load /
 * producer functions and released with the matching *_free. Every fallible
 * call returns a shoal_status; on failure shoal_last_error() describes the
 * most recent error on the calling thread.
 *
 * Strings are UTF-8. Functions that fill a caller buffer take (buf, cap,
 * needed): `needed` receives the size including the terminator, and the
 * call fails with SHOAL_ERR_INVALID_ARGUMENT when cap is too small.
 * Passing buf = NULL with cap = 0 only reports `needed`.
 */
#ifndef SHOAL_SHOAL_H
#define SHOAL_SHOAL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SHOAL_API __declspec(dllexport)
#else
#define SHOAL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum shoal_status {
  SHOAL_OK = 0,
  SHOAL_ERR_INVALID_ARGUMENT = 1,
  SHOAL_ERR_IO = 2,
  SHOAL_ERR_PARSE = 3,
  SHOAL_ERR_VALIDATION = 4,
  SHOAL_ERR_NUMERIC = 5,
  SHOAL_ERR_DEGENERATE = 6,
  SHOAL_ERR_PROTOCOL = 7,
  SHOAL_ERR_NETWORK = 8,
  SHOAL_ERR_INTERNAL = 9
} shoal_status;

SHOAL_API const char* shoal_version(void);
SHOAL_API const char* shoal_status_name(shoal_status status);
/* Message of the last failed call on this thread; empty string if none. */
SHOAL_API const char* shoal_last_error(void);

/* ---- configuration ---- */

typedef struct shoal_config shoal_config;

SHOAL_API shoal_status shoal_config_new_default(shoal_config** out);
/* path may be NULL: then $SHOAL_CONFIG is used if set, else defaults. */
SHOAL_API shoal_status shoal_config_load(const char* path, shoal_config** out);
SHOAL_API shoal_status shoal_config_parse(const char* text, shoal_config** out);
SHOAL_API shoal_status shoal_config_clone(const shoal_config* cfg, shoal_config** out);
SHOAL_API void shoal_config_free(shoal_config* cfg);
SHOAL_API shoal_status shoal_config_set(shoal_config* cfg, const char* key, const char* value);
SHOAL_API shoal_status shoal_config_get(const shoal_config* cfg, const char* key, char* buf, size_t cap, size_t* needed);
SHOAL_API shoal_status shoal_config_to_text(const shoal_config* cfg, char* buf, size_t cap, size_t* needed);
SHOAL_API shoal_status shoal_config_save(const shoal_config* cfg, const char* path);
SHOAL_API shoal_status shoal_config_validate(const shoal_config* cfg);
/* FNV-1a 64 of the canonical text form. */
SHOAL_API shoal_status shoal_config_digest(const shoal_config* cfg, uint64_t* out);
SHOAL_API size_t shoal_config_key_count(void);
SHOAL_API const char* shoal_config_key(size_t index);

/* ---- policies ---- */

typedef struct shoal_checkpoint shoal_checkpoint;

/* Called after every PPO update. has_r_bar is 1 when an evaluation point was recorded. */
typedef void (*shoal_progress_fn)(uint64_t steps_done, uint64_t total_steps, int has_r_bar, double r_bar,
                                  void* user);

SHOAL_API shoal_status shoal_train(const shoal_config* cfg, shoal_progress_fn progress, void* user,
                                   shoal_checkpoint** out);
/* Freshly initialized weights for cfg, no training. */
SHOAL_API shoal_status shoal_checkpoint_initial(const shoal_config* cfg, shoal_checkpoint** out);
SHOAL_API shoal_status shoal_checkpoint_load(const char* path, shoal_checkpoint** out);
SHOAL_API shoal_status shoal_checkpoint_save(const shoal_checkpoint* ckpt, const char* path);
SHOAL_API void shoal_checkpoint_free(shoal_checkpoint* ckpt);
SHOAL_API shoal_status shoal_checkpoint_digest(const shoal_checkpoint* ckpt, uint64_t* out);
/* Copy of the configuration the checkpoint was trained with. */
SHOAL_API shoal_status shoal_checkpoint_config(const shoal_checkpoint* ckpt, shoal_config** out);
SHOAL_API size_t shoal_checkpoint_curve_len(const shoal_checkpoint* ckpt);
SHOAL_API shoal_status shoal_checkpoint_curve_point(const shoal_checkpoint* ckpt, size_t index, uint64_t* step,
                                                    double* r_bar);

/* Mean baseline reward over eval_steps action steps with frozen weights.
 * cfg may be NULL to use the checkpoint's own configuration. */
SHOAL_API shoal_status shoal_evaluate(const shoal_checkpoint* ckpt, const shoal_config* cfg, uint64_t eval_steps,
                                      uint64_t seed, double* out);

/* ---- sessions ---- */

typedef struct shoal_session_log shoal_session_log;

/* Either checkpoint may be NULL; the missing side is served by mirroring the other. */
SHOAL_API shoal_status shoal_session_run_sim(const shoal_checkpoint* left, const shoal_checkpoint* right,
                                             const shoal_config* cfg, shoal_session_log** out);
SHOAL_API shoal_status shoal_session_log_write(const shoal_session_log* log, const char* path);
/* A truncated file loads the complete records; shoal_session_log_warning() then says so. */
SHOAL_API shoal_status shoal_session_log_read(const char* path, shoal_session_log** out);
SHOAL_API const char* shoal_session_log_warning(const shoal_session_log* log);
SHOAL_API size_t shoal_session_log_steps(const shoal_session_log* log);
SHOAL_API void shoal_session_log_free(shoal_session_log* log);

/* ---- analytics ---- */

typedef struct shoal_report_summary {
  double target_pct;
  double intermediate_pct;
  double opposite_pct;
  double bhattacharyya;
  uint64_t sessions;
  uint64_t steps;
  uint64_t n_bins;
} shoal_report_summary;

/* Writes metrics.tsv, hist_left.tsv, hist_right.tsv and boxstats.tsv into out_dir.
 * summary may be NULL. */
SHOAL_API shoal_status shoal_report_emit(const shoal_session_log* const* logs, size_t n_logs, size_t n_bins,
                                         const char* condition, const char* out_dir, shoal_report_summary* summary);

/* ---- calibration ---- */

/* Fits the camera-to-display map from a JSON pairs file and writes the result as JSON. */
SHOAL_API shoal_status shoal_calibrate(const char* pairs_path, const char* out_path, double* rms_residual);

/* ---- live bridge ---- */

typedef struct shoal_bridge_options {
  const char* address; /* NULL means 127.0.0.1 */
  uint16_t port;       /* 0 picks a free port */
  double state_hz;
  double control_period;
  double staleness_ms;
} shoal_bridge_options;

SHOAL_API void shoal_bridge_options_default(shoal_bridge_options* opts);

typedef struct shoal_server shoal_server;

/* Binds the listening socket. log_path may be NULL. */
SHOAL_API shoal_status shoal_server_new(const shoal_checkpoint* left, const shoal_checkpoint* right,
                                        const shoal_config* cfg, const shoal_bridge_options* opts,
                                        const char* log_path, shoal_server** out);
SHOAL_API uint16_t shoal_server_port(const shoal_server* server);
/* Blocks until the session completes, the client leaves or shoal_server_stop() is called.
 * log and completed may be NULL. */
SHOAL_API shoal_status shoal_server_run(shoal_server* server, shoal_session_log** log, int* completed);
/* Thread-safe; may be called while shoal_server_run() blocks. */
SHOAL_API void shoal_server_stop(shoal_server* server);
SHOAL_API void shoal_server_free(shoal_server* server);

#ifdef __cplusplus
}
#endif

#endif
