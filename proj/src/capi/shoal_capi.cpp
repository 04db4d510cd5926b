#include "shoal/shoal.h"

#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include "shoal/analytics.hpp"
#include "shoal/bridge.hpp"
#include "shoal/checkpoint.hpp"
#include "shoal/config.hpp"
#include "shoal/geometry.hpp"
#include "shoal/session.hpp"
#include "shoal/train.hpp"

struct shoal_config {
  shoal::RunConfig cfg;
};
struct shoal_checkpoint {
  shoal::PolicyCheckpoint ckpt;
};
struct shoal_session_log {
  shoal::SessionLog log;
  std::string warning;
};
struct shoal_server {
  std::optional<shoal::PolicyCheckpoint> left, right;
  std::unique_ptr<shoal::BridgeServer> server;
};

namespace {

thread_local std::string g_last_error;

shoal_status to_status(shoal::ErrorKind k) {
  switch (k) {
    case shoal::ErrorKind::InvalidArgument: return SHOAL_ERR_INVALID_ARGUMENT;
    case shoal::ErrorKind::Io: return SHOAL_ERR_IO;
    case shoal::ErrorKind::Parse: return SHOAL_ERR_PARSE;
    case shoal::ErrorKind::Validation: return SHOAL_ERR_VALIDATION;
    case shoal::ErrorKind::Numeric: return SHOAL_ERR_NUMERIC;
    case shoal::ErrorKind::Degenerate: return SHOAL_ERR_DEGENERATE;
    case shoal::ErrorKind::Protocol: return SHOAL_ERR_PROTOCOL;
    case shoal::ErrorKind::Network: return SHOAL_ERR_NETWORK;
  }
  return SHOAL_ERR_INTERNAL;
}

template <class F>
shoal_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return SHOAL_OK;
  } catch (const shoal::Error& e) {
    g_last_error = e.what();
    return to_status(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SHOAL_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SHOAL_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) shoal::fail(shoal::ErrorKind::InvalidArgument, std::string(what) + " must not be NULL");
}

void copy_out(const std::string& s, char* buf, size_t cap, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (!buf) {
    if (cap != 0) shoal::fail(shoal::ErrorKind::InvalidArgument, "buffer is NULL but capacity is not zero");
    if (!needed) shoal::fail(shoal::ErrorKind::InvalidArgument, "need a buffer or a size output");
    return;
  }
  if (cap < s.size() + 1)
    shoal::fail(shoal::ErrorKind::InvalidArgument,
                "buffer too small: need " + std::to_string(s.size() + 1) + " bytes, have " + std::to_string(cap));
  std::memcpy(buf, s.c_str(), s.size() + 1);
}

const std::vector<std::string>& keys() {
  static const std::vector<std::string> k = shoal::config_keys();
  return k;
}

}  // namespace

extern "C" {

const char* shoal_version(void) { return "1.0.0"; }

const char* shoal_status_name(shoal_status s) {
  switch (s) {
    case SHOAL_OK: return "ok";
    case SHOAL_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SHOAL_ERR_IO: return "io error";
    case SHOAL_ERR_PARSE: return "parse error";
    case SHOAL_ERR_VALIDATION: return "validation error";
    case SHOAL_ERR_NUMERIC: return "numeric error";
    case SHOAL_ERR_DEGENERATE: return "degenerate input";
    case SHOAL_ERR_PROTOCOL: return "protocol error";
    case SHOAL_ERR_NETWORK: return "network error";
    case SHOAL_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* shoal_last_error(void) { return g_last_error.c_str(); }

// ---- configuration ----

shoal_status shoal_config_new_default(shoal_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new shoal_config{};
  });
}

shoal_status shoal_config_load(const char* path, shoal_config** out) {
  return guarded([&] {
    require(out, "out");
    const auto resolved = shoal::resolve_config_path(path ? std::optional<std::string>(path) : std::nullopt);
    auto c = std::make_unique<shoal_config>();
    if (resolved) c->cfg = shoal::load_config(*resolved);
    *out = c.release();
  });
}

shoal_status shoal_config_parse(const char* text, shoal_config** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = new shoal_config{shoal::parse_config(text)};
  });
}

shoal_status shoal_config_clone(const shoal_config* cfg, shoal_config** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = new shoal_config{*cfg};
  });
}

void shoal_config_free(shoal_config* cfg) { delete cfg; }

shoal_status shoal_config_set(shoal_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    shoal::RunConfig next = cfg->cfg;
    shoal::set_value(next, key, value);
    cfg->cfg = next;
  });
}

shoal_status shoal_config_get(const shoal_config* cfg, const char* key, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    copy_out(shoal::get_value(cfg->cfg, key), buf, cap, needed);
  });
}

shoal_status shoal_config_to_text(const shoal_config* cfg, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(cfg, "cfg");
    copy_out(shoal::to_text(cfg->cfg), buf, cap, needed);
  });
}

shoal_status shoal_config_save(const shoal_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "cfg");
    require(path, "path");
    shoal::save_config(cfg->cfg, path);
  });
}

shoal_status shoal_config_validate(const shoal_config* cfg) {
  return guarded([&] {
    require(cfg, "cfg");
    shoal::validate(cfg->cfg);
  });
}

shoal_status shoal_config_digest(const shoal_config* cfg, uint64_t* out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = shoal::digest(cfg->cfg);
  });
}

size_t shoal_config_key_count(void) { return keys().size(); }

const char* shoal_config_key(size_t index) { return index < keys().size() ? keys()[index].c_str() : nullptr; }

// ---- policies ----

shoal_status shoal_train(const shoal_config* cfg, shoal_progress_fn progress, void* user, shoal_checkpoint** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    shoal::ProgressFn fn;
    if (progress)
      fn = [&](const shoal::TrainProgress& p) {
        progress(p.steps_done, p.total_steps, p.r_bar ? 1 : 0, p.r_bar.value_or(0.0), user);
      };
    *out = new shoal_checkpoint{shoal::train(cfg->cfg, fn)};
  });
}

shoal_status shoal_checkpoint_initial(const shoal_config* cfg, shoal_checkpoint** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = new shoal_checkpoint{shoal::initial_checkpoint(cfg->cfg)};
  });
}

shoal_status shoal_checkpoint_load(const char* path, shoal_checkpoint** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new shoal_checkpoint{shoal::load_checkpoint(path)};
  });
}

shoal_status shoal_checkpoint_save(const shoal_checkpoint* ckpt, const char* path) {
  return guarded([&] {
    require(ckpt, "ckpt");
    require(path, "path");
    shoal::save_checkpoint(ckpt->ckpt, path);
  });
}

void shoal_checkpoint_free(shoal_checkpoint* ckpt) { delete ckpt; }

shoal_status shoal_checkpoint_digest(const shoal_checkpoint* ckpt, uint64_t* out) {
  return guarded([&] {
    require(ckpt, "ckpt");
    require(out, "out");
    *out = shoal::checkpoint_digest(ckpt->ckpt);
  });
}

shoal_status shoal_checkpoint_config(const shoal_checkpoint* ckpt, shoal_config** out) {
  return guarded([&] {
    require(ckpt, "ckpt");
    require(out, "out");
    *out = new shoal_config{ckpt->ckpt.config};
  });
}

size_t shoal_checkpoint_curve_len(const shoal_checkpoint* ckpt) { return ckpt ? ckpt->ckpt.curve.size() : 0; }

shoal_status shoal_checkpoint_curve_point(const shoal_checkpoint* ckpt, size_t index, uint64_t* step, double* r_bar) {
  return guarded([&] {
    require(ckpt, "ckpt");
    if (index >= ckpt->ckpt.curve.size())
      shoal::fail(shoal::ErrorKind::InvalidArgument, "curve index " + std::to_string(index) + " out of range");
    if (step) *step = ckpt->ckpt.curve[index].step;
    if (r_bar) *r_bar = ckpt->ckpt.curve[index].r_bar;
  });
}

shoal_status shoal_evaluate(const shoal_checkpoint* ckpt, const shoal_config* cfg, uint64_t eval_steps, uint64_t seed,
                            double* out) {
  return guarded([&] {
    require(ckpt, "ckpt");
    require(out, "out");
    const shoal::RunConfig& c = cfg ? cfg->cfg : ckpt->ckpt.config;
    shoal::validate(c);
    *out = shoal::evaluate(ckpt->ckpt.net, c, eval_steps, seed);
  });
}

// ---- sessions ----

shoal_status shoal_session_run_sim(const shoal_checkpoint* left, const shoal_checkpoint* right,
                                   const shoal_config* cfg, shoal_session_log** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    const auto pair = shoal::PolicyPair::from(left ? &left->ckpt : nullptr, right ? &right->ckpt : nullptr);
    shoal::SimulatedFishSource source(cfg->cfg, cfg->cfg.seed);
    *out = new shoal_session_log{shoal::run_session(pair, source, cfg->cfg), {}};
  });
}

shoal_status shoal_session_log_write(const shoal_session_log* log, const char* path) {
  return guarded([&] {
    require(log, "log");
    require(path, "path");
    shoal::write_log(log->log, path);
  });
}

shoal_status shoal_session_log_read(const char* path, shoal_session_log** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto r = shoal::read_log(path);
    *out = new shoal_session_log{std::move(r.log), r.warning.value_or("")};
  });
}

const char* shoal_session_log_warning(const shoal_session_log* log) {
  return log && !log->warning.empty() ? log->warning.c_str() : nullptr;
}

size_t shoal_session_log_steps(const shoal_session_log* log) { return log ? log->log.records.size() : 0; }

void shoal_session_log_free(shoal_session_log* log) { delete log; }

// ---- analytics ----

shoal_status shoal_report_emit(const shoal_session_log* const* logs, size_t n_logs, size_t n_bins,
                               const char* condition, const char* out_dir, shoal_report_summary* summary) {
  return guarded([&] {
    require(out_dir, "out_dir");
    if (n_logs == 0) shoal::fail(shoal::ErrorKind::InvalidArgument, "report needs at least one session log");
    require(logs, "logs");
    std::vector<shoal::SessionLog> v;
    v.reserve(n_logs);
    for (size_t i = 0; i < n_logs; ++i) {
      require(logs[i], "log entry");
      v.push_back(logs[i]->log);
    }
    const auto rep = shoal::compute_report(v, n_bins, condition ? condition : "all");
    shoal::write_report(rep, out_dir);
    if (summary)
      *summary = {rep.occupancy.target_pct, rep.occupancy.intermediate_pct, rep.occupancy.opposite_pct,
                  rep.bhattacharyya,        rep.sessions,                   rep.steps,
                  rep.n_bins};
  });
}

// ---- calibration ----

shoal_status shoal_calibrate(const char* pairs_path, const char* out_path, double* rms_residual) {
  return guarded([&] {
    require(pairs_path, "pairs_path");
    require(out_path, "out_path");
    std::optional<shoal::CameraRegion> region;
    const auto set = shoal::read_calibration_set(pairs_path, &region);
    const auto res = shoal::calibrate(set, region);
    shoal::write_calibration_result(res, out_path);
    if (rms_residual) *rms_residual = res.rms_residual;
  });
}

// ---- live bridge ----

void shoal_bridge_options_default(shoal_bridge_options* opts) {
  if (!opts) return;
  const shoal::BridgeConfig d;
  opts->address = nullptr;
  opts->port = d.port;
  opts->state_hz = d.state_hz;
  opts->control_period = d.control_period;
  opts->staleness_ms = d.staleness_ms;
}

shoal_status shoal_server_new(const shoal_checkpoint* left, const shoal_checkpoint* right, const shoal_config* cfg,
                              const shoal_bridge_options* opts, const char* log_path, shoal_server** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(opts, "opts");
    require(out, "out");
    auto s = std::make_unique<shoal_server>();
    if (left) s->left = left->ckpt;
    if (right) s->right = right->ckpt;
    const auto pair = shoal::PolicyPair::from(s->left ? &*s->left : nullptr, s->right ? &*s->right : nullptr);
    shoal::BridgeConfig b;
    if (opts->address) b.address = opts->address;
    b.port = opts->port;
    b.state_hz = opts->state_hz;
    b.control_period = opts->control_period;
    b.staleness_ms = opts->staleness_ms;
    std::optional<std::filesystem::path> lp;
    if (log_path) lp = log_path;
    s->server = std::make_unique<shoal::BridgeServer>(pair, cfg->cfg, b, lp);
    *out = s.release();
  });
}

uint16_t shoal_server_port(const shoal_server* server) { return server ? server->server->port() : 0; }

shoal_status shoal_server_run(shoal_server* server, shoal_session_log** log, int* completed) {
  return guarded([&] {
    require(server, "server");
    auto res = server->server->run();
    if (completed) *completed = res.completed ? 1 : 0;
    if (log) *log = new shoal_session_log{std::move(res.log), {}};
  });
}

void shoal_server_stop(shoal_server* server) {
  if (server) server->server->stop();
}

void shoal_server_free(shoal_server* server) { delete server; }

}  // extern "C"
