// Command-line front end. Talks to the library only through shoal.h.
#include <CLI11.hpp>
#include <atomic>
#include <charconv>
#include <cinttypes>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <pthread.h>
#include <string>
#include <thread>
#include <vector>

#include "shoal/shoal.h"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Carries a status out of a subcommand; usage marks errors caused by bad input.
struct Failure {
  shoal_status status;
  std::string message;
  bool usage = false;
};

void check(shoal_status s, bool usage = false) {
  if (s != SHOAL_OK) throw Failure{s, shoal_last_error(), usage};
}

[[noreturn]] void usage_error(std::string msg) { throw Failure{SHOAL_ERR_INVALID_ARGUMENT, std::move(msg), true}; }

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  Handle(Handle&& o) noexcept : p(o.p) { o.p = nullptr; }
  Handle& operator=(Handle&& o) noexcept {
    std::swap(p, o.p);
    return *this;
  }
  ~Handle() { Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};
using Config = Handle<shoal_config, shoal_config_free>;
using Checkpoint = Handle<shoal_checkpoint, shoal_checkpoint_free>;
using Log = Handle<shoal_session_log, shoal_session_log_free>;
using Server = Handle<shoal_server, shoal_server_free>;

struct ConfigOpts {
  std::string path;
  std::vector<std::string> sets;
};

void add_config_opts(CLI::App* app, ConfigOpts& o) {
  app->add_option("--config", o.path, "Config file (falls back to $SHOAL_CONFIG, then built-in defaults)");
  app->add_option("--set", o.sets, "Override one config key, KEY=VALUE (repeatable)");
}

void apply_sets(shoal_config* cfg, const std::vector<std::string>& sets) {
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) usage_error("--set expects KEY=VALUE, got '" + kv + "'");
    check(shoal_config_set(cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()), true);
  }
}

void set_key(shoal_config* cfg, const char* key, const std::string& value) {
  check(shoal_config_set(cfg, key, value.c_str()), true);
}

Config load_config(const ConfigOpts& o) {
  Config c;
  check(shoal_config_load(o.path.empty() ? nullptr : o.path.c_str(), c.out()), true);
  apply_sets(c.get(), o.sets);
  return c;
}

void print_digest(const shoal_config* cfg) {
  uint64_t d = 0;
  check(shoal_config_digest(cfg, &d));
  std::fprintf(stderr, "config digest %s\n", hex(d).c_str());
}

std::string checkpoint_id(const shoal_checkpoint* c) {
  uint64_t d = 0;
  check(shoal_checkpoint_digest(c, &d));
  return hex(d);
}

Checkpoint load_checkpoint(const std::string& path) {
  Checkpoint c;
  check(shoal_checkpoint_load(path.c_str(), c.out()));
  return c;
}

void write_curve(const shoal_checkpoint* c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Failure{SHOAL_ERR_IO, "cannot write curve file '" + path + "'"};
  out << "step\tr_bar\n";
  for (size_t i = 0; i < shoal_checkpoint_curve_len(c); ++i) {
    uint64_t step = 0;
    double r = 0;
    check(shoal_checkpoint_curve_point(c, i, &step, &r));
    out << step << '\t' << fmt(r) << '\n';
  }
}

// ---- train ----

struct TrainOpts {
  ConfigOpts cfg;
  std::optional<uint64_t> seed;
  std::string out;
  std::string curve;
  bool quiet = false;
};

int run_train(const TrainOpts& o) {
  Config cfg = load_config(o.cfg);
  if (o.seed) set_key(cfg.get(), "seed", std::to_string(*o.seed));
  check(shoal_config_validate(cfg.get()), true);
  print_digest(cfg.get());
  Checkpoint ck;
  auto progress = [](uint64_t done, uint64_t total, int has, double r, void*) {
    if (has) std::fprintf(stderr, "step %" PRIu64 "/%" PRIu64 " r_bar %s\n", done, total, fmt(r).c_str());
  };
  check(shoal_train(cfg.get(), o.quiet ? nullptr : +progress, nullptr, ck.out()));
  check(shoal_checkpoint_save(ck.get(), o.out.c_str()));
  write_curve(ck.get(), o.curve.empty() ? o.out + ".curve.tsv" : o.curve);
  std::printf("%s\n", checkpoint_id(ck.get()).c_str());
  return 0;
}

// ---- sweep ----

struct SweepOpts {
  ConfigOpts cfg;
  std::vector<std::string> betas;
  std::vector<double> ps;
  std::vector<uint64_t> steps;
  unsigned trials = 5;
  unsigned threads = 0;
  std::string out;
};

int run_sweep(const SweepOpts& o) {
  Config base = load_config(o.cfg);
  check(shoal_config_validate(base.get()), true);
  print_digest(base.get());
  if (o.betas.empty() || o.ps.empty() || o.steps.empty()) usage_error("sweep grids must not be empty");
  if (o.trials == 0) usage_error("--trials must be at least 1");

  char seed_buf[32];
  size_t need = 0;
  check(shoal_config_get(base.get(), "seed", seed_buf, sizeof seed_buf, &need));
  const uint64_t seed0 = std::stoull(seed_buf);

  struct Cell {
    std::string reward;
    double p;
    uint64_t steps;
    std::vector<double> values;
  };
  std::vector<Cell> cells;
  std::vector<Config> configs;  // one per (cell, trial)
  for (const auto& b : o.betas)
    for (double p : o.ps)
      for (uint64_t t : o.steps) {
        cells.push_back({b, p, t, std::vector<double>(o.trials)});
        for (unsigned k = 0; k < o.trials; ++k) {
          Config c;
          check(shoal_config_clone(base.get(), c.out()));
          if (b == "baseline") {
            set_key(c.get(), "reward.mode", "baseline");
          } else {
            set_key(c.get(), "reward.mode", "composite");
            set_key(c.get(), "reward.beta", b);
          }
          set_key(c.get(), "sim.p_ignore", fmt(p));
          set_key(c.get(), "ppo.total_steps", std::to_string(t));
          set_key(c.get(), "ppo.eval_points", "0");
          set_key(c.get(), "seed", std::to_string(seed0 + k));
          check(shoal_config_validate(c.get()), true);
          configs.push_back(std::move(c));
        }
      }

  std::atomic<size_t> next{0};
  std::mutex err_mu;
  std::optional<Failure> first_error;
  auto worker = [&] {
    for (size_t i; (i = next.fetch_add(1)) < configs.size();) {
      Checkpoint ck;
      double r = 0;
      shoal_status s = shoal_train(configs[i].get(), nullptr, nullptr, ck.out());
      if (s == SHOAL_OK) {
        char buf[32];
        size_t n = 0;
        shoal_config_get(configs[i].get(), "ppo.eval_len", buf, sizeof buf, &n);
        char sbuf[32];
        shoal_config_get(configs[i].get(), "seed", sbuf, sizeof sbuf, &n);
        s = shoal_evaluate(ck.get(), nullptr, std::stoull(buf), std::stoull(sbuf), &r);
      }
      if (s != SHOAL_OK) {
        std::lock_guard lk(err_mu);
        if (!first_error) first_error = Failure{s, shoal_last_error()};
        continue;
      }
      cells[i / o.trials].values[i % o.trials] = r;
    }
  };
  const unsigned n_threads =
      std::max(1u, std::min<unsigned>(o.threads ? o.threads : std::thread::hardware_concurrency(),
                                      static_cast<unsigned>(configs.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) throw *first_error;

  std::ofstream file;
  if (!o.out.empty()) {
    file.open(o.out, std::ios::binary);
    if (!file) throw Failure{SHOAL_ERR_IO, "cannot write sweep table '" + o.out + "'"};
  }
  std::ostream& out = o.out.empty() ? static_cast<std::ostream&>(std::cout) : file;
  out << "reward\tp\tsteps\ttrials\tmean_r_bar\tseeds\tr_bar\n";
  for (const auto& c : cells) {
    double sum = 0;
    for (double v : c.values) sum += v;
    std::string seeds, vals;
    for (unsigned k = 0; k < o.trials; ++k) {
      seeds += (k ? "," : "") + std::to_string(seed0 + k);
      vals += (k ? "," : "") + fmt(c.values[k]);
    }
    out << c.reward << '\t' << fmt(c.p) << '\t' << c.steps << '\t' << o.trials << '\t'
        << fmt(sum / static_cast<double>(o.trials)) << '\t' << seeds << '\t' << vals << '\n';
  }
  return 0;
}

// ---- evaluate ----

struct EvalOpts {
  std::string checkpoint;
  std::optional<double> p;
  std::optional<uint64_t> eval_steps;
  std::optional<uint64_t> seed;
};

int run_evaluate(const EvalOpts& o) {
  Checkpoint ck = load_checkpoint(o.checkpoint);
  Config cfg;
  check(shoal_checkpoint_config(ck.get(), cfg.out()));
  if (o.p) set_key(cfg.get(), "sim.p_ignore", fmt(*o.p));
  if (o.seed) set_key(cfg.get(), "seed", std::to_string(*o.seed));
  check(shoal_config_validate(cfg.get()), true);
  print_digest(cfg.get());
  char buf[32];
  size_t n = 0;
  check(shoal_config_get(cfg.get(), "ppo.eval_len", buf, sizeof buf, &n));
  const uint64_t steps = o.eval_steps ? *o.eval_steps : std::stoull(buf);
  check(shoal_config_get(cfg.get(), "seed", buf, sizeof buf, &n));
  double r = 0;
  check(shoal_evaluate(ck.get(), cfg.get(), steps, std::stoull(buf), &r));
  std::printf("%s\n", fmt(r).c_str());
  return 0;
}

// ---- serve / session ----

struct ServeOpts {
  ConfigOpts cfg;
  std::string left, right;
  std::string out;
  std::string address = "127.0.0.1";
  uint16_t port = 8765;
  std::optional<uint32_t> steps, switch_every;
  std::optional<double> control_period;
  double state_hz = 10.0;
  double staleness_ms = 1000.0;
  std::optional<uint64_t> seed;
};

struct Policies {
  Checkpoint left, right;
};

Policies load_policies(const std::string& l, const std::string& r) {
  if (l.empty() && r.empty()) usage_error("give --checkpoint-left, --checkpoint-right or both");
  Policies p;
  if (!l.empty()) p.left = load_checkpoint(l);
  if (!r.empty()) p.right = load_checkpoint(r);
  return p;
}

std::atomic<shoal_server*> g_server{nullptr};

int serve_with(const ServeOpts& o, shoal_config* cfg) {
  Policies pol = load_policies(o.left, o.right);
  shoal_bridge_options opts;
  shoal_bridge_options_default(&opts);
  opts.address = o.address.c_str();
  opts.port = o.port;
  opts.state_hz = o.state_hz;
  opts.staleness_ms = o.staleness_ms;
  if (o.control_period) {
    opts.control_period = *o.control_period;
  } else {
    char buf[32];
    size_t n = 0;
    check(shoal_config_get(cfg, "protocol.step_duration", buf, sizeof buf, &n));
    opts.control_period = std::stod(buf);
  }
  Server srv;
  check(shoal_server_new(pol.left.get(), pol.right.get(), cfg, &opts, o.out.empty() ? nullptr : o.out.c_str(),
                         srv.out()));
  std::fprintf(stderr, "listening on ws://%s:%u\n", o.address.c_str(), shoal_server_port(srv.get()));
  std::fflush(stderr);

  // Ctrl-C stops the session cleanly so the partial log is flushed.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  g_server = srv.get();
  std::thread watcher([set] {
    int sig = 0;
    sigwait(&set, &sig);
    if (shoal_server* s = g_server.load()) shoal_server_stop(s);
  });

  Log log;
  int completed = 0;
  const shoal_status st = shoal_server_run(srv.get(), log.out(), &completed);
  g_server = nullptr;
  pthread_kill(watcher.native_handle(), SIGTERM);
  watcher.join();
  check(st);
  std::fprintf(stderr, "session %s after %zu steps\n", completed ? "completed" : "ended early",
               shoal_session_log_steps(log.get()));
  return completed ? 0 : kExitRuntime;
}

Config serve_config(const ServeOpts& o) {
  Config cfg = load_config(o.cfg);
  if (o.steps) set_key(cfg.get(), "protocol.total_steps", std::to_string(*o.steps));
  if (o.switch_every) set_key(cfg.get(), "protocol.switch_every", std::to_string(*o.switch_every));
  if (o.seed) set_key(cfg.get(), "seed", std::to_string(*o.seed));
  check(shoal_config_validate(cfg.get()), true);
  print_digest(cfg.get());
  return cfg;
}

int run_serve(const ServeOpts& o) {
  Config cfg = serve_config(o);
  return serve_with(o, cfg.get());
}

struct SessionOpts {
  ServeOpts serve;
  std::string source = "sim";
};

int run_session(const SessionOpts& o) {
  Config cfg = serve_config(o.serve);
  if (o.source == "live") return serve_with(o.serve, cfg.get());
  if (o.serve.out.empty()) usage_error("--out is required for simulated sessions");
  Policies pol = load_policies(o.serve.left, o.serve.right);
  Log log;
  check(shoal_session_run_sim(pol.left.get(), pol.right.get(), cfg.get(), log.out()));
  check(shoal_session_log_write(log.get(), o.serve.out.c_str()));
  std::printf("%zu\n", shoal_session_log_steps(log.get()));
  return 0;
}

// ---- report / calibrate ----

struct ReportOpts {
  std::vector<std::string> logs;
  std::string out = "report";
  size_t bins = 30;
  std::string condition = "all";
};

int run_report(const ReportOpts& o) {
  std::vector<Log> logs;
  std::vector<const shoal_session_log*> ptrs;
  for (const auto& path : o.logs) {
    Log l;
    check(shoal_session_log_read(path.c_str(), l.out()));
    if (const char* w = shoal_session_log_warning(l.get())) std::fprintf(stderr, "warning: %s: %s\n", path.c_str(), w);
    ptrs.push_back(l.get());
    logs.push_back(std::move(l));
  }
  shoal_report_summary sum{};
  check(shoal_report_emit(ptrs.data(), ptrs.size(), o.bins, o.condition.c_str(), o.out.c_str(), &sum));
  std::printf("target_pct %s intermediate_pct %s opposite_pct %s bhattacharyya %s\n", fmt(sum.target_pct).c_str(),
              fmt(sum.intermediate_pct).c_str(), fmt(sum.opposite_pct).c_str(), fmt(sum.bhattacharyya).c_str());
  return 0;
}

struct CalibOpts {
  std::string pairs;
  std::string out;
};

int run_calibrate(const CalibOpts& o) {
  double rms = 0;
  check(shoal_calibrate(o.pairs.c_str(), o.out.c_str(), &rms));
  std::printf("%s\n", fmt(rms).c_str());
  return 0;
}

void add_serve_opts(CLI::App* app, ServeOpts& o, bool live_only) {
  add_config_opts(app, o.cfg);
  app->add_option("--checkpoint-left", o.left, "Checkpoint for leftward blocks (mirrored from the other if absent)");
  app->add_option("--checkpoint-right", o.right, "Checkpoint for rightward blocks (mirrored from the other if absent)");
  app->add_option("--out", o.out, "Session log path (JSONL)");
  app->add_option("--steps", o.steps, "Protocol length in steps (protocol.total_steps)");
  app->add_option("--switch-every", o.switch_every, "Steps per direction block (protocol.switch_every)");
  app->add_option("--seed", o.seed, "Seed for agent placement and action sampling");
  const std::string live = live_only ? "" : " (live source only)";
  app->add_option("--address", o.address, "Listen address" + live)->capture_default_str();
  app->add_option("--port", o.port, "Listen port, 0 for any free port" + live)->capture_default_str();
  app->add_option("--control-period", o.control_period,
                  "Wall seconds per step" + live + " [default: protocol.step_duration]");
  app->add_option("--state-hz", o.state_hz, "Expected client state rate" + live)->capture_default_str();
  app->add_option("--staleness-ms", o.staleness_ms, "Pause the step clock after this long without fresh state" + live)
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shoal: train and run virtual agents that guide a simulated fish school", "shoal"};
  app.require_subcommand(1);
  app.set_version_flag("--version", shoal_version());

  TrainOpts train;
  auto* c_train = app.add_subcommand("train", "Train a policy with PPO and write a checkpoint plus its learning curve");
  add_config_opts(c_train, train.cfg);
  c_train->add_option("--seed", train.seed, "Run seed (overrides the config)");
  c_train->add_option("--out", train.out, "Checkpoint path")->required();
  c_train->add_option("--curve", train.curve, "Learning-curve TSV path [default: <out>.curve.tsv]");
  c_train->add_flag("--quiet", train.quiet, "No progress output");

  SweepOpts sweep;
  auto* c_sweep = app.add_subcommand("sweep", "Train a grid of reward settings, ignoring probabilities and budgets");
  add_config_opts(c_sweep, sweep.cfg);
  c_sweep->add_option("--betas", sweep.betas, "Reward settings: beta values and/or 'baseline'")->required()->delimiter(',');
  c_sweep->add_option("--ps", sweep.ps, "Ignoring probabilities")->required()->delimiter(',');
  c_sweep->add_option("--steps-grid", sweep.steps, "Training budgets T")->required()->delimiter(',');
  c_sweep->add_option("--trials", sweep.trials, "Seeds per cell (seed, seed+1, ...)")->capture_default_str();
  c_sweep->add_option("--threads", sweep.threads, "Worker threads, 0 for one per core")->capture_default_str();
  c_sweep->add_option("--out", sweep.out, "Result table path [default: stdout]");

  EvalOpts ev;
  auto* c_eval = app.add_subcommand("evaluate", "Print the mean baseline reward of a frozen policy");
  c_eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint path")->required();
  c_eval->add_option("--p", ev.p, "Ignoring probability [default: from checkpoint]");
  c_eval->add_option("--eval-steps", ev.eval_steps, "Evaluation length T' [default: ppo.eval_len]");
  c_eval->add_option("--seed", ev.seed, "Evaluation seed [default: from checkpoint]");

  SessionOpts sess;
  auto* c_sess = app.add_subcommand("session", "Run a direction-switching guidance session");
  c_sess->add_option("--source", sess.source, "Fish source")->check(CLI::IsMember({"sim", "live"}))->capture_default_str();
  add_serve_opts(c_sess, sess.serve, false);

  ServeOpts serve;
  auto* c_serve = app.add_subcommand("serve", "Serve a live session to one WebSocket client");
  add_serve_opts(c_serve, serve, true);

  ReportOpts rep;
  auto* c_rep = app.add_subcommand("report", "Compute occupancy, histograms and block statistics from session logs");
  c_rep->add_option("--log", rep.logs, "Session log (repeatable; all logs form one condition)")->required();
  c_rep->add_option("--out", rep.out, "Output directory")->capture_default_str();
  c_rep->add_option("--bins", rep.bins, "Histogram bins over [0,1]")->capture_default_str();
  c_rep->add_option("--condition", rep.condition, "Condition label for the metrics row")->capture_default_str();

  CalibOpts cal;
  auto* c_cal = app.add_subcommand("calibrate", "Fit the camera-to-display affine map from point pairs");
  c_cal->add_option("--pairs", cal.pairs, "JSON file of display/camera point pairs")->required();
  c_cal->add_option("--out", cal.out, "Output JSON path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (c_train->parsed()) return run_train(train);
    if (c_sweep->parsed()) return run_sweep(sweep);
    if (c_eval->parsed()) return run_evaluate(ev);
    if (c_sess->parsed()) return run_session(sess);
    if (c_serve->parsed()) return run_serve(serve);
    if (c_rep->parsed()) return run_report(rep);
    if (c_cal->parsed()) return run_calibrate(cal);
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", f.message.c_str());
    return f.usage ? kExitUsage : kExitRuntime;
  }
  return kExitUsage;
}
