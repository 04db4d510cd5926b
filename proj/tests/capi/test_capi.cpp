#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <shoal/shoal.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Config {
  shoal_config* p = nullptr;
  Config() { REQUIRE(shoal_config_new_default(&p) == SHOAL_OK); }
  ~Config() { shoal_config_free(p); }
  void set(const char* k, const char* v) { REQUIRE(shoal_config_set(p, k, v) == SHOAL_OK); }
};

std::string get(const shoal_config* c, const char* key) {
  size_t needed = 0;
  char buf[256];
  REQUIRE(shoal_config_get(c, key, buf, sizeof buf, &needed) == SHOAL_OK);
  return buf;
}

fs::path temp(const std::string& name) { return fs::temp_directory_path() / ("shoal_capi_" + name); }

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(shoal_version()) == "1.0.0");
  CHECK(std::string(shoal_status_name(SHOAL_OK)) != "");
  CHECK(std::string(shoal_status_name(SHOAL_ERR_IO)) != std::string(shoal_status_name(SHOAL_ERR_PARSE)));
}

TEST_CASE("config access and errors") {
  Config c;
  CHECK(get(c.p, "ppo.gamma") != "");
  c.set("reward.beta", "0.5");
  CHECK(get(c.p, "reward.beta") == "0.5");
  CHECK(shoal_config_set(c.p, "reward.bogus", "1") == SHOAL_ERR_VALIDATION);
  CHECK(std::string(shoal_last_error()).find("reward.bogus") != std::string::npos);
  CHECK(shoal_config_validate(c.p) == SHOAL_OK);
  CHECK(std::string(shoal_last_error()).empty());
  c.set("reward.beta", "1.5");
  CHECK(shoal_config_validate(c.p) == SHOAL_ERR_VALIDATION);

  size_t needed = 0;
  char tiny[4];
  CHECK(shoal_config_get(c.p, "ppo.gamma", tiny, sizeof tiny, &needed) == SHOAL_ERR_INVALID_ARGUMENT);
  CHECK(needed > sizeof tiny);
  CHECK(shoal_config_get(nullptr, "ppo.gamma", tiny, sizeof tiny, &needed) == SHOAL_ERR_INVALID_ARGUMENT);

  CHECK(shoal_config_key_count() > 20);
  for (size_t i = 0; i < shoal_config_key_count(); ++i) CHECK(shoal_config_key(i) != nullptr);
  CHECK(shoal_config_key(shoal_config_key_count()) == nullptr);
}

TEST_CASE("config text round trip and digest") {
  Config c;
  c.set("seed", "7");
  size_t needed = 0;
  CHECK(shoal_config_to_text(c.p, nullptr, 0, &needed) == SHOAL_OK);
  CHECK(shoal_config_to_text(c.p, nullptr, 8, &needed) == SHOAL_ERR_INVALID_ARGUMENT);
  std::vector<char> text(needed);
  REQUIRE(shoal_config_to_text(c.p, text.data(), text.size(), &needed) == SHOAL_OK);
  shoal_config* back = nullptr;
  REQUIRE(shoal_config_parse(text.data(), &back) == SHOAL_OK);
  uint64_t a = 0, b = 0;
  shoal_config_digest(c.p, &a);
  shoal_config_digest(back, &b);
  CHECK(a == b);
  shoal_config_free(back);

  CHECK(shoal_config_parse("seed = 1\nseed = 2\n", &back) != SHOAL_OK);
  CHECK(shoal_config_load("/nonexistent/shoal.cfg", &back) == SHOAL_ERR_IO);
  CHECK(std::string(shoal_last_error()).find("/nonexistent/shoal.cfg") != std::string::npos);

  const auto path = temp("cfg.txt");
  REQUIRE(shoal_config_save(c.p, path.c_str()) == SHOAL_OK);
  REQUIRE(shoal_config_load(path.c_str(), &back) == SHOAL_OK);
  CHECK(get(back, "seed") == "7");
  shoal_config_free(back);
  fs::remove(path);
}

TEST_CASE("train, save, load, evaluate") {
  Config c;
  c.set("seed", "3");
  c.set("ppo.total_steps", "512");
  c.set("ppo.rollout_len", "256");
  c.set("ppo.eval_len", "50");
  c.set("ppo.eval_points", "2");
  struct Seen {
    int calls = 0;
    int points = 0;
  } seen;
  auto cb = [](uint64_t done, uint64_t total, int has, double r, void* user) {
    auto* s = static_cast<Seen*>(user);
    ++s->calls;
    s->points += has;
    CHECK(done <= total);
    if (has) CHECK((r >= -1.0 && r <= 1.0));
  };
  shoal_checkpoint* ck = nullptr;
  REQUIRE(shoal_train(c.p, cb, &seen, &ck) == SHOAL_OK);
  CHECK(seen.calls == 2);
  CHECK(seen.points == 2);
  CHECK(shoal_checkpoint_curve_len(ck) == 3);
  uint64_t step = 0;
  double r = 0;
  REQUIRE(shoal_checkpoint_curve_point(ck, 2, &step, &r) == SHOAL_OK);
  CHECK(step == 512);
  CHECK(shoal_checkpoint_curve_point(ck, 3, &step, &r) == SHOAL_ERR_INVALID_ARGUMENT);

  const auto path = temp("ckpt.bin");
  REQUIRE(shoal_checkpoint_save(ck, path.c_str()) == SHOAL_OK);
  shoal_checkpoint* back = nullptr;
  REQUIRE(shoal_checkpoint_load(path.c_str(), &back) == SHOAL_OK);
  uint64_t d1 = 0, d2 = 0;
  shoal_checkpoint_digest(ck, &d1);
  shoal_checkpoint_digest(back, &d2);
  CHECK(d1 == d2);

  double e1 = 0, e2 = 0;
  REQUIRE(shoal_evaluate(ck, nullptr, 200, 9, &e1) == SHOAL_OK);
  REQUIRE(shoal_evaluate(back, c.p, 200, 9, &e2) == SHOAL_OK);
  CHECK(e1 == e2);
  CHECK((e1 >= -1.0 && e1 <= 1.0));
  CHECK(shoal_evaluate(ck, nullptr, 0, 9, &e1) == SHOAL_ERR_INVALID_ARGUMENT);

  shoal_config* used = nullptr;
  REQUIRE(shoal_checkpoint_config(ck, &used) == SHOAL_OK);
  CHECK(get(used, "ppo.total_steps") == "512");
  shoal_config_free(used);

  {
    std::ofstream(path, std::ios::binary | std::ios::app) << "junk";
  }
  CHECK(shoal_checkpoint_load(path.c_str(), &back) == SHOAL_ERR_PARSE);
  fs::remove(path);
  shoal_checkpoint_free(back);
  shoal_checkpoint_free(ck);
}

TEST_CASE("simulated session, log files and report") {
  Config c;
  c.set("protocol.total_steps", "180");
  shoal_checkpoint* ck = nullptr;
  REQUIRE(shoal_checkpoint_initial(c.p, &ck) == SHOAL_OK);
  shoal_session_log* log = nullptr;
  REQUIRE(shoal_session_run_sim(nullptr, ck, c.p, &log) == SHOAL_OK);
  CHECK(shoal_session_log_steps(log) == 180);
  CHECK(shoal_session_log_warning(log) == nullptr);

  const auto path = temp("session.jsonl");
  REQUIRE(shoal_session_log_write(log, path.c_str()) == SHOAL_OK);
  shoal_session_log* back = nullptr;
  REQUIRE(shoal_session_log_read(path.c_str(), &back) == SHOAL_OK);
  CHECK(shoal_session_log_steps(back) == 180);

  const auto dir = temp("report");
  fs::remove_all(dir);
  const shoal_session_log* logs[] = {log, back};
  shoal_report_summary s{};
  REQUIRE(shoal_report_emit(logs, 2, 30, "sim", dir.c_str(), &s) == SHOAL_OK);
  CHECK(s.sessions == 2);
  CHECK(s.steps == 360);
  CHECK(s.n_bins == 30);
  CHECK(s.target_pct + s.intermediate_pct + s.opposite_pct == doctest::Approx(100.0));
  CHECK(fs::exists(dir / "metrics.tsv"));
  CHECK(fs::exists(dir / "boxstats.tsv"));
  CHECK(shoal_report_emit(logs, 0, 30, "sim", dir.c_str(), &s) == SHOAL_ERR_INVALID_ARGUMENT);
  fs::remove_all(dir);

  // truncate mid-record
  const auto size = fs::file_size(path);
  fs::resize_file(path, size - 25);
  shoal_session_log* cut = nullptr;
  REQUIRE(shoal_session_log_read(path.c_str(), &cut) == SHOAL_OK);
  CHECK(shoal_session_log_steps(cut) == 179);
  REQUIRE(shoal_session_log_warning(cut) != nullptr);
  CHECK(std::string(shoal_session_log_warning(cut)) == "session log truncated; last complete step: 178");
  fs::remove(path);

  shoal_session_log_free(cut);
  shoal_session_log_free(back);
  shoal_session_log_free(log);
  shoal_checkpoint_free(ck);
}

TEST_CASE("calibration through files") {
  const auto pairs = temp("pairs.json");
  {
    std::ofstream out(pairs);
    // camera = 2*display + (10, 20), exactly affine
    out << R"({"pairs": [)"
        << R"({"display": [0, 0], "camera": [10, 20]},)"
        << R"({"display": [100, 0], "camera": [210, 20]},)"
        << R"({"display": [0, 100], "camera": [10, 220]},)"
        << R"({"display": [100, 100], "camera": [210, 220]}]})";
  }
  const auto out = temp("calib.json");
  double rms = -1;
  REQUIRE(shoal_calibrate(pairs.c_str(), out.c_str(), &rms) == SHOAL_OK);
  CHECK(rms <= 1e-9);
  CHECK(fs::exists(out));
  CHECK(shoal_calibrate("/nonexistent.json", out.c_str(), &rms) == SHOAL_ERR_IO);
  fs::remove(pairs);
  fs::remove(out);
}

TEST_CASE("server lifecycle without a client") {
  Config c;
  shoal_checkpoint* ck = nullptr;
  REQUIRE(shoal_checkpoint_initial(c.p, &ck) == SHOAL_OK);
  shoal_bridge_options opts;
  shoal_bridge_options_default(&opts);
  CHECK(opts.state_hz == 10.0);
  CHECK(opts.control_period == 1.2);
  opts.port = 0;
  shoal_server* server = nullptr;
  REQUIRE(shoal_server_new(ck, nullptr, c.p, &opts, nullptr, &server) == SHOAL_OK);
  CHECK(shoal_server_port(server) != 0);
  std::thread stopper([server] {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    shoal_server_stop(server);
  });
  int completed = -1;
  shoal_session_log* log = nullptr;
  CHECK(shoal_server_run(server, &log, &completed) == SHOAL_OK);
  stopper.join();
  CHECK(completed == 0);
  CHECK(shoal_session_log_steps(log) == 0);
  shoal_session_log_free(log);
  shoal_server_free(server);

  opts.control_period = 0.01;
  CHECK(shoal_server_new(ck, nullptr, c.p, &opts, nullptr, &server) == SHOAL_ERR_VALIDATION);
  shoal_checkpoint_free(ck);
}

TEST_CASE("null handles are rejected") {
  shoal_checkpoint* ck = nullptr;
  CHECK(shoal_checkpoint_initial(nullptr, &ck) == SHOAL_ERR_INVALID_ARGUMENT);
  shoal_session_log* log = nullptr;
  CHECK(shoal_session_run_sim(nullptr, nullptr, nullptr, &log) == SHOAL_ERR_INVALID_ARGUMENT);
  CHECK(shoal_session_log_steps(nullptr) == 0);
  shoal_config_free(nullptr);
  shoal_checkpoint_free(nullptr);
  shoal_session_log_free(nullptr);
  shoal_server_free(nullptr);
}
