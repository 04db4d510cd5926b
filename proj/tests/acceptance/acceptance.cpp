// Acceptance run: trains the desk-scale sweep, then checks determinism and the session protocol
// through the command-line tool. Prints one PASS/FAIL line per criterion on stdout.
#include <shoal/shoal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <json.hpp>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kSteps = 200000;
constexpr std::uint64_t kEvalSteps = 5000;
constexpr int kSeeds = 5;

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(shoal_status s, const char* what) {
  if (s != SHOAL_OK) throw Failure(std::string(what) + ": " + shoal_status_name(s) + ": " + shoal_last_error());
}

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string list(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ",") + fmt(x);
  return s;
}

struct Trained {
  std::vector<double> trained;
  std::vector<double> initial;
};

// Trains one cell of the sweep (five paired seeds) and evaluates each policy over kEvalSteps.
Trained train_cell(const std::string& reward, double p) {
  Trained out;
  for (int k = 0; k < kSeeds; ++k) {
    const auto seed = static_cast<std::uint64_t>(k + 1);
    shoal_config* cfg = nullptr;
    check(shoal_config_new_default(&cfg), "config");
    const std::map<std::string, std::string> keys{
        {"reward.mode", reward == "baseline" ? "baseline" : "composite"},
        {"reward.beta", reward == "baseline" ? "0.3" : reward},
        {"sim.p_ignore", fmt(p, 2)},
        {"ppo.total_steps", std::to_string(kSteps)},
        {"ppo.eval_points", "0"},
        {"seed", std::to_string(seed)},
    };
    for (const auto& [key, value] : keys) check(shoal_config_set(cfg, key.c_str(), value.c_str()), key.c_str());
    check(shoal_config_validate(cfg), "validate");

    shoal_checkpoint* init = nullptr;
    shoal_checkpoint* ck = nullptr;
    check(shoal_checkpoint_initial(cfg, &init), "initial checkpoint");
    check(shoal_train(cfg, nullptr, nullptr, &ck), "train");
    double r0 = 0.0, r1 = 0.0;
    check(shoal_evaluate(init, nullptr, kEvalSteps, seed, &r0), "evaluate initial");
    check(shoal_evaluate(ck, nullptr, kEvalSteps, seed, &r1), "evaluate trained");
    out.initial.push_back(r0);
    out.trained.push_back(r1);
    std::cerr << "  trained reward=" << reward << " p=" << fmt(p, 1) << " seed=" << seed << " R=" << fmt(r1)
              << " (untrained " << fmt(r0) << ")\n";
    shoal_checkpoint_free(ck);
    shoal_checkpoint_free(init);
    shoal_config_free(cfg);
  }
  return out;
}

int run(const std::string& cmd) {
  std::cerr << "  $ " << cmd << "\n";
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string capture(const std::string& cmd) {
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) throw Failure("cannot run " + cmd);
  std::string out;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
  const int status = ::pclose(p);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) throw Failure("command failed: " + cmd);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Failure("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

struct Line {
  bool pass;
  std::string text;
};

Line report(int n, const std::string& name, bool pass, const std::string& detail) {
  std::ostringstream s;
  s << "criterion " << n << " " << name << ": " << (pass ? "PASS" : "FAIL") << "  " << detail;
  std::cout << s.str() << std::endl;
  return {pass, s.str()};
}

template <class F>
Line guarded(int n, const std::string& name, F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return report(n, name, false, std::string("error: ") + e.what());
  }
}

}  // namespace

int main() {
  const fs::path cli = SHOAL_CLI;
  const fs::path unit = SHOAL_UNIT_TESTS;
  const fs::path script = SHOAL_RECOMPUTE;
  const fs::path work = fs::temp_directory_path() / ("shoal_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(work);
  const std::string shoal = q(cli);

  std::vector<Line> lines;

  // Criteria 1-3 share one set of trainings.
  std::map<double, Trained> beta;
  Trained base;
  std::string train_error;
  try {
    for (double p : {0.0, 0.6, 0.9}) beta[p] = train_cell("0.3", p);
    base = train_cell("baseline", 0.6);
  } catch (const std::exception& e) {
    train_error = e.what();
  }

  lines.push_back(guarded(1, "beta-composite beats baseline (p=0.6, T=2e5, 5 seeds)", [&] {
    if (!train_error.empty()) throw Failure(train_error);
    const double b = mean(beta[0.6].trained), r = mean(base.trained);
    return report(1, "beta-composite beats baseline (p=0.6, T=2e5, 5 seeds)", b >= r,
                  "mean R beta=0.3 " + fmt(b) + " [" + list(beta[0.6].trained) + "] vs baseline " + fmt(r) + " [" +
                      list(base.trained) + "]");
  }));

  lines.push_back(guarded(2, "R non-increasing in p (tolerance 0.02)", [&] {
    if (!train_error.empty()) throw Failure(train_error);
    const double m0 = mean(beta[0.0].trained), m6 = mean(beta[0.6].trained), m9 = mean(beta[0.9].trained);
    const bool ok = m6 <= m0 + 0.02 && m9 <= m6 + 0.02;
    return report(2, "R non-increasing in p (tolerance 0.02)", ok,
                  "mean R p=0.0 " + fmt(m0) + ", p=0.6 " + fmt(m6) + ", p=0.9 " + fmt(m9));
  }));

  lines.push_back(guarded(3, "training improves on initialization by >= 0.1", [&] {
    if (!train_error.empty()) throw Failure(train_error);
    const double t = mean(beta[0.6].trained), i = mean(beta[0.6].initial);
    return report(3, "training improves on initialization by >= 0.1", t - i >= 0.1,
                  "mean R trained " + fmt(t) + " vs untrained " + fmt(i) + " [" + list(beta[0.6].initial) +
                      "], delta " + fmt(t - i));
  }));

  lines.push_back(guarded(4, "numerical property suite", [&] {
    const int code = run(q(unit) + " --test-suite=geometry,dynamics,rewards,kmeans,mlp,ppo,analytics");
    return report(4, "numerical property suite", code == 0, "unit_tests exit code " + std::to_string(code));
  }));

  lines.push_back(guarded(5, "train and session are byte-reproducible", [&] {
    const auto a = work / "a.bin", b = work / "b.bin";
    for (const auto& p : {a, b})
      if (run(shoal + " train --quiet --seed 11 --out " + q(p)) != 0) throw Failure("train failed");
    const bool same_ck = slurp(a) == slurp(b);
    const auto l1 = work / "l1.jsonl", l2 = work / "l2.jsonl";
    for (const auto& p : {l1, l2})
      if (run(shoal + " session --source sim --seed 11 --checkpoint-right " + q(a) + " --out " + q(p)) != 0)
        throw Failure("session failed");
    const bool same_log = slurp(l1) == slurp(l2);
    return report(5, "train and session are byte-reproducible", same_ck && same_log,
                  std::string("checkpoints ") + (same_ck ? "identical" : "differ") + ", session logs " +
                      (same_log ? "identical" : "differ"));
  }));

  lines.push_back(guarded(6, "900-step protocol and independent metric recomputation", [&] {
    const auto ck = work / "a.bin";
    if (!fs::exists(ck) && run(shoal + " train --quiet --seed 11 --out " + q(ck)) != 0) throw Failure("train failed");
    const auto log = work / "protocol.jsonl";
    if (run(shoal + " session --source sim --seed 12 --steps 900 --checkpoint-right " + q(ck) + " --out " + q(log)) != 0)
      throw Failure("session failed");

    // Block structure straight from the log.
    std::ifstream in(log);
    std::string line;
    std::getline(in, line);
    std::vector<std::pair<std::string, int>> blocks;
    int steps = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto rec = json::parse(line);
      if (rec.at("step").get<int>() != steps) throw Failure("step numbering broken at " + std::to_string(steps));
      const auto target = rec.at("target").get<std::string>();
      if (blocks.empty() || blocks.back().first != target)
        blocks.emplace_back(target, 1);
      else
        ++blocks.back().second;
      ++steps;
    }
    bool blocks_ok = steps == 900 && blocks.size() == 10;
    for (std::size_t i = 0; i < blocks.size(); ++i)
      blocks_ok = blocks_ok && blocks[i].second == 90 && blocks[i].first == (i % 2 == 0 ? "right" : "left");

    const auto dir = work / "report";
    if (run(shoal + " report --bins 30 --log " + q(log) + " --out " + q(dir)) != 0) throw Failure("report failed");
    std::ifstream metrics(dir / "metrics.tsv");
    std::string head, row;
    std::getline(metrics, head);
    std::getline(metrics, row);
    auto split = [](const std::string& s) {
      std::vector<std::string> out;
      std::stringstream ss(s);
      for (std::string f; std::getline(ss, f, '\t');) out.push_back(f);
      return out;
    };
    const auto names = split(head), values = split(row);
    if (names.size() != values.size()) throw Failure("malformed metrics.tsv");
    std::map<std::string, double> ours;
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] != "condition") ours[names[i]] = std::stod(values[i]);

    const auto theirs = json::parse(capture(q(SHOAL_PYTHON) + " " + q(script) + " --bins 30 " + q(log)));
    double worst = 0.0;
    for (const char* k : {"target_pct", "intermediate_pct", "opposite_pct", "bhattacharyya"})
      worst = std::max(worst, std::abs(ours.at(k) - theirs.at(k).get<double>()));
    const bool ok = blocks_ok && worst <= 1e-9;
    std::ostringstream worst_s;
    worst_s << worst;
    return report(6, "900-step protocol and independent metric recomputation", ok,
                  std::to_string(blocks.size()) + " blocks over " + std::to_string(steps) +
                      " steps, max metric difference " + worst_s.str());
  }));

  fs::remove_all(work);
  int failed = 0;
  for (const auto& l : lines) failed += l.pass ? 0 : 1;
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
