#include "shoal/session.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <sstream>

namespace shoal {

using ojson = nlohmann::ordered_json;

namespace {

constexpr std::string_view kLogFormat = "shoal-session";

const Mlp& require_net(const PolicyCheckpoint* c) { return c->net; }

std::string checkpoint_id(const PolicyCheckpoint& c) { return hex64(checkpoint_digest(c)); }

// A checkpoint drives toward the end it was trained for; any other slot gets its mirror.
bool needs_mirror(const PolicyCheckpoint& c, TargetEnd slot) {
  return c.config.ppo.target_schedule == TargetSchedule::Fixed && c.config.reward.target_end != slot;
}

}  // namespace

PolicyPair PolicyPair::from(const PolicyCheckpoint* left, const PolicyCheckpoint* right) {
  if (!left && !right) fail(ErrorKind::InvalidArgument, "a session needs at least one checkpoint");
  PolicyPair p;
  const PolicyCheckpoint* l = left ? left : right;
  const PolicyCheckpoint* r = right ? right : left;
  p.left = &require_net(l);
  p.right = &require_net(r);
  p.left_mirrored = needs_mirror(*l, TargetEnd::Left);
  p.right_mirrored = needs_mirror(*r, TargetEnd::Right);
  p.left_id = checkpoint_id(*l) + (p.left_mirrored ? "~mirror" : "");
  p.right_id = checkpoint_id(*r) + (p.right_mirrored ? "~mirror" : "");
  return p;
}

TargetEnd target_for_step(const ProtocolConfig& protocol, std::uint32_t step) {
  const bool flipped = (step / protocol.switch_every) % 2 == 1;
  return flipped ? opposite(protocol.start_direction) : protocol.start_direction;
}

std::vector<Vec2> formation_images(Vec2 center, std::uint32_t n_images, double half_width) {
  std::vector<Vec2> out;
  out.reserve(n_images);
  if (n_images == 1) return {center};
  for (std::uint32_t k = 0; k < n_images; ++k) {
    const double angle = 2.0 * std::numbers::pi * k / n_images;
    // Snap tiny trig residue so axis-aligned offsets are exact.
    double cx = std::cos(angle), sy = std::sin(angle);
    if (std::abs(cx) < 1e-12) cx = 0.0;
    if (std::abs(sy) < 1e-12) sy = 0.0;
    out.push_back(clamp_unit(center + half_width * Vec2{cx, sy}));
  }
  return out;
}

SessionRunner::SessionRunner(const PolicyPair& policies, const RunConfig& cfg)
    : policies_(policies),
      cfg_(cfg),
      observer_(cfg.protocol.layout == AgentLayout::FixedFormation ? ObservationMode::Global
                                                                   : ObservationMode::ClusterAssignment,
                cfg.cluster_warm_start, Rng(cfg.seed, Stream::SessionClustering)),
      policy_rng_(cfg.seed, Stream::SessionPolicy) {
  validate(cfg_);
  if (!policies_.left || !policies_.right) fail(ErrorKind::InvalidArgument, "session policies are not set");
  for (const Mlp* net : {policies_.left, policies_.right}) {
    if (net->input_size() != Observation::kSize)
      fail(ErrorKind::InvalidArgument, "checkpoint expects " + std::to_string(net->input_size()) +
                                           " inputs but observations have " + std::to_string(Observation::kSize));
  }
  substeps_ = static_cast<std::uint32_t>(std::llround(cfg_.protocol.step_duration / cfg_.sim.dt_sim));
  const std::uint32_t n =
      cfg_.protocol.layout == AgentLayout::FixedFormation ? 1u : cfg_.protocol.n_agents;
  for (std::uint32_t i = 0; i < n; ++i) {
    const double x = policy_rng_.uniform();
    const double y = policy_rng_.uniform();
    agents_.push_back({{x, y}, {x, y}});
  }
}

std::vector<Vec2> SessionRunner::agent_positions() const {
  std::vector<Vec2> out;
  for (const auto& a : agents_) out.push_back(a.pos);
  return out;
}

std::vector<Vec2> SessionRunner::images() const {
  if (cfg_.protocol.layout == AgentLayout::Independent) return agent_positions();
  return formation_images(agents_.front().pos, cfg_.protocol.formation_images, cfg_.protocol.formation_half_width);
}

SessionHeader SessionRunner::header(SourceKind source) const {
  SessionHeader h;
  h.config = cfg_;
  h.checkpoint_left = policies_.left_id;
  h.checkpoint_right = policies_.right_id;
  h.source = source;
  return h;
}

SessionRunner::Outcome SessionRunner::step(const std::vector<Vec2>& fish, double time) {
  if (done()) fail(ErrorKind::InvalidArgument, "session already completed");
  if (fish.empty()) fail(ErrorKind::InvalidArgument, "fish snapshot is empty");

  Outcome out;
  auto& rec = out.record;
  rec.step = next_step_;
  rec.time = time;
  rec.target_end = target_for_step(cfg_.protocol, next_step_);
  rec.fish = fish;
  rec.agents = agent_positions();
  rec.images = images();

  const bool left = rec.target_end == TargetEnd::Left;
  const Policy policy(left ? *policies_.left : *policies_.right, left ? policies_.left_mirrored : policies_.right_mirrored);
  const auto obs = observer_.build(fish, rec.agents);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const int a = policy.act(obs[i], policy_rng_, cfg_.ppo.eval_greedy).action;
    rec.actions.push_back(a);
    agents_[i].target = action_to_target(agents_[i].pos, a, cfg_.sim.action_step_len);
  }
  rec.rewards = compute_rewards(fish, rec.agents, rec.target_end, cfg_.reward.beta);

  out.image_track.reserve(substeps_);
  for (std::uint32_t k = 0; k < substeps_; ++k) {
    out.image_track.push_back(images());
    for (auto& a : agents_) a = lag_step(a, cfg_.sim.tau_v, cfg_.sim.dt_sim);
  }
  ++next_step_;
  return out;
}

SimulatedFishSource::SimulatedFishSource(const RunConfig& cfg, std::uint64_t seed)
    : params_(cfg.sim), rng_(seed, Stream::SessionFish) {
  for (std::uint32_t i = 0; i < params_.n_real; ++i) {
    const double x = rng_.uniform();
    const double y = rng_.uniform();
    swarm_.fish.push_back({{{x, y}, {x, y}}, 0.0});
  }
}

void SimulatedFishSource::advance(const std::vector<std::vector<Vec2>>& image_track) {
  for (const auto& images : image_track) swarm_ = step_swarm(swarm_, images, params_, params_.dt_sim, rng_);
}

SessionLog run_session(const PolicyPair& policies, FishSource& source, const RunConfig& cfg, SourceKind kind) {
  SessionRunner runner(policies, cfg);
  SessionLog log;
  log.header = runner.header(kind);
  log.records.reserve(cfg.protocol.total_steps);
  while (!runner.done()) {
    const auto fish = source.read();
    auto out = runner.step(fish, runner.next_step() * cfg.protocol.step_duration);
    source.advance(out.image_track);
    log.records.push_back(std::move(out.record));
  }
  return log;
}

// ---- log file ----

namespace {

ojson points_json(const std::vector<Vec2>& pts) {
  ojson a = ojson::array();
  for (const auto& p : pts) a.push_back(ojson::array({p.x, p.y}));
  return a;
}

std::vector<Vec2> points_from(const ojson& a) {
  std::vector<Vec2> pts;
  for (const auto& p : a) pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return pts;
}

std::string header_to_json(const SessionHeader& h) {
  ojson j;
  j["format"] = kLogFormat;
  j["version"] = SessionHeader::kFormatVersion;
  j["source"] = h.source == SourceKind::Live ? "live" : "sim";
  j["start_timestamp"] = h.start_timestamp ? ojson(*h.start_timestamp) : ojson(nullptr);
  j["checkpoint_left"] = h.checkpoint_left;
  j["checkpoint_right"] = h.checkpoint_right;
  j["config"] = to_text(h.config);
  return j.dump();
}

SessionHeader header_from_json(const ojson& j) {
  if (j.value("format", "") != kLogFormat) fail(ErrorKind::Parse, "not a session log (missing format tag)");
  const auto version = j.at("version").get<std::uint32_t>();
  if (version != SessionHeader::kFormatVersion)
    fail(ErrorKind::Parse, "session log version " + std::to_string(version) + " is not supported (expected " +
                               std::to_string(SessionHeader::kFormatVersion) + ")");
  SessionHeader h;
  h.source = j.at("source").get<std::string>() == "live" ? SourceKind::Live : SourceKind::Simulated;
  if (!j.at("start_timestamp").is_null()) h.start_timestamp = j.at("start_timestamp").get<std::string>();
  h.checkpoint_left = j.at("checkpoint_left").get<std::string>();
  h.checkpoint_right = j.at("checkpoint_right").get<std::string>();
  h.config = parse_config(j.at("config").get<std::string>());
  return h;
}

StepRecord record_from_json(const ojson& j) {
  StepRecord r;
  r.step = j.at("step").get<std::uint32_t>();
  r.time = j.at("time").get<double>();
  r.target_end = j.at("target").get<std::string>() == "left" ? TargetEnd::Left : TargetEnd::Right;
  r.fish = points_from(j.at("fish"));
  r.agents = points_from(j.at("agents"));
  r.images = points_from(j.at("images"));
  r.actions = j.at("actions").get<std::vector<int>>();
  const auto& rw = j.at("reward");
  r.rewards = {rw.at("base").get<double>(), rw.at("school").get<double>(), rw.at("direction").get<double>(),
               rw.at("beta").get<double>()};
  return r;
}

}  // namespace

std::string record_to_json(const StepRecord& r) {
  ojson j;
  j["step"] = r.step;
  j["time"] = r.time;
  j["target"] = to_string(r.target_end);
  j["fish"] = points_json(r.fish);
  j["agents"] = points_json(r.agents);
  j["images"] = points_json(r.images);
  j["actions"] = r.actions;
  j["reward"] = {{"base", r.rewards.base},
                 {"school", r.rewards.school},
                 {"direction", r.rewards.direction},
                 {"beta", r.rewards.beta}};
  return j.dump();
}

std::string log_to_string(const SessionLog& log) {
  std::string out = header_to_json(log.header);
  out += '\n';
  for (const auto& r : log.records) {
    out += record_to_json(r);
    out += '\n';
  }
  return out;
}

void write_log(const SessionLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write session log '" + path.string() + "'");
  out << log_to_string(log);
  if (!out) fail(ErrorKind::Io, "failed writing session log '" + path.string() + "'");
}

ReadLogResult parse_log(std::string_view text) {
  ReadLogResult res;
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    const auto nl = text.find('\n', pos);
    line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    return true;
  };
  std::string_view line;
  if (!next_line(line)) fail(ErrorKind::Parse, "session log is empty");
  try {
    res.log.header = header_from_json(ojson::parse(line));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("session log header unreadable: ") + e.what());
  }
  while (next_line(line)) {
    if (line.empty()) continue;
    try {
      res.log.records.push_back(record_from_json(ojson::parse(line)));
    } catch (const nlohmann::json::exception&) {
      const std::string last =
          res.log.records.empty() ? std::string("none") : std::to_string(res.log.records.back().step);
      res.warning = "session log truncated; last complete step: " + last;
      break;
    }
  }
  return res;
}

ReadLogResult read_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open session log '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_log(ss.str());
}

}  // namespace shoal
