#include "shoal/env.hpp"

namespace shoal {

std::vector<Observation> ObservationBuilder::build(std::span<const Vec2> fish, std::span<const Vec2> agents) {
  std::vector<Observation> obs;
  obs.reserve(agents.size());
  if (mode_ == ObservationMode::Global) {
    const Vec2 c = centroid(std::vector<Vec2>(fish.begin(), fish.end()));
    for (const auto& a : agents) obs.push_back({c, a});
    return obs;
  }
  const std::size_t k = agents.size();
  std::span<const Vec2> warm;
  if (warm_start_ && last_ && last_->centroids.size() == k) warm = last_->centroids;
  KMeansResult km = kmeans_partition(fish, k, rng_, warm);
  ClusterAssignment assignment{std::move(km.centroids), {}};
  assignment.agent_to_cluster = assign_agents_to_clusters(agents, assignment.centroids);
  for (std::size_t i = 0; i < k; ++i) obs.push_back({assignment.centroids[assignment.agent_to_cluster[i]], agents[i]});
  last_ = std::move(assignment);
  return obs;
}

std::vector<Vec2> EnvState::fish_positions() const {
  if (const auto* s = std::get_if<SchoolCentroidState>(&school)) return {s->lag.pos};
  return std::get<SwarmState>(school).positions();
}

std::vector<Vec2> EnvState::agent_positions() const {
  std::vector<Vec2> out;
  out.reserve(agents.size());
  for (const auto& a : agents) out.push_back(a.pos);
  return out;
}

Vec2 EnvState::school_centroid() const { return centroid(fish_positions()); }

Environment::Environment(const RunConfig& cfg, std::uint64_t seed, Stream env_stream, Stream cluster_stream)
    : cfg_(cfg),
      observer_(cfg.observation_mode, cfg.cluster_warm_start, Rng(seed, cluster_stream)),
      substeps_(cfg.sim.substeps()) {
  validate(cfg_);
  state_.rng = Rng(seed, env_stream);
}

std::vector<Observation> Environment::reset() {
  auto& rng = state_.rng;
  state_.target_end = cfg_.ppo.target_schedule == TargetSchedule::Random
                          ? (rng.uniform() < 0.5 ? TargetEnd::Left : TargetEnd::Right)
                          : cfg_.reward.target_end;
  auto random_point = [&rng] {
    const double x = rng.uniform();
    const double y = rng.uniform();
    return Vec2{x, y};
  };
  if (cfg_.sim.model == SchoolModel::Centroid) {
    const Vec2 p = random_point();
    state_.school = SchoolCentroidState{{p, p}, 0.0};
  } else {
    SwarmState swarm;
    for (std::uint32_t i = 0; i < cfg_.sim.n_real; ++i) {
      const Vec2 p = random_point();
      swarm.fish.push_back({{p, p}, 0.0});
    }
    state_.school = std::move(swarm);
  }
  state_.agents.clear();
  for (std::uint32_t i = 0; i < cfg_.sim.n_virtual; ++i) {
    const Vec2 p = random_point();
    state_.agents.push_back({p, p});
  }
  state_.step_index = 0;
  pinned_ = false;
  observer_.forget();
  return observe();
}

void Environment::pin_school(Vec2 pos) {
  pinned_ = true;
  if (auto* s = std::get_if<SchoolCentroidState>(&state_.school)) {
    s->lag = {pos, pos};
  } else {
    for (auto& f : std::get<SwarmState>(state_.school).fish) f.lag = {pos, pos};
  }
}

void Environment::place_agents(std::span<const Vec2> positions) {
  if (positions.size() != state_.agents.size()) fail(ErrorKind::InvalidArgument, "agent count mismatch");
  for (std::size_t i = 0; i < positions.size(); ++i) state_.agents[i] = {positions[i], positions[i]};
}

std::vector<Observation> Environment::observe() {
  const auto fish = state_.fish_positions();
  const auto agents = state_.agent_positions();
  return observer_.build(fish, agents);
}

StepResult Environment::step(std::span<const int> actions) {
  if (actions.size() != state_.agents.size())
    fail(ErrorKind::InvalidArgument, "expected " + std::to_string(state_.agents.size()) + " actions, got " +
                                         std::to_string(actions.size()));
  for (std::size_t i = 0; i < actions.size(); ++i)
    state_.agents[i].target = action_to_target(state_.agents[i].pos, actions[i], cfg_.sim.action_step_len);

  const double dt = cfg_.sim.dt_sim;
  std::vector<Vec2> agent_pos(state_.agents.size());
  for (std::uint32_t k = 0; k < substeps_; ++k) {
    for (std::size_t i = 0; i < state_.agents.size(); ++i) agent_pos[i] = state_.agents[i].pos;
    if (!pinned_) {
      if (auto* s = std::get_if<SchoolCentroidState>(&state_.school)) {
        *s = step_school(*s, agent_pos, cfg_.sim, dt, state_.rng);
      } else {
        auto& swarm = std::get<SwarmState>(state_.school);
        swarm = step_swarm(swarm, agent_pos, cfg_.sim, dt, state_.rng);
      }
    }
    for (auto& a : state_.agents) a = lag_step(a, cfg_.sim.tau_v, dt);
  }
  ++state_.step_index;

  StepResult out;
  const auto fish = state_.fish_positions();
  const auto agents = state_.agent_positions();
  out.rewards = compute_rewards(fish, agents, state_.target_end, cfg_.reward.beta);
  out.reward = cfg_.reward.mode == RewardMode::Baseline ? out.rewards.base : out.rewards.beta;
  out.info.substeps = substeps_;
  out.info.step_index = state_.step_index;
  out.info.episode_end = state_.step_index % cfg_.ppo.episode_len == 0;
  out.observations = observer_.build(fish, agents);
  return out;
}

}  // namespace shoal
