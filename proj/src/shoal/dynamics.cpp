#include "shoal/dynamics.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace shoal {

namespace {

// Phase clocks are decremented in dt_sim steps; a residue this small counts as expired.
constexpr double kPhaseEpsilon = 1e-12;

constexpr double kDiag = std::numbers::sqrt2 / 2.0;
constexpr std::array<Vec2, kActionCount> kDirections{{
    {1.0, 0.0}, {kDiag, kDiag}, {0.0, 1.0}, {-kDiag, kDiag},
    {-1.0, 0.0}, {-kDiag, -kDiag}, {0.0, -1.0}, {kDiag, -kDiag},
}};

std::size_t nearest_index(Vec2 from, std::span<const Vec2> pts) {
  std::size_t best = 0;
  double best_d = distance(from, pts[0]);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double d = distance(from, pts[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

void require_agents(std::span<const Vec2> agents) {
  if (agents.empty()) fail(ErrorKind::InvalidArgument, "school update needs at least one agent position");
}

}  // namespace

std::vector<Vec2> SwarmState::positions() const {
  std::vector<Vec2> out;
  out.reserve(fish.size());
  for (const auto& f : fish) out.push_back(f.lag.pos);
  return out;
}

LagState lag_step(const LagState& s, double tau, double dt) {
  const double decay = std::exp(-dt / tau);
  const Vec2 pos = s.target + decay * (s.pos - s.target);
  return {clamp_unit(pos), s.target};
}

double sample_phase(Rng& rng, double phase_max) {
  // 1 - U[0,1) lies in (0, 1].
  return phase_max * (1.0 - rng.uniform());
}

Vec2 update_school_target(Vec2 centroid, std::span<const Vec2> agents, const SimParams& params, Rng& rng) {
  require_agents(agents);
  const double coin = rng.uniform();
  const Vec2 nearest = agents[nearest_index(centroid, agents)];
  if (distance(centroid, nearest) <= params.theta && coin >= params.p_ignore) return clamp_unit(nearest);
  const double dx = rng.uniform(-params.delta_x_max, params.delta_x_max);
  const double dy = rng.uniform(-params.delta_y_max, params.delta_y_max);
  return clamp_unit(centroid + Vec2{dx, dy});
}

SchoolCentroidState step_school(const SchoolCentroidState& state, std::span<const Vec2> agents,
                                const SimParams& params, double dt, Rng& rng) {
  require_agents(agents);
  SchoolCentroidState next = state;
  next.phase_remaining -= dt;
  if (next.phase_remaining <= kPhaseEpsilon) {
    next.phase_remaining = sample_phase(rng, params.phase_max);
    next.lag.target = update_school_target(state.lag.pos, agents, params, rng);
  }
  next.lag = lag_step(next.lag, params.tau_r, dt);
  return next;
}

SwarmState step_swarm(const SwarmState& state, std::span<const Vec2> agents, const SimParams& params, double dt,
                      Rng& rng) {
  require_agents(agents);
  const Vec2 swarm_center = centroid(state.positions());
  SwarmState next = state;
  for (auto& f : next.fish) {
    const Vec2 pos = f.lag.pos;
    f.phase_remaining -= dt;
    if (f.phase_remaining <= kPhaseEpsilon) {
      f.phase_remaining = sample_phase(rng, params.phase_max);
      const double coin = rng.uniform();
      const Vec2 nearest = agents[nearest_index(pos, agents)];
      if (distance(pos, nearest) <= params.theta && coin >= params.p_ignore) {
        f.lag.target = clamp_unit(nearest);
      } else {
        const double dx = rng.uniform(-params.delta_x_max, params.delta_x_max);
        const double dy = rng.uniform(-params.delta_y_max, params.delta_y_max);
        const Vec2 pull = params.cohesion_weight * (swarm_center - pos);
        f.lag.target = clamp_unit(pos + Vec2{dx, dy} + pull);
      }
    }
    f.lag = lag_step(f.lag, params.tau_r, dt);
  }
  return next;
}

Vec2 action_to_target(Vec2 pos, int action, double step_len) {
  if (action < 0 || action >= kActionCount)
    fail(ErrorKind::InvalidArgument, "action " + std::to_string(action) + " outside 0..7");
  return clamp_unit(pos + step_len * kDirections[static_cast<std::size_t>(action)]);
}

}  // namespace shoal
