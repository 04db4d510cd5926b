#pragma once

#include <span>
#include <vector>

#include "shoal/config.hpp"
#include "shoal/rng.hpp"
#include "shoal/types.hpp"

namespace shoal {

/// First-order lag body: position chasing a target.
struct LagState {
  Vec2 pos;
  Vec2 target;
  friend bool operator==(const LagState&, const LagState&) = default;
};

/// Simulated school reduced to its centroid, moving in burst-and-coast phases.
struct SchoolCentroidState {
  LagState lag;
  double phase_remaining = 0.0;
  friend bool operator==(const SchoolCentroidState&, const SchoolCentroidState&) = default;
};

/// Per-fish variant: every fish runs its own phase clock.
struct SwarmState {
  std::vector<SchoolCentroidState> fish;
  friend bool operator==(const SwarmState&, const SwarmState&) = default;
  std::vector<Vec2> positions() const;
};

inline constexpr int kActionCount = 8;

/// Exact solution of dx/dt = (target - x) / tau over dt, then clamped.
LagState lag_step(const LagState& state, double tau, double dt);

/// Phase duration, uniform on (0, phase_max].
double sample_phase(Rng& rng, double phase_max);

/// Phase-boundary target update. Always draws the reaction coin first so that
/// the stream position does not depend on agent geometry.
Vec2 update_school_target(Vec2 centroid, std::span<const Vec2> agent_positions, const SimParams& params, Rng& rng);

SchoolCentroidState step_school(const SchoolCentroidState& state, std::span<const Vec2> agent_positions,
                                const SimParams& params, double dt, Rng& rng);

/// Like step_school per fish; the spontaneous displacement also gets a pull of
/// weight cohesion_weight toward the swarm centroid.
SwarmState step_swarm(const SwarmState& state, std::span<const Vec2> agent_positions, const SimParams& params,
                      double dt, Rng& rng);

/// Action a in 0..7 moves toward angle 45deg * a (0 = +x, counter-clockwise).
Vec2 action_to_target(Vec2 pos, int action, double step_len);

/// Reflection x -> 1 - x applied to an action index.
inline int mirror_action(int action) { return (12 - action) % 8; }

}  // namespace shoal
