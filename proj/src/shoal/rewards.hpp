#pragma once

#include <span>

#include "shoal/types.hpp"

namespace shoal {

struct RewardBreakdown {
  double base = 0.0;
  double school = 0.0;
  double direction = 0.0;
  double beta = 0.0;  // beta-weighted composite
  friend bool operator==(const RewardBreakdown&, const RewardBreakdown&) = default;
};

/// 1 - 2|c_x - x_end| for the school centroid.
double r_base(double centroid_x, TargetEnd end);

/// Cohesion: 1 - sqrt(2)/N_r * sum over fish of the distance to the nearest agent.
double r_school(std::span<const Vec2> fish, std::span<const Vec2> agents);

/// Agent progress toward the target end, on the agents' mean x.
double r_direction(std::span<const Vec2> agents, TargetEnd end);

double r_beta(double beta, double school, double direction);

RewardBreakdown compute_rewards(std::span<const Vec2> fish, std::span<const Vec2> agents, TargetEnd end, double beta);

}  // namespace shoal
