#include "shoal/rewards.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace shoal {

double r_base(double centroid_x, TargetEnd end) { return 1.0 - 2.0 * std::abs(centroid_x - target_x(end)); }

double r_school(std::span<const Vec2> fish, std::span<const Vec2> agents) {
  if (fish.empty() || agents.empty()) fail(ErrorKind::InvalidArgument, "r_school needs fish and agents");
  double sum = 0.0;
  for (const auto& f : fish) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : agents) best = std::min(best, distance(f, a));
    sum += best;
  }
  return 1.0 - std::numbers::sqrt2 / static_cast<double>(fish.size()) * sum;
}

double r_direction(std::span<const Vec2> agents, TargetEnd end) {
  if (agents.empty()) fail(ErrorKind::InvalidArgument, "r_direction needs at least one agent");
  double sx = 0.0;
  for (const auto& a : agents) sx += a.x;
  return 1.0 - 2.0 * std::abs(sx / static_cast<double>(agents.size()) - target_x(end));
}

double r_beta(double beta, double school, double direction) {
  if (!(beta >= 0.0 && beta <= 1.0)) fail(ErrorKind::InvalidArgument, "beta must lie in [0,1]");
  return beta * school + (1.0 - beta) * direction;
}

RewardBreakdown compute_rewards(std::span<const Vec2> fish, std::span<const Vec2> agents, TargetEnd end,
                                double beta) {
  RewardBreakdown r;
  double cx = 0.0;
  for (const auto& f : fish) cx += f.x;
  r.base = r_base(cx / static_cast<double>(fish.size()), end);
  r.school = r_school(fish, agents);
  r.direction = r_direction(agents, end);
  r.beta = r_beta(beta, r.school, r.direction);
  return r;
}

}  // namespace shoal
