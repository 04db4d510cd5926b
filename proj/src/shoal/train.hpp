#pragma once

#include <cstdint>
#include <functional>

#include "shoal/checkpoint.hpp"
#include "shoal/env.hpp"
#include "shoal/ppo.hpp"

namespace shoal {

/// Read-only decision rule over frozen weights. With `mirrored`, a policy
/// trained for one target end drives toward the other by reflecting x in
/// the observation and the chosen action.
class Policy {
 public:
  explicit Policy(const Mlp& net, bool mirrored = false) : net_(&net), mirrored_(mirrored) {}

  ActionSample act(const Observation& obs, Rng& rng, bool greedy) const;
  std::array<double, Mlp::kActions> probabilities(const Observation& obs) const;
  const Mlp& net() const { return *net_; }
  bool mirrored() const { return mirrored_; }

 private:
  Observation view(const Observation& obs) const;

  const Mlp* net_;
  bool mirrored_;
};

/// Mean r_base of the school over `steps` action steps of `env` (which must be reset).
double evaluate_in(const Policy& policy, Environment& env, std::uint64_t steps, Rng& policy_rng, bool greedy);

/// Time-averaged baseline reward over T' steps with frozen weights. Uses the
/// dedicated evaluation streams of `seed`, so equal seeds share environment noise.
double evaluate(const Mlp& net, const RunConfig& cfg, std::uint64_t eval_steps, std::uint64_t seed);

struct TrainProgress {
  std::uint64_t steps_done = 0;
  std::uint64_t total_steps = 0;
  std::optional<double> r_bar;  // set when an evaluation point was recorded
  LossStats loss;
};
using ProgressFn = std::function<void(const TrainProgress&)>;

/// Freshly initialized network for cfg, no updates.
PolicyCheckpoint initial_checkpoint(const RunConfig& cfg);

/// PPO on the single-agent environment until cfg.ppo.total_steps action steps.
/// R-bar is recorded at step 0 and at every 1/eval_points of the budget.
PolicyCheckpoint train(const RunConfig& cfg, const ProgressFn& progress = {});

}  // namespace shoal
