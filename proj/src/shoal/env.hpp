#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "shoal/config.hpp"
#include "shoal/dynamics.hpp"
#include "shoal/kmeans.hpp"
#include "shoal/rewards.hpp"
#include "shoal/rng.hpp"

namespace shoal {

/// Per-agent input: guidance reference point then own position.
struct Observation {
  Vec2 reference_point;
  Vec2 own_position;

  static constexpr std::size_t kSize = 4;
  std::array<double, kSize> flat() const {
    return {reference_point.x, reference_point.y, own_position.x, own_position.y};
  }
  friend bool operator==(const Observation&, const Observation&) = default;
};

struct ClusterAssignment {
  std::vector<Vec2> centroids;
  std::vector<std::size_t> agent_to_cluster;
};

/// Builds observations from fish and agent positions. Holds the previous
/// centroids so re-clustering can warm start.
class ObservationBuilder {
 public:
  ObservationBuilder(ObservationMode mode, bool warm_start, Rng rng)
      : mode_(mode), warm_start_(warm_start), rng_(rng) {}

  std::vector<Observation> build(std::span<const Vec2> fish, std::span<const Vec2> agents);
  const std::optional<ClusterAssignment>& last_assignment() const { return last_; }
  void forget() { last_.reset(); }

 private:
  ObservationMode mode_;
  bool warm_start_;
  Rng rng_;
  std::optional<ClusterAssignment> last_;
};

struct StepInfo {
  std::uint32_t substeps = 0;
  std::uint64_t step_index = 0;
  bool episode_end = false;
};

struct StepResult {
  std::vector<Observation> observations;
  RewardBreakdown rewards;
  double reward = 0.0;  // the training signal selected by RewardConfig::mode
  StepInfo info;
};

/// Episode state. The school is either the centroid model or a per-fish swarm.
struct EnvState {
  std::variant<SchoolCentroidState, SwarmState> school;
  std::vector<LagState> agents;
  std::uint64_t step_index = 0;
  TargetEnd target_end = TargetEnd::Right;
  Rng rng{0, Stream::Environment};

  std::vector<Vec2> fish_positions() const;
  std::vector<Vec2> agent_positions() const;
  Vec2 school_centroid() const;
};

/// The episodic training/evaluation environment.
class Environment {
 public:
  Environment(const RunConfig& cfg, std::uint64_t seed, Stream env_stream = Stream::Environment,
              Stream cluster_stream = Stream::Clustering);

  /// Places school and agents uniformly at random and picks the target end.
  std::vector<Observation> reset();
  StepResult step(std::span<const int> actions);

  const EnvState& state() const { return state_; }
  const RunConfig& config() const { return cfg_; }
  std::size_t agent_count() const { return state_.agents.size(); }

  void set_target_end(TargetEnd end) { state_.target_end = end; }
  /// Freezes the school at `pos`. Evaluation and test fixture only.
  void pin_school(Vec2 pos);
  /// Overrides the agent positions (targets follow).
  void place_agents(std::span<const Vec2> positions);
  std::vector<Observation> observe();

 private:
  RunConfig cfg_;
  EnvState state_;
  ObservationBuilder observer_;
  std::uint32_t substeps_;
  bool pinned_ = false;
};

}  // namespace shoal
