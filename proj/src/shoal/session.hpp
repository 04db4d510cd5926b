#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "shoal/config.hpp"
#include "shoal/dynamics.hpp"
#include "shoal/env.hpp"
#include "shoal/mlp.hpp"
#include "shoal/rewards.hpp"
#include "shoal/train.hpp"

namespace shoal {

enum class SourceKind { Simulated, Live };

/// One protocol step: the fish as read at the step boundary, the agents at
/// that instant, the action chosen and the rewards of that snapshot.
struct StepRecord {
  std::uint32_t step = 0;
  double time = 0.0;  // model seconds (simulated) or wall seconds since start (live)
  TargetEnd target_end = TargetEnd::Right;
  std::vector<Vec2> fish;
  std::vector<Vec2> agents;  // policy positions
  std::vector<Vec2> images;  // rendered fish-image positions
  std::vector<int> actions;
  RewardBreakdown rewards;
  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct SessionHeader {
  static constexpr std::uint32_t kFormatVersion = 1;
  RunConfig config;
  std::string checkpoint_left;   // digest of the policy used for leftward blocks
  std::string checkpoint_right;  // digest of the policy used for rightward blocks
  std::optional<std::string> start_timestamp;  // live sessions only
  SourceKind source = SourceKind::Simulated;
  friend bool operator==(const SessionHeader&, const SessionHeader&) = default;
};

struct SessionLog {
  SessionHeader header;
  std::vector<StepRecord> records;
  friend bool operator==(const SessionLog&, const SessionLog&) = default;
};

/// The two frozen policies a session switches between. A missing side can be
/// served by mirroring the other.
struct PolicyPair {
  const Mlp* left = nullptr;
  const Mlp* right = nullptr;
  bool left_mirrored = false;
  bool right_mirrored = false;
  std::string left_id;
  std::string right_id;

  /// Fills whichever side is empty with the mirror of the other.
  static PolicyPair from(const PolicyCheckpoint* left, const PolicyCheckpoint* right);
};

/// Target end active at protocol step `step`.
TargetEnd target_for_step(const ProtocolConfig& protocol, std::uint32_t step);

/// Image positions for a policy position: formation offsets on a circle of
/// radius half_width (a diamond for 4 images), clamped to the arena.
std::vector<Vec2> formation_images(Vec2 center, std::uint32_t n_images, double half_width);

/// Decision half of a session: observation -> action -> agent motion. Shared
/// by the simulated runner and the live bridge so both log identical records
/// for identical fish inputs.
class SessionRunner {
 public:
  SessionRunner(const PolicyPair& policies, const RunConfig& cfg);

  struct Outcome {
    StepRecord record;
    /// Rendered image positions at the start of every substep of this step.
    std::vector<std::vector<Vec2>> image_track;
  };
  /// Runs one protocol step from the given fish snapshot.
  Outcome step(const std::vector<Vec2>& fish, double time);

  bool done() const { return next_step_ >= cfg_.protocol.total_steps; }
  std::uint32_t next_step() const { return next_step_; }
  std::uint32_t substeps() const { return substeps_; }
  std::size_t agent_count() const { return agents_.size(); }
  std::vector<Vec2> agent_positions() const;
  std::vector<Vec2> images() const;
  const RunConfig& config() const { return cfg_; }
  SessionHeader header(SourceKind source) const;

 private:
  PolicyPair policies_;
  RunConfig cfg_;
  std::vector<LagState> agents_;
  ObservationBuilder observer_;
  Rng policy_rng_;
  std::uint32_t substeps_;
  std::uint32_t next_step_ = 0;
};

/// Anything that yields N_r fish positions per step.
class FishSource {
 public:
  virtual ~FishSource() = default;
  virtual std::vector<Vec2> read() = 0;
  /// Moves the source through one protocol step while the images follow `image_track`.
  virtual void advance(const std::vector<std::vector<Vec2>>& image_track) = 0;
};

/// Swarm model driven by the rendered images. With n_real = 1 it is the
/// centroid school model.
class SimulatedFishSource final : public FishSource {
 public:
  SimulatedFishSource(const RunConfig& cfg, std::uint64_t seed);
  std::vector<Vec2> read() override { return swarm_.positions(); }
  void advance(const std::vector<std::vector<Vec2>>& image_track) override;
  const SwarmState& state() const { return swarm_; }

 private:
  SimParams params_;
  SwarmState swarm_;
  Rng rng_;
};

/// Runs a whole protocol as fast as possible against `source`.
SessionLog run_session(const PolicyPair& policies, FishSource& source, const RunConfig& cfg,
                       SourceKind kind = SourceKind::Simulated);

/// Line-delimited JSON: a header line then one record per step.
void write_log(const SessionLog& log, const std::filesystem::path& path);
std::string log_to_string(const SessionLog& log);

struct ReadLogResult {
  SessionLog log;
  std::optional<std::string> warning;  // set when the file was truncated
};
ReadLogResult read_log(const std::filesystem::path& path);
ReadLogResult parse_log(std::string_view text);

std::string record_to_json(const StepRecord& r);

}  // namespace shoal
