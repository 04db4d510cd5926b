#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "shoal/types.hpp"

namespace shoal {

enum class ObservationMode { Global, ClusterAssignment };
enum class RewardMode { Baseline, Composite };
enum class SchoolModel { Centroid, Swarm };
enum class TargetSchedule { Fixed, Random };
enum class AgentLayout { FixedFormation, Independent };

/// Constants of the behavioral model. Defaults are tuned so agent and
/// school cover comparable distances over one action period.
struct SimParams {
  double tau_v = 0.5;
  double tau_r = 0.5;
  double dt_sim = 0.1;
  double dt_action = 1.0;
  double phase_max = 2.0;
  double delta_x_max = 0.2;
  double delta_y_max = 0.2;
  double theta = 0.3;
  double p_ignore = 0.6;
  std::uint32_t n_real = 5;
  std::uint32_t n_virtual = 1;
  double action_step_len = 0.15;
  // Swarm-only extension; not part of the centroid model.
  double cohesion_weight = 0.5;
  SchoolModel model = SchoolModel::Centroid;

  /// dt_action / dt_sim, validated to be a positive integer.
  std::uint32_t substeps() const;

  friend bool operator==(const SimParams&, const SimParams&) = default;
};

struct RewardConfig {
  double beta = 0.3;
  TargetEnd target_end = TargetEnd::Right;
  RewardMode mode = RewardMode::Composite;

  friend bool operator==(const RewardConfig&, const RewardConfig&) = default;
};

struct PPOConfig {
  std::uint64_t total_steps = 200000;
  std::uint32_t rollout_len = 2048;
  double gamma = 0.99;
  double lambda_gae = 0.95;
  double clip_eps = 0.2;
  double lr = 3e-4;
  std::uint32_t epochs = 4;
  std::uint32_t minibatch = 64;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;  // 0 disables global-norm clipping
  std::uint32_t eval_len = 5000;
  std::uint32_t eval_points = 10;
  bool eval_greedy = false;
  std::uint32_t episode_len = 128;
  TargetSchedule target_schedule = TargetSchedule::Fixed;
  std::vector<std::uint32_t> hidden = {64, 64};

  friend bool operator==(const PPOConfig&, const PPOConfig&) = default;
};

struct ProtocolConfig {
  std::uint32_t total_steps = 900;
  std::uint32_t switch_every = 90;
  double step_duration = 1.2;
  TargetEnd start_direction = TargetEnd::Right;
  AgentLayout layout = AgentLayout::FixedFormation;
  std::uint32_t formation_images = 4;
  double formation_half_width = 0.05;
  std::uint32_t n_agents = 2;  // Independent layout only

  friend bool operator==(const ProtocolConfig&, const ProtocolConfig&) = default;
};

struct RunConfig {
  SimParams sim;
  RewardConfig reward;
  PPOConfig ppo;
  ProtocolConfig protocol;
  std::uint64_t seed = 0;
  ObservationMode observation_mode = ObservationMode::Global;
  bool cluster_warm_start = true;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Throws Error(Validation) naming the first violated constraint.
void validate(const RunConfig& cfg);

/// Parses dotted-key text ("sim.tau_v = 0.5", '#' comments). Absent keys keep
/// their defaults; unknown or duplicate keys are errors. Result is validated.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical text form: every key, fixed order, shortest round-trip numbers.
std::string to_text(const RunConfig& cfg);
void save_config(const RunConfig& cfg, const std::filesystem::path& path);

/// Single-key access used by the C API and CLI overrides. set_value does not validate.
void set_value(RunConfig& cfg, std::string_view key, std::string_view value);
std::string get_value(const RunConfig& cfg, std::string_view key);
std::vector<std::string> config_keys();

/// FNV-1a 64 over the canonical text.
std::uint64_t digest(const RunConfig& cfg);
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull);
std::string hex64(std::uint64_t v);

/// Explicit path wins, then $SHOAL_CONFIG, else none (use defaults).
std::optional<std::filesystem::path> resolve_config_path(const std::optional<std::string>& explicit_path);

/// True when a / b is a positive integer, decided on the shortest decimal
/// representations of both values.
bool is_integer_multiple(double a, double b);

}  // namespace shoal
