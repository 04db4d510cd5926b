#include "shoal/config.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace shoal {

namespace {

template <class E>
struct EnumName {
  E value;
  std::string_view name;
};

constexpr std::array<EnumName<TargetEnd>, 2> kTargetEnds{{{TargetEnd::Left, "left"}, {TargetEnd::Right, "right"}}};
constexpr std::array<EnumName<ObservationMode>, 2> kObsModes{
    {{ObservationMode::Global, "global"}, {ObservationMode::ClusterAssignment, "cluster"}}};
constexpr std::array<EnumName<RewardMode>, 2> kRewardModes{
    {{RewardMode::Baseline, "baseline"}, {RewardMode::Composite, "composite"}}};
constexpr std::array<EnumName<SchoolModel>, 2> kSchoolModels{
    {{SchoolModel::Centroid, "centroid"}, {SchoolModel::Swarm, "swarm"}}};
constexpr std::array<EnumName<TargetSchedule>, 2> kSchedules{
    {{TargetSchedule::Fixed, "fixed"}, {TargetSchedule::Random, "random"}}};
constexpr std::array<EnumName<AgentLayout>, 2> kLayouts{
    {{AgentLayout::FixedFormation, "formation"}, {AgentLayout::Independent, "independent"}}};

template <class E, std::size_t N>
std::string_view enum_name(const std::array<EnumName<E>, N>& table, E v) {
  for (const auto& e : table)
    if (e.value == v) return e.name;
  return "?";
}

template <class E, std::size_t N>
void enum_parse(const std::array<EnumName<E>, N>& table, std::string_view key, std::string_view text, E& out) {
  for (const auto& e : table) {
    if (e.name == text) {
      out = e.value;
      return;
    }
  }
  std::string allowed;
  for (const auto& e : table) allowed += (allowed.empty() ? "" : "|") + std::string(e.name);
  fail(ErrorKind::Parse, std::string(key) + ": expected one of " + allowed + ", got '" + std::string(text) + "'");
}

std::string fmt_double(double v) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string format(double v) { return fmt_double(v); }
std::string format(std::uint64_t v) { return std::to_string(v); }
std::string format(std::uint32_t v) { return std::to_string(v); }
std::string format(bool v) { return v ? "true" : "false"; }
std::string format(TargetEnd v) { return std::string(enum_name(kTargetEnds, v)); }
std::string format(ObservationMode v) { return std::string(enum_name(kObsModes, v)); }
std::string format(RewardMode v) { return std::string(enum_name(kRewardModes, v)); }
std::string format(SchoolModel v) { return std::string(enum_name(kSchoolModels, v)); }
std::string format(TargetSchedule v) { return std::string(enum_name(kSchedules, v)); }
std::string format(AgentLayout v) { return std::string(enum_name(kLayouts, v)); }
std::string format(const std::vector<std::uint32_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view text, std::string_view what) {
  fail(ErrorKind::Parse, std::string(key) + ": cannot parse '" + std::string(text) + "' as " + std::string(what));
}

void parse(std::string_view key, std::string_view t, double& out) {
  double v{};
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) bad_value(key, t, "a real number");
  out = v;
}

template <class U>
void parse_unsigned(std::string_view key, std::string_view t, U& out) {
  U v{};
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) bad_value(key, t, "a non-negative integer");
  out = v;
}
void parse(std::string_view key, std::string_view t, std::uint64_t& out) { parse_unsigned(key, t, out); }
void parse(std::string_view key, std::string_view t, std::uint32_t& out) { parse_unsigned(key, t, out); }

void parse(std::string_view key, std::string_view t, bool& out) {
  if (t == "true" || t == "1") out = true;
  else if (t == "false" || t == "0") out = false;
  else bad_value(key, t, "a boolean");
}
void parse(std::string_view k, std::string_view t, TargetEnd& out) { enum_parse(kTargetEnds, k, t, out); }
void parse(std::string_view k, std::string_view t, ObservationMode& out) { enum_parse(kObsModes, k, t, out); }
void parse(std::string_view k, std::string_view t, RewardMode& out) { enum_parse(kRewardModes, k, t, out); }
void parse(std::string_view k, std::string_view t, SchoolModel& out) { enum_parse(kSchoolModels, k, t, out); }
void parse(std::string_view k, std::string_view t, TargetSchedule& out) { enum_parse(kSchedules, k, t, out); }
void parse(std::string_view k, std::string_view t, AgentLayout& out) { enum_parse(kLayouts, k, t, out); }

void parse(std::string_view key, std::string_view t, std::vector<std::uint32_t>& out) {
  std::vector<std::uint32_t> v;
  std::size_t pos = 0;
  while (pos <= t.size()) {
    const auto comma = t.find(',', pos);
    const auto item = t.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    std::uint32_t n{};
    parse_unsigned(key, item, n);
    v.push_back(n);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  out = std::move(v);
}

// Single list of every key, shared by parse, print, get and set.
template <class Cfg, class F>
void for_each_field(Cfg& c, F&& f) {
  f("seed", c.seed);
  f("observation_mode", c.observation_mode);
  f("cluster.warm_start", c.cluster_warm_start);
  f("sim.model", c.sim.model);
  f("sim.tau_v", c.sim.tau_v);
  f("sim.tau_r", c.sim.tau_r);
  f("sim.dt_sim", c.sim.dt_sim);
  f("sim.dt_action", c.sim.dt_action);
  f("sim.phase_max", c.sim.phase_max);
  f("sim.delta_x_max", c.sim.delta_x_max);
  f("sim.delta_y_max", c.sim.delta_y_max);
  f("sim.theta", c.sim.theta);
  f("sim.p_ignore", c.sim.p_ignore);
  f("sim.n_real", c.sim.n_real);
  f("sim.n_virtual", c.sim.n_virtual);
  f("sim.action_step_len", c.sim.action_step_len);
  f("sim.cohesion_weight", c.sim.cohesion_weight);
  f("reward.beta", c.reward.beta);
  f("reward.target_end", c.reward.target_end);
  f("reward.mode", c.reward.mode);
  f("ppo.total_steps", c.ppo.total_steps);
  f("ppo.rollout_len", c.ppo.rollout_len);
  f("ppo.gamma", c.ppo.gamma);
  f("ppo.lambda_gae", c.ppo.lambda_gae);
  f("ppo.clip_eps", c.ppo.clip_eps);
  f("ppo.lr", c.ppo.lr);
  f("ppo.epochs", c.ppo.epochs);
  f("ppo.minibatch", c.ppo.minibatch);
  f("ppo.entropy_coef", c.ppo.entropy_coef);
  f("ppo.value_coef", c.ppo.value_coef);
  f("ppo.max_grad_norm", c.ppo.max_grad_norm);
  f("ppo.eval_len", c.ppo.eval_len);
  f("ppo.eval_points", c.ppo.eval_points);
  f("ppo.eval_greedy", c.ppo.eval_greedy);
  f("ppo.episode_len", c.ppo.episode_len);
  f("ppo.target_schedule", c.ppo.target_schedule);
  f("ppo.hidden", c.ppo.hidden);
  f("protocol.total_steps", c.protocol.total_steps);
  f("protocol.switch_every", c.protocol.switch_every);
  f("protocol.step_duration", c.protocol.step_duration);
  f("protocol.start_direction", c.protocol.start_direction);
  f("protocol.layout", c.protocol.layout);
  f("protocol.formation_images", c.protocol.formation_images);
  f("protocol.formation_half_width", c.protocol.formation_half_width);
  f("protocol.n_agents", c.protocol.n_agents);
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void invalid(const std::string& msg) { fail(ErrorKind::Validation, msg); }

void require_positive(std::string_view key, double v) {
  if (!(v > 0.0) || !std::isfinite(v)) invalid(std::string(key) + " must be positive");
}

void require_unit(std::string_view key, double v) {
  if (!(v >= 0.0 && v <= 1.0)) invalid(std::string(key) + " must lie in [0,1]");
}

// Exact decimal decomposition v == mantissa * 10^exponent of the shortest
// round-trip text of v.
struct Decimal {
  __int128 mantissa = 0;
  int exponent = 0;
};

Decimal to_decimal(double v) {
  const std::string s = fmt_double(v);
  Decimal d;
  int frac_digits = 0;
  bool in_frac = false;
  std::size_t i = 0;
  for (; i < s.size() && s[i] != 'e'; ++i) {
    if (s[i] == '.') {
      in_frac = true;
      continue;
    }
    d.mantissa = d.mantissa * 10 + (s[i] - '0');
    if (in_frac) ++frac_digits;
  }
  int exp10 = 0;
  if (i < s.size()) exp10 = std::stoi(s.substr(i + 1));
  d.exponent = exp10 - frac_digits;
  return d;
}

}  // namespace

bool is_integer_multiple(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) return false;
  const Decimal da = to_decimal(a);
  const Decimal db = to_decimal(b);
  const int e = da.exponent - db.exponent;
  if (e >= 0) {
    // (ma * 10^e) mod mb, computed incrementally.
    __int128 r = da.mantissa % db.mantissa;
    for (int k = 0; k < e; ++k) r = (r * 10) % db.mantissa;
    if (r != 0) return false;
  } else {
    __int128 denom = db.mantissa;
    for (int k = 0; k < -e; ++k) {
      denom *= 10;
      if (denom > da.mantissa) return false;
    }
    if (da.mantissa % denom != 0) return false;
  }
  return a >= b;
}

std::uint32_t SimParams::substeps() const {
  return static_cast<std::uint32_t>(std::llround(dt_action / dt_sim));
}

void validate(const RunConfig& c) {
  const auto& s = c.sim;
  require_positive("sim.tau_v", s.tau_v);
  require_positive("sim.tau_r", s.tau_r);
  require_positive("sim.dt_sim", s.dt_sim);
  require_positive("sim.dt_action", s.dt_action);
  if (!is_integer_multiple(s.dt_action, s.dt_sim)) invalid("dt_action not integer multiple of dt_sim");
  require_positive("sim.phase_max", s.phase_max);
  if (!(s.delta_x_max >= 0.0) || !(s.delta_y_max >= 0.0)) invalid("sim.delta_x_max and sim.delta_y_max must be non-negative");
  require_positive("sim.theta", s.theta);
  require_unit("sim.p_ignore", s.p_ignore);
  if (s.n_real < 1) invalid("sim.n_real must be at least 1");
  if (s.n_virtual < 1) invalid("sim.n_virtual must be at least 1");
  require_positive("sim.action_step_len", s.action_step_len);
  require_unit("sim.cohesion_weight", s.cohesion_weight);

  if (!(c.reward.beta >= 0.0 && c.reward.beta <= 1.0)) invalid("beta must lie in [0,1]");

  if (c.observation_mode == ObservationMode::ClusterAssignment && s.n_real < s.n_virtual)
    invalid("cluster observation mode requires sim.n_real >= sim.n_virtual");
  if (c.observation_mode == ObservationMode::ClusterAssignment && s.n_virtual > 9)
    invalid("cluster observation mode supports at most 9 agents");

  const auto& p = c.ppo;
  if (p.rollout_len < 1) invalid("ppo.rollout_len must be at least 1");
  if (!(p.gamma > 0.0 && p.gamma <= 1.0)) invalid("ppo.gamma must lie in (0,1]");
  require_unit("ppo.lambda_gae", p.lambda_gae);
  require_positive("ppo.clip_eps", p.clip_eps);
  require_positive("ppo.lr", p.lr);
  if (p.epochs < 1) invalid("ppo.epochs must be at least 1");
  if (p.minibatch < 1) invalid("ppo.minibatch must be at least 1");
  if (!(p.entropy_coef >= 0.0) || !(p.value_coef >= 0.0)) invalid("ppo.entropy_coef and ppo.value_coef must be non-negative");
  if (!(p.max_grad_norm >= 0.0)) invalid("ppo.max_grad_norm must be non-negative");
  if (p.eval_len < 1) invalid("ppo.eval_len must be at least 1");
  if (p.episode_len < 1) invalid("ppo.episode_len must be at least 1");
  if (p.hidden.empty()) invalid("ppo.hidden must list at least one layer width");
  for (auto w : p.hidden)
    if (w < 1) invalid("ppo.hidden widths must be positive");

  const auto& pr = c.protocol;
  if (pr.total_steps < 1) invalid("protocol.total_steps must be at least 1");
  if (pr.switch_every < 1 || pr.total_steps % pr.switch_every != 0)
    invalid("protocol.switch_every must divide protocol.total_steps");
  require_positive("protocol.step_duration", pr.step_duration);
  if (!is_integer_multiple(pr.step_duration, s.dt_sim)) invalid("protocol.step_duration not integer multiple of dt_sim");
  if (pr.formation_images < 1) invalid("protocol.formation_images must be at least 1");
  if (!(pr.formation_half_width >= 0.0)) invalid("protocol.formation_half_width must be non-negative");
  if (pr.n_agents < 1) invalid("protocol.n_agents must be at least 1");
  if (pr.layout == AgentLayout::Independent && s.n_real < pr.n_agents)
    invalid("independent layout requires sim.n_real >= protocol.n_agents");
  if (pr.layout == AgentLayout::Independent && pr.n_agents > 9) invalid("independent layout supports at most 9 agents");
}

void set_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  bool found = false;
  for_each_field(cfg, [&](std::string_view k, auto& field) {
    if (k == key) {
      parse(k, value, field);
      found = true;
    }
  });
  if (!found) fail(ErrorKind::Validation, "unknown config key '" + std::string(key) + "'");
}

std::string get_value(const RunConfig& cfg, std::string_view key) {
  std::optional<std::string> out;
  for_each_field(cfg, [&](std::string_view k, const auto& field) {
    if (k == key) out = format(field);
  });
  if (!out) fail(ErrorKind::Validation, "unknown config key '" + std::string(key) + "'");
  return *out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  RunConfig c;
  for_each_field(c, [&](std::string_view k, const auto&) { keys.emplace_back(k); });
  return keys;
}

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": empty key");
    if (!seen.emplace(key).second) fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": duplicate key '" + std::string(key) + "'");
    set_value(cfg, key, value);
  }
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_text(const RunConfig& cfg) {
  std::string out;
  for_each_field(cfg, [&](std::string_view k, const auto& field) {
    out += k;
    out += " = ";
    out += format(field);
    out += '\n';
  });
  return out;
}

void save_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write config file '" + path.string() + "'");
  out << to_text(cfg);
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t digest(const RunConfig& cfg) { return fnv1a64(to_text(cfg)); }

std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
  return s;
}

std::optional<std::filesystem::path> resolve_config_path(const std::optional<std::string>& explicit_path) {
  if (explicit_path && !explicit_path->empty()) return std::filesystem::path(*explicit_path);
  if (const char* env = std::getenv("SHOAL_CONFIG"); env && *env) return std::filesystem::path(env);
  return std::nullopt;
}

}  // namespace shoal
