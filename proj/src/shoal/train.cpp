#include "shoal/train.hpp"

#include <cmath>

namespace shoal {

Observation Policy::view(const Observation& obs) const {
  if (!mirrored_) return obs;
  return {{1.0 - obs.reference_point.x, obs.reference_point.y}, {1.0 - obs.own_position.x, obs.own_position.y}};
}

ActionSample Policy::act(const Observation& obs, Rng& rng, bool greedy) const {
  const auto out = net_->forward(view(obs));
  ActionSample s = greedy ? greedy_action(out.logits) : sample_action(out.logits, rng);
  if (mirrored_) s.action = mirror_action(s.action);
  return s;
}

std::array<double, Mlp::kActions> Policy::probabilities(const Observation& obs) const {
  const auto logp = log_softmax(net_->forward(view(obs)).logits);
  std::array<double, Mlp::kActions> p{};
  for (std::size_t a = 0; a < p.size(); ++a) {
    const std::size_t src = mirrored_ ? static_cast<std::size_t>(mirror_action(static_cast<int>(a))) : a;
    p[a] = std::exp(logp[src]);
  }
  return p;
}

double evaluate_in(const Policy& policy, Environment& env, std::uint64_t steps, Rng& policy_rng, bool greedy) {
  if (steps < 1) fail(ErrorKind::InvalidArgument, "evaluation needs at least one step");
  auto obs = env.observe();
  std::vector<int> actions(env.agent_count());
  double sum = 0.0;
  for (std::uint64_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < obs.size(); ++i) actions[i] = policy.act(obs[i], policy_rng, greedy).action;
    auto res = env.step(actions);
    sum += res.rewards.base;
    obs = std::move(res.observations);
  }
  return sum / static_cast<double>(steps);
}

double evaluate(const Mlp& net, const RunConfig& cfg, std::uint64_t eval_steps, std::uint64_t seed) {
  Environment env(cfg, seed, Stream::EvalEnvironment, Stream::Clustering);
  env.reset();
  Rng policy_rng(seed, Stream::EvalPolicy);
  return evaluate_in(Policy(net), env, eval_steps, policy_rng, cfg.ppo.eval_greedy);
}

PolicyCheckpoint initial_checkpoint(const RunConfig& cfg) {
  validate(cfg);
  std::vector<std::uint32_t> dims{static_cast<std::uint32_t>(Observation::kSize)};
  dims.insert(dims.end(), cfg.ppo.hidden.begin(), cfg.ppo.hidden.end());
  PolicyCheckpoint c;
  c.net = Mlp(dims);
  Rng init(cfg.seed, Stream::WeightInit);
  c.net.init_orthogonal(init);
  c.config = cfg;
  return c;
}

PolicyCheckpoint train(const RunConfig& cfg, const ProgressFn& progress) {
  if (cfg.sim.n_virtual != 1)
    fail(ErrorKind::Validation, "training runs the single-agent environment; set sim.n_virtual = 1");
  PolicyCheckpoint ckpt = initial_checkpoint(cfg);
  const auto& pc = cfg.ppo;
  Mlp& net = ckpt.net;

  auto record = [&](std::uint64_t step) {
    const double r = evaluate(net, cfg, pc.eval_len, cfg.seed);
    ckpt.curve.push_back({step, r});
    return r;
  };
  if (pc.eval_points > 0) record(0);
  if (pc.total_steps == 0) return ckpt;

  Adam adam(net.params().size(), pc.lr);
  Environment env(cfg, cfg.seed);
  Rng policy_rng(cfg.seed, Stream::PolicySampling);
  Rng shuffle_rng(cfg.seed, Stream::MinibatchShuffle);
  RolloutBuffer buffer(pc.rollout_len);

  auto obs = env.reset();
  std::uint64_t done_steps = 0;
  std::uint32_t next_point = 1;
  while (done_steps < pc.total_steps) {
    const std::uint64_t chunk = std::min<std::uint64_t>(pc.rollout_len, pc.total_steps - done_steps);
    bool last_done = false;
    for (std::uint64_t t = 0; t < chunk; ++t) {
      const auto out = net.forward(obs[0]);
      const auto a = sample_action(out.logits, policy_rng);
      const int action = a.action;
      auto res = env.step(std::span<const int>(&action, 1));
      last_done = res.info.episode_end;
      buffer.push({obs[0], a.action, a.log_prob, out.value, res.reward, last_done});
      obs = last_done ? env.reset() : std::move(res.observations);
    }
    done_steps += chunk;

    const double bootstrap = last_done ? 0.0 : net.forward(obs[0]).value;
    auto gae = compute_gae(buffer, bootstrap, pc.gamma, pc.lambda_gae);
    normalize_advantages(gae.advantages);
    buffer.set_targets(std::move(gae.advantages), std::move(gae.returns));

    TrainProgress p;
    p.loss = ppo_update(net, adam, buffer, pc, shuffle_rng);
    p.steps_done = done_steps;
    p.total_steps = pc.total_steps;

    if (pc.eval_points > 0) {
      const std::uint64_t boundary =
          (pc.total_steps * next_point + pc.eval_points - 1) / pc.eval_points;  // ceil
      if (done_steps >= boundary || done_steps == pc.total_steps) {
        p.r_bar = record(done_steps);
        while (next_point <= pc.eval_points &&
               done_steps >= (pc.total_steps * next_point + pc.eval_points - 1) / pc.eval_points)
          ++next_point;
      }
    }
    if (progress) progress(p);
  }
  return ckpt;
}

}  // namespace shoal
