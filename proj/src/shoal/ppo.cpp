#include "shoal/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace shoal {

void RolloutBuffer::push(const Transition& t) {
  if (full()) fail(ErrorKind::InvalidArgument, "rollout buffer is full");
  items_.push_back(t);
}

void RolloutBuffer::set_targets(std::vector<double> advantages, std::vector<double> returns) {
  if (advantages.size() != items_.size() || returns.size() != items_.size())
    fail(ErrorKind::InvalidArgument, "advantage/return length does not match the buffer");
  advantages_ = std::move(advantages);
  returns_ = std::move(returns);
}

void RolloutBuffer::clear() {
  items_.clear();
  advantages_.clear();
  returns_.clear();
}

GaeResult compute_gae(const RolloutBuffer& buffer, double bootstrap_value, double gamma, double lambda) {
  const std::size_t n = buffer.size();
  GaeResult r;
  r.advantages.assign(n, 0.0);
  r.returns.assign(n, 0.0);
  double next_adv = 0.0;
  double next_value = bootstrap_value;
  for (std::size_t t = n; t-- > 0;) {
    const auto& tr = buffer[t];
    const double live = tr.done ? 0.0 : 1.0;
    const double delta = tr.reward + gamma * next_value * live - tr.value;
    next_adv = delta + gamma * lambda * live * next_adv;
    r.advantages[t] = next_adv;
    r.returns[t] = next_adv + tr.value;
    next_value = tr.value;
  }
  return r;
}

void normalize_advantages(std::vector<double>& adv) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::max(std::sqrt(var / n), 1e-12);
  for (double& a : adv) a = (a - mean) / sd;
}

namespace {

std::vector<double> log_softmax_span(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - m);
  const double lse = m + std::log(sum);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
  return out;
}

}  // namespace

SurrogateTerm clipped_surrogate(std::span<const double> logits, int action, double old_log_prob, double advantage,
                                double clip_eps) {
  const auto logp = log_softmax_span(logits);
  const auto a = static_cast<std::size_t>(action);
  SurrogateTerm t;
  t.ratio = std::exp(logp[a] - old_log_prob);
  const double unclipped = t.ratio * advantage;
  const double clipped = std::clamp(t.ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantage;
  t.objective = std::min(unclipped, clipped);
  t.clipped = unclipped > clipped;
  t.d_logits.assign(logits.size(), 0.0);
  if (!t.clipped) {
    // d(rho)/d(z_k) = rho * (1[k == a] - pi_k)
    for (std::size_t k = 0; k < logits.size(); ++k)
      t.d_logits[k] = advantage * t.ratio * ((k == a ? 1.0 : 0.0) - std::exp(logp[k]));
  }
  return t;
}

double entropy(std::span<const double> logits, std::vector<double>* d_logits) {
  const auto logp = log_softmax_span(logits);
  double h = 0.0;
  for (double lp : logp) h -= std::exp(lp) * lp;
  if (d_logits) {
    d_logits->resize(logits.size());
    for (std::size_t k = 0; k < logits.size(); ++k) (*d_logits)[k] = -std::exp(logp[k]) * (logp[k] + h);
  }
  return h;
}

Minibatch gather_minibatch(const RolloutBuffer& buffer, std::span<const std::size_t> indices) {
  Minibatch b;
  const auto n = static_cast<Eigen::Index>(indices.size());
  b.inputs.resize(Observation::kSize, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const std::size_t i = indices[static_cast<std::size_t>(j)];
    const auto flat = buffer[i].obs.flat();
    for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(Observation::kSize); ++r)
      b.inputs(r, j) = flat[static_cast<std::size_t>(r)];
    b.actions.push_back(buffer[i].action);
    b.old_log_probs.push_back(buffer[i].log_prob);
    b.advantages.push_back(buffer.advantages()[i]);
    b.returns.push_back(buffer.returns()[i]);
  }
  return b;
}

LossTerms ppo_loss(const Mlp& net, const Minibatch& batch, const PPOConfig& cfg) {
  const auto cache = net.forward_batch(batch.inputs);
  const Eigen::Index n = batch.inputs.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  Eigen::MatrixXd d_logits(Mlp::kActions, n);
  Eigen::RowVectorXd d_values(n);
  LossTerms out;
  std::vector<double> logits(Mlp::kActions);
  std::vector<double> d_ent;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(Mlp::kActions); ++k)
      logits[static_cast<std::size_t>(k)] = cache.logits(k, j);
    const auto s = static_cast<std::size_t>(j);
    const auto term = clipped_surrogate(logits, batch.actions[s], batch.old_log_probs[s], batch.advantages[s],
                                        cfg.clip_eps);
    const double h = entropy(logits, &d_ent);
    const double v_err = cache.values(j) - batch.returns[s];

    out.policy -= term.objective * inv_n;
    out.value += v_err * v_err * inv_n;
    out.entropy += h * inv_n;
    if (std::abs(term.ratio - 1.0) > cfg.clip_eps) out.clip_fraction += inv_n;
    out.approx_kl -= std::log(term.ratio) * inv_n;

    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(Mlp::kActions); ++k) {
      const auto kk = static_cast<std::size_t>(k);
      d_logits(k, j) = (-term.d_logits[kk] - cfg.entropy_coef * d_ent[kk]) * inv_n;
    }
    d_values(j) = 2.0 * cfg.value_coef * v_err * inv_n;
  }
  out.total = out.policy + cfg.value_coef * out.value - cfg.entropy_coef * out.entropy;
  out.grad = net.backward(cache, d_logits, d_values);
  return out;
}

Adam::Adam(Eigen::Index size, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
      m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

LossStats ppo_update(Mlp& net, Adam& optimizer, RolloutBuffer& buffer, const PPOConfig& cfg, Rng& rng) {
  if (!buffer.has_targets()) fail(ErrorKind::InvalidArgument, "ppo_update needs advantages computed on the buffer");
  const std::size_t n = buffer.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  LossStats stats;
  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
    for (std::size_t start = 0; start < n; start += cfg.minibatch) {
      const std::size_t len = std::min<std::size_t>(cfg.minibatch, n - start);
      const auto batch = gather_minibatch(buffer, std::span(order).subspan(start, len));
      auto loss = ppo_loss(net, batch, cfg);
      if (!std::isfinite(loss.total) || !loss.grad.allFinite()) {
        fail(ErrorKind::Numeric, "PPO loss became non-finite (policy=" + std::to_string(loss.policy) +
                                     ", value=" + std::to_string(loss.value) + ", entropy=" +
                                     std::to_string(loss.entropy) + ", epoch " + std::to_string(epoch) + ")");
      }
      if (cfg.max_grad_norm > 0.0) {
        const double gn = loss.grad.norm();
        if (gn > cfg.max_grad_norm) loss.grad *= cfg.max_grad_norm / gn;
      }
      optimizer.step(net.params(), loss.grad);
      stats.policy_loss += loss.policy;
      stats.value_loss += loss.value;
      stats.entropy += loss.entropy;
      stats.clip_fraction += loss.clip_fraction;
      stats.approx_kl += loss.approx_kl;
      ++stats.minibatches;
    }
  }
  if (stats.minibatches) {
    const double m = static_cast<double>(stats.minibatches);
    stats.policy_loss /= m;
    stats.value_loss /= m;
    stats.entropy /= m;
    stats.clip_fraction /= m;
    stats.approx_kl /= m;
  }
  buffer.clear();
  return stats;
}

}  // namespace shoal
