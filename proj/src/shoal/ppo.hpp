#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "shoal/config.hpp"
#include "shoal/env.hpp"
#include "shoal/mlp.hpp"
#include "shoal/rng.hpp"

namespace shoal {

struct Transition {
  Observation obs;
  int action = 0;
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  bool done = false;  // episode ended after this step
};

/// Fixed-capacity on-policy storage; filled by rollouts, consumed by one update.
class RolloutBuffer {
 public:
  explicit RolloutBuffer(std::size_t capacity) : capacity_(capacity) { items_.reserve(capacity); }

  void push(const Transition& t);
  bool full() const { return items_.size() == capacity_; }
  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return items_[i]; }
  std::span<const Transition> items() const { return items_; }

  void set_targets(std::vector<double> advantages, std::vector<double> returns);
  const std::vector<double>& advantages() const { return advantages_; }
  const std::vector<double>& returns() const { return returns_; }
  bool has_targets() const { return !advantages_.empty() && advantages_.size() == items_.size(); }

  void clear();

 private:
  std::size_t capacity_;
  std::vector<Transition> items_;
  std::vector<double> advantages_;
  std::vector<double> returns_;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// delta_t = r_t + gamma * v_{t+1} * (1 - done_t) - v_t,
/// A_t = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}, returns = A + v.
/// v_{T} is bootstrap_value.
GaeResult compute_gae(const RolloutBuffer& buffer, double bootstrap_value, double gamma, double lambda);

/// In-place standardization to mean 0, std 1 (population std, floor 1e-12).
void normalize_advantages(std::vector<double>& adv);

/// Clipped-surrogate objective of one sample and its gradient w.r.t. the logits.
/// Works for any number of actions.
struct SurrogateTerm {
  double objective = 0.0;  // min(rho A, clip(rho) A)
  double ratio = 0.0;
  bool clipped = false;    // gradient blocked by the clip
  std::vector<double> d_logits;
};
SurrogateTerm clipped_surrogate(std::span<const double> logits, int action, double old_log_prob,
                                double advantage, double clip_eps);

/// Entropy of softmax(logits) and its gradient w.r.t. the logits.
double entropy(std::span<const double> logits, std::vector<double>* d_logits = nullptr);

struct Minibatch {
  Eigen::MatrixXd inputs;  // 4 x B
  std::vector<int> actions;
  std::vector<double> old_log_probs;
  std::vector<double> advantages;
  std::vector<double> returns;
};

Minibatch gather_minibatch(const RolloutBuffer& buffer, std::span<const std::size_t> indices);

struct LossTerms {
  double total = 0.0;     // minimized: -surrogate + c_v * value_mse - c_e * entropy
  double policy = 0.0;    // -mean surrogate
  double value = 0.0;     // mean (v - return)^2
  double entropy = 0.0;   // mean entropy
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  Eigen::VectorXd grad;
};
LossTerms ppo_loss(const Mlp& net, const Minibatch& batch, const PPOConfig& cfg);

/// Adaptive-moment optimizer (Adam).
class Adam {
 public:
  Adam(Eigen::Index size, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  double lr() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  Eigen::VectorXd m_, v_;
};

struct LossStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  std::size_t minibatches = 0;
};

/// `epochs` passes of shuffled minibatches with gradient steps on the clipped
/// objective. The buffer must carry normalized advantages; it is cleared after.
/// Throws Error(Numeric) if the loss goes NaN.
LossStats ppo_update(Mlp& net, Adam& optimizer, RolloutBuffer& buffer, const PPOConfig& cfg, Rng& rng);

}  // namespace shoal
