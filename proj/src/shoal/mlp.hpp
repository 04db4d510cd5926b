#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "shoal/dynamics.hpp"
#include "shoal/env.hpp"
#include "shoal/rng.hpp"

namespace shoal {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct LayerShape {
  std::uint32_t out = 0;
  std::uint32_t in = 0;
  friend bool operator==(LayerShape, LayerShape) = default;
};

/// Actor-critic MLP: tanh trunk shared by an 8-way policy head and a scalar
/// value head. All weights live in one flat vector; layer k occupies
/// W_k (out x in, row-major) followed by b_k. Layer order is trunk layers,
/// then the policy head, then the value head.
class Mlp {
 public:
  static constexpr std::uint32_t kActions = kActionCount;

  Mlp() = default;
  /// trunk_dims = {inputs, hidden...}; e.g. {4, 64, 64}.
  explicit Mlp(std::vector<std::uint32_t> trunk_dims);
  /// Rebuilds from a stored shape table (as read from a checkpoint).
  Mlp(std::vector<LayerShape> shapes, Eigen::VectorXd params);

  /// Orthogonal init: trunk gain sqrt(2), policy head 0.01, value head 1; zero biases.
  void init_orthogonal(Rng& rng);

  struct Output {
    std::array<double, kActions> logits{};
    double value = 0.0;
  };
  Output forward(const Observation& obs) const;
  Output forward(std::span<const double> input) const;

  /// Activations kept for the backward pass. Columns are samples.
  struct BatchCache {
    std::vector<Eigen::MatrixXd> activations;  // [0] is the input
    Eigen::MatrixXd logits;                    // 8 x B
    Eigen::RowVectorXd values;                 // 1 x B
  };
  BatchCache forward_batch(const Eigen::MatrixXd& inputs) const;

  /// Gradient of a scalar loss given dL/dlogits (8 x B) and dL/dvalues (1 x B).
  Eigen::VectorXd backward(const BatchCache& cache, const Eigen::MatrixXd& d_logits,
                           const Eigen::RowVectorXd& d_values) const;

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }
  const std::vector<LayerShape>& shapes() const { return shapes_; }
  std::size_t trunk_layers() const { return shapes_.size() - 2; }
  std::uint32_t input_size() const { return shapes_.front().in; }

  Eigen::Map<RowMajorMatrix> weight(std::size_t layer);
  Eigen::Map<const RowMajorMatrix> weight(std::size_t layer) const;
  Eigen::Map<Eigen::VectorXd> bias(std::size_t layer);
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;

  friend bool operator==(const Mlp& a, const Mlp& b) {
    return a.shapes_ == b.shapes_ && a.params_.size() == b.params_.size() && a.params_ == b.params_;
  }

 private:
  void layout();

  std::vector<LayerShape> shapes_;
  std::vector<std::size_t> offsets_;
  Eigen::VectorXd params_;
};

/// Numerically stable log-softmax.
std::array<double, Mlp::kActions> log_softmax(const std::array<double, Mlp::kActions>& logits);

struct ActionSample {
  int action = 0;
  double log_prob = 0.0;
};

/// Categorical draw from softmax(logits).
ActionSample sample_action(const std::array<double, Mlp::kActions>& logits, Rng& rng);
ActionSample greedy_action(const std::array<double, Mlp::kActions>& logits);

}  // namespace shoal
