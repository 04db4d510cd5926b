#include "shoal/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace shoal {

Mlp::Mlp(std::vector<std::uint32_t> trunk_dims) {
  if (trunk_dims.size() < 2) fail(ErrorKind::InvalidArgument, "MLP needs an input size and at least one hidden layer");
  for (std::size_t i = 1; i < trunk_dims.size(); ++i) shapes_.push_back({trunk_dims[i], trunk_dims[i - 1]});
  shapes_.push_back({kActions, trunk_dims.back()});
  shapes_.push_back({1, trunk_dims.back()});
  layout();
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offsets_.back()));
}

Mlp::Mlp(std::vector<LayerShape> shapes, Eigen::VectorXd params) : shapes_(std::move(shapes)) {
  if (shapes_.size() < 3) fail(ErrorKind::InvalidArgument, "MLP shape table needs a trunk and two heads");
  for (std::size_t i = 1; i < shapes_.size(); ++i) {
    const auto expected_in = i < shapes_.size() - 1 ? shapes_[i - 1].out : shapes_[i - 2].out;
    if (shapes_[i].in != expected_in) fail(ErrorKind::InvalidArgument, "MLP shape table is inconsistent");
  }
  if (shapes_[shapes_.size() - 2].out != kActions || shapes_.back().out != 1)
    fail(ErrorKind::InvalidArgument, "MLP heads must be 8 logits and 1 value");
  layout();
  if (static_cast<std::size_t>(params.size()) != offsets_.back())
    fail(ErrorKind::InvalidArgument, "MLP parameter count does not match its shape table");
  params_ = std::move(params);
}

void Mlp::layout() {
  offsets_.assign(1, 0);
  for (const auto& s : shapes_) offsets_.push_back(offsets_.back() + std::size_t{s.out} * s.in + s.out);
}

Eigen::Map<RowMajorMatrix> Mlp::weight(std::size_t l) {
  return {params_.data() + offsets_[l], shapes_[l].out, shapes_[l].in};
}
Eigen::Map<const RowMajorMatrix> Mlp::weight(std::size_t l) const {
  return {params_.data() + offsets_[l], shapes_[l].out, shapes_[l].in};
}
Eigen::Map<Eigen::VectorXd> Mlp::bias(std::size_t l) {
  return {params_.data() + offsets_[l] + std::size_t{shapes_[l].out} * shapes_[l].in, shapes_[l].out};
}
Eigen::Map<const Eigen::VectorXd> Mlp::bias(std::size_t l) const {
  return {params_.data() + offsets_[l] + std::size_t{shapes_[l].out} * shapes_[l].in, shapes_[l].out};
}

namespace {

RowMajorMatrix orthogonal(std::uint32_t rows, std::uint32_t cols, double gain, Rng& rng) {
  const Eigen::Index big = std::max(rows, cols);
  const Eigen::Index small = std::min(rows, cols);
  Eigen::MatrixXd g(big, small);
  for (Eigen::Index c = 0; c < small; ++c)
    for (Eigen::Index r = 0; r < big; ++r) g(r, c) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(small, small);
  for (Eigen::Index c = 0; c < small; ++c)
    if (r(c, c) < 0.0) q.col(c) *= -1.0;
  RowMajorMatrix w = rows >= cols ? RowMajorMatrix(q) : RowMajorMatrix(q.transpose());
  return gain * w;
}

}  // namespace

void Mlp::init_orthogonal(Rng& rng) {
  const std::size_t n = shapes_.size();
  for (std::size_t l = 0; l < n; ++l) {
    const double gain = l < n - 2 ? std::numbers::sqrt2 : (l == n - 2 ? 0.01 : 1.0);
    weight(l) = orthogonal(shapes_[l].out, shapes_[l].in, gain, rng);
    bias(l).setZero();
  }
}

Mlp::Output Mlp::forward(const Observation& obs) const {
  const auto flat = obs.flat();
  return forward(flat);
}

Mlp::Output Mlp::forward(std::span<const double> input) const {
  if (input.size() != input_size()) fail(ErrorKind::InvalidArgument, "MLP input size mismatch");
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(input.data(), static_cast<Eigen::Index>(input.size()));
  for (std::size_t l = 0; l < trunk_layers(); ++l) a = (weight(l) * a + bias(l)).array().tanh().matrix();
  const std::size_t p = shapes_.size() - 2;
  const Eigen::VectorXd logits = weight(p) * a + bias(p);
  Output out;
  for (std::size_t i = 0; i < kActions; ++i) out.logits[i] = logits(static_cast<Eigen::Index>(i));
  out.value = (weight(p + 1) * a + bias(p + 1))(0);
  return out;
}

Mlp::BatchCache Mlp::forward_batch(const Eigen::MatrixXd& inputs) const {
  BatchCache cache;
  cache.activations.reserve(trunk_layers() + 1);
  cache.activations.push_back(inputs);
  for (std::size_t l = 0; l < trunk_layers(); ++l) {
    Eigen::MatrixXd z = weight(l) * cache.activations.back();
    z.colwise() += bias(l);
    cache.activations.push_back(z.array().tanh().matrix());
  }
  const std::size_t p = shapes_.size() - 2;
  const auto& h = cache.activations.back();
  cache.logits = weight(p) * h;
  cache.logits.colwise() += bias(p);
  cache.values = (weight(p + 1) * h).row(0).array() + bias(p + 1)(0);
  return cache;
}

Eigen::VectorXd Mlp::backward(const BatchCache& cache, const Eigen::MatrixXd& d_logits,
                              const Eigen::RowVectorXd& d_values) const {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());
  auto g_weight = [&](std::size_t l) {
    return Eigen::Map<RowMajorMatrix>(grad.data() + offsets_[l], shapes_[l].out, shapes_[l].in);
  };
  auto g_bias = [&](std::size_t l) {
    return Eigen::Map<Eigen::VectorXd>(grad.data() + offsets_[l] + std::size_t{shapes_[l].out} * shapes_[l].in,
                                       shapes_[l].out);
  };

  const std::size_t p = shapes_.size() - 2;
  const std::size_t v = p + 1;
  const auto& h = cache.activations.back();
  g_weight(p) = d_logits * h.transpose();
  g_bias(p) = d_logits.rowwise().sum();
  g_weight(v) = d_values * h.transpose();
  g_bias(v)(0) = d_values.sum();

  Eigen::MatrixXd d_a = weight(p).transpose() * d_logits + weight(v).transpose() * d_values;
  for (std::size_t l = trunk_layers(); l-- > 0;) {
    const auto& a = cache.activations[l + 1];
    const Eigen::MatrixXd d_z = d_a.array() * (1.0 - a.array().square());
    g_weight(l) = d_z * cache.activations[l].transpose();
    g_bias(l) = d_z.rowwise().sum();
    if (l > 0) d_a = weight(l).transpose() * d_z;
  }
  return grad;
}

std::array<double, Mlp::kActions> log_softmax(const std::array<double, Mlp::kActions>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - m);
  const double lse = m + std::log(sum);
  std::array<double, Mlp::kActions> out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

ActionSample sample_action(const std::array<double, Mlp::kActions>& logits, Rng& rng) {
  const auto logp = log_softmax(logits);
  const double u = rng.uniform();
  double acc = 0.0;
  int pick = Mlp::kActions - 1;
  for (int i = 0; i < static_cast<int>(Mlp::kActions); ++i) {
    acc += std::exp(logp[static_cast<std::size_t>(i)]);
    if (u < acc) {
      pick = i;
      break;
    }
  }
  // Skip zero-probability tail entries that rounding could land on.
  while (pick > 0 && logp[static_cast<std::size_t>(pick)] == -std::numeric_limits<double>::infinity()) --pick;
  return {pick, logp[static_cast<std::size_t>(pick)]};
}

ActionSample greedy_action(const std::array<double, Mlp::kActions>& logits) {
  const auto it = std::max_element(logits.begin(), logits.end());
  const int a = static_cast<int>(it - logits.begin());
  return {a, log_softmax(logits)[static_cast<std::size_t>(a)]};
}

}  // namespace shoal
