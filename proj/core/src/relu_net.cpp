#include "splitlab/relu_net.hpp"

#include <cmath>
#include <stdexcept>

namespace splitlab {

NetworkParams::NetworkParams(Eigen::MatrixXd w1, Eigen::VectorXd w2)
    : first_layer(std::move(w1)), second_layer(std::move(w2)) {
  if (first_layer.rows() != second_layer.size())
    throw std::invalid_argument("NetworkParams: layer width mismatch");
}

Eigen::VectorXd NetworkParams::flat() const {
  const int M = units();
  const int p = input_dim();
  Eigen::VectorXd w(dim());
  for (int m = 0; m < M; ++m) w.segment(m * p, p) = first_layer.row(m);
  w.tail(M) = second_layer;
  return w;
}

NetworkParams NetworkParams::from_flat(const Eigen::VectorXd& w, int units, int input_dim) {
  if (units <= 0 || input_dim <= 0)
    throw std::invalid_argument("from_flat: dimensions must be positive");
  if (w.size() != static_cast<long>(units) * (input_dim + 1))
    throw std::invalid_argument("from_flat: flat vector has wrong length");
  NetworkParams params;
  params.first_layer.resize(units, input_dim);
  for (int m = 0; m < units; ++m)
    params.first_layer.row(m) = w.segment(m * input_dim, input_dim);
  params.second_layer = w.tail(units);
  return params;
}

Eigen::VectorXd NetworkParams::block(int m) const {
  const int p = input_dim();
  Eigen::VectorXd b(p + 1);
  b.head(p) = first_layer.row(m);
  b(p) = second_layer(m);
  return b;
}

NetworkParams NetworkParams::from_blocks(const std::vector<Eigen::VectorXd>& blocks) {
  if (blocks.empty()) throw std::invalid_argument("from_blocks: no blocks");
  const int q = static_cast<int>(blocks.front().size());
  if (q < 2) throw std::invalid_argument("from_blocks: block dimension too small");
  const int M = static_cast<int>(blocks.size());
  NetworkParams params;
  params.first_layer.resize(M, q - 1);
  params.second_layer.resize(M);
  for (int m = 0; m < M; ++m) {
    if (blocks[m].size() != q)
      throw std::invalid_argument("from_blocks: inconsistent block dimensions");
    params.first_layer.row(m) = blocks[m].head(q - 1);
    params.second_layer(m) = blocks[m](q - 1);
  }
  return params;
}

NetworkParams NetworkParams::permuted(const std::vector<int>& perm) const {
  const int M = units();
  if (static_cast<int>(perm.size()) != M)
    throw std::invalid_argument("permuted: permutation size mismatch");
  NetworkParams out;
  out.first_layer.resize(M, input_dim());
  out.second_layer.resize(M);
  for (int m = 0; m < M; ++m) {
    out.first_layer.row(m) = first_layer.row(perm[m]);
    out.second_layer(m) = second_layer(perm[m]);
  }
  return out;
}

void ObjectiveConfig::validate() const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("ObjectiveConfig: lambda must be >= 0");
  if (!(noise_sigma > 0.0)) throw std::invalid_argument("ObjectiveConfig: noise_sigma must be > 0");
}

void Dataset::validate() const {
  if (inputs.rows() < 1) throw std::invalid_argument("Dataset: empty");
  if (inputs.rows() != targets.size())
    throw std::invalid_argument("Dataset: inputs/targets size mismatch");
}

double forward(const NetworkParams& params, const Eigen::VectorXd& x) {
  if (x.size() != params.input_dim())
    throw std::invalid_argument("forward: input dimension mismatch");
  KahanSum sum;
  const int M = params.units();
  for (int m = 0; m < M; ++m) {
    const double z = params.first_layer.row(m).dot(x);
    if (z > 0.0) sum.add(params.second_layer(m) * z);
  }
  return sum.value();
}

Eigen::VectorXd forward_batch(const NetworkParams& params, const Eigen::MatrixXd& inputs) {
  if (inputs.cols() != params.input_dim())
    throw std::invalid_argument("forward_batch: input dimension mismatch");
  Eigen::MatrixXd acts = inputs * params.first_layer.transpose();
  acts = acts.cwiseMax(0.0);
  return acts * params.second_layer;
}

namespace {

double data_term(const Eigen::VectorXd& residuals, double noise_sigma) {
  KahanSum sum;
  for (long i = 0; i < residuals.size(); ++i) sum.add(residuals(i) * residuals(i));
  return sum.value() / (2.0 * noise_sigma * noise_sigma);
}

}  // namespace

double objective(const NetworkParams& params, const Dataset& data, const ObjectiveConfig& cfg) {
  data.validate();
  cfg.validate();
  const Eigen::VectorXd residuals = forward_batch(params, data.inputs) - data.targets;
  return data_term(residuals, cfg.noise_sigma) + cfg.lambda * params.squared_norm();
}

double log_likelihood(const NetworkParams& params, const Dataset& data, const ObjectiveConfig& cfg) {
  data.validate();
  cfg.validate();
  const Eigen::VectorXd residuals = forward_batch(params, data.inputs) - data.targets;
  const double n = static_cast<double>(data.size());
  return -data_term(residuals, cfg.noise_sigma) -
         0.5 * n * std::log(2.0 * M_PI * cfg.noise_sigma * cfg.noise_sigma);
}

double objective_gradient(const NetworkParams& params, const Dataset& data,
                          const ObjectiveConfig& cfg, Eigen::VectorXd& grad) {
  data.validate();
  cfg.validate();
  const int M = params.units();
  const int p = params.input_dim();
  const double inv_var = 1.0 / (cfg.noise_sigma * cfg.noise_sigma);

  Eigen::MatrixXd pre = data.inputs * params.first_layer.transpose();  // n x M
  Eigen::MatrixXd acts = pre.cwiseMax(0.0);
  Eigen::VectorXd residuals = acts * params.second_layer - data.targets;

  // d/dW1: ((e w2^T) .* 1[pre>0])^T X ; subgradient at 0 is 0 (strict >).
  Eigen::MatrixXd mask = (pre.array() > 0.0).cast<double>();
  Eigen::MatrixXd gate = (residuals * params.second_layer.transpose()).cwiseProduct(mask);
  Eigen::MatrixXd grad_w1 = inv_var * (gate.transpose() * data.inputs) +
                            2.0 * cfg.lambda * params.first_layer;
  Eigen::VectorXd grad_w2 = inv_var * (acts.transpose() * residuals) +
                            2.0 * cfg.lambda * params.second_layer;

  grad.resize(params.dim());
  for (int m = 0; m < M; ++m) grad.segment(m * p, p) = grad_w1.row(m);
  grad.tail(M) = grad_w2;

  return data_term(residuals, cfg.noise_sigma) + cfg.lambda * params.squared_norm();
}

Eigen::VectorXd gradient(const NetworkParams& params, const Dataset& data,
                         const ObjectiveConfig& cfg) {
  Eigen::VectorXd grad;
  objective_gradient(params, data, cfg, grad);
  return grad;
}

}  // namespace splitlab
