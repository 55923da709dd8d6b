#pragma once

#include <Eigen/Dense>
#include <vector>

namespace splitlab {

/// Weights of a width-M one-hidden-layer ReLU network without biases:
///   f(x) = sum_m second_layer[m] * max(first_layer.row(m) . x, 0).
/// Flat layout is first_layer row-major followed by second_layer, so the
/// per-neuron block m is (first_layer.row(m), second_layer[m]) in R^{p+1}.
struct NetworkParams {
  Eigen::MatrixXd first_layer;   // M x p
  Eigen::VectorXd second_layer;  // M

  NetworkParams() = default;
  NetworkParams(Eigen::MatrixXd w1, Eigen::VectorXd w2);

  int units() const { return static_cast<int>(first_layer.rows()); }
  int input_dim() const { return static_cast<int>(first_layer.cols()); }
  int dim() const { return units() * (input_dim() + 1); }

  Eigen::VectorXd flat() const;
  static NetworkParams from_flat(const Eigen::VectorXd& w, int units, int input_dim);

  /// Per-neuron block (w1_m, w2_m) in R^{p+1}.
  Eigen::VectorXd block(int m) const;
  static NetworkParams from_blocks(const std::vector<Eigen::VectorXd>& blocks);

  /// Reorders neurons: block m of the result is block perm[m] of *this.
  NetworkParams permuted(const std::vector<int>& perm) const;

  double squared_norm() const {
    return first_layer.squaredNorm() + second_layer.squaredNorm();
  }
};

struct ObjectiveConfig {
  double lambda = 2.0;      // L2 penalty weight, >= 0
  double noise_sigma = 1.0; // likelihood std, > 0

  void validate() const;
};

struct Dataset {
  Eigen::MatrixXd inputs;  // n x p
  Eigen::VectorXd targets; // n
  std::uint64_t seed = 0;
  std::string gt_id;

  int size() const { return static_cast<int>(inputs.rows()); }
  int input_dim() const { return static_cast<int>(inputs.cols()); }
  void validate() const;
};

/// Order-robust sum: Kahan compensation keeps permutation-invariance checks
/// tight at the 1e-12 level.
class KahanSum {
public:
  void add(double x) {
    const double y = x - comp_;
    const double t = sum_ + y;
    comp_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Network output at a single input.
double forward(const NetworkParams& params, const Eigen::VectorXd& x);

/// Network outputs for every row of inputs.
Eigen::VectorXd forward_batch(const NetworkParams& params, const Eigen::MatrixXd& inputs);

/// Regularized objective: sum_i (y_i - f(x_i))^2 / (2 sigma^2) + lambda |w|^2.
/// The Gaussian log-normalizer is deliberately omitted; MAP and posterior
/// shape do not depend on it (log_likelihood carries the full density).
double objective(const NetworkParams& params, const Dataset& data, const ObjectiveConfig& cfg);

/// Exact gradient of `objective` in flat layout; ReLU subgradient at 0 is 0.
Eigen::VectorXd gradient(const NetworkParams& params, const Dataset& data, const ObjectiveConfig& cfg);

/// Full Gaussian log-likelihood of the dataset, constants included.
double log_likelihood(const NetworkParams& params, const Dataset& data, const ObjectiveConfig& cfg);

/// Objective value and gradient in one pass over the data (shared GEMMs);
/// `grad` is resized to params.dim(). Returns the objective value.
double objective_gradient(const NetworkParams& params, const Dataset& data,
                          const ObjectiveConfig& cfg, Eigen::VectorXd& grad);

}  // namespace splitlab
