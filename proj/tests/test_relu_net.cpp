#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "splitlab/relu_net.hpp"
#include "splitlab/rng.hpp"

using namespace splitlab;

namespace {

NetworkParams random_params(int units, int input_dim, Rng& rng, double scale = 1.0) {
  NetworkParams params;
  params.first_layer.resize(units, input_dim);
  params.second_layer.resize(units);
  for (int m = 0; m < units; ++m) {
    for (int j = 0; j < input_dim; ++j) params.first_layer(m, j) = scale * rng.normal();
    params.second_layer(m) = scale * rng.normal();
  }
  return params;
}

Dataset random_dataset(const NetworkParams& truth, int n, Rng& rng, double noise) {
  Dataset data;
  data.inputs.resize(n, truth.input_dim());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < truth.input_dim(); ++j) data.inputs(i, j) = rng.normal();
  data.targets = forward_batch(truth, data.inputs);
  for (int i = 0; i < n; ++i) data.targets(i) += noise * rng.normal();
  return data;
}

// Independent oracle: central finite differences of the objective.
Eigen::VectorXd fd_gradient(const NetworkParams& params, const Dataset& data,
                            const ObjectiveConfig& cfg, double h) {
  const Eigen::VectorXd w = params.flat();
  Eigen::VectorXd out(w.size());
  for (long i = 0; i < w.size(); ++i) {
    Eigen::VectorXd lo = w, hi = w;
    lo(i) -= h;
    hi(i) += h;
    out(i) = (objective(NetworkParams::from_flat(hi, params.units(), params.input_dim()), data, cfg) -
              objective(NetworkParams::from_flat(lo, params.units(), params.input_dim()), data, cfg)) /
             (2.0 * h);
  }
  return out;
}

std::vector<int> random_permutation(int n, Rng& rng) {
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  return perm;
}

}  // namespace

TEST_CASE("flat/block views are lossless re-indexings") {
  Rng rng(7);
  const NetworkParams params = random_params(6, 4, rng);
  CHECK(params.dim() == 6 * 5);
  const NetworkParams back = NetworkParams::from_flat(params.flat(), 6, 4);
  CHECK(back.first_layer == params.first_layer);
  CHECK(back.second_layer == params.second_layer);

  std::vector<Eigen::VectorXd> blocks;
  for (int m = 0; m < 6; ++m) blocks.push_back(params.block(m));
  const NetworkParams rebuilt = NetworkParams::from_blocks(blocks);
  CHECK(rebuilt.flat() == params.flat());
}

TEST_CASE("forward basics") {
  NetworkParams zero;
  zero.first_layer = Eigen::MatrixXd::Zero(3, 2);
  zero.second_layer = Eigen::VectorXd::Zero(3);
  CHECK(forward(zero, Eigen::Vector2d(0.4, -2.0)) == 0.0);

  NetworkParams single;
  single.first_layer.resize(1, 2);
  single.first_layer << 1.0, 0.0;
  single.second_layer.resize(1);
  single.second_layer << 2.0;
  CHECK(forward(single, Eigen::Vector2d(3.0, -1.0)) == doctest::Approx(6.0));
  // inactive unit
  CHECK(forward(single, Eigen::Vector2d(-3.0, 5.0)) == 0.0);

  CHECK_THROWS_AS(forward(single, Eigen::Vector3d(1.0, 2.0, 3.0)), std::invalid_argument);
}

TEST_CASE("forward and objective are permutation invariant") {
  Rng rng(11);
  const NetworkParams params = random_params(12, 5, rng);
  const Dataset data = random_dataset(params, 200, rng, 0.3);
  const ObjectiveConfig cfg{0.8, 0.7};
  const double base_obj = objective(params, data, cfg);

  for (int trial = 0; trial < 20; ++trial) {
    const NetworkParams permuted = params.permuted(random_permutation(12, rng));
    Eigen::VectorXd x(5);
    for (int j = 0; j < 5; ++j) x(j) = rng.normal();
    CHECK(forward(permuted, x) == doctest::Approx(forward(params, x)).epsilon(1e-12));
    CHECK(objective(permuted, data, cfg) == doctest::Approx(base_obj).epsilon(1e-12));
  }
}

TEST_CASE("objective anchor values") {
  NetworkParams zero;
  zero.first_layer = Eigen::MatrixXd::Zero(2, 2);
  zero.second_layer = Eigen::VectorXd::Zero(2);

  Dataset data;
  data.inputs.resize(3, 2);
  data.inputs << 1, 0, 0, 1, 1, 1;
  data.targets = Eigen::Vector3d::Zero();
  CHECK(objective(zero, data, ObjectiveConfig{0.0, 1.0}) == 0.0);

  Dataset one_point;
  one_point.inputs.resize(1, 2);
  one_point.inputs << 1, 1;
  one_point.targets.resize(1);
  one_point.targets << 2.0;
  // residual term 4/2 = 2, zero penalty at zero weights
  CHECK(objective(zero, one_point, ObjectiveConfig{1.0, 1.0}) == doctest::Approx(2.0));

  // perfectly fit dataset: penalty term only
  NetworkParams unit;
  unit.first_layer.resize(1, 2);
  unit.first_layer << std::sqrt(0.5), 0.0;
  unit.second_layer.resize(1);
  unit.second_layer << std::sqrt(0.5);
  Dataset fit;
  fit.inputs.resize(2, 2);
  fit.inputs << 1, 0, 2, 0;
  fit.targets.resize(2);
  fit.targets << 0.5, 1.0;
  CHECK(unit.squared_norm() == doctest::Approx(1.0));
  CHECK(objective(unit, fit, ObjectiveConfig{0.5, 1.0}) == doctest::Approx(0.5));

  Dataset empty;
  empty.inputs.resize(0, 2);
  empty.targets.resize(0);
  CHECK_THROWS_AS(objective(zero, empty, ObjectiveConfig{1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(objective(zero, one_point, ObjectiveConfig{1.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(objective(zero, one_point, ObjectiveConfig{-0.1, 1.0}), std::invalid_argument);
}

TEST_CASE("gradient matches central finite differences") {
  Rng rng(23);
  const NetworkParams truth = random_params(4, 3, rng);
  const Dataset data = random_dataset(truth, 60, rng, 0.5);
  double worst = 0.0;
  for (const ObjectiveConfig cfg : {ObjectiveConfig{0.0, 1.0}, ObjectiveConfig{0.4, 0.8},
                                    ObjectiveConfig{2.0, 1.5}, ObjectiveConfig{0.01, 0.3},
                                    ObjectiveConfig{5.0, 2.0}}) {
    for (int trial = 0; trial < 4; ++trial) {
      const NetworkParams params = random_params(4, 3, rng);
      const Eigen::VectorXd analytic = gradient(params, data, cfg);
      const Eigen::VectorXd numeric = fd_gradient(params, data, cfg, 1e-5);
      worst = std::max(worst, (analytic - numeric).norm() / numeric.norm());
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("gradient anchors") {
  Rng rng(31);
  const NetworkParams params = random_params(3, 3, rng);
  // zero residuals and lambda = 0: stationary
  Dataset fit;
  fit.inputs.resize(40, 3);
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 3; ++j) fit.inputs(i, j) = rng.normal();
  fit.targets = forward_batch(params, fit.inputs);
  CHECK(gradient(params, fit, ObjectiveConfig{0.0, 1.0}).norm() == doctest::Approx(0.0));

  // with zero residuals, only the penalty gradient 2 lambda w remains
  const Eigen::VectorXd grad = gradient(params, fit, ObjectiveConfig{0.75, 1.0});
  CHECK((grad - 1.5 * params.flat()).norm() < 1e-12);
}

TEST_CASE("log likelihood carries the Gaussian normalizer") {
  NetworkParams zero;
  zero.first_layer = Eigen::MatrixXd::Zero(1, 2);
  zero.second_layer = Eigen::VectorXd::Zero(1);

  Dataset point;
  point.inputs.resize(1, 2);
  point.inputs << 1, 1;
  point.targets.resize(1);
  point.targets << 0.0;
  const double half_log_2pi = 0.5 * std::log(2.0 * M_PI);
  CHECK(log_likelihood(zero, point, ObjectiveConfig{0.0, 1.0}) ==
        doctest::Approx(-half_log_2pi).epsilon(1e-12));

  point.targets << 1.0;  // residual 1
  CHECK(log_likelihood(zero, point, ObjectiveConfig{0.0, 1.0}) ==
        doctest::Approx(-0.5 - half_log_2pi).epsilon(1e-12));

  Dataset many;
  many.inputs = Eigen::MatrixXd::Random(17, 2);
  many.targets = Eigen::VectorXd::Zero(17);
  CHECK(log_likelihood(zero, many, ObjectiveConfig{0.0, 1.0}) ==
        doctest::Approx(-17.0 * half_log_2pi).epsilon(1e-12));
}

TEST_CASE("block rescaling only helps at the balanced point") {
  // objective((s w1, w2/s)) >= objective(w), equality iff |w1| = |w2|
  Rng rng(47);
  NetworkParams params = random_params(3, 3, rng);
  // balance block 0 first
  const double scale = std::sqrt(std::abs(params.second_layer(0)) /
                                 params.first_layer.row(0).norm());
  params.first_layer.row(0) *= scale;
  params.second_layer(0) /= scale;
  const Dataset data = random_dataset(params, 50, rng, 0.0);
  const ObjectiveConfig cfg{1.0, 1.0};
  const double base = objective(params, data, cfg);
  for (double s : {0.5, 0.9, 1.1, 2.0}) {
    NetworkParams scaled = params;
    scaled.first_layer.row(0) *= s;
    scaled.second_layer(0) /= s;
    CHECK(objective(scaled, data, cfg) > base);
  }
}
