#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "splitlab/errors.hpp"
#include "splitlab/rng.hpp"
#include "splitlab/samplers.hpp"
#include "splitlab/synth.hpp"

using namespace splitlab;

TEST_CASE("sampler config defaults and validation") {
  const SamplerConfig cfg;
  CHECK(cfg.warmup_steps == 1000);
  CHECK(cfg.kept_draws == 1000);
  CHECK(cfg.thinning == 10);
  CHECK(cfg.target_accept == 0.8);

  SamplerConfig bad = cfg;
  bad.kept_draws = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.target_accept = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.sgld_step = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  CHECK(sampler_kind_from_string("hmc") == SamplerKind::Hmc);
  CHECK(to_string(SamplerKind::Manifold) == "manifold");
  CHECK_THROWS_AS(sampler_kind_from_string("nuts"), std::invalid_argument);
}

TEST_CASE("adam: stationary start stays put") {
  const GroundTruth gt = make_ground_truth(3, 3, 2, 0.95);
  GroundTruth noiseless = gt;
  noiseless.noise_sigma = 0.0;
  const Dataset data = sample_dataset(noiseless, 200, 3);
  const ObjectiveConfig cfg{0.0, 1.0};
  AdamOptions opts;
  opts.steps = 500;
  const NetworkParams result = adam_map(gt.params, data, cfg, opts);
  CHECK((result.flat() - gt.params.flat()).norm() < 1e-6);
}

TEST_CASE("adam: pure shrinkage pulls toward zero") {
  // one dummy point with a huge noise scale: the data term is negligible
  // and the quadratic penalty dominates.
  Dataset data;
  data.inputs = Eigen::MatrixXd::Ones(1, 2);
  data.targets = Eigen::VectorXd::Zero(1);
  const ObjectiveConfig cfg{1.0, 1e6};
  NetworkParams init;
  init.first_layer.resize(2, 2);
  init.first_layer << 1.0, -0.5, 0.25, 0.75;
  init.second_layer.resize(2);
  init.second_layer << 0.5, -1.0;
  AdamOptions opts;
  opts.steps = 3000;
  opts.learning_rate = 0.02;
  const NetworkParams result = adam_map(init, data, cfg, opts);
  CHECK(result.squared_norm() < 1e-4 * init.squared_norm());
}

TEST_CASE("adam: divergence raises with step index") {
  const GroundTruth gt = make_ground_truth(3, 3, 5, 0.95);
  const Dataset data = sample_dataset(gt, 64, 6);
  NetworkParams init = gt.params;
  init.first_layer *= 1e200;  // objective overflows immediately
  AdamOptions opts;
  opts.steps = 10;
  CHECK_THROWS_AS(adam_map(init, data, ObjectiveConfig{1.0, 1.0}, opts), divergence_error);
}

TEST_CASE("sgld matches a 1-D standard normal") {
  DiagonalGaussianTarget target(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1));
  SamplerConfig cfg;
  cfg.warmup_steps = 5000;
  cfg.kept_draws = 100000;
  cfg.thinning = 10;
  cfg.sgld_step = 1e-2;
  cfg.seed = 71;
  const SampleTrace trace = run_sgld(target, Eigen::VectorXd::Zero(1), cfg);
  REQUIRE(trace.draws.rows() == 100000);
  const double mean = trace.draws.col(0).mean();
  const double var = trace.draws.col(0).squaredNorm() / trace.draws.rows() - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.1);
}

TEST_CASE("sgld: zero step size leaves the chain at its start") {
  DiagonalGaussianTarget target(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2));
  SamplerConfig cfg;
  cfg.warmup_steps = 10;
  cfg.kept_draws = 25;
  cfg.thinning = 2;
  cfg.sgld_step = 0.0;
  const Eigen::VectorXd init = Eigen::Vector2d(0.7, -0.3);
  const SampleTrace trace = run_sgld(target, init, cfg);
  for (long t = 0; t < trace.draws.rows(); ++t)
    CHECK((trace.draws.row(t).transpose() - init).norm() == 0.0);
}

TEST_CASE("sgld and hmc traces are reproducible bit for bit") {
  const GroundTruth gt = make_ground_truth(3, 3, 8, 0.95);
  const Dataset data = sample_dataset(gt, 128, 9);
  const ObjectiveConfig obj{1.0, 1.0};
  SamplerConfig cfg;
  cfg.warmup_steps = 200;
  cfg.kept_draws = 50;
  cfg.thinning = 2;
  cfg.sgld_step = 1e-4;
  cfg.leapfrog_steps = 5;
  cfg.seed = 99;

  const SampleTrace s1 = sgld_chain(gt.params, data, obj, cfg);
  const SampleTrace s2 = sgld_chain(gt.params, data, obj, cfg);
  CHECK(s1.draws == s2.draws);

  const SampleTrace h1 = hmc_chain(gt.params, data, obj, cfg);
  const SampleTrace h2 = hmc_chain(gt.params, data, obj, cfg);
  CHECK(h1.draws == h2.draws);
  CHECK(h1.acceptance.accepted == h2.acceptance.accepted);
}

TEST_CASE("hmc hits the acceptance target on an analytic Gaussian") {
  DiagonalGaussianTarget target(Eigen::Vector2d(1.0, -1.0), Eigen::Vector2d(4.0, 0.25));
  SamplerConfig cfg;  // full defaults: warmup 1000, kept 1000, thinning 10
  cfg.leapfrog_steps = 8;
  cfg.seed = 2024;
  const SampleTrace trace = run_hmc(target, Eigen::Vector2d::Zero(), cfg);
  CHECK(trace.acceptance.accept_rate() == doctest::Approx(0.8).epsilon(0.125));
  CHECK(trace.acceptance.divergences == 0);
}

TEST_CASE("hmc covariance matches a 2-D Gaussian within 5 percent") {
  DiagonalGaussianTarget target(Eigen::Vector2d(0.5, -2.0), Eigen::Vector2d(2.0, 0.5));
  SamplerConfig cfg;
  cfg.warmup_steps = 1000;
  cfg.kept_draws = 10000;
  cfg.thinning = 5;
  cfg.leapfrog_steps = 8;
  cfg.seed = 31337;
  const SampleTrace trace = run_hmc(target, Eigen::Vector2d::Zero(), cfg);
  const Eigen::VectorXd mean = trace.draws.colwise().mean();
  Eigen::MatrixXd centered = trace.draws.rowwise() - mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / trace.draws.rows();
  CHECK(cov(0, 0) == doctest::Approx(2.0).epsilon(0.05));
  CHECK(cov(1, 1) == doctest::Approx(0.5).epsilon(0.05));
  CHECK(std::abs(cov(0, 1)) < 0.05);
  CHECK(std::abs(mean(0) - 0.5) < 0.05);
}

TEST_CASE("leapfrog preserves the Hamiltonian to second order") {
  DiagonalGaussianTarget target(Eigen::Vector2d::Zero(), Eigen::Vector2d::Ones());
  Rng rng(55);
  Eigen::VectorXd w(2), p(2);
  for (int i = 0; i < 2; ++i) {
    w(i) = rng.normal();
    p(i) = rng.normal();
  }
  const double drift_small = leapfrog_energy_error(target, w, p, 1e-3, 100);
  CHECK(drift_small < 1e-4);
  // halving the step size cuts the error by about 4x
  const double drift_half = leapfrog_energy_error(target, w, p, 5e-4, 200);
  CHECK(drift_half < 0.35 * drift_small + 1e-12);
}

TEST_CASE("run_ensemble: determinism, order independence, metadata") {
  const GroundTruth gt = make_ground_truth(2, 2, 12, 0.95);
  const Dataset data = sample_dataset(gt, 96, 13);
  const ObjectiveConfig obj{1.0, 1.0};
  SamplerConfig cfg;
  cfg.warmup_steps = 150;
  cfg.kept_draws = 40;
  cfg.thinning = 2;
  cfg.leapfrog_steps = 4;
  cfg.seed = 7;
  AdamOptions adam;
  adam.steps = 300;

  const auto serial = run_ensemble(gt, data, 2, 3, obj, cfg, adam, SamplerKind::Hmc, 1);
  const auto parallel = run_ensemble(gt, data, 2, 3, obj, cfg, adam, SamplerKind::Hmc, 2);
  REQUIRE(serial.size() == 3);
  for (int chain = 0; chain < 3; ++chain) {
    CHECK(serial[chain].chain_id == chain);
    CHECK(serial[chain].draws == parallel[chain].draws);
    CHECK(serial[chain].gt_id == gt.id);
    CHECK(serial[chain].n == 96);
    CHECK(serial[chain].init.size() == 6);
  }
  // distinct chains explore distinct states
  CHECK(serial[0].draws != serial[1].draws);
}
