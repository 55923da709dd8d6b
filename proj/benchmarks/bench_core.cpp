#include "benchmark/benchmark.h"

#include "splitlab/relu_net.hpp"
#include "splitlab/rng.hpp"
#include "splitlab/samplers.hpp"
#include "splitlab/symmetry_diag.hpp"
#include "splitlab/synth.hpp"
#include "splitlab/theory_oracle.hpp"

namespace {

using namespace splitlab;

GroundTruth bench_gt(int m_star = 5, int p = 5) {
  GroundTruthOptions opts;
  opts.magnitude_floor = 1.0;
  opts.magnitude_scale = 0.2;
  return make_ground_truth(m_star, p, 7, 0.6, opts);
}

void BM_ObjectiveGradient(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int width = static_cast<int>(state.range(1));
  const GroundTruth gt = bench_gt();
  const Dataset data = sample_dataset(gt, n, 11);
  Rng rng(13);
  NetworkParams params;
  params.first_layer.resize(width, 5);
  params.second_layer.resize(width);
  for (int m = 0; m < width; ++m) {
    for (int j = 0; j < 5; ++j) params.first_layer(m, j) = rng.normal();
    params.second_layer(m) = rng.normal();
  }
  const ObjectiveConfig cfg{2.5, 1.0};
  Eigen::VectorXd grad;
  for (auto _ : state) {
    benchmark::DoNotOptimize(objective_gradient(params, data, cfg, grad));
    benchmark::DoNotOptimize(grad.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n));
}
BENCHMARK(BM_ObjectiveGradient)->Args({1024, 5})->Args({4096, 10})->Args({16384, 10});

void BM_HmcIteration(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const GroundTruth gt = bench_gt();
  const Dataset data = sample_dataset(gt, n, 17);
  SamplerConfig cfg;
  cfg.warmup_steps = 0;
  cfg.kept_draws = 8;
  cfg.thinning = 1;
  cfg.leapfrog_steps = 8;
  cfg.step_size = 0.01;
  PosteriorTarget target(data, ObjectiveConfig{2.5, 1.0}, 10);
  const Eigen::VectorXd init = Eigen::VectorXd::Constant(60, 0.3);
  for (auto _ : state) {
    cfg.seed += 1;
    benchmark::DoNotOptimize(run_hmc(target, init, cfg));
  }
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_HmcIteration)->Arg(1024)->Arg(4096);

void BM_Align(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  Rng rng(19);
  Eigen::MatrixXd a(width, 5), b(width, 5);
  for (long i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  for (long i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(align(a, b));
}
BENCHMARK(BM_Align)->Arg(5)->Arg(10)->Arg(40);

void BM_GammaSampler(benchmark::State& state) {
  Rng rng(23);
  double acc = 0.0;
  for (auto _ : state) acc += rng.gamma(3.0);
  benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_GammaSampler);

void BM_ManifoldDraws(benchmark::State& state) {
  const GroundTruth gt = bench_gt();
  const AssignmentMap map = AssignmentMap::from_sigma({0, 0, 1, 1, 2, 2, 3, 3, 4, 4}, 5);
  std::uint64_t seed = 29;
  for (auto _ : state)
    benchmark::DoNotOptimize(sample_manifold_posterior(gt, 10, map, 256, ++seed));
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_ManifoldDraws);

}  // namespace
