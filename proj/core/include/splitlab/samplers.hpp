#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "splitlab/relu_net.hpp"
#include "splitlab/rng.hpp"
#include "splitlab/synth.hpp"

namespace splitlab {

enum class SamplerKind { Sgld, Hmc, Manifold };

std::string to_string(SamplerKind kind);
SamplerKind sampler_kind_from_string(const std::string& name);

/// Defaults follow the shared sampler configuration used by every
/// experiment: 1000 warmup iterations, 1000 retained draws with thinning 10,
/// acceptance target 0.8.
struct SamplerConfig {
  int warmup_steps = 1000;
  int kept_draws = 1000;
  int thinning = 10;
  double target_accept = 0.8;
  double step_size = 0.1;  // initial leapfrog step, adapted during warmup
  int leapfrog_steps = 8;
  double sgld_step = 1e-4;
  std::uint64_t seed = 1;

  void validate() const;
};

struct AdamOptions {
  double learning_rate = 1e-2;
  int steps = 5000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Cosine decay floor as a fraction of learning_rate (1.0 = constant rate).
  double final_rate_fraction = 0.1;
};

struct AcceptanceStats {
  long attempted = 0;   // post-warmup proposals (0 for SGLD / manifold draws)
  long accepted = 0;
  long divergences = 0;
  double mean_accept_prob = 0.0;
  bool high_divergence_warning = false;

  double accept_rate() const {
    return attempted > 0 ? static_cast<double>(accepted) / attempted : 0.0;
  }
};

/// One chain's retained posterior draws plus everything needed to rerun it.
struct SampleTrace {
  Eigen::MatrixXd draws;  // kept_draws x d, flat parameter layout
  int chain_id = 0;
  SamplerKind kind = SamplerKind::Hmc;
  SamplerConfig config;
  ObjectiveConfig objective;
  Eigen::VectorXd init;   // flat sampler start (the chain's MAP for MCMC)
  AcceptanceStats acceptance;
  std::string gt_id;
  int width = 0;      // M
  int input_dim = 0;  // p
  int n = 0;          // training-set size the posterior conditions on
  std::uint64_t dataset_seed = 0;

  int dim() const { return width * (input_dim + 1); }
  NetworkParams draw_params(int t) const {
    return NetworkParams::from_flat(draws.row(t).transpose(), width, input_dim);
  }
};

/// Unnormalized negative log density with gradient. Implementations may
/// carry scratch buffers, so a Target instance must not be shared between
/// concurrently running chains.
class Target {
public:
  virtual ~Target() = default;
  virtual int dim() const = 0;
  /// Returns U(w) and fills grad with its gradient.
  virtual double value_and_grad(const Eigen::VectorXd& w, Eigen::VectorXd& grad) = 0;
};

/// The regularized network objective as a sampling target.
class PosteriorTarget : public Target {
public:
  PosteriorTarget(const Dataset& data, ObjectiveConfig cfg, int width);
  int dim() const override { return width_ * (input_dim_ + 1); }
  double value_and_grad(const Eigen::VectorXd& w, Eigen::VectorXd& grad) override;

private:
  const Dataset& data_;
  ObjectiveConfig cfg_;
  int width_;
  int input_dim_;
};

/// Gaussian N(mean, diag(variances)); analytic reference for sampler tests.
class DiagonalGaussianTarget : public Target {
public:
  DiagonalGaussianTarget(Eigen::VectorXd mean, Eigen::VectorXd variances);
  int dim() const override { return static_cast<int>(mean_.size()); }
  double value_and_grad(const Eigen::VectorXd& w, Eigen::VectorXd& grad) override;

private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd variances_;
};

/// Fixed-budget Adam on the regularized objective; returns the best iterate
/// encountered (never worse than init). Throws divergence_error on NaN/Inf.
NetworkParams adam_map(const NetworkParams& init, const Dataset& data,
                       const ObjectiveConfig& cfg, const AdamOptions& opts);

/// Generic kernels over an arbitrary target (used directly by sampler
/// sanity checks on analytic Gaussians). With warmup_steps = 0, run_hmc
/// uses step_size verbatim and identity mass (no adaptation).
SampleTrace run_sgld(Target& target, const Eigen::VectorXd& init, const SamplerConfig& cfg);
SampleTrace run_hmc(Target& target, const Eigen::VectorXd& init, const SamplerConfig& cfg);

/// |H(end) - H(start)| of one identity-mass leapfrog trajectory; exposes the
/// integrator for symplecticity diagnostics.
double leapfrog_energy_error(Target& target, const Eigen::VectorXd& position,
                             const Eigen::VectorXd& momentum, double step_size, int steps);

/// Posterior chains on a dataset. `init` is used as the chain start.
SampleTrace sgld_chain(const NetworkParams& init, const Dataset& data,
                       const ObjectiveConfig& cfg, const SamplerConfig& sampler_cfg);
SampleTrace hmc_chain(const NetworkParams& init, const Dataset& data,
                      const ObjectiveConfig& cfg, const SamplerConfig& sampler_cfg);

/// Independent Gaussian init -> Adam MAP -> sampler, once per chain; chain
/// seeds are derived from sampler_cfg.seed. Chains may run in parallel.
std::vector<SampleTrace> run_ensemble(const GroundTruth& gt, const Dataset& data, int width,
                                      int chains, const ObjectiveConfig& cfg,
                                      const SamplerConfig& sampler_cfg,
                                      const AdamOptions& adam_opts, SamplerKind kind,
                                      int max_parallel = 0);

/// Weight scale of the symmetric Gaussian chain initialization.
inline constexpr double kChainInitStd = 0.1;

}  // namespace splitlab
