#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <vector>

#include "splitlab/samplers.hpp"
#include "splitlab/synth.hpp"

namespace splitlab {

enum class AlignmentReference { ChainFirstDraw, GroundTruth };

/// Epistemic-uncertainty statistics over pooled posterior draws.
struct UncertaintyReport {
  double predictive_var = 0.0;     // mean over test x of Var over draws of f(x)
  double weight_cov_trace = 0.0;   // tr Cov(w) / d, pooled over all chains
  double within_mode_trace = 0.0;  // per-chain trace after neuron alignment, / d
  int n = 0;
  int width = 0;
  long draws = 0;
};

/// The within-mode variant aligns every draw's neuron order to the chain's
/// first draw (or to the teacher when requested for M = M* sanity checks)
/// before computing the per-chain covariance trace.
UncertaintyReport uncertainty_decomposition(
    const std::vector<SampleTrace>& traces, const Eigen::MatrixXd& test_inputs,
    AlignmentReference reference = AlignmentReference::ChainFirstDraw,
    const GroundTruth* gt = nullptr);

struct PredictiveMetrics {
  double rmse_map = 0.0;                  // ensemble-mean MAP predictor vs targets
  double rmse_posterior_mean = 0.0;       // posterior-mean predictor vs targets
  double lppd = 0.0;                      // over posterior draws
  double lppd_map = 0.0;                  // over the MAP ensemble members
  double rmse_map_true = 0.0;             // vs noise-free teacher outputs
  double rmse_posterior_mean_true = 0.0;  // vs noise-free teacher outputs
};

/// RMSE / LPPD of the MAP ensemble (chain inits) and the posterior draws on
/// a test set. Noise-free columns require the teacher.
PredictiveMetrics predictive_metrics(const std::vector<SampleTrace>& traces,
                                     const Dataset& test, const ObjectiveConfig& cfg,
                                     const GroundTruth* gt = nullptr);

struct MomentCell {
  int k = 0;
  long count = 0;        // pooled (draw, neuron) samples of s
  double mean_s = 0.0;
  double std_s = 0.0;
  double mean_s2 = 0.0;
  double std_s2 = 0.0;
  double theory_mean = 0.0;    // mu_{k,alpha}
  double theory_second = 0.0;  // 1/k
  double ks_c = 0.0;           // KS distance of c_m vs Beta(alpha, (k-1)alpha); k >= 2
};

struct MomentReport {
  std::map<int, MomentCell> per_k;
  double alpha = 0.0;
  long draws_used = 0;
  long excluded_nonsurjective = 0;
  long excluded_clamped = 0;
  long excluded_degenerate = 0;
};

/// Groups pooled draws by inferred assignment and group size, compares the
/// scalar projections against the closed-form moments, and scores the
/// splitting-coefficient marginals with a KS distance. Draws with
/// non-surjective assignments or clamped mass above `clamp_threshold` are
/// excluded and counted. Throws empty_report_error when nothing survives.
MomentReport moment_validation(const std::vector<SampleTrace>& traces, const GroundTruth& gt,
                               double clamp_threshold = 0.05);

/// Sup distance between the empirical CDF of `samples` and `cdf`.
double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf);

}  // namespace splitlab
