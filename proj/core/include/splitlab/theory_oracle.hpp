#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "splitlab/rng.hpp"
#include "splitlab/samplers.hpp"
#include "splitlab/split_diag.hpp"
#include "splitlab/synth.hpp"

namespace splitlab {

/// log Gamma(x) for x > 0; throws std::domain_error otherwise.
double log_gamma(double x);

/// mu_{k,alpha} = Gamma(alpha+1/2) Gamma(k alpha) / (Gamma(alpha) Gamma(k alpha+1/2)),
/// the mean of sqrt(c) under a symmetric Dirichlet marginal. Lies in (0,1],
/// strictly decreasing in k. Evaluated in log space.
double mu_k_alpha(int k, double alpha);

/// Symmetric Dirichlet on a k-simplex with concentration alpha = (p+1)/2.
struct DirichletLaw {
  int k = 1;
  double alpha = 3.0;

  double kappa() const { return static_cast<double>(k) * k * (k * alpha + 1.0); }
};

struct DirichletMoments {
  double mean = 0.0;        // 1/k
  double variance = 0.0;    // (k-1)/kappa
  double covariance = 0.0;  // -1/kappa, distinct coordinates
};

DirichletMoments dirichlet_moments(const DirichletLaw& law);

/// Marginal of one symmetric-Dirichlet coordinate: Beta(alpha, (k-1) alpha).
class BetaMarginal {
public:
  BetaMarginal(double a, double b);
  double a() const { return a_; }
  double b() const { return b_; }
  double pdf(double x) const;
  double cdf(double x) const;
  double sample(Rng& rng) const;  // ratio of two Gamma draws

private:
  double a_;
  double b_;
  double log_norm_;  // log B(a, b)
};

/// Throws std::domain_error for k = 1 (degenerate point mass at 1).
BetaMarginal beta_marginal(const DirichletLaw& law);

/// Closed-form split-posterior moments of one block in a size-k group.
struct BlockMoments {
  Eigen::VectorXd mean;            // mu_{k,alpha} * true_block
  Eigen::MatrixXd second_moment;   // (1/k) * true_block true_block^T
  Eigen::MatrixXd covariance;      // (1/k - mu^2) * true_block true_block^T
};

BlockMoments theorem_moments(int k, double alpha, const Eigen::VectorXd& true_block);

/// Moments of the uniform permutation mixture over a list of blocks.
struct MixtureMoments {
  Eigen::VectorXd block_mean;              // average block
  Eigen::MatrixXd upsilon;                 // empirical block covariance
  std::optional<Eigen::MatrixXd> cross_covariance;  // -upsilon/(M-1), M >= 2
  double trace_total = 0.0;                // sum_m |block_m - mean|^2 = M tr(upsilon)
  Eigen::VectorXd per_coordinate;          // flat-coordinate variances, length M*q
};

MixtureMoments mixture_moments(const std::vector<Eigen::VectorXd>& blocks);

/// Reference path for the permutation mixture: enumerates all M! block
/// permutations and takes moments of the enumerated point set directly.
/// Exponential in M; intended for cross-checking mixture_moments at M <= 8.
MixtureMoments mixture_moments_enumerated(const std::vector<Eigen::VectorXd>& blocks);

/// Exact sampler of the split posterior on the manifold fixed by `map`:
/// per group and per draw, coefficients are Dir(alpha,...,alpha) with
/// alpha = (p+1)/2, embedded via the square-root splitting construction.
/// Every draw represents the teacher function exactly.
SampleTrace sample_manifold_posterior(const GroundTruth& gt, int width,
                                      const AssignmentMap& map, int draws, std::uint64_t seed);

}  // namespace splitlab
