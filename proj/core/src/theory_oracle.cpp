#include "splitlab/theory_oracle.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <stdexcept>

namespace splitlab {

double log_gamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("log_gamma: x must be > 0");
  return std::lgamma(x);
}

double mu_k_alpha(int k, double alpha) {
  if (k < 1) throw std::domain_error("mu_k_alpha: k must be >= 1");
  if (!(alpha > 0.0)) throw std::domain_error("mu_k_alpha: alpha must be > 0");
  const double ka = k * alpha;
  return std::exp(log_gamma(alpha + 0.5) + log_gamma(ka) - log_gamma(alpha) -
                  log_gamma(ka + 0.5));
}

DirichletMoments dirichlet_moments(const DirichletLaw& law) {
  if (law.k < 1) throw std::domain_error("dirichlet_moments: k must be >= 1");
  DirichletMoments m;
  m.mean = 1.0 / law.k;
  if (law.k == 1) return m;  // point mass at 1
  m.variance = (law.k - 1.0) / law.kappa();
  m.covariance = -1.0 / law.kappa();
  return m;
}

BetaMarginal::BetaMarginal(double a, double b) : a_(a), b_(b) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("BetaMarginal: shapes must be > 0");
  log_norm_ = log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

double BetaMarginal::pdf(double x) const {
  if (x < 0.0 || x > 1.0) return 0.0;
  if (x == 0.0) return a_ > 1.0 ? 0.0 : (a_ == 1.0 ? std::exp(-log_norm_) : HUGE_VAL);
  if (x == 1.0) return b_ > 1.0 ? 0.0 : (b_ == 1.0 ? std::exp(-log_norm_) : HUGE_VAL);
  return std::exp((a_ - 1.0) * std::log(x) + (b_ - 1.0) * std::log1p(-x) - log_norm_);
}

double BetaMarginal::cdf(double x) const {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return boost::math::ibeta(a_, b_, x);
}

double BetaMarginal::sample(Rng& rng) const {
  const double x = rng.gamma(a_);
  const double y = rng.gamma(b_);
  return x / (x + y);
}

BetaMarginal beta_marginal(const DirichletLaw& law) {
  if (law.k < 2)
    throw std::domain_error("beta_marginal: degenerate for k = 1 (point mass at 1)");
  return BetaMarginal(law.alpha, (law.k - 1.0) * law.alpha);
}

BlockMoments theorem_moments(int k, double alpha, const Eigen::VectorXd& true_block) {
  if (k < 1) throw std::domain_error("theorem_moments: k must be >= 1");
  const double mu = mu_k_alpha(k, alpha);
  BlockMoments out;
  out.mean = mu * true_block;
  const Eigen::MatrixXd outer = true_block * true_block.transpose();
  out.second_moment = outer / static_cast<double>(k);
  out.covariance = (1.0 / k - mu * mu) * outer;
  return out;
}

MixtureMoments mixture_moments(const std::vector<Eigen::VectorXd>& blocks) {
  if (blocks.empty()) throw std::invalid_argument("mixture_moments: no blocks");
  const int M = static_cast<int>(blocks.size());
  const long q = blocks.front().size();
  for (const auto& b : blocks)
    if (b.size() != q) throw std::invalid_argument("mixture_moments: inconsistent block sizes");

  MixtureMoments out;
  out.block_mean = Eigen::VectorXd::Zero(q);
  for (const auto& b : blocks) out.block_mean += b;
  out.block_mean /= M;

  out.upsilon = Eigen::MatrixXd::Zero(q, q);
  double trace = 0.0;
  for (const auto& b : blocks) {
    const Eigen::VectorXd dev = b - out.block_mean;
    out.upsilon.noalias() += dev * dev.transpose();
    trace += dev.squaredNorm();
  }
  out.upsilon /= M;
  out.trace_total = trace;
  if (M >= 2) out.cross_covariance = -out.upsilon / (M - 1.0);

  // Every block position has the same marginal law under a uniform
  // permutation, so per-coordinate variances tile the upsilon diagonal.
  out.per_coordinate.resize(static_cast<long>(M) * q);
  for (int m = 0; m < M; ++m) out.per_coordinate.segment(m * q, q) = out.upsilon.diagonal();
  return out;
}

MixtureMoments mixture_moments_enumerated(const std::vector<Eigen::VectorXd>& blocks) {
  if (blocks.empty()) throw std::invalid_argument("mixture_moments_enumerated: no blocks");
  const int M = static_cast<int>(blocks.size());
  if (M > 8) throw std::invalid_argument("mixture_moments_enumerated: M too large to enumerate");
  const long q = blocks.front().size();
  const long d = M * q;

  std::vector<int> perm(M);
  for (int m = 0; m < M; ++m) perm[m] = m;
  std::vector<Eigen::VectorXd> stacked;
  do {
    Eigen::VectorXd w(d);
    for (int m = 0; m < M; ++m) w.segment(m * q, q) = blocks[perm[m]];
    stacked.push_back(std::move(w));
  } while (std::next_permutation(perm.begin(), perm.end()));

  const long count = static_cast<long>(stacked.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& w : stacked) mean += w;
  mean /= static_cast<double>(count);

  // Moments of the first block position; by symmetry every position matches.
  MixtureMoments out;
  out.block_mean = mean.head(q);
  out.upsilon = Eigen::MatrixXd::Zero(q, q);
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(q, q);
  out.per_coordinate = Eigen::VectorXd::Zero(d);
  double trace = 0.0;
  for (const auto& w : stacked) {
    const Eigen::VectorXd dev = w - mean;
    out.upsilon.noalias() += dev.head(q) * dev.head(q).transpose();
    if (M >= 2) cross.noalias() += dev.head(q) * dev.segment(q, q).transpose();
    out.per_coordinate += dev.cwiseProduct(dev);
    trace += dev.squaredNorm();
  }
  out.upsilon /= static_cast<double>(count);
  out.per_coordinate /= static_cast<double>(count);
  out.trace_total = trace / static_cast<double>(count);
  if (M >= 2) out.cross_covariance = cross / static_cast<double>(count);
  return out;
}

SampleTrace sample_manifold_posterior(const GroundTruth& gt, int width,
                                      const AssignmentMap& map, int draws, std::uint64_t seed) {
  if (!map.surjective)
    throw std::invalid_argument("sample_manifold_posterior: assignment must be surjective");
  if (map.width() != width)
    throw std::invalid_argument("sample_manifold_posterior: width mismatch with assignment");
  if (draws < 1) throw std::invalid_argument("sample_manifold_posterior: draws must be >= 1");

  const int p = gt.input_dim();
  const double alpha = 0.5 * (p + 1);
  Rng rng(seed);

  SampleTrace trace;
  trace.kind = SamplerKind::Manifold;
  trace.width = width;
  trace.input_dim = p;
  trace.gt_id = gt.id;
  trace.objective.noise_sigma = gt.noise_sigma;
  trace.config.kept_draws = draws;
  trace.config.seed = seed;
  trace.draws.resize(draws, width * (p + 1));

  std::vector<Eigen::VectorXd> coeffs(map.m_star);
  for (int t = 0; t < draws; ++t) {
    for (int g = 0; g < map.m_star; ++g) {
      const int k = map.group_sizes[g];
      Eigen::VectorXd c(k);
      double total = 0.0;
      for (int slot = 0; slot < k; ++slot) {
        c(slot) = rng.gamma(alpha);
        total += c(slot);
      }
      coeffs[g] = c / total;
    }
    const NetworkParams params = embed_truth(gt, width, coeffs, map.sigma);
    trace.draws.row(t) = params.flat().transpose();
  }

  // Balanced embedding as the nominal chain start.
  for (int g = 0; g < map.m_star; ++g)
    coeffs[g] = Eigen::VectorXd::Constant(map.group_sizes[g], 1.0 / map.group_sizes[g]);
  trace.init = embed_truth(gt, width, coeffs, map.sigma).flat();
  return trace;
}

}  // namespace splitlab
