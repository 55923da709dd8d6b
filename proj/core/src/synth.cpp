#include "splitlab/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "splitlab/errors.hpp"
#include "splitlab/rng.hpp"

namespace splitlab {

GroundTruth make_ground_truth(int m_star, int input_dim, std::uint64_t seed,
                              double collinearity_bound,
                              const GroundTruthOptions& opts) {
  if (m_star < 2) throw std::invalid_argument("make_ground_truth: m_star must be >= 2");
  if (input_dim < 2) throw std::invalid_argument("make_ground_truth: input_dim must be >= 2");
  if (!(collinearity_bound > 0.0 && collinearity_bound < 1.0))
    throw std::invalid_argument("make_ground_truth: collinearity bound must lie in (0,1)");

  Rng rng(seed);
  Eigen::MatrixXd rows(m_star, input_dim);
  const int budget = opts.retry_factor * m_star;
  int draws = 0;
  for (int m = 0; m < m_star; ++m) {
    for (;;) {
      if (draws >= budget)
        throw generation_error("make_ground_truth: collinearity bound too tight for budget");
      ++draws;
      Eigen::VectorXd candidate(input_dim);
      for (int j = 0; j < input_dim; ++j) candidate(j) = rng.normal();
      const double norm = candidate.norm();
      if (norm == 0.0) continue;
      bool ok = true;
      for (int prev = 0; prev < m; ++prev) {
        const double cosine = std::abs(rows.row(prev).dot(candidate)) /
                              (rows.row(prev).norm() * norm);
        if (cosine > collinearity_bound) {
          ok = false;
          break;
        }
      }
      if (ok) {
        rows.row(m) = candidate;
        break;
      }
    }
  }

  Eigen::VectorXd outs(m_star);
  for (int m = 0; m < m_star; ++m) {
    const double magnitude =
        opts.magnitude_scale * std::abs(rng.normal()) + opts.magnitude_floor;
    const double sign = rng.uniform() <= 0.5 ? -1.0 : 1.0;
    outs(m) = sign * magnitude;
  }

  // Per-block positive rescaling to the minimum-norm representation:
  // (w1, w2) -> (s w1, w2 / s) keeps the function, s = sqrt(|w2|/|w1|)
  // equalizes the two norms.
  for (int m = 0; m < m_star; ++m) {
    const double scale = std::sqrt(std::abs(outs(m)) / rows.row(m).norm());
    rows.row(m) *= scale;
    outs(m) /= scale;
  }

  GroundTruth gt;
  gt.params = NetworkParams(std::move(rows), std::move(outs));
  gt.noise_sigma = opts.noise_sigma;
  gt.collinearity_bound = collinearity_bound;
  gt.seed = seed;
  gt.id = "gt-m" + std::to_string(m_star) + "-p" + std::to_string(input_dim) +
          "-s" + std::to_string(seed);
  return gt;
}

Dataset sample_dataset(const GroundTruth& gt, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_dataset: n must be >= 1");
  Rng rng(seed);
  const int p = gt.input_dim();
  Dataset data;
  data.inputs.resize(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) data.inputs(i, j) = rng.normal();
  data.targets = forward_batch(gt.params, data.inputs);
  if (gt.noise_sigma > 0.0)
    for (int i = 0; i < n; ++i) data.targets(i) += gt.noise_sigma * rng.normal();
  data.seed = seed;
  data.gt_id = gt.id;
  return data;
}

NetworkParams embed_truth(const GroundTruth& gt, int width,
                          const std::vector<Eigen::VectorXd>& coefficients,
                          const std::vector<int>& assignment) {
  const int m_star = gt.units();
  if (width < m_star) throw std::invalid_argument("embed_truth: width must be >= m_star");
  if (static_cast<int>(assignment.size()) != width)
    throw std::invalid_argument("embed_truth: assignment size mismatch");
  if (static_cast<int>(coefficients.size()) != m_star)
    throw std::invalid_argument("embed_truth: one coefficient vector per true neuron required");

  std::vector<std::vector<int>> groups(m_star);
  for (int m = 0; m < width; ++m) {
    const int target = assignment[m];
    if (target < 0 || target >= m_star)
      throw std::invalid_argument("embed_truth: assignment out of range");
    groups[target].push_back(m);
  }
  for (int g = 0; g < m_star; ++g) {
    if (groups[g].empty())
      throw std::invalid_argument("embed_truth: assignment not surjective");
    const Eigen::VectorXd& c = coefficients[g];
    if (c.size() != static_cast<long>(groups[g].size()))
      throw std::invalid_argument("embed_truth: coefficient count mismatch for group");
    if ((c.array() < 0.0).any() || std::abs(c.sum() - 1.0) > 1e-9)
      throw std::invalid_argument("embed_truth: coefficients must lie on the simplex");
  }

  const int p = gt.input_dim();
  NetworkParams params;
  params.first_layer.resize(width, p);
  params.second_layer.resize(width);
  for (int g = 0; g < m_star; ++g) {
    for (std::size_t slot = 0; slot < groups[g].size(); ++slot) {
      const int m = groups[g][slot];
      const double root = std::sqrt(coefficients[g](static_cast<long>(slot)));
      params.first_layer.row(m) = root * gt.params.first_layer.row(g);
      params.second_layer(m) = root * gt.params.second_layer(g);
    }
  }
  return params;
}

}  // namespace splitlab
