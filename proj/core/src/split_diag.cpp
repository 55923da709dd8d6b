#include "splitlab/split_diag.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "splitlab/errors.hpp"

namespace splitlab {

AssignmentMap AssignmentMap::from_sigma(std::vector<int> sigma, int m_star) {
  AssignmentMap map;
  map.m_star = m_star;
  map.groups.assign(m_star, {});
  map.group_sizes.assign(m_star, 0);
  for (std::size_t m = 0; m < sigma.size(); ++m) {
    const int g = sigma[m];
    if (g < 0 || g >= m_star)
      throw std::invalid_argument("AssignmentMap: sigma value out of range");
    map.groups[g].push_back(static_cast<int>(m));
    ++map.group_sizes[g];
  }
  map.sigma = std::move(sigma);
  map.surjective =
      std::all_of(map.group_sizes.begin(), map.group_sizes.end(), [](int k) { return k > 0; });
  return map;
}

double SplitCoefficients::coefficient(const AssignmentMap& map, int m) const {
  const int g = map.sigma[m];
  const auto& members = map.groups[g];
  const auto slot = std::lower_bound(members.begin(), members.end(), m) - members.begin();
  return per_group[g](slot);
}

AssignmentMap assign_to_truth(const NetworkParams& params, const GroundTruth& gt) {
  if (params.input_dim() != gt.input_dim())
    throw std::invalid_argument("assign_to_truth: input dimension mismatch");
  const int M = params.units();
  const int m_star = gt.units();

  Eigen::VectorXd true_norms = gt.params.first_layer.rowwise().norm();
  std::vector<int> sigma(M, -1);
  std::vector<int> sizes(m_star, 0);
  std::vector<int> dead;
  for (int m = 0; m < M; ++m) {
    const double norm = params.first_layer.row(m).norm();
    if (norm == 0.0) {
      dead.push_back(m);
      continue;
    }
    int best = 0;
    double best_cos = -1.0;
    for (int g = 0; g < m_star; ++g) {
      const double cosine =
          std::abs(params.first_layer.row(m).dot(gt.params.first_layer.row(g))) /
          (norm * true_norms(g));
      if (cosine > best_cos) {
        best_cos = cosine;
        best = g;
      }
    }
    sigma[m] = best;
    ++sizes[best];
  }
  // Dead neurons join the currently smallest group, lowest index on ties.
  for (int m : dead) {
    int best = 0;
    for (int g = 1; g < m_star; ++g)
      if (sizes[g] < sizes[best]) best = g;
    sigma[m] = best;
    ++sizes[best];
  }
  return AssignmentMap::from_sigma(std::move(sigma), m_star);
}

SplitCoefficients splitting_coefficients(const NetworkParams& params, const GroundTruth& gt,
                                         const AssignmentMap& map) {
  if (map.width() != params.units())
    throw std::invalid_argument("splitting_coefficients: assignment width mismatch");
  SplitCoefficients out;
  out.per_group.resize(map.m_star);
  out.clamped_mass.assign(map.m_star, 0.0);

  for (int g = 0; g < map.m_star; ++g) {
    const auto& members = map.groups[g];
    if (members.empty()) {
      out.per_group[g] = Eigen::VectorXd();
      continue;
    }
    const Eigen::VectorXd true_block = gt.params.block(g);
    Eigen::VectorXd raw(members.size());
    for (std::size_t slot = 0; slot < members.size(); ++slot)
      raw(static_cast<long>(slot)) = params.block(members[slot]).dot(true_block);
    const double total = raw.sum();
    if (!(total > 0.0))
      throw degenerate_group_error("splitting_coefficients: nonpositive group projection");
    // Blocks on the manifold are sqrt(c_m) multiples of the true block, so
    // the linear projections recover sqrt(c) shares; squaring them before
    // normalizing inverts the embedding. Negative projections (off-manifold
    // noise) are clamped first and tracked as a linear-mass fraction.
    double negative = 0.0;
    for (long i = 0; i < raw.size(); ++i) {
      if (raw(i) < 0.0) {
        negative += -raw(i) / total;
        raw(i) = 0.0;
      }
    }
    Eigen::VectorXd c = raw.cwiseProduct(raw);
    c /= c.sum();
    out.per_group[g] = std::move(c);
    out.clamped_mass[g] = negative;
    out.clamped_mass_total += negative;
  }
  return out;
}

double scalar_projection(const Eigen::VectorXd& block, const Eigen::VectorXd& true_block) {
  if (block.size() != true_block.size())
    throw std::invalid_argument("scalar_projection: block dimension mismatch");
  const double denom = true_block.squaredNorm();
  if (denom == 0.0) throw std::invalid_argument("scalar_projection: zero true block");
  return block.dot(true_block) / denom;
}

}  // namespace splitlab
