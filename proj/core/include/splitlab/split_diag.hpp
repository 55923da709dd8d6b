#pragma once

#include <Eigen/Dense>
#include <vector>

#include "splitlab/synth.hpp"

namespace splitlab {

/// Assignment of model neurons to true neurons; preimages are the groups.
struct AssignmentMap {
  std::vector<int> sigma;                // size M, values in [0, m_star)
  int m_star = 0;
  std::vector<std::vector<int>> groups;  // groups[g] ascending model indices
  std::vector<int> group_sizes;          // k_g = |groups[g]|
  bool surjective = false;

  int width() const { return static_cast<int>(sigma.size()); }
  static AssignmentMap from_sigma(std::vector<int> sigma, int m_star);
};

/// Per-group splitting coefficients recovered from a parameter vector.
struct SplitCoefficients {
  std::vector<Eigen::VectorXd> per_group;  // simplex vector per group
  std::vector<double> clamped_mass;        // negative mass removed, per group
  double clamped_mass_total = 0.0;

  /// Coefficient of model neuron m given its group slot.
  double coefficient(const AssignmentMap& map, int m) const;
};

/// sigma(m) = argmax_g |cos(w1_m, w1*_g)|; zero-norm rows are attached to the
/// currently smallest group (lowest index on ties) after all others.
AssignmentMap assign_to_truth(const NetworkParams& params, const GroundTruth& gt);

/// Group-normalized projections c_m = <omega_m, omega*_g> / sum over group.
/// Negative projections are clamped to zero and the group renormalized; the
/// removed mass is recorded so validators can filter affected draws.
/// Throws degenerate_group_error when a group's total projection is <= 0.
SplitCoefficients splitting_coefficients(const NetworkParams& params, const GroundTruth& gt,
                                         const AssignmentMap& map);

/// s = <block, true_block> / |true_block|^2.
double scalar_projection(const Eigen::VectorXd& block, const Eigen::VectorXd& true_block);

}  // namespace splitlab
