#pragma once

#include <Eigen/Dense>
#include <vector>

namespace splitlab {

struct SampleTrace;

/// Exact linear assignment (Jonker-Volgenant, O(M^3)) minimizing total cost.
/// Returns the column assigned to each row. When `duals` is supplied it
/// receives optimal row/column potentials with u_i + v_j <= cost_ij and
/// equality on every edge used by any optimal assignment.
std::vector<int> solve_assignment_min(const Eigen::MatrixXd& cost,
                                      std::pair<Eigen::VectorXd, Eigen::VectorXd>* duals = nullptr);

/// Optimal neuron alignment between two first-layer matrices.
struct AlignmentResult {
  std::vector<int> permutation;  // row i of a corresponds to row permutation[i] of b
  Eigen::MatrixXd similarity;    // S_ij = |cos(a_i, b_j)|, 0 for zero-norm rows
  Eigen::VectorXd row_margins;   // best-minus-second-best similarity per row
  double min_margin = 0.0;
  double objective_value = 0.0;  // sum_i S_{i, permutation[i]}
};

/// Maximizes sum_i S_{i,pi(i)} exactly; among optima, returns the
/// lexicographically smallest permutation (deterministic tie-breaking).
AlignmentResult align(const Eigen::MatrixXd& first_layer_a,
                      const Eigen::MatrixXd& first_layer_b);

/// Step-by-step permutation bookkeeping along one chain.
struct ChainPermutationRecord {
  std::vector<std::vector<int>> local_perms;  // pi_t^loc aligning draw t to draw t-1
  std::vector<std::vector<int>> cumulative;   // pi_t, pi_0 = identity
  double switch_rate = 0.0;                   // fraction of t with pi_t != pi_{t-1}
  double mean_min_margin = 0.0;
  int transitions = 0;
};

/// Aligns each draw's first layer to the previous draw's, accumulates the
/// cumulative permutation, and summarizes switch rate and margins.
ChainPermutationRecord track_chain(const SampleTrace& trace);

struct ChainDiagEntry {
  int n = 0;
  int width = 0;
  int chain = 0;
  ChainPermutationRecord record;
};

struct SwitchRateCell {
  int n = 0;
  int width = 0;
  int chains = 0;
  double mean_switch_rate = 0.0;
  double mean_expected_switches = 0.0;  // mean over chains of SR * T
  double mean_min_margin = 0.0;
};

/// Per-(n, M) aggregation of chain permutation records.
std::vector<SwitchRateCell> switch_rate_summary(const std::vector<ChainDiagEntry>& entries);

}  // namespace splitlab
