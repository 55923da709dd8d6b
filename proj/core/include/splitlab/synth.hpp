#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splitlab/relu_net.hpp"

namespace splitlab {

/// An identifiable minimum-norm teacher network. Invariants enforced by
/// make_ground_truth:
///   - every second-layer weight is nonzero,
///   - no two first-layer rows are collinear beyond collinearity_bound,
///   - per-neuron balance |w1_m| = |w2_m| (minimum-norm representation).
struct GroundTruth {
  NetworkParams params;  // width m_star
  double noise_sigma = 1.0;
  double collinearity_bound = 0.95;
  std::uint64_t seed = 0;
  std::string id;

  int units() const { return params.units(); }
  int input_dim() const { return params.input_dim(); }
};

struct GroundTruthOptions {
  double noise_sigma = 1.0;
  /// Second-layer magnitudes are magnitude_scale * |N(0,1)| + magnitude_floor
  /// with a random sign; the floor keeps output weights away from zero.
  double magnitude_floor = 0.1;
  double magnitude_scale = 1.0;
  /// Total candidate-row draws allowed before giving up, per 10*m_star.
  int retry_factor = 10;
};

/// Draws a teacher satisfying the identifiability invariants. First-layer
/// rows are standard normal, redrawn while any pairwise |cos| exceeds the
/// bound; second-layer weights get random sign and magnitude |N(0,1)|+floor;
/// each block is then rescaled to balance without changing the function.
/// Deterministic given seed. Throws generation_error when the retry budget
/// (retry_factor * m_star draws) is exhausted.
GroundTruth make_ground_truth(int m_star, int input_dim, std::uint64_t seed,
                              double collinearity_bound,
                              const GroundTruthOptions& opts = {});

/// x_i ~ N(0, I_p), y_i = f*(x_i) + N(0, sigma^2). Deterministic given seed.
Dataset sample_dataset(const GroundTruth& gt, int n, std::uint64_t seed);

/// Builds a width-M representation of the teacher function: block m becomes
/// sqrt(c_m) * true block sigma(m). `coefficients[g]` holds the simplex
/// vector of group g in ascending model-neuron order. The result represents
/// the same function and the same per-group squared norm as the teacher.
NetworkParams embed_truth(const GroundTruth& gt, int width,
                          const std::vector<Eigen::VectorXd>& coefficients,
                          const std::vector<int>& assignment);

}  // namespace splitlab
