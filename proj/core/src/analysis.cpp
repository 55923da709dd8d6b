#include "splitlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "splitlab/errors.hpp"
#include "splitlab/split_diag.hpp"
#include "splitlab/symmetry_diag.hpp"
#include "splitlab/theory_oracle.hpp"

namespace splitlab {

namespace {

std::vector<int> inverse_permutation(const std::vector<int>& perm) {
  std::vector<int> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = static_cast<int>(i);
  return inv;
}

double logaddexp(double a, double b) {
  if (a == -HUGE_VAL) return b;
  if (b == -HUGE_VAL) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-(std::abs(a - b))));
}

double rmse(const Eigen::VectorXd& prediction, const Eigen::VectorXd& reference) {
  return std::sqrt((prediction - reference).squaredNorm() / prediction.size());
}

}  // namespace

UncertaintyReport uncertainty_decomposition(const std::vector<SampleTrace>& traces,
                                            const Eigen::MatrixXd& test_inputs,
                                            AlignmentReference reference,
                                            const GroundTruth* gt) {
  if (traces.empty()) throw std::invalid_argument("uncertainty_decomposition: no traces");
  if (test_inputs.rows() < 1)
    throw std::invalid_argument("uncertainty_decomposition: empty test set");
  if (reference == AlignmentReference::GroundTruth && gt == nullptr)
    throw std::invalid_argument("uncertainty_decomposition: gt alignment requires a teacher");

  const int width = traces.front().width;
  const int p = traces.front().input_dim;
  const int d = traces.front().dim();
  const long n_test = test_inputs.rows();

  long total_draws = 0;
  for (const SampleTrace& trace : traces) {
    if (trace.width != width || trace.input_dim != p)
      throw std::invalid_argument("uncertainty_decomposition: mixed trace dimensions");
    total_draws += trace.draws.rows();
  }

  // Pooled predictive variance per test point (Welford over draws), and the
  // pooled weight mean for the covariance trace (two-pass for exactness).
  Eigen::VectorXd pred_mean = Eigen::VectorXd::Zero(n_test);
  Eigen::VectorXd pred_m2 = Eigen::VectorXd::Zero(n_test);
  Eigen::VectorXd weight_mean = Eigen::VectorXd::Zero(d);
  long seen = 0;
  for (const SampleTrace& trace : traces) {
    for (long t = 0; t < trace.draws.rows(); ++t) {
      const NetworkParams params = trace.draw_params(static_cast<int>(t));
      const Eigen::VectorXd preds = forward_batch(params, test_inputs);
      ++seen;
      const Eigen::VectorXd delta = preds - pred_mean;
      pred_mean += delta / seen;
      pred_m2 += delta.cwiseProduct(preds - pred_mean);
      weight_mean += trace.draws.row(t).transpose();
    }
  }
  weight_mean /= total_draws;

  double weight_sq_dev = 0.0;
  for (const SampleTrace& trace : traces)
    for (long t = 0; t < trace.draws.rows(); ++t)
      weight_sq_dev += (trace.draws.row(t).transpose() - weight_mean).squaredNorm();

  // Within-mode: align each draw to the chain's reference ordering, then
  // average the per-chain covariance traces.
  double within_sum = 0.0;
  for (const SampleTrace& trace : traces) {
    const long rows = trace.draws.rows();
    Eigen::MatrixXd aligned(rows, d);
    Eigen::MatrixXd ref_layer;
    if (reference == AlignmentReference::GroundTruth) {
      ref_layer = gt->params.first_layer;
    } else {
      ref_layer = trace.draw_params(0).first_layer;
    }
    for (long t = 0; t < rows; ++t) {
      const NetworkParams params = trace.draw_params(static_cast<int>(t));
      const AlignmentResult alignment = align(params.first_layer, ref_layer);
      aligned.row(t) = params.permuted(inverse_permutation(alignment.permutation))
                           .flat()
                           .transpose();
    }
    const Eigen::RowVectorXd mean = aligned.colwise().mean();
    double sq = 0.0;
    for (long t = 0; t < rows; ++t) sq += (aligned.row(t) - mean).squaredNorm();
    within_sum += sq / rows;
  }

  UncertaintyReport report;
  report.predictive_var = pred_m2.sum() / (static_cast<double>(total_draws) * n_test);
  report.weight_cov_trace = weight_sq_dev / total_draws / d;
  report.within_mode_trace = within_sum / static_cast<double>(traces.size()) / d;
  report.n = traces.front().n;
  report.width = width;
  report.draws = total_draws;
  return report;
}

PredictiveMetrics predictive_metrics(const std::vector<SampleTrace>& traces,
                                     const Dataset& test, const ObjectiveConfig& cfg,
                                     const GroundTruth* gt) {
  if (traces.empty()) throw std::invalid_argument("predictive_metrics: no traces");
  test.validate();
  cfg.validate();
  const int width = traces.front().width;
  const int p = traces.front().input_dim;
  const long n_test = test.size();
  const double sigma2 = cfg.noise_sigma * cfg.noise_sigma;
  const double log_norm = 0.5 * std::log(2.0 * M_PI * sigma2);

  Eigen::VectorXd map_mean = Eigen::VectorXd::Zero(n_test);
  Eigen::VectorXd map_lse = Eigen::VectorXd::Constant(n_test, -HUGE_VAL);
  for (const SampleTrace& trace : traces) {
    const NetworkParams init = NetworkParams::from_flat(trace.init, width, p);
    const Eigen::VectorXd preds = forward_batch(init, test.inputs);
    map_mean += preds;
    for (long i = 0; i < n_test; ++i) {
      const double res = preds(i) - test.targets(i);
      map_lse(i) = logaddexp(map_lse(i), -res * res / (2.0 * sigma2) - log_norm);
    }
  }
  map_mean /= static_cast<double>(traces.size());

  Eigen::VectorXd post_mean = Eigen::VectorXd::Zero(n_test);
  Eigen::VectorXd post_lse = Eigen::VectorXd::Constant(n_test, -HUGE_VAL);
  long total_draws = 0;
  for (const SampleTrace& trace : traces) {
    for (long t = 0; t < trace.draws.rows(); ++t) {
      const Eigen::VectorXd preds =
          forward_batch(trace.draw_params(static_cast<int>(t)), test.inputs);
      post_mean += preds;
      for (long i = 0; i < n_test; ++i) {
        const double res = preds(i) - test.targets(i);
        post_lse(i) = logaddexp(post_lse(i), -res * res / (2.0 * sigma2) - log_norm);
      }
      ++total_draws;
    }
  }
  post_mean /= static_cast<double>(total_draws);

  PredictiveMetrics metrics;
  metrics.rmse_map = rmse(map_mean, test.targets);
  metrics.rmse_posterior_mean = rmse(post_mean, test.targets);
  metrics.lppd = (post_lse.array() - std::log(static_cast<double>(total_draws))).sum();
  metrics.lppd_map =
      (map_lse.array() - std::log(static_cast<double>(traces.size()))).sum();
  if (gt != nullptr) {
    const Eigen::VectorXd truth = forward_batch(gt->params, test.inputs);
    metrics.rmse_map_true = rmse(map_mean, truth);
    metrics.rmse_posterior_mean_true = rmse(post_mean, truth);
  }
  return metrics;
}

MomentReport moment_validation(const std::vector<SampleTrace>& traces, const GroundTruth& gt,
                               double clamp_threshold) {
  if (traces.empty()) throw std::invalid_argument("moment_validation: no traces");

  struct Accumulator {
    long count = 0;
    double sum_s = 0.0, sum_s2 = 0.0, sum_s3 = 0.0, sum_s4 = 0.0;
    std::vector<double> c_values;
  };
  std::map<int, Accumulator> cells;

  MomentReport report;
  report.alpha = 0.5 * (gt.input_dim() + 1);

  for (const SampleTrace& trace : traces) {
    for (long t = 0; t < trace.draws.rows(); ++t) {
      const NetworkParams params = trace.draw_params(static_cast<int>(t));
      const AssignmentMap map = assign_to_truth(params, gt);
      if (!map.surjective) {
        ++report.excluded_nonsurjective;
        continue;
      }
      SplitCoefficients coeffs;
      try {
        coeffs = splitting_coefficients(params, gt, map);
      } catch (const degenerate_group_error&) {
        ++report.excluded_degenerate;
        continue;
      }
      if (coeffs.clamped_mass_total > clamp_threshold) {
        ++report.excluded_clamped;
        continue;
      }
      ++report.draws_used;
      for (int g = 0; g < map.m_star; ++g) {
        const int k = map.group_sizes[g];
        const Eigen::VectorXd true_block = gt.params.block(g);
        Accumulator& acc = cells[k];
        for (std::size_t slot = 0; slot < map.groups[g].size(); ++slot) {
          const int m = map.groups[g][slot];
          const double s = scalar_projection(params.block(m), true_block);
          const double s2 = s * s;
          ++acc.count;
          acc.sum_s += s;
          acc.sum_s2 += s2;
          acc.sum_s3 += s2 * s;
          acc.sum_s4 += s2 * s2;
          if (k >= 2) acc.c_values.push_back(coeffs.per_group[g](static_cast<long>(slot)));
        }
      }
    }
  }
  if (report.draws_used == 0)
    throw empty_report_error("moment_validation: no valid draws after filtering");

  for (auto& [k, acc] : cells) {
    MomentCell cell;
    cell.k = k;
    cell.count = acc.count;
    const double n = static_cast<double>(acc.count);
    cell.mean_s = acc.sum_s / n;
    cell.mean_s2 = acc.sum_s2 / n;
    cell.std_s = std::sqrt(std::max(0.0, acc.sum_s2 / n - cell.mean_s * cell.mean_s));
    cell.std_s2 = std::sqrt(std::max(0.0, acc.sum_s4 / n - cell.mean_s2 * cell.mean_s2));
    cell.theory_mean = mu_k_alpha(k, report.alpha);
    cell.theory_second = 1.0 / k;
    if (k >= 2 && !acc.c_values.empty()) {
      const BetaMarginal marginal = beta_marginal(DirichletLaw{k, report.alpha});
      cell.ks_c = ks_distance(std::move(acc.c_values),
                              [&marginal](double x) { return marginal.cdf(x); });
    }
    report.per_k[k] = cell;
  }
  return report;
}

double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_distance: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double sup = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double theoretical = cdf(samples[i]);
    sup = std::max(sup, std::abs(theoretical - static_cast<double>(i) / n));
    sup = std::max(sup, std::abs(static_cast<double>(i + 1) / n - theoretical));
  }
  return std::min(1.0, sup);
}

}  // namespace splitlab
