#include "splitlab/samplers.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#if defined(__SSE2__)
#include <pmmintrin.h>
#include <xmmintrin.h>
#endif

#include "splitlab/errors.hpp"

namespace splitlab {

namespace {

// Dead units decay through the subnormal range and stall the GEMMs by an
// order of magnitude; flush-to-zero in the optimizer/sampler loops avoids
// that. Scoped so library callers keep their own FP environment.
class DenormalGuard {
public:
#if defined(__SSE2__)
  DenormalGuard()
      : ftz_(_MM_GET_FLUSH_ZERO_MODE()), daz_(_MM_GET_DENORMALS_ZERO_MODE()) {
    _MM_SET_FLUSH_ZERO_MODE(_MM_FLUSH_ZERO_ON);
    _MM_SET_DENORMALS_ZERO_MODE(_MM_DENORMALS_ZERO_ON);
  }
  ~DenormalGuard() {
    _MM_SET_FLUSH_ZERO_MODE(ftz_);
    _MM_SET_DENORMALS_ZERO_MODE(daz_);
  }

private:
  unsigned ftz_;
  unsigned daz_;
#endif
};

}  // namespace

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::Sgld: return "sgld";
    case SamplerKind::Hmc: return "hmc";
    case SamplerKind::Manifold: return "manifold";
  }
  return "unknown";
}

SamplerKind sampler_kind_from_string(const std::string& name) {
  if (name == "sgld") return SamplerKind::Sgld;
  if (name == "hmc") return SamplerKind::Hmc;
  if (name == "manifold") return SamplerKind::Manifold;
  throw std::invalid_argument("unknown sampler kind: " + name);
}

void SamplerConfig::validate() const {
  if (warmup_steps < 0) throw std::invalid_argument("SamplerConfig: warmup_steps < 0");
  if (kept_draws < 1) throw std::invalid_argument("SamplerConfig: kept_draws < 1");
  if (thinning < 1) throw std::invalid_argument("SamplerConfig: thinning < 1");
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw std::invalid_argument("SamplerConfig: target_accept must lie in (0,1)");
  if (!(step_size > 0.0)) throw std::invalid_argument("SamplerConfig: step_size must be > 0");
  if (leapfrog_steps < 1) throw std::invalid_argument("SamplerConfig: leapfrog_steps < 1");
  if (!(sgld_step >= 0.0)) throw std::invalid_argument("SamplerConfig: sgld_step must be >= 0");
}

PosteriorTarget::PosteriorTarget(const Dataset& data, ObjectiveConfig cfg, int width)
    : data_(data), cfg_(cfg), width_(width), input_dim_(data.input_dim()) {
  data.validate();
  cfg.validate();
}

double PosteriorTarget::value_and_grad(const Eigen::VectorXd& w, Eigen::VectorXd& grad) {
  const NetworkParams params = NetworkParams::from_flat(w, width_, input_dim_);
  return objective_gradient(params, data_, cfg_, grad);
}

DiagonalGaussianTarget::DiagonalGaussianTarget(Eigen::VectorXd mean, Eigen::VectorXd variances)
    : mean_(std::move(mean)), variances_(std::move(variances)) {
  if (mean_.size() != variances_.size())
    throw std::invalid_argument("DiagonalGaussianTarget: size mismatch");
  if ((variances_.array() <= 0.0).any())
    throw std::invalid_argument("DiagonalGaussianTarget: variances must be > 0");
}

double DiagonalGaussianTarget::value_and_grad(const Eigen::VectorXd& w, Eigen::VectorXd& grad) {
  grad = (w - mean_).cwiseQuotient(variances_);
  return 0.5 * (w - mean_).dot(grad);
}

NetworkParams adam_map(const NetworkParams& init, const Dataset& data,
                       const ObjectiveConfig& cfg, const AdamOptions& opts) {
  DenormalGuard fp_guard;
  const int d = init.dim();
  Eigen::VectorXd w = init.flat();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd grad(d);

  Eigen::VectorXd best = w;
  double best_value = objective(init, data, cfg);
  const double floor_rate = opts.learning_rate * opts.final_rate_fraction;

  for (int step = 1; step <= opts.steps; ++step) {
    const NetworkParams params =
        NetworkParams::from_flat(w, init.units(), init.input_dim());
    const double value = objective_gradient(params, data, cfg, grad);
    if (!std::isfinite(value)) throw divergence_error("adam_map: non-finite objective", step);
    if (value < best_value) {
      best_value = value;
      best = w;
    }
    const double progress = static_cast<double>(step - 1) / opts.steps;
    const double rate =
        floor_rate + (opts.learning_rate - floor_rate) * 0.5 * (1.0 + std::cos(M_PI * progress));
    m = opts.beta1 * m + (1.0 - opts.beta1) * grad;
    v = opts.beta2 * v + (1.0 - opts.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(opts.beta1, step);
    const double c2 = 1.0 - std::pow(opts.beta2, step);
    w -= (rate / c1) * m.cwiseQuotient(((v / c2).cwiseSqrt().array() + opts.epsilon).matrix());
    if (!w.allFinite()) throw divergence_error("adam_map: non-finite iterate", step);
  }
  {
    const NetworkParams params = NetworkParams::from_flat(w, init.units(), init.input_dim());
    const double value = objective(params, data, cfg);
    if (std::isfinite(value) && value < best_value) best = w;
  }
  return NetworkParams::from_flat(best, init.units(), init.input_dim());
}

SampleTrace run_sgld(Target& target, const Eigen::VectorXd& init, const SamplerConfig& cfg) {
  cfg.validate();
  DenormalGuard fp_guard;
  const int d = target.dim();
  if (init.size() != d) throw std::invalid_argument("run_sgld: init dimension mismatch");
  Rng rng(cfg.seed);

  SampleTrace trace;
  trace.kind = SamplerKind::Sgld;
  trace.config = cfg;
  trace.init = init;
  trace.draws.resize(cfg.kept_draws, d);

  Eigen::VectorXd w = init;
  Eigen::VectorXd grad(d);
  const double noise_std = std::sqrt(cfg.sgld_step);
  const long total = static_cast<long>(cfg.warmup_steps) +
                     static_cast<long>(cfg.kept_draws) * cfg.thinning;
  int kept = 0;
  for (long iter = 0; iter < total; ++iter) {
    target.value_and_grad(w, grad);
    for (int i = 0; i < d; ++i)
      w(i) += -0.5 * cfg.sgld_step * grad(i) + noise_std * rng.normal();
    if (!w.allFinite()) throw divergence_error("run_sgld: non-finite state", iter);
    const long post = iter - cfg.warmup_steps + 1;
    if (post > 0 && post % cfg.thinning == 0 && kept < cfg.kept_draws)
      trace.draws.row(kept++) = w.transpose();
  }
  return trace;
}

namespace {

struct DualAveraging {
  double mu = 0.0;
  double log_eps = 0.0;
  double log_eps_bar = 0.0;
  double h_bar = 0.0;
  long t = 0;
  // Heavier damping than the classic (0.05, 10): binary-ish acceptance
  // sequences under fixed trajectory lengths make the light controller
  // oscillate across the acceptance cliff.
  static constexpr double gamma = 0.3;
  static constexpr double t0 = 20.0;
  static constexpr double kappa = 0.75;

  void restart(double eps) {
    // Mild upward attractor; the classic 10x pull overshoots the acceptance
    // target noticeably on short adaptation segments.
    mu = std::log(2.0 * eps);
    log_eps = std::log(eps);
    log_eps_bar = std::log(eps);
    h_bar = 0.0;
    t = 0;
  }
  void update(double accept_prob, double target) {
    ++t;
    h_bar += (target - accept_prob - h_bar) / (t + t0);
    log_eps = mu - std::sqrt(static_cast<double>(t)) / gamma * h_bar;
    const double eta = std::pow(static_cast<double>(t), -kappa);
    log_eps_bar = eta * log_eps + (1.0 - eta) * log_eps_bar;
  }
  double current() const { return std::exp(log_eps); }
  double averaged() const { return std::exp(log_eps_bar); }
};

// Expanding metric-estimation windows between a step-size-only init buffer
// and a terminal buffer long enough for dual averaging to settle.
struct WarmupSchedule {
  std::vector<long> window_ends;
  long init_buffer = 0;

  explicit WarmupSchedule(long warmup) {
    if (warmup < 150) return;  // too short for metric windows; adapt step size only
    init_buffer = 75;
    const long term_buffer = std::max<long>(50, warmup / 5);
    long window = 50;
    long start = init_buffer;
    while (start + window < warmup - term_buffer) {
      const long next = window * 2;
      if (start + window + next >= warmup - term_buffer) {
        window_ends.push_back(warmup - term_buffer);
        start = warmup - term_buffer;
      } else {
        window_ends.push_back(start + window);
        start += window;
        window = next;
      }
    }
    if (window_ends.empty()) window_ends.push_back(warmup - term_buffer);
  }
};

struct RunningVariance {
  Eigen::VectorXd mean;
  Eigen::VectorXd m2;
  long count = 0;

  void reset(int d) {
    mean = Eigen::VectorXd::Zero(d);
    m2 = Eigen::VectorXd::Zero(d);
    count = 0;
  }
  void add(const Eigen::VectorXd& x) {
    ++count;
    const Eigen::VectorXd delta = x - mean;
    mean += delta / count;
    m2 += delta.cwiseProduct(x - mean);
  }
  // Regularized toward a small diagonal, as commonly done for metric warmup.
  Eigen::VectorXd regularized() const {
    Eigen::VectorXd var = m2 / std::max<long>(count - 1, 1);
    const double shrink = static_cast<double>(count) / (count + 5.0);
    return shrink * var.array() + (1.0 - shrink) * 1e-3;
  }
};

double kinetic_energy(const Eigen::VectorXd& momentum, const Eigen::VectorXd& inv_mass) {
  return 0.5 * momentum.cwiseProduct(momentum).dot(inv_mass);
}

}  // namespace

SampleTrace run_hmc(Target& target, const Eigen::VectorXd& init, const SamplerConfig& cfg) {
  cfg.validate();
  DenormalGuard fp_guard;
  const int d = target.dim();
  if (init.size() != d) throw std::invalid_argument("run_hmc: init dimension mismatch");
  Rng rng(cfg.seed);

  SampleTrace trace;
  trace.kind = SamplerKind::Hmc;
  trace.config = cfg;
  trace.init = init;
  trace.draws.resize(cfg.kept_draws, d);

  Eigen::VectorXd w = init;
  Eigen::VectorXd grad(d);
  double value = target.value_and_grad(w, grad);
  if (!std::isfinite(value)) throw divergence_error("run_hmc: non-finite init", 0);

  Eigen::VectorXd inv_mass = Eigen::VectorXd::Ones(d);
  Eigen::VectorXd momentum_std = Eigen::VectorXd::Ones(d);  // sqrt of mass diagonal

  // Crude step-size search: double/halve until the one-step acceptance
  // probability crosses 1/2. Re-run after every metric update so a fresh
  // metric cannot strand the chain at a mismatched step size. Skipped
  // entirely without warmup so callers keep exact control of the step size.
  auto find_step_size = [&](double eps0) -> double {
    double eps = eps0;
    Eigen::VectorXd p(d);
    for (int i = 0; i < d; ++i) p(i) = momentum_std(i) * rng.normal();
    Eigen::VectorXd w1(d), g1(d), p1(d);
    auto one_step_delta = [&](double step) -> double {
      g1 = grad;
      p1 = p - 0.5 * step * grad;
      w1 = w + step * p1.cwiseProduct(inv_mass);
      const double v1 = target.value_and_grad(w1, g1);
      p1 -= 0.5 * step * g1;
      if (!std::isfinite(v1)) return HUGE_VAL;
      return (v1 + kinetic_energy(p1, inv_mass)) - (value + kinetic_energy(p, inv_mass));
    };
    double delta = one_step_delta(eps);
    const double log2 = std::log(2.0);
    const bool grow = std::isfinite(delta) && delta < log2;
    for (int attempt = 0; attempt < 60; ++attempt) {
      if (grow ? !(delta < log2) : !(delta > log2)) break;
      eps *= grow ? 2.0 : 0.5;
      if (eps < 1e-12 || eps > 1e6) break;
      delta = one_step_delta(eps);
    }
    return eps;
  };

  double eps = cfg.step_size;
  if (cfg.warmup_steps > 0) eps = find_step_size(eps);

  DualAveraging averaging;
  averaging.restart(eps);
  WarmupSchedule schedule(cfg.warmup_steps);
  RunningVariance metric_estimate;
  metric_estimate.reset(d);
  std::size_t window_index = 0;

  // The frozen step comes from a plain average of log(eps) over the tail of
  // warmup; the kappa-weighted dual-averaging iterate is too transient on
  // short terminal segments.
  const long final_segment_start =
      schedule.window_ends.empty() ? cfg.warmup_steps / 2 : schedule.window_ends.back();
  const long freeze_tail_start = (final_segment_start + cfg.warmup_steps + 1) / 2;
  double freeze_log_sum = 0.0;
  long freeze_count = 0;

  Eigen::VectorXd p(d), w_prop(d), g_prop(d);
  double accept_prob_sum = 0.0;
  const long total = static_cast<long>(cfg.warmup_steps) +
                     static_cast<long>(cfg.kept_draws) * cfg.thinning;
  int kept = 0;
  for (long iter = 0; iter < total; ++iter) {
    const bool warming = iter < cfg.warmup_steps;
    // 20% uniform step jitter: fixed-length trajectories on near-quadratic
    // targets are resonant, which decouples acceptance from the base step.
    const double step = (warming ? averaging.current() : eps) * (0.9 + 0.2 * rng.uniform());

    for (int i = 0; i < d; ++i) p(i) = momentum_std(i) * rng.normal();
    const double h0 = value + kinetic_energy(p, inv_mass);

    w_prop = w;
    g_prop = grad;
    double v_prop = value;
    Eigen::VectorXd p_prop = p - 0.5 * step * g_prop;
    bool finite = true;
    for (int leap = 0; leap < cfg.leapfrog_steps; ++leap) {
      w_prop += step * p_prop.cwiseProduct(inv_mass);
      v_prop = target.value_and_grad(w_prop, g_prop);
      if (!std::isfinite(v_prop) || !g_prop.allFinite()) {
        finite = false;
        break;
      }
      p_prop -= (leap + 1 < cfg.leapfrog_steps ? step : 0.5 * step) * g_prop;
    }

    double accept_prob = 0.0;
    bool divergent = true;
    if (finite) {
      const double h1 = v_prop + kinetic_energy(p_prop, inv_mass);
      const double delta = h1 - h0;
      divergent = !(delta < 1000.0);
      if (!divergent) accept_prob = std::min(1.0, std::exp(-delta));
    }
    const bool accepted = !divergent && rng.uniform() <= accept_prob;
    if (accepted) {
      w.swap(w_prop);
      grad.swap(g_prop);
      value = v_prop;
    }

    if (warming) {
      averaging.update(accept_prob, cfg.target_accept);
      if (iter >= freeze_tail_start) {
        freeze_log_sum += averaging.log_eps;
        ++freeze_count;
      }
      if (window_index < schedule.window_ends.size() && iter >= schedule.init_buffer) {
        metric_estimate.add(w);
        if (iter + 1 == schedule.window_ends[window_index]) {
          inv_mass = metric_estimate.regularized();
          momentum_std = inv_mass.cwiseInverse().cwiseSqrt();
          metric_estimate.reset(d);
          ++window_index;
          averaging.restart(find_step_size(averaging.averaged()));
        }
      }
      if (iter + 1 == cfg.warmup_steps)
        eps = freeze_count > 0 ? std::exp(freeze_log_sum / freeze_count) : averaging.averaged();
    } else {
      ++trace.acceptance.attempted;
      if (accepted) ++trace.acceptance.accepted;
      if (divergent) ++trace.acceptance.divergences;
      accept_prob_sum += accept_prob;
      const long post = iter - cfg.warmup_steps + 1;
      if (post % cfg.thinning == 0 && kept < cfg.kept_draws)
        trace.draws.row(kept++) = w.transpose();
    }
  }
  if (trace.acceptance.attempted > 0) {
    trace.acceptance.mean_accept_prob = accept_prob_sum / trace.acceptance.attempted;
    trace.acceptance.high_divergence_warning =
        trace.acceptance.divergences * 10 > trace.acceptance.attempted;
  }
  // Stash the post-warmup step size so reruns can be inspected.
  trace.config.step_size = eps;
  return trace;
}

SampleTrace sgld_chain(const NetworkParams& init, const Dataset& data,
                       const ObjectiveConfig& cfg, const SamplerConfig& sampler_cfg) {
  PosteriorTarget target(data, cfg, init.units());
  SampleTrace trace = run_sgld(target, init.flat(), sampler_cfg);
  trace.objective = cfg;
  trace.width = init.units();
  trace.input_dim = init.input_dim();
  trace.n = data.size();
  trace.dataset_seed = data.seed;
  trace.gt_id = data.gt_id;
  return trace;
}

SampleTrace hmc_chain(const NetworkParams& init, const Dataset& data,
                      const ObjectiveConfig& cfg, const SamplerConfig& sampler_cfg) {
  PosteriorTarget target(data, cfg, init.units());
  SampleTrace trace = run_hmc(target, init.flat(), sampler_cfg);
  trace.objective = cfg;
  trace.width = init.units();
  trace.input_dim = init.input_dim();
  trace.n = data.size();
  trace.dataset_seed = data.seed;
  trace.gt_id = data.gt_id;
  return trace;
}

double leapfrog_energy_error(Target& target, const Eigen::VectorXd& position,
                             const Eigen::VectorXd& momentum, double step_size, int steps) {
  Eigen::VectorXd w = position;
  Eigen::VectorXd p = momentum;
  Eigen::VectorXd grad(w.size());
  const double h0 = target.value_and_grad(w, grad) + 0.5 * p.squaredNorm();
  p -= 0.5 * step_size * grad;
  double value = 0.0;
  for (int leap = 0; leap < steps; ++leap) {
    w += step_size * p;
    value = target.value_and_grad(w, grad);
    p -= (leap + 1 < steps ? step_size : 0.5 * step_size) * grad;
  }
  return std::abs(value + 0.5 * p.squaredNorm() - h0);
}

std::vector<SampleTrace> run_ensemble(const GroundTruth& gt, const Dataset& data, int width,
                                      int chains, const ObjectiveConfig& cfg,
                                      const SamplerConfig& sampler_cfg,
                                      const AdamOptions& adam_opts, SamplerKind kind,
                                      int max_parallel) {
  if (chains < 1) throw std::invalid_argument("run_ensemble: chains must be >= 1");
  if (kind == SamplerKind::Manifold)
    throw std::invalid_argument("run_ensemble: manifold traces come from the theory oracle");
  const int p = gt.input_dim();

  std::vector<SampleTrace> traces(chains);
  std::vector<std::string> failures(chains);

  auto run_one = [&](int chain) {
    try {
      Rng rng(mix_seed(sampler_cfg.seed, static_cast<std::uint64_t>(chain)));
      NetworkParams start;
      start.first_layer.resize(width, p);
      start.second_layer.resize(width);
      for (int m = 0; m < width; ++m)
        for (int j = 0; j < p; ++j) start.first_layer(m, j) = kChainInitStd * rng.normal();
      for (int m = 0; m < width; ++m) start.second_layer(m) = kChainInitStd * rng.normal();

      const NetworkParams map = adam_map(start, data, cfg, adam_opts);

      SamplerConfig chain_cfg = sampler_cfg;
      chain_cfg.seed = mix_seed(sampler_cfg.seed, 0x10000 + static_cast<std::uint64_t>(chain));
      SampleTrace trace = kind == SamplerKind::Sgld ? sgld_chain(map, data, cfg, chain_cfg)
                                                    : hmc_chain(map, data, cfg, chain_cfg);
      trace.chain_id = chain;
      trace.gt_id = gt.id;
      traces[chain] = std::move(trace);
    } catch (const std::exception& err) {
      failures[chain] = err.what();
    }
  };

  int workers = max_parallel > 0 ? max_parallel
                                 : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, chains));
  if (workers == 1) {
    for (int chain = 0; chain < chains; ++chain) run_one(chain);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (;;) {
          const int chain = next.fetch_add(1);
          if (chain >= chains) return;
          run_one(chain);
        }
      });
    }
    for (auto& worker : pool) worker.join();
  }

  for (int chain = 0; chain < chains; ++chain)
    if (!failures[chain].empty())
      throw std::runtime_error("run_ensemble: chain " + std::to_string(chain) +
                               " failed: " + failures[chain]);
  return traces;
}

}  // namespace splitlab
