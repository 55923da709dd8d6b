#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "splitlab/analysis.hpp"
#include "splitlab/samplers.hpp"
#include "splitlab/symmetry_diag.hpp"
#include "splitlab/synth.hpp"

namespace splitlab {

/// Experiment grid and shared hyperparameters. Defaults reproduce the
/// standard setup: teacher width 5 at input dimension 5, sample sizes
/// 2^6..2^14, model widths {M*, 2M*, 4M*, 8M*}, 10 HMC chains per cell.
struct ExperimentConfig {
  int m_star = 5;
  int input_dim = 5;
  double noise_sigma = 1.0;
  double lambda = 2.0;
  double collinearity_bound = 0.95;
  std::vector<int> n_grid = {64, 128, 256, 512, 1024, 2048, 4096, 8192, 16384};
  std::vector<int> m_grid = {5, 10, 20, 40};
  int chains = 10;
  std::string sampler = "hmc";
  std::uint64_t master_seed = 1;
  std::string out_dir = "runs/default";
  int test_points = 2048;
  AdamOptions adam;
  SamplerConfig sampler_cfg;

  void validate() const;

  // Derived per-purpose seeds, all mixed from master_seed.
  std::uint64_t gt_seed() const;
  std::uint64_t dataset_seed(int n) const;
  std::uint64_t testset_seed() const;
  std::uint64_t cell_seed(int n, int width) const;

  std::filesystem::path gt_path() const;
  std::filesystem::path dataset_path(int n) const;
  std::filesystem::path testset_path() const;
  std::filesystem::path traces_dir() const;
  std::filesystem::path trace_path(int n, int width, int chain) const;
  std::filesystem::path reports_dir() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& config, const std::filesystem::path& path);

void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& path);
GroundTruth load_ground_truth(const std::filesystem::path& path);
void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// JSON-Lines trace files: one header record, then one record per draw.
void write_trace(const SampleTrace& trace, const std::filesystem::path& path);
SampleTrace read_trace(const std::filesystem::path& path);

struct CellFilter {
  std::vector<int> n_values;  // empty = all
  std::vector<int> m_values;  // empty = all

  bool matches(int n, int width) const;
  /// Parses "n=1024+4096,M=5+10"; empty string accepts everything.
  static CellFilter parse(const std::string& text);
};

/// Writes gt, per-n datasets, the reserved test set, and a config snapshot.
/// Refuses to overwrite existing artifacts unless force is set.
int cli_generate(const ExperimentConfig& config, bool force);

/// Runs the MAP + sampling ensemble for every selected grid cell. Cells with
/// complete trace files are skipped unless force is set, so an interrupted
/// run resumes where it stopped.
int cli_sample(const ExperimentConfig& config, bool force, const CellFilter& filter = {},
               int max_parallel = 0);

struct Fig3Row {
  int n, width;
  UncertaintyReport report;
  double theory_trace;  // permutation-mixture trace / d (M = M* cells only)
};
struct Fig5Row {
  int n, width, k;
  long count;
  double ks;
};
struct Fig6Row {
  int n, width, k;
  long count;
  double mean_s, std_s, mean_s2, std_s2, theory_mean_s, theory_mean_s2;
};
struct Table1Row {
  int n, width;
  PredictiveMetrics metrics;
};

struct DiagnoseResult {
  std::vector<Fig3Row> fig3;
  std::vector<ChainDiagEntry> fig4;
  std::vector<Fig5Row> fig5;
  std::vector<Fig6Row> fig6;
  std::vector<Table1Row> table1;
};

/// Pure in-memory diagnostics over per-cell traces; cli_diagnose adds I/O.
DiagnoseResult diagnose_cells(const std::map<std::pair<int, int>, std::vector<SampleTrace>>& cells,
                              const GroundTruth& gt, const Dataset& testset,
                              const ObjectiveConfig& objective);

void write_reports(const DiagnoseResult& result, const std::filesystem::path& reports_dir);

/// Reads every trace under the config's trace directory and writes the five
/// report CSVs (fig3, fig4, fig5, fig6, table1). `per_draw_splits` adds the
/// per-draw splitting-coefficient CSVs (one per overparametrized cell).
int cli_diagnose(const ExperimentConfig& config, bool per_draw_splits = false);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ValidationOptions {
  /// Test hook: perturbs the closed-form mean used by the moment check so
  /// the negative control fails.
  bool inject_mu_error = false;
  std::uint64_t seed = 20240901;
};

/// Fast built-in self-checks: closed forms vs exhaustive enumeration,
/// gradient vs finite differences, sampler sanity on analytic Gaussians,
/// special-function spot values.
std::vector<CheckResult> run_self_checks(const ValidationOptions& options = {});

int cli_validate(std::ostream& out, const ValidationOptions& options = {});

/// Human-readable summary of previously written report CSVs.
int cli_report(const ExperimentConfig& config, std::ostream& out);

/// Kernel description included in report/validate headers.
std::string sampler_notice();

}  // namespace splitlab
