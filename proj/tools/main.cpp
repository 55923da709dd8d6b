// Command-line driver: generate | sample | diagnose | validate | report.

#include <CLI11.hpp>
#include <iostream>

#include "splitlab/runio.hpp"

namespace {

splitlab::ExperimentConfig resolve_config(const std::string& config_path,
                                          const std::string& out_dir, std::uint64_t seed,
                                          bool seed_set) {
  splitlab::ExperimentConfig config;
  if (!config_path.empty()) config = splitlab::load_config(config_path);
  if (!out_dir.empty()) config.out_dir = out_dir;
  if (seed_set) config.master_seed = seed;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"posterior symmetry laboratory for one-hidden-layer ReLU networks"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool force = false;
  std::string cells_text;
  int parallel = 0;
  bool per_draw_splits = false;
  bool inject_mu_error = false;

  auto add_common = [&](CLI::App* cmd, bool with_force) {
    cmd->add_option("--config", config_path, "JSON config file (defaults used when omitted)");
    cmd->add_option("--out", out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", seed, "master seed (overrides config)");
    if (with_force) cmd->add_flag("--force", force, "overwrite existing artifacts");
  };

  CLI::App* generate = app.add_subcommand("generate", "write ground truth, datasets, test set");
  add_common(generate, true);

  CLI::App* sample = app.add_subcommand("sample", "run MAP + sampling for every grid cell");
  add_common(sample, true);
  sample->add_option("--cells", cells_text, "cell filter, e.g. n=1024+4096,M=5+10");
  sample->add_option("--parallel", parallel, "max worker threads (default: hardware)");

  CLI::App* diagnose = app.add_subcommand("diagnose", "compute report CSVs from traces");
  add_common(diagnose, false);
  diagnose->add_flag("--per-draw-splits", per_draw_splits,
                     "also write per-draw splitting-coefficient CSVs");

  CLI::App* validate = app.add_subcommand("validate", "run built-in self-checks");
  validate->add_flag("--inject-mu-error", inject_mu_error,
                     "negative control: corrupt a closed form and expect failure");

  CLI::App* report = app.add_subcommand("report", "print a summary of report CSVs");
  add_common(report, false);

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* active = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front();
    const bool seed_set =
        active != nullptr && active->get_option_no_throw("--seed") != nullptr &&
        active->count("--seed") > 0;
    if (generate->parsed())
      return splitlab::cli_generate(resolve_config(config_path, out_dir, seed, seed_set), force);
    if (sample->parsed())
      return splitlab::cli_sample(resolve_config(config_path, out_dir, seed, seed_set), force,
                                  splitlab::CellFilter::parse(cells_text), parallel);
    if (diagnose->parsed())
      return splitlab::cli_diagnose(resolve_config(config_path, out_dir, seed, seed_set),
                                    per_draw_splits);
    if (validate->parsed()) {
      splitlab::ValidationOptions options;
      options.inject_mu_error = inject_mu_error;
      return splitlab::cli_validate(std::cout, options);
    }
    if (report->parsed())
      return splitlab::cli_report(resolve_config(config_path, out_dir, seed, seed_set), std::cout);
  } catch (const std::invalid_argument& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
