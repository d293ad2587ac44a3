// Command-line front end: meta-learn a sparse kernel from multi-task data and
// reproduce the confidence-set and bandit experiments, emitting plot-ready CSV.

#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mkbo/experiments.hpp"

namespace {

struct CliOverrides {
  std::string config_path;
  std::optional<int> p, s, m, n, T, runs, grid, train_samples, test_points, lookup_runs, threads;
  std::optional<double> B, sigma, lambda, c1, delta, kappa, rff_lengthscale;
  std::optional<int> rff_features, rff_groups;
  std::optional<std::string> family, c1_mode, out_dir, noise;
  std::optional<bool> enforce_coverage;
  std::optional<std::uint64_t> seed;
  std::vector<int> m_values;
  std::vector<double> lambda_values;
};

void add_common_options(CLI::App* cmd, CliOverrides& o) {
  cmd->add_option("--config", o.config_path, "JSON config file; flags override its fields");
  cmd->add_option("--seed", o.seed, "master seed (default 1)");
  cmd->add_option("--out", o.out_dir, "output directory (env MKBO_OUT_DIR overrides)");
  cmd->add_option("--family", o.family, "atlas family: legendre1d|legendre2d|rff|bands");
  cmd->add_option("--p", o.p, "number of base kernels");
  cmd->add_option("--s", o.s, "true support size");
  cmd->add_option("--B", o.B, "kernel-norm bound of the targets");
  cmd->add_option("--sigma", o.sigma, "observation noise scale");
  cmd->add_option("--noise", o.noise, "noise law: gaussian|uniform");
  cmd->add_option("--m", o.m, "meta-data task count");
  cmd->add_option("--n", o.n, "samples per task");
  cmd->add_option("--lambda", o.lambda, "group-Lasso regularization");
  cmd->add_option("--c1-mode", o.c1_mode, "weight scale mode: l1|fixed");
  cmd->add_option("--c1", o.c1, "fixed weight scale (with --c1-mode fixed)");
  cmd->add_option("--delta", o.delta, "failure probability");
  cmd->add_option("--kappa", o.kappa, "restricted-eigenvalue constant for the bounds");
  cmd->add_option("--T", o.T, "bandit horizon");
  cmd->add_option("--runs", o.runs, "replicate count");
  cmd->add_option("--grid", o.grid, "candidate grid size (total)");
  cmd->add_option("--train-samples", o.train_samples, "calibration conditioning size");
  cmd->add_option("--test-points", o.test_points, "calibration test points");
  cmd->add_option("--m-values", o.m_values, "task counts for the consistency sweep");
  cmd->add_option("--lambda-values", o.lambda_values, "regularization sweep values");
  cmd->add_option("--lookup-runs", o.lookup_runs, "runs per lookup test table");
  cmd->add_option("--rff-features", o.rff_features, "random Fourier feature count");
  cmd->add_option("--rff-groups", o.rff_groups, "random Fourier group count");
  cmd->add_option("--rff-lengthscale", o.rff_lengthscale, "random Fourier lengthscale");
  cmd->add_option("--enforce-coverage", o.enforce_coverage,
                  "resample tasks until every support group is used");
  cmd->add_option("--threads", o.threads, "worker threads (0 = hardware)");
}

mkbo::ExperimentConfig resolve(const CliOverrides& o, const std::string& experiment,
                               int default_T, int default_runs) {
  mkbo::ExperimentConfig c;
  c.T = default_T;
  c.runs = default_runs;
  if (!o.config_path.empty()) c = mkbo::load_config(o.config_path, std::move(c));
  c.experiment = experiment;
  if (o.family) c.atlas.family = *o.family;
  if (o.p) c.atlas.p = *o.p;
  if (o.rff_features) c.atlas.rff_features = *o.rff_features;
  if (o.rff_groups) c.atlas.rff_groups = *o.rff_groups;
  if (o.rff_lengthscale) c.atlas.rff_lengthscale = *o.rff_lengthscale;
  if (o.s) c.s = *o.s;
  if (o.B) c.B = *o.B;
  if (o.sigma) c.sigma = *o.sigma;
  if (o.noise) c.noise = *o.noise;
  if (o.m) c.m = *o.m;
  if (o.n) c.n = *o.n;
  if (o.lambda) c.lambda = *o.lambda;
  if (o.c1_mode) c.c1_mode = *o.c1_mode;
  if (o.c1) c.c1 = *o.c1;
  if (o.delta) c.delta = *o.delta;
  if (o.kappa) c.kappa = *o.kappa;
  if (o.T) c.T = *o.T;
  if (o.runs) c.runs = *o.runs;
  if (o.grid) c.grid = *o.grid;
  if (o.train_samples) c.train_samples = *o.train_samples;
  if (o.test_points) c.test_points = *o.test_points;
  if (!o.m_values.empty()) c.m_values = o.m_values;
  if (!o.lambda_values.empty()) c.lambda_values = o.lambda_values;
  if (o.lookup_runs) c.lookup_runs = *o.lookup_runs;
  if (o.enforce_coverage) c.enforce_coverage = *o.enforce_coverage;
  if (o.out_dir) c.out_dir = *o.out_dir;
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  // 2d regret defaults to the 64x64 acquisition grid
  if (c.atlas.family == "legendre2d" && c.grid == 1000 && !o.grid) c.grid = 4096;
  return c;
}

mkbo::TransformSpec parse_transforms(const std::vector<std::string>& entries) {
  mkbo::TransformSpec spec;
  for (const std::string& entry : entries) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("--transform expects column=kind, got " + entry);
    }
    spec.columns.emplace_back(entry.substr(0, eq), entry.substr(eq + 1));
  }
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse kernel meta-learning and GP-UCB experiment harness"};
  app.require_subcommand(1);

  CliOverrides o;
  std::vector<std::string> meta_paths, test_paths, transform_entries;

  CLI::App* calibrate = app.add_subcommand("calibrate", "confidence-set coverage and sharpness");
  CLI::App* regret = app.add_subcommand("regret", "GP-UCB regret curves for the three kernels");
  CLI::App* consistency = app.add_subcommand("consistency", "regret at T as the task count grows");
  CLI::App* lambda_sweep = app.add_subcommand("lambda-sweep", "regret across regularization values");
  CLI::App* lookup = app.add_subcommand("lookup-bo", "bandit over pre-evaluated lookup tables");
  CLI::App* gen_data = app.add_subcommand("gen-data", "write a synthetic meta-dataset as CSV");
  for (CLI::App* cmd : {calibrate, regret, consistency, lambda_sweep, lookup, gen_data}) {
    add_common_options(cmd, o);
  }
  lookup->add_option("--meta-table", meta_paths, "CSV lookup tables used as meta-data")
      ->required();
  lookup->add_option("--test-table", test_paths, "CSV lookup tables to optimize over")->required();
  lookup->add_option("--transform", transform_entries,
                     "per-column input transform, e.g. lambda=log2div10");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(calibrate)) {
      const auto config = resolve(o, "calibrate", 500, 50);
      const auto result = mkbo::run_calibration(config);
      std::cout << mkbo::write_output(config, "calibration.csv", result.csv) << "\n";
    } else if (app.got_subcommand(regret)) {
      const auto config = resolve(o, "regret", 500, 100);
      const auto result = mkbo::run_regret(config);
      std::cout << mkbo::write_output(config, "regret.csv", result.csv) << "\n";
    } else if (app.got_subcommand(consistency)) {
      auto config = resolve(o, "consistency", 100, 50);
      if (!o.enforce_coverage) config.enforce_coverage = false;
      const auto result = mkbo::run_consistency(config);
      std::cout << mkbo::write_output(config, "consistency.csv", result.csv) << "\n";
    } else if (app.got_subcommand(lambda_sweep)) {
      const auto config = resolve(o, "lambda-sweep", 100, 50);
      const auto result = mkbo::run_lambda_sweep(config);
      std::cout << mkbo::write_output(config, "lambda_sweep.csv", result.csv) << "\n";
    } else if (app.got_subcommand(lookup)) {
      const auto config = resolve(o, "lookup-bo", 50, 10);
      const auto transforms = parse_transforms(transform_entries);
      std::vector<mkbo::LookupTable> meta_tables, test_tables;
      for (const auto& path : meta_paths) {
        for (auto& t : mkbo::ingest_lookup(path, transforms)) meta_tables.push_back(std::move(t));
      }
      for (const auto& path : test_paths) {
        for (auto& t : mkbo::ingest_lookup(path, transforms)) test_tables.push_back(std::move(t));
      }
      const auto result = mkbo::run_lookup_bo(config, meta_tables, test_tables);
      std::cout << mkbo::write_output(config, "lookup_bo.csv", result.csv) << "\n";
    } else if (app.got_subcommand(gen_data)) {
      const auto config = resolve(o, "gen-data", 500, 50);
      std::cout << mkbo::write_output(config, "meta_data.csv", mkbo::gen_data_csv(config)) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
