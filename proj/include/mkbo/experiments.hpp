#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mkbo/bo.hpp"
#include "mkbo/synth.hpp"

namespace mkbo {

struct AtlasConfig {
  std::string family = "legendre1d";  // legendre1d | legendre2d | rff | bands
  int p = 20;
  // The harness runs the Legendre families in their orthonormal scaling: the
  // synthetic pipeline recovers the support at the published lambda only when
  // every group carries unit average energy.
  bool legendre_orthonormal = true;
  int input_dim = 1;
  int rff_features = 500;
  int rff_groups = 20;
  double rff_lengthscale = 0.3;
  int band_width = 3;
  double base_freq = 1.0;
};

// All knobs of the experiment harness. Defaults follow the synthetic setup:
// p = 20, s = 5, B = 10, sigma = 0.01, m = n = 50, lambda = 0.03, delta = 0.1.
struct ExperimentConfig {
  std::string experiment;  // calibrate | regret | consistency | lambda-sweep | lookup-bo | gen-data
  AtlasConfig atlas;
  int s = 5;
  double B = 10.0;
  double sigma = 0.01;
  std::string noise = "gaussian";  // gaussian | uniform (bounded, same variance)
  int m = 50;
  int n = 50;
  double lambda = 0.03;
  // Weight scale for the fitted kernel: "l1" normalizes the learned weights
  // to unit l1 norm, "fixed" divides by c1.
  std::string c1_mode = "l1";
  double c1 = 1.0;
  double delta = 0.1;
  double kappa = 1.0;
  int T = 500;
  int runs = 50;
  int grid = 1000;           // candidate-grid resolution (per axis in 2d)
  int train_samples = 4;     // calibration conditioning size
  int test_points = 1000;    // calibration test points
  std::vector<int> m_values = {2, 5, 10, 25, 50};
  std::vector<double> lambda_values = {0.003, 0.01, 0.03, 0.1, 0.3};
  int lookup_runs = 10;
  // Rejection-resample tasks until every support group is represented. The
  // consistency sweep turns this off: the benefit of more tasks comes from
  // small task collections missing support groups, which enforcement would
  // define away.
  bool enforce_coverage = true;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

// Fields present in the JSON file override the base; everything else keeps
// the base value.
ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {});
std::string config_json(const ExperimentConfig& config);

// Pre-evaluated objective rows forming a finite BO domain.
struct LookupTable {
  std::string task_id;
  std::vector<std::string> column_names;  // hyperparameter columns, in file order
  Eigen::MatrixXd inputs;                 // rows x hp-dim, transforms applied
  Eigen::VectorXd objective;

  int rows() const { return static_cast<int>(inputs.rows()); }
  int input_dim() const { return static_cast<int>(inputs.cols()); }
};

// Per-column input transform, keyed by column name. Supported: "identity",
// "log2div10" (x -> log2(x)/10).
struct TransformSpec {
  std::vector<std::pair<std::string, std::string>> columns;
};

// Parse a CSV whose header names the hyperparameter columns, one objective
// column, and optionally a task column; a task column splits the file into
// one table per task value. Errors name the offending row.
std::vector<LookupTable> ingest_lookup(const std::string& path, const TransformSpec& transforms);

struct CalibrationResult {
  std::vector<double> alphas;
  // indexed [kernel][alpha]; kernels ordered oracle, meta, full
  std::vector<std::string> kernels;
  std::vector<std::vector<double>> coverage;
  std::vector<double> sharpness;
  std::string csv;
};

struct RegretResult {
  std::vector<std::string> kernels;
  std::vector<RegretSummary> summaries;
  // Per-instance endpoint values (runs x kernels); the arms share instances,
  // so paired gap statistics are available.
  Eigen::MatrixXd final_inference;
  Eigen::MatrixXd final_simple;
  std::string csv;
};

struct ConsistencyResult {
  std::vector<int> m_values;
  std::vector<double> meta_mean, meta_std;
  double oracle_mean = 0.0, oracle_std = 0.0;
  std::string csv;
};

struct LambdaSweepResult {
  std::vector<double> lambdas;
  std::vector<bool> below_floor;
  double floor = 0.0;
  std::vector<double> inference_mean, inference_std;
  std::vector<double> simple_mean, simple_std;
  std::string csv;
};

struct LookupBoResult {
  std::vector<std::string> kernels;  // meta, se_rff
  // cumulative sample regret, mean/std per step over (table, run) pairs
  std::vector<Eigen::VectorXd> cum_regret_mean, cum_regret_std;
  std::vector<Eigen::VectorXd> simple_mean, simple_std;
  std::string csv;
};

// Coverage and sharpness of the central alpha-quantile bands of the three
// Gaussian posteriors (true kernel, fitted kernel, uniform baseline), each
// conditioned on train_samples noisy draws of a prior sample of the true
// kernel. Averages over `runs` fresh instances.
CalibrationResult run_calibration(const ExperimentConfig& config);

// Mean and deviation regret curves of GP-UCB under the true, fitted, and
// uniform kernels (plus an RFF baseline on the 2d atlas), with the true
// kernel fixed across instances.
RegretResult run_regret(const ExperimentConfig& config);

// Inference regret at horizon T of the fitted kernel as the task count m
// sweeps, against the oracle reference.
ConsistencyResult run_consistency(const ExperimentConfig& config);

// Regret of the fitted kernel per lambda value; lambdas under the
// theoretical floor are flagged.
LambdaSweepResult run_lambda_sweep(const ExperimentConfig& config);

// Meta-learn on the meta tables (one task each, n subsampled rows), then run
// GP-UCB over each test table's rows with the fitted kernel and the uniform
// RFF baseline.
LookupBoResult run_lookup_bo(const ExperimentConfig& config,
                             const std::vector<LookupTable>& meta_tables,
                             const std::vector<LookupTable>& test_tables);

// Draw the synthetic meta-dataset for the config and render it as CSV
// (columns: task, x1.., y).
std::string gen_data_csv(const ExperimentConfig& config);
MetaDataset load_meta_data_csv(const std::string& path);

// Tabulated tasks from a sparse ground truth on an RFF atlas; used to
// exercise the lookup pipeline without external data.
std::vector<LookupTable> make_synthetic_lookup_tables(const ExperimentConfig& config, int tables,
                                                      int rows, std::uint64_t seed);

// Deterministic double formatting shared by every CSV writer.
std::string format_double(double v);

// Write content to out_dir/name and a JSON sidecar (config echo + version)
// next to it. Returns the full path.
std::string write_output(const ExperimentConfig& config, const std::string& name,
                         const std::string& content);

AtlasPtr make_atlas(const ExperimentConfig& config);

}  // namespace mkbo
