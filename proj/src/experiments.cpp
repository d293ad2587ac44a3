#include "mkbo/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mkbo/parallel.hpp"
#include "mkbo/rng.hpp"
#include "mkbo/stats.hpp"

namespace mkbo {

namespace {

using nlohmann::json;

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

std::string join_row(const std::vector<std::string>& cells) {
  std::string row;
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) row += ',';
    row += cells[i];
  }
  row += '\n';
  return row;
}

NoiseKind noise_of(const ExperimentConfig& config) {
  if (config.noise == "gaussian") return NoiseKind::Gaussian;
  if (config.noise == "uniform") return NoiseKind::UniformBounded;
  throw std::invalid_argument("config: noise must be gaussian or uniform");
}

TheoryParams theory_of(const ExperimentConfig& config) {
  TheoryParams theory;
  theory.noise_sigma = config.sigma;
  theory.failure_prob = config.delta;
  theory.norm_bound = config.B;
  theory.sparsity = config.s;
  theory.kappa = config.kappa;
  return theory;
}

// Fit the group Lasso and assemble the kernel at the configured weight scale.
MetaKernel fit_kernel(const ExperimentConfig& config, const MetaDataset& data,
                      const AtlasPtr& atlas, double lambda) {
  MetaKernelFit fit = fit_meta_kernel(data, atlas, lambda, 1.0);
  double scale = config.c1;
  if (config.c1_mode == "l1") {
    const double total = fit.fit.group_norms.sum();
    scale = total > 0.0 ? total : 1.0;
  }
  return meta_kernel_from_norms(atlas, fit.fit.group_norms, scale);
}

std::vector<Eigen::VectorXd> make_candidates(const ExperimentConfig& config,
                                             const FeatureAtlas& atlas) {
  const DomainSpec& domain = atlas.domain();
  const int d0 = domain.input_dim();
  std::vector<Eigen::VectorXd> candidates;
  if (d0 == 1) {
    const int count = std::max(2, config.grid);
    candidates.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
      Eigen::VectorXd x(1);
      x[0] = domain.lower[0] + (domain.upper[0] - domain.lower[0]) * i / (count - 1);
      candidates.push_back(std::move(x));
    }
  } else if (d0 == 2) {
    const int per_axis = std::max(2, static_cast<int>(std::floor(std::sqrt(config.grid))));
    candidates.reserve(static_cast<size_t>(per_axis) * per_axis);
    for (int i = 0; i < per_axis; ++i) {
      for (int j = 0; j < per_axis; ++j) {
        Eigen::VectorXd x(2);
        x[0] = domain.lower[0] + (domain.upper[0] - domain.lower[0]) * i / (per_axis - 1);
        x[1] = domain.lower[1] + (domain.upper[1] - domain.lower[1]) * j / (per_axis - 1);
        candidates.push_back(std::move(x));
      }
    }
  } else {
    throw std::invalid_argument("make_candidates: only 1d and 2d grids are supported");
  }
  return candidates;
}

double cumulative_inference_at_end(const BoTrace& trace) { return trace.inference_regret.back(); }

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

}  // namespace

void ExperimentConfig::validate() const {
  require(s >= 1, "config: s must be at least 1");
  require(B > 0.0, "config: B must be positive");
  require(sigma >= 0.0, "config: sigma must be non-negative");
  require(m >= 1 && n >= 1, "config: m and n must be positive");
  require(lambda > 0.0, "config: lambda must be positive");
  require(c1 > 0.0, "config: c1 must be positive");
  require(noise == "gaussian" || noise == "uniform", "config: noise must be gaussian or uniform");
  require(c1_mode == "l1" || c1_mode == "fixed", "config: c1_mode must be l1 or fixed");
  require(delta > 0.0 && delta < 1.0, "config: delta must be in (0,1)");
  require(kappa > 0.0, "config: kappa must be positive");
  require(T >= 1, "config: T must be at least 1");
  require(runs >= 1, "config: runs must be at least 1");
  require(grid >= 2, "config: grid must be at least 2");
  require(train_samples >= 1, "config: train_samples must be at least 1");
  require(test_points >= 1, "config: test_points must be at least 1");
  require(!m_values.empty(), "config: m_values must be non-empty");
  for (int mv : m_values) require(mv >= 1, "config: m_values entries must be positive");
  for (double lv : lambda_values) require(lv > 0.0, "config: lambda_values must be positive");
  require(lookup_runs >= 1, "config: lookup_runs must be at least 1");
}

AtlasPtr make_atlas(const ExperimentConfig& config) {
  const AtlasConfig& a = config.atlas;
  if (a.family == "legendre1d") {
    return std::make_shared<const FeatureAtlas>(
        FeatureAtlas::legendre_1d(a.p, a.legendre_orthonormal));
  }
  if (a.family == "legendre2d") {
    return std::make_shared<const FeatureAtlas>(
        FeatureAtlas::legendre_2d(a.p, a.legendre_orthonormal));
  }
  if (a.family == "rff") {
    return std::make_shared<const FeatureAtlas>(FeatureAtlas::random_fourier(
        a.rff_features, a.input_dim, a.rff_lengthscale, a.rff_groups,
        derive_seed(config.seed, 0xa71a5)));
  }
  if (a.family == "bands") {
    return std::make_shared<const FeatureAtlas>(
        FeatureAtlas::fourier_bands(a.p, a.band_width, a.base_freq));
  }
  throw std::invalid_argument("make_atlas: unknown family " + a.family);
}

std::string format_double(double v) {
  if (v == 0.0) v = 0.0;  // normalize -0
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("load_config: cannot open " + path);
  json j;
  in >> j;
  ExperimentConfig c = std::move(base);
  c.experiment = j.value("experiment", c.experiment);
  if (j.contains("atlas")) {
    const json& a = j.at("atlas");
    c.atlas.family = a.value("family", c.atlas.family);
    c.atlas.p = a.value("p", c.atlas.p);
    c.atlas.legendre_orthonormal = a.value("legendre_orthonormal", c.atlas.legendre_orthonormal);
    c.atlas.input_dim = a.value("input_dim", c.atlas.input_dim);
    c.atlas.rff_features = a.value("rff_features", c.atlas.rff_features);
    c.atlas.rff_groups = a.value("rff_groups", c.atlas.rff_groups);
    c.atlas.rff_lengthscale = a.value("rff_lengthscale", c.atlas.rff_lengthscale);
    c.atlas.band_width = a.value("band_width", c.atlas.band_width);
    c.atlas.base_freq = a.value("base_freq", c.atlas.base_freq);
  }
  c.s = j.value("s", c.s);
  c.B = j.value("B", c.B);
  c.sigma = j.value("sigma", c.sigma);
  c.noise = j.value("noise", c.noise);
  c.m = j.value("m", c.m);
  c.n = j.value("n", c.n);
  c.lambda = j.value("lambda", c.lambda);
  c.c1_mode = j.value("c1_mode", c.c1_mode);
  c.c1 = j.value("c1", c.c1);
  c.delta = j.value("delta", c.delta);
  c.kappa = j.value("kappa", c.kappa);
  c.T = j.value("T", c.T);
  c.runs = j.value("runs", c.runs);
  c.grid = j.value("grid", c.grid);
  c.train_samples = j.value("train_samples", c.train_samples);
  c.test_points = j.value("test_points", c.test_points);
  c.m_values = j.value("m_values", c.m_values);
  c.lambda_values = j.value("lambda_values", c.lambda_values);
  c.lookup_runs = j.value("lookup_runs", c.lookup_runs);
  c.enforce_coverage = j.value("enforce_coverage", c.enforce_coverage);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);
  return c;
}

std::string config_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = c.experiment;
  j["atlas"] = {{"family", c.atlas.family},
                {"p", c.atlas.p},
                {"legendre_orthonormal", c.atlas.legendre_orthonormal},
                {"input_dim", c.atlas.input_dim},
                {"rff_features", c.atlas.rff_features},
                {"rff_groups", c.atlas.rff_groups},
                {"rff_lengthscale", c.atlas.rff_lengthscale},
                {"band_width", c.atlas.band_width},
                {"base_freq", c.atlas.base_freq}};
  j["s"] = c.s;
  j["B"] = c.B;
  j["sigma"] = c.sigma;
  j["noise"] = c.noise;
  j["m"] = c.m;
  j["n"] = c.n;
  j["lambda"] = c.lambda;
  j["c1_mode"] = c.c1_mode;
  j["c1"] = c.c1;
  j["delta"] = c.delta;
  j["kappa"] = c.kappa;
  j["T"] = c.T;
  j["runs"] = c.runs;
  j["grid"] = c.grid;
  j["train_samples"] = c.train_samples;
  j["test_points"] = c.test_points;
  j["m_values"] = c.m_values;
  j["lambda_values"] = c.lambda_values;
  j["lookup_runs"] = c.lookup_runs;
  j["enforce_coverage"] = c.enforce_coverage;
  j["out_dir"] = c.out_dir;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["version"] = std::string("mkbo ") + MKBO_VERSION;
  return j.dump(2) + "\n";
}

std::string write_output(const ExperimentConfig& config, const std::string& name,
                         const std::string& content) {
  std::string dir = config.out_dir;
  if (const char* env = std::getenv("MKBO_OUT_DIR"); env != nullptr && *env != '\0') dir = env;
  std::filesystem::create_directories(dir);
  const std::filesystem::path path = std::filesystem::path(dir) / name;
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_output: cannot write " + path.string());
    out << content;
  }
  {
    std::ofstream side(path.string() + ".meta.json", std::ios::binary);
    side << config_json(config);
  }
  return path.string();
}

std::vector<LookupTable> ingest_lookup(const std::string& path, const TransformSpec& transforms) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("ingest_lookup: cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("ingest_lookup: empty file " + path);
  const std::vector<std::string> header = split_csv_line(line);
  require(!header.empty(), "ingest_lookup: missing header in " + path);

  int objective_col = -1;
  int task_col = -1;
  std::vector<int> hp_cols;
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "objective") {
      require(objective_col < 0, "ingest_lookup: duplicate objective column in " + path);
      objective_col = static_cast<int>(i);
    } else if (header[i] == "task") {
      task_col = static_cast<int>(i);
    } else {
      hp_cols.push_back(static_cast<int>(i));
    }
  }
  require(objective_col >= 0, "ingest_lookup: no objective column in " + path);
  require(!hp_cols.empty(), "ingest_lookup: no hyperparameter columns in " + path);

  // Resolve transforms by column name; identity everywhere else.
  std::vector<std::string> hp_names;
  std::vector<std::string> hp_transforms;
  for (int c : hp_cols) {
    hp_names.push_back(header[static_cast<size_t>(c)]);
    hp_transforms.push_back("identity");
  }
  for (const auto& [column, kind] : transforms.columns) {
    require(kind == "identity" || kind == "log2div10",
            "ingest_lookup: unknown transform " + kind);
    const auto it = std::find(hp_names.begin(), hp_names.end(), column);
    require(it != hp_names.end(), "ingest_lookup: transform names unknown column " + column);
    hp_transforms[static_cast<size_t>(it - hp_names.begin())] = kind;
  }

  struct Rows {
    std::vector<Eigen::VectorXd> inputs;
    std::vector<double> objective;
  };
  std::vector<std::string> task_order;
  std::map<std::string, Rows> by_task;

  int row_number = 1;  // header was row 1
  while (std::getline(in, line)) {
    ++row_number;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    const std::string where = path + " row " + std::to_string(row_number);
    require(cells.size() == header.size(), "ingest_lookup: wrong cell count at " + where);

    auto parse = [&](int col) {
      const std::string& cell = cells[static_cast<size_t>(col)];
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      require(!cell.empty() && end == cell.c_str() + cell.size(),
              "ingest_lookup: unparsable number at " + where);
      require(std::isfinite(v), "ingest_lookup: non-finite value at " + where);
      return v;
    };

    Eigen::VectorXd x(static_cast<Eigen::Index>(hp_cols.size()));
    for (size_t k = 0; k < hp_cols.size(); ++k) {
      double v = parse(hp_cols[k]);
      if (hp_transforms[k] == "log2div10") {
        require(v > 0.0, "ingest_lookup: log2 transform needs positive value at " + where);
        v = std::log2(v) / 10.0;
      }
      x[static_cast<Eigen::Index>(k)] = v;
    }
    const double objective = parse(objective_col);
    const std::string task = task_col >= 0 ? cells[static_cast<size_t>(task_col)] : "";
    if (by_task.find(task) == by_task.end()) task_order.push_back(task);
    by_task[task].inputs.push_back(std::move(x));
    by_task[task].objective.push_back(objective);
  }
  require(!by_task.empty(), "ingest_lookup: no data rows in " + path);

  std::vector<LookupTable> tables;
  const std::string stem = std::filesystem::path(path).stem().string();
  for (const std::string& task : task_order) {
    Rows& rows = by_task[task];
    LookupTable t;
    t.task_id = task.empty() ? stem : stem + ":" + task;
    t.column_names = hp_names;
    t.inputs.resize(static_cast<Eigen::Index>(rows.inputs.size()),
                    static_cast<Eigen::Index>(hp_cols.size()));
    t.objective.resize(static_cast<Eigen::Index>(rows.objective.size()));
    for (size_t r = 0; r < rows.inputs.size(); ++r) {
      t.inputs.row(static_cast<Eigen::Index>(r)) = rows.inputs[r];
      t.objective[static_cast<Eigen::Index>(r)] = rows.objective[r];
    }
    tables.push_back(std::move(t));
  }
  return tables;
}

CalibrationResult run_calibration(const ExperimentConfig& config) {
  config.validate();
  const AtlasPtr atlas = make_atlas(config);
  const MetaKernel full = uniform_kernel(atlas);

  std::vector<double> alphas;
  for (int i = 1; i <= 19; ++i) alphas.push_back(0.05 * i);
  std::vector<double> halfwidths;
  for (double a : alphas) halfwidths.push_back(central_quantile_halfwidth(a));

  const std::vector<std::string> kernels = {"oracle", "meta", "full"};
  const int kcount = static_cast<int>(kernels.size());
  const int acount = static_cast<int>(alphas.size());

  // slot per run: coverage[kernel][alpha] and sharpness[kernel]
  std::vector<std::vector<std::vector<double>>> coverage(
      static_cast<size_t>(config.runs),
      std::vector<std::vector<double>>(static_cast<size_t>(kcount),
                                       std::vector<double>(static_cast<size_t>(acount), 0.0)));
  std::vector<std::vector<double>> sharpness(
      static_cast<size_t>(config.runs), std::vector<double>(static_cast<size_t>(kcount), 0.0));

  // Conditioning noise: the observation model's own variance (the 1 + 2/t
  // schedule belongs to the any-time bandit bound, not to this experiment).
  const double noise_var = std::max(config.sigma * config.sigma, 1e-12);

  parallel_for(config.runs, config.threads, [&](int run) {
    const std::uint64_t base = derive_seed(config.seed, 100 + static_cast<std::uint64_t>(run));
    const TrueKernelSpec spec = sample_true_kernel(atlas, config.s, derive_seed(base, 1));
    const auto tasks = sample_task_functions(spec, config.m, config.B, derive_seed(base, 2));
    const MetaDataset data = generate_meta_data(spec, tasks, config.n, config.sigma,
                                                 derive_seed(base, 3), noise_of(config));
    const MetaKernel meta = fit_kernel(config, data, atlas, config.lambda);
    const MetaKernel oracle = to_meta_kernel(spec);

    const TaskFunction f = sample_gp_test_function(spec, derive_seed(base, 4));

    Rng obs_rng(derive_seed(base, 5));
    std::vector<Eigen::VectorXd> train_x;
    Eigen::VectorXd train_y(config.train_samples);
    for (int i = 0; i < config.train_samples; ++i) {
      Eigen::VectorXd x = atlas->domain().sample(obs_rng);
      train_y[i] = f.eval(x) + config.sigma * obs_rng.normal();
      train_x.push_back(std::move(x));
    }

    Rng test_rng(derive_seed(base, 6));
    std::vector<Eigen::VectorXd> test_x;
    Eigen::VectorXd test_f(config.test_points);
    for (int i = 0; i < config.test_points; ++i) {
      Eigen::VectorXd x = atlas->domain().sample(test_rng);
      test_f[i] = f.eval(x);
      test_x.push_back(std::move(x));
    }

    const MetaKernel* arms[] = {&oracle, &meta, &full};
    for (int k = 0; k < kcount; ++k) {
      const GpPosterior post(*arms[k], train_x, train_y, noise_var);
      double var_sum = 0.0;
      std::vector<int> inside(static_cast<size_t>(acount), 0);
      for (int i = 0; i < config.test_points; ++i) {
        const auto [mu, var] = post.mean_var(test_x[static_cast<size_t>(i)]);
        var_sum += var;
        const double gap = std::abs(test_f[i] - mu);
        const double sd = std::sqrt(var);
        for (int a = 0; a < acount; ++a) {
          if (gap <= halfwidths[static_cast<size_t>(a)] * sd) ++inside[static_cast<size_t>(a)];
        }
      }
      for (int a = 0; a < acount; ++a) {
        coverage[static_cast<size_t>(run)][static_cast<size_t>(k)][static_cast<size_t>(a)] =
            static_cast<double>(inside[static_cast<size_t>(a)]) / config.test_points;
      }
      sharpness[static_cast<size_t>(run)][static_cast<size_t>(k)] = var_sum / config.test_points;
    }
  });

  CalibrationResult result;
  result.alphas = alphas;
  result.kernels = kernels;
  result.coverage.assign(static_cast<size_t>(kcount),
                         std::vector<double>(static_cast<size_t>(acount), 0.0));
  result.sharpness.assign(static_cast<size_t>(kcount), 0.0);
  for (int run = 0; run < config.runs; ++run) {
    for (int k = 0; k < kcount; ++k) {
      result.sharpness[static_cast<size_t>(k)] +=
          sharpness[static_cast<size_t>(run)][static_cast<size_t>(k)] / config.runs;
      for (int a = 0; a < acount; ++a) {
        result.coverage[static_cast<size_t>(k)][static_cast<size_t>(a)] +=
            coverage[static_cast<size_t>(run)][static_cast<size_t>(k)][static_cast<size_t>(a)] /
            config.runs;
      }
    }
  }

  std::string csv = "alpha";
  for (const auto& k : kernels) csv += ",coverage_" + k;
  for (const auto& k : kernels) csv += ",sharpness_" + k;
  csv += '\n';
  for (int a = 0; a < acount; ++a) {
    std::vector<std::string> row = {format_double(alphas[static_cast<size_t>(a)])};
    for (int k = 0; k < kcount; ++k) {
      row.push_back(format_double(result.coverage[static_cast<size_t>(k)][static_cast<size_t>(a)]));
    }
    for (int k = 0; k < kcount; ++k) {
      row.push_back(format_double(result.sharpness[static_cast<size_t>(k)]));
    }
    csv += join_row(row);
  }
  result.csv = std::move(csv);
  return result;
}

RegretResult run_regret(const ExperimentConfig& config) {
  config.validate();
  const AtlasPtr atlas = make_atlas(config);
  const TrueKernelSpec spec = sample_true_kernel(atlas, config.s, derive_seed(config.seed, 7));
  const std::vector<Eigen::VectorXd> candidates = make_candidates(config, *atlas);
  const TheoryParams theory = theory_of(config);
  const MetaShape shape = MetaShape::of(*atlas, config.m, config.n);

  const MetaKernel oracle = to_meta_kernel(spec);
  const MetaKernel full = uniform_kernel(atlas);

  // The squared-exponential surrogate joins on the 2d atlas as in the
  // second synthetic study.
  const bool with_se = config.atlas.family == "legendre2d";
  AtlasPtr se_atlas;
  std::optional<MetaKernel> se_kernel;
  std::optional<MetaShape> se_shape;
  if (with_se) {
    se_atlas = std::make_shared<const FeatureAtlas>(FeatureAtlas::random_fourier(
        config.atlas.rff_features, 2, config.atlas.rff_lengthscale, config.atlas.rff_groups,
        derive_seed(config.seed, 0xa71a5)));
    se_kernel = uniform_kernel(se_atlas);
    se_shape = MetaShape::of(*se_atlas, config.m, config.n);
  }

  std::vector<std::string> kernels = {"oracle", "meta", "full"};
  if (with_se) kernels.push_back("se_rff");
  const int arm_count = static_cast<int>(kernels.size());

  std::vector<std::vector<BoTrace>> traces(static_cast<size_t>(arm_count),
                                           std::vector<BoTrace>(static_cast<size_t>(config.runs)));

  parallel_for(config.runs, config.threads, [&](int i) {
    const std::uint64_t base = derive_seed(config.seed, 200 + static_cast<std::uint64_t>(i));
    const auto tasks = sample_task_functions(spec, config.m, config.B, derive_seed(base, 1));
    const MetaDataset data = generate_meta_data(spec, tasks, config.n, config.sigma,
                                                 derive_seed(base, 2), noise_of(config));
    const MetaKernel meta = fit_kernel(config, data, atlas, config.lambda);
    const TaskFunction reward = make_reward(spec, config.B, derive_seed(base, 3));
    const RewardFn fn = [&reward](const Eigen::VectorXd& x) { return reward.eval(x); };

    const MetaKernel* arms[] = {&oracle, &meta, &full, with_se ? &*se_kernel : nullptr};
    for (int a = 0; a < arm_count; ++a) {
      const MetaShape& arm_shape = (with_se && a == 3) ? *se_shape : shape;
      traces[static_cast<size_t>(a)][static_cast<size_t>(i)] =
          run_gp_ucb(fn, config.sigma, derive_seed(base, 10 + static_cast<std::uint64_t>(a)),
                     *arms[a], theory, config.T, candidates, arm_shape);
    }
  });

  RegretResult result;
  result.kernels = kernels;
  for (int a = 0; a < arm_count; ++a) result.summaries.push_back(regret_summary(traces[static_cast<size_t>(a)]));
  result.final_inference.resize(config.runs, arm_count);
  result.final_simple.resize(config.runs, arm_count);
  for (int a = 0; a < arm_count; ++a) {
    for (int i = 0; i < config.runs; ++i) {
      const BoTrace& trace = traces[static_cast<size_t>(a)][static_cast<size_t>(i)];
      result.final_inference(i, a) = trace.inference_regret.back();
      result.final_simple(i, a) = trace.simple_regret.back();
    }
  }

  std::string csv = "step";
  for (const auto& k : kernels) csv += ",r_mean_" + k + ",r_std_" + k;
  for (const auto& k : kernels) csv += ",R_mean_" + k + ",R_std_" + k;
  csv += '\n';
  for (int t = 0; t < config.T; ++t) {
    std::vector<std::string> row = {std::to_string(t + 1)};
    for (int a = 0; a < arm_count; ++a) {
      row.push_back(format_double(result.summaries[static_cast<size_t>(a)].simple_mean[t]));
      row.push_back(format_double(result.summaries[static_cast<size_t>(a)].simple_std[t]));
    }
    for (int a = 0; a < arm_count; ++a) {
      row.push_back(format_double(result.summaries[static_cast<size_t>(a)].inference_mean[t]));
      row.push_back(format_double(result.summaries[static_cast<size_t>(a)].inference_std[t]));
    }
    csv += join_row(row);
  }
  result.csv = std::move(csv);
  return result;
}

ConsistencyResult run_consistency(const ExperimentConfig& config) {
  config.validate();
  const AtlasPtr atlas = make_atlas(config);
  const TrueKernelSpec spec = sample_true_kernel(atlas, config.s, derive_seed(config.seed, 7));
  const std::vector<Eigen::VectorXd> candidates = make_candidates(config, *atlas);
  const TheoryParams theory = theory_of(config);
  const MetaKernel oracle = to_meta_kernel(spec);
  const int sweep = static_cast<int>(config.m_values.size());

  std::vector<std::vector<double>> meta_end(static_cast<size_t>(sweep),
                                            std::vector<double>(static_cast<size_t>(config.runs)));
  std::vector<double> oracle_end(static_cast<size_t>(config.runs));

  parallel_for(config.runs, config.threads, [&](int i) {
    const std::uint64_t base = derive_seed(config.seed, 300 + static_cast<std::uint64_t>(i));
    // The reward draw is shared across the m sweep so the comparison is paired.
    const TaskFunction reward = make_reward(spec, config.B, derive_seed(base, 1));
    const RewardFn fn = [&reward](const Eigen::VectorXd& x) { return reward.eval(x); };

    const MetaShape oracle_shape = MetaShape::of(*atlas, config.m_values.back(), config.n);
    const BoTrace oracle_trace = run_gp_ucb(fn, config.sigma, derive_seed(base, 2), oracle,
                                            theory, config.T, candidates, oracle_shape);
    oracle_end[static_cast<size_t>(i)] = cumulative_inference_at_end(oracle_trace);

    // One nested task pool per instance: the cell with m tasks sees the first
    // m draws, so growing the sweep means adding tasks rather than redrawing
    // the collection. Data and observation streams are shared the same way.
    const int max_m = *std::max_element(config.m_values.begin(), config.m_values.end());
    const auto task_pool = sample_task_functions(spec, max_m, config.B, derive_seed(base, 100),
                                                 config.enforce_coverage);
    const MetaDataset data_pool = generate_meta_data(spec, task_pool, config.n, config.sigma,
                                                     derive_seed(base, 200), noise_of(config));
    for (int mi = 0; mi < sweep; ++mi) {
      const int tasks_m = config.m_values[static_cast<size_t>(mi)];
      MetaDataset data;
      data.inputs.assign(data_pool.inputs.begin(), data_pool.inputs.begin() + tasks_m);
      data.labels.assign(data_pool.labels.begin(), data_pool.labels.begin() + tasks_m);
      const MetaKernel meta = fit_kernel(config, data, atlas, config.lambda);
      const MetaShape shape = MetaShape::of(*atlas, tasks_m, config.n);
      const BoTrace trace = run_gp_ucb(fn, config.sigma, derive_seed(base, 3), meta, theory,
                                       config.T, candidates, shape);
      meta_end[static_cast<size_t>(mi)][static_cast<size_t>(i)] = cumulative_inference_at_end(trace);
    }
  });

  ConsistencyResult result;
  result.m_values = config.m_values;
  result.oracle_mean = mean(oracle_end);
  result.oracle_std = stddev(oracle_end);
  for (int mi = 0; mi < sweep; ++mi) {
    result.meta_mean.push_back(mean(meta_end[static_cast<size_t>(mi)]));
    result.meta_std.push_back(stddev(meta_end[static_cast<size_t>(mi)]));
  }

  std::string csv = "m,R_mean_meta,R_std_meta,R_mean_oracle,R_std_oracle\n";
  for (int mi = 0; mi < sweep; ++mi) {
    csv += join_row({std::to_string(config.m_values[static_cast<size_t>(mi)]),
                     format_double(result.meta_mean[static_cast<size_t>(mi)]),
                     format_double(result.meta_std[static_cast<size_t>(mi)]),
                     format_double(result.oracle_mean), format_double(result.oracle_std)});
  }
  result.csv = std::move(csv);
  return result;
}

LambdaSweepResult run_lambda_sweep(const ExperimentConfig& config) {
  config.validate();
  const AtlasPtr atlas = make_atlas(config);
  const TrueKernelSpec spec = sample_true_kernel(atlas, config.s, derive_seed(config.seed, 7));
  const std::vector<Eigen::VectorXd> candidates = make_candidates(config, *atlas);
  const TheoryParams theory = theory_of(config);
  const MetaShape shape = MetaShape::of(*atlas, config.m, config.n);
  const int sweep = static_cast<int>(config.lambda_values.size());

  std::vector<std::vector<double>> inference(static_cast<size_t>(sweep),
                                             std::vector<double>(static_cast<size_t>(config.runs)));
  std::vector<std::vector<double>> simple(static_cast<size_t>(sweep),
                                          std::vector<double>(static_cast<size_t>(config.runs)));

  parallel_for(config.runs, config.threads, [&](int i) {
    const std::uint64_t base = derive_seed(config.seed, 400 + static_cast<std::uint64_t>(i));
    // Data and reward are shared across the lambda sweep (paired comparison).
    const auto tasks = sample_task_functions(spec, config.m, config.B, derive_seed(base, 1));
    const MetaDataset data = generate_meta_data(spec, tasks, config.n, config.sigma,
                                                derive_seed(base, 2), noise_of(config));
    const TaskFunction reward = make_reward(spec, config.B, derive_seed(base, 3));
    const RewardFn fn = [&reward](const Eigen::VectorXd& x) { return reward.eval(x); };
    for (int li = 0; li < sweep; ++li) {
      const MetaKernel meta =
          fit_kernel(config, data, atlas, config.lambda_values[static_cast<size_t>(li)]);
      const BoTrace trace = run_gp_ucb(fn, config.sigma, derive_seed(base, 4), meta, theory,
                                       config.T, candidates, shape);
      inference[static_cast<size_t>(li)][static_cast<size_t>(i)] =
          cumulative_inference_at_end(trace);
      simple[static_cast<size_t>(li)][static_cast<size_t>(i)] = trace.simple_regret.back();
    }
  });

  LambdaSweepResult result;
  result.lambdas = config.lambda_values;
  result.floor = lambda_lower_bound(config.sigma, config.m, config.n, atlas->group_count(),
                                    atlas->max_group_dim(), config.delta);
  std::string csv = "lambda,below_floor,R_mean_meta,R_std_meta,r_mean_meta,r_std_meta\n";
  for (int li = 0; li < sweep; ++li) {
    result.below_floor.push_back(config.lambda_values[static_cast<size_t>(li)] < result.floor);
    result.inference_mean.push_back(mean(inference[static_cast<size_t>(li)]));
    result.inference_std.push_back(stddev(inference[static_cast<size_t>(li)]));
    result.simple_mean.push_back(mean(simple[static_cast<size_t>(li)]));
    result.simple_std.push_back(stddev(simple[static_cast<size_t>(li)]));
    csv += join_row({format_double(config.lambda_values[static_cast<size_t>(li)]),
                     result.below_floor.back() ? "1" : "0",
                     format_double(result.inference_mean.back()),
                     format_double(result.inference_std.back()),
                     format_double(result.simple_mean.back()),
                     format_double(result.simple_std.back())});
  }
  result.csv = std::move(csv);
  return result;
}

LookupBoResult run_lookup_bo(const ExperimentConfig& config,
                             const std::vector<LookupTable>& meta_tables,
                             const std::vector<LookupTable>& test_tables) {
  config.validate();
  require(!meta_tables.empty() && !test_tables.empty(),
          "run_lookup_bo: need meta and test tables");
  const int dim = meta_tables.front().input_dim();
  for (const auto& t : meta_tables) {
    require(t.input_dim() == dim && t.rows() > 0, "run_lookup_bo: inconsistent meta table");
  }
  for (const auto& t : test_tables) {
    require(t.input_dim() == dim && t.rows() > 0, "run_lookup_bo: inconsistent test table");
  }

  // Domain box covering every table, padded so boundary rows stay interior.
  Eigen::VectorXd lower = meta_tables.front().inputs.colwise().minCoeff().transpose();
  Eigen::VectorXd upper = meta_tables.front().inputs.colwise().maxCoeff().transpose();
  auto widen = [&](const LookupTable& t) {
    lower = lower.cwiseMin(t.inputs.colwise().minCoeff().transpose());
    upper = upper.cwiseMax(t.inputs.colwise().maxCoeff().transpose());
  };
  for (const auto& t : meta_tables) widen(t);
  for (const auto& t : test_tables) widen(t);
  for (int c = 0; c < dim; ++c) {
    const double pad = std::max(0.05 * (upper[c] - lower[c]), 0.5);
    lower[c] -= pad;
    upper[c] += pad;
  }

  const AtlasPtr atlas = std::make_shared<const FeatureAtlas>(FeatureAtlas::random_fourier(
      config.atlas.rff_features, config.atlas.rff_lengthscale, config.atlas.rff_groups,
      derive_seed(config.seed, 8), DomainSpec::box(lower, upper)));

  // One task per meta table, n subsampled rows each (every table contributes
  // the same count so the multi-task design stays balanced).
  int rows_per_task = config.n;
  for (const auto& t : meta_tables) rows_per_task = std::min(rows_per_task, t.rows());
  MetaDataset data;
  for (size_t s = 0; s < meta_tables.size(); ++s) {
    const LookupTable& t = meta_tables[s];
    Rng rng(derive_seed(config.seed, 500 + static_cast<std::uint64_t>(s)));
    std::vector<int> order(static_cast<size_t>(t.rows()));
    for (int r = 0; r < t.rows(); ++r) order[static_cast<size_t>(r)] = r;
    for (int r = 0; r < rows_per_task; ++r) {
      const auto k = r + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(t.rows() - r)));
      std::swap(order[static_cast<size_t>(r)], order[static_cast<size_t>(k)]);
    }
    Eigen::MatrixXd x(rows_per_task, dim);
    Eigen::VectorXd y(rows_per_task);
    for (int r = 0; r < rows_per_task; ++r) {
      x.row(r) = t.inputs.row(order[static_cast<size_t>(r)]);
      y[r] = t.objective[order[static_cast<size_t>(r)]];
    }
    data.inputs.push_back(std::move(x));
    data.labels.push_back(std::move(y));
  }

  const MetaKernel meta = fit_kernel(config, data, atlas, config.lambda);
  const MetaKernel baseline = uniform_kernel(atlas);
  const TheoryParams theory = theory_of(config);
  const MetaShape shape =
      MetaShape::of(*atlas, static_cast<int>(meta_tables.size()), rows_per_task);

  const std::vector<std::string> kernels = {"meta", "se_rff"};
  const int jobs = static_cast<int>(test_tables.size()) * config.lookup_runs;
  std::vector<std::vector<BoTrace>> traces(kernels.size(),
                                           std::vector<BoTrace>(static_cast<size_t>(jobs)));

  parallel_for(jobs, config.threads, [&](int job) {
    const int table_index = job / config.lookup_runs;
    const int run = job % config.lookup_runs;
    const LookupTable& table = test_tables[static_cast<size_t>(table_index)];
    std::vector<Eigen::VectorXd> candidates;
    candidates.reserve(static_cast<size_t>(table.rows()));
    for (int r = 0; r < table.rows(); ++r) candidates.push_back(table.inputs.row(r).transpose());
    const std::uint64_t base =
        derive_seed(config.seed, 600 + static_cast<std::uint64_t>(table_index) * 1000 +
                                     static_cast<std::uint64_t>(run));
    const MetaKernel* arms[] = {&meta, &baseline};
    for (size_t a = 0; a < kernels.size(); ++a) {
      traces[a][static_cast<size_t>(job)] =
          run_gp_ucb_values(table.objective, config.sigma, derive_seed(base, a), *arms[a], theory,
                            config.T, candidates, shape);
    }
  });

  LookupBoResult result;
  result.kernels = kernels;
  for (size_t a = 0; a < kernels.size(); ++a) {
    Eigen::MatrixXd cum(jobs, config.T);
    Eigen::MatrixXd simple(jobs, config.T);
    for (int j = 0; j < jobs; ++j) {
      const BoTrace& tr = traces[a][static_cast<size_t>(j)];
      double acc = 0.0;
      for (int t = 0; t < config.T; ++t) {
        acc += tr.best_value - tr.reward_noiseless[static_cast<size_t>(t)];
        cum(j, t) = acc;
        simple(j, t) = tr.simple_regret[static_cast<size_t>(t)];
      }
    }
    const auto col_mean = [&](const Eigen::MatrixXd& mat) {
      return Eigen::VectorXd(mat.colwise().mean());
    };
    const auto col_std = [&](const Eigen::MatrixXd& mat, const Eigen::VectorXd& mu) {
      Eigen::VectorXd out(mat.cols());
      for (Eigen::Index c = 0; c < mat.cols(); ++c) {
        out[c] = std::sqrt((mat.col(c).array() - mu[c]).square().mean());
      }
      return out;
    };
    result.cum_regret_mean.push_back(col_mean(cum));
    result.cum_regret_std.push_back(col_std(cum, result.cum_regret_mean.back()));
    result.simple_mean.push_back(col_mean(simple));
    result.simple_std.push_back(col_std(simple, result.simple_mean.back()));
  }

  std::string csv = "step";
  for (const auto& k : kernels) csv += ",cum_mean_" + k + ",cum_std_" + k;
  for (const auto& k : kernels) csv += ",r_mean_" + k + ",r_std_" + k;
  csv += '\n';
  for (int t = 0; t < config.T; ++t) {
    std::vector<std::string> row = {std::to_string(t + 1)};
    for (size_t a = 0; a < kernels.size(); ++a) {
      row.push_back(format_double(result.cum_regret_mean[a][t]));
      row.push_back(format_double(result.cum_regret_std[a][t]));
    }
    for (size_t a = 0; a < kernels.size(); ++a) {
      row.push_back(format_double(result.simple_mean[a][t]));
      row.push_back(format_double(result.simple_std[a][t]));
    }
    csv += join_row(row);
  }
  result.csv = std::move(csv);
  return result;
}

std::string gen_data_csv(const ExperimentConfig& config) {
  config.validate();
  const AtlasPtr atlas = make_atlas(config);
  const TrueKernelSpec spec = sample_true_kernel(atlas, config.s, derive_seed(config.seed, 7));
  const auto tasks = sample_task_functions(spec, config.m, config.B, derive_seed(config.seed, 30));
  const MetaDataset data = generate_meta_data(spec, tasks, config.n, config.sigma,
                                              derive_seed(config.seed, 31), noise_of(config));

  const int d0 = atlas->input_dim();
  std::string csv = "task";
  for (int c = 0; c < d0; ++c) csv += ",x" + std::to_string(c + 1);
  csv += ",y\n";
  for (int s = 0; s < data.task_count(); ++s) {
    for (int i = 0; i < data.samples_per_task(); ++i) {
      std::vector<std::string> row = {std::to_string(s)};
      for (int c = 0; c < d0; ++c) {
        row.push_back(format_double(data.inputs[static_cast<size_t>(s)](i, c)));
      }
      row.push_back(format_double(data.labels[static_cast<size_t>(s)][i]));
      csv += join_row(row);
    }
  }
  return csv;
}

MetaDataset load_meta_data_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("load_meta_data_csv: cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "load_meta_data_csv: empty file " + path);
  const auto header = split_csv_line(line);
  require(header.size() >= 3 && header.front() == "task" && header.back() == "y",
          "load_meta_data_csv: expected header task,x...,y in " + path);
  const int d0 = static_cast<int>(header.size()) - 2;

  std::vector<std::string> task_order;
  std::map<std::string, std::vector<std::pair<Eigen::VectorXd, double>>> by_task;
  int row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    require(cells.size() == header.size(),
            "load_meta_data_csv: wrong cell count at row " + std::to_string(row_number));
    Eigen::VectorXd x(d0);
    for (int c = 0; c < d0; ++c) x[c] = std::stod(cells[static_cast<size_t>(c + 1)]);
    const double y = std::stod(cells.back());
    if (by_task.find(cells[0]) == by_task.end()) task_order.push_back(cells[0]);
    by_task[cells[0]].emplace_back(std::move(x), y);
  }
  require(!by_task.empty(), "load_meta_data_csv: no rows in " + path);

  MetaDataset data;
  for (const auto& task : task_order) {
    const auto& rows = by_task[task];
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), d0);
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (size_t r = 0; r < rows.size(); ++r) {
      x.row(static_cast<Eigen::Index>(r)) = rows[r].first;
      y[static_cast<Eigen::Index>(r)] = rows[r].second;
    }
    data.inputs.push_back(std::move(x));
    data.labels.push_back(std::move(y));
  }
  data.validate();
  return data;
}

std::vector<LookupTable> make_synthetic_lookup_tables(const ExperimentConfig& config, int tables,
                                                      int rows, std::uint64_t seed) {
  require(tables >= 1 && rows >= 1, "make_synthetic_lookup_tables: need tables and rows");
  const AtlasPtr atlas = std::make_shared<const FeatureAtlas>(FeatureAtlas::random_fourier(
      config.atlas.rff_features, 2, config.atlas.rff_lengthscale, config.atlas.rff_groups,
      derive_seed(seed, 1)));
  const TrueKernelSpec spec = sample_true_kernel(atlas, config.s, derive_seed(seed, 2));

  std::vector<LookupTable> out;
  for (int i = 0; i < tables; ++i) {
    const TaskFunction f =
        sample_task_function(spec, config.B, derive_seed(seed, 10 + static_cast<std::uint64_t>(i)));
    Rng rng(derive_seed(seed, 100 + static_cast<std::uint64_t>(i)));
    LookupTable t;
    t.task_id = "synthetic" + std::to_string(i);
    t.column_names = {"hp1", "hp2"};
    t.inputs.resize(rows, 2);
    t.objective.resize(rows);
    for (int r = 0; r < rows; ++r) {
      const Eigen::VectorXd x = atlas->domain().sample(rng);
      t.inputs.row(r) = x;
      t.objective[r] = f.eval(x);
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace mkbo
