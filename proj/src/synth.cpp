#include "mkbo/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mkbo/rng.hpp"

namespace mkbo {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Uniformly random non-empty subset of `pool` (each element kept with
// probability 1/2, empty draws rejected).
std::vector<int> random_nonempty_subset(const std::vector<int>& pool, Rng& rng) {
  std::vector<int> subset;
  while (subset.empty()) {
    subset.clear();
    for (int j : pool) {
      if (rng.next_u64() & 1ULL) subset.push_back(j);
    }
  }
  return subset;
}

TaskFunction make_task(const TrueKernelSpec& spec, const std::vector<int>& blocks,
                       Rng& rng, double rescale_to, bool gaussian_coef) {
  const FeatureAtlas& atlas = *spec.atlas;
  TaskFunction f;
  f.atlas = spec.atlas;
  f.sqrt_weights = spec.weights.cwiseSqrt();
  f.coef = Eigen::VectorXd::Zero(atlas.total_dim());
  for (int j : blocks) {
    for (int r = 0; r < atlas.group_dim(j); ++r) {
      f.coef[atlas.group_offset(j) + r] = gaussian_coef ? rng.normal() : rng.uniform();
    }
  }
  if (rescale_to > 0.0) {
    const double norm = f.coef.norm();
    if (norm > 0.0) f.coef *= rescale_to / norm;
  }
  return f;
}

}  // namespace

double TaskFunction::eval(const Eigen::VectorXd& x) const {
  const FeatureAtlas& a = *atlas;
  const Eigen::VectorXd stacked = a.stack(x);
  double value = 0.0;
  for (int j = 0; j < a.group_count(); ++j) {
    if (sqrt_weights[j] == 0.0) continue;
    const int off = a.group_offset(j);
    const int dj = a.group_dim(j);
    value += sqrt_weights[j] * stacked.segment(off, dj).dot(coef.segment(off, dj));
  }
  return value;
}

TrueKernelSpec sample_true_kernel(const AtlasPtr& atlas, int sparsity, std::uint64_t seed) {
  require(atlas != nullptr, "sample_true_kernel: atlas required");
  const int p = atlas->group_count();
  require(sparsity >= 1 && sparsity <= p, "sample_true_kernel: sparsity must be in [1, p]");

  Rng rng(seed);
  // Partial Fisher-Yates draw of an s-subset.
  std::vector<int> pool(static_cast<size_t>(p));
  for (int j = 0; j < p; ++j) pool[static_cast<size_t>(j)] = j;
  for (int i = 0; i < sparsity; ++i) {
    const auto k = i + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(p - i)));
    std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(k)]);
  }
  std::vector<int> support(pool.begin(), pool.begin() + sparsity);
  std::sort(support.begin(), support.end());

  Eigen::VectorXd weights = Eigen::VectorXd::Zero(p);
  for (int j : support) weights[j] = rng.uniform();
  const double total = weights.sum();
  if (total > 0.0) weights /= total;

  TrueKernelSpec spec;
  spec.atlas = atlas;
  spec.weights = std::move(weights);
  spec.support = std::move(support);
  spec.seed = seed;
  return spec;
}

TaskFunction sample_task_function(const TrueKernelSpec& spec, double norm_bound,
                                  std::uint64_t seed) {
  require(norm_bound > 0.0, "sample_task_function: norm bound must be positive");
  Rng rng(seed);
  const std::vector<int> blocks = random_nonempty_subset(spec.support, rng);
  return make_task(spec, blocks, rng, norm_bound, /*gaussian_coef=*/false);
}

std::vector<TaskFunction> sample_task_functions(const TrueKernelSpec& spec, int tasks,
                                                double norm_bound, std::uint64_t seed,
                                                bool enforce_coverage) {
  require(tasks >= 1, "sample_task_functions: need at least one task");
  Rng rng(seed);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::vector<TaskFunction> out;
    out.reserve(static_cast<size_t>(tasks));
    std::vector<bool> covered(static_cast<size_t>(spec.atlas->group_count()), false);
    for (int s = 0; s < tasks; ++s) {
      const std::vector<int> blocks = random_nonempty_subset(spec.support, rng);
      for (int j : blocks) covered[static_cast<size_t>(j)] = true;
      out.push_back(make_task(spec, blocks, rng, norm_bound, /*gaussian_coef=*/false));
    }
    const bool all = std::all_of(spec.support.begin(), spec.support.end(),
                                 [&](int j) { return covered[static_cast<size_t>(j)]; });
    if (all || !enforce_coverage) return out;
  }
  throw std::runtime_error("sample_task_functions: could not cover the support");
}

TaskFunction make_reward(const TrueKernelSpec& spec, double norm_bound, std::uint64_t seed) {
  return sample_task_function(spec, norm_bound, seed);
}

TaskFunction sample_gp_test_function(const TrueKernelSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  return make_task(spec, spec.support, rng, /*rescale_to=*/0.0, /*gaussian_coef=*/true);
}

MetaDataset generate_meta_data(const TrueKernelSpec& spec, const std::vector<TaskFunction>& tasks,
                               int samples_per_task, double noise_sigma, std::uint64_t seed,
                               NoiseKind noise) {
  require(samples_per_task >= 1, "generate_meta_data: need at least one sample per task");
  require(noise_sigma >= 0.0, "generate_meta_data: noise sigma must be non-negative");
  require(!tasks.empty(), "generate_meta_data: need at least one task");
  const DomainSpec& domain = spec.atlas->domain();
  const int d0 = domain.input_dim();
  Rng rng(seed);
  MetaDataset data;
  data.inputs.reserve(tasks.size());
  data.labels.reserve(tasks.size());
  for (const TaskFunction& f : tasks) {
    Eigen::MatrixXd x(samples_per_task, d0);
    Eigen::VectorXd y(samples_per_task);
    for (int i = 0; i < samples_per_task; ++i) {
      const Eigen::VectorXd xi = domain.sample(rng);
      x.row(i) = xi;
      double eps = 0.0;
      if (noise_sigma > 0.0) {
        eps = (noise == NoiseKind::Gaussian)
                  ? noise_sigma * rng.normal()
                  : rng.uniform(-noise_sigma * std::sqrt(3.0), noise_sigma * std::sqrt(3.0));
      }
      y[i] = f.eval(xi) + eps;
    }
    data.inputs.push_back(std::move(x));
    data.labels.push_back(std::move(y));
  }
  return data;
}

MetaKernel to_meta_kernel(const TrueKernelSpec& spec, double scale) {
  require(scale > 0.0, "to_meta_kernel: scale must be positive");
  return MetaKernel(spec.atlas, spec.weights * scale, 1.0, /*meta_learned=*/false);
}

double empirical_group_floor(const TrueKernelSpec& spec, const std::vector<TaskFunction>& tasks) {
  require(!tasks.empty(), "empirical_group_floor: need tasks");
  const FeatureAtlas& atlas = *spec.atlas;
  double floor = std::numeric_limits<double>::infinity();
  for (int j : spec.support) {
    const int off = atlas.group_offset(j);
    const int dj = atlas.group_dim(j);
    double sq = 0.0;
    for (const TaskFunction& f : tasks) {
      sq += spec.weights[j] * f.coef.segment(off, dj).squaredNorm();
    }
    floor = std::min(floor, std::sqrt(sq));
  }
  return floor;
}

}  // namespace mkbo
