#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mkbo/glasso.hpp"
#include "mkbo/meta_kernel.hpp"

namespace mkbo {

// Ground-truth sparse kernel: s active groups with normalized non-negative
// weights (|weights|_1 = 1 over the support).
struct TrueKernelSpec {
  AtlasPtr atlas;
  Eigen::VectorXd weights;    // length p, zero off the support
  std::vector<int> support;   // ascending group indices, |support| = s
  std::uint64_t seed = 0;
};

// One target function f(x) = sum_j sqrt(w_j) phi_j(x)' coef^(j). Coefficients
// live in the sqrt-weighted basis, so |coef|_2 is exactly the kernel norm of f.
struct TaskFunction {
  AtlasPtr atlas;
  Eigen::VectorXd sqrt_weights;  // per group, expanded from the true kernel
  Eigen::VectorXd coef;          // length d, zero outside the support blocks

  double eval(const Eigen::VectorXd& x) const;
  double norm() const { return coef.norm(); }
};

// Support drawn uniformly among s-subsets; weights iid U(0,1) on the support,
// then normalized to unit l1 norm.
TrueKernelSpec sample_true_kernel(const AtlasPtr& atlas, int sparsity, std::uint64_t seed);

// One task: a uniformly random non-empty subset of the support, blocks filled
// iid U(0,1), rescaled so the coefficient norm is exactly norm_bound.
TaskFunction sample_task_function(const TrueKernelSpec& spec, double norm_bound,
                                  std::uint64_t seed);

// m tasks with coverage enforced by rejection: resample until every support
// group is used by at least one task. Passing enforce_coverage = false keeps
// whatever the independent subset draws produce, so small task counts may
// leave support groups unrepresented.
std::vector<TaskFunction> sample_task_functions(const TrueKernelSpec& spec, int tasks,
                                                double norm_bound, std::uint64_t seed,
                                                bool enforce_coverage = true);

// The reward for the bandit simulation is one more task-style draw.
TaskFunction make_reward(const TrueKernelSpec& spec, double norm_bound, std::uint64_t seed);

// A Gaussian draw from the prior with the true kernel as covariance:
// coefficients iid standard normal on the support blocks, no rescaling.
TaskFunction sample_gp_test_function(const TrueKernelSpec& spec, std::uint64_t seed);

enum class NoiseKind { Gaussian, UniformBounded };

// Inputs uniform on the atlas domain, labels f_s(x) + noise, deterministic
// per seed. UniformBounded draws noise uniform on [-sigma*sqrt(3), sigma*sqrt(3)]
// (same variance as the Gaussian choice).
MetaDataset generate_meta_data(const TrueKernelSpec& spec, const std::vector<TaskFunction>& tasks,
                               int samples_per_task, double noise_sigma, std::uint64_t seed,
                               NoiseKind noise = NoiseKind::Gaussian);

// The true kernel as a MetaKernel (weights scaled by `scale`), for use as the
// oracle arm or the calibration reference.
MetaKernel to_meta_kernel(const TrueKernelSpec& spec, double scale = 1.0);

// Smallest pooled group norm over the support, in the solver's coordinates
// (blocks pre-multiplied by sqrt(w_j)). The realized lower constant of the
// group-floor assumption for this dataset.
double empirical_group_floor(const TrueKernelSpec& spec, const std::vector<TaskFunction>& tasks);

}  // namespace mkbo
