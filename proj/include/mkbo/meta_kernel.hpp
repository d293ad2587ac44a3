#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mkbo/features.hpp"
#include "mkbo/glasso.hpp"

namespace mkbo {

// Problem-size tuple the theory formulas depend on.
struct MetaShape {
  int tasks = 0;            // m
  int samples_per_task = 0; // n
  int group_count = 0;      // p
  int max_group_dim = 0;    // d_max

  static MetaShape of(const FeatureAtlas& atlas, int tasks, int samples_per_task) {
    return {tasks, samples_per_task, atlas.group_count(), atlas.max_group_dim()};
  }
};

// Constants of the data model used by the bounds and the exploration
// coefficient: noise scale, failure probability, RKHS norm bound, sparsity
// level and the restricted-eigenvalue constant.
struct TheoryParams {
  double noise_sigma = 0.01;
  double failure_prob = 0.1;
  double norm_bound = 10.0;
  int sparsity = 5;
  double kappa = 1.0;

  void validate() const;
};

// A non-negative combination of the atlas base kernels:
//   k(x, x') = sum_j weights[j] * phi_j(x)' phi_j(x')
// with weights[j] = raw group weight / weight_scale. Immutable; queries are
// thread-safe.
class MetaKernel {
 public:
  MetaKernel(AtlasPtr atlas, Eigen::VectorXd weights, double weight_scale, bool meta_learned);

  const FeatureAtlas& atlas() const { return *atlas_; }
  const AtlasPtr& atlas_ptr() const { return atlas_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  double weight_scale() const { return weight_scale_; }
  bool meta_learned() const { return meta_learned_; }
  const std::vector<int>& active_set() const { return active_set_; }
  int effective_dim() const { return effective_dim_; }  // sum of d_j over active groups

  double eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;

  // sqrt(weights[j]) * phi_j(x) over the active groups, concatenated; the
  // kernel is the plain dot product of these vectors.
  Eigen::VectorXd weighted_features(const Eigen::VectorXd& x) const;

  // Row r = weighted_features(points[r]).
  Eigen::MatrixXd weighted_feature_rows(const std::vector<Eigen::VectorXd>& points) const;

 private:
  AtlasPtr atlas_;
  Eigen::VectorXd weights_;
  double weight_scale_;
  bool meta_learned_;
  std::vector<int> active_set_;
  int effective_dim_ = 0;
};

struct MetaKernelFit {
  MetaKernel kernel;
  GroupLassoFit fit;
};

// Smallest regularization level that controls the noise term:
//   (4 sigma / sqrt(mn)) sqrt(1 + (2/m)(log(2p/delta) + sqrt(m d_max log(2p/delta)))).
double lambda_lower_bound(double noise_sigma, int tasks, int samples_per_task, int group_count,
                          int max_group_dim, double failure_prob);

// Estimation error level of the meta-learned kernel,
//   (32 sigma s / (kappa^2 sqrt(mn))) * sqrt(1 + ...) = (8 s / kappa^2) * lambda_lower_bound.
double meta_error_bound(double noise_sigma, int sparsity, double kappa, int tasks,
                        int samples_per_task, int group_count, int max_group_dim,
                        double failure_prob);

// Solve the multi-task group Lasso on (data, atlas) and assemble the kernel
// with weights = pooled group norms / weight_scale. A non-converged solve is
// reported through fit.converged, not an exception.
MetaKernelFit fit_meta_kernel(const MetaDataset& data, const AtlasPtr& atlas, double lambda,
                              double weight_scale = 1.0, const SolverOptions& opts = {});

// Kernel from precomputed pooled group norms.
MetaKernel meta_kernel_from_norms(const AtlasPtr& atlas, const Eigen::VectorXd& group_norms,
                                  double weight_scale, bool meta_learned = true);

// The conservative no-data baseline: every group weighted 1/p.
MetaKernel uniform_kernel(const AtlasPtr& atlas);

// Bound on the number of active groups of the fitted kernel: 64 s / (mn kappa^2).
double sparsity_bound(int sparsity, int tasks, int samples_per_task, double kappa);

// Computable lower-bound surrogate for the restricted-eigenvalue constant:
// min over tasks of the smallest singular value of Phi_s, divided by
// sqrt(mn). This is a spectral proxy, not the combinatorial constant; a
// rank-deficient design returns 0.
double kappa_proxy(const std::vector<Eigen::MatrixXd>& task_features);
double kappa_proxy(const MetaDataset& data, const FeatureAtlas& atlas);

// Norm inflation factor of the learned hypothesis space, in its exact
// pre-expansion form B / sqrt(1 - epsilon/scale). Dominates the first-order
// form B (1 + epsilon/(2 scale)); requires epsilon < scale.
double rkhs_norm_bound(double norm_bound, double epsilon, double weight_scale);

}  // namespace mkbo
