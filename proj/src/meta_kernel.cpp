#include "mkbo/meta_kernel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mkbo {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

void TheoryParams::validate() const {
  require(noise_sigma >= 0.0, "TheoryParams: noise sigma must be non-negative");
  require(failure_prob > 0.0 && failure_prob < 1.0, "TheoryParams: failure_prob must be in (0,1)");
  require(norm_bound > 0.0, "TheoryParams: norm bound must be positive");
  require(sparsity >= 1, "TheoryParams: sparsity must be at least 1");
  require(kappa > 0.0, "TheoryParams: kappa must be positive");
}

MetaKernel::MetaKernel(AtlasPtr atlas, Eigen::VectorXd weights, double weight_scale,
                       bool meta_learned)
    : atlas_(std::move(atlas)),
      weights_(std::move(weights)),
      weight_scale_(weight_scale),
      meta_learned_(meta_learned) {
  require(atlas_ != nullptr, "MetaKernel: atlas required");
  require(weights_.size() == atlas_->group_count(), "MetaKernel: one weight per group");
  require(weight_scale_ > 0.0, "MetaKernel: weight scale must be positive");
  for (Eigen::Index j = 0; j < weights_.size(); ++j) {
    require(weights_[j] >= 0.0, "MetaKernel: weights must be non-negative");
    if (weights_[j] > 0.0) {
      active_set_.push_back(static_cast<int>(j));
      effective_dim_ += atlas_->group_dim(static_cast<int>(j));
    }
  }
}

Eigen::VectorXd MetaKernel::weighted_features(const Eigen::VectorXd& x) const {
  Eigen::VectorXd stacked = atlas_->stack(x);
  Eigen::VectorXd out(effective_dim_);
  int pos = 0;
  for (int j : active_set_) {
    const int dj = atlas_->group_dim(j);
    out.segment(pos, dj) = std::sqrt(weights_[j]) * stacked.segment(atlas_->group_offset(j), dj);
    pos += dj;
  }
  return out;
}

Eigen::MatrixXd MetaKernel::weighted_feature_rows(const std::vector<Eigen::VectorXd>& points) const {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(points.size()), effective_dim_);
  for (size_t r = 0; r < points.size(); ++r) {
    rows.row(static_cast<Eigen::Index>(r)) = weighted_features(points[r]);
  }
  return rows;
}

double MetaKernel::eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  if (effective_dim_ == 0) {
    // still validate inputs against the domain
    if (!atlas_->domain().contains(x) || !atlas_->domain().contains(y))
      throw std::invalid_argument("MetaKernel: point outside the domain");
    return 0.0;
  }
  return weighted_features(x).dot(weighted_features(y));
}

double lambda_lower_bound(double noise_sigma, int tasks, int samples_per_task, int group_count,
                          int max_group_dim, double failure_prob) {
  require(noise_sigma >= 0.0, "lambda_lower_bound: sigma must be non-negative");
  require(tasks >= 1 && samples_per_task >= 1, "lambda_lower_bound: m, n must be positive");
  require(group_count >= 1 && max_group_dim >= 1, "lambda_lower_bound: p, d_max must be positive");
  require(failure_prob > 0.0 && failure_prob < 1.0, "lambda_lower_bound: delta must be in (0,1)");
  const double m = tasks;
  const double mn = m * samples_per_task;
  const double log_term = std::log(2.0 * group_count / failure_prob);
  const double bracket = log_term + std::sqrt(m * max_group_dim * log_term);
  return 4.0 * noise_sigma / std::sqrt(mn) * std::sqrt(1.0 + (2.0 / m) * bracket);
}

double meta_error_bound(double noise_sigma, int sparsity, double kappa, int tasks,
                        int samples_per_task, int group_count, int max_group_dim,
                        double failure_prob) {
  require(kappa > 0.0, "meta_error_bound: kappa must be positive");
  require(sparsity >= 1, "meta_error_bound: sparsity must be at least 1");
  return (8.0 * sparsity / (kappa * kappa)) *
         lambda_lower_bound(noise_sigma, tasks, samples_per_task, group_count, max_group_dim,
                            failure_prob);
}

MetaKernelFit fit_meta_kernel(const MetaDataset& data, const AtlasPtr& atlas, double lambda,
                              double weight_scale, const SolverOptions& opts) {
  require(atlas != nullptr, "fit_meta_kernel: atlas required");
  require(lambda > 0.0, "fit_meta_kernel: lambda must be positive");
  require(weight_scale > 0.0, "fit_meta_kernel: weight scale must be positive");
  GroupLassoProblem problem = make_problem(data, *atlas, lambda);
  GroupLassoFit fit = solve_fista(problem, opts);
  MetaKernel kernel = meta_kernel_from_norms(atlas, fit.group_norms, weight_scale);
  return {std::move(kernel), std::move(fit)};
}

MetaKernel meta_kernel_from_norms(const AtlasPtr& atlas, const Eigen::VectorXd& group_norms,
                                  double weight_scale, bool meta_learned) {
  return MetaKernel(atlas, group_norms / weight_scale, weight_scale, meta_learned);
}

MetaKernel uniform_kernel(const AtlasPtr& atlas) {
  require(atlas != nullptr, "uniform_kernel: atlas required");
  const int p = atlas->group_count();
  return MetaKernel(atlas, Eigen::VectorXd::Constant(p, 1.0 / p), 1.0, /*meta_learned=*/false);
}

double sparsity_bound(int sparsity, int tasks, int samples_per_task, double kappa) {
  require(kappa > 0.0, "sparsity_bound: kappa must be positive");
  require(sparsity >= 1 && tasks >= 1 && samples_per_task >= 1,
          "sparsity_bound: sizes must be positive");
  return 64.0 * sparsity /
         (static_cast<double>(tasks) * samples_per_task * kappa * kappa);
}

double kappa_proxy(const std::vector<Eigen::MatrixXd>& task_features) {
  require(!task_features.empty(), "kappa_proxy: need at least one task");
  double min_sv = std::numeric_limits<double>::infinity();
  Eigen::Index n_total = 0;
  for (const auto& phi : task_features) {
    n_total += phi.rows();
    if (phi.rows() < phi.cols()) return 0.0;  // nontrivial null space
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(phi);
    min_sv = std::min(min_sv, svd.singularValues().minCoeff());
  }
  return min_sv / std::sqrt(static_cast<double>(n_total));
}

double kappa_proxy(const MetaDataset& data, const FeatureAtlas& atlas) {
  data.validate();
  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(static_cast<size_t>(data.task_count()));
  for (int s = 0; s < data.task_count(); ++s) {
    const auto& x = data.inputs[static_cast<size_t>(s)];
    Eigen::MatrixXd phi(x.rows(), atlas.total_dim());
    for (Eigen::Index i = 0; i < x.rows(); ++i) phi.row(i) = atlas.stack(x.row(i).transpose());
    blocks.push_back(std::move(phi));
  }
  return kappa_proxy(blocks);
}

double rkhs_norm_bound(double norm_bound, double epsilon, double weight_scale) {
  require(norm_bound > 0.0, "rkhs_norm_bound: norm bound must be positive");
  require(epsilon >= 0.0, "rkhs_norm_bound: epsilon must be non-negative");
  require(weight_scale > 0.0, "rkhs_norm_bound: scale must be positive");
  if (epsilon >= weight_scale) {
    throw std::invalid_argument("rkhs_norm_bound: requires epsilon < scale");
  }
  return norm_bound / std::sqrt(1.0 - epsilon / weight_scale);
}

}  // namespace mkbo
