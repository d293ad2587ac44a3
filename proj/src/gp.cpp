#include "mkbo/gp.hpp"

#include <cmath>
#include <stdexcept>

namespace mkbo {

namespace {

constexpr double kVarianceSlack = 1e-10;

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

GpPosterior::GpPosterior(MetaKernel kernel, std::vector<Eigen::VectorXd> points,
                         Eigen::VectorXd values, double noise_var)
    : kernel_(std::move(kernel)), points_(std::move(points)), noise_var_(noise_var) {
  require(noise_var_ > 0.0, "GpPosterior: noise variance must be positive");
  require(values.size() == static_cast<Eigen::Index>(points_.size()),
          "GpPosterior: history sizes must match");
  const Eigen::Index h = values.size();
  history_features_ = kernel_.weighted_feature_rows(points_);
  if (h == 0) return;
  Eigen::MatrixXd gram = history_features_ * history_features_.transpose();
  gram.diagonal().array() += noise_var_;
  llt_.compute(gram);
  if (llt_.info() != Eigen::Success) {
    throw std::runtime_error("GpPosterior: Cholesky factorization failed");
  }
  alpha_ = llt_.solve(values);
}

Eigen::VectorXd GpPosterior::cross_column(const Eigen::VectorXd& x) const {
  return history_features_ * kernel_.weighted_features(x);
}

std::pair<double, double> GpPosterior::mean_var(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd phi = kernel_.weighted_features(x);
  const double prior = phi.squaredNorm();
  if (history_size() == 0) return {0.0, prior};
  const Eigen::VectorXd k_vec = history_features_ * phi;
  const double mean = k_vec.dot(alpha_);
  const Eigen::VectorXd v = llt_.matrixL().solve(k_vec);
  double variance = prior - v.squaredNorm();
  if (variance < -kVarianceSlack) {
    throw std::runtime_error("GpPosterior: negative variance beyond tolerance");
  }
  return {mean, std::max(variance, 0.0)};
}

void GpPosterior::mean_var_cross(const Eigen::MatrixXd& cross, const Eigen::VectorXd& prior_diag,
                                 Eigen::VectorXd& mean_out, Eigen::VectorXd& var_out) const {
  require(cross.rows() == history_size(), "mean_var_cross: cross matrix height mismatch");
  require(cross.cols() == prior_diag.size(), "mean_var_cross: diagonal size mismatch");
  if (history_size() == 0) {
    mean_out = Eigen::VectorXd::Zero(prior_diag.size());
    var_out = prior_diag;
    return;
  }
  mean_out = cross.transpose() * alpha_;
  const Eigen::MatrixXd v = llt_.matrixL().solve(cross);
  var_out = prior_diag - v.colwise().squaredNorm().transpose();
  for (Eigen::Index i = 0; i < var_out.size(); ++i) {
    if (var_out[i] < -kVarianceSlack) {
      throw std::runtime_error("GpPosterior: negative variance beyond tolerance");
    }
    var_out[i] = std::max(var_out[i], 0.0);
  }
}

GpPosterior posterior(const MetaKernel& kernel, const History& history, int t) {
  require(t >= 1, "posterior: t must be at least 1");
  require(history.size() == t - 1, "posterior: history must hold t-1 observations");
  return posterior_with_noise(kernel, history, sigma_bar_sq(t));
}

GpPosterior posterior_with_noise(const MetaKernel& kernel, const History& history,
                                 double noise_var) {
  Eigen::VectorXd y(history.size());
  for (int i = 0; i < history.size(); ++i) y[i] = history.values[static_cast<size_t>(i)];
  return GpPosterior(kernel, history.points, std::move(y), noise_var);
}

double exploration_coefficient(const TheoryParams& theory, const MetaKernel& kernel, int t,
                               const MetaShape& shape) {
  theory.validate();
  require(t >= 1, "exploration_coefficient: t must be at least 1");
  const double scale = kernel.weight_scale();
  double epsilon = 0.0;
  double bandit_delta = theory.failure_prob;
  if (kernel.meta_learned()) {
    const double half = 0.5 * theory.failure_prob;
    epsilon = meta_error_bound(theory.noise_sigma, theory.sparsity, theory.kappa, shape.tasks,
                               shape.samples_per_task, shape.group_count, shape.max_group_dim,
                               half);
    bandit_delta = half;
  }
  const double d_hat = kernel.effective_dim();
  const double log_arg = 1.0 + static_cast<double>(t) / (sigma_bar_sq(t) * scale);
  return theory.norm_bound * (1.0 + epsilon / (2.0 * scale)) +
         theory.noise_sigma *
             std::sqrt(d_hat * std::log(log_arg) + 2.0 + 2.0 * std::log(1.0 / bandit_delta));
}

ConfidenceBand confidence_band(const GpPosterior& post, double nu,
                               const std::vector<Eigen::VectorXd>& query, double level) {
  require(nu >= 0.0, "confidence_band: nu must be non-negative");
  ConfidenceBand band;
  band.points = query;
  band.level = level;
  band.mean.resize(static_cast<Eigen::Index>(query.size()));
  band.halfwidth.resize(static_cast<Eigen::Index>(query.size()));
  for (size_t i = 0; i < query.size(); ++i) {
    const auto [mu, var] = post.mean_var(query[i]);
    band.mean[static_cast<Eigen::Index>(i)] = mu;
    band.halfwidth[static_cast<Eigen::Index>(i)] = nu * std::sqrt(var);
  }
  return band;
}

double info_gain_bound(int effective_dim, int t, double weight_scale, double sigma_bar_sq) {
  require(effective_dim >= 0, "info_gain_bound: dimension must be non-negative");
  require(t >= 0, "info_gain_bound: t must be non-negative");
  require(weight_scale > 0.0 && sigma_bar_sq > 0.0, "info_gain_bound: scales must be positive");
  return 0.5 * effective_dim * std::log(1.0 + t / (sigma_bar_sq * weight_scale));
}

double empirical_info_gain(const MetaKernel& kernel, const std::vector<Eigen::VectorXd>& points,
                           double sigma_bar_sq) {
  require(sigma_bar_sq > 0.0, "empirical_info_gain: noise variance must be positive");
  if (points.empty()) return 0.0;
  const Eigen::MatrixXd feats = kernel.weighted_feature_rows(points);
  Eigen::MatrixXd m = (feats * feats.transpose()) / sigma_bar_sq;
  m.diagonal().array() += 1.0;
  const Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("empirical_info_gain: factorization failed");
  }
  return Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
}

}  // namespace mkbo
