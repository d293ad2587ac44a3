#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "mkbo/meta_kernel.hpp"

namespace mkbo {

// Append-only observation record (x_tau, y_tau), tau = 1..t-1.
struct History {
  std::vector<Eigen::VectorXd> points;
  std::vector<double> values;

  void append(Eigen::VectorXd x, double y) {
    points.push_back(std::move(x));
    values.push_back(y);
  }
  int size() const { return static_cast<int>(points.size()); }
};

// GP regression posterior for a MetaKernel, in the dual (kernel-matrix) form:
//   mean(x) = k_h(x)' (K + s I)^-1 y
//   var(x)  = k(x,x) - k_h(x)' (K + s I)^-1 k_h(x)
// with s the assumed noise variance. The Gram matrix is factorized once
// (Cholesky; s >= sigma^2 > 0 keeps it SPD without jitter). Immutable after
// construction, so concurrent queries are safe.
class GpPosterior {
 public:
  GpPosterior(MetaKernel kernel, std::vector<Eigen::VectorXd> points, Eigen::VectorXd values,
              double noise_var);

  const MetaKernel& kernel() const { return kernel_; }
  double noise_var() const { return noise_var_; }
  int history_size() const { return static_cast<int>(points_.size()); }

  // Posterior mean and variance at one point. The raw variance is clamped at
  // zero from below; a raw value under -1e-10 signals a broken factorization
  // and throws.
  std::pair<double, double> mean_var(const Eigen::VectorXd& x) const;

  // Batched query from a precomputed cross matrix (history_size x q, entries
  // k(x_i, c_q)) and prior diagonal k(c_q, c_q). Same algebra as mean_var.
  void mean_var_cross(const Eigen::MatrixXd& cross, const Eigen::VectorXd& prior_diag,
                      Eigen::VectorXd& mean_out, Eigen::VectorXd& var_out) const;

  // Cross-kernel column k(x_i, x) against the stored history.
  Eigen::VectorXd cross_column(const Eigen::VectorXd& x) const;

 private:
  MetaKernel kernel_;
  std::vector<Eigen::VectorXd> points_;
  Eigen::MatrixXd history_features_;  // weighted features of the history rows
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;  // (K + s I)^-1 y
  double noise_var_;
};

// Posterior at querying step t with the time-varying noise level
// sigma_bar^2 = 1 + 2/t. The history must hold exactly t-1 observations.
GpPosterior posterior(const MetaKernel& kernel, const History& history, int t);

// Posterior with an explicit assumed noise variance (used where the
// observation model is known rather than the any-time bound recipe).
GpPosterior posterior_with_noise(const MetaKernel& kernel, const History& history,
                                 double noise_var);

inline double sigma_bar_sq(int t) { return 1.0 + 2.0 / t; }

// Exploration coefficient for the UCB policy at step t:
//   B (1 + eps/(2 c)) + sigma sqrt(d_hat log(1 + t / (sigma_bar^2 c)) + 2 + 2 log(1/delta'))
// with c the kernel weight scale and d_hat its effective dimension. For a
// meta-learned kernel the failure probability is split evenly between the
// meta-learning stage (inside eps) and the bandit stage; for a known kernel
// eps = 0 and the full budget goes to the bandit term.
double exploration_coefficient(const TheoryParams& theory, const MetaKernel& kernel, int t,
                               const MetaShape& shape);

struct ConfidenceBand {
  std::vector<Eigen::VectorXd> points;
  Eigen::VectorXd mean;
  Eigen::VectorXd halfwidth;
  double level = 0.0;  // nominal 1 - delta
};

// Band [mean - nu sigma, mean + nu sigma] at each query point.
ConfidenceBand confidence_band(const GpPosterior& post, double nu,
                               const std::vector<Eigen::VectorXd>& query, double level);

// Information-gain cap for a finite-dimensional kernel:
//   (d_hat / 2) log(1 + t / (sigma_bar^2 * scale)).
double info_gain_bound(int effective_dim, int t, double weight_scale, double sigma_bar_sq);

// Empirical information gain of an observed sequence, (1/2) log det(I + K/s).
double empirical_info_gain(const MetaKernel& kernel, const std::vector<Eigen::VectorXd>& points,
                           double sigma_bar_sq);

}  // namespace mkbo
