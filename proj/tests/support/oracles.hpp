#pragma once

// Independent reference implementations used only by tests: they must stay
// decoupled from the library code paths they check.

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "mkbo/glasso.hpp"
#include "mkbo/meta_kernel.hpp"
#include "mkbo/rng.hpp"

namespace mkbo::testing {

// Weight-space (primal) GP posterior: with features F (h x q), target y and
// noise variance s, the posterior at feature vector f is
//   mean = f' (F'F + s I)^-1 F' y,   var = s * f' (F'F + s I)^-1 f.
struct PrimalGp {
  Eigen::MatrixXd a_inverse;  // (F'F + s I)^-1
  Eigen::VectorXd fty;
  double noise_var;

  PrimalGp(const Eigen::MatrixXd& features, const Eigen::VectorXd& y, double s)
      : noise_var(s) {
    Eigen::MatrixXd a = features.transpose() * features;
    a.diagonal().array() += s;
    a_inverse = a.ldlt().solve(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
    fty = features.transpose() * y;
  }

  std::pair<double, double> mean_var(const Eigen::VectorXd& f) const {
    return {f.dot(a_inverse * fty), noise_var * f.dot(a_inverse * f)};
  }
};

inline std::pair<double, double> primal_mean_var(const MetaKernel& kernel,
                                                 const std::vector<Eigen::VectorXd>& history_x,
                                                 const Eigen::VectorXd& history_y,
                                                 double noise_var, const Eigen::VectorXd& x) {
  const PrimalGp gp(kernel.weighted_feature_rows(history_x), history_y, noise_var);
  return gp.mean_var(kernel.weighted_features(x));
}

// Plain subgradient descent with a/sqrt(k) steps, tracking the best objective
// seen. Slow but independent of the proximal solvers. The per-task Grams are
// precomputed so a million iterations stay affordable.
inline double subgradient_reference(const GroupLassoProblem& problem, int iterations,
                                    double initial_step) {
  const auto& layout = problem.layout();
  const int m = problem.task_count();
  const double mn = static_cast<double>(m) * problem.samples_per_task();
  std::vector<Eigen::MatrixXd> grams;
  std::vector<Eigen::VectorXd> correlations;
  double label_sq = 0.0;
  for (int s = 0; s < m; ++s) {
    grams.push_back(problem.features(s).transpose() * problem.features(s));
    correlations.push_back(problem.features(s).transpose() * problem.labels(s));
    label_sq += problem.labels(s).squaredNorm();
  }

  Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(m, problem.dim());
  Eigen::MatrixXd g(m, problem.dim());
  auto smooth_and_gradient = [&](const Eigen::MatrixXd& b, Eigen::MatrixXd* grad) {
    // |y - Phi b|^2 = |y|^2 - 2 b'Phi'y + b'(Phi'Phi)b, gradient from the Gram
    double quad = label_sq;
    for (int s = 0; s < m; ++s) {
      const Eigen::VectorXd gb = grams[static_cast<size_t>(s)] * b.row(s).transpose();
      quad += b.row(s).dot(gb) - 2.0 * b.row(s).dot(correlations[static_cast<size_t>(s)]);
      if (grad) grad->row(s) = (2.0 / mn) * (gb - correlations[static_cast<size_t>(s)]).transpose();
    }
    return quad / mn;
  };

  auto value = [&](const Eigen::MatrixXd& b) {
    double v = smooth_and_gradient(b, nullptr);
    for (int j = 0; j < layout.group_count(); ++j) {
      v += problem.lambda() * b.middleCols(layout.offsets[static_cast<size_t>(j)],
                                           layout.dims[static_cast<size_t>(j)])
                                  .norm();
    }
    return v;
  };

  double best = value(beta);
  for (int k = 1; k <= iterations; ++k) {
    double v = smooth_and_gradient(beta, &g);
    for (int j = 0; j < layout.group_count(); ++j) {
      auto block = beta.middleCols(layout.offsets[static_cast<size_t>(j)],
                                   layout.dims[static_cast<size_t>(j)]);
      const double norm = block.norm();
      v += problem.lambda() * norm;
      if (norm > 0.0) {
        g.middleCols(layout.offsets[static_cast<size_t>(j)],
                     layout.dims[static_cast<size_t>(j)]) += problem.lambda() / norm * block;
      }
      // at zero the subgradient 0 is a valid choice
    }
    best = std::min(best, v);
    beta -= (initial_step / std::sqrt(static_cast<double>(k))) * g;
  }
  return std::min(best, value(beta));
}

// Random multi-task group-Lasso instances for cross-solver checks.
inline GroupLassoProblem random_problem(Rng& rng, int max_tasks, int max_samples, int max_groups,
                                        int max_group_dim, double lambda_scale = 0.05) {
  const int m = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_tasks)));
  const int n = 2 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_samples - 1)));
  const int p = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_groups)));
  std::vector<int> dims;
  for (int j = 0; j < p; ++j) {
    dims.push_back(1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_group_dim))));
  }
  GroupLayout layout = GroupLayout::from_dims(dims);
  std::vector<Eigen::MatrixXd> features;
  std::vector<Eigen::VectorXd> labels;
  for (int s = 0; s < m; ++s) {
    Eigen::MatrixXd phi(n, layout.total);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < layout.total; ++c) phi(i, c) = rng.normal();
      y[i] = rng.normal();
    }
    features.push_back(std::move(phi));
    labels.push_back(std::move(y));
  }
  const double lambda = lambda_scale * (0.2 + rng.uniform());
  return GroupLassoProblem(std::move(features), std::move(labels), std::move(layout), lambda);
}

}  // namespace mkbo::testing
