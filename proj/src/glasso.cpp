#include "mkbo/glasso.hpp"

#include <cmath>
#include <stdexcept>

namespace mkbo {

namespace {

constexpr double kNormSnap = 1e-14;  // group norms below this are treated as exact zeros

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Snap near-zero groups so the active set is well defined.
void snap_tiny_groups(const GroupLayout& layout, Eigen::MatrixXd& beta) {
  for (int j = 0; j < layout.group_count(); ++j) {
    auto block = beta.middleCols(layout.offsets[static_cast<size_t>(j)],
                                 layout.dims[static_cast<size_t>(j)]);
    if (block.norm() < kNormSnap) block.setZero();
  }
}

std::vector<int> active_from_norms(const Eigen::VectorXd& norms) {
  std::vector<int> active;
  for (Eigen::Index j = 0; j < norms.size(); ++j) {
    if (norms[j] > 0.0) active.push_back(static_cast<int>(j));
  }
  return active;
}

GroupLassoFit finalize_fit(const GroupLassoProblem& problem, Eigen::MatrixXd beta, int iterations,
                           bool converged, std::vector<double> trace) {
  snap_tiny_groups(problem.layout(), beta);
  GroupLassoFit fit;
  fit.group_norms = problem.group_norms(beta);
  fit.active_set = active_from_norms(fit.group_norms);
  fit.objective_value = objective(problem, beta);
  fit.kkt_residual = kkt_residual(problem, beta);
  fit.coef = std::move(beta);
  fit.iterations = iterations;
  fit.converged = converged;
  fit.objective_trace = std::move(trace);
  return fit;
}

// Prox applied to a pooled m x d_j block, scaling the whole block.
void prox_block(Eigen::Ref<Eigen::MatrixXd> block, double threshold) {
  const double norm = block.norm();
  if (norm <= threshold || norm < kNormSnap) {
    block.setZero();
  } else {
    block *= (1.0 - threshold / norm);
  }
}

}  // namespace

void MetaDataset::validate() const {
  require(!inputs.empty() && inputs.size() == labels.size(),
          "MetaDataset: need at least one task with matching labels");
  const Eigen::Index n = inputs.front().rows();
  const Eigen::Index d0 = inputs.front().cols();
  require(n >= 1, "MetaDataset: each task needs at least one sample");
  for (size_t s = 0; s < inputs.size(); ++s) {
    require(inputs[s].rows() == n && inputs[s].cols() == d0,
            "MetaDataset: task sample counts and dimensions must match");
    require(labels[s].size() == n, "MetaDataset: label length must equal sample count");
  }
}

GroupLassoProblem::GroupLassoProblem(std::vector<Eigen::MatrixXd> task_features,
                                     std::vector<Eigen::VectorXd> task_labels, GroupLayout layout,
                                     double lambda)
    : features_(std::move(task_features)),
      labels_(std::move(task_labels)),
      layout_(std::move(layout)),
      lambda_(lambda) {
  require(lambda_ > 0.0, "GroupLassoProblem: lambda must be positive");
  require(!features_.empty() && features_.size() == labels_.size(),
          "GroupLassoProblem: need matching task features and labels");
  const Eigen::Index n = features_.front().rows();
  for (size_t s = 0; s < features_.size(); ++s) {
    require(features_[s].rows() == n, "GroupLassoProblem: all tasks share the sample count");
    require(features_[s].cols() == layout_.total, "GroupLassoProblem: feature width mismatch");
    require(labels_[s].size() == n, "GroupLassoProblem: label length mismatch");
  }
}

void GroupLassoProblem::check_beta_shape(const Eigen::MatrixXd& beta) const {
  require(beta.rows() == task_count() && beta.cols() == dim(),
          "GroupLassoProblem: coefficient table must be m x d");
}

double GroupLassoProblem::smooth_loss(const Eigen::MatrixXd& beta) const {
  check_beta_shape(beta);
  double ss = 0.0;
  for (int s = 0; s < task_count(); ++s) {
    ss += (labels_[static_cast<size_t>(s)] -
           features_[static_cast<size_t>(s)] * beta.row(s).transpose())
              .squaredNorm();
  }
  return ss / (static_cast<double>(task_count()) * samples_per_task());
}

Eigen::MatrixXd GroupLassoProblem::smooth_gradient(const Eigen::MatrixXd& beta) const {
  check_beta_shape(beta);
  Eigen::MatrixXd grad(task_count(), dim());
  const double scale = 2.0 / (static_cast<double>(task_count()) * samples_per_task());
  for (int s = 0; s < task_count(); ++s) {
    const auto& phi = features_[static_cast<size_t>(s)];
    grad.row(s) =
        scale * (phi.transpose() * (phi * beta.row(s).transpose() - labels_[static_cast<size_t>(s)]))
                    .transpose();
  }
  return grad;
}

Eigen::VectorXd GroupLassoProblem::group_norms(const Eigen::MatrixXd& beta) const {
  check_beta_shape(beta);
  Eigen::VectorXd norms(group_count());
  for (int j = 0; j < group_count(); ++j) {
    norms[j] = beta.middleCols(layout_.offsets[static_cast<size_t>(j)],
                               layout_.dims[static_cast<size_t>(j)])
                   .norm();
  }
  return norms;
}

double objective(const GroupLassoProblem& problem, const Eigen::MatrixXd& beta) {
  return problem.smooth_loss(beta) + problem.lambda() * problem.group_norms(beta).sum();
}

Eigen::VectorXd group_prox(const Eigen::VectorXd& v, double threshold) {
  require(threshold >= 0.0, "group_prox: threshold must be non-negative");
  const double norm = v.norm();
  if (norm <= threshold) return Eigen::VectorXd::Zero(v.size());
  return v * (1.0 - threshold / norm);
}

double kkt_residual(const GroupLassoProblem& problem, const Eigen::MatrixXd& beta) {
  problem.check_beta_shape(beta);
  const Eigen::MatrixXd neg_grad = -problem.smooth_gradient(beta);  // (2/mn) Phi'(y - Phi B)
  const auto& layout = problem.layout();
  const double lambda = problem.lambda();
  double worst = 0.0;
  for (int j = 0; j < layout.group_count(); ++j) {
    const auto offset = layout.offsets[static_cast<size_t>(j)];
    const auto width = layout.dims[static_cast<size_t>(j)];
    const auto g_block = neg_grad.middleCols(offset, width);
    const auto b_block = beta.middleCols(offset, width);
    const double b_norm = b_block.norm();
    double violation;
    if (b_norm > 0.0) {
      violation = (g_block - (lambda / b_norm) * b_block).norm();
    } else {
      violation = std::max(0.0, g_block.norm() - lambda);
    }
    worst = std::max(worst, violation);
  }
  return worst;
}

double power_iteration_lmax(const Eigen::MatrixXd& gram, int max_iter, double tol) {
  const Eigen::Index d = gram.rows();
  if (d == 0) return 0.0;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(d).normalized();
  double lmax = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd w = gram * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    const double estimate = v.dot(gram * v);
    if (std::abs(estimate - lmax) <= tol * std::max(1.0, std::abs(estimate))) return estimate;
    lmax = estimate;
  }
  return lmax;
}

GroupLassoFit solve_fista(const GroupLassoProblem& problem, const SolverOptions& opts) {
  require(opts.tol > 0.0, "solve_fista: tol must be positive");
  const int m = problem.task_count();
  const int d = problem.dim();
  const double inv_mn = 1.0 / (static_cast<double>(m) * problem.samples_per_task());

  double lmax = 0.0;
  for (int s = 0; s < m; ++s) {
    const auto& phi = problem.features(s);
    lmax = std::max(lmax, power_iteration_lmax(phi.transpose() * phi));
  }
  const double lipschitz = 2.0 * inv_mn * lmax;
  if (lipschitz == 0.0) {
    // All-zero design: the penalty alone decides, optimum is zero.
    return finalize_fit(problem, Eigen::MatrixXd::Zero(m, d), 0, true, {});
  }
  double step = 1.0 / lipschitz;

  Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(m, d);
  Eigen::MatrixXd momentum = beta;
  double theta = 1.0;
  double obj = objective(problem, beta);
  std::vector<double> trace;
  trace.reserve(256);

  const auto& layout = problem.layout();
  auto prox_all = [&](Eigen::MatrixXd& table, double threshold) {
    for (int j = 0; j < layout.group_count(); ++j) {
      prox_block(table.middleCols(layout.offsets[static_cast<size_t>(j)],
                                  layout.dims[static_cast<size_t>(j)]),
                 threshold);
    }
  };

  bool converged = false;
  int iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    Eigen::MatrixXd candidate = momentum - step * problem.smooth_gradient(momentum);
    prox_all(candidate, step * problem.lambda());
    double cand_obj = objective(problem, candidate);

    if (cand_obj > obj) {
      // Momentum overshot: restart from the last iterate with a plain
      // proximal-gradient step, halving the step if it still does not descend.
      theta = 1.0;
      momentum = beta;
      for (;;) {
        candidate = momentum - step * problem.smooth_gradient(momentum);
        prox_all(candidate, step * problem.lambda());
        cand_obj = objective(problem, candidate);
        if (cand_obj <= obj || step < 1e-3 / lipschitz) break;
        step *= 0.5;
      }
    }

    const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    momentum = candidate + ((theta - 1.0) / theta_next) * (candidate - beta);
    theta = theta_next;
    beta = std::move(candidate);
    obj = std::min(obj, cand_obj);
    trace.push_back(cand_obj);

    if (kkt_residual(problem, beta) <= opts.tol) {
      converged = true;
      ++iter;
      break;
    }
  }
  return finalize_fit(problem, std::move(beta), iter, converged, std::move(trace));
}

GroupLassoFit solve_bcd(const GroupLassoProblem& problem, const SolverOptions& opts) {
  require(opts.tol > 0.0, "solve_bcd: tol must be positive");
  const int m = problem.task_count();
  const int d = problem.dim();
  const auto& layout = problem.layout();
  const double scale = 2.0 / (static_cast<double>(m) * problem.samples_per_task());

  // Per-group stepsizes from the worst task sub-block Gram.
  Eigen::VectorXd group_lipschitz(layout.group_count());
  for (int j = 0; j < layout.group_count(); ++j) {
    const auto offset = layout.offsets[static_cast<size_t>(j)];
    const auto width = layout.dims[static_cast<size_t>(j)];
    double lmax = 0.0;
    for (int s = 0; s < m; ++s) {
      const auto block = problem.features(s).middleCols(offset, width);
      lmax = std::max(lmax, power_iteration_lmax(block.transpose() * block));
    }
    group_lipschitz[j] = scale * lmax;
  }

  Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(m, d);
  // residuals[s] = y_s - Phi_s b_s, updated in place per group step
  std::vector<Eigen::VectorXd> residuals;
  residuals.reserve(static_cast<size_t>(m));
  for (int s = 0; s < m; ++s) residuals.push_back(problem.labels(s));

  std::vector<double> trace;
  bool converged = false;
  int sweep = 0;
  for (; sweep < opts.max_iter; ++sweep) {
    for (int j = 0; j < layout.group_count(); ++j) {
      const double lj = group_lipschitz[j];
      const auto offset = layout.offsets[static_cast<size_t>(j)];
      const auto width = layout.dims[static_cast<size_t>(j)];
      auto block = beta.middleCols(offset, width);
      if (lj == 0.0) {
        block.setZero();
        continue;
      }
      Eigen::MatrixXd grad(m, width);
      for (int s = 0; s < m; ++s) {
        grad.row(s) = -scale * (problem.features(s).middleCols(offset, width).transpose() *
                                residuals[static_cast<size_t>(s)])
                                   .transpose();
      }
      Eigen::MatrixXd updated = block - grad / lj;
      prox_block(updated, problem.lambda() / lj);
      const Eigen::MatrixXd delta = updated - block;
      if (delta.norm() > 0.0) {
        for (int s = 0; s < m; ++s) {
          residuals[static_cast<size_t>(s)] -=
              problem.features(s).middleCols(offset, width) * delta.row(s).transpose();
        }
        block = updated;
      }
    }
    trace.push_back(objective(problem, beta));
    if (kkt_residual(problem, beta) <= opts.tol) {
      converged = true;
      ++sweep;
      break;
    }
  }
  return finalize_fit(problem, std::move(beta), sweep, converged, std::move(trace));
}

GroupLassoProblem make_problem(const MetaDataset& data, const FeatureAtlas& atlas, double lambda) {
  data.validate();
  std::vector<Eigen::MatrixXd> blocks;
  std::vector<Eigen::VectorXd> labels;
  blocks.reserve(static_cast<size_t>(data.task_count()));
  labels.reserve(static_cast<size_t>(data.task_count()));
  for (int s = 0; s < data.task_count(); ++s) {
    const auto& x = data.inputs[static_cast<size_t>(s)];
    Eigen::MatrixXd phi(x.rows(), atlas.total_dim());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      phi.row(i) = atlas.stack(x.row(i).transpose());
    }
    blocks.push_back(std::move(phi));
    labels.push_back(data.labels[static_cast<size_t>(s)]);
  }
  return GroupLassoProblem(std::move(blocks), std::move(labels), atlas.layout(), lambda);
}

}  // namespace mkbo
