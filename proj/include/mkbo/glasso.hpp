#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mkbo/features.hpp"

namespace mkbo {

// m tasks of n samples each: inputs[s] is n x d0, labels[s] is length n.
struct MetaDataset {
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::VectorXd> labels;

  int task_count() const { return static_cast<int>(inputs.size()); }
  int samples_per_task() const {
    return inputs.empty() ? 0 : static_cast<int>(inputs.front().rows());
  }
  void validate() const;
};

// The multi-task group-Lasso instance
//
//   min over B of (1/mn) sum_s |y_s - Phi_s b_s|^2 + lambda sum_j |B^(j)|_2
//
// where B is the m x d coefficient table (row s = b_s) and B^(j) pools the
// group-j columns across all tasks. The block-diagonal multi-task design is
// kept implicit: only the per-task feature blocks Phi_s (n x d) are stored,
// never the stacked mn x md matrix.
class GroupLassoProblem {
 public:
  GroupLassoProblem(std::vector<Eigen::MatrixXd> task_features,
                    std::vector<Eigen::VectorXd> task_labels, GroupLayout layout, double lambda);

  int task_count() const { return static_cast<int>(features_.size()); }
  int samples_per_task() const { return static_cast<int>(features_.front().rows()); }
  int dim() const { return layout_.total; }
  int group_count() const { return layout_.group_count(); }
  double lambda() const { return lambda_; }
  const GroupLayout& layout() const { return layout_; }
  const Eigen::MatrixXd& features(int s) const { return features_[static_cast<size_t>(s)]; }
  const Eigen::VectorXd& labels(int s) const { return labels_[static_cast<size_t>(s)]; }

  // (1/mn) sum_s |y_s - Phi_s b_s|^2
  double smooth_loss(const Eigen::MatrixXd& beta) const;
  // Row s = (2/mn) Phi_s' (Phi_s b_s - y_s)
  Eigen::MatrixXd smooth_gradient(const Eigen::MatrixXd& beta) const;
  // Pooled group norms |B^(j)|_2 over the m*d_j entries of each group.
  Eigen::VectorXd group_norms(const Eigen::MatrixXd& beta) const;

  void check_beta_shape(const Eigen::MatrixXd& beta) const;

 private:
  std::vector<Eigen::MatrixXd> features_;
  std::vector<Eigen::VectorXd> labels_;
  GroupLayout layout_;
  double lambda_;
};

struct GroupLassoFit {
  Eigen::MatrixXd coef;            // m x d, row s = estimated b_s
  Eigen::VectorXd group_norms;     // pooled per-group norms
  std::vector<int> active_set;     // groups with positive norm, ascending
  double objective_value = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // objective after each iteration
};

struct SolverOptions {
  double tol = 1e-8;      // on the KKT residual
  int max_iter = 50000;
};

// Full objective: smooth loss plus lambda * sum of pooled group norms.
double objective(const GroupLassoProblem& problem, const Eigen::MatrixXd& beta);

// Proximal operator of the group penalty: v * max(0, 1 - threshold/|v|).
Eigen::VectorXd group_prox(const Eigen::VectorXd& v, double threshold);

// Max over groups of the KKT stationarity violation. Writing
// G^(j) = (2/mn) (Phi' (y - Phi B))^(j), the violation is
// |G^(j) - lambda B^(j)/|B^(j)||  when the group is active, and
// max(0, |G^(j)| - lambda)        when it is zero. Zero iff B is optimal.
double kkt_residual(const GroupLassoProblem& problem, const Eigen::MatrixXd& beta);

// Accelerated proximal gradient with monotone (function-value) restarts.
// Stepsize 1/L with L = (2/mn) max_s lambda_max(Phi_s' Phi_s) from power
// iteration. Stops when the KKT residual reaches tol; exhausting max_iter
// returns converged = false instead of throwing.
GroupLassoFit solve_fista(const GroupLassoProblem& problem, const SolverOptions& opts = {});

// Cyclic block-coordinate descent with per-group stepsizes 1/L_j. Same
// termination contract as solve_fista.
GroupLassoFit solve_bcd(const GroupLassoProblem& problem, const SolverOptions& opts = {});

// Feature blocks Phi_s from a dataset and atlas; inputs are validated against
// the atlas domain.
GroupLassoProblem make_problem(const MetaDataset& data, const FeatureAtlas& atlas, double lambda);

// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double power_iteration_lmax(const Eigen::MatrixXd& gram, int max_iter = 500, double tol = 1e-13);

}  // namespace mkbo
