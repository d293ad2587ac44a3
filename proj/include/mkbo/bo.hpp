#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "mkbo/gp.hpp"

namespace mkbo {

// Per-step record of one UCB run. Regret accounting uses the noiseless
// reward values, which the simulator knows; the optimum is taken over the
// candidate set.
struct BoTrace {
  std::vector<int> chosen_index;
  std::vector<double> observed;            // y_t = f(x_t) + noise
  std::vector<double> reward_noiseless;    // f(x_t)
  std::vector<double> nu;                  // exploration coefficient used
  std::vector<double> simple_regret;       // f(x*) - max_{tau<=t} f(x_tau)
  std::vector<double> inference_regret;    // cumulative: sum f(x*) - max_x mean_{tau-1}(x)
  double best_value = 0.0;                 // f(x*)
  int best_index = -1;                     // argmax over candidates

  int steps() const { return static_cast<int>(chosen_index.size()); }
};

// Index of the UCB maximizer; ties break toward the lowest index.
int argmax_ucb(const Eigen::VectorXd& mean, const Eigen::VectorXd& sd, double nu);

// Candidate maximizing mean + nu * sd under the posterior.
int ucb_select(const GpPosterior& post, double nu, const std::vector<Eigen::VectorXd>& candidates);

using RewardFn = std::function<double(const Eigen::VectorXd&)>;

// T rounds of GP-UCB over a finite candidate set: at each step t the
// posterior uses sigma_bar^2 = 1 + 2/t, the exploration coefficient comes
// from the theory parameters, and the chosen point is observed with additive
// Gaussian noise. Deterministic given the seed.
BoTrace run_gp_ucb(const RewardFn& reward, double noise_sigma, std::uint64_t seed,
                   const MetaKernel& kernel, const TheoryParams& theory, int rounds,
                   const std::vector<Eigen::VectorXd>& candidates, const MetaShape& shape);

// Same loop with the noiseless candidate rewards already tabulated (finite
// lookup domains).
BoTrace run_gp_ucb_values(const Eigen::VectorXd& reward_values, double noise_sigma,
                          std::uint64_t seed, const MetaKernel& kernel,
                          const TheoryParams& theory, int rounds,
                          const std::vector<Eigen::VectorXd>& candidates, const MetaShape& shape);

struct RegretSummary {
  Eigen::VectorXd simple_mean, simple_std;
  Eigen::VectorXd inference_mean, inference_std;
};

// Pointwise mean and (population) standard deviation across traces; all
// traces must share the same number of steps.
RegretSummary regret_summary(const std::vector<BoTrace>& traces);

}  // namespace mkbo
