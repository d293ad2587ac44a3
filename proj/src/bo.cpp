#include "mkbo/bo.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "mkbo/rng.hpp"

namespace mkbo {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

int argmax_ucb(const Eigen::VectorXd& mean, const Eigen::VectorXd& sd, double nu) {
  require(mean.size() > 0 && mean.size() == sd.size(), "argmax_ucb: need matching nonempty inputs");
  int best = 0;
  double best_value = mean[0] + nu * sd[0];
  for (Eigen::Index i = 1; i < mean.size(); ++i) {
    const double v = mean[i] + nu * sd[i];
    if (v > best_value) {
      best_value = v;
      best = static_cast<int>(i);
    }
  }
  return best;
}

int ucb_select(const GpPosterior& post, double nu, const std::vector<Eigen::VectorXd>& candidates) {
  require(!candidates.empty(), "ucb_select: candidate set must be non-empty");
  require(nu >= 0.0, "ucb_select: nu must be non-negative");
  Eigen::VectorXd mean(static_cast<Eigen::Index>(candidates.size()));
  Eigen::VectorXd sd(static_cast<Eigen::Index>(candidates.size()));
  for (size_t i = 0; i < candidates.size(); ++i) {
    const auto [mu, var] = post.mean_var(candidates[i]);
    mean[static_cast<Eigen::Index>(i)] = mu;
    sd[static_cast<Eigen::Index>(i)] = std::sqrt(var);
  }
  return argmax_ucb(mean, sd, nu);
}

BoTrace run_gp_ucb(const RewardFn& reward, double noise_sigma, std::uint64_t seed,
                   const MetaKernel& kernel, const TheoryParams& theory, int rounds,
                   const std::vector<Eigen::VectorXd>& candidates, const MetaShape& shape) {
  require(!candidates.empty(), "run_gp_ucb: candidate set must be non-empty");
  Eigen::VectorXd f_values(static_cast<Eigen::Index>(candidates.size()));
  for (Eigen::Index i = 0; i < f_values.size(); ++i) {
    f_values[i] = reward(candidates[static_cast<size_t>(i)]);
  }
  return run_gp_ucb_values(f_values, noise_sigma, seed, kernel, theory, rounds, candidates, shape);
}

BoTrace run_gp_ucb_values(const Eigen::VectorXd& f_values, double noise_sigma, std::uint64_t seed,
                          const MetaKernel& kernel, const TheoryParams& theory, int rounds,
                          const std::vector<Eigen::VectorXd>& candidates, const MetaShape& shape) {
  require(rounds >= 1, "run_gp_ucb: need at least one round");
  require(!candidates.empty(), "run_gp_ucb: candidate set must be non-empty");
  require(f_values.size() == static_cast<Eigen::Index>(candidates.size()),
          "run_gp_ucb: one reward value per candidate");
  require(noise_sigma >= 0.0, "run_gp_ucb: noise sigma must be non-negative");

  const auto count = static_cast<Eigen::Index>(candidates.size());

  // Candidate features are fixed for the whole run.
  const Eigen::MatrixXd cand_features = kernel.weighted_feature_rows(candidates);
  const Eigen::VectorXd prior_diag = cand_features.rowwise().squaredNorm();
  int best_index = 0;
  for (Eigen::Index i = 1; i < count; ++i) {
    if (f_values[i] > f_values[best_index]) best_index = static_cast<int>(i);
  }
  const double best_value = f_values[best_index];

  Rng rng(seed);
  BoTrace trace;
  trace.best_value = best_value;
  trace.best_index = best_index;

  std::vector<Eigen::VectorXd> visited;
  Eigen::VectorXd observed(rounds);
  Eigen::MatrixXd cross(rounds, count);  // rows filled as the history grows
  double best_seen = -std::numeric_limits<double>::infinity();
  double cum_inference = 0.0;

  for (int t = 1; t <= rounds; ++t) {
    const int h = t - 1;
    GpPosterior post(kernel, visited, observed.head(h), sigma_bar_sq(t));
    Eigen::VectorXd mean, var;
    post.mean_var_cross(cross.topRows(h), prior_diag, mean, var);

    const double nu = exploration_coefficient(theory, kernel, t, shape);
    const int pick = argmax_ucb(mean, var.cwiseSqrt(), nu);

    cum_inference += best_value - mean.maxCoeff();

    const double f_pick = f_values[pick];
    const double y = f_pick + (noise_sigma > 0.0 ? noise_sigma * rng.normal() : 0.0);
    best_seen = std::max(best_seen, f_pick);

    trace.chosen_index.push_back(pick);
    trace.observed.push_back(y);
    trace.reward_noiseless.push_back(f_pick);
    trace.nu.push_back(nu);
    trace.simple_regret.push_back(best_value - best_seen);
    trace.inference_regret.push_back(cum_inference);

    visited.push_back(candidates[static_cast<size_t>(pick)]);
    observed[h] = y;
    cross.row(h) = (cand_features * cand_features.row(pick).transpose()).transpose();
  }
  return trace;
}

RegretSummary regret_summary(const std::vector<BoTrace>& traces) {
  require(!traces.empty(), "regret_summary: need at least one trace");
  const int steps = traces.front().steps();
  for (const auto& t : traces) {
    require(t.steps() == steps, "regret_summary: traces must share the horizon");
  }
  const auto count = static_cast<double>(traces.size());
  RegretSummary out;
  out.simple_mean = Eigen::VectorXd::Zero(steps);
  out.simple_std = Eigen::VectorXd::Zero(steps);
  out.inference_mean = Eigen::VectorXd::Zero(steps);
  out.inference_std = Eigen::VectorXd::Zero(steps);
  for (const auto& t : traces) {
    for (int i = 0; i < steps; ++i) {
      out.simple_mean[i] += t.simple_regret[static_cast<size_t>(i)];
      out.inference_mean[i] += t.inference_regret[static_cast<size_t>(i)];
    }
  }
  out.simple_mean /= count;
  out.inference_mean /= count;
  for (const auto& t : traces) {
    for (int i = 0; i < steps; ++i) {
      const double ds = t.simple_regret[static_cast<size_t>(i)] - out.simple_mean[i];
      const double di = t.inference_regret[static_cast<size_t>(i)] - out.inference_mean[i];
      out.simple_std[i] += ds * ds;
      out.inference_std[i] += di * di;
    }
  }
  out.simple_std = (out.simple_std / count).cwiseSqrt();
  out.inference_std = (out.inference_std / count).cwiseSqrt();
  return out;
}

}  // namespace mkbo
