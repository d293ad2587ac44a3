#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mkbo/bo.hpp"
#include "mkbo/rng.hpp"
#include "mkbo/synth.hpp"

using namespace mkbo;

namespace {

Eigen::VectorXd point1(double x) {
  Eigen::VectorXd v(1);
  v << x;
  return v;
}

std::vector<Eigen::VectorXd> grid1d(int count) {
  std::vector<Eigen::VectorXd> g;
  for (int i = 0; i < count; ++i) g.push_back(point1(-1.0 + 2.0 * i / (count - 1)));
  return g;
}

MetaKernel toy_kernel(double scale = 1.0) {
  const auto atlas = std::make_shared<const FeatureAtlas>(FeatureAtlas::legendre_1d(3));
  Eigen::VectorXd w(3);
  w << 0.5, 0.3, 0.2;
  return MetaKernel(atlas, scale * w, 1.0, false);
}

}  // namespace

TEST_CASE("argmax_ucb tie-breaks to the lowest index") {
  Eigen::VectorXd mean(4), sd(4);
  mean << 1.0, 2.0, 2.0, 0.5;
  sd << 0.0, 0.0, 0.0, 0.0;
  CHECK(argmax_ucb(mean, sd, 0.0) == 1);
  sd << 1.0, 0.0, 0.0, 3.0;
  CHECK(argmax_ucb(mean, sd, 1.0) == 3);  // 0.5 + 3.0
}

TEST_CASE("ucb_select at the prior maximizes the prior deviation") {
  const MetaKernel kernel = toy_kernel();
  const auto candidates = grid1d(101);
  const GpPosterior prior = posterior(kernel, History{}, 1);
  const int pick = ucb_select(prior, 1.0, candidates);
  double best = -1.0;
  int expected = 0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    const double k = kernel.eval(candidates[i], candidates[i]);
    if (k > best + 1e-15) {
      best = k;
      expected = static_cast<int>(i);
    }
  }
  CHECK(pick == expected);
  CHECK_THROWS_AS(ucb_select(prior, 1.0, {}), std::invalid_argument);
}

TEST_CASE("nu=0 is pure exploitation and ignores kernel rescaling") {
  const MetaKernel kernel = toy_kernel();
  const MetaKernel rescaled = toy_kernel(3.7);
  const auto candidates = grid1d(101);

  // single observation: the posterior mean is proportional to k(x, x0)
  History h;
  h.append(point1(0.3), 1.0);
  const GpPosterior post_a = posterior(kernel, h, 2);
  const GpPosterior post_b = posterior(rescaled, h, 2);
  const int pick_a = ucb_select(post_a, 0.0, candidates);
  const int pick_b = ucb_select(post_b, 0.0, candidates);
  CHECK(pick_a == pick_b);

  int best = 0;
  for (size_t i = 1; i < candidates.size(); ++i) {
    if (kernel.eval(candidates[i], point1(0.3)) >
        kernel.eval(candidates[static_cast<size_t>(best)], point1(0.3))) {
      best = static_cast<int>(i);
    }
  }
  CHECK(pick_a == best);
}

TEST_CASE("run_gp_ucb basic contracts") {
  const auto atlas = std::make_shared<const FeatureAtlas>(FeatureAtlas::legendre_1d(5));
  const TrueKernelSpec spec = sample_true_kernel(atlas, 3, 77);
  const TaskFunction reward = make_reward(spec, 5.0, 78);
  const RewardFn fn = [&](const Eigen::VectorXd& x) { return reward.eval(x); };
  const MetaKernel oracle = to_meta_kernel(spec);
  const auto candidates = grid1d(200);
  TheoryParams theory;
  theory.norm_bound = 5.0;
  const MetaShape shape{10, 10, 5, 1};

  const BoTrace one = run_gp_ucb(fn, 0.01, 5, oracle, theory, 1, candidates, shape);
  CHECK(one.steps() == 1);
  CHECK(one.simple_regret[0] ==
        doctest::Approx(one.best_value - one.reward_noiseless[0]).epsilon(1e-14));

  const BoTrace a = run_gp_ucb(fn, 0.01, 123, oracle, theory, 25, candidates, shape);
  const BoTrace b = run_gp_ucb(fn, 0.01, 123, oracle, theory, 25, candidates, shape);
  CHECK(a.chosen_index == b.chosen_index);
  CHECK(a.observed == b.observed);

  for (int t = 1; t < a.steps(); ++t) {
    CHECK(a.simple_regret[static_cast<size_t>(t)] <=
          a.simple_regret[static_cast<size_t>(t - 1)] + 1e-15);
  }
  for (int idx : a.chosen_index) {
    CHECK(idx >= 0);
    CHECK(idx < static_cast<int>(candidates.size()));
  }
}

TEST_CASE("noise-free oracle run drives the simple regret to zero") {
  const auto atlas = std::make_shared<const FeatureAtlas>(FeatureAtlas::legendre_1d(4));
  const TrueKernelSpec spec = sample_true_kernel(atlas, 3, 99);
  const TaskFunction reward = make_reward(spec, 5.0, 100);
  const RewardFn fn = [&](const Eigen::VectorXd& x) { return reward.eval(x); };
  const MetaKernel oracle = to_meta_kernel(spec);
  const auto candidates = grid1d(200);
  TheoryParams theory;
  theory.norm_bound = 5.0;
  theory.noise_sigma = 0.0;
  const MetaShape shape{10, 10, 4, 1};
  const BoTrace trace = run_gp_ucb(fn, 0.0, 7, oracle, theory, 60, candidates, shape);
  CHECK(trace.simple_regret.back() < 1e-8);
}

TEST_CASE("regret summary statistics") {
  BoTrace a, b;
  a.simple_regret = {3.0, 1.0};
  a.inference_regret = {2.0, 4.0};
  b.simple_regret = {1.0, 0.0};
  b.inference_regret = {6.0, 8.0};
  a.chosen_index = {0, 0};
  b.chosen_index = {0, 0};

  const RegretSummary single = regret_summary({a});
  CHECK(single.simple_std.norm() == 0.0);
  CHECK(single.simple_mean[0] == 3.0);

  const RegretSummary both = regret_summary({a, b});
  CHECK(both.simple_mean[0] == doctest::Approx(2.0));
  CHECK(both.simple_std[0] == doctest::Approx(1.0));  // population std of {3, 1}
  CHECK(both.inference_mean[1] == doctest::Approx(6.0));
  CHECK(both.inference_std[1] == doctest::Approx(2.0));

  BoTrace longer;
  longer.simple_regret = {1.0, 1.0, 1.0};
  longer.inference_regret = {1.0, 1.0, 1.0};
  longer.chosen_index = {0, 0, 0};
  CHECK_THROWS_AS(regret_summary({a, longer}), std::invalid_argument);
}

TEST_CASE("average inference regret per step shrinks with the horizon") {
  const auto atlas =
      std::make_shared<const FeatureAtlas>(FeatureAtlas::legendre_1d(20, /*orthonormal=*/true));
  const TrueKernelSpec spec = sample_true_kernel(atlas, 5, 404);
  const TaskFunction reward = make_reward(spec, 10.0, 405);
  const RewardFn fn = [&](const Eigen::VectorXd& x) { return reward.eval(x); };
  const MetaKernel oracle = to_meta_kernel(spec);
  const auto candidates = grid1d(1000);
  TheoryParams theory;
  const MetaShape shape{50, 50, 20, 1};
  const BoTrace trace = run_gp_ucb(fn, 0.01, 11, oracle, theory, 500, candidates, shape);
  const double rate_50 = trace.inference_regret[49] / 50.0;
  const double rate_500 = trace.inference_regret[499] / 500.0;
  CHECK(rate_500 < rate_50);
}
