#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mkbo/meta_kernel.hpp"
#include "mkbo/rng.hpp"
#include "mkbo/synth.hpp"
#include "support/oracles.hpp"

using namespace mkbo;

namespace {

Eigen::VectorXd point1(double x) {
  Eigen::VectorXd v(1);
  v << x;
  return v;
}

// 1-d golden-section minimizer on [lo, hi].
template <typename F>
std::pair<double, double> golden_min(F f, double lo, double hi, int iters = 200) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  return {x, f(x)};
}

}  // namespace

TEST_CASE("lambda_lower_bound at the synthetic defaults") {
  const double bound = lambda_lower_bound(0.01, 50, 50, 20, 1, 0.1);
  CHECK(bound >= 0.0010);
  CHECK(bound <= 0.0012);
  CHECK(bound == doctest::Approx(1.11196717517e-3).epsilon(1e-9));
  CHECK(lambda_lower_bound(0.0, 50, 50, 20, 1, 0.1) == 0.0);
  CHECK_THROWS_AS(lambda_lower_bound(0.01, 50, 50, 20, 1, 1.5), std::invalid_argument);

  // quadrupling n (m fixed) exactly halves the bound: the bracket depends on m only
  const double quad_n = lambda_lower_bound(0.01, 50, 200, 20, 1, 0.1);
  CHECK(quad_n == doctest::Approx(0.5 * bound).epsilon(1e-14));
}

TEST_CASE("meta_error_bound is 8s/kappa^2 times the lambda floor") {
  Rng rng(2024);
  for (int i = 0; i < 20; ++i) {
    const double sigma = rng.uniform(0.001, 0.5);
    const int s = 1 + static_cast<int>(rng.uniform_int(8));
    const double kappa = rng.uniform(0.2, 2.0);
    const int m = 1 + static_cast<int>(rng.uniform_int(60));
    const int n = 1 + static_cast<int>(rng.uniform_int(60));
    const int p = s + static_cast<int>(rng.uniform_int(20));
    const int dmax = 1 + static_cast<int>(rng.uniform_int(4));
    const double delta = rng.uniform(0.01, 0.5);
    const double eps = meta_error_bound(sigma, s, kappa, m, n, p, dmax, delta);
    const double lam = lambda_lower_bound(sigma, m, n, p, dmax, delta);
    CHECK(eps == doctest::Approx(8.0 * s / (kappa * kappa) * lam).epsilon(1e-13));
  }
  CHECK(meta_error_bound(0.0, 5, 1.0, 50, 50, 20, 1, 0.1) == 0.0);
  CHECK_THROWS_AS(meta_error_bound(0.01, 5, 0.0, 50, 50, 20, 1, 0.1), std::invalid_argument);

  // monotone decreasing in both m and n
  double previous = meta_error_bound(0.01, 5, 1.0, 2, 10, 20, 1, 0.1);
  for (int m : {4, 8, 16, 32}) {
    const double value = meta_error_bound(0.01, 5, 1.0, m, 10, 20, 1, 0.1);
    CHECK(value < previous);
    previous = value;
  }
  previous = meta_error_bound(0.01, 5, 1.0, 10, 2, 20, 1, 0.1);
  for (int n : {4, 8, 16, 32}) {
    const double value = meta_error_bound(0.01, 5, 1.0, 10, n, 20, 1, 0.1);
    CHECK(value < previous);
    previous = value;
  }
}

TEST_CASE("eta trick identity") {
  // min over v >= 0 of (lambda/2)(w^2/v + v) equals lambda*w at v = w
  Rng rng(31337);
  for (int i = 0; i < 100; ++i) {
    const double w = rng.uniform(1e-3, 5.0);
    const double lambda = rng.uniform(0.01, 2.0);
    auto h = [&](double v) { return 0.5 * lambda * (w * w / v + v); };
    const auto [v_star, h_star] = golden_min(h, 1e-9, w + 10.0, 300);
    CHECK(std::abs(h_star - lambda * w) < 1e-9);
    CHECK(std::abs(v_star - w) < 1e-6);
  }
}

TEST_CASE("fit_meta_kernel null threshold and scaling") {
  const auto atlas = std::make_shared<const FeatureAtlas>(FeatureAtlas::legendre_1d(6));
  const auto spec = sample_true_kernel(atlas, 3, 11);
  const auto tasks = sample_task_functions(spec, 4, 2.0, 12);
  const MetaDataset data = generate_meta_data(spec, tasks, 12, 0.01, 13);

  // the global-null threshold of the group Lasso
  const GroupLassoProblem probe = make_problem(data, *atlas, 1.0);
  double threshold = 0.0;
  for (int j = 0; j < atlas->group_count(); ++j) {
    double sq = 0.0;
    for (int s = 0; s < probe.task_count(); ++s) {
      sq += (probe.features(s).col(j).transpose() * probe.labels(s)).squaredNorm();
    }
    threshold = std::max(threshold, 2.0 / (4.0 * 12.0) * std::sqrt(sq));
  }
  const MetaKernelFit null_fit = fit_meta_kernel(data, atlas, threshold * 1.0001);
  CHECK(null_fit.kernel.active_set().empty());
  CHECK(null_fit.kernel.effective_dim() == 0);

  const MetaKernelFit fit_a = fit_meta_kernel(data, atlas, 0.01, 1.0);
  const MetaKernelFit fit_b = fit_meta_kernel(data, atlas, 0.01, 0.5);
  CHECK(fit_a.kernel.active_set() == fit_b.kernel.active_set());
  CHECK((2.0 * fit_a.kernel.weights() - fit_b.kernel.weights()).norm() < 1e-12);
  CHECK(fit_a.kernel.effective_dim() == fit_b.kernel.effective_dim());
}

TEST_CASE("kernel evaluation") {
  const auto atlas = std::make_shared<const FeatureAtlas>(FeatureAtlas::legendre_1d(5));

  const MetaKernel zero(atlas, Eigen::VectorXd::Zero(5), 1.0, false);
  CHECK(zero.eval(point1(0.3), point1(-0.8)) == 0.0);
  CHECK(zero.effective_dim() == 0);

  Eigen::VectorXd one_active = Eigen::VectorXd::Zero(5);
  one_active[2] = 0.7;
  const MetaKernel single(atlas, one_active, 1.0, false);
  const double x = 0.4, y = -0.6;
  CHECK(single.eval(point1(x), point1(y)) ==
        doctest::Approx(0.7 * legendre_eval(3, x) * legendre_eval(3, y)));

  Rng rng(55);
  Eigen::VectorXd weights(5);
  for (int j = 0; j < 5; ++j) weights[j] = rng.uniform();
  const MetaKernel kernel(atlas, weights, 1.0, false);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd a = point1(rng.uniform(-1.0, 1.0));
    const Eigen::VectorXd b = point1(rng.uniform(-1.0, 1.0));
    CHECK(kernel.eval(a, b) == doctest::Approx(kernel.eval(b, a)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(kernel.eval(point1(2.0), point1(0.0)), std::invalid_argument);
}

TEST_CASE("uniform kernel") {
  const auto atlas = std::make_shared<const FeatureAtlas>(FeatureAtlas::legendre_1d(20));
  const MetaKernel full = uniform_kernel(atlas);
  for (int j = 0; j < 20; ++j) CHECK(full.weights()[j] == doctest::Approx(0.05));
  CHECK(full.effective_dim() == atlas->total_dim());
  CHECK(!full.meta_learned());
  Rng rng(66);
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd x = point1(rng.uniform(-1.0, 1.0));
    CHECK(full.eval(x, x) <= 1.0 + 1e-12);
  }
}

TEST_CASE("sparsity_bound") {
  CHECK(sparsity_bound(5, 50, 50, 1.0) == doctest::Approx(0.128));
  CHECK(sparsity_bound(5, 100, 100, 1.0) == doctest::Approx(0.032));  // 4x mn -> 1/4
  CHECK_THROWS_AS(sparsity_bound(5, 50, 50, 0.0), std::invalid_argument);
  // below p exactly when mn > 64 s / (p kappa^2)
  const int p = 20, s = 5;
  const double kappa = 0.1;
  const double crossover = 64.0 * s / (p * kappa * kappa);
  CHECK(sparsity_bound(s, 1, static_cast<int>(crossover) + 1, kappa) < p);
  CHECK(sparsity_bound(s, 1, static_cast<int>(crossover) - 1, kappa) > p);
}

TEST_CASE("kappa proxy") {
  // Phi_s' Phi_s = mn I gives exactly 1
  const int m = 3, n = 8, d = 4;
  Rng rng(99);
  std::vector<Eigen::MatrixXd> blocks;
  for (int s = 0; s < m; ++s) {
    Eigen::MatrixXd raw(n, d);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < d; ++c) raw(i, c) = rng.normal();
    }
    Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ() *
                        Eigen::MatrixXd::Identity(n, d);
    blocks.push_back(std::sqrt(static_cast<double>(m) * n) * q);
  }
  CHECK(kappa_proxy(blocks) == doctest::Approx(1.0).epsilon(1e-12));

  // duplicated rows in the d > n regime collapse the proxy to zero
  Eigen::MatrixXd degenerate(2, 3);
  degenerate << 1, 2, 3, 1, 2, 3;
  CHECK(kappa_proxy({degenerate}) == 0.0);

  // proxy lower-bounds a brute-force restricted-eigenvalue estimate
  Rng brute_rng(123);
  std::vector<Eigen::MatrixXd> small;
  for (int s = 0; s < 2; ++s) {
    Eigen::MatrixXd phi(5, 3);
    for (int i = 0; i < 5; ++i) {
      for (int c = 0; c < 3; ++c) phi(i, c) = brute_rng.normal();
    }
    small.push_back(phi);
  }
  const double proxy = kappa_proxy(small);
  const GroupLayout layout = GroupLayout::from_dims({1, 1, 1});
  const double mn = 10.0;
  double estimate = std::numeric_limits<double>::infinity();
  // all supports of size <= 2 with random cone-feasible directions
  for (int ja = 0; ja < 3; ++ja) {
    for (int jb = ja; jb < 3; ++jb) {
      for (int trial = 0; trial < 4000; ++trial) {
        Eigen::MatrixXd b(2, 3);
        for (int s = 0; s < 2; ++s) {
          for (int c = 0; c < 3; ++c) b(s, c) = brute_rng.normal();
        }
        double on = 0.0, off = 0.0, on_sq = 0.0;
        for (int j = 0; j < 3; ++j) {
          const double norm = b.col(j).norm();
          if (j == ja || j == jb) {
            on += norm;
            on_sq += norm * norm;
          } else {
            off += norm;
          }
        }
        if (off > 3.0 * on || on_sq == 0.0) continue;
        double phib_sq = 0.0;
        for (int s = 0; s < 2; ++s) phib_sq += (small[s] * b.row(s).transpose()).squaredNorm();
        estimate = std::min(estimate, std::sqrt(phib_sq / mn / on_sq));
      }
    }
  }
  CHECK(proxy <= estimate + 1e-12);
}

TEST_CASE("kappa proxy from a dataset") {
  const auto atlas = std::make_shared<const FeatureAtlas>(FeatureAtlas::legendre_1d(4));
  const auto spec = sample_true_kernel(atlas, 2, 3);
  const auto tasks = sample_task_functions(spec, 3, 2.0, 4);
  const MetaDataset data = generate_meta_data(spec, tasks, 12, 0.01, 5);
  const double proxy = kappa_proxy(data, *atlas);
  CHECK(proxy > 0.0);
  // matches the matrix-level overload on the same feature blocks
  const GroupLassoProblem problem = make_problem(data, *atlas, 0.1);
  std::vector<Eigen::MatrixXd> blocks;
  for (int s = 0; s < problem.task_count(); ++s) blocks.push_back(problem.features(s));
  CHECK(proxy == doctest::Approx(kappa_proxy(blocks)).epsilon(1e-14));

  // too few samples per task for the feature width: rank deficient
  const MetaDataset thin = generate_meta_data(spec, tasks, 2, 0.01, 6);
  CHECK(kappa_proxy(thin, *atlas) == 0.0);
}

TEST_CASE("rkhs norm bound") {
  CHECK(rkhs_norm_bound(10.0, 0.0, 1.0) == doctest::Approx(10.0));
  CHECK(rkhs_norm_bound(10.0, 0.1, 1.0) == doctest::Approx(10.5409255339).epsilon(1e-10));
  CHECK_THROWS_AS(rkhs_norm_bound(10.0, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(rkhs_norm_bound(10.0, 1.5, 1.0), std::invalid_argument);
  // the first-order expansion sits below the exact form on (0, scale)
  for (double eps = 0.05; eps < 1.0; eps += 0.05) {
    const double exact = rkhs_norm_bound(10.0, eps, 1.0);
    const double first_order = 10.0 * (1.0 + eps / 2.0);
    CHECK(first_order <= exact + 1e-12);
  }
}

TEST_CASE("recovery consistency improves with more tasks") {
  const auto atlas =
      std::make_shared<const FeatureAtlas>(FeatureAtlas::legendre_1d(20, /*orthonormal=*/true));
  auto support_errors = [&](int m) {
    double spurious = 0.0, missed = 0.0;
    const int seeds = 12;
    for (int seed = 0; seed < seeds; ++seed) {
      const auto spec = sample_true_kernel(atlas, 5, derive_seed(401, seed));
      const auto tasks = sample_task_functions(spec, m, 10.0, derive_seed(402 + m, seed));
      const MetaDataset data = generate_meta_data(spec, tasks, 50, 0.01, derive_seed(403 + m, seed));
      const MetaKernelFit fit = fit_meta_kernel(data, atlas, 0.03);
      for (int j : fit.kernel.active_set()) {
        if (!std::binary_search(spec.support.begin(), spec.support.end(), j)) spurious += 1.0;
      }
      for (int j : spec.support) {
        const auto& active = fit.kernel.active_set();
        if (!std::binary_search(active.begin(), active.end(), j)) missed += 1.0;
      }
    }
    return std::pair{spurious / seeds, missed / seeds};
  };
  const auto [spurious_small, missed_small] = support_errors(2);
  const auto [spurious_large, missed_large] = support_errors(50);
  CHECK(missed_large <= missed_small);
  CHECK(spurious_large <= spurious_small + 0.5);
  CHECK(missed_large <= 0.2);
}
