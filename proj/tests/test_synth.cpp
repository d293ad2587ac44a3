#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "mkbo/rng.hpp"
#include "mkbo/synth.hpp"

using namespace mkbo;

namespace {

Eigen::VectorXd point1(double x) {
  Eigen::VectorXd v(1);
  v << x;
  return v;
}

AtlasPtr atlas20() {
  return std::make_shared<const FeatureAtlas>(FeatureAtlas::legendre_1d(20));
}

}  // namespace

TEST_CASE("sample_true_kernel support and normalization") {
  const auto atlas = atlas20();
  const TrueKernelSpec spec = sample_true_kernel(atlas, 5, 42);
  CHECK(spec.support.size() == 5);
  CHECK(std::is_sorted(spec.support.begin(), spec.support.end()));
  int nonzero = 0;
  for (int j = 0; j < 20; ++j) {
    CHECK(spec.weights[j] >= 0.0);
    if (spec.weights[j] > 0.0) ++nonzero;
  }
  CHECK(nonzero == 5);
  CHECK(spec.weights.sum() == doctest::Approx(1.0).epsilon(1e-14));

  const TrueKernelSpec again = sample_true_kernel(atlas, 5, 42);
  CHECK((spec.weights - again.weights).norm() == 0.0);
  CHECK(spec.support == again.support);

  const TrueKernelSpec full = sample_true_kernel(atlas, 20, 7);
  CHECK(full.support.size() == 20);
  CHECK(full.weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(sample_true_kernel(atlas, 21, 1), std::invalid_argument);
}

TEST_CASE("task functions have exact norm and support") {
  const auto atlas = atlas20();
  const TrueKernelSpec spec = sample_true_kernel(atlas, 5, 10);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const TaskFunction f = sample_task_function(spec, 10.0, seed);
    CHECK(std::abs(f.norm() - 10.0) < 1e-10);
    for (int j = 0; j < atlas->group_count(); ++j) {
      const bool in_support =
          std::binary_search(spec.support.begin(), spec.support.end(), j);
      if (!in_support) {
        CHECK(f.coef.segment(atlas->group_offset(j), atlas->group_dim(j)).norm() == 0.0);
      }
    }
  }
}

TEST_CASE("single-block task is proportional to one weighted feature") {
  const auto atlas = atlas20();
  TrueKernelSpec spec = sample_true_kernel(atlas, 5, 11);
  // find a seed whose subset has exactly one block
  for (std::uint64_t seed = 0;; ++seed) {
    const TaskFunction f = sample_task_function(spec, 3.0, seed);
    int active_blocks = 0;
    int block = -1;
    for (int j : spec.support) {
      if (f.coef.segment(atlas->group_offset(j), atlas->group_dim(j)).norm() > 0.0) {
        ++active_blocks;
        block = j;
      }
    }
    if (active_blocks != 1) continue;
    Rng rng(12);
    for (int i = 0; i < 20; ++i) {
      const Eigen::VectorXd x = point1(rng.uniform(-1.0, 1.0));
      const double expected = std::sqrt(spec.weights[block]) *
                              legendre_eval(block + 1, x[0]) *
                              f.coef[atlas->group_offset(block)];
      CHECK(f.eval(x) == doctest::Approx(expected).epsilon(1e-12));
    }
    break;
  }
}

TEST_CASE("evaluation matches the stacked-feature path") {
  const auto atlas = atlas20();
  const TrueKernelSpec spec = sample_true_kernel(atlas, 7, 13);
  const TaskFunction f = sample_task_function(spec, 10.0, 14);
  Rng rng(15);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd x = point1(rng.uniform(-1.0, 1.0));
    const Eigen::VectorXd stacked = atlas->stack(x);
    double direct = 0.0;
    for (int j = 0; j < atlas->group_count(); ++j) {
      direct += std::sqrt(spec.weights[j]) *
                stacked.segment(atlas->group_offset(j), atlas->group_dim(j))
                    .dot(f.coef.segment(atlas->group_offset(j), atlas->group_dim(j)));
    }
    CHECK(std::abs(f.eval(x) - direct) < 1e-12);
  }
}

TEST_CASE("coverage of the support across tasks") {
  const auto atlas = atlas20();
  const TrueKernelSpec spec = sample_true_kernel(atlas, 5, 16);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto tasks = sample_task_functions(spec, 2, 10.0, seed);
    std::set<int> used;
    for (const TaskFunction& f : tasks) {
      for (int j : spec.support) {
        if (f.coef.segment(atlas->group_offset(j), atlas->group_dim(j)).norm() > 0.0) {
          used.insert(j);
        }
      }
    }
    CHECK(used.size() == spec.support.size());
  }
}

TEST_CASE("generated data shape, determinism and noiseless limit") {
  const auto atlas = atlas20();
  const TrueKernelSpec spec = sample_true_kernel(atlas, 5, 17);
  const auto tasks = sample_task_functions(spec, 50, 10.0, 18);
  const MetaDataset data = generate_meta_data(spec, tasks, 50, 0.01, 19);
  CHECK(data.task_count() == 50);
  CHECK(data.samples_per_task() == 50);
  data.validate();

  const MetaDataset again = generate_meta_data(spec, tasks, 50, 0.01, 19);
  for (int s = 0; s < 50; ++s) {
    CHECK((data.inputs[static_cast<size_t>(s)] - again.inputs[static_cast<size_t>(s)]).norm() == 0.0);
    CHECK((data.labels[static_cast<size_t>(s)] - again.labels[static_cast<size_t>(s)]).norm() == 0.0);
  }

  const MetaDataset clean = generate_meta_data(spec, tasks, 20, 0.0, 21);
  for (int s = 0; s < clean.task_count(); ++s) {
    for (int i = 0; i < 20; ++i) {
      CHECK(clean.labels[static_cast<size_t>(s)][i] ==
            doctest::Approx(tasks[static_cast<size_t>(s)].eval(
                clean.inputs[static_cast<size_t>(s)].row(i).transpose())));
    }
  }
}

TEST_CASE("label variance decomposes into signal plus noise") {
  const auto atlas = atlas20();
  const TrueKernelSpec spec = sample_true_kernel(atlas, 5, 22);
  const auto tasks = sample_task_functions(spec, 1, 10.0, 23);
  const double sigma = 0.8;
  const int n = 100000;
  const MetaDataset data = generate_meta_data(spec, tasks, n, sigma, 24);
  const auto& y = data.labels[0];
  const double label_mean = y.mean();
  const double label_var = (y.array() - label_mean).square().mean();

  // function moments from an independent quadrature pass
  const int quad = 20000;
  double f_mean = 0.0, f_sq = 0.0;
  for (int q = 0; q < quad; ++q) {
    const double x = -1.0 + 2.0 * (q + 0.5) / quad;
    const double v = tasks[0].eval(point1(x));
    f_mean += v;
    f_sq += v * v;
  }
  f_mean /= quad;
  f_sq /= quad;
  const double f_var = f_sq - f_mean * f_mean;
  CHECK(label_var == doctest::Approx(f_var + sigma * sigma).epsilon(0.05));
}

TEST_CASE("uniform-bounded noise keeps the variance and the bound") {
  const auto atlas = atlas20();
  const TrueKernelSpec spec = sample_true_kernel(atlas, 5, 22);
  const auto tasks = sample_task_functions(spec, 1, 10.0, 23);
  const double sigma = 0.5;
  const MetaDataset data =
      generate_meta_data(spec, tasks, 50000, sigma, 24, NoiseKind::UniformBounded);
  double max_abs = 0.0, var = 0.0;
  for (int i = 0; i < 50000; ++i) {
    const double eps =
        data.labels[0][i] - tasks[0].eval(data.inputs[0].row(i).transpose());
    max_abs = std::max(max_abs, std::abs(eps));
    var += eps * eps;
  }
  CHECK(max_abs <= sigma * std::sqrt(3.0) + 1e-12);
  CHECK(var / 50000 == doctest::Approx(sigma * sigma).epsilon(0.05));
}

TEST_CASE("reward draws") {
  const auto atlas = atlas20();
  const TrueKernelSpec spec = sample_true_kernel(atlas, 5, 25);
  const TaskFunction reward = make_reward(spec, 10.0, 26);
  CHECK(std::abs(reward.norm() - 10.0) < 1e-10);
  const TaskFunction other = make_reward(spec, 10.0, 27);
  CHECK((reward.coef - other.coef).norm() > 0.0);
}

TEST_CASE("gp test function covers the support with gaussian coefficients") {
  const auto atlas = atlas20();
  const TrueKernelSpec spec = sample_true_kernel(atlas, 5, 28);
  const TaskFunction f = sample_gp_test_function(spec, 29);
  for (int j : spec.support) {
    CHECK(f.coef.segment(atlas->group_offset(j), atlas->group_dim(j)).norm() > 0.0);
  }
  // coefficients are not rescaled
  CHECK(f.norm() != doctest::Approx(10.0));
}

TEST_CASE("empirical group floor is positive and attained") {
  const auto atlas = atlas20();
  const TrueKernelSpec spec = sample_true_kernel(atlas, 5, 30);
  const auto tasks = sample_task_functions(spec, 25, 10.0, 31);
  const double floor = empirical_group_floor(spec, tasks);
  CHECK(floor > 0.0);
  for (int j : spec.support) {
    double sq = 0.0;
    for (const TaskFunction& f : tasks) {
      sq += spec.weights[j] *
            f.coef.segment(atlas->group_offset(j), atlas->group_dim(j)).squaredNorm();
    }
    CHECK(std::sqrt(sq) >= floor - 1e-12);
  }
}

TEST_CASE("true kernel as meta kernel") {
  const auto atlas = atlas20();
  const TrueKernelSpec spec = sample_true_kernel(atlas, 5, 32);
  const MetaKernel oracle = to_meta_kernel(spec);
  CHECK(oracle.active_set() == spec.support);
  CHECK(!oracle.meta_learned());
  Rng rng(33);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd x = point1(rng.uniform(-1.0, 1.0));
    CHECK(oracle.eval(x, x) <= 1.0 + 1e-12);
  }
  const MetaKernel scaled = to_meta_kernel(spec, 4.0);
  CHECK((scaled.weights() - 4.0 * oracle.weights()).norm() < 1e-14);
}
