#include "mkbo/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace mkbo {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

double legendre_eval(int degree, double x) {
  require(degree >= 0, "legendre_eval: degree must be non-negative");
  require(x >= -1.0 && x <= 1.0, "legendre_eval: x must lie in [-1, 1]");
  if (degree == 0) return 1.0;
  if (degree == 1) return x;
  double pm2 = 1.0;
  double pm1 = x;
  double p = x;
  for (int r = 1; r < degree; ++r) {
    p = ((2.0 * r + 1.0) * x * pm1 - r * pm2) / (r + 1.0);
    pm2 = pm1;
    pm1 = p;
  }
  return p;
}

GroupLayout GroupLayout::uniform(int groups, int dim_each) {
  require(groups >= 1 && dim_each >= 1, "GroupLayout: groups and dims must be positive");
  std::vector<int> dims(static_cast<size_t>(groups), dim_each);
  return from_dims(std::move(dims));
}

GroupLayout GroupLayout::from_dims(std::vector<int> dims) {
  require(!dims.empty(), "GroupLayout: at least one group");
  GroupLayout layout;
  layout.dims = std::move(dims);
  layout.offsets.resize(layout.dims.size());
  int offset = 0;
  for (size_t j = 0; j < layout.dims.size(); ++j) {
    require(layout.dims[j] >= 1, "GroupLayout: group dims must be positive");
    layout.offsets[j] = offset;
    offset += layout.dims[j];
  }
  layout.total = offset;
  return layout;
}

int GroupLayout::max_group_dim() const {
  return *std::max_element(dims.begin(), dims.end());
}

DomainSpec DomainSpec::box(Eigen::VectorXd lower, Eigen::VectorXd upper) {
  require(lower.size() == upper.size() && lower.size() > 0, "DomainSpec: bound sizes must match");
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    require(std::isfinite(lower[i]) && std::isfinite(upper[i]) && lower[i] < upper[i],
            "DomainSpec: box bounds must be finite with lower < upper");
  }
  DomainSpec d;
  d.kind = Kind::Box;
  d.lower = std::move(lower);
  d.upper = std::move(upper);
  return d;
}

DomainSpec DomainSpec::finite_grid(std::vector<Eigen::VectorXd> points) {
  require(!points.empty(), "DomainSpec: finite grid must be non-empty");
  const Eigen::Index dim = points.front().size();
  for (const auto& p : points) require(p.size() == dim, "DomainSpec: inconsistent grid dimension");

  // Duplicate detection by lexicographic sort of row indices.
  std::vector<int> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](int a, int b) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      if (points[static_cast<size_t>(a)][i] != points[static_cast<size_t>(b)][i])
        return points[static_cast<size_t>(a)][i] < points[static_cast<size_t>(b)][i];
    }
    return false;
  };
  std::sort(order.begin(), order.end(), less);
  for (size_t i = 1; i < order.size(); ++i) {
    require(less(order[i - 1], order[i]), "DomainSpec: finite grid contains duplicate points");
  }

  DomainSpec d;
  d.kind = Kind::FiniteGrid;
  d.lower = points.front();
  d.upper = points.front();
  for (const auto& p : points) {
    d.lower = d.lower.cwiseMin(p);
    d.upper = d.upper.cwiseMax(p);
  }
  d.grid = std::move(points);
  return d;
}

bool DomainSpec::contains(const Eigen::VectorXd& x) const {
  if (x.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
  }
  return true;
}

Eigen::VectorXd DomainSpec::sample(Rng& rng) const {
  if (kind == Kind::FiniteGrid) {
    return grid[static_cast<size_t>(rng.uniform_int(grid.size()))];
  }
  Eigen::VectorXd x(lower.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.uniform(lower[i], upper[i]);
  return x;
}

FeatureAtlas FeatureAtlas::legendre_1d(int p, bool orthonormal) {
  require(p >= 1, "legendre_1d: p must be at least 1");
  Eigen::VectorXd lo(1), hi(1);
  lo << -1.0;
  hi << 1.0;
  FeatureAtlas atlas(AtlasFamily::Legendre1d, GroupLayout::uniform(p, 1),
                     DomainSpec::box(lo, hi));
  atlas.legendre_p_ = p;
  atlas.orthonormal_ = orthonormal;
  return atlas;
}

FeatureAtlas FeatureAtlas::legendre_2d(int p, bool orthonormal) {
  require(p >= 1, "legendre_2d: p must be at least 1");
  Eigen::VectorXd lo(2), hi(2);
  lo << -1.0, -1.0;
  hi << 1.0, 1.0;
  FeatureAtlas atlas(AtlasFamily::Legendre2dTensor, GroupLayout::uniform(p + 1, 1),
                     DomainSpec::box(lo, hi));
  atlas.legendre_p_ = p;
  atlas.orthonormal_ = orthonormal;
  return atlas;
}

FeatureAtlas FeatureAtlas::random_fourier(int count_features, int input_dim, double lengthscale,
                                          int groups, std::uint64_t seed) {
  require(input_dim >= 1, "random_fourier: input_dim must be positive");
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(input_dim, -1.0);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(input_dim, 1.0);
  return random_fourier(count_features, lengthscale, groups, seed, DomainSpec::box(lo, hi));
}

FeatureAtlas FeatureAtlas::random_fourier(int count_features, double lengthscale, int groups,
                                          std::uint64_t seed, DomainSpec domain) {
  require(count_features >= 1 && groups >= 1, "random_fourier: counts must be positive");
  require(count_features % groups == 0,
          "random_fourier: count_features must be divisible by groups");
  require(lengthscale > 0.0, "random_fourier: lengthscale must be positive");
  const int input_dim = domain.input_dim();

  FeatureAtlas atlas(AtlasFamily::RandomFourier,
                     GroupLayout::uniform(groups, count_features / groups), std::move(domain));
  // Spectral density of the SE kernel: w ~ N(0, I / lengthscale^2).
  Rng rng(seed);
  atlas.frequencies_.resize(count_features, input_dim);
  atlas.phases_.resize(count_features);
  for (int r = 0; r < count_features; ++r) {
    for (int c = 0; c < input_dim; ++c) atlas.frequencies_(r, c) = rng.normal() / lengthscale;
    atlas.phases_[r] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  return atlas;
}

FeatureAtlas FeatureAtlas::fourier_bands(int p, int band_width, double base_freq) {
  require(p >= 1, "fourier_bands: p must be at least 1");
  require(band_width >= 1, "fourier_bands: band width must be at least 1");
  require(base_freq > 0.0, "fourier_bands: base frequency must be positive");
  Eigen::VectorXd lo(1), hi(1);
  lo << -1.0;
  hi << 1.0;
  const int pairs = band_width + 1;  // frequencies j*d*f0 .. (j+1)*d*f0 inclusive
  FeatureAtlas atlas(AtlasFamily::FourierBands, GroupLayout::uniform(p, 2 * pairs),
                     DomainSpec::box(lo, hi));
  atlas.band_width_ = band_width;
  atlas.base_freq_ = base_freq;
  atlas.frequencies_.resize(p * pairs, 1);
  for (int g = 0; g < p; ++g) {
    const int band = g + 1;  // bands indexed 1..p, like the 1d Legendre groups
    for (int i = 0; i <= band_width; ++i) {
      atlas.frequencies_(g * pairs + i, 0) = base_freq * (band * band_width + i);
    }
  }
  return atlas;
}

void FeatureAtlas::check_point(const Eigen::VectorXd& x) const {
  if (!domain_.contains(x)) throw std::invalid_argument("FeatureAtlas: point outside the domain");
}

void FeatureAtlas::eval_group(int j, const Eigen::VectorXd& x,
                              Eigen::Ref<Eigen::VectorXd> out) const {
  require(j >= 0 && j < group_count(), "FeatureAtlas: group index out of range");
  check_point(x);
  eval_group_unchecked(j, x, out);
}

void FeatureAtlas::eval_group_unchecked(int j, const Eigen::VectorXd& x,
                                        Eigen::Ref<Eigen::VectorXd> out) const {
  switch (family_) {
    case AtlasFamily::Legendre1d: {
      const int degree = j + 1;
      const double scale = orthonormal_ ? std::sqrt(2.0 * degree + 1.0) : 1.0;
      out[0] = scale * legendre_eval(degree, x[0]);
      return;
    }
    case AtlasFamily::Legendre2dTensor: {
      const double scale =
          orthonormal_ ? std::sqrt((2.0 * j + 1.0) * (2.0 * (legendre_p_ - j) + 1.0)) : 1.0;
      out[0] = scale * legendre_eval(j, x[0]) * legendre_eval(legendre_p_ - j, x[1]);
      return;
    }
    case AtlasFamily::RandomFourier: {
      const int dj = group_dim(j);
      const int off = group_offset(j);
      const double scale = 1.0 / std::sqrt(static_cast<double>(dj));
      for (int r = 0; r < dj; ++r) {
        out[r] = scale * std::cos(frequencies_.row(off + r).dot(x) + phases_[off + r]);
      }
      return;
    }
    case AtlasFamily::FourierBands: {
      const int pairs = band_width_ + 1;
      const double scale = 1.0 / std::sqrt(static_cast<double>(pairs));
      for (int i = 0; i < pairs; ++i) {
        const double f = frequencies_(j * pairs + i, 0);
        out[2 * i] = scale * std::sin(f * x[0]);
        out[2 * i + 1] = scale * std::cos(f * x[0]);
      }
      return;
    }
  }
  throw std::logic_error("FeatureAtlas: unknown family");
}

Eigen::VectorXd FeatureAtlas::stack(const Eigen::VectorXd& x) const {
  check_point(x);
  Eigen::VectorXd out(total_dim());
  for (int j = 0; j < group_count(); ++j) {
    eval_group_unchecked(j, x, out.segment(group_offset(j), group_dim(j)));
  }
  return out;
}

Eigen::MatrixXd FeatureAtlas::stack_rows(const std::vector<Eigen::VectorXd>& points) const {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(points.size()), total_dim());
  for (size_t r = 0; r < points.size(); ++r) rows.row(static_cast<Eigen::Index>(r)) = stack(points[r]);
  return rows;
}

double FeatureAtlas::group_kernel_diag(int j, const Eigen::VectorXd& x) const {
  Eigen::VectorXd phi(group_dim(j));
  eval_group(j, x, phi);
  return phi.squaredNorm();
}

}  // namespace mkbo
