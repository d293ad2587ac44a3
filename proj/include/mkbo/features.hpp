#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "mkbo/rng.hpp"

namespace mkbo {

// Legendre polynomial P_degree(x) on [-1, 1] via the three-term recurrence
// (r+1) P_{r+1} = (2r+1) x P_r - r P_{r-1}. Stable at high degree, |P| <= 1.
double legendre_eval(int degree, double x);

// Column layout of the concatenated feature vector: group j occupies
// [offsets[j], offsets[j] + dims[j]).
struct GroupLayout {
  std::vector<int> dims;
  std::vector<int> offsets;
  int total = 0;

  static GroupLayout uniform(int groups, int dim_each);
  static GroupLayout from_dims(std::vector<int> dims);

  int group_count() const { return static_cast<int>(dims.size()); }
  int max_group_dim() const;
};

struct DomainSpec {
  enum class Kind { Box, FiniteGrid };

  Kind kind = Kind::Box;
  Eigen::VectorXd lower, upper;               // Box bounds (also the grid bounding box)
  std::vector<Eigen::VectorXd> grid;          // FiniteGrid candidates

  static DomainSpec box(Eigen::VectorXd lower, Eigen::VectorXd upper);
  static DomainSpec finite_grid(std::vector<Eigen::VectorXd> points);

  int input_dim() const { return static_cast<int>(lower.size()); }
  // Box: exact bounds check. FiniteGrid: bounding-box check (membership in a
  // large grid is not tested point by point).
  bool contains(const Eigen::VectorXd& x) const;
  Eigen::VectorXd sample(Rng& rng) const;
};

enum class AtlasFamily { Legendre1d, Legendre2dTensor, RandomFourier, FourierBands };

// The p base feature maps phi_j and their layout in the stacked d-dimensional
// vector. All families are normalized so k_j(x,x) = |phi_j(x)|^2 <= 1 on the
// domain. Immutable after construction; safe to share across threads.
class FeatureAtlas {
 public:
  // Groups 1..p of the Legendre basis on [-1,1] (the constant P_0 excluded);
  // group g (0-based) evaluates P_{g+1}. With orthonormal = true each feature
  // is scaled by sqrt(2j+1), which makes the basis orthonormal in L2 of the
  // uniform measure (unit average energy per group) at the price of
  // k_j(x,x) reaching 2j+1 at the endpoints instead of staying below 1.
  static FeatureAtlas legendre_1d(int p, bool orthonormal = false);

  // p+1 tensor groups on [-1,1]^2; group j evaluates P_j(x1) * P_{p-j}(x2),
  // scaled by sqrt((2j+1)(2(p-j)+1)) in the orthonormal variant.
  static FeatureAtlas legendre_2d(int p, bool orthonormal = false);

  // count_features random Fourier features for the squared-exponential kernel
  // with the given lengthscale, split evenly into `groups` groups. Features
  // are cos(w'x + b)/sqrt(d_j), which keeps every group kernel below 1.
  static FeatureAtlas random_fourier(int count_features, int input_dim, double lengthscale,
                                     int groups, std::uint64_t seed);
  static FeatureAtlas random_fourier(int count_features, double lengthscale, int groups,
                                     std::uint64_t seed, DomainSpec domain);

  // Frequency-band features on [-1,1]: group g (0-based) holds sin/cos pairs
  // at frequencies {j*d*f0, ..., (j+1)*d*f0} with j = g+1, scaled by
  // 1/sqrt(#pairs) so k_j(x,x) = 1.
  static FeatureAtlas fourier_bands(int p, int band_width, double base_freq);

  AtlasFamily family() const { return family_; }
  const DomainSpec& domain() const { return domain_; }
  const GroupLayout& layout() const { return layout_; }
  int group_count() const { return layout_.group_count(); }
  int group_dim(int j) const { return layout_.dims.at(static_cast<size_t>(j)); }
  int group_offset(int j) const { return layout_.offsets.at(static_cast<size_t>(j)); }
  int total_dim() const { return layout_.total; }
  int max_group_dim() const { return layout_.max_group_dim(); }
  int input_dim() const { return domain_.input_dim(); }

  // phi_j(x), written into out (size d_j). x must lie in the domain.
  void eval_group(int j, const Eigen::VectorXd& x, Eigen::Ref<Eigen::VectorXd> out) const;

  // Concatenation of all phi_j(x) in group order (unit weights).
  Eigen::VectorXd stack(const Eigen::VectorXd& x) const;

  // Row r = stack(points[r]).
  Eigen::MatrixXd stack_rows(const std::vector<Eigen::VectorXd>& points) const;

  // k_j(x, x) for one group.
  double group_kernel_diag(int j, const Eigen::VectorXd& x) const;

  // Sampled frequencies: RandomFourier rows are the per-feature frequency
  // vectors; FourierBands rows are the scalar frequencies per group pair.
  const Eigen::MatrixXd& frequencies() const { return frequencies_; }
  const Eigen::VectorXd& phases() const { return phases_; }

 private:
  FeatureAtlas(AtlasFamily family, GroupLayout layout, DomainSpec domain)
      : family_(family), layout_(std::move(layout)), domain_(std::move(domain)) {}

  void check_point(const Eigen::VectorXd& x) const;
  void eval_group_unchecked(int j, const Eigen::VectorXd& x, Eigen::Ref<Eigen::VectorXd> out) const;

  AtlasFamily family_;
  GroupLayout layout_;
  DomainSpec domain_;
  int legendre_p_ = 0;            // max degree parameter for the Legendre families
  bool orthonormal_ = false;      // Legendre scaling choice
  Eigen::MatrixXd frequencies_;   // RandomFourier: (count x input_dim); FourierBands: (pairs x 1) per group stacked
  Eigen::VectorXd phases_;        // RandomFourier offsets b
  int band_width_ = 0;
  double base_freq_ = 0.0;
};

using AtlasPtr = std::shared_ptr<const FeatureAtlas>;

}  // namespace mkbo
