#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "barygen/rng.hpp"

namespace barygen {

/// An empirical probability measure: N weighted atoms in R^d. Immutable after
/// construction. Construction enforces the invariants: finite coordinates,
/// nonnegative weights summing to one within kWeightTol, N >= 1, d >= 1.
class DiscreteMeasure {
 public:
  static constexpr double kWeightTol = 1e-12;

  DiscreteMeasure(Eigen::MatrixXd points, Eigen::VectorXd weights);

  /// Atoms with uniform weights 1/N.
  static DiscreteMeasure uniform(Eigen::MatrixXd points);

  const Eigen::MatrixXd& points() const { return points_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  Eigen::Index size() const { return points_.rows(); }
  Eigen::Index dim() const { return points_.cols(); }

 private:
  Eigen::MatrixXd points_;   // N x d atom locations
  Eigen::VectorXd weights_;  // simplex weights
};

/// Mean and symmetric PSD covariance of a Gaussian on R^d.
struct GaussianSpec {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  Eigen::Index dim() const { return mean.size(); }

  /// Throws if the covariance is asymmetric beyond 1e-12 or has an
  /// eigenvalue below -1e-10.
  void validate() const;

  /// Symmetric PSD square root (eigenvalues clamped at zero).
  Eigen::MatrixXd sqrt_covariance() const;
};

/// n i.i.d. draws from the Gaussian, uniform weights.
DiscreteMeasure sample_gaussian(const GaussianSpec& spec, Eigen::Index n,
                                SeededRng& rng);

/// Geometry of one nested-ellipse pair: a shared center, outer semi-axes, and
/// the inner ellipse as a scaled copy of the outer one.
struct EllipsePairGeometry {
  Eigen::Vector2d center;
  Eigen::Vector2d outer_axes;
  double inner_scale = 0.5;
};

struct EllipseDataset {
  std::vector<DiscreteMeasure> measures;
  std::vector<EllipsePairGeometry> geometry;
};

/// p random nested-ellipse measures of n_per uniform-weight atoms each.
/// Atoms are placed at uniformly drawn boundary angles, the first n_per/2 on
/// the outer ellipse and the rest on the inner one. Centers are uniform in
/// [-0.5, 0.5]^2, outer semi-axes uniform in [0.8, 1.2], and the inner
/// ellipse is the outer one scaled by a factor uniform in [0.4, 0.6].
/// Requires p >= 1 and n_per >= 2 even.
EllipseDataset make_nested_ellipses_detailed(int p, int n_per, SeededRng& rng);
std::vector<DiscreteMeasure> make_nested_ellipses(int p, int n_per,
                                                  SeededRng& rng);

/// j atoms drawn with replacement according to the measure's weights,
/// returned with uniform weights 1/j. Requires 1 <= j.
DiscreteMeasure subsample(const DiscreteMeasure& mu, Eigen::Index j,
                          SeededRng& rng);

/// Weighted first and second moments of a measure as a GaussianSpec.
GaussianSpec fit_gaussian(const DiscreteMeasure& mu);

/// CSV point-cloud I/O. Header row is `x0,...,x{d-1}` with an optional final
/// `w` column; loaded weights are renormalized, missing weights are uniform.
/// Parse failures report the offending line number.
DiscreteMeasure load_csv(const std::string& path);
void save_csv(const DiscreteMeasure& mu, const std::string& path);

}  // namespace barygen
