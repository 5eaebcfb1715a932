#pragma once

#include <Eigen/Dense>
#include <vector>

#include "barygen/measures.hpp"
#include "barygen/mlp.hpp"

namespace barygen {

struct RqTerm {
  double alpha;
  double lengthscale;
};

/// Positive-definite kernel: either an RBF exp(-r^2 / (2 l^2)) or a sum of
/// rational quadratic terms (1 + r^2 / (2 a l^2))^(-a).
class KernelSpec {
 public:
  enum class Family { kRbf, kRationalQuadratic };

  static KernelSpec rbf(double lengthscale);
  static KernelSpec rational_quadratic(double alpha, double lengthscale);
  static KernelSpec rational_quadratic(std::vector<RqTerm> terms);

  Family family() const { return family_; }
  const std::vector<RqTerm>& terms() const { return terms_; }
  double lengthscale() const { return terms_.front().lengthscale; }

  /// k(x, x): 1 for RBF, the term count for an RQ mixture.
  double diagonal() const;

  /// Kernel value as a function of squared distance.
  double eval_r2(double r2) const;
  /// Derivative of the kernel w.r.t. squared distance.
  double deriv_r2(double r2) const;

 private:
  KernelSpec(Family family, std::vector<RqTerm> terms);
  Family family_;
  std::vector<RqTerm> terms_;
};

double kernel_eval(const KernelSpec& k, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& y);

/// Gram matrix K_ij = k(x_i, y_j).
Eigen::MatrixXd gram_matrix(const KernelSpec& k, const Eigen::MatrixXd& x,
                            const Eigen::MatrixXd& y);

/// Biased (V-statistic) squared maximum mean discrepancy between weighted
/// measures: a^T Kxx a + b^T Kyy b - 2 a^T Kxy b.
double mmd2(const KernelSpec& k, const DiscreteMeasure& mu_x,
            const DiscreteMeasure& mu_y);

/// Analytic gradient of mmd2 w.r.t. each atom of mu_x, weights held fixed.
Eigen::MatrixXd mmd2_grad_points(const KernelSpec& k,
                                 const DiscreteMeasure& mu_x,
                                 const DiscreteMeasure& mu_y);

/// Adversarially trained feature map for the scaled-MMD discrepancy.
using FeatureMap = MlpNet;

struct SmmdConfig {
  /// Kernel applied in feature space.
  KernelSpec base_kernel = KernelSpec::rational_quadratic(
      {{0.2, 1.0}, {0.5, 1.0}, {1.0, 1.0}, {2.0, 1.0}, {5.0, 1.0}});
  double gradient_penalty = 1.0;  // >= 0
  int critic_steps = 5;           // critic iterations per generator step
  double critic_lr = 1e-3;        // Adam step size for critic ascent

  void validate() const;
};

/// Critic objective: MMD^2 between the feature-space images of the two
/// measures minus gradient_penalty times the unit-gradient-norm penalty at
/// interpolated points. The critic ascends this.
double smmd_critic_objective(const SmmdConfig& cfg, const FeatureMap& psi,
                             const DiscreteMeasure& mu_x,
                             const DiscreteMeasure& mu_y);

/// Gradient of smmd_critic_objective w.r.t. the critic parameters.
Eigen::VectorXd smmd_critic_grad(const SmmdConfig& cfg, const FeatureMap& psi,
                                 const DiscreteMeasure& mu_x,
                                 const DiscreteMeasure& mu_y);

/// Generator-side loss under a frozen critic: feature-space MMD^2.
double smmd_generator_loss(const SmmdConfig& cfg, const FeatureMap& psi,
                           const DiscreteMeasure& mu_gen,
                           const DiscreteMeasure& mu_data);

/// Gradient of smmd_generator_loss w.r.t. the generator-side atoms.
Eigen::MatrixXd smmd_generator_grad_points(const SmmdConfig& cfg,
                                           const FeatureMap& psi,
                                           const DiscreteMeasure& mu_gen,
                                           const DiscreteMeasure& mu_data);

/// Points x~_i = t_i x_i + (1 - t_i) y_{i mod M} with the deterministic
/// ladder t_i = (i + 0.5) / N; the sites where the gradient penalty is
/// evaluated.
Eigen::MatrixXd gp_interpolates(const Eigen::MatrixXd& x,
                                const Eigen::MatrixXd& y);

}  // namespace barygen
