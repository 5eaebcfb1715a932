#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "barygen/kernels.hpp"
#include "barygen/measures.hpp"

namespace barygen {

enum class AssignmentBackend { kAuto, kEnumeration, kHungarian };

struct AssignmentResult {
  double value = 0.0;            // (1/N) sum_i C(i, perm[i])
  std::vector<int> permutation;  // row i matched to column permutation[i]
};

/// Exact OT between two uniform N-atom clouds: the assignment problem for
/// C_ij = ||x_i - y_j||^k. Enumeration up to N = 8, Hungarian up to N = 64.
AssignmentResult exact_ot_uniform(
    const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int exponent,
    AssignmentBackend backend = AssignmentBackend::kAuto);

struct MultiMarginalResult {
  /// One index assignment per measure; assignment[0] is the identity.
  std::vector<std::vector<int>> assignment;
  Eigen::MatrixXd barycenter_atoms;  // T(X) per coupled tuple, N x d
  double objective = 0.0;            // min-form optimum
  double max_form_value = 0.0;       // max_Q (1/N) sum ||T(X)||^2
  std::vector<std::vector<int>> max_form_assignment;
};

/// Exact multi-marginal transport over deterministic (permutation) couplings
/// of P uniform N-atom measures: minimizes (1/N) sum_i sum_p
/// beta_p ||x^p_i - T(X_i)||^2 with T(X) = sum_p beta_p x^p. Also evaluates
/// the equivalent maximization of (1/N) sum_i ||T(X_i)||^2. Enumerable sizes
/// only: N <= 6, P <= 3.
MultiMarginalResult multimarginal_bruteforce(
    const std::vector<DiscreteMeasure>& measures, const Eigen::VectorXd& beta);

/// sum_p beta_p W_2^2(candidate, mu_p), each term exact; all measures must be
/// uniform with the candidate's atom count, within exact_ot_uniform limits.
double w2_barycenter_objective(const DiscreteMeasure& candidate,
                               const std::vector<DiscreteMeasure>& measures,
                               const Eigen::VectorXd& beta);

/// The W_2 barycenter of Gaussian specs: mean = sum beta_p m_p, covariance
/// from the standard fixed-point map S <- sum_p beta_p (S^1/2 S_p S^1/2)^1/2
/// iterated until the Frobenius change drops below tol.
GaussianSpec gaussian_w2_barycenter(const std::vector<GaussianSpec>& specs,
                                    const Eigen::VectorXd& beta,
                                    double tol = 1e-10, int max_iter = 500);

struct MixtureObjectiveResult {
  double value = 0.0;       // F(mixture) = sum_p beta_p MMD^2(mixture, mu_p)
  DiscreteMeasure mixture;  // weighted concatenation sum_p beta_p mu_p
};

/// Builds the mixture measure and evaluates the MMD barycenter functional at
/// it via exact kernel sums.
MixtureObjectiveResult mmd_mixture_objective(
    const std::vector<DiscreteMeasure>& measures, const Eigen::VectorXd& beta,
    const KernelSpec& kernel);

/// sum_p beta_p MMD^2(candidate, mu_p).
double mmd_barycenter_objective(const DiscreteMeasure& candidate,
                                const std::vector<DiscreteMeasure>& measures,
                                const Eigen::VectorXd& beta,
                                const KernelSpec& kernel);

/// Central finite differences, coordinate-wise; the oracle behind the
/// gradient acceptance checks. Throws if the loss is non-finite at a probe.
Eigen::VectorXd finite_difference_grad(
    const std::function<double(const Eigen::VectorXd&)>& loss,
    const Eigen::VectorXd& params, double h);

}  // namespace barygen
