#pragma once

#include <Eigen/Dense>
#include <vector>

#include "barygen/measures.hpp"

namespace barygen {

struct SinkhornConfig {
  double epsilon = 0.1;
  int cost_exponent = 2;  // k in {1, 2}: C_ij = ||x_i - y_j||^k
  int max_iterations = 10000;
  double tolerance = 1e-9;     // sup-norm change of the dual potentials
  double anneal_factor = 1.0;  // < 1 anneals epsilon down from the cost scale
  bool record_dual_trace = false;

  void validate() const;
};

struct SinkhornResult {
  Eigen::VectorXd f, g;  // dual potentials
  bool converged = false;
  int iterations = 0;
  double epsilon = 0.0;
  /// Primal value of the entropic problem at the implicit plan:
  /// transport_cost + epsilon * kl.
  double cost = 0.0;
  double transport_cost = 0.0;
  double kl = 0.0;
  /// Max L_inf violation of either marginal of the implicit plan.
  double marginal_error = 0.0;
  std::vector<double> dual_trace;
};

/// C_ij = ||x_i - y_j||_2^k for k in {1, 2}.
Eigen::MatrixXd cost_matrix(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                            int exponent);

/// Log-domain Sinkhorn iterations for min <C, pi> + eps KL(pi || a (x) b).
/// Alternating softmin updates until the sup-norm potential change drops
/// below tolerance or max_iterations is hit (flagged, not thrown). NaN in
/// the potentials throws.
SinkhornResult sinkhorn(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a,
                        const Eigen::VectorXd& b, const SinkhornConfig& cfg);

/// Materialize the implicit plan pi_ij = a_i b_j exp((f_i + g_j - C_ij)/eps).
Eigen::MatrixXd sinkhorn_plan(const Eigen::MatrixXd& cost,
                              const Eigen::VectorXd& a,
                              const Eigen::VectorXd& b,
                              const SinkhornResult& result);

/// Entropic OT between discrete measures; zero-weight atoms are dropped
/// before solving.
SinkhornResult entropic_ot(const DiscreteMeasure& mu_x,
                           const DiscreteMeasure& mu_y,
                           const SinkhornConfig& cfg);

struct SinkhornDivergenceParts {
  SinkhornResult xy, xx, yy;
  double value = 0.0;
  bool all_converged() const {
    return xy.converged && xx.converged && yy.converged;
  }
};

/// Debiased divergence 2 W(x,y) - W(x,x) - W(y,y), all three terms solved
/// with the shared config.
SinkhornDivergenceParts sinkhorn_divergence_parts(const DiscreteMeasure& mu_x,
                                                  const DiscreteMeasure& mu_y,
                                                  const SinkhornConfig& cfg);
double sinkhorn_divergence(const DiscreteMeasure& mu_x,
                           const DiscreteMeasure& mu_y,
                           const SinkhornConfig& cfg);

struct SwValueGrad {
  double value = 0.0;
  Eigen::MatrixXd grad;  // w.r.t. atoms of mu_x
  bool converged = false;
  SinkhornDivergenceParts parts;
};

/// Divergence value together with its envelope gradient w.r.t. the atoms of
/// mu_x: optimal plans are held fixed, the self term contributes through
/// both of its arguments.
SwValueGrad sw_value_and_grad(const DiscreteMeasure& mu_x,
                              const DiscreteMeasure& mu_y,
                              const SinkhornConfig& cfg);

/// Envelope gradient alone; throws if any inner solve fails to converge
/// (refusing a gradient that would be biased beyond the declared envelope
/// error).
Eigen::MatrixXd sw_grad_points(const DiscreteMeasure& mu_x,
                               const DiscreteMeasure& mu_y,
                               const SinkhornConfig& cfg);

struct EntropicValueGrad {
  double value = 0.0;
  Eigen::MatrixXd grad;
  bool converged = false;
  SinkhornResult result;
};

EntropicValueGrad entropic_w_value_and_grad(const DiscreteMeasure& mu_x,
                                            const DiscreteMeasure& mu_y,
                                            const SinkhornConfig& cfg);

/// Envelope gradient of plain entropic OT w.r.t. the atoms of mu_x.
Eigen::MatrixXd entropic_w_grad_points(const DiscreteMeasure& mu_x,
                                       const DiscreteMeasure& mu_y,
                                       const SinkhornConfig& cfg);

}  // namespace barygen
