#pragma once

#include <Eigen/Dense>
#include <vector>

#include "barygen/rng.hpp"

namespace barygen {

/// Per-batch forward records needed for a vector-Jacobian product: the batch
/// input and each layer's pre-activations.
struct MlpActivations {
  Eigen::MatrixXd input;                     // n x in
  std::vector<Eigen::MatrixXd> preacts;      // per layer, n x out_l
};

/// Fully-connected ReLU network with an explicit flat parameter vector.
/// Layer l maps in_l -> out_l via Y = X W_l^T + b_l; ReLU on all but the
/// last layer. Parameters are stored layer by layer, W (column-major) then b.
class MlpNet {
 public:
  /// sizes = {in, hidden..., out}; parameters start at zero.
  explicit MlpNet(std::vector<int> sizes);

  /// Fan-in-scaled uniform init: W ~ U(+-1/sqrt(in_l)), b = 0.
  static MlpNet fan_in_init(std::vector<int> sizes, SeededRng& rng);

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int layer_count() const { return int(sizes_.size()) - 1; }
  const std::vector<int>& sizes() const { return sizes_; }

  Eigen::Index param_count() const { return params_.size(); }
  const Eigen::VectorXd& params() const { return params_; }
  void set_params(const Eigen::VectorXd& v);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x,
                          MlpActivations& acts) const;

  /// Given dL/dY for the recorded batch, returns dL/dparams; if grad_in is
  /// non-null it also receives dL/dX.
  Eigen::VectorXd vjp_params(const MlpActivations& acts,
                             const Eigen::MatrixXd& grad_out,
                             Eigen::MatrixXd* grad_in = nullptr) const;

  /// Frobenius norm of the input Jacobian at each row of x. Piecewise
  /// constant ReLU masks are taken at the evaluation point.
  Eigen::VectorXd jacobian_frobenius(const Eigen::MatrixXd& x) const;

  /// Gradient w.r.t. parameters of mean_i (||J(x_i)||_F - 1)^2, the unit
  /// gradient-norm penalty at the given points. Optionally outputs the
  /// penalty value.
  Eigen::VectorXd jacobian_penalty_grad(const Eigen::MatrixXd& x,
                                        double* penalty_value = nullptr) const;

  /// Smallest |pre-activation| across the batch and hidden layers; used by
  /// tests to stay away from ReLU kinks.
  double min_preactivation_margin(const Eigen::MatrixXd& x) const;

  /// Views into the flat parameter vector.
  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;

 private:
  Eigen::Map<Eigen::MatrixXd> weight_mut(int layer);
  Eigen::Map<Eigen::VectorXd> bias_mut(int layer);

  std::vector<int> sizes_;
  std::vector<Eigen::Index> w_offsets_, b_offsets_;
  Eigen::VectorXd params_;
};

}  // namespace barygen
