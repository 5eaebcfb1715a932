#include "barygen/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace barygen {

MlpNet::MlpNet(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2)
    throw std::invalid_argument("MlpNet: need at least input and output size");
  for (int s : sizes_)
    if (s < 1) throw std::invalid_argument("MlpNet: layer sizes must be >= 1");
  Eigen::Index total = 0;
  for (int l = 0; l + 1 < int(sizes_.size()); ++l) {
    w_offsets_.push_back(total);
    total += Eigen::Index(sizes_[l + 1]) * sizes_[l];
    b_offsets_.push_back(total);
    total += sizes_[l + 1];
  }
  params_ = Eigen::VectorXd::Zero(total);
}

MlpNet MlpNet::fan_in_init(std::vector<int> sizes, SeededRng& rng) {
  MlpNet net(std::move(sizes));
  for (int l = 0; l < net.layer_count(); ++l) {
    const double bound = 1.0 / std::sqrt(double(net.sizes_[l]));
    auto w = net.weight_mut(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i)
        w(i, j) = bound * (2.0 * rng.uniform() - 1.0);
  }
  return net;
}

void MlpNet::set_params(const Eigen::VectorXd& v) {
  if (v.size() != params_.size())
    throw std::invalid_argument("MlpNet::set_params: length mismatch");
  if (!v.allFinite())
    throw std::invalid_argument("MlpNet::set_params: non-finite parameter");
  params_ = v;
}

Eigen::Map<const Eigen::MatrixXd> MlpNet::weight(int l) const {
  return {params_.data() + w_offsets_[l], sizes_[l + 1], sizes_[l]};
}

Eigen::Map<const Eigen::VectorXd> MlpNet::bias(int l) const {
  return {params_.data() + b_offsets_[l], sizes_[l + 1]};
}

Eigen::Map<Eigen::MatrixXd> MlpNet::weight_mut(int l) {
  return {params_.data() + w_offsets_[l], sizes_[l + 1], sizes_[l]};
}

Eigen::Map<Eigen::VectorXd> MlpNet::bias_mut(int l) {
  return {params_.data() + b_offsets_[l], sizes_[l + 1]};
}

Eigen::MatrixXd MlpNet::forward(const Eigen::MatrixXd& x) const {
  MlpActivations scratch;
  return forward(x, scratch);
}

Eigen::MatrixXd MlpNet::forward(const Eigen::MatrixXd& x,
                                MlpActivations& acts) const {
  if (x.cols() != input_dim())
    throw std::invalid_argument("MlpNet::forward: input dimension mismatch");
  acts.input = x;
  acts.preacts.clear();
  acts.preacts.reserve(layer_count());
  Eigen::MatrixXd h = x;
  for (int l = 0; l < layer_count(); ++l) {
    Eigen::MatrixXd z = h * weight(l).transpose();
    z.rowwise() += bias(l).transpose();
    acts.preacts.push_back(z);
    if (l + 1 < layer_count())
      h = z.cwiseMax(0.0);
    else
      h = std::move(z);
  }
  return h;
}

Eigen::VectorXd MlpNet::vjp_params(const MlpActivations& acts,
                                   const Eigen::MatrixXd& grad_out,
                                   Eigen::MatrixXd* grad_in) const {
  if (int(acts.preacts.size()) != layer_count())
    throw std::invalid_argument("MlpNet::vjp_params: stale activations");
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());
  Eigen::MatrixXd g = grad_out;  // dL/dz for the current layer
  for (int l = layer_count() - 1; l >= 0; --l) {
    // Input that fed layer l.
    Eigen::MatrixXd a_in = l == 0
                               ? acts.input
                               : acts.preacts[l - 1].cwiseMax(0.0).eval();
    Eigen::Map<Eigen::MatrixXd>(grad.data() + w_offsets_[l], sizes_[l + 1],
                                sizes_[l]) = g.transpose() * a_in;
    Eigen::Map<Eigen::VectorXd>(grad.data() + b_offsets_[l], sizes_[l + 1]) =
        g.colwise().sum().transpose();
    if (l > 0 || grad_in != nullptr) {
      Eigen::MatrixXd gx = g * weight(l);
      if (l > 0) {
        gx.array() *= (acts.preacts[l - 1].array() > 0.0).cast<double>();
        g = std::move(gx);
      } else {
        *grad_in = std::move(gx);
      }
    }
  }
  return grad;
}

Eigen::VectorXd MlpNet::jacobian_frobenius(const Eigen::MatrixXd& x) const {
  MlpActivations acts;
  forward(x, acts);
  const Eigen::Index n = x.rows();
  Eigen::VectorXd norms(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    // J = W_L D_{L-1} ... D_1 W_1, masks taken at sample i.
    Eigen::MatrixXd j = weight(0);
    for (int l = 1; l < layer_count(); ++l) {
      Eigen::VectorXd mask =
          (acts.preacts[l - 1].row(i).transpose().array() > 0.0)
              .cast<double>();
      j = weight(l) * mask.asDiagonal() * j;
    }
    norms(i) = j.norm();
  }
  return norms;
}

Eigen::VectorXd MlpNet::jacobian_penalty_grad(const Eigen::MatrixXd& x,
                                              double* penalty_value) const {
  MlpActivations acts;
  forward(x, acts);
  const Eigen::Index n = x.rows();
  const int layers = layer_count();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());
  double penalty = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<Eigen::VectorXd> masks(layers - 1);
    for (int l = 0; l + 1 < layers; ++l)
      masks[l] = (acts.preacts[l].row(i).transpose().array() > 0.0)
                     .cast<double>();
    // Prefix products B_l (input side of W_l) and the full Jacobian.
    std::vector<Eigen::MatrixXd> prefix(layers);
    prefix[0] = Eigen::MatrixXd::Identity(input_dim(), input_dim());
    for (int l = 1; l < layers; ++l)
      prefix[l] = masks[l - 1].asDiagonal() * (weight(l - 1) * prefix[l - 1]);
    Eigen::MatrixXd jac = weight(layers - 1) * prefix[layers - 1];
    const double norm = jac.norm();
    penalty += (norm - 1.0) * (norm - 1.0);
    if (norm <= 0.0) continue;  // flat region: zero gradient
    const double coeff = 2.0 * (norm - 1.0) / norm;
    // Suffix products A_l (output side of W_l).
    Eigen::MatrixXd suffix =
        Eigen::MatrixXd::Identity(output_dim(), output_dim());
    for (int l = layers - 1; l >= 0; --l) {
      // d||J||_F^2 / dW_l = 2 A_l^T J B_l^T with J = A_l W_l B_l.
      Eigen::Map<Eigen::MatrixXd>(grad.data() + w_offsets_[l], sizes_[l + 1],
                                  sizes_[l])
          .noalias() += coeff * suffix.transpose() * jac * prefix[l].transpose();
      if (l > 0) suffix = suffix * weight(l) * masks[l - 1].asDiagonal();
    }
  }
  if (penalty_value != nullptr) *penalty_value = penalty / double(n);
  return grad / double(n);
}

double MlpNet::min_preactivation_margin(const Eigen::MatrixXd& x) const {
  MlpActivations acts;
  forward(x, acts);
  double margin = std::numeric_limits<double>::infinity();
  for (int l = 0; l + 1 < layer_count(); ++l)
    margin = std::min(margin, acts.preacts[l].cwiseAbs().minCoeff());
  return margin;
}

}  // namespace barygen
