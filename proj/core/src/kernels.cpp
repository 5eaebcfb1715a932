#include "barygen/kernels.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace barygen {

namespace {

Eigen::MatrixXd pairwise_sqdist(const Eigen::MatrixXd& x,
                                const Eigen::MatrixXd& y) {
  Eigen::MatrixXd d2 = -2.0 * x * y.transpose();
  d2.colwise() += x.rowwise().squaredNorm();
  d2.rowwise() += y.rowwise().squaredNorm().transpose();
  return d2.cwiseMax(0.0);
}

}  // namespace

KernelSpec::KernelSpec(Family family, std::vector<RqTerm> terms)
    : family_(family), terms_(std::move(terms)) {
  if (terms_.empty())
    throw std::invalid_argument("KernelSpec: needs at least one term");
  for (const auto& t : terms_) {
    if (!(t.lengthscale > 0.0))
      throw std::invalid_argument("KernelSpec: lengthscale must be positive");
    if (family_ == Family::kRationalQuadratic && !(t.alpha > 0.0))
      throw std::invalid_argument("KernelSpec: alpha must be positive");
  }
}

KernelSpec KernelSpec::rbf(double lengthscale) {
  return KernelSpec(Family::kRbf, {{1.0, lengthscale}});
}

KernelSpec KernelSpec::rational_quadratic(double alpha, double lengthscale) {
  return KernelSpec(Family::kRationalQuadratic, {{alpha, lengthscale}});
}

KernelSpec KernelSpec::rational_quadratic(std::vector<RqTerm> terms) {
  return KernelSpec(Family::kRationalQuadratic, std::move(terms));
}

double KernelSpec::diagonal() const {
  return family_ == Family::kRbf ? 1.0 : double(terms_.size());
}

double KernelSpec::eval_r2(double r2) const {
  if (family_ == Family::kRbf) {
    const double l = terms_[0].lengthscale;
    return std::exp(-r2 / (2.0 * l * l));
  }
  double sum = 0.0;
  for (const auto& t : terms_)
    sum += std::pow(1.0 + r2 / (2.0 * t.alpha * t.lengthscale * t.lengthscale),
                    -t.alpha);
  return sum;
}

double KernelSpec::deriv_r2(double r2) const {
  if (family_ == Family::kRbf) {
    const double l = terms_[0].lengthscale;
    return -eval_r2(r2) / (2.0 * l * l);
  }
  double sum = 0.0;
  for (const auto& t : terms_) {
    const double l2 = t.lengthscale * t.lengthscale;
    sum += -std::pow(1.0 + r2 / (2.0 * t.alpha * l2), -t.alpha - 1.0) /
           (2.0 * l2);
  }
  return sum;
}

double kernel_eval(const KernelSpec& k, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& y) {
  if (x.size() != y.size())
    throw std::invalid_argument("kernel_eval: dimension mismatch");
  if (!x.allFinite() || !y.allFinite())
    throw std::invalid_argument("kernel_eval: non-finite input");
  return k.eval_r2((x - y).squaredNorm());
}

Eigen::MatrixXd gram_matrix(const KernelSpec& k, const Eigen::MatrixXd& x,
                            const Eigen::MatrixXd& y) {
  if (x.cols() != y.cols())
    throw std::invalid_argument("gram_matrix: dimension mismatch");
  Eigen::MatrixXd g = pairwise_sqdist(x, y);
  for (Eigen::Index j = 0; j < g.cols(); ++j)
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = k.eval_r2(g(i, j));
  return g;
}

double mmd2(const KernelSpec& k, const DiscreteMeasure& mu_x,
            const DiscreteMeasure& mu_y) {
  if (mu_x.dim() != mu_y.dim())
    throw std::invalid_argument("mmd2: ambient dimension mismatch");
  const Eigen::VectorXd& a = mu_x.weights();
  const Eigen::VectorXd& b = mu_y.weights();
  const double xx =
      a.dot(gram_matrix(k, mu_x.points(), mu_x.points()) * a);
  const double yy =
      b.dot(gram_matrix(k, mu_y.points(), mu_y.points()) * b);
  const double xy =
      a.dot(gram_matrix(k, mu_x.points(), mu_y.points()) * b);
  return xx + yy - 2.0 * xy;
}

Eigen::MatrixXd mmd2_grad_points(const KernelSpec& k,
                                 const DiscreteMeasure& mu_x,
                                 const DiscreteMeasure& mu_y) {
  if (mu_x.dim() != mu_y.dim())
    throw std::invalid_argument("mmd2_grad_points: dimension mismatch");
  const Eigen::MatrixXd& x = mu_x.points();
  const Eigen::MatrixXd& y = mu_y.points();
  const Eigen::VectorXd& a = mu_x.weights();
  const Eigen::VectorXd& b = mu_y.weights();

  // W(i,j) = dk/d(r^2) at the pair (i, j); grad through r^2 = ||xi - xj||^2.
  Eigen::MatrixXd wxx = pairwise_sqdist(x, x);
  Eigen::MatrixXd wxy = pairwise_sqdist(x, y);
  for (Eigen::Index j = 0; j < wxx.cols(); ++j)
    for (Eigen::Index i = 0; i < wxx.rows(); ++i)
      wxx(i, j) = k.deriv_r2(wxx(i, j));
  for (Eigen::Index j = 0; j < wxy.cols(); ++j)
    for (Eigen::Index i = 0; i < wxy.rows(); ++i)
      wxy(i, j) = k.deriv_r2(wxy(i, j));

  // d mmd2 / d x_n = 4 a_n [ sum_j a_j w_xx(n,j) (x_n - x_j)
  //                        - sum_j b_j w_xy(n,j) (x_n - y_j) ].
  const Eigen::VectorXd u = wxx * a;  // row sums weighted by a
  const Eigen::VectorXd v = wxy * b;
  Eigen::MatrixXd grad =
      (u - v).asDiagonal() * x - (wxx * a.asDiagonal()) * x +
      (wxy * b.asDiagonal()) * y;
  grad = 4.0 * a.asDiagonal() * grad;
  return grad;
}

void SmmdConfig::validate() const {
  if (gradient_penalty < 0.0)
    throw std::invalid_argument("SmmdConfig: gradient penalty must be >= 0");
  if (critic_steps < 1)
    throw std::invalid_argument("SmmdConfig: critic steps must be >= 1");
  if (!(critic_lr > 0.0))
    throw std::invalid_argument("SmmdConfig: critic lr must be positive");
}

Eigen::MatrixXd gp_interpolates(const Eigen::MatrixXd& x,
                                const Eigen::MatrixXd& y) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd pts(n, x.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = (double(i) + 0.5) / double(n);
    pts.row(i) = t * x.row(i) + (1.0 - t) * y.row(i % y.rows());
  }
  return pts;
}

namespace {

DiscreteMeasure pushforward(const FeatureMap& psi, const DiscreteMeasure& mu,
                            MlpActivations* acts) {
  MlpActivations scratch;
  Eigen::MatrixXd feats = psi.forward(mu.points(), acts ? *acts : scratch);
  return DiscreteMeasure(std::move(feats), mu.weights());
}

}  // namespace

double smmd_critic_objective(const SmmdConfig& cfg, const FeatureMap& psi,
                             const DiscreteMeasure& mu_x,
                             const DiscreteMeasure& mu_y) {
  cfg.validate();
  if (psi.input_dim() != mu_x.dim() || psi.input_dim() != mu_y.dim())
    throw std::invalid_argument(
        "smmd_critic_objective: feature map input dimension mismatch");
  const DiscreteMeasure fx = pushforward(psi, mu_x, nullptr);
  const DiscreteMeasure fy = pushforward(psi, mu_y, nullptr);
  double value = mmd2(cfg.base_kernel, fx, fy);
  if (cfg.gradient_penalty > 0.0) {
    const Eigen::MatrixXd pts = gp_interpolates(mu_x.points(), mu_y.points());
    const Eigen::VectorXd norms = psi.jacobian_frobenius(pts);
    const double penalty = (norms.array() - 1.0).square().mean();
    value -= cfg.gradient_penalty * penalty;
  }
  return value;
}

Eigen::VectorXd smmd_critic_grad(const SmmdConfig& cfg, const FeatureMap& psi,
                                 const DiscreteMeasure& mu_x,
                                 const DiscreteMeasure& mu_y) {
  cfg.validate();
  MlpActivations acts_x, acts_y;
  const DiscreteMeasure fx = pushforward(psi, mu_x, &acts_x);
  const DiscreteMeasure fy = pushforward(psi, mu_y, &acts_y);
  const Eigen::MatrixXd gx = mmd2_grad_points(cfg.base_kernel, fx, fy);
  const Eigen::MatrixXd gy = mmd2_grad_points(cfg.base_kernel, fy, fx);
  Eigen::VectorXd grad =
      psi.vjp_params(acts_x, gx) + psi.vjp_params(acts_y, gy);
  if (cfg.gradient_penalty > 0.0) {
    const Eigen::MatrixXd pts = gp_interpolates(mu_x.points(), mu_y.points());
    grad -= cfg.gradient_penalty * psi.jacobian_penalty_grad(pts);
  }
  return grad;
}

double smmd_generator_loss(const SmmdConfig& cfg, const FeatureMap& psi,
                           const DiscreteMeasure& mu_gen,
                           const DiscreteMeasure& mu_data) {
  const DiscreteMeasure fg = pushforward(psi, mu_gen, nullptr);
  const DiscreteMeasure fd = pushforward(psi, mu_data, nullptr);
  return mmd2(cfg.base_kernel, fg, fd);
}

Eigen::MatrixXd smmd_generator_grad_points(const SmmdConfig& cfg,
                                           const FeatureMap& psi,
                                           const DiscreteMeasure& mu_gen,
                                           const DiscreteMeasure& mu_data) {
  MlpActivations acts;
  const DiscreteMeasure fg = pushforward(psi, mu_gen, &acts);
  const DiscreteMeasure fd = pushforward(psi, mu_data, nullptr);
  const Eigen::MatrixXd gfeat = mmd2_grad_points(cfg.base_kernel, fg, fd);
  Eigen::MatrixXd grad_in;
  psi.vjp_params(acts, gfeat, &grad_in);
  return grad_in;
}

}  // namespace barygen
