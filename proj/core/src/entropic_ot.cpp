#include "barygen/entropic_ot.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace barygen {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_simplex(const Eigen::VectorXd& w, const char* name) {
  if ((w.array() < 0.0).any() || std::abs(w.sum() - 1.0) > 1e-9)
    throw std::invalid_argument(std::string("sinkhorn: ") + name +
                                " must lie on the probability simplex");
}

Eigen::VectorXd safe_log(const Eigen::VectorXd& w) {
  Eigen::VectorXd out(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i)
    out(i) = w(i) > 0.0 ? std::log(w(i)) : kNegInf;
  return out;
}

// Row-wise -eps * logsumexp of T; T may contain -inf entries.
void softmin_rows(const Eigen::MatrixXd& t, double eps, Eigen::VectorXd& out) {
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    const double m = t.row(i).maxCoeff();
    if (!std::isfinite(m)) {
      out(i) = kNegInf;  // empty row mass; cannot happen for simplex b
      continue;
    }
    double s = 0.0;
    for (Eigen::Index j = 0; j < t.cols(); ++j) s += std::exp(t(i, j) - m);
    out(i) = -eps * (m + std::log(s));
  }
}

}  // namespace

void SinkhornConfig::validate() const {
  if (!(epsilon > 0.0))
    throw std::invalid_argument("SinkhornConfig: epsilon must be positive");
  if (cost_exponent != 1 && cost_exponent != 2)
    throw std::invalid_argument("SinkhornConfig: cost exponent must be 1 or 2");
  if (max_iterations < 1)
    throw std::invalid_argument("SinkhornConfig: max iterations must be >= 1");
  if (!(tolerance > 0.0))
    throw std::invalid_argument("SinkhornConfig: tolerance must be positive");
  if (!(anneal_factor > 0.0) || anneal_factor > 1.0)
    throw std::invalid_argument("SinkhornConfig: anneal factor must be in (0,1]");
}

Eigen::MatrixXd cost_matrix(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                            int exponent) {
  if (x.cols() != y.cols())
    throw std::invalid_argument("cost_matrix: dimension mismatch");
  if (exponent != 1 && exponent != 2)
    throw std::invalid_argument("cost_matrix: exponent must be 1 or 2");
  // (|x|^2 + |y|^2) - 2 x.y, grouped so that cost_matrix(y, x) is the exact
  // bitwise transpose.
  const Eigen::VectorXd sqx = x.rowwise().squaredNorm();
  const Eigen::VectorXd sqy = y.rowwise().squaredNorm();
  Eigen::MatrixXd c(x.rows(), y.rows());
  for (Eigen::Index j = 0; j < y.rows(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double dot = 0.0;
      for (Eigen::Index k = 0; k < x.cols(); ++k) dot += x(i, k) * y(j, k);
      c(i, j) = (sqx(i) + sqy(j)) - 2.0 * dot;
    }
  c = c.cwiseMax(0.0);
  if (exponent == 1) c = c.cwiseSqrt();
  return c;
}

SinkhornResult sinkhorn(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a,
                        const Eigen::VectorXd& b, const SinkhornConfig& cfg) {
  cfg.validate();
  if (cost.rows() != a.size() || cost.cols() != b.size())
    throw std::invalid_argument("sinkhorn: cost shape mismatch");
  if (!cost.allFinite())
    throw std::invalid_argument("sinkhorn: non-finite cost");
  check_simplex(a, "a");
  check_simplex(b, "b");

  const Eigen::Index n = a.size(), m = b.size();
  const Eigen::VectorXd log_a = safe_log(a), log_b = safe_log(b);

  SinkhornResult res;
  res.f = Eigen::VectorXd::Zero(n);
  res.g = Eigen::VectorXd::Zero(m);
  res.epsilon = cfg.epsilon;

  const double cost_scale = cost.maxCoeff();
  double eps = cfg.anneal_factor < 1.0 && cost_scale > cfg.epsilon
                   ? cost_scale
                   : cfg.epsilon;

  Eigen::VectorXd f_new(n), g_new(m);
  Eigen::MatrixXd t(n, m), tt(m, n);
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    // f-update makes the row marginals exact, then g-update the columns.
    t = (res.g.transpose().replicate(n, 1) - cost) / eps;
    t.rowwise() += log_b.transpose();
    softmin_rows(t, eps, f_new);

    tt = ((f_new.transpose().replicate(m, 1) - cost.transpose()) / eps);
    tt.rowwise() += log_a.transpose();
    softmin_rows(tt, eps, g_new);

    const double delta =
        std::max((f_new - res.f).cwiseAbs().maxCoeff(),
                 (g_new - res.g).cwiseAbs().maxCoeff());
    res.f = f_new;
    res.g = g_new;
    res.iterations = it;
    if (!res.f.allFinite() || !res.g.allFinite())
      throw std::runtime_error("sinkhorn: NaN in dual potentials");

    if (cfg.record_dual_trace) {
      // Dual objective f.a + g.b - eps (sum_ij a_i b_j e^{(f+g-C)/eps} - 1).
      double lse_max = kNegInf;
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
          lse_max = std::max(lse_max, log_a(i) + log_b(j) +
                                          (res.f(i) + res.g(j) - cost(i, j)) / eps);
      double s = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
          s += std::exp(log_a(i) + log_b(j) +
                        (res.f(i) + res.g(j) - cost(i, j)) / eps - lse_max);
      const double mass = std::exp(lse_max) * s;
      res.dual_trace.push_back(res.f.dot(a) + res.g.dot(b) - eps * (mass - 1.0));
    }

    const bool at_target = eps <= cfg.epsilon;
    if (at_target && delta <= cfg.tolerance) {
      res.converged = true;
      break;
    }
    if (!at_target) eps = std::max(cfg.epsilon, eps * cfg.anneal_factor);
  }

  // Primal quantities at the implicit plan, evaluated at the final epsilon.
  double transport = 0.0, kl = 0.0;
  Eigen::VectorXd row_sums = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd col_sums = Eigen::VectorXd::Zero(m);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (a(i) <= 0.0) continue;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (b(j) <= 0.0) continue;
      const double log_pi =
          log_a(i) + log_b(j) + (res.f(i) + res.g(j) - cost(i, j)) / eps;
      const double pi = std::exp(log_pi);
      transport += pi * cost(i, j);
      kl += pi * (res.f(i) + res.g(j) - cost(i, j)) / eps;
      row_sums(i) += pi;
      col_sums(j) += pi;
    }
  }
  res.transport_cost = transport;
  res.kl = kl;
  res.cost = transport + eps * kl;
  res.marginal_error = std::max((row_sums - a).cwiseAbs().maxCoeff(),
                                (col_sums - b).cwiseAbs().maxCoeff());
  res.epsilon = eps;
  return res;
}

Eigen::MatrixXd sinkhorn_plan(const Eigen::MatrixXd& cost,
                              const Eigen::VectorXd& a,
                              const Eigen::VectorXd& b,
                              const SinkhornResult& result) {
  Eigen::MatrixXd pi(a.size(), b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i)
    for (Eigen::Index j = 0; j < b.size(); ++j)
      pi(i, j) = a(i) <= 0.0 || b(j) <= 0.0
                     ? 0.0
                     : std::exp(std::log(a(i)) + std::log(b(j)) +
                                (result.f(i) + result.g(j) - cost(i, j)) /
                                    result.epsilon);
  return pi;
}

namespace {

struct Filtered {
  Eigen::MatrixXd points;
  Eigen::VectorXd weights;
  std::vector<Eigen::Index> index;  // original atom index per kept row
};

// Zero-weight atoms are legal inputs but contribute nothing; drop them.
Filtered drop_zero_weights(const DiscreteMeasure& mu) {
  Filtered out;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < mu.size(); ++i)
    if (mu.weights()(i) > 0.0) keep.push_back(i);
  out.points.resize(Eigen::Index(keep.size()), mu.dim());
  out.weights.resize(Eigen::Index(keep.size()));
  for (Eigen::Index r = 0; r < Eigen::Index(keep.size()); ++r) {
    out.points.row(r) = mu.points().row(keep[r]);
    out.weights(r) = mu.weights()(keep[r]);
  }
  out.weights /= out.weights.sum();
  out.index = std::move(keep);
  return out;
}

// Deterministic ordering on weighted point clouds, used to pick a canonical
// solve orientation: with it, entropic costs are bitwise symmetric in their
// arguments because both orders run the same arithmetic.
bool canonical_before(const Filtered& a, const Filtered& b) {
  if (a.points.rows() != b.points.rows())
    return a.points.rows() < b.points.rows();
  for (Eigen::Index j = 0; j < a.points.cols(); ++j)
    for (Eigen::Index i = 0; i < a.points.rows(); ++i) {
      if (a.points(i, j) < b.points(i, j)) return true;
      if (a.points(i, j) > b.points(i, j)) return false;
    }
  for (Eigen::Index i = 0; i < a.weights.size(); ++i) {
    if (a.weights(i) < b.weights(i)) return true;
    if (a.weights(i) > b.weights(i)) return false;
  }
  return false;
}

// Solve in canonical orientation and report potentials in the caller's
// (x, y) orientation.
SinkhornResult solve_canonical(const Filtered& fx, const Filtered& fy,
                               const SinkhornConfig& cfg) {
  if (canonical_before(fy, fx)) {
    SinkhornResult res = sinkhorn(
        cost_matrix(fy.points, fx.points, cfg.cost_exponent), fy.weights,
        fx.weights, cfg);
    std::swap(res.f, res.g);
    return res;
  }
  return sinkhorn(cost_matrix(fx.points, fy.points, cfg.cost_exponent),
                  fx.weights, fy.weights, cfg);
}

// Envelope term sum_j pi_ij grad_x c(x_i, y_j) for c = ||.||^k.
Eigen::MatrixXd plan_cost_grad(const Eigen::MatrixXd& pi,
                               const Eigen::MatrixXd& x,
                               const Eigen::MatrixXd& y, int exponent) {
  if (exponent == 2) {
    const Eigen::VectorXd r = pi.rowwise().sum();
    return 2.0 * (r.asDiagonal() * x - pi * y);
  }
  // k = 1: grad is the unit displacement; zero at coincident points.
  Eigen::MatrixXd w = pi;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < y.rows(); ++j) {
      const double d = (x.row(i) - y.row(j)).norm();
      w(i, j) = d > 0.0 ? pi(i, j) / d : 0.0;
    }
  const Eigen::VectorXd r = w.rowwise().sum();
  return r.asDiagonal() * x - w * y;
}

}  // namespace

SinkhornResult entropic_ot(const DiscreteMeasure& mu_x,
                           const DiscreteMeasure& mu_y,
                           const SinkhornConfig& cfg) {
  if (mu_x.dim() != mu_y.dim())
    throw std::invalid_argument("entropic_ot: dimension mismatch");
  const Filtered fx = drop_zero_weights(mu_x);
  const Filtered fy = drop_zero_weights(mu_y);
  return solve_canonical(fx, fy, cfg);
}

SinkhornDivergenceParts sinkhorn_divergence_parts(const DiscreteMeasure& mu_x,
                                                  const DiscreteMeasure& mu_y,
                                                  const SinkhornConfig& cfg) {
  SinkhornDivergenceParts parts;
  parts.xy = entropic_ot(mu_x, mu_y, cfg);
  parts.xx = entropic_ot(mu_x, mu_x, cfg);
  parts.yy = entropic_ot(mu_y, mu_y, cfg);
  parts.value = 2.0 * parts.xy.cost - parts.xx.cost - parts.yy.cost;
  return parts;
}

double sinkhorn_divergence(const DiscreteMeasure& mu_x,
                           const DiscreteMeasure& mu_y,
                           const SinkhornConfig& cfg) {
  return sinkhorn_divergence_parts(mu_x, mu_y, cfg).value;
}

SwValueGrad sw_value_and_grad(const DiscreteMeasure& mu_x,
                              const DiscreteMeasure& mu_y,
                              const SinkhornConfig& cfg) {
  const Filtered fx = drop_zero_weights(mu_x);
  const Filtered fy = drop_zero_weights(mu_y);

  const Eigen::MatrixXd c_xy =
      cost_matrix(fx.points, fy.points, cfg.cost_exponent);
  const Eigen::MatrixXd c_xx =
      cost_matrix(fx.points, fx.points, cfg.cost_exponent);
  const Eigen::MatrixXd c_yy =
      cost_matrix(fy.points, fy.points, cfg.cost_exponent);

  SwValueGrad out;
  out.parts.xy = solve_canonical(fx, fy, cfg);
  out.parts.xx = sinkhorn(c_xx, fx.weights, fx.weights, cfg);
  out.parts.yy = sinkhorn(c_yy, fy.weights, fy.weights, cfg);
  out.parts.value =
      2.0 * out.parts.xy.cost - out.parts.xx.cost - out.parts.yy.cost;
  out.value = out.parts.value;
  out.converged = out.parts.all_converged();

  const Eigen::MatrixXd pi_xy =
      sinkhorn_plan(c_xy, fx.weights, fy.weights, out.parts.xy);
  const Eigen::MatrixXd pi_xx =
      sinkhorn_plan(c_xx, fx.weights, fx.weights, out.parts.xx);

  // d/dx [2 W(x,y) - W(x,x)]; the self plan enters through both slots.
  const Eigen::MatrixXd grad_kept =
      2.0 * plan_cost_grad(pi_xy, fx.points, fy.points, cfg.cost_exponent) -
      2.0 * plan_cost_grad(pi_xx, fx.points, fx.points, cfg.cost_exponent);

  out.grad = Eigen::MatrixXd::Zero(mu_x.size(), mu_x.dim());
  for (Eigen::Index r = 0; r < grad_kept.rows(); ++r)
    out.grad.row(fx.index[std::size_t(r)]) = grad_kept.row(r);
  return out;
}

Eigen::MatrixXd sw_grad_points(const DiscreteMeasure& mu_x,
                               const DiscreteMeasure& mu_y,
                               const SinkhornConfig& cfg) {
  SwValueGrad vg = sw_value_and_grad(mu_x, mu_y, cfg);
  if (!vg.converged)
    throw std::runtime_error(
        "sw_grad_points: inner Sinkhorn solve did not converge; gradient "
        "refused");
  return std::move(vg.grad);
}

EntropicValueGrad entropic_w_value_and_grad(const DiscreteMeasure& mu_x,
                                            const DiscreteMeasure& mu_y,
                                            const SinkhornConfig& cfg) {
  const Filtered fx = drop_zero_weights(mu_x);
  const Filtered fy = drop_zero_weights(mu_y);
  const Eigen::MatrixXd c =
      cost_matrix(fx.points, fy.points, cfg.cost_exponent);
  EntropicValueGrad out;
  out.result = solve_canonical(fx, fy, cfg);
  out.value = out.result.cost;
  out.converged = out.result.converged;
  const Eigen::MatrixXd pi = sinkhorn_plan(c, fx.weights, fy.weights, out.result);
  const Eigen::MatrixXd grad_kept =
      plan_cost_grad(pi, fx.points, fy.points, cfg.cost_exponent);
  out.grad = Eigen::MatrixXd::Zero(mu_x.size(), mu_x.dim());
  for (Eigen::Index r = 0; r < grad_kept.rows(); ++r)
    out.grad.row(fx.index[std::size_t(r)]) = grad_kept.row(r);
  return out;
}

Eigen::MatrixXd entropic_w_grad_points(const DiscreteMeasure& mu_x,
                                       const DiscreteMeasure& mu_y,
                                       const SinkhornConfig& cfg) {
  EntropicValueGrad vg = entropic_w_value_and_grad(mu_x, mu_y, cfg);
  if (!vg.converged)
    throw std::runtime_error(
        "entropic_w_grad_points: Sinkhorn did not converge; gradient refused");
  return std::move(vg.grad);
}

}  // namespace barygen
