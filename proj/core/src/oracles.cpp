#include "barygen/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "barygen/entropic_ot.hpp"

namespace barygen {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Classic O(n^3) Hungarian algorithm with dual potentials (1-indexed
// internals). Returns the row -> column matching minimizing sum C(i, j).
std::vector<int> hungarian(const Eigen::MatrixXd& c) {
  const int n = int(c.rows());
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> perm(std::size_t(n), -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) perm[std::size_t(p[j] - 1)] = j - 1;
  return perm;
}

std::vector<int> enumerate_assignment(const Eigen::MatrixXd& c) {
  const int n = int(c.rows());
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_cost = kInf;
  do {
    double cost = 0.0;
    for (int i = 0; i < n; ++i) cost += c(i, perm[std::size_t(i)]);
    if (cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

AssignmentResult exact_ot_uniform(const Eigen::MatrixXd& x,
                                  const Eigen::MatrixXd& y, int exponent,
                                  AssignmentBackend backend) {
  if (x.rows() != y.rows())
    throw std::invalid_argument("exact_ot_uniform: needs equal atom counts");
  const Eigen::Index n = x.rows();
  const Eigen::MatrixXd c = cost_matrix(x, y, exponent);

  if (backend == AssignmentBackend::kAuto)
    backend = AssignmentBackend::kHungarian;
  std::vector<int> perm;
  if (backend == AssignmentBackend::kEnumeration) {
    if (n > 8)
      throw std::invalid_argument(
          "exact_ot_uniform: enumeration backend limited to N <= 8");
    perm = enumerate_assignment(c);
  } else {
    if (n > 64)
      throw std::invalid_argument(
          "exact_ot_uniform: Hungarian backend limited to N <= 64");
    perm = hungarian(c);
  }
  double value = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) value += c(i, perm[std::size_t(i)]);
  return {value / double(n), std::move(perm)};
}

namespace {

void check_beta(const Eigen::VectorXd& beta, std::size_t p) {
  if (beta.size() != Eigen::Index(p))
    throw std::invalid_argument("beta length must match the measure count");
  if ((beta.array() < 0.0).any() || std::abs(beta.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("beta must lie on the probability simplex");
}

void check_uniform(const DiscreteMeasure& mu) {
  const double w0 = 1.0 / double(mu.size());
  if ((mu.weights().array() - w0).abs().maxCoeff() > 1e-12)
    throw std::invalid_argument("oracle requires uniform weights");
}

}  // namespace

MultiMarginalResult multimarginal_bruteforce(
    const std::vector<DiscreteMeasure>& measures,
    const Eigen::VectorXd& beta) {
  const std::size_t p = measures.size();
  if (p < 1) throw std::invalid_argument("multimarginal: needs P >= 1");
  if (p > 3)
    throw std::invalid_argument("multimarginal: instance too large (P <= 3)");
  check_beta(beta, p);
  const Eigen::Index n = measures[0].size();
  const Eigen::Index d = measures[0].dim();
  if (n > 6)
    throw std::invalid_argument("multimarginal: instance too large (N <= 6)");
  for (const auto& mu : measures) {
    if (mu.size() != n || mu.dim() != d)
      throw std::invalid_argument(
          "multimarginal: measures must share atom count and dimension");
    check_uniform(mu);
  }

  // Couplings are tuples of permutations for measures 1..P-1; measure 0 is
  // kept in input order (Birkhoff: permutations suffice for uniform
  // marginals).
  std::vector<std::vector<int>> perms(p);
  for (auto& pi : perms) {
    pi.resize(std::size_t(n));
    std::iota(pi.begin(), pi.end(), 0);
  }

  MultiMarginalResult best;
  best.objective = kInf;
  best.max_form_value = -kInf;
  Eigen::MatrixXd t(n, d);

  const std::function<void(std::size_t)> recurse = [&](std::size_t k) {
    if (k == p) {
      double obj = 0.0, maxform = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        t.row(i).setZero();
        for (std::size_t q = 0; q < p; ++q)
          t.row(i) += beta(Eigen::Index(q)) *
                      measures[q].points().row(perms[q][std::size_t(i)]);
        maxform += t.row(i).squaredNorm();
        for (std::size_t q = 0; q < p; ++q)
          obj += beta(Eigen::Index(q)) *
                 (measures[q].points().row(perms[q][std::size_t(i)]) - t.row(i))
                     .squaredNorm();
      }
      obj /= double(n);
      maxform /= double(n);
      if (obj < best.objective) {
        best.objective = obj;
        best.assignment = perms;
        best.barycenter_atoms = t;
      }
      if (maxform > best.max_form_value) {
        best.max_form_value = maxform;
        best.max_form_assignment = perms;
      }
      return;
    }
    std::sort(perms[k].begin(), perms[k].end());
    do {
      recurse(k + 1);
    } while (std::next_permutation(perms[k].begin(), perms[k].end()));
  };
  recurse(1);
  return best;
}

double w2_barycenter_objective(const DiscreteMeasure& candidate,
                               const std::vector<DiscreteMeasure>& measures,
                               const Eigen::VectorXd& beta) {
  check_beta(beta, measures.size());
  check_uniform(candidate);
  double total = 0.0;
  for (std::size_t p = 0; p < measures.size(); ++p) {
    check_uniform(measures[p]);
    if (measures[p].size() != candidate.size())
      throw std::invalid_argument(
          "w2_barycenter_objective: atom counts must match the candidate");
    total += beta(Eigen::Index(p)) *
             exact_ot_uniform(candidate.points(), measures[p].points(), 2).value;
  }
  return total;
}

GaussianSpec gaussian_w2_barycenter(const std::vector<GaussianSpec>& specs,
                                    const Eigen::VectorXd& beta, double tol,
                                    int max_iter) {
  if (specs.empty())
    throw std::invalid_argument("gaussian_w2_barycenter: needs P >= 1");
  check_beta(beta, specs.size());
  const Eigen::Index d = specs[0].dim();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t p = 0; p < specs.size(); ++p) {
    specs[p].validate();
    if (specs[p].dim() != d)
      throw std::invalid_argument("gaussian_w2_barycenter: dim mismatch");
    mean += beta(Eigen::Index(p)) * specs[p].mean;
    s += beta(Eigen::Index(p)) * specs[p].covariance;
  }

  const auto psd_sqrt = [](const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    return Eigen::MatrixXd(es.eigenvectors() *
                           es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                           es.eigenvectors().transpose());
  };

  for (int it = 0; it < max_iter; ++it) {
    const Eigen::MatrixXd root = psd_sqrt(s);
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t p = 0; p < specs.size(); ++p)
      next += beta(Eigen::Index(p)) *
              psd_sqrt(root * specs[p].covariance * root);
    next = 0.5 * (next + next.transpose()).eval();
    const double change = (next - s).norm();
    s = next;
    if (change <= tol) return GaussianSpec{mean, s};
  }
  throw std::runtime_error(
      "gaussian_w2_barycenter: fixed point did not converge");
}

MixtureObjectiveResult mmd_mixture_objective(
    const std::vector<DiscreteMeasure>& measures, const Eigen::VectorXd& beta,
    const KernelSpec& kernel) {
  check_beta(beta, measures.size());
  Eigen::Index total = 0;
  for (const auto& mu : measures) total += mu.size();
  Eigen::MatrixXd pts(total, measures[0].dim());
  Eigen::VectorXd w(total);
  Eigen::Index off = 0;
  for (std::size_t p = 0; p < measures.size(); ++p) {
    pts.middleRows(off, measures[p].size()) = measures[p].points();
    w.segment(off, measures[p].size()) =
        beta(Eigen::Index(p)) * measures[p].weights();
    off += measures[p].size();
  }
  // Guard the simplex invariant against accumulated rounding.
  Eigen::Index imax = 0;
  w.maxCoeff(&imax);
  w(imax) += 1.0 - w.sum();
  DiscreteMeasure mixture(std::move(pts), std::move(w));
  const double value = mmd_barycenter_objective(mixture, measures, beta, kernel);
  return {value, std::move(mixture)};
}

double mmd_barycenter_objective(const DiscreteMeasure& candidate,
                                const std::vector<DiscreteMeasure>& measures,
                                const Eigen::VectorXd& beta,
                                const KernelSpec& kernel) {
  check_beta(beta, measures.size());
  double total = 0.0;
  for (std::size_t p = 0; p < measures.size(); ++p)
    total += beta(Eigen::Index(p)) * mmd2(kernel, candidate, measures[p]);
  return total;
}

Eigen::VectorXd finite_difference_grad(
    const std::function<double(const Eigen::VectorXd&)>& loss,
    const Eigen::VectorXd& params, double h) {
  if (!(h > 0.0))
    throw std::invalid_argument("finite_difference_grad: h must be positive");
  Eigen::VectorXd grad(params.size());
  Eigen::VectorXd probe = params;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    probe(i) = params(i) + h;
    const double up = loss(probe);
    probe(i) = params(i) - h;
    const double down = loss(probe);
    probe(i) = params(i);
    if (!std::isfinite(up) || !std::isfinite(down))
      throw std::runtime_error(
          "finite_difference_grad: non-finite loss at probe");
    grad(i) = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace barygen
