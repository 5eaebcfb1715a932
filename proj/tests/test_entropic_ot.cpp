#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <barygen/entropic_ot.hpp>
#include <barygen/oracles.hpp>
#include <cmath>
#include <numbers>

using namespace barygen;

namespace {

DiscreteMeasure random_measure(Eigen::Index n, Eigen::Index d, SeededRng& rng,
                               double scale = 0.35) {
  Eigen::MatrixXd pts(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k) pts(i, k) = scale * rng.normal();
  return DiscreteMeasure::uniform(std::move(pts));
}

DiscreteMeasure singleton1d(double x) {
  Eigen::MatrixXd pts(1, 1);
  pts << x;
  return DiscreteMeasure::uniform(std::move(pts));
}

SinkhornConfig tight_config() {
  SinkhornConfig cfg;
  cfg.epsilon = 0.1;
  cfg.tolerance = 1e-9;
  cfg.max_iterations = 300000;
  return cfg;
}

}  // namespace

TEST_CASE("cost matrix arithmetic") {
  Eigen::MatrixXd x(2, 1), y(2, 1);
  x << 0, 1;
  y << 0, 2;
  const Eigen::MatrixXd c2 = cost_matrix(x, y, 2);
  CHECK(c2(0, 0) == 0.0);
  CHECK(c2(0, 1) == 4.0);
  CHECK(c2(1, 0) == 1.0);
  CHECK(c2(1, 1) == 1.0);

  const Eigen::MatrixXd c1 = cost_matrix(x, y, 1);
  CHECK((c1.array().square() - c2.array()).abs().maxCoeff() <= 1e-12);

  const Eigen::MatrixXd self = cost_matrix(x, x, 2);
  CHECK(self.diagonal().isZero(0.0));

  Eigen::MatrixXd bad(2, 2);
  CHECK_THROWS_AS(cost_matrix(x, bad, 2), std::invalid_argument);
  CHECK_THROWS_AS(cost_matrix(x, y, 3), std::invalid_argument);
}

TEST_CASE("singleton pair has a unique plan with zero KL") {
  SinkhornConfig cfg;
  cfg.epsilon = 0.5;
  const SinkhornResult res =
      entropic_ot(singleton1d(0.0), singleton1d(3.0), cfg);
  CHECK(res.converged);
  CHECK(res.cost == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(res.kl == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("two-by-two crossing costs concentrate on the diagonal plan") {
  Eigen::MatrixXd c(2, 2);
  c << 0, 1, 1, 0;
  const Eigen::VectorXd half = Eigen::VectorXd::Constant(2, 0.5);
  SinkhornConfig cfg;
  cfg.epsilon = 0.01;
  cfg.tolerance = 1e-12;
  cfg.max_iterations = 100000;
  const SinkhornResult res = sinkhorn(c, half, half, cfg);
  CHECK(res.converged);
  // The exact LP optimum is 0 via the diagonal plan; the entropic plan pays
  // transport below 1e-3 plus the eps * KL entropy of the near-diagonal plan.
  CHECK(res.transport_cost <= 1e-3);
  CHECK(res.cost == doctest::Approx(res.transport_cost + res.epsilon * res.kl)
                        .epsilon(1e-12));
  CHECK(res.kl == doctest::Approx(std::numbers::ln2).epsilon(1e-6));
  const Eigen::MatrixXd plan = sinkhorn_plan(c, half, half, res);
  CHECK(std::abs(plan(0, 0) - 0.5) <= 1e-3);
  CHECK(std::abs(plan(1, 1) - 0.5) <= 1e-3);
  CHECK(plan(0, 1) <= 1e-3);
}

TEST_CASE("marginal feasibility at convergence") {
  SeededRng rng(1);
  for (int t = 0; t < 12; ++t) {
    const Eigen::Index n = 2 + Eigen::Index(rng.index(127));
    const Eigen::Index m = 2 + Eigen::Index(rng.index(127));
    const Eigen::Index d = 1 + Eigen::Index(rng.index(20));
    const DiscreteMeasure mu = random_measure(n, d, rng);
    const DiscreteMeasure nu = random_measure(m, d, rng);
    SinkhornConfig cfg;
    cfg.epsilon = 0.2;
    cfg.tolerance = 1e-8;
    cfg.max_iterations = 200000;
    const SinkhornResult res = entropic_ot(mu, nu, cfg);
    CHECK(res.converged);
    CHECK(res.marginal_error <= 1e-6);
  }
}

TEST_CASE("dual objective is nondecreasing across iterations") {
  SeededRng rng(2);
  const DiscreteMeasure mu = random_measure(12, 3, rng);
  const DiscreteMeasure nu = random_measure(9, 3, rng);
  SinkhornConfig cfg = tight_config();
  cfg.record_dual_trace = true;
  const SinkhornResult res = entropic_ot(mu, nu, cfg);
  REQUIRE(res.dual_trace.size() > 10);
  for (std::size_t i = 1; i < res.dual_trace.size(); ++i)
    CHECK(res.dual_trace[i] >= res.dual_trace[i - 1] - 1e-10);
}

TEST_CASE("sinkhorn divergence identities") {
  SeededRng rng(3);
  const DiscreteMeasure mu = random_measure(10, 2, rng);
  SinkhornConfig cfg;
  cfg.epsilon = 0.1;
  cfg.tolerance = 1e-7;
  cfg.max_iterations = 100000;
  CHECK(std::abs(sinkhorn_divergence(mu, mu, cfg)) <= 1e-8);

  // Singletons: 2 * 9 - 0 - 0.
  SinkhornConfig cfg1;
  cfg1.epsilon = 0.5;
  CHECK(sinkhorn_divergence(singleton1d(0.0), singleton1d(3.0), cfg1) ==
        doctest::Approx(18.0).epsilon(1e-12));
}

TEST_CASE("sinkhorn divergence is symmetric and nonnegative on random pairs") {
  SeededRng rng(4);
  for (int t = 0; t < 25; ++t) {
    const Eigen::Index d = 1 + Eigen::Index(rng.index(4));
    const DiscreteMeasure mu = random_measure(2 + Eigen::Index(rng.index(15)), d, rng);
    const DiscreteMeasure nu = random_measure(2 + Eigen::Index(rng.index(15)), d, rng);
    SinkhornConfig cfg;
    cfg.epsilon = 0.1 + 0.3 * rng.uniform();
    cfg.tolerance = 1e-7;
    cfg.max_iterations = 200000;
    const double ab = sinkhorn_divergence(mu, nu, cfg);
    const double ba = sinkhorn_divergence(nu, mu, cfg);
    CHECK(std::abs(ab - ba) <= 1e-8);
    CHECK(ab >= -1e-8);
  }
}

TEST_CASE("entropic cost decreases with epsilon toward the exact value") {
  SeededRng rng(5);
  for (int t = 0; t < 4; ++t) {
    const Eigen::Index n = 6;
    const DiscreteMeasure mu = random_measure(n, 2, rng);
    const DiscreteMeasure nu = random_measure(n, 2, rng);
    const double exact =
        exact_ot_uniform(mu.points(), nu.points(), 2).value;
    double previous = std::numeric_limits<double>::infinity();
    for (const double eps : {1.0, 0.1, 0.01}) {
      SinkhornConfig cfg;
      cfg.epsilon = eps;
      cfg.tolerance = 1e-8;
      cfg.max_iterations = 500000;
      cfg.anneal_factor = 0.9;
      const SinkhornResult res = entropic_ot(mu, nu, cfg);
      CHECK(res.converged);
      CHECK(res.cost >= exact - 1e-7);
      CHECK(res.cost <= previous + 1e-7);
      CHECK(res.cost - exact <= 3.0 * eps * std::log(double(n)));
      previous = res.cost;
    }
  }
}

TEST_CASE("divergence envelope gradient: closed forms") {
  SinkhornConfig cfg;
  cfg.epsilon = 0.5;
  // Singletons, k = 2: d/dx SW(delta_x, delta_y) = 4 (x - y) -> -12.
  const Eigen::MatrixXd grad =
      sw_grad_points(singleton1d(0.0), singleton1d(3.0), cfg);
  CHECK(grad(0, 0) == doctest::Approx(-12.0).epsilon(1e-12));

  SeededRng rng(6);
  const DiscreteMeasure mu = random_measure(8, 2, rng);
  SinkhornConfig cfg2 = tight_config();
  CHECK(sw_grad_points(mu, mu, cfg2).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("divergence envelope gradient matches finite differences") {
  SeededRng rng(7);
  SinkhornConfig cfg = tight_config();
  for (int t = 0; t < 3; ++t) {
    const DiscreteMeasure mx = random_measure(5, 2, rng);
    const DiscreteMeasure my = random_measure(5, 2, rng);
    const Eigen::MatrixXd analytic = sw_grad_points(mx, my, cfg);
    const auto loss = [&](const Eigen::VectorXd& flat) {
      const Eigen::MatrixXd pts =
          Eigen::Map<const Eigen::MatrixXd>(flat.data(), 5, 2);
      return sinkhorn_divergence(DiscreteMeasure(pts, mx.weights()), my, cfg);
    };
    const Eigen::VectorXd flat =
        Eigen::Map<const Eigen::VectorXd>(mx.points().data(), 10);
    const Eigen::VectorXd fd = finite_difference_grad(loss, flat, 1e-5);
    const Eigen::VectorXd an =
        Eigen::Map<const Eigen::VectorXd>(analytic.data(), 10);
    CHECK((an - fd).norm() / fd.norm() <= 1e-3);
  }
}

TEST_CASE("k=1 envelope gradient matches finite differences") {
  SeededRng rng(8);
  SinkhornConfig cfg = tight_config();
  cfg.cost_exponent = 1;
  const DiscreteMeasure mx = random_measure(5, 2, rng);
  const DiscreteMeasure my = random_measure(5, 2, rng);
  const Eigen::MatrixXd analytic = entropic_w_grad_points(mx, my, cfg);
  const auto loss = [&](const Eigen::VectorXd& flat) {
    const Eigen::MatrixXd pts =
        Eigen::Map<const Eigen::MatrixXd>(flat.data(), 5, 2);
    return entropic_ot(DiscreteMeasure(pts, mx.weights()), my, cfg).cost;
  };
  const Eigen::VectorXd flat =
      Eigen::Map<const Eigen::VectorXd>(mx.points().data(), 10);
  const Eigen::VectorXd fd = finite_difference_grad(loss, flat, 1e-5);
  const Eigen::VectorXd an =
      Eigen::Map<const Eigen::VectorXd>(analytic.data(), 10);
  CHECK((an - fd).norm() / fd.norm() <= 1e-3);
}

TEST_CASE("non-convergence is flagged and refusal guards gradients") {
  SeededRng rng(9);
  const DiscreteMeasure mu = random_measure(6, 2, rng);
  const DiscreteMeasure nu = random_measure(6, 2, rng);
  SinkhornConfig cfg;
  cfg.epsilon = 0.01;
  cfg.tolerance = 1e-14;
  cfg.max_iterations = 3;
  const SinkhornResult res = entropic_ot(mu, nu, cfg);
  CHECK_FALSE(res.converged);
  CHECK_THROWS_AS(sw_grad_points(mu, nu, cfg), std::runtime_error);
  CHECK_THROWS_AS(entropic_w_grad_points(mu, nu, cfg), std::runtime_error);
}

TEST_CASE("zero-weight atoms are dropped before solving") {
  Eigen::MatrixXd pts(3, 1);
  pts << 0.0, 50.0, 1.0;  // the far atom carries no mass
  Eigen::VectorXd w(3);
  w << 0.5, 0.0, 0.5;
  Eigen::MatrixXd pts2(2, 1);
  pts2 << 0.0, 1.0;
  SinkhornConfig cfg;
  cfg.epsilon = 0.1;
  cfg.tolerance = 1e-9;
  cfg.max_iterations = 100000;
  SeededRng rng(10);
  const DiscreteMeasure target = random_measure(4, 1, rng);
  const double with_zero = entropic_ot(DiscreteMeasure(pts, w), target, cfg).cost;
  const double without =
      entropic_ot(DiscreteMeasure::uniform(pts2), target, cfg).cost;
  CHECK(with_zero == doctest::Approx(without).epsilon(1e-12));

  // Duplicate atoms are legal inputs.
  Eigen::MatrixXd dup(3, 1);
  dup << 0.3, 0.3, 0.9;
  CHECK_NOTHROW(entropic_ot(DiscreteMeasure::uniform(dup), target, cfg));
}

TEST_CASE("bad inputs are rejected") {
  Eigen::MatrixXd c(2, 2);
  c << 0, 1, 1, std::numeric_limits<double>::quiet_NaN();
  const Eigen::VectorXd half = Eigen::VectorXd::Constant(2, 0.5);
  SinkhornConfig cfg;
  CHECK_THROWS_AS(sinkhorn(c, half, half, cfg), std::invalid_argument);

  Eigen::MatrixXd ok(2, 2);
  ok << 0, 1, 1, 0;
  Eigen::VectorXd notsimplex(2);
  notsimplex << 0.5, 0.6;
  CHECK_THROWS_AS(sinkhorn(ok, notsimplex, half, cfg), std::invalid_argument);

  SinkhornConfig bad;
  bad.epsilon = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
