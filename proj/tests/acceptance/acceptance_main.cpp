// Acceptance suite: one pass/fail line per criterion. Each criterion pins
// its tolerances in code; run with a list of criterion numbers to execute a
// subset, or no arguments for all.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <barygen/entropic_ot.hpp>
#include <barygen/experiments.hpp>
#include <barygen/generators.hpp>
#include <barygen/kernels.hpp>
#include <barygen/measures.hpp>
#include <barygen/oracles.hpp>
#include <barygen/solver.hpp>

using namespace barygen;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

DiscreteMeasure random_measure(Eigen::Index n, Eigen::Index d, SeededRng& rng,
                               double scale = 0.35) {
  Eigen::MatrixXd pts(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k) pts(i, k) = scale * rng.normal();
  return DiscreteMeasure::uniform(std::move(pts));
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

void run_seeds_parallel(int seeds, const std::function<void(int)>& body) {
  const unsigned workers =
      std::max(1u, std::min(unsigned(seeds), std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int s = next.fetch_add(1); s < seeds; s = next.fetch_add(1)) body(s);
    });
  for (auto& t : pool) t.join();
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return values[values.size() / 2];
}

// --------------------------------------------------------------------------
// Criterion 1: divergence axioms.

Outcome criterion1() {
  SeededRng rng(101);
  double sw_self_max = 0.0, sw_asym_max = 0.0, sw_min = 0.0;
  double mmd_self_max = 0.0, mmd_min = 0.0;
  int not_converged = 0;
  const int instances = 100;
  for (int t = 0; t < instances; ++t) {
    SeededRng trng = rng.derive(t);
    const Eigen::Index n = 2 + Eigen::Index(trng.index(63));
    const Eigen::Index m = 2 + Eigen::Index(trng.index(63));
    const Eigen::Index d = 1 + Eigen::Index(trng.index(10));
    const DiscreteMeasure mu = random_measure(n, d, trng);
    const DiscreteMeasure nu = random_measure(m, d, trng);

    SinkhornConfig cfg;
    cfg.epsilon = 0.05 + 0.45 * trng.uniform();
    cfg.tolerance = 1e-5;
    cfg.max_iterations = 100000;
    cfg.anneal_factor = 0.9;

    const SinkhornDivergenceParts ab = sinkhorn_divergence_parts(mu, nu, cfg);
    const SinkhornDivergenceParts ba = sinkhorn_divergence_parts(nu, mu, cfg);
    const SinkhornDivergenceParts aa = sinkhorn_divergence_parts(mu, mu, cfg);
    if (!ab.all_converged() || !ba.all_converged() || !aa.all_converged())
      ++not_converged;
    sw_self_max = std::max(sw_self_max, std::abs(aa.value));
    sw_asym_max = std::max(sw_asym_max, std::abs(ab.value - ba.value));
    sw_min = std::min(sw_min, ab.value);

    const KernelSpec kernel =
        t % 2 == 0 ? KernelSpec::rbf(0.5 + trng.uniform())
                   : KernelSpec::rational_quadratic(0.5 + trng.uniform(),
                                                    0.5 + trng.uniform());
    mmd_self_max = std::max(mmd_self_max, std::abs(mmd2(kernel, mu, mu)));
    mmd_min = std::min(mmd_min, mmd2(kernel, mu, nu));
  }
  Outcome out;
  out.passed = sw_self_max <= 1e-8 && sw_asym_max <= 1e-8 && sw_min >= -1e-8 &&
               mmd_self_max <= 1e-12 && mmd_min >= -1e-12 && not_converged == 0;
  out.detail = "sw_self_max=" + fmt(sw_self_max) +
               " sw_asym_max=" + fmt(sw_asym_max) + " sw_min=" + fmt(sw_min) +
               " mmd_self_max=" + fmt(mmd_self_max) +
               " mmd_min=" + fmt(mmd_min) +
               " unconverged=" + std::to_string(not_converged) + "/" +
               std::to_string(instances);
  return out;
}

// --------------------------------------------------------------------------
// Criterion 2: Sinkhorn marginals and the epsilon ladder.

Outcome criterion2() {
  SeededRng rng(202);
  double marg_max = 0.0;
  int not_converged = 0;
  for (int t = 0; t < 25; ++t) {
    SeededRng trng = rng.derive(t);
    const Eigen::Index n = 2 + Eigen::Index(trng.index(63));
    const Eigen::Index m = 2 + Eigen::Index(trng.index(63));
    const Eigen::Index d = 1 + Eigen::Index(trng.index(10));
    const DiscreteMeasure mu = random_measure(n, d, trng);
    const DiscreteMeasure nu = random_measure(m, d, trng);
    SinkhornConfig cfg;
    cfg.epsilon = 0.05 + 0.45 * trng.uniform();
    cfg.tolerance = 1e-8;
    cfg.max_iterations = 300000;
    cfg.anneal_factor = 0.9;
    const SinkhornResult res = entropic_ot(mu, nu, cfg);
    if (!res.converged) ++not_converged;
    marg_max = std::max(marg_max, res.marginal_error);
  }

  // Entropic cost approaches the exact assignment value from above as
  // epsilon falls, with the stated entropy gap bound.
  bool ladder_ok = true;
  double worst_gap_ratio = 0.0;
  for (int t = 0; t < 6; ++t) {
    SeededRng trng = rng.derive(1000 + t);
    const Eigen::Index n = t % 2 == 0 ? 6 : 12;
    const DiscreteMeasure mu = random_measure(n, 2, trng);
    const DiscreteMeasure nu = random_measure(n, 2, trng);
    const double exact = exact_ot_uniform(mu.points(), nu.points(), 2).value;
    double previous = std::numeric_limits<double>::infinity();
    for (const double eps : {1.0, 0.1, 0.01}) {
      SinkhornConfig cfg;
      cfg.epsilon = eps;
      cfg.tolerance = 3e-8;
      cfg.max_iterations = 1000000;
      cfg.anneal_factor = 0.9;
      const SinkhornResult res = entropic_ot(mu, nu, cfg);
      const double gap = res.cost - exact;
      ladder_ok = ladder_ok && res.converged && gap >= -1e-9 &&
                  res.cost <= previous + 1e-9 &&
                  gap <= 3.0 * eps * std::log(double(n));
      worst_gap_ratio =
          std::max(worst_gap_ratio, gap / (3.0 * eps * std::log(double(n))));
      previous = res.cost;
    }
  }
  Outcome out;
  out.passed = marg_max <= 1e-6 && not_converged == 0 && ladder_ok;
  out.detail = "marginal_max=" + fmt(marg_max) +
               " unconverged=" + std::to_string(not_converged) +
               " ladder_ok=" + (ladder_ok ? std::string("yes") : "no") +
               " worst_gap_fraction=" + fmt(worst_gap_ratio);
  return out;
}

// --------------------------------------------------------------------------
// Criterion 3: gradient oracles (finite-difference suites).

Outcome criterion3() {
  RunOptions opts;
  opts.quiet = true;
  opts.out_override = "/tmp/barygen_acceptance_gradcheck";
  const GradcheckReport report =
      run_gradcheck(std::string(BARYGEN_CONFIG_DIR) + "/gradcheck.cfg", opts);
  Outcome out;
  out.passed = report.status == RunStatus::kOk && report.mmd_max_rel <= 1e-6 &&
               report.generator_max_rel <= 1e-5 &&
               report.sinkhorn_max_rel <= 1e-3;
  out.detail = "mmd_rel=" + fmt(report.mmd_max_rel) +
               " generator_rel=" + fmt(report.generator_max_rel) +
               " sinkhorn_rel=" + fmt(report.sinkhorn_max_rel) +
               " delta_hat=" + fmt(report.delta_hat) +
               " sigma2_ratio=" + fmt(report.sigma2_ratio);
  return out;
}

// --------------------------------------------------------------------------
// Shared four-Gaussian corner setup (criteria 4 and 5).

BuiltDataset corner_dataset() {
  DatasetSpecCfg ds;
  ds.kind = "four_gaussians";
  ds.side = 2.0;
  ds.sigma = 0.15;
  ds.atoms = 256;
  ds.data_seed = 5;
  ds.beta = {3.0, 1.0, 1.0, 1.0};
  return build_dataset(ds);
}

// Corner order in the dataset builder: TL, TR, BL, BR.
Eigen::Vector4d quadrant_fractions(const DiscreteMeasure& samples) {
  Eigen::Vector4d counts = Eigen::Vector4d::Zero();
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    const double x = samples.points()(i, 0), y = samples.points()(i, 1);
    const int q = y > 0.0 ? (x < 0.0 ? 0 : 1) : (x < 0.0 ? 2 : 3);
    counts(q) += 1.0;
  }
  return counts / double(samples.size());
}

Outcome criterion4() {
  const BuiltDataset data = corner_dataset();
  const int seeds = 5;
  std::vector<Eigen::Vector4d> fractions(seeds);
  std::vector<bool> failed(seeds, false);

  run_seeds_parallel(seeds, [&](int s) {
    try {
      SeededRng rng(1000 + s);
      GeneratorSpecCfg gcfg;
      gcfg.kind = "gaussian_mixture";
      gcfg.components = 4;
      gcfg.init = "data_atoms";
      gcfg.init_scale = 0.3;
      SeededRng init_rng = rng.derive(1);
      std::unique_ptr<Generator> gen =
          build_generator(gcfg, 2, data, init_rng);

      const BarycenterProblem problem = BarycenterProblem::make(
          data.measures,
          DiscrepancySpec::mmd(KernelSpec::rational_quadratic(1.0, 2.0)),
          data.beta);
      OptimizerSpec opt;
      opt.learning_rate = 0.05;
      opt.lr_decay = 0.999;
      opt.batch_size = 64;
      opt.iterations = 800;
      const Diagnostics diag = fit(problem, *gen, opt, rng.derive(3));
      failed[s] = diag.failed;
      SeededRng sample_rng = rng.derive(4);
      fractions[std::size_t(s)] =
          quadrant_fractions(gen->forward(10000, sample_rng).measure);
    } catch (const std::exception&) {
      failed[s] = true;
    }
  });

  Outcome out;
  out.passed = true;
  std::ostringstream detail;
  detail << "per-quadrant |median-beta|:";
  const double beta[4] = {0.5, 1.0 / 6, 1.0 / 6, 1.0 / 6};
  for (int q = 0; q < 4; ++q) {
    std::vector<double> vals;
    for (int s = 0; s < seeds; ++s)
      if (!failed[s]) vals.push_back(fractions[std::size_t(s)](q));
    if (vals.empty()) {
      out.passed = false;
      break;
    }
    const double err = std::abs(median(vals) - beta[q]);
    detail << " " << fmt(err);
    out.passed = out.passed && err <= 0.05;
  }
  for (int s = 0; s < seeds; ++s) out.passed = out.passed && !failed[s];
  out.detail = detail.str() + " (tol 0.05)";
  return out;
}

Outcome criterion5() {
  Outcome out;
  std::ostringstream detail;

  // Fig-1a behavior: the fitted mean lands on the weighted corner mean.
  {
    const BuiltDataset data = corner_dataset();
    SinkhornConfig sw;
    sw.epsilon = 0.05;
    sw.tolerance = 1e-4;
    sw.max_iterations = 3000;
    sw.anneal_factor = 0.9;
    const BarycenterProblem problem = BarycenterProblem::make(
        data.measures, DiscrepancySpec::sinkhorn_div(sw), data.beta);
    AffineGaussian gen(2);
    OptimizerSpec opt;
    opt.learning_rate = 0.1;
    opt.lr_decay = 0.998;
    opt.batch_size = 64;
    opt.iterations = 800;
    SeededRng rng(2000);
    const Diagnostics diag = fit(problem, gen, opt, rng.derive(3));
    SeededRng sample_rng = rng.derive(4);
    const DiscreteMeasure samples = gen.forward(10000, sample_rng).measure;
    const Eigen::Vector2d mean = samples.points().colwise().mean();
    // Corners at (+-1, +-1), beta = (3,1,1,1)/6: weighted mean (-1/3, 1/3).
    const Eigen::Vector2d target(-1.0 / 3.0, 1.0 / 3.0);
    const double err = (mean - target).norm();
    const bool ok = !diag.failed && err <= 0.05 * 2.0;
    detail << "corner_mean_err=" << fmt(err) << " (tol 0.1)";
    out.passed = ok;
  }

  // Desk-scale Proposition 1: a particle cloud reaches the multi-marginal
  // optimum of the exact W2 barycenter objective.
  {
    SeededRng rng(2100);
    std::vector<DiscreteMeasure> measures;
    {
      SeededRng a = rng.derive(1), b = rng.derive(2);
      Eigen::MatrixXd pa(4, 2), pb(4, 2);
      for (Eigen::Index i = 0; i < 4; ++i)
        for (Eigen::Index k = 0; k < 2; ++k) {
          pa(i, k) = 0.5 * a.normal() + (k == 0 ? -0.4 : 0.0);
          pb(i, k) = 0.5 * b.normal() + (k == 0 ? 0.4 : 0.0);
        }
      measures.push_back(DiscreteMeasure::uniform(pa));
      measures.push_back(DiscreteMeasure::uniform(pb));
    }
    const Eigen::VectorXd beta = Eigen::VectorXd::Constant(2, 0.5);
    const MultiMarginalResult mm = multimarginal_bruteforce(measures, beta);

    SinkhornConfig sw;
    sw.epsilon = 0.01;
    sw.tolerance = 1e-6;
    sw.max_iterations = 200000;
    sw.anneal_factor = 0.9;
    const BarycenterProblem problem = BarycenterProblem::make(
        measures, DiscrepancySpec::sinkhorn_div(sw), beta);

    SeededRng init = rng.derive(3);
    Eigen::MatrixXd atoms(4, 2);
    for (Eigen::Index i = 0; i < 4; ++i)
      for (Eigen::Index k = 0; k < 2; ++k) atoms(i, k) = 0.3 * init.normal();
    // Sampling mode with a batch larger than the support keeps the
    // minibatch marginals close to the full measures.
    ParticleCloud cloud(atoms, false);

    OptimizerSpec opt;
    opt.learning_rate = 0.03;
    opt.lr_decay = 0.9985;
    opt.batch_size = 32;
    opt.iterations = 4000;
    const Diagnostics diag = fit(problem, cloud, opt, rng.derive(4));

    const double achieved = w2_barycenter_objective(
        DiscreteMeasure::uniform(cloud.atoms()), measures, beta);
    const bool ok = !diag.failed && achieved <= 1.10 * mm.objective;
    detail << " cloud_objective=" << fmt(achieved)
           << " optimum=" << fmt(mm.objective)
           << " ratio=" << fmt(achieved / mm.objective) << " (tol 1.10)";
    out.passed = out.passed && ok;
  }
  out.detail = detail.str();
  return out;
}

// --------------------------------------------------------------------------
// Criterion 6: the Gaussian experiment against the fixed-point oracle.

Outcome criterion6_dim(int dim, double tol_mean, double tol_cov,
                       std::string& detail) {
  DatasetSpecCfg ds;
  ds.kind = "gaussians";
  ds.count = 5;
  ds.atoms = 768;
  ds.dim = dim;
  ds.mean_range = 0.6;
  ds.cov_scale = 0.45;
  ds.data_seed = 60 + dim;
  const BuiltDataset data = build_dataset(ds);

  // Oracle barycenter of the moment fits of the empirical inputs; an offset
  // keeps the relative mean tolerance meaningful.
  std::vector<GaussianSpec> specs;
  std::vector<DiscreteMeasure> shifted;
  const Eigen::VectorXd offset = Eigen::VectorXd::Constant(dim, 0.8);
  for (const auto& mu : data.measures) {
    Eigen::MatrixXd pts = mu.points();
    pts.rowwise() += offset.transpose();
    shifted.push_back(DiscreteMeasure::uniform(std::move(pts)));
    specs.push_back(fit_gaussian(shifted.back()));
  }
  const GaussianSpec oracle = gaussian_w2_barycenter(specs, data.beta);

  SinkhornConfig sw;
  sw.epsilon = 0.01;
  sw.tolerance = 1e-4;
  sw.max_iterations = 5000;
  sw.anneal_factor = 0.9;
  const BarycenterProblem problem = BarycenterProblem::make(
      shifted, DiscrepancySpec::sinkhorn_div(sw), data.beta);

  SeededRng rng(3000 + dim);
  AffineGaussian gen(Eigen::VectorXd::Constant(dim, 0.5),
                     0.5 * Eigen::MatrixXd::Identity(dim, dim));
  OptimizerSpec opt;
  opt.learning_rate = dim == 2 ? 0.08 : 0.05;
  opt.lr_decay = 0.9985;
  opt.batch_size = 64;
  opt.iterations = dim == 2 ? 1500 : 2000;
  const Diagnostics diag = fit(problem, gen, opt, rng.derive(3));

  const double mean_rel =
      (gen.mean() - oracle.mean).norm() / oracle.mean.norm();
  const double cov_rel =
      (gen.covariance() - oracle.covariance).norm() / oracle.covariance.norm();
  detail += " d" + std::to_string(dim) + ": mean_rel=" + fmt(mean_rel) +
            " (tol " + fmt(tol_mean) + ") cov_rel=" + fmt(cov_rel) + " (tol " +
            fmt(tol_cov) + ")";
  return {!diag.failed && mean_rel <= tol_mean && cov_rel <= tol_cov, ""};
}

Outcome criterion6() {
  Outcome out;
  std::string detail;
  const Outcome d2 = criterion6_dim(2, 0.05, 0.10, detail);
  const Outcome d5 = criterion6_dim(5, 0.15, 0.15, detail);
  out.passed = d2.passed && d5.passed;
  out.detail = detail;
  return out;
}

// --------------------------------------------------------------------------
// Criterion 7: structural generators beat the MLP at a fixed budget.

Outcome criterion7() {
  SinkhornConfig sw;
  sw.epsilon = 0.1;
  sw.tolerance = 1e-4;
  sw.max_iterations = 3000;
  sw.anneal_factor = 0.9;

  const auto run_pair = [&](const BuiltDataset& data, bool use_ellipse,
                            int latent, int& wins, std::string& detail) {
    const int seeds = 5;
    std::vector<double> structural(seeds), mlp(seeds);
    run_seeds_parallel(seeds, [&](int s) {
      const BarycenterProblem problem = BarycenterProblem::make(
          data.measures, DiscrepancySpec::sinkhorn_div(sw), data.beta);
      SeededRng rng(4000 + s);

      OptimizerSpec opt;
      opt.batch_size = 48;
      opt.iterations = 400;
      opt.lr_decay = 0.999;

      SeededRng init_a = rng.derive(1);
      std::unique_ptr<Generator> structural_gen;
      if (use_ellipse)
        structural_gen =
            std::make_unique<EllipsePair>(EllipsePair::random_init(init_a));
      else
        structural_gen = std::make_unique<AffineGaussian>(2);
      opt.learning_rate = use_ellipse ? 0.05 : 0.1;
      Diagnostics da = fit(problem, *structural_gen, opt, rng.derive(3));
      structural[std::size_t(s)] = da.final_smoothed_loss();

      SeededRng init_b = rng.derive(2);
      MlpGenerator mlp_gen({latent, 32, 64, 64, 2}, init_b);
      opt.learning_rate = 2e-3;
      Diagnostics db = fit(problem, mlp_gen, opt, rng.derive(3));
      mlp[std::size_t(s)] = db.final_smoothed_loss();
    });
    wins = 0;
    for (int s = 0; s < seeds; ++s)
      if (structural[std::size_t(s)] <= mlp[std::size_t(s)]) ++wins;
    detail += std::string(use_ellipse ? " ellipses" : " gaussians") +
              "_wins=" + std::to_string(wins) + "/5";
  };

  DatasetSpecCfg gauss;
  gauss.kind = "gaussians";
  gauss.count = 5;
  gauss.atoms = 256;
  gauss.dim = 2;
  gauss.mean_range = 0.6;
  gauss.cov_scale = 0.4;
  gauss.data_seed = 70;

  DatasetSpecCfg ellipses;
  ellipses.kind = "ellipses";
  ellipses.count = 8;
  ellipses.atoms = 64;
  ellipses.data_seed = 71;

  std::string detail;
  int gauss_wins = 0, ellipse_wins = 0;
  run_pair(build_dataset(gauss), false, 2, gauss_wins, detail);
  run_pair(build_dataset(ellipses), true, 10, ellipse_wins, detail);

  Outcome out;
  out.passed = gauss_wins >= 4 && ellipse_wins >= 4;
  out.detail = detail + " (need >=4/5 each)";
  return out;
}

// --------------------------------------------------------------------------
// Criterion 8: adversarial SMMD smoke on two blobs.

Outcome criterion8() {
  DatasetSpecCfg ds;
  ds.kind = "blobs";
  ds.separation = 0.6;
  ds.sigma = 0.3;
  ds.atoms = 256;
  ds.data_seed = 9;
  const BuiltDataset data = build_dataset(ds);

  SmmdConfig smmd;
  smmd.gradient_penalty = 5.0;
  smmd.critic_steps = 5;
  smmd.critic_lr = 1e-3;

  const int seeds = 5;
  std::vector<bool> finite_ok(seeds, false), trend_ok(seeds, false);
  std::vector<double> ratios(seeds, 1.0);

  run_seeds_parallel(seeds, [&](int s) {
    SeededRng rng(5000 + s);
    const BarycenterProblem problem = BarycenterProblem::make(
        data.measures, DiscrepancySpec::smmd_spec(smmd), data.beta);
    AffineGaussian gen(2);
    DiscrepancyCfg ccfg;
    ccfg.critic_hidden = {32, 32};
    ccfg.feature_dim = 2;
    std::vector<FeatureMap> critics;
    for (std::size_t p = 0; p < problem.count(); ++p) {
      SeededRng crng = rng.derive(2).derive(p);
      critics.push_back(
          build_critic(ccfg, 2, crng, &problem.measures[p].points()));
    }
    OptimizerSpec opt;
    opt.learning_rate = 1.5e-3;
    opt.lr_decay = 0.999;
    opt.batch_size = 64;
    opt.iterations = 2000;
    const Diagnostics diag =
        adversarial_fit(problem, gen, critics, opt, rng.derive(3));

    bool finite = !diag.failed;
    for (const auto& rec : diag.trace)
      finite = finite && !rec.aborted && std::isfinite(rec.loss);
    finite_ok[std::size_t(s)] = finite;
    const double early = diag.smoothed_loss_at(opt.iterations / 10);
    const double late = diag.final_smoothed_loss();
    ratios[std::size_t(s)] = late / early;
    trend_ok[std::size_t(s)] = late < early;
  });

  Outcome out;
  out.passed = true;
  std::ostringstream detail;
  detail << "loss(T)/loss(T/10):";
  for (int s = 0; s < seeds; ++s) {
    out.passed = out.passed && finite_ok[std::size_t(s)] && trend_ok[std::size_t(s)];
    detail << " " << fmt(ratios[std::size_t(s)]);
  }
  out.detail = detail.str() + " (need < 1, 5/5 seeds, finite)";
  return out;
}

// --------------------------------------------------------------------------
// Criterion 9: the local-convergence diagnostic on the Gaussian setup.

Outcome criterion9() {
  DatasetSpecCfg ds;
  ds.kind = "gaussians";
  ds.count = 5;
  ds.atoms = 256;
  ds.dim = 2;
  ds.mean_range = 0.6;
  ds.cov_scale = 0.45;
  ds.data_seed = 62;
  const BuiltDataset data = build_dataset(ds);

  SinkhornConfig sw;
  sw.epsilon = 0.01;
  sw.tolerance = 1e-5;
  sw.max_iterations = 50000;
  sw.anneal_factor = 0.9;
  const BarycenterProblem problem = BarycenterProblem::make(
      data.measures, DiscrepancySpec::sinkhorn_div(sw), data.beta);

  AffineGaussian gen(Eigen::VectorXd::Zero(2),
                     0.5 * Eigen::MatrixXd::Identity(2, 2));
  const Theorem1Report report =
      theorem1_diagnostic(problem, gen, 32, 400, 12, SeededRng(900));

  Outcome out;
  out.passed = report.running_min_decreasing && report.within_bound;
  out.detail = "delta_hat=" + fmt(report.quality.delta_hat) +
               " sigma2_hat=" + fmt(report.quality.sigma2_hat) +
               " m_hat=" + fmt(report.m_hat) + " gamma=" + fmt(report.gamma) +
               " running_min=" + fmt(report.final_running_min) +
               " threshold=" + fmt(report.threshold) + " bound=10x";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  struct Entry {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Entry> entries = {
      {1, "divergence axioms", criterion1},
      {2, "sinkhorn correctness", criterion2},
      {3, "gradient oracles", criterion3},
      {4, "mmd mixture barycenter (fig 1b)", criterion4},
      {5, "wasserstein interpolation (fig 1a, prop 1)", criterion5},
      {6, "gaussian barycenter vs fixed point", criterion6},
      {7, "inductive bias advantage", criterion7},
      {8, "adversarial smmd smoke", criterion8},
      {9, "theorem-1 diagnostic", criterion9},
  };

  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

  bool all_passed = true;
  for (const auto& entry : entries) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), entry.id) == selected.end())
      continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = entry.run();
    } catch (const std::exception& e) {
      outcome.passed = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
    std::printf("%s criterion %d: %s - %s [%.1fs]\n",
                outcome.passed ? "PASS" : "FAIL", entry.id, entry.name,
                outcome.detail.c_str(), secs);
    std::fflush(stdout);
    all_passed = all_passed && outcome.passed;
  }
  return all_passed ? 0 : 1;
}
