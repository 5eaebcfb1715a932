#include <benchmark/benchmark.h>

#include <barygen/entropic_ot.hpp>
#include <barygen/generators.hpp>
#include <barygen/kernels.hpp>
#include <barygen/solver.hpp>

using namespace barygen;

namespace {

DiscreteMeasure random_measure(Eigen::Index n, Eigen::Index d,
                               std::uint64_t seed, double scale = 0.35) {
  SeededRng rng(seed);
  Eigen::MatrixXd pts(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k) pts(i, k) = scale * rng.normal();
  return DiscreteMeasure::uniform(std::move(pts));
}

}  // namespace

static void BM_Mmd2(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  const DiscreteMeasure mu = random_measure(n, 2, 1);
  const DiscreteMeasure nu = random_measure(n, 2, 2);
  const KernelSpec k = KernelSpec::rational_quadratic(1.0, 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(mmd2(k, mu, nu));
}
BENCHMARK(BM_Mmd2)->Arg(64)->Arg(150)->Arg(512);

static void BM_Mmd2GradPoints(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  const DiscreteMeasure mu = random_measure(n, 2, 1);
  const DiscreteMeasure nu = random_measure(n, 2, 2);
  const KernelSpec k = KernelSpec::rational_quadratic(1.0, 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(mmd2_grad_points(k, mu, nu));
}
BENCHMARK(BM_Mmd2GradPoints)->Arg(64)->Arg(150);

static void BM_SinkhornSolve(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  const double eps = state.range(1) / 1000.0;
  const DiscreteMeasure mu = random_measure(n, 2, 1);
  const DiscreteMeasure nu = random_measure(n, 2, 2);
  SinkhornConfig cfg;
  cfg.epsilon = eps;
  cfg.tolerance = 1e-5;
  cfg.max_iterations = 100000;
  cfg.anneal_factor = 0.9;
  for (auto _ : state) {
    const SinkhornResult res = entropic_ot(mu, nu, cfg);
    benchmark::DoNotOptimize(res.cost);
  }
}
BENCHMARK(BM_SinkhornSolve)
    ->Args({64, 100})
    ->Args({64, 10})
    ->Args({150, 100});

static void BM_SinkhornDivergenceGrad(benchmark::State& state) {
  const Eigen::Index n = state.range(0);
  const DiscreteMeasure mu = random_measure(n, 2, 1);
  const DiscreteMeasure nu = random_measure(n, 2, 2);
  SinkhornConfig cfg;
  cfg.epsilon = 0.1;
  cfg.tolerance = 1e-5;
  cfg.max_iterations = 100000;
  cfg.anneal_factor = 0.9;
  for (auto _ : state) {
    const SwValueGrad vg = sw_value_and_grad(mu, nu, cfg);
    benchmark::DoNotOptimize(vg.value);
  }
}
BENCHMARK(BM_SinkhornDivergenceGrad)->Arg(48)->Arg(64);

static void BM_MlpForwardBackward(benchmark::State& state) {
  const Eigen::Index batch = state.range(0);
  SeededRng init(1);
  MlpGenerator gen({10, 50, 200, 1000, 200, 2}, init);
  SeededRng rng(2);
  const Eigen::MatrixXd grad_out = Eigen::MatrixXd::Ones(batch, 2);
  for (auto _ : state) {
    Tape tape = gen.sample_latents(batch, rng);
    gen.forward(tape);
    benchmark::DoNotOptimize(gen.backward(tape, grad_out));
  }
}
BENCHMARK(BM_MlpForwardBackward)->Arg(16)->Arg(150);

static void BM_BarycentricStep(benchmark::State& state) {
  std::vector<DiscreteMeasure> measures;
  for (int p = 0; p < 4; ++p)
    measures.push_back(random_measure(256, 2, 10 + p));
  SinkhornConfig cfg;
  cfg.epsilon = 0.1;
  cfg.tolerance = 1e-4;
  cfg.max_iterations = 3000;
  cfg.anneal_factor = 0.9;
  const BarycenterProblem problem =
      BarycenterProblem::make(measures, DiscrepancySpec::sinkhorn_div(cfg));
  AffineGaussian gen(Eigen::VectorXd::Zero(2),
                     0.4 * Eigen::MatrixXd::Identity(2, 2));
  OptimizerSpec opt;
  opt.learning_rate = 0.05;
  opt.batch_size = 64;
  OptimizerState st(gen.param_count());
  const SeededRng root(3);
  int it = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(
        barycentric_step(problem, gen, opt, st, it++, root));
}
BENCHMARK(BM_BarycentricStep);

BENCHMARK_MAIN();
