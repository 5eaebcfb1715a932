#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <barygen/generators.hpp>
#include <barygen/kernels.hpp>
#include <barygen/oracles.hpp>
#include <cmath>
#include <filesystem>

using namespace barygen;

namespace {

DiscreteMeasure random_measure(Eigen::Index n, Eigen::Index d, SeededRng& rng) {
  Eigen::MatrixXd pts(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k) pts(i, k) = rng.normal();
  return DiscreteMeasure::uniform(std::move(pts));
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

// Finite-difference check of backward() through a fixed loss on the output
// atoms, with latents frozen on the tape.
double backward_fd_relative_error(const Generator& gen, Eigen::Index batch,
                                  SeededRng rng, double h) {
  const KernelSpec kernel = KernelSpec::rational_quadratic(1.0, 1.5);
  SeededRng lrng = rng.derive(1);
  Tape tape = gen.sample_latents(batch, lrng);
  SeededRng drng = rng.derive(2);
  const DiscreteMeasure target = random_measure(batch, gen.dim(), drng);

  Tape grad_tape = tape;
  const DiscreteMeasure out = gen.forward(grad_tape);
  const Eigen::MatrixXd grad_atoms = mmd2_grad_points(kernel, out, target);
  const Eigen::VectorXd analytic = gen.backward(grad_tape, grad_atoms);

  std::unique_ptr<Generator> probe = gen.clone();
  const auto loss = [&](const Eigen::VectorXd& v) {
    probe->set_params(v);
    Tape t = tape;
    return mmd2(kernel, probe->forward(t), target);
  };
  const Eigen::VectorXd fd = finite_difference_grad(loss, gen.params(), h);
  return (analytic - fd).norm() / std::max(fd.norm(), 1e-12);
}

}  // namespace

TEST_CASE("identity affine generator passes latents through") {
  AffineGaussian gen(3);
  SeededRng rng(1);
  Tape tape = gen.sample_latents(16, rng);
  const DiscreteMeasure out = gen.forward(tape);
  CHECK(out.points() == tape.latents);
  CHECK(out.weights()(0) == doctest::Approx(1.0 / 16));
}

TEST_CASE("forward is deterministic given seed and parameters") {
  SeededRng init(2);
  MlpGenerator gen({3, 8, 2}, init);
  SeededRng a(5), b(5);
  CHECK(gen.forward(10, a).measure.points() ==
        gen.forward(10, b).measure.points());
}

TEST_CASE("ellipse pair atoms satisfy their ellipse equations") {
  SeededRng init(3);
  const EllipsePair gen = EllipsePair::random_init(init);
  SeededRng rng(4);
  ForwardResult fr = gen.forward(64, rng);
  for (Eigen::Index i = 0; i < 64; ++i) {
    const int which = fr.tape.indices[std::size_t(i)];
    const Eigen::Vector2d c = gen.center(which);
    const Eigen::Vector2d ab = gen.axes(which);
    const double rx = (fr.measure.points()(i, 0) - c.x()) / ab.x();
    const double ry = (fr.measure.points()(i, 1) - c.y()) / ab.y();
    CHECK(std::abs(rx * rx + ry * ry - 1.0) <= 1e-9);
  }
}

TEST_CASE("particle cloud pass-through returns stored atoms exactly") {
  Eigen::MatrixXd atoms(4, 2);
  atoms << 1, 2, 3, 4, 5, 6, 7, 8;
  const ParticleCloud cloud(atoms, true);
  SeededRng rng(5);
  CHECK(cloud.forward(4, rng).measure.points() == atoms);
  CHECK_THROWS_AS(cloud.forward(3, rng), std::invalid_argument);

  const ParticleCloud sampler(atoms, false);
  const DiscreteMeasure out = sampler.forward(9, rng).measure;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    bool found = false;
    for (Eigen::Index j = 0; j < atoms.rows(); ++j)
      found = found || out.points().row(i) == atoms.row(j);
    CHECK(found);
  }
}

TEST_CASE("affine backward closed forms") {
  SeededRng init(6);
  AffineGaussian gen(2);
  SeededRng rng(7);
  Tape tape = gen.sample_latents(8, rng);
  gen.forward(tape);
  Eigen::MatrixXd grad_out(8, 2);
  for (Eigen::Index i = 0; i < grad_out.size(); ++i)
    grad_out(i / 2, i % 2) = init.normal();

  Tape tape_copy = tape;
  const Eigen::VectorXd grad = gen.backward(tape_copy, grad_out);
  // d/dm is the column sum of grad_out.
  CHECK((grad.head(2).transpose() - grad_out.colwise().sum()).norm() <= 1e-14);
  // d/dA is sum_n g_n z_n^T.
  const Eigen::MatrixXd ga = grad_out.transpose() * tape.latents;
  CHECK((grad.tail(4) - Eigen::Map<const Eigen::VectorXd>(ga.data(), 4)).norm() <=
        1e-14);
}

TEST_CASE("backward matches finite differences for every variant") {
  SeededRng rng(8);

  AffineGaussian affine(2);
  CHECK(backward_fd_relative_error(affine, 8, rng, 1e-6) <= 1e-5);

  SeededRng mlp_init(9);
  MlpGenerator mlp({2, 16, 8, 2}, mlp_init);
  CHECK(backward_fd_relative_error(mlp, 8, rng.derive(1), 1e-6) <= 1e-5);

  SeededRng e_init(10);
  EllipsePair ellipse = EllipsePair::random_init(e_init);
  CHECK(backward_fd_relative_error(ellipse, 8, rng.derive(2), 1e-6) <= 1e-5);

  Eigen::MatrixXd atoms(6, 2);
  for (Eigen::Index i = 0; i < atoms.size(); ++i)
    atoms(i / 2, i % 2) = rng.normal();
  ParticleCloud cloud(atoms, true);
  CHECK(backward_fd_relative_error(cloud, 6, rng.derive(3), 1e-6) <= 1e-5);

  std::vector<AffineGaussian> parts;
  for (int c = 0; c < 3; ++c) {
    Eigen::VectorXd m(2);
    m << rng.normal(), rng.normal();
    parts.emplace_back(m, 0.6 * Eigen::MatrixXd::Identity(2, 2));
  }
  GaussianMixture mixture(std::move(parts),
                          Eigen::VectorXd::Constant(3, 1.0 / 3));
  CHECK(backward_fd_relative_error(mixture, 9, rng.derive(4), 1e-6) <= 1e-5);
}

TEST_CASE("appendix-default MLP shape differentiates cleanly") {
  // The full parameter vector is ~4e5 entries, so probe the gradient with
  // random directional derivatives instead of coordinate differences.
  SeededRng init(11);
  MlpGenerator gen({10, 50, 200, 1000, 200, 2}, init);
  SeededRng rng(12);
  Tape tape = gen.sample_latents(4, rng);
  REQUIRE(gen.net().min_preactivation_margin(tape.latents) > 1e-6);

  const KernelSpec kernel = KernelSpec::rational_quadratic(1.0, 1.5);
  SeededRng drng(13);
  const DiscreteMeasure target = random_measure(6, 2, drng);
  Tape grad_tape = tape;
  const DiscreteMeasure out = gen.forward(grad_tape);
  const Eigen::MatrixXd grad_atoms = mmd2_grad_points(kernel, out, target);
  const Eigen::VectorXd analytic = gen.backward(grad_tape, grad_atoms);

  std::unique_ptr<Generator> probe = gen.clone();
  const Eigen::VectorXd theta = gen.params();
  const auto loss_at = [&](const Eigen::VectorXd& v) {
    probe->set_params(v);
    Tape t = tape;
    return mmd2(kernel, probe->forward(t), target);
  };
  const double h = 1e-5;
  for (int probe_idx = 0; probe_idx < 12; ++probe_idx) {
    Eigen::VectorXd dir(theta.size());
    for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = drng.normal();
    dir.normalize();
    const double fd = (loss_at(theta + h * dir) - loss_at(theta - h * dir)) /
                      (2.0 * h);
    const double an = analytic.dot(dir);
    CHECK(std::abs(an - fd) <=
          1e-5 * std::max({std::abs(fd), std::abs(an), 1e-8}));
  }
}

TEST_CASE("parameter round trips and validation") {
  SeededRng init(13);
  MlpGenerator gen({2, 8, 2}, init);
  const Eigen::VectorXd theta = gen.params();
  gen.set_params(theta);
  CHECK(gen.params() == theta);

  Eigen::VectorXd wrong(theta.size() + 1);
  wrong.setZero();
  CHECK_THROWS_AS(gen.set_params(wrong), std::invalid_argument);
  Eigen::VectorXd infinite = theta;
  infinite(0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(gen.set_params(infinite), std::invalid_argument);
}

TEST_CASE("parameter perturbations respect the dependency structure") {
  AffineGaussian gen(2);
  SeededRng rng(14);
  Tape tape = gen.sample_latents(8, rng);
  const Eigen::MatrixXd base = gen.forward(tape).points();

  Eigen::VectorXd theta = gen.params();
  theta(0) += 0.5;  // mean, first coordinate
  gen.set_params(theta);
  Tape tape2 = tape;
  const Eigen::MatrixXd shifted = gen.forward(tape2).points();
  CHECK((shifted.col(0).array() - base.col(0).array() - 0.5).abs().maxCoeff() <=
        1e-14);
  CHECK(shifted.col(1) == base.col(1));
}

TEST_CASE("a tape may be consumed exactly once") {
  AffineGaussian gen(2);
  SeededRng rng(15);
  Tape tape = gen.sample_latents(4, rng);
  gen.forward(tape);
  const Eigen::MatrixXd grad_out = Eigen::MatrixXd::Ones(4, 2);
  gen.backward(tape, grad_out);
  CHECK_THROWS_AS(gen.backward(tape, grad_out), std::logic_error);
  Eigen::MatrixXd bad_shape = Eigen::MatrixXd::Ones(3, 2);
  Tape tape2 = gen.sample_latents(4, rng);
  gen.forward(tape2);
  CHECK_THROWS_AS(gen.backward(tape2, bad_shape), std::invalid_argument);
}

TEST_CASE("mixture frozen at measure fits realizes the categorical process") {
  SeededRng data_rng(16);
  std::vector<DiscreteMeasure> measures;
  GaussianSpec a;
  a.mean = Eigen::Vector2d(-2.0, 0.0);
  a.covariance = 0.04 * Eigen::MatrixXd::Identity(2, 2);
  GaussianSpec b;
  b.mean = Eigen::Vector2d(3.0, 1.0);
  b.covariance = 0.09 * Eigen::MatrixXd::Identity(2, 2);
  measures.push_back(sample_gaussian(a, 4000, data_rng));
  measures.push_back(sample_gaussian(b, 4000, data_rng));
  Eigen::VectorXd beta(2);
  beta << 0.3, 0.7;

  const GaussianMixture mixture =
      GaussianMixture::from_measure_fits(measures, beta);
  SeededRng rng(17);
  ForwardResult fr = mixture.forward(20000, rng);

  // Component frequencies follow beta; conditional means follow the fits.
  Eigen::Vector2d freq = Eigen::Vector2d::Zero();
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(2, 2);
  for (Eigen::Index i = 0; i < 20000; ++i) {
    const int c = fr.tape.indices[std::size_t(i)];
    freq(c) += 1.0;
    sums.row(c) += fr.measure.points().row(i);
  }
  CHECK(std::abs(freq(0) / 20000 - 0.3) < 0.02);
  CHECK((sums.row(0) / freq(0) - a.mean.transpose()).norm() < 0.05);
  CHECK((sums.row(1) / freq(1) - b.mean.transpose()).norm() < 0.05);
}

TEST_CASE("checkpoints round trip every variant") {
  SeededRng rng(18);
  std::vector<std::unique_ptr<Generator>> gens;
  gens.push_back(std::make_unique<AffineGaussian>(3));
  {
    SeededRng init(19);
    gens.push_back(std::make_unique<MlpGenerator>(std::vector<int>{2, 8, 4, 2},
                                                  init));
  }
  {
    SeededRng init(20);
    gens.push_back(
        std::make_unique<EllipsePair>(EllipsePair::random_init(init)));
  }
  {
    std::vector<AffineGaussian> parts;
    Eigen::VectorXd m1(2), m2(2);
    m1 << 1, 2;
    m2 << -1, 0.5;
    parts.emplace_back(m1, Eigen::MatrixXd::Identity(2, 2));
    parts.emplace_back(m2, 0.5 * Eigen::MatrixXd::Identity(2, 2));
    Eigen::VectorXd w(2);
    w << 0.25, 0.75;
    gens.push_back(std::make_unique<GaussianMixture>(std::move(parts), w));
  }
  {
    Eigen::MatrixXd atoms(5, 2);
    for (Eigen::Index i = 0; i < atoms.size(); ++i)
      atoms(i / 2, i % 2) = rng.normal();
    gens.push_back(std::make_unique<ParticleCloud>(atoms, true));
  }

  for (const auto& gen : gens) {
    // Perturb parameters so the checkpoint is nontrivial.
    Eigen::VectorXd theta = gen->params();
    for (Eigen::Index i = 0; i < theta.size(); ++i)
      theta(i) += 0.01 * rng.normal();
    gen->set_params(theta);

    const std::string path =
        temp_path("barygen_ckpt_" + gen->model_name() + ".ckpt");
    save_checkpoint(*gen, path);
    const std::unique_ptr<Generator> back = load_checkpoint(path);
    REQUIRE(back->model_name() == gen->model_name());
    REQUIRE(back->param_count() == gen->param_count());
    CHECK(back->params() == gen->params());

    SeededRng sa(21), sb(21);
    const Eigen::Index j = gen->model_name() == "particle_cloud" ? 5 : 8;
    CHECK(gen->forward(j, sa).measure.points() ==
          back->forward(j, sb).measure.points());
  }

  CHECK_THROWS_AS(load_checkpoint(temp_path("missing_ckpt.ckpt")),
                  std::runtime_error);
}
