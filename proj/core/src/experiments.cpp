#include "barygen/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "barygen/oracles.hpp"
#include "barygen/svg_plot.hpp"

namespace fs = std::filesystem;

namespace barygen {

namespace {

Eigen::VectorXd resolve_beta(const std::vector<double>& raw, std::size_t p,
                             const std::string& what) {
  if (raw.empty())
    return Eigen::VectorXd::Constant(Eigen::Index(p), 1.0 / double(p));
  if (raw.size() != p)
    throw ConfigError(what + ": beta length must equal the measure count");
  Eigen::VectorXd beta(static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < p; ++i) {
    if (raw[i] < 0.0) throw ConfigError(what + ": beta must be nonnegative");
    beta(Eigen::Index(i)) = raw[i];
  }
  const double total = beta.sum();
  if (!(total > 0.0)) throw ConfigError(what + ": beta must have positive mass");
  return beta / total;
}

GaussianSpec random_gaussian_spec(int dim, double mean_range, double cov_scale,
                                  SeededRng& rng) {
  GaussianSpec spec;
  spec.mean.resize(dim);
  for (int k = 0; k < dim; ++k)
    spec.mean(k) = mean_range * (2.0 * rng.uniform() - 1.0);
  // Root factor near a scaled identity with a random well-conditioned skew.
  Eigen::MatrixXd b(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) b(i, j) = rng.normal();
  Eigen::MatrixXd root = cov_scale * (Eigen::MatrixXd::Identity(dim, dim) +
                                      0.5 * b / std::sqrt(double(dim)));
  spec.covariance = root * root.transpose();
  return spec;
}

}  // namespace

BuiltDataset build_dataset(const DatasetSpecCfg& cfg) {
  BuiltDataset out;
  SeededRng rng(cfg.data_seed);
  if (cfg.atoms < 1) throw ConfigError("[dataset] atoms: must be >= 1");

  if (cfg.kind == "gaussians") {
    if (cfg.count < 1) throw ConfigError("[dataset] count: must be >= 1");
    for (int p = 0; p < cfg.count; ++p) {
      SeededRng mrng = rng.derive(std::uint64_t(p));
      GaussianSpec spec =
          random_gaussian_spec(cfg.dim, cfg.mean_range, cfg.cov_scale, mrng);
      SeededRng srng = mrng.derive(1);
      out.measures.push_back(sample_gaussian(spec, cfg.atoms, srng));
    }
  } else if (cfg.kind == "four_gaussians") {
    if (cfg.dim != 2)
      throw ConfigError("[dataset] four_gaussians: dim must be 2");
    const double h = cfg.side / 2.0;
    const double corners[4][2] = {{-h, h}, {h, h}, {-h, -h}, {h, -h}};
    for (int p = 0; p < 4; ++p) {
      GaussianSpec spec;
      spec.mean = Eigen::Vector2d(corners[p][0], corners[p][1]);
      spec.covariance =
          cfg.sigma * cfg.sigma * Eigen::MatrixXd::Identity(2, 2);
      SeededRng srng = rng.derive(std::uint64_t(p));
      out.measures.push_back(sample_gaussian(spec, cfg.atoms, srng));
    }
  } else if (cfg.kind == "ellipses") {
    if (cfg.count < 1) throw ConfigError("[dataset] count: must be >= 1");
    out.measures = make_nested_ellipses(cfg.count, cfg.atoms, rng);
  } else if (cfg.kind == "blobs") {
    const double h = cfg.separation / 2.0;
    for (int p = 0; p < 2; ++p) {
      GaussianSpec spec;
      spec.mean = Eigen::Vector2d(p == 0 ? -h : h, 0.0);
      spec.covariance =
          cfg.sigma * cfg.sigma * Eigen::MatrixXd::Identity(2, 2);
      SeededRng srng = rng.derive(std::uint64_t(p));
      out.measures.push_back(sample_gaussian(spec, cfg.atoms, srng));
    }
  } else if (cfg.kind == "csv") {
    if (cfg.files.empty())
      throw ConfigError("[dataset] files: csv dataset needs at least one path");
    for (const auto& path : cfg.files) {
      try {
        out.measures.push_back(load_csv(path));
      } catch (const std::exception& e) {
        throw ConfigError(std::string("[dataset] files: ") + e.what());
      }
    }
  } else {
    throw ConfigError("[dataset] kind: unknown dataset '" + cfg.kind + "'");
  }
  out.beta = resolve_beta(cfg.beta, out.measures.size(), "[dataset]");
  return out;
}

std::unique_ptr<Generator> build_generator(const GeneratorSpecCfg& cfg,
                                           Eigen::Index dim,
                                           const BuiltDataset& data,
                                           SeededRng& rng) {
  if (cfg.kind == "affine_gaussian") {
    return std::make_unique<AffineGaussian>(dim);
  }
  if (cfg.kind == "gaussian_mixture") {
    const int p =
        cfg.components > 0 ? cfg.components : int(data.measures.size());
    if (p < 1) throw ConfigError("[generator] components: must be >= 1");
    if (cfg.init == "data_fits") {
      if (p != int(data.measures.size()))
        throw ConfigError(
            "[generator] init=data_fits requires one component per measure");
      return std::make_unique<GaussianMixture>(
          GaussianMixture::from_measure_fits(data.measures, data.beta));
    }
    Eigen::VectorXd weights = data.beta;
    if (p != int(data.measures.size()))
      weights = Eigen::VectorXd::Constant(p, 1.0 / double(p));
    std::vector<AffineGaussian> parts;
    for (int c = 0; c < p; ++c) {
      Eigen::VectorXd mean(dim);
      if (cfg.init == "data_atoms") {
        const auto& mu =
            data.measures[rng.index(data.measures.size())];
        mean = mu.points().row(Eigen::Index(rng.index(std::size_t(mu.size()))));
      } else if (cfg.init == "default") {
        for (Eigen::Index k = 0; k < dim; ++k)
          mean(k) = cfg.init_scale * rng.normal();
      } else {
        throw ConfigError("[generator] init: unknown mixture init '" +
                          cfg.init + "'");
      }
      parts.emplace_back(mean, cfg.init_scale *
                                   Eigen::MatrixXd::Identity(dim, dim));
    }
    return std::make_unique<GaussianMixture>(std::move(parts), weights);
  }
  if (cfg.kind == "mlp") {
    std::vector<int> sizes;
    sizes.push_back(cfg.latent_dim);
    for (int h : cfg.hidden) sizes.push_back(h);
    sizes.push_back(int(dim));
    return std::make_unique<MlpGenerator>(std::move(sizes), rng);
  }
  if (cfg.kind == "ellipse_pair") {
    if (dim != 2) throw ConfigError("[generator] ellipse_pair: needs dim 2");
    return std::make_unique<EllipsePair>(EllipsePair::random_init(rng));
  }
  if (cfg.kind == "particle_cloud") {
    if (cfg.atoms < 1) throw ConfigError("[generator] atoms: must be >= 1");
    Eigen::MatrixXd atoms(cfg.atoms, dim);
    for (Eigen::Index i = 0; i < atoms.rows(); ++i)
      for (Eigen::Index k = 0; k < dim; ++k)
        atoms(i, k) = cfg.init_scale * rng.normal();
    return std::make_unique<ParticleCloud>(std::move(atoms), cfg.pass_through);
  }
  throw ConfigError("[generator] kind: unknown generator '" + cfg.kind + "'");
}

namespace {

KernelSpec build_kernel(const DiscrepancyCfg& cfg) {
  if (cfg.kernel == "rbf") return KernelSpec::rbf(cfg.lengthscale);
  if (cfg.kernel == "rq")
    return KernelSpec::rational_quadratic(cfg.alpha, cfg.lengthscale);
  throw ConfigError("[discrepancy] kernel: unknown kernel '" + cfg.kernel +
                    "'");
}

SinkhornConfig build_sinkhorn(const DiscrepancyCfg& cfg) {
  SinkhornConfig sc;
  sc.epsilon = cfg.epsilon;
  sc.cost_exponent = cfg.cost_exponent;
  sc.tolerance = cfg.tolerance;
  sc.max_iterations = cfg.max_iterations;
  sc.anneal_factor = cfg.anneal;
  try {
    sc.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("[discrepancy] ") + e.what());
  }
  return sc;
}

}  // namespace

DiscrepancySpec build_discrepancy(const DiscrepancyCfg& cfg) {
  try {
    if (cfg.kind == "mmd2") return DiscrepancySpec::mmd(build_kernel(cfg));
    if (cfg.kind == "sinkhorn_divergence")
      return DiscrepancySpec::sinkhorn_div(build_sinkhorn(cfg));
    if (cfg.kind == "entropic_w")
      return DiscrepancySpec::entropic(build_sinkhorn(cfg));
    if (cfg.kind == "smmd") {
      SmmdConfig sc;
      sc.gradient_penalty = cfg.gradient_penalty;
      sc.critic_steps = cfg.critic_steps;
      sc.critic_lr = cfg.critic_lr;
      sc.validate();
      return DiscrepancySpec::smmd_spec(sc);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("[discrepancy] ") + e.what());
  }
  throw ConfigError("[discrepancy] kind: unknown discrepancy '" + cfg.kind +
                    "'");
}

OptimizerSpec build_optimizer(const OptimizerCfg& cfg) {
  OptimizerSpec opt;
  if (cfg.kind == "adam")
    opt.method = OptimizerSpec::Method::kAdam;
  else if (cfg.kind == "sgd")
    opt.method = OptimizerSpec::Method::kSgd;
  else
    throw ConfigError("[optimizer] kind: unknown optimizer '" + cfg.kind + "'");
  opt.learning_rate = cfg.lr;
  opt.beta1 = cfg.beta1;
  opt.beta2 = cfg.beta2;
  opt.lr_decay = cfg.decay;
  opt.batch_size = cfg.batch;
  opt.iterations = cfg.iters;
  try {
    opt.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("[optimizer] ") + e.what());
  }
  return opt;
}

FeatureMap build_critic(const DiscrepancyCfg& cfg, Eigen::Index dim,
                        SeededRng& rng, const Eigen::MatrixXd* probe_points) {
  std::vector<int> sizes;
  sizes.push_back(int(dim));
  for (int h : cfg.critic_hidden) sizes.push_back(h);
  sizes.push_back(cfg.feature_dim);
  FeatureMap critic = MlpNet::fan_in_init(std::move(sizes), rng);
  if (probe_points != nullptr && probe_points->rows() > 0) {
    const double typical =
        critic.jacobian_frobenius(*probe_points).mean();
    if (typical > 1e-12) {
      const double gain =
          std::pow(1.0 / typical, 1.0 / double(critic.layer_count()));
      critic.set_params(critic.params() * gain);
    }
  }
  return critic;
}

namespace {

Eigen::Index sample_count_for(const Generator& gen, int requested) {
  const auto* cloud = dynamic_cast<const ParticleCloud*>(&gen);
  if (cloud != nullptr && cloud->pass_through()) return cloud->atoms().rows();
  return requested;
}

void write_samples_csv(const DiscreteMeasure& samples,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  char buf[32];
  for (Eigen::Index k = 0; k < samples.dim(); ++k)
    out << (k > 0 ? "," : "") << "x" << k;
  out << "\n";
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    for (Eigen::Index k = 0; k < samples.dim(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", samples.points()(i, k));
      out << (k > 0 ? "," : "") << buf;
    }
    out << "\n";
  }
}

const char* kPalette[] = {"#5778a4", "#6a9f58", "#b8b0ac", "#967662",
                          "#a87c9f", "#85b6b2", "#e49444", "#d1615d"};

void write_scatter(const std::string& path, const std::string& title,
                   const std::vector<DiscreteMeasure>& measures,
                   const DiscreteMeasure& samples) {
  std::vector<ScatterLayer> layers;
  for (std::size_t p = 0; p < measures.size(); ++p) {
    ScatterLayer layer;
    layer.label = measures.size() > 6 && p > 0 ? "" : "input " + std::to_string(p);
    layer.color = kPalette[p % (sizeof(kPalette) / sizeof(kPalette[0]))];
    layer.radius = 1.6;
    layer.points = measures[p].points();
    layers.push_back(std::move(layer));
  }
  ScatterLayer bary;
  bary.label = "barycenter samples";
  bary.color = "#ff7f0e";
  bary.radius = 2.0;
  bary.points = samples.points();
  layers.push_back(std::move(bary));
  write_scatter_svg(path, title, layers);
}

std::string seed_path(const std::string& dir, const std::string& stem,
                      std::uint64_t seed, const std::string& ext) {
  return dir + "/" + stem + "_seed" + std::to_string(seed) + ext;
}

}  // namespace

FitReport run_fit(const std::string& config_path, const RunOptions& opts) {
  FitReport report;
  ExperimentConfig cfg;
  BuiltDataset data;
  DiscrepancySpec disc = DiscrepancySpec::mmd(KernelSpec::rbf(1.0));
  OptimizerSpec opt;
  try {
    cfg = ExperimentConfig::load(config_path);
    if (opts.seed_override) cfg.seeds = {*opts.seed_override};
    if (opts.out_override) cfg.out_dir = *opts.out_override;
    data = build_dataset(cfg.dataset);
    disc = build_discrepancy(cfg.discrepancy);
    opt = build_optimizer(cfg.optimizer);
    {
      // Field-level validation of the generator spec before any seed runs.
      SeededRng probe_rng(0);
      build_generator(cfg.generator, data.measures.front().dim(), data,
                      probe_rng);
    }
    fs::create_directories(cfg.out_dir);
  } catch (const ConfigError& e) {
    report.status = RunStatus::kConfigError;
    report.message = e.what();
    return report;
  } catch (const std::exception& e) {
    report.status = RunStatus::kConfigError;
    report.message = e.what();
    return report;
  }

  report.seeds.resize(cfg.seeds.size());
  std::vector<std::string> errors(cfg.seeds.size());

  const auto run_one = [&](std::size_t idx) {
    const std::uint64_t seed = cfg.seeds[idx];
    SeedOutcome& outcome = report.seeds[idx];
    outcome.seed = seed;
    try {
      SeededRng rng(seed);
      SeededRng init_rng = rng.derive(1);
      std::unique_ptr<Generator> gen =
          build_generator(cfg.generator, data.measures.front().dim(), data,
                          init_rng);
      BarycenterProblem problem =
          BarycenterProblem::make(data.measures, disc, data.beta);

      Diagnostics diag;
      if (problem.has_smmd()) {
        std::vector<FeatureMap> critics;
        for (std::size_t p = 0; p < problem.count(); ++p) {
          SeededRng crng = rng.derive(2).derive(p);
          critics.push_back(build_critic(cfg.discrepancy, problem.dim(), crng,
                                         &problem.measures[p].points()));
        }
        diag = adversarial_fit(problem, *gen, critics, opt, rng.derive(3));
      } else {
        diag = fit(problem, *gen, opt, rng.derive(3));
      }

      outcome.failed = diag.failed;
      outcome.final_smoothed_loss = diag.final_smoothed_loss();
      outcome.trace_path = seed_path(cfg.out_dir, "trace", seed, ".csv");
      outcome.samples_path = seed_path(cfg.out_dir, "samples", seed, ".csv");
      outcome.checkpoint_path =
          seed_path(cfg.out_dir, "checkpoint", seed, ".ckpt");
      outcome.scatter_path = seed_path(cfg.out_dir, "scatter", seed, ".svg");

      write_trace_csv(diag, outcome.trace_path);
      SeededRng sample_rng = rng.derive(4);
      const DiscreteMeasure samples =
          gen->forward(sample_count_for(*gen, cfg.eval_samples), sample_rng)
              .measure;
      write_samples_csv(samples, outcome.samples_path);
      save_checkpoint(*gen, outcome.checkpoint_path);
      write_scatter(outcome.scatter_path, cfg.name, data.measures, samples);
      write_line_svg(seed_path(cfg.out_dir, "loss", seed, ".svg"),
                     cfg.name + " smoothed loss", diag.smoothed_loss);
    } catch (const std::exception& e) {
      outcome.failed = true;
      errors[idx] = e.what();
    }
  };

  // Seeds are independent jobs; outputs are seed-suffixed, so they can run
  // in parallel.
  std::vector<std::thread> workers;
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
    workers.emplace_back(run_one, i);
  for (auto& w : workers) w.join();

  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    if (!errors[i].empty()) {
      report.status = RunStatus::kRunFailure;
      report.message = "seed " + std::to_string(cfg.seeds[i]) + ": " + errors[i];
    } else if (report.seeds[i].failed && report.status == RunStatus::kOk) {
      report.status = RunStatus::kRunFailure;
      report.message =
          "seed " + std::to_string(cfg.seeds[i]) + ": run declared failed";
    }
  }

  // Canonical copies of the first seed's artifacts.
  if (!report.seeds.empty() && !report.seeds.front().trace_path.empty()) {
    const auto& first = report.seeds.front();
    const auto copy = [&](const std::string& from, const std::string& stem) {
      if (from.empty() || !fs::exists(from)) return;
      fs::copy_file(from, cfg.out_dir + "/" + stem,
                    fs::copy_options::overwrite_existing);
    };
    copy(first.trace_path, "trace.csv");
    copy(first.samples_path, "samples.csv");
    copy(first.checkpoint_path, "checkpoint.ckpt");
    copy(first.scatter_path, "scatter.svg");
  }

  if (!opts.quiet) {
    for (const auto& s : report.seeds)
      std::cout << "seed " << s.seed << ": "
                << (s.failed ? "FAILED" : "ok") << " final smoothed loss "
                << s.final_smoothed_loss << "\n";
  }
  return report;
}

DatagenReport run_datagen(const std::string& config_path,
                          const RunOptions& opts) {
  DatagenReport report;
  try {
    ExperimentConfig cfg = ExperimentConfig::load(config_path);
    if (opts.out_override) cfg.out_dir = *opts.out_override;
    const BuiltDataset data = build_dataset(cfg.dataset);
    fs::create_directories(cfg.out_dir);
    for (std::size_t p = 0; p < data.measures.size(); ++p) {
      char name[64];
      std::snprintf(name, sizeof(name), "measure_%02zu.csv", p);
      const std::string path = cfg.out_dir + "/" + name;
      save_csv(data.measures[p], path);
      report.files.push_back(path);
    }
    if (!opts.quiet)
      std::cout << "wrote " << report.files.size() << " measures to "
                << cfg.out_dir << "\n";
  } catch (const ConfigError& e) {
    report.status = RunStatus::kConfigError;
    report.message = e.what();
  } catch (const std::exception& e) {
    report.status = RunStatus::kRunFailure;
    report.message = e.what();
  }
  return report;
}

namespace {

DiscreteMeasure random_measure(Eigen::Index n, Eigen::Index d,
                               SeededRng& rng, double scale = 1.0) {
  Eigen::MatrixXd pts(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k) pts(i, k) = scale * rng.normal();
  return DiscreteMeasure::uniform(std::move(pts));
}

Eigen::VectorXd random_simplex(Eigen::Index n, SeededRng& rng) {
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = -std::log(1.0 - rng.uniform());
  return w / w.sum();
}

}  // namespace

OracleReport run_oracle(const std::string& config_path,
                        const RunOptions& opts) {
  OracleReport report;
  ExperimentConfig cfg;
  int n = 4, p = 2, candidates = 100, trials = 20;
  std::uint64_t seed = 7;
  try {
    const KeyValueFile kv = KeyValueFile::parse_file(config_path);
    cfg = ExperimentConfig::from_file(kv);
    if (opts.out_override) cfg.out_dir = *opts.out_override;
    n = kv.get_int("oracle", "atoms", n);
    p = kv.get_int("oracle", "measures", p);
    candidates = kv.get_int("oracle", "candidates", candidates);
    trials = kv.get_int("oracle", "trials", trials);
    seed = std::uint64_t(kv.get_int("oracle", "seed", int(seed)));
    if (opts.seed_override) seed = *opts.seed_override;
    if (n < 2 || n > 6 || p < 1 || p > 3)
      throw ConfigError(
          "[oracle] instance limits exceeded: need 2 <= atoms <= 6 and "
          "1 <= measures <= 3");
    fs::create_directories(cfg.out_dir);
  } catch (const ConfigError& e) {
    report.status = RunStatus::kConfigError;
    report.message = e.what();
    return report;
  } catch (const std::exception& e) {
    report.status = RunStatus::kConfigError;
    report.message = e.what();
    return report;
  }

  SeededRng rng(seed);
  const auto add_line = [&](const std::string& name, bool passed,
                            double margin, const std::string& detail) {
    report.lines.push_back({name, passed, margin, detail});
  };

  {
    // Proposition 1 at desk scale: the multi-marginal pushforward beats
    // random uniform candidates under the exact W2 objective.
    std::vector<DiscreteMeasure> measures;
    for (int q = 0; q < p; ++q) {
      SeededRng mrng = rng.derive(10 + q);
      measures.push_back(random_measure(n, 2, mrng));
    }
    SeededRng brng = rng.derive(20);
    const Eigen::VectorXd beta = random_simplex(p, brng);
    const MultiMarginalResult mm = multimarginal_bruteforce(measures, beta);
    const DiscreteMeasure pushforward =
        DiscreteMeasure::uniform(mm.barycenter_atoms);
    const double l_push = w2_barycenter_objective(pushforward, measures, beta);
    double worst_margin = std::numeric_limits<double>::infinity();
    SeededRng crng = rng.derive(21);
    for (int c = 0; c < candidates; ++c) {
      const DiscreteMeasure candidate = random_measure(n, 2, crng, 1.5);
      worst_margin = std::min(
          worst_margin,
          w2_barycenter_objective(candidate, measures, beta) - l_push);
    }
    add_line("prop1_pushforward_optimality", worst_margin >= -1e-9,
             worst_margin,
             "min over random candidates of L(candidate) - L(T#Q*)");
    const bool couplings_agree = mm.assignment == mm.max_form_assignment;
    // Expanding the square: min-form = sum_p beta_p E||x||^2 - max-form.
    double second_moment = 0.0;
    for (int q = 0; q < p; ++q)
      second_moment += beta(q) *
                       measures[q].points().rowwise().squaredNorm().mean();
    const double identity_gap =
        std::abs(mm.objective - (second_moment - mm.max_form_value));
    add_line("prop1_minmax_coupling_agreement",
             couplings_agree && identity_gap <= 1e-9, identity_gap,
             "min-form vs max-form optima and the expand-the-square identity");
  }

  {
    // Proposition 2 at desk scale, for both kernel families.
    for (const bool use_rbf : {false, true}) {
      const KernelSpec kernel = use_rbf
                                    ? KernelSpec::rbf(1.0)
                                    : KernelSpec::rational_quadratic(1.0, 2.0);
      std::vector<DiscreteMeasure> measures;
      for (int q = 0; q < p; ++q) {
        SeededRng mrng = rng.derive(30 + q + (use_rbf ? 100 : 0));
        measures.push_back(random_measure(8, 2, mrng));
      }
      SeededRng brng = rng.derive(40 + (use_rbf ? 100 : 0));
      const Eigen::VectorXd beta =
          random_simplex(Eigen::Index(measures.size()), brng);
      const MixtureObjectiveResult mix =
          mmd_mixture_objective(measures, beta, kernel);
      double worst_margin = std::numeric_limits<double>::infinity();
      SeededRng crng = rng.derive(41 + (use_rbf ? 100 : 0));
      for (int c = 0; c < candidates; ++c) {
        // Random reweighting over the same support universe.
        const Eigen::VectorXd w = random_simplex(mix.mixture.size(), crng);
        const DiscreteMeasure candidate(mix.mixture.points(), w);
        worst_margin = std::min(
            worst_margin,
            mmd_barycenter_objective(candidate, measures, beta, kernel) -
                mix.value);
      }
      add_line(use_rbf ? "prop2_mixture_optimality_rbf"
                       : "prop2_mixture_optimality_rq",
               worst_margin >= -1e-10, worst_margin,
               "min over random reweightings of F(candidate) - F(mixture)");
    }
  }

  {
    // Gaussian fixed point vs the 1-D closed form.
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
      SeededRng trng = rng.derive(50 + t);
      const int pp = 2 + int(trng.index(2));
      std::vector<GaussianSpec> specs;
      Eigen::VectorXd beta = random_simplex(pp, trng);
      double mean_target = 0.0, std_target = 0.0;
      for (int q = 0; q < pp; ++q) {
        GaussianSpec s;
        s.mean = Eigen::VectorXd::Constant(1, 2.0 * trng.uniform() - 1.0);
        const double sd = 0.2 + trng.uniform();
        s.covariance = Eigen::MatrixXd::Constant(1, 1, sd * sd);
        mean_target += beta(q) * s.mean(0);
        std_target += beta(q) * sd;
        specs.push_back(std::move(s));
      }
      const GaussianSpec bary = gaussian_w2_barycenter(specs, beta);
      worst = std::max(worst, std::abs(bary.mean(0) - mean_target));
      worst = std::max(
          worst, std::abs(std::sqrt(bary.covariance(0, 0)) - std_target));
    }
    add_line("gaussian_fixed_point_1d", worst <= 1e-9, worst,
             "max deviation from the 1-D closed form over random instances");
  }

  {
    // Hungarian backend vs exhaustive enumeration.
    double worst = 0.0;
    bool ok = true;
    for (int t = 0; t < trials; ++t) {
      SeededRng trng = rng.derive(70 + t);
      const Eigen::Index nn = 2 + Eigen::Index(trng.index(7));
      const DiscreteMeasure mx = random_measure(nn, 3, trng);
      const DiscreteMeasure my = random_measure(nn, 3, trng);
      for (int exponent : {1, 2}) {
        const auto a = exact_ot_uniform(mx.points(), my.points(), exponent,
                                        AssignmentBackend::kEnumeration);
        const auto b = exact_ot_uniform(mx.points(), my.points(), exponent,
                                        AssignmentBackend::kHungarian);
        worst = std::max(worst, std::abs(a.value - b.value));
        ok = ok && std::abs(a.value - b.value) <= 1e-12;
      }
    }
    add_line("hungarian_equals_enumeration", ok, worst,
             "max |enumeration - hungarian| over random instances");
  }

  report.all_passed = true;
  for (const auto& line : report.lines) report.all_passed &= line.passed;
  report.report_path = cfg.out_dir + "/oracle_report.txt";
  std::ofstream out(report.report_path);
  for (const auto& line : report.lines) {
    out << (line.passed ? "PASS" : "FAIL") << " " << line.name
        << " margin=" << line.margin << " (" << line.detail << ")\n";
    if (!opts.quiet)
      std::cout << (line.passed ? "PASS" : "FAIL") << " " << line.name
                << " margin=" << line.margin << "\n";
  }
  if (!report.all_passed) {
    report.status = RunStatus::kRunFailure;
    report.message = "oracle suite reported failures";
  }
  return report;
}

GradcheckReport run_gradcheck(const std::string& config_path,
                              const RunOptions& opts) {
  GradcheckReport report;
  ExperimentConfig cfg;
  std::uint64_t seed = 11;
  try {
    const KeyValueFile kv = KeyValueFile::parse_file(config_path);
    cfg = ExperimentConfig::from_file(kv);
    if (opts.out_override) cfg.out_dir = *opts.out_override;
    seed = std::uint64_t(kv.get_int("gradcheck", "seed", int(seed)));
    if (opts.seed_override) seed = *opts.seed_override;
    fs::create_directories(cfg.out_dir);
  } catch (const ConfigError& e) {
    report.status = RunStatus::kConfigError;
    report.message = e.what();
    return report;
  } catch (const std::exception& e) {
    report.status = RunStatus::kConfigError;
    report.message = e.what();
    return report;
  }

  SeededRng rng(seed);

  // MMD gradients against finite differences of the kernel sums.
  for (int t = 0; t < 6; ++t) {
    SeededRng trng = rng.derive(100 + t);
    const KernelSpec kernel =
        t % 2 == 0 ? KernelSpec::rbf(0.7 + trng.uniform())
                   : KernelSpec::rational_quadratic(
                         {{0.5, 1.0}, {2.0, 0.5 + trng.uniform()}});
    const DiscreteMeasure mx = random_measure(6, 3, trng);
    const DiscreteMeasure my = random_measure(5, 3, trng);
    const Eigen::MatrixXd analytic = mmd2_grad_points(kernel, mx, my);
    const auto loss = [&](const Eigen::VectorXd& flat) {
      const Eigen::MatrixXd pts =
          Eigen::Map<const Eigen::MatrixXd>(flat.data(), mx.size(), mx.dim());
      return mmd2(kernel, DiscreteMeasure(pts, mx.weights()), my);
    };
    const Eigen::VectorXd flat =
        Eigen::Map<const Eigen::VectorXd>(mx.points().data(), mx.size() * mx.dim());
    const Eigen::VectorXd fd = finite_difference_grad(loss, flat, 1e-5);
    const Eigen::VectorXd an =
        Eigen::Map<const Eigen::VectorXd>(analytic.data(), analytic.size());
    report.mmd_max_rel = std::max(
        report.mmd_max_rel, (an - fd).norm() / std::max(fd.norm(), 1e-12));
  }

  // Generator backward against finite differences through frozen latents.
  {
    std::vector<std::unique_ptr<Generator>> gens;
    SeededRng grng = rng.derive(200);
    gens.push_back(std::make_unique<AffineGaussian>(2));
    gens.push_back(std::make_unique<MlpGenerator>(
        std::vector<int>{2, 16, 8, 2}, grng));
    gens.push_back(std::make_unique<EllipsePair>(EllipsePair::random_init(grng)));
    {
      std::vector<AffineGaussian> parts;
      for (int c = 0; c < 2; ++c) {
        Eigen::VectorXd m(2);
        m << grng.normal(), grng.normal();
        parts.emplace_back(m, 0.5 * Eigen::MatrixXd::Identity(2, 2));
      }
      gens.push_back(std::make_unique<GaussianMixture>(
          std::move(parts), Eigen::VectorXd::Constant(2, 0.5)));
    }
    {
      Eigen::MatrixXd atoms(5, 2);
      for (Eigen::Index i = 0; i < atoms.size(); ++i)
        atoms(i / 2, i % 2) = grng.normal();
      gens.push_back(std::make_unique<ParticleCloud>(atoms, true));
    }
    const KernelSpec kernel = KernelSpec::rational_quadratic(1.0, 1.5);
    for (const auto& gen : gens) {
      SeededRng lrng = rng.derive(210);
      const Eigen::Index j =
          sample_count_for(*gen, 8);
      Tape tape = gen->sample_latents(j, lrng);
      SeededRng drng = rng.derive(211);
      const DiscreteMeasure target = random_measure(8, gen->dim(), drng);
      Tape grad_tape = tape;
      const DiscreteMeasure fake = gen->forward(grad_tape);
      const Eigen::MatrixXd grad_atoms = mmd2_grad_points(kernel, fake, target);
      const Eigen::VectorXd analytic = gen->backward(grad_tape, grad_atoms);
      std::unique_ptr<Generator> probe = gen->clone();
      const auto loss = [&](const Eigen::VectorXd& v) {
        probe->set_params(v);
        Tape t2 = tape;
        return mmd2(kernel, probe->forward(t2), target);
      };
      const Eigen::VectorXd fd =
          finite_difference_grad(loss, gen->params(), 1e-6);
      report.generator_max_rel =
          std::max(report.generator_max_rel,
                   (analytic - fd).norm() / std::max(fd.norm(), 1e-12));
    }
  }

  // Sinkhorn envelope gradients at tight tolerance, on unit-scale clouds
  // (the 1e-9 potential tolerance is only reachable in reasonable budgets
  // when the cost spread stays moderate relative to epsilon).
  {
    SinkhornConfig sc;
    sc.epsilon = 0.1;
    sc.tolerance = 1e-9;
    sc.max_iterations = 300000;
    for (int t = 0; t < 3; ++t) {
      SeededRng trng = rng.derive(300 + t);
      const DiscreteMeasure mx = random_measure(5, 2, trng, 0.35);
      const DiscreteMeasure my = random_measure(5, 2, trng, 0.35);
      const Eigen::MatrixXd analytic = sw_grad_points(mx, my, sc);
      const auto loss = [&](const Eigen::VectorXd& flat) {
        const Eigen::MatrixXd pts = Eigen::Map<const Eigen::MatrixXd>(
            flat.data(), mx.size(), mx.dim());
        return sinkhorn_divergence(DiscreteMeasure(pts, mx.weights()), my, sc);
      };
      const Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(
          mx.points().data(), mx.size() * mx.dim());
      const Eigen::VectorXd fd = finite_difference_grad(loss, flat, 1e-5);
      const Eigen::VectorXd an =
          Eigen::Map<const Eigen::VectorXd>(analytic.data(), analytic.size());
      report.sinkhorn_max_rel = std::max(
          report.sinkhorn_max_rel, (an - fd).norm() / std::max(fd.norm(), 1e-12));
    }
  }

  // Bias and variance of the stochastic barycentric gradient.
  {
    SeededRng drng = rng.derive(400);
    std::vector<DiscreteMeasure> measures;
    measures.push_back(random_measure(24, 2, drng, 0.35));
    measures.push_back(random_measure(24, 2, drng, 0.45));
    SinkhornConfig sc;
    sc.epsilon = 0.1;
    sc.tolerance = 1e-9;
    sc.max_iterations = 300000;
    // Probe at a generator state matched to the data scale.
    AffineGaussian gen(Eigen::VectorXd::Zero(2),
                       0.4 * Eigen::MatrixXd::Identity(2, 2));
    // Envelope bias against finite differences needs the tight tolerance;
    // minibatch variance is probed at the training tolerance.
    BarycenterProblem tight =
        BarycenterProblem::make(measures, DiscrepancySpec::sinkhorn_div(sc));
    const GradientQuality qd =
        gradient_quality(tight, gen, 12, 0, rng.derive(401));
    report.delta_hat = qd.delta_hat;
    report.delta_hat_rel = qd.delta_hat / std::max(qd.full_grad_norm, 1e-12);
    SinkhornConfig train = sc;
    train.tolerance = 1e-6;
    train.max_iterations = 100000;
    BarycenterProblem noisy =
        BarycenterProblem::make(measures, DiscrepancySpec::sinkhorn_div(train));
    const GradientQuality q =
        gradient_quality(noisy, gen, 12, 24, rng.derive(401));
    report.sigma2_hat = q.sigma2_hat;
    const GradientQuality q2 =
        gradient_quality(noisy, gen, 24, 24, rng.derive(401));
    report.sigma2_ratio = q2.sigma2_hat / std::max(q.sigma2_hat, 1e-300);
  }

  report.all_passed = report.mmd_max_rel <= 1e-6 &&
                      report.generator_max_rel <= 1e-5 &&
                      report.sinkhorn_max_rel <= 1e-3 &&
                      report.sigma2_ratio >= 0.3 && report.sigma2_ratio <= 0.7;
  report.report_path = cfg.out_dir + "/gradcheck_report.txt";
  std::ofstream out(report.report_path);
  std::ostringstream text;
  text << "mmd_max_rel " << report.mmd_max_rel << " (tol 1e-6)\n"
       << "generator_max_rel " << report.generator_max_rel << " (tol 1e-5)\n"
       << "sinkhorn_max_rel " << report.sinkhorn_max_rel << " (tol 1e-3)\n"
       << "delta_hat " << report.delta_hat << "\n"
       << "delta_hat_rel " << report.delta_hat_rel << "\n"
       << "sigma2_hat " << report.sigma2_hat << "\n"
       << "sigma2_ratio_batch_doubling " << report.sigma2_ratio
       << " (expected in [0.3, 0.7])\n"
       << (report.all_passed ? "ALL PASS\n" : "FAILURES PRESENT\n");
  out << text.str();
  if (!opts.quiet) std::cout << text.str();
  if (!report.all_passed) {
    report.status = RunStatus::kRunFailure;
    report.message = "gradcheck suite reported failures";
  }
  return report;
}

EvalReport run_eval(const std::string& config_path, const RunOptions& opts) {
  EvalReport report;
  try {
    ExperimentConfig cfg = ExperimentConfig::load(config_path);
    if (opts.out_override) cfg.out_dir = *opts.out_override;
    const BuiltDataset data = build_dataset(cfg.dataset);
    const DiscrepancySpec disc = build_discrepancy(cfg.discrepancy);
    std::string ckpt = cfg.checkpoint.empty()
                           ? cfg.out_dir + "/checkpoint.ckpt"
                           : cfg.checkpoint;
    if (!fs::exists(ckpt))
      throw ConfigError("[eval] checkpoint not found: " + ckpt);
    std::unique_ptr<Generator> gen = load_checkpoint(ckpt);
    const std::uint64_t seed = opts.seed_override.value_or(0);
    SeededRng rng(seed);
    const DiscreteMeasure samples =
        gen->forward(sample_count_for(*gen, cfg.eval_samples), rng).measure;

    for (std::size_t p = 0; p < data.measures.size(); ++p) {
      double term = 0.0;
      switch (disc.kind) {
        case DiscrepancySpec::Kind::kMmd2:
          term = mmd2(disc.kernel, samples, data.measures[p]);
          break;
        case DiscrepancySpec::Kind::kSinkhornDiv:
          term = sinkhorn_divergence(samples, data.measures[p], disc.sinkhorn);
          break;
        case DiscrepancySpec::Kind::kEntropicW:
          term = entropic_ot(samples, data.measures[p], disc.sinkhorn).cost;
          break;
        case DiscrepancySpec::Kind::kSmmd:
          // No trained critic at eval time; report the base-kernel MMD.
          term = mmd2(disc.smmd.base_kernel, samples, data.measures[p]);
          break;
      }
      report.per_measure.push_back(term);
      report.total += data.beta(Eigen::Index(p)) * term;
    }

    fs::create_directories(cfg.out_dir);
    report.eval_path = cfg.out_dir + "/eval.csv";
    std::ofstream out(report.eval_path);
    out << "measure,discrepancy,weight\n";
    for (std::size_t p = 0; p < report.per_measure.size(); ++p)
      out << p << "," << report.per_measure[p] << ","
          << data.beta(Eigen::Index(p)) << "\n";
    out << "total," << report.total << ",1\n";
    if (!opts.quiet)
      std::cout << "eval total barycentric loss " << report.total << "\n";
  } catch (const ConfigError& e) {
    report.status = RunStatus::kConfigError;
    report.message = e.what();
  } catch (const std::exception& e) {
    report.status = RunStatus::kRunFailure;
    report.message = e.what();
  }
  return report;
}

}  // namespace barygen
