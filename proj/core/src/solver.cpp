#include "barygen/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <stdexcept>
#include <utility>

#include "barygen/oracles.hpp"

namespace barygen {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

}  // namespace

DiscrepancySpec DiscrepancySpec::mmd(KernelSpec k) {
  DiscrepancySpec s;
  s.kind = Kind::kMmd2;
  s.kernel = std::move(k);
  return s;
}

DiscrepancySpec DiscrepancySpec::smmd_spec(SmmdConfig cfg) {
  DiscrepancySpec s;
  s.kind = Kind::kSmmd;
  s.smmd = std::move(cfg);
  return s;
}

DiscrepancySpec DiscrepancySpec::entropic(SinkhornConfig cfg) {
  DiscrepancySpec s;
  s.kind = Kind::kEntropicW;
  s.sinkhorn = cfg;
  return s;
}

DiscrepancySpec DiscrepancySpec::sinkhorn_div(SinkhornConfig cfg) {
  DiscrepancySpec s;
  s.kind = Kind::kSinkhornDiv;
  s.sinkhorn = cfg;
  return s;
}

BarycenterProblem BarycenterProblem::make(
    std::vector<DiscreteMeasure> measures, DiscrepancySpec shared,
    std::optional<Eigen::VectorXd> beta) {
  BarycenterProblem problem;
  const std::size_t p = measures.size();
  problem.measures = std::move(measures);
  problem.weights = beta.has_value()
                        ? std::move(*beta)
                        : Eigen::VectorXd::Constant(Eigen::Index(p),
                                                    1.0 / double(p));
  problem.discrepancies.assign(p, shared);
  problem.validate();
  return problem;
}

bool BarycenterProblem::has_smmd() const {
  for (const auto& d : discrepancies)
    if (d.needs_critic()) return true;
  return false;
}

void BarycenterProblem::validate() const {
  if (measures.empty())
    throw std::invalid_argument("BarycenterProblem: needs P >= 1 measures");
  if (weights.size() != Eigen::Index(measures.size()))
    throw std::invalid_argument("BarycenterProblem: weight count mismatch");
  if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-9)
    throw std::invalid_argument(
        "BarycenterProblem: weights must lie on the simplex");
  if (discrepancies.size() != measures.size())
    throw std::invalid_argument(
        "BarycenterProblem: one discrepancy per measure required");
  for (const auto& mu : measures)
    if (mu.dim() != measures.front().dim())
      throw std::invalid_argument(
          "BarycenterProblem: measures must share the ambient dimension");
}

void OptimizerSpec::validate() const {
  if (learning_rate < 0.0)
    throw std::invalid_argument("OptimizerSpec: learning rate must be >= 0");
  if (!(lr_decay > 0.0) || lr_decay > 1.0)
    throw std::invalid_argument("OptimizerSpec: decay must be in (0, 1]");
  if (batch_size < 1)
    throw std::invalid_argument("OptimizerSpec: batch size must be >= 1");
  if (iterations < 1)
    throw std::invalid_argument("OptimizerSpec: iterations must be >= 1");
}

double OptimizerSpec::lr_at(int iteration) const {
  return learning_rate * std::pow(lr_decay, double(iteration));
}

OptimizerState::OptimizerState(Eigen::Index param_count)
    : m_(Eigen::VectorXd::Zero(param_count)),
      v_(Eigen::VectorXd::Zero(param_count)) {}

void OptimizerState::apply(const OptimizerSpec& spec, double lr,
                           const Eigen::VectorXd& grad,
                           Eigen::VectorXd& params) {
  if (spec.method == OptimizerSpec::Method::kSgd) {
    params -= lr * grad;
    return;
  }
  ++step_;
  m_ = spec.beta1 * m_ + (1.0 - spec.beta1) * grad;
  v_ = spec.beta2 * v_.array().matrix() +
       (1.0 - spec.beta2) * grad.array().square().matrix();
  const double mc = 1.0 - std::pow(spec.beta1, step_);
  const double vc = 1.0 - std::pow(spec.beta2, step_);
  params.array() -= lr * (m_.array() / mc) /
                    ((v_.array() / vc).sqrt() + spec.adam_epsilon);
}

TermGradient measure_term_gradient(const BarycenterProblem& problem,
                                   std::size_t p, const Generator& gen,
                                   Eigen::Index batch,
                                   const SeededRng& term_rng,
                                   const FeatureMap* critic) {
  const DiscreteMeasure& mu = problem.measures[p];
  const DiscrepancySpec& spec = problem.discrepancies[p];

  SeededRng data_rng = term_rng.derive(0);
  SeededRng latent_rng = term_rng.derive(1);
  const DiscreteMeasure data = subsample(mu, batch, data_rng);
  Tape tape = gen.sample_latents(batch, latent_rng);
  const DiscreteMeasure fake = gen.forward(tape);

  TermGradient out;
  Eigen::MatrixXd grad_atoms;
  switch (spec.kind) {
    case DiscrepancySpec::Kind::kMmd2:
      out.loss = mmd2(spec.kernel, fake, data);
      grad_atoms = mmd2_grad_points(spec.kernel, fake, data);
      break;
    case DiscrepancySpec::Kind::kSinkhornDiv: {
      const SwValueGrad vg = sw_value_and_grad(fake, data, spec.sinkhorn);
      if (!vg.converged) return out;  // gradient refused
      out.loss = vg.value;
      grad_atoms = vg.grad;
      break;
    }
    case DiscrepancySpec::Kind::kEntropicW: {
      const EntropicValueGrad vg =
          entropic_w_value_and_grad(fake, data, spec.sinkhorn);
      if (!vg.converged) return out;
      out.loss = vg.value;
      grad_atoms = vg.grad;
      break;
    }
    case DiscrepancySpec::Kind::kSmmd: {
      if (critic == nullptr)
        throw std::invalid_argument(
            "measure_term_gradient: SMMD term requires a critic");
      out.loss = smmd_generator_loss(spec.smmd, *critic, fake, data);
      grad_atoms = smmd_generator_grad_points(spec.smmd, *critic, fake, data);
      break;
    }
  }
  out.grad = gen.backward(tape, grad_atoms);
  out.ok = out.grad.allFinite() && std::isfinite(out.loss);
  return out;
}

DirectionResult barycentric_direction(
    const BarycenterProblem& problem, const Generator& gen,
    Eigen::Index batch, int iteration, const SeededRng& root,
    const std::vector<FeatureMap>* critics) {
  const SeededRng step_rng = root.derive(std::uint64_t(iteration));
  DirectionResult out;
  out.direction = Eigen::VectorXd::Zero(gen.param_count());
  out.loss = 0.0;
  for (std::size_t p = 0; p < problem.count(); ++p) {
    const FeatureMap* critic = nullptr;
    if (problem.discrepancies[p].needs_critic()) {
      if (critics == nullptr || critics->size() <= p)
        throw std::invalid_argument(
            "barycentric_direction: SMMD terms need one critic per measure");
      critic = &(*critics)[p];
    }
    const TermGradient tg = measure_term_gradient(
        problem, p, gen, batch, step_rng.derive(std::uint64_t(p)), critic);
    if (!tg.ok) return out;  // ok stays false
    out.direction += problem.weights(Eigen::Index(p)) * tg.grad;
    out.loss += problem.weights(Eigen::Index(p)) * tg.loss;
  }
  out.ok = out.direction.allFinite() && std::isfinite(out.loss);
  return out;
}

StepRecord barycentric_step(const BarycenterProblem& problem, Generator& gen,
                            const OptimizerSpec& opt, OptimizerState& state,
                            int iteration, const SeededRng& root,
                            const std::vector<FeatureMap>* critics) {
  const auto t0 = std::chrono::steady_clock::now();
  StepRecord rec;
  rec.iteration = iteration;
  rec.lr = opt.lr_at(iteration);

  const DirectionResult dir =
      barycentric_direction(problem, gen, opt.batch_size, iteration, root,
                            critics);
  if (!dir.ok) {
    rec.aborted = true;
    rec.loss = kNan;
    rec.grad_norm2 = kNan;
  } else {
    rec.loss = dir.loss;
    rec.grad_norm2 = dir.direction.squaredNorm();
    Eigen::VectorXd params = gen.params();
    state.apply(opt, rec.lr, dir.direction, params);
    gen.set_params(params);
  }
  rec.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return rec;
}

namespace {

void append_diagnostics(Diagnostics& diag, const StepRecord& rec) {
  diag.trace.push_back(rec);
  if (rec.aborted) ++diag.aborted_steps;

  const double prev_loss =
      diag.smoothed_loss.empty() ? kNan : diag.smoothed_loss.back();
  const double prev_grad = diag.smoothed_grad_norm2.empty()
                               ? kNan
                               : diag.smoothed_grad_norm2.back();
  double loss = prev_loss, grad = prev_grad;
  if (!rec.aborted) {
    loss = std::isnan(prev_loss)
               ? rec.loss
               : Diagnostics::kEmaFactor * prev_loss +
                     (1.0 - Diagnostics::kEmaFactor) * rec.loss;
    grad = std::isnan(prev_grad)
               ? rec.grad_norm2
               : Diagnostics::kEmaFactor * prev_grad +
                     (1.0 - Diagnostics::kEmaFactor) * rec.grad_norm2;
  }
  diag.smoothed_loss.push_back(loss);
  diag.smoothed_grad_norm2.push_back(grad);
  const double prev_min = diag.running_min_grad_norm2.empty()
                              ? grad
                              : diag.running_min_grad_norm2.back();
  diag.running_min_grad_norm2.push_back(
      std::isnan(prev_min) ? grad : std::min(prev_min, grad));
}

}  // namespace

double Diagnostics::final_smoothed_loss() const {
  return smoothed_loss.empty() ? kNan : smoothed_loss.back();
}

double Diagnostics::smoothed_loss_at(int iteration) const {
  if (iteration < 0 || iteration >= int(smoothed_loss.size())) return kNan;
  return smoothed_loss[std::size_t(iteration)];
}

Diagnostics fit(const BarycenterProblem& problem, Generator& gen,
                const OptimizerSpec& opt, const SeededRng& rng) {
  problem.validate();
  opt.validate();
  if (problem.dim() != gen.dim())
    throw std::invalid_argument("fit: generator dimension mismatch");
  if (problem.has_smmd())
    throw std::invalid_argument("fit: SMMD terms require adversarial_fit");

  Diagnostics diag;
  OptimizerState state(gen.param_count());
  for (int t = 0; t < opt.iterations; ++t)
    append_diagnostics(diag,
                       barycentric_step(problem, gen, opt, state, t, rng));
  diag.failed = diag.aborted_steps * 2 > opt.iterations;
  return diag;
}

Diagnostics adversarial_fit(const BarycenterProblem& problem, Generator& gen,
                            std::vector<FeatureMap>& critics,
                            const OptimizerSpec& opt, const SeededRng& rng) {
  problem.validate();
  opt.validate();
  if (critics.size() != problem.count())
    throw std::invalid_argument(
        "adversarial_fit: one critic per measure required");

  // Critic ascent uses its own Adam accumulators per measure.
  std::vector<OptimizerState> critic_states;
  std::vector<OptimizerSpec> critic_opts;
  for (std::size_t p = 0; p < critics.size(); ++p) {
    critic_states.emplace_back(critics[p].param_count());
    OptimizerSpec cs;
    cs.method = OptimizerSpec::Method::kAdam;
    cs.learning_rate = problem.discrepancies[p].smmd.critic_lr;
    cs.batch_size = opt.batch_size;
    cs.iterations = 1;
    critic_opts.push_back(cs);
  }

  Diagnostics diag;
  OptimizerState gen_state(gen.param_count());
  for (int t = 0; t < opt.iterations; ++t) {
    const SeededRng step_rng = rng.derive(std::uint64_t(t));
    for (std::size_t p = 0; p < problem.count(); ++p) {
      const DiscrepancySpec& spec = problem.discrepancies[p];
      if (!spec.needs_critic()) continue;
      const SeededRng critic_rng = step_rng.derive(1000 + p);
      for (int c = 0; c < spec.smmd.critic_steps; ++c) {
        SeededRng draw = critic_rng.derive(std::uint64_t(c));
        SeededRng data_rng = draw.derive(0);
        SeededRng latent_rng = draw.derive(1);
        const DiscreteMeasure data =
            subsample(problem.measures[p], opt.batch_size, data_rng);
        Tape tape = gen.sample_latents(opt.batch_size, latent_rng);
        const DiscreteMeasure fake = gen.forward(tape);
        const Eigen::VectorXd ascent =
            smmd_critic_grad(spec.smmd, critics[p], fake, data);
        if (!ascent.allFinite()) {
          diag.failed = true;  // critic divergence fails the run
          return diag;
        }
        Eigen::VectorXd params = critics[p].params();
        critic_states[p].apply(critic_opts[p], critic_opts[p].learning_rate,
                               -ascent, params);
        critics[p].set_params(params);
      }
    }
    append_diagnostics(
        diag, barycentric_step(problem, gen, opt, gen_state, t, rng, &critics));
  }
  diag.failed = diag.failed || diag.aborted_steps * 2 > opt.iterations;
  return diag;
}

namespace {

// Full-batch loss and envelope gradient at frozen per-measure latents.
double full_batch_loss(const BarycenterProblem& problem, const Generator& gen,
                       const std::vector<Tape>& tapes) {
  double loss = 0.0;
  for (std::size_t p = 0; p < problem.count(); ++p) {
    Tape tape = tapes[p];  // fresh copy; forward fills activations
    const DiscreteMeasure fake = gen.forward(tape);
    const DiscrepancySpec& spec = problem.discrepancies[p];
    double term = 0.0;
    switch (spec.kind) {
      case DiscrepancySpec::Kind::kMmd2:
        term = mmd2(spec.kernel, fake, problem.measures[p]);
        break;
      case DiscrepancySpec::Kind::kSinkhornDiv:
        term = sinkhorn_divergence(fake, problem.measures[p], spec.sinkhorn);
        break;
      case DiscrepancySpec::Kind::kEntropicW:
        term = entropic_ot(fake, problem.measures[p], spec.sinkhorn).cost;
        break;
      case DiscrepancySpec::Kind::kSmmd:
        throw std::invalid_argument(
            "gradient_quality: SMMD terms are not supported");
    }
    loss += problem.weights(Eigen::Index(p)) * term;
  }
  return loss;
}

Eigen::VectorXd full_batch_grad(const BarycenterProblem& problem,
                                const Generator& gen,
                                const std::vector<Tape>& tapes) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(gen.param_count());
  for (std::size_t p = 0; p < problem.count(); ++p) {
    Tape tape = tapes[p];
    const DiscreteMeasure fake = gen.forward(tape);
    const DiscrepancySpec& spec = problem.discrepancies[p];
    Eigen::MatrixXd grad_atoms;
    switch (spec.kind) {
      case DiscrepancySpec::Kind::kMmd2:
        grad_atoms = mmd2_grad_points(spec.kernel, fake, problem.measures[p]);
        break;
      case DiscrepancySpec::Kind::kSinkhornDiv:
        grad_atoms = sw_grad_points(fake, problem.measures[p], spec.sinkhorn);
        break;
      case DiscrepancySpec::Kind::kEntropicW:
        grad_atoms =
            entropic_w_grad_points(fake, problem.measures[p], spec.sinkhorn);
        break;
      case DiscrepancySpec::Kind::kSmmd:
        throw std::invalid_argument(
            "gradient_quality: SMMD terms are not supported");
    }
    grad += problem.weights(Eigen::Index(p)) * gen.backward(tape, grad_atoms);
  }
  return grad;
}

}  // namespace

GradientQuality gradient_quality(const BarycenterProblem& problem,
                                 const Generator& gen, Eigen::Index batch,
                                 int probes, const SeededRng& rng,
                                 double fd_step) {
  problem.validate();
  std::vector<Tape> tapes;
  for (std::size_t p = 0; p < problem.count(); ++p) {
    SeededRng latent_rng = rng.derive(500 + p);
    tapes.push_back(gen.sample_latents(problem.measures[p].size(), latent_rng));
  }

  const Eigen::VectorXd g_full = full_batch_grad(problem, gen, tapes);

  // Finite differences of the full-batch loss at the same frozen latents.
  std::unique_ptr<Generator> probe_gen = gen.clone();
  const auto loss_at = [&](const Eigen::VectorXd& v) {
    probe_gen->set_params(v);
    return full_batch_loss(problem, *probe_gen, tapes);
  };
  const Eigen::VectorXd g_fd =
      finite_difference_grad(loss_at, gen.params(), fd_step);

  GradientQuality q;
  q.delta_hat = (g_full - g_fd).norm();
  q.full_grad_norm = g_full.norm();

  double acc = 0.0;
  for (int i = 0; i < probes; ++i) {
    const SeededRng probe_rng = rng.derive(9000 + std::uint64_t(i));
    Eigen::VectorXd g_tilde = Eigen::VectorXd::Zero(gen.param_count());
    for (std::size_t p = 0; p < problem.count(); ++p) {
      const TermGradient tg = measure_term_gradient(
          problem, p, gen, batch, probe_rng.derive(std::uint64_t(p)), nullptr);
      if (!tg.ok)
        throw std::runtime_error("gradient_quality: minibatch gradient failed");
      g_tilde += problem.weights(Eigen::Index(p)) * tg.grad;
    }
    acc += (g_tilde - g_full).squaredNorm();
  }
  q.sigma2_hat = probes > 0 ? acc / double(probes) : 0.0;
  return q;
}

Theorem1Report theorem1_diagnostic(const BarycenterProblem& problem,
                                   Generator& gen, Eigen::Index batch,
                                   int iterations, int probes,
                                   const SeededRng& rng) {
  Theorem1Report report;
  report.quality = gradient_quality(problem, gen, batch, probes, rng);

  std::vector<Tape> tapes;
  for (std::size_t p = 0; p < problem.count(); ++p) {
    SeededRng latent_rng = rng.derive(500 + p);
    tapes.push_back(gen.sample_latents(problem.measures[p].size(), latent_rng));
  }
  report.initial_loss = full_batch_loss(problem, gen, tapes);
  const Eigen::VectorXd g0 = full_batch_grad(problem, gen, tapes);

  // Curvature proxy: the largest gradient-difference ratio over random
  // perturbations at a few scales.
  double m_hat = 0.0;
  std::unique_ptr<Generator> probe_gen = gen.clone();
  const Eigen::VectorXd theta0 = gen.params();
  SeededRng probe_rng = rng.derive(777);
  const double scales[] = {1e-2, 5e-2, 1e-1};
  for (double scale : scales) {
    for (int i = 0; i < std::max(1, probes / 2); ++i) {
      Eigen::VectorXd u(theta0.size());
      for (Eigen::Index k = 0; k < u.size(); ++k) u(k) = probe_rng.normal();
      u *= scale / u.norm();
      probe_gen->set_params(theta0 + u);
      const Eigen::VectorXd g1 = full_batch_grad(problem, *probe_gen, tapes);
      m_hat = std::max(m_hat, (g1 - g0).norm() / u.norm());
    }
  }
  report.m_hat = m_hat;

  // Theorem prescription with the initial loss as a regret upper bound (all
  // supported discrepancies are nonnegative, so inf L >= 0).
  const double sigma2 = std::max(report.quality.sigma2_hat, 1e-300);
  report.gamma = std::sqrt(2.0 * std::max(report.initial_loss, 0.0) /
                           (std::max(m_hat, 1e-300) * sigma2));

  OptimizerSpec opt;
  opt.method = OptimizerSpec::Method::kSgd;
  opt.learning_rate = report.gamma;
  opt.lr_decay = 1.0;
  opt.batch_size = batch;
  opt.iterations = iterations;
  report.diagnostics = fit(problem, gen, opt, rng.derive(31337));

  double min_smoothed = std::numeric_limits<double>::infinity();
  for (double v : report.diagnostics.smoothed_loss)
    min_smoothed = std::min(min_smoothed, v);
  report.regret_hat =
      std::max(report.diagnostics.smoothed_loss.front() - min_smoothed, 0.0);
  report.threshold =
      std::sqrt(8.0 * report.regret_hat * m_hat * sigma2 / double(iterations)) +
      report.quality.delta_hat * report.quality.delta_hat;
  report.first_running_min = report.diagnostics.running_min_grad_norm2.front();
  report.final_running_min = report.diagnostics.running_min_grad_norm2.back();
  report.running_min_decreasing =
      report.final_running_min < report.first_running_min;
  report.within_bound = report.final_running_min <= 10.0 * report.threshold;
  return report;
}

void write_trace_csv(const Diagnostics& diag, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trace_csv: cannot open " + path);
  out << "iteration,loss,grad_norm2,lr,wall_ms\n";
  char buf[128];
  for (const auto& rec : diag.trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.3f\n",
                  rec.iteration, rec.loss, rec.grad_norm2, rec.lr,
                  rec.wall_ms);
    out << buf;
  }
}

}  // namespace barygen
