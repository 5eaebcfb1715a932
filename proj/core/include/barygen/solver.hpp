#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "barygen/entropic_ot.hpp"
#include "barygen/generators.hpp"
#include "barygen/kernels.hpp"
#include "barygen/measures.hpp"

namespace barygen {

/// Which discrepancy compares the generator to one input measure.
struct DiscrepancySpec {
  enum class Kind { kMmd2, kSmmd, kEntropicW, kSinkhornDiv };

  Kind kind = Kind::kMmd2;
  KernelSpec kernel = KernelSpec::rational_quadratic(1.0, 2.0);
  SmmdConfig smmd;
  SinkhornConfig sinkhorn;

  static DiscrepancySpec mmd(KernelSpec k);
  static DiscrepancySpec smmd_spec(SmmdConfig cfg);
  static DiscrepancySpec entropic(SinkhornConfig cfg);
  static DiscrepancySpec sinkhorn_div(SinkhornConfig cfg);
  bool needs_critic() const { return kind == Kind::kSmmd; }
};

/// Input measures, simplex weights beta, and one discrepancy per measure.
struct BarycenterProblem {
  std::vector<DiscreteMeasure> measures;
  Eigen::VectorXd weights;
  std::vector<DiscrepancySpec> discrepancies;

  /// Convenience: one shared discrepancy, given (or uniform) weights.
  static BarycenterProblem make(std::vector<DiscreteMeasure> measures,
                                DiscrepancySpec shared,
                                std::optional<Eigen::VectorXd> beta = {});

  std::size_t count() const { return measures.size(); }
  Eigen::Index dim() const { return measures.front().dim(); }
  bool has_smmd() const;
  void validate() const;
};

struct OptimizerSpec {
  enum class Method { kSgd, kAdam };

  Method method = Method::kAdam;
  double learning_rate = 1e-2;
  double beta1 = 0.5;   // Adam
  double beta2 = 0.99;  // Adam
  double adam_epsilon = 1e-8;
  double lr_decay = 1.0;  // per-iteration exponential decay, in (0, 1]
  Eigen::Index batch_size = 150;
  int iterations = 1000;

  void validate() const;
  double lr_at(int iteration) const;
};

/// First/second-moment accumulators for one parameter vector.
class OptimizerState {
 public:
  explicit OptimizerState(Eigen::Index param_count);
  /// One descent update of params in place.
  void apply(const OptimizerSpec& spec, double lr, const Eigen::VectorXd& grad,
             Eigen::VectorXd& params);

 private:
  Eigen::VectorXd m_, v_;
  int step_ = 0;
};

struct StepRecord {
  int iteration = 0;
  double loss = 0.0;
  double grad_norm2 = 0.0;
  double lr = 0.0;
  double wall_ms = 0.0;
  bool aborted = false;
};

/// Per-run traces. Smoothing is an exponential moving average with factor
/// kEmaFactor; the running minimum tracks the smoothed squared gradient
/// norm and is non-increasing by construction.
struct Diagnostics {
  static constexpr double kEmaFactor = 0.95;

  std::vector<StepRecord> trace;
  std::vector<double> smoothed_loss;
  std::vector<double> smoothed_grad_norm2;
  std::vector<double> running_min_grad_norm2;
  int aborted_steps = 0;
  bool failed = false;

  double final_smoothed_loss() const;
  double smoothed_loss_at(int iteration) const;
};

/// Stochastic gradient of one term: dD_p/dtheta on fresh minibatches drawn
/// from the stream term_rng (substream 0 subsamples the data, substream 1
/// draws the latents).
struct TermGradient {
  Eigen::VectorXd grad;
  double loss = 0.0;
  bool ok = false;
};
TermGradient measure_term_gradient(const BarycenterProblem& problem,
                                   std::size_t p, const Generator& gen,
                                   Eigen::Index batch,
                                   const SeededRng& term_rng,
                                   const FeatureMap* critic = nullptr);

/// The assembled stochastic barycentric direction sum_p beta_p g_p(theta) at
/// the given iteration; term p uses stream root.derive(iteration).derive(p).
struct DirectionResult {
  Eigen::VectorXd direction;
  double loss = 0.0;
  bool ok = false;
};
DirectionResult barycentric_direction(
    const BarycenterProblem& problem, const Generator& gen,
    Eigen::Index batch, int iteration, const SeededRng& root,
    const std::vector<FeatureMap>* critics = nullptr);

/// One minibatch update of the generator. Non-finite or refused gradients
/// abort the step (no parameter change) and flag the record.
StepRecord barycentric_step(const BarycenterProblem& problem, Generator& gen,
                            const OptimizerSpec& opt, OptimizerState& state,
                            int iteration, const SeededRng& root,
                            const std::vector<FeatureMap>* critics = nullptr);

/// Runs opt.iterations steps with learning-rate decay. The run is declared
/// failed (diagnostics.failed) if more than half the steps aborted.
Diagnostics fit(const BarycenterProblem& problem, Generator& gen,
                const OptimizerSpec& opt, const SeededRng& rng);

/// Alternating SMMD training: for every SMMD term, critic_steps ascent
/// updates on that measure's critic, then one generator descent step on the
/// weighted feature-space MMD^2 objectives. Critic divergence (non-finite
/// critic gradient) fails the run immediately.
Diagnostics adversarial_fit(const BarycenterProblem& problem, Generator& gen,
                            std::vector<FeatureMap>& critics,
                            const OptimizerSpec& opt, const SeededRng& rng);

/// Gradient bias and minibatch-noise estimates on a full-batch-computable
/// instance: delta_hat compares the assembled envelope gradient against
/// central finite differences of the full-batch loss at frozen latents;
/// sigma2_hat is the mean squared deviation of minibatch gradients from the
/// full-batch gradient over `probes` draws.
struct GradientQuality {
  double delta_hat = 0.0;
  double sigma2_hat = 0.0;
  double full_grad_norm = 0.0;
};
GradientQuality gradient_quality(const BarycenterProblem& problem,
                                 const Generator& gen, Eigen::Index batch,
                                 int probes, const SeededRng& rng,
                                 double fd_step = 1e-5);

/// Fixed-learning-rate SGD run instrumented for the local-convergence bound:
/// gamma = sqrt(2 L0 / (m_hat sigma2_hat)) with measured surrogates, and the
/// reported threshold is sqrt(8 regret m_hat sigma2 / T) + delta^2.
struct Theorem1Report {
  GradientQuality quality;
  double m_hat = 0.0;       // max gradient-difference ratio over probes
  double initial_loss = 0.0;
  double regret_hat = 0.0;  // observed initial regret of the smoothed loss
  double gamma = 0.0;
  double threshold = 0.0;
  double first_running_min = 0.0;
  double final_running_min = 0.0;
  bool running_min_decreasing = false;
  bool within_bound = false;  // final running min <= 10 x threshold
  Diagnostics diagnostics;
};
Theorem1Report theorem1_diagnostic(const BarycenterProblem& problem,
                                   Generator& gen, Eigen::Index batch,
                                   int iterations, int probes,
                                   const SeededRng& rng);

/// Per-iteration trace with the stable schema
/// iteration,loss,grad_norm2,lr,wall_ms.
void write_trace_csv(const Diagnostics& diag, const std::string& path);

}  // namespace barygen
