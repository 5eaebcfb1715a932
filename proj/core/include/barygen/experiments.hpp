#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "barygen/config.hpp"
#include "barygen/solver.hpp"

namespace barygen {

/// Stable CLI exit-code contract: 0 success, 2 config error, 3 run failure.
enum class RunStatus { kOk = 0, kConfigError = 2, kRunFailure = 3 };

struct RunOptions {
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> out_override;
  bool quiet = false;
};

struct BuiltDataset {
  std::vector<DiscreteMeasure> measures;
  Eigen::VectorXd beta;
};

/// Deterministic dataset construction from the dataset section; all
/// randomness comes from the dataset's own seed, independent of fit seeds.
BuiltDataset build_dataset(const DatasetSpecCfg& cfg);

std::unique_ptr<Generator> build_generator(const GeneratorSpecCfg& cfg,
                                           Eigen::Index dim,
                                           const BuiltDataset& data,
                                           SeededRng& rng);
DiscrepancySpec build_discrepancy(const DiscrepancyCfg& cfg);
OptimizerSpec build_optimizer(const OptimizerCfg& cfg);

/// Fan-in-initialized critic; when probe points are given the weights are
/// rescaled so the typical input-Jacobian norm starts near one, the scale
/// the gradient penalty anchors to.
FeatureMap build_critic(const DiscrepancyCfg& cfg, Eigen::Index dim,
                        SeededRng& rng,
                        const Eigen::MatrixXd* probe_points = nullptr);

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool failed = false;
  double final_smoothed_loss = 0.0;
  std::string trace_path, samples_path, checkpoint_path, scatter_path;
};

struct FitReport {
  RunStatus status = RunStatus::kOk;
  std::string message;
  std::vector<SeedOutcome> seeds;
};

/// Config-driven barycenter fit. Seeds run as independent parallel jobs with
/// seed-suffixed outputs; the first seed's artifacts are also copied to the
/// plain names trace.csv, samples.csv, checkpoint.ckpt, scatter.svg.
FitReport run_fit(const std::string& config_path, const RunOptions& opts = {});

struct DatagenReport {
  RunStatus status = RunStatus::kOk;
  std::string message;
  std::vector<std::string> files;
};

/// Writes the configured dataset as one CSV per measure.
DatagenReport run_datagen(const std::string& config_path,
                          const RunOptions& opts = {});

struct OracleReport {
  struct Line {
    std::string name;
    bool passed = false;
    double margin = 0.0;
    std::string detail;
  };
  RunStatus status = RunStatus::kOk;
  std::string message;
  std::string report_path;
  bool all_passed = false;
  std::vector<Line> lines;
};

/// Runs the oracle property suites (multi-marginal pushforward optimality,
/// mixture optimality, Gaussian fixed point vs 1-D closed form, Hungarian vs
/// enumeration) and writes a pass/fail report with measured margins.
OracleReport run_oracle(const std::string& config_path,
                        const RunOptions& opts = {});

struct GradcheckReport {
  RunStatus status = RunStatus::kOk;
  std::string message;
  std::string report_path;
  bool all_passed = false;
  double mmd_max_rel = 0.0;
  double generator_max_rel = 0.0;
  double sinkhorn_max_rel = 0.0;
  double delta_hat = 0.0;
  double delta_hat_rel = 0.0;
  double sigma2_hat = 0.0;
  double sigma2_ratio = 0.0;  // variance at 2J over variance at J
};

/// Finite-difference suites for every analytic gradient plus the
/// bias/variance probes of the stochastic barycentric gradient.
GradcheckReport run_gradcheck(const std::string& config_path,
                              const RunOptions& opts = {});

struct EvalReport {
  RunStatus status = RunStatus::kOk;
  std::string message;
  std::string eval_path;
  std::vector<double> per_measure;
  double total = 0.0;
};

/// Loads a checkpoint and reports the discrepancy from fresh generator
/// samples to every input measure.
EvalReport run_eval(const std::string& config_path,
                    const RunOptions& opts = {});

}  // namespace barygen
