// Command-line experiment harness: datagen, fit, oracle, gradcheck, eval.
// Exit codes: 0 success, 2 config error, 3 run failure.

#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>

#include "barygen/experiments.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "Experiment config file")
      ->required();
  cmd->add_option("--seed", args.seed, "Override the config's seed list");
  cmd->add_option("--out", args.out, "Override the output directory");
  cmd->add_flag("--quiet", args.quiet, "Suppress progress output");
}

barygen::RunOptions to_options(const CommonArgs& args) {
  barygen::RunOptions opts;
  opts.seed_override = args.seed;
  opts.out_override = args.out;
  opts.quiet = args.quiet;
  return opts;
}

int finish(barygen::RunStatus status, const std::string& message) {
  if (status != barygen::RunStatus::kOk && !message.empty())
    std::cerr << "error: " << message << "\n";
  return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Barycenters of empirical measures via generative models"};
  app.require_subcommand(1);

  CommonArgs datagen_args, fit_args, oracle_args, gradcheck_args, eval_args;
  CLI::App* datagen = app.add_subcommand(
      "datagen", "Write the configured dataset as CSV point clouds");
  add_common(datagen, datagen_args);
  CLI::App* fit = app.add_subcommand(
      "fit", "Fit the barycenter generator and write run artifacts");
  add_common(fit, fit_args);
  CLI::App* oracle = app.add_subcommand(
      "oracle", "Run the ground-truth oracle property suites");
  add_common(oracle, oracle_args);
  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "Run finite-difference and gradient-noise checks");
  add_common(gradcheck, gradcheck_args);
  CLI::App* eval = app.add_subcommand(
      "eval", "Evaluate a checkpoint against the configured measures");
  add_common(eval, eval_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // malformed invocation is a config error
  }

  try {
    if (datagen->parsed()) {
      const auto report =
          barygen::run_datagen(datagen_args.config, to_options(datagen_args));
      return finish(report.status, report.message);
    }
    if (fit->parsed()) {
      const auto report =
          barygen::run_fit(fit_args.config, to_options(fit_args));
      return finish(report.status, report.message);
    }
    if (oracle->parsed()) {
      const auto report =
          barygen::run_oracle(oracle_args.config, to_options(oracle_args));
      return finish(report.status, report.message);
    }
    if (gradcheck->parsed()) {
      const auto report = barygen::run_gradcheck(gradcheck_args.config,
                                                 to_options(gradcheck_args));
      return finish(report.status, report.message);
    }
    if (eval->parsed()) {
      const auto report =
          barygen::run_eval(eval_args.config, to_options(eval_args));
      return finish(report.status, report.message);
    }
  } catch (const barygen::ConfigError& e) {
    return finish(barygen::RunStatus::kConfigError, e.what());
  } catch (const std::exception& e) {
    return finish(barygen::RunStatus::kRunFailure, e.what());
  }
  return 0;
}
