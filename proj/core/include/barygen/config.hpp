#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace barygen {

/// Raised for malformed config files or invalid field values; the CLI maps
/// it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat INI-style key-value file: `[section]` headers, `key = value` lines,
/// `#` or `;` comments. Values may be space-separated lists.
class KeyValueFile {
 public:
  static KeyValueFile parse_file(const std::string& path);
  static KeyValueFile parse_string(const std::string& text,
                                   const std::string& origin = "<string>");

  bool has(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  std::string require_string(const std::string& section,
                             const std::string& key) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;
  int get_int(const std::string& section, const std::string& key,
              int fallback) const;
  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const;
  std::vector<double> get_doubles(const std::string& section,
                                  const std::string& key) const;
  std::vector<int> get_ints(const std::string& section,
                            const std::string& key) const;
  std::vector<std::string> get_strings(const std::string& section,
                                       const std::string& key) const;

  const std::string& origin() const { return origin_; }

 private:
  [[noreturn]] void fail(const std::string& section, const std::string& key,
                         const std::string& what) const;
  std::string origin_;
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

struct DatasetSpecCfg {
  std::string kind = "gaussians";  // gaussians|four_gaussians|ellipses|blobs|csv
  int count = 5;                   // number of measures P
  int atoms = 256;                 // atoms per measure
  int dim = 2;
  double mean_range = 1.0;   // gaussians: means ~ U[-range, range]^d
  double cov_scale = 0.3;    // gaussians: covariance magnitude
  double side = 2.0;         // four_gaussians: square side
  double sigma = 0.15;       // four_gaussians / blobs: component std
  double separation = 1.0;   // blobs: center offset
  std::uint64_t data_seed = 1234;  // dataset stream, independent of fit seeds
  std::vector<std::string> files;  // csv: one path per measure
  std::vector<double> beta;        // empty = uniform
};

struct GeneratorSpecCfg {
  std::string kind = "affine_gaussian";
  int latent_dim = 2;                       // mlp
  std::vector<int> hidden = {50, 200, 1000, 200};  // mlp
  int components = 0;   // gaussian_mixture; 0 = one per measure
  int atoms = 8;        // particle_cloud
  bool pass_through = true;
  std::string init = "default";  // mixture: default|data_fits|data_atoms
  double init_scale = 1.0;
};

struct DiscrepancyCfg {
  std::string kind = "sinkhorn_divergence";
  // kernel (mmd2)
  std::string kernel = "rq";  // rq|rbf
  double lengthscale = 2.0;
  double alpha = 1.0;
  // sinkhorn
  double epsilon = 0.1;
  int cost_exponent = 2;
  double tolerance = 1e-9;
  int max_iterations = 10000;
  double anneal = 0.9;
  // smmd
  double gradient_penalty = 1.0;
  int critic_steps = 5;
  double critic_lr = 1e-3;
  std::vector<int> critic_hidden = {32, 32};
  int feature_dim = 2;
};

struct OptimizerCfg {
  std::string kind = "adam";
  double lr = 1e-2;
  double beta1 = 0.5;
  double beta2 = 0.99;
  double decay = 1.0;
  int batch = 150;
  int iters = 1000;
};

/// One experiment: dataset, generator, discrepancy, optimizer, seeds.
struct ExperimentConfig {
  std::string name = "experiment";
  std::vector<std::uint64_t> seeds = {0};
  std::string out_dir = "out";
  DatasetSpecCfg dataset;
  GeneratorSpecCfg generator;
  DiscrepancyCfg discrepancy;
  OptimizerCfg optimizer;
  int eval_samples = 10000;
  std::string checkpoint;  // eval subcommand: explicit checkpoint path

  static ExperimentConfig load(const std::string& path);
  static ExperimentConfig from_file(const KeyValueFile& kv);
};

}  // namespace barygen
