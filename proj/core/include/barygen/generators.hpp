#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "barygen/measures.hpp"
#include "barygen/mlp.hpp"
#include "barygen/rng.hpp"

namespace barygen {

/// Forward records for one minibatch: the latent draws plus whatever the
/// variant needs for a vector-Jacobian product. backward() may consume a
/// tape exactly once.
struct Tape {
  Eigen::MatrixXd latents;       // j x latent_dim draws from rho
  std::vector<int> indices;      // component / branch / atom selector
  MlpActivations acts;           // MLP generators only
  bool consumed = false;
};

struct ForwardResult {
  DiscreteMeasure measure;
  Tape tape;
};

/// Parametric push-forward model G_theta of a latent measure rho: forward
/// sampling plus reverse-mode gradients from output atoms to parameters.
class Generator {
 public:
  virtual ~Generator() = default;

  virtual Eigen::Index dim() const = 0;
  virtual Eigen::Index param_count() const = 0;
  virtual Eigen::VectorXd params() const = 0;
  /// Rejects wrong length or non-finite entries.
  virtual void set_params(const Eigen::VectorXd& v) = 0;

  /// Draw j latents from rho. Independent of the parameters.
  virtual Tape sample_latents(Eigen::Index j, SeededRng& rng) const = 0;
  /// Push recorded latents through G_theta; uniform output weights.
  virtual DiscreteMeasure forward(Tape& tape) const = 0;
  /// Chain dL/d(output atoms) back to dL/d(parameters); consumes the tape.
  virtual Eigen::VectorXd backward(Tape& tape,
                                   const Eigen::MatrixXd& grad_out) const = 0;

  virtual std::string model_name() const = 0;
  /// Key-value descriptor lines, enough to reconstruct the model shape.
  virtual void write_descriptor(std::ostream& out) const = 0;
  virtual std::unique_ptr<Generator> clone() const = 0;

  ForwardResult forward(Eigen::Index j, SeededRng& rng) const;

 protected:
  static void check_tape(const Tape& tape, Eigen::Index rows);
};

/// G(z) = A z + m with z ~ N(0, I); covariance S = A A^T is PSD by
/// construction. Parameters are [m; vec(A)].
class AffineGaussian : public Generator {
 public:
  explicit AffineGaussian(Eigen::Index dim);  // m = 0, A = I
  AffineGaussian(Eigen::VectorXd mean, Eigen::MatrixXd root);

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& root() const { return root_; }
  Eigen::MatrixXd covariance() const { return root_ * root_.transpose(); }

  Eigen::Index dim() const override { return mean_.size(); }
  Eigen::Index param_count() const override;
  Eigen::VectorXd params() const override;
  void set_params(const Eigen::VectorXd& v) override;
  Tape sample_latents(Eigen::Index j, SeededRng& rng) const override;
  DiscreteMeasure forward(Tape& tape) const override;
  Eigen::VectorXd backward(Tape& tape,
                           const Eigen::MatrixXd& grad_out) const override;
  std::string model_name() const override { return "affine_gaussian"; }
  void write_descriptor(std::ostream& out) const override;
  std::unique_ptr<Generator> clone() const override;

  using Generator::forward;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd root_;
};

/// Mixture of affine-Gaussian components with fixed simplex weights: the
/// latent is (component ~ Categorical(weights), z ~ N(0, I)).
class GaussianMixture : public Generator {
 public:
  GaussianMixture(std::vector<AffineGaussian> components,
                  Eigen::VectorXd component_weights);

  /// Components frozen at the Gaussian moment fits of the given measures.
  static GaussianMixture from_measure_fits(
      const std::vector<DiscreteMeasure>& measures,
      const Eigen::VectorXd& weights);

  Eigen::Index components() const { return Eigen::Index(parts_.size()); }
  const AffineGaussian& component(Eigen::Index i) const { return parts_[i]; }
  const Eigen::VectorXd& component_weights() const { return weights_; }

  Eigen::Index dim() const override { return parts_.front().dim(); }
  Eigen::Index param_count() const override;
  Eigen::VectorXd params() const override;
  void set_params(const Eigen::VectorXd& v) override;
  Tape sample_latents(Eigen::Index j, SeededRng& rng) const override;
  DiscreteMeasure forward(Tape& tape) const override;
  Eigen::VectorXd backward(Tape& tape,
                           const Eigen::MatrixXd& grad_out) const override;
  std::string model_name() const override { return "gaussian_mixture"; }
  void write_descriptor(std::ostream& out) const override;
  std::unique_ptr<Generator> clone() const override;

  using Generator::forward;

 private:
  std::vector<AffineGaussian> parts_;
  Eigen::VectorXd weights_;
  Eigen::VectorXd cdf_;
};

/// ReLU MLP push-forward of z ~ N(0, I_latent).
class MlpGenerator : public Generator {
 public:
  /// sizes = {latent, hidden..., out}; fan-in-scaled uniform init.
  MlpGenerator(std::vector<int> sizes, SeededRng& init_rng);

  const MlpNet& net() const { return net_; }
  Eigen::Index latent_dim() const { return net_.input_dim(); }

  Eigen::Index dim() const override { return net_.output_dim(); }
  Eigen::Index param_count() const override { return net_.param_count(); }
  Eigen::VectorXd params() const override { return net_.params(); }
  void set_params(const Eigen::VectorXd& v) override { net_.set_params(v); }
  Tape sample_latents(Eigen::Index j, SeededRng& rng) const override;
  DiscreteMeasure forward(Tape& tape) const override;
  Eigen::VectorXd backward(Tape& tape,
                           const Eigen::MatrixXd& grad_out) const override;
  std::string model_name() const override { return "mlp"; }
  void write_descriptor(std::ostream& out) const override;
  std::unique_ptr<Generator> clone() const override;

  using Generator::forward;

 private:
  MlpNet net_;
};

/// Two concentric-free ellipses in R^2. Latent is a uniform boundary angle
/// plus a fair inner/outer choice; axes are stored as logs so they stay
/// positive. Parameters: [c1; log_axes1; c2; log_axes2].
class EllipsePair : public Generator {
 public:
  EllipsePair();  // unit circles at the origin
  /// Centers and log-axes drawn from standard Gaussians.
  static EllipsePair random_init(SeededRng& rng);

  Eigen::Vector2d center(int which) const;
  Eigen::Vector2d axes(int which) const;

  Eigen::Index dim() const override { return 2; }
  Eigen::Index param_count() const override { return 8; }
  Eigen::VectorXd params() const override { return params_; }
  void set_params(const Eigen::VectorXd& v) override;
  Tape sample_latents(Eigen::Index j, SeededRng& rng) const override;
  DiscreteMeasure forward(Tape& tape) const override;
  Eigen::VectorXd backward(Tape& tape,
                           const Eigen::MatrixXd& grad_out) const override;
  std::string model_name() const override { return "ellipse_pair"; }
  void write_descriptor(std::ostream& out) const override;
  std::unique_ptr<Generator> clone() const override;

  using Generator::forward;

 private:
  Eigen::VectorXd params_;  // c1x c1y la1 lb1 c2x c2y la2 lb2
};

/// K free atoms. In pass-through mode a forward with j == K returns the
/// stored atoms in order; otherwise atoms are drawn uniformly with
/// replacement.
class ParticleCloud : public Generator {
 public:
  ParticleCloud(Eigen::MatrixXd atoms, bool pass_through = true);

  const Eigen::MatrixXd& atoms() const { return atoms_; }
  bool pass_through() const { return pass_through_; }

  Eigen::Index dim() const override { return atoms_.cols(); }
  Eigen::Index param_count() const override { return atoms_.size(); }
  Eigen::VectorXd params() const override;
  void set_params(const Eigen::VectorXd& v) override;
  Tape sample_latents(Eigen::Index j, SeededRng& rng) const override;
  DiscreteMeasure forward(Tape& tape) const override;
  Eigen::VectorXd backward(Tape& tape,
                           const Eigen::MatrixXd& grad_out) const override;
  std::string model_name() const override { return "particle_cloud"; }
  void write_descriptor(std::ostream& out) const override;
  std::unique_ptr<Generator> clone() const override;

  using Generator::forward;

 private:
  Eigen::MatrixXd atoms_;
  bool pass_through_;
};

/// Flat-vector checkpoint with a model-descriptor header; layout documented
/// in the repository README.
void save_checkpoint(const Generator& gen, const std::string& path);
std::unique_ptr<Generator> load_checkpoint(const std::string& path);

}  // namespace barygen
