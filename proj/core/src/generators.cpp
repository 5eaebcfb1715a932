#include "barygen/generators.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace barygen {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void check_param_vector(const Eigen::VectorXd& v, Eigen::Index expected,
                        const char* who) {
  if (v.size() != expected)
    throw std::invalid_argument(std::string(who) +
                                "::set_params: length mismatch");
  if (!v.allFinite())
    throw std::invalid_argument(std::string(who) +
                                "::set_params: non-finite parameter");
}

}  // namespace

ForwardResult Generator::forward(Eigen::Index j, SeededRng& rng) const {
  Tape tape = sample_latents(j, rng);
  DiscreteMeasure measure = forward(tape);
  return {std::move(measure), std::move(tape)};
}

void Generator::check_tape(const Tape& tape, Eigen::Index rows) {
  if (tape.consumed)
    throw std::logic_error("Generator::backward: tape already consumed");
  if (rows != tape.latents.rows())
    throw std::invalid_argument(
        "Generator::backward: grad_out shape does not match the tape");
}

// ---------------------------------------------------------------------------
// AffineGaussian

AffineGaussian::AffineGaussian(Eigen::Index dim)
    : mean_(Eigen::VectorXd::Zero(dim)),
      root_(Eigen::MatrixXd::Identity(dim, dim)) {
  require(dim >= 1, "AffineGaussian: dimension must be >= 1");
}

AffineGaussian::AffineGaussian(Eigen::VectorXd mean, Eigen::MatrixXd root)
    : mean_(std::move(mean)), root_(std::move(root)) {
  require(mean_.size() >= 1 && root_.rows() == mean_.size() &&
              root_.cols() == mean_.size(),
          "AffineGaussian: root factor must be d x d");
  require(mean_.allFinite() && root_.allFinite(),
          "AffineGaussian: non-finite parameter");
}

Eigen::Index AffineGaussian::param_count() const {
  const Eigen::Index d = dim();
  return d + d * d;
}

Eigen::VectorXd AffineGaussian::params() const {
  const Eigen::Index d = dim();
  Eigen::VectorXd v(param_count());
  v.head(d) = mean_;
  v.tail(d * d) = Eigen::Map<const Eigen::VectorXd>(root_.data(), d * d);
  return v;
}

void AffineGaussian::set_params(const Eigen::VectorXd& v) {
  check_param_vector(v, param_count(), "AffineGaussian");
  const Eigen::Index d = dim();
  mean_ = v.head(d);
  root_ = Eigen::Map<const Eigen::MatrixXd>(v.data() + d, d, d);
}

Tape AffineGaussian::sample_latents(Eigen::Index j, SeededRng& rng) const {
  require(j >= 1, "forward: batch size must be >= 1");
  Tape tape;
  tape.latents.resize(j, dim());
  for (Eigen::Index i = 0; i < j; ++i)
    for (Eigen::Index k = 0; k < dim(); ++k) tape.latents(i, k) = rng.normal();
  return tape;
}

DiscreteMeasure AffineGaussian::forward(Tape& tape) const {
  Eigen::MatrixXd pts = tape.latents * root_.transpose();
  pts.rowwise() += mean_.transpose();
  return DiscreteMeasure::uniform(std::move(pts));
}

Eigen::VectorXd AffineGaussian::backward(Tape& tape,
                                         const Eigen::MatrixXd& grad_out) const {
  check_tape(tape, grad_out.rows());
  tape.consumed = true;
  const Eigen::Index d = dim();
  Eigen::VectorXd grad(param_count());
  grad.head(d) = grad_out.colwise().sum().transpose();
  // dL/dA = sum_n g_n z_n^T
  const Eigen::MatrixXd ga = grad_out.transpose() * tape.latents;
  grad.tail(d * d) = Eigen::Map<const Eigen::VectorXd>(ga.data(), d * d);
  return grad;
}

void AffineGaussian::write_descriptor(std::ostream& out) const {
  out << "dim " << dim() << "\n";
}

std::unique_ptr<Generator> AffineGaussian::clone() const {
  return std::make_unique<AffineGaussian>(*this);
}

// ---------------------------------------------------------------------------
// GaussianMixture

GaussianMixture::GaussianMixture(std::vector<AffineGaussian> components,
                                 Eigen::VectorXd component_weights)
    : parts_(std::move(components)), weights_(std::move(component_weights)) {
  require(!parts_.empty(), "GaussianMixture: needs at least one component");
  require(weights_.size() == Eigen::Index(parts_.size()),
          "GaussianMixture: weight count must match component count");
  require((weights_.array() >= 0.0).all() &&
              std::abs(weights_.sum() - 1.0) <= 1e-9,
          "GaussianMixture: weights must lie on the simplex");
  for (const auto& p : parts_)
    require(p.dim() == parts_.front().dim(),
            "GaussianMixture: components must share a dimension");
  cdf_.resize(weights_.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < weights_.size(); ++i) {
    acc += weights_(i);
    cdf_(i) = acc;
  }
  cdf_(weights_.size() - 1) = 1.0;
}

GaussianMixture GaussianMixture::from_measure_fits(
    const std::vector<DiscreteMeasure>& measures,
    const Eigen::VectorXd& weights) {
  std::vector<AffineGaussian> parts;
  parts.reserve(measures.size());
  for (const auto& mu : measures) {
    GaussianSpec spec = fit_gaussian(mu);
    parts.emplace_back(spec.mean, spec.sqrt_covariance());
  }
  return GaussianMixture(std::move(parts), weights);
}

Eigen::Index GaussianMixture::param_count() const {
  return Eigen::Index(parts_.size()) * parts_.front().param_count();
}

Eigen::VectorXd GaussianMixture::params() const {
  Eigen::VectorXd v(param_count());
  Eigen::Index off = 0;
  for (const auto& p : parts_) {
    v.segment(off, p.param_count()) = p.params();
    off += p.param_count();
  }
  return v;
}

void GaussianMixture::set_params(const Eigen::VectorXd& v) {
  check_param_vector(v, param_count(), "GaussianMixture");
  Eigen::Index off = 0;
  for (auto& p : parts_) {
    p.set_params(v.segment(off, p.param_count()));
    off += p.param_count();
  }
}

Tape GaussianMixture::sample_latents(Eigen::Index j, SeededRng& rng) const {
  require(j >= 1, "forward: batch size must be >= 1");
  Tape tape;
  tape.latents.resize(j, dim());
  tape.indices.resize(j);
  for (Eigen::Index i = 0; i < j; ++i) {
    const double u = rng.uniform();
    Eigen::Index c = 0;
    while (c + 1 < cdf_.size() && u >= cdf_(c)) ++c;
    tape.indices[std::size_t(i)] = int(c);
    for (Eigen::Index k = 0; k < dim(); ++k) tape.latents(i, k) = rng.normal();
  }
  return tape;
}

DiscreteMeasure GaussianMixture::forward(Tape& tape) const {
  const Eigen::Index j = tape.latents.rows();
  Eigen::MatrixXd pts(j, dim());
  for (Eigen::Index i = 0; i < j; ++i) {
    const auto& p = parts_[std::size_t(tape.indices[std::size_t(i)])];
    pts.row(i) = (p.root() * tape.latents.row(i).transpose() + p.mean())
                     .transpose();
  }
  return DiscreteMeasure::uniform(std::move(pts));
}

Eigen::VectorXd GaussianMixture::backward(Tape& tape,
                                          const Eigen::MatrixXd& grad_out) const {
  check_tape(tape, grad_out.rows());
  tape.consumed = true;
  const Eigen::Index d = dim();
  const Eigen::Index per = d + d * d;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(param_count());
  for (Eigen::Index i = 0; i < grad_out.rows(); ++i) {
    const Eigen::Index c = tape.indices[std::size_t(i)];
    const Eigen::Index off = c * per;
    grad.segment(off, d) += grad_out.row(i).transpose();
    // dL/dA_c accumulates g_i z_i^T, column-major flattening.
    Eigen::Map<Eigen::MatrixXd>(grad.data() + off + d, d, d).noalias() +=
        grad_out.row(i).transpose() * tape.latents.row(i);
  }
  return grad;
}

void GaussianMixture::write_descriptor(std::ostream& out) const {
  out << "dim " << dim() << "\n";
  out << "components " << parts_.size() << "\n";
  out << "weights";
  char buf[32];
  for (Eigen::Index i = 0; i < weights_.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", weights_(i));
    out << " " << buf;
  }
  out << "\n";
}

std::unique_ptr<Generator> GaussianMixture::clone() const {
  return std::make_unique<GaussianMixture>(*this);
}

// ---------------------------------------------------------------------------
// MlpGenerator

MlpGenerator::MlpGenerator(std::vector<int> sizes, SeededRng& init_rng)
    : net_(MlpNet::fan_in_init(std::move(sizes), init_rng)) {}

Tape MlpGenerator::sample_latents(Eigen::Index j, SeededRng& rng) const {
  require(j >= 1, "forward: batch size must be >= 1");
  Tape tape;
  tape.latents.resize(j, latent_dim());
  for (Eigen::Index i = 0; i < j; ++i)
    for (Eigen::Index k = 0; k < latent_dim(); ++k)
      tape.latents(i, k) = rng.normal();
  return tape;
}

DiscreteMeasure MlpGenerator::forward(Tape& tape) const {
  Eigen::MatrixXd pts = net_.forward(tape.latents, tape.acts);
  return DiscreteMeasure::uniform(std::move(pts));
}

Eigen::VectorXd MlpGenerator::backward(Tape& tape,
                                       const Eigen::MatrixXd& grad_out) const {
  check_tape(tape, grad_out.rows());
  if (tape.acts.preacts.empty())
    throw std::logic_error("MlpGenerator::backward: tape lacks activations");
  tape.consumed = true;
  return net_.vjp_params(tape.acts, grad_out);
}

void MlpGenerator::write_descriptor(std::ostream& out) const {
  out << "layers";
  for (int s : net_.sizes()) out << " " << s;
  out << "\n";
}

std::unique_ptr<Generator> MlpGenerator::clone() const {
  return std::make_unique<MlpGenerator>(*this);
}

// ---------------------------------------------------------------------------
// EllipsePair

EllipsePair::EllipsePair() : params_(Eigen::VectorXd::Zero(8)) {}

EllipsePair EllipsePair::random_init(SeededRng& rng) {
  EllipsePair e;
  for (Eigen::Index i = 0; i < 8; ++i) e.params_(i) = rng.normal();
  return e;
}

Eigen::Vector2d EllipsePair::center(int which) const {
  const Eigen::Index off = which == 0 ? 0 : 4;
  return {params_(off), params_(off + 1)};
}

Eigen::Vector2d EllipsePair::axes(int which) const {
  const Eigen::Index off = which == 0 ? 2 : 6;
  return {std::exp(params_(off)), std::exp(params_(off + 1))};
}

void EllipsePair::set_params(const Eigen::VectorXd& v) {
  check_param_vector(v, 8, "EllipsePair");
  params_ = v;
}

Tape EllipsePair::sample_latents(Eigen::Index j, SeededRng& rng) const {
  require(j >= 1, "forward: batch size must be >= 1");
  Tape tape;
  tape.latents.resize(j, 1);
  tape.indices.resize(j);
  for (Eigen::Index i = 0; i < j; ++i) {
    tape.indices[std::size_t(i)] = rng.uniform() < 0.5 ? 0 : 1;
    tape.latents(i, 0) = 2.0 * std::numbers::pi * rng.uniform();
  }
  return tape;
}

DiscreteMeasure EllipsePair::forward(Tape& tape) const {
  const Eigen::Index j = tape.latents.rows();
  Eigen::MatrixXd pts(j, 2);
  for (Eigen::Index i = 0; i < j; ++i) {
    const int which = tape.indices[std::size_t(i)];
    const Eigen::Vector2d c = center(which);
    const Eigen::Vector2d ab = axes(which);
    const double theta = tape.latents(i, 0);
    pts(i, 0) = c.x() + ab.x() * std::cos(theta);
    pts(i, 1) = c.y() + ab.y() * std::sin(theta);
  }
  return DiscreteMeasure::uniform(std::move(pts));
}

Eigen::VectorXd EllipsePair::backward(Tape& tape,
                                      const Eigen::MatrixXd& grad_out) const {
  check_tape(tape, grad_out.rows());
  tape.consumed = true;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(8);
  for (Eigen::Index i = 0; i < grad_out.rows(); ++i) {
    const int which = tape.indices[std::size_t(i)];
    const Eigen::Index off = which == 0 ? 0 : 4;
    const double theta = tape.latents(i, 0);
    const Eigen::Vector2d ab = axes(which);
    grad(off) += grad_out(i, 0);
    grad(off + 1) += grad_out(i, 1);
    // x = c + (e^{la} cos t, e^{lb} sin t): d/d la = x-component * e^{la}.
    grad(off + 2) += grad_out(i, 0) * ab.x() * std::cos(theta);
    grad(off + 3) += grad_out(i, 1) * ab.y() * std::sin(theta);
  }
  return grad;
}

void EllipsePair::write_descriptor(std::ostream&) const {}

std::unique_ptr<Generator> EllipsePair::clone() const {
  return std::make_unique<EllipsePair>(*this);
}

// ---------------------------------------------------------------------------
// ParticleCloud

ParticleCloud::ParticleCloud(Eigen::MatrixXd atoms, bool pass_through)
    : atoms_(std::move(atoms)), pass_through_(pass_through) {
  require(atoms_.rows() >= 1 && atoms_.cols() >= 1,
          "ParticleCloud: need K >= 1 atoms");
  require(atoms_.allFinite(), "ParticleCloud: non-finite atom");
}

Eigen::VectorXd ParticleCloud::params() const {
  return Eigen::Map<const Eigen::VectorXd>(atoms_.data(), atoms_.size());
}

void ParticleCloud::set_params(const Eigen::VectorXd& v) {
  check_param_vector(v, atoms_.size(), "ParticleCloud");
  atoms_ = Eigen::Map<const Eigen::MatrixXd>(v.data(), atoms_.rows(),
                                             atoms_.cols());
}

Tape ParticleCloud::sample_latents(Eigen::Index j, SeededRng& rng) const {
  require(j >= 1, "forward: batch size must be >= 1");
  Tape tape;
  tape.latents.resize(j, 1);
  tape.latents.setZero();
  tape.indices.resize(j);
  if (pass_through_) {
    if (j != atoms_.rows())
      throw std::invalid_argument(
          "ParticleCloud: pass-through forward requires j == K");
    for (Eigen::Index i = 0; i < j; ++i) tape.indices[std::size_t(i)] = int(i);
  } else {
    for (Eigen::Index i = 0; i < j; ++i)
      tape.indices[std::size_t(i)] = int(rng.index(std::size_t(atoms_.rows())));
  }
  return tape;
}

DiscreteMeasure ParticleCloud::forward(Tape& tape) const {
  const Eigen::Index j = tape.latents.rows();
  Eigen::MatrixXd pts(j, dim());
  for (Eigen::Index i = 0; i < j; ++i)
    pts.row(i) = atoms_.row(tape.indices[std::size_t(i)]);
  return DiscreteMeasure::uniform(std::move(pts));
}

Eigen::VectorXd ParticleCloud::backward(Tape& tape,
                                        const Eigen::MatrixXd& grad_out) const {
  check_tape(tape, grad_out.rows());
  tape.consumed = true;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(atoms_.rows(), atoms_.cols());
  for (Eigen::Index i = 0; i < grad_out.rows(); ++i)
    acc.row(tape.indices[std::size_t(i)]) += grad_out.row(i);
  return Eigen::Map<const Eigen::VectorXd>(acc.data(), acc.size());
}

void ParticleCloud::write_descriptor(std::ostream& out) const {
  out << "dim " << dim() << "\n";
  out << "atoms " << atoms_.rows() << "\n";
  out << "pass_through " << (pass_through_ ? 1 : 0) << "\n";
}

std::unique_ptr<Generator> ParticleCloud::clone() const {
  return std::make_unique<ParticleCloud>(*this);
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const Generator& gen, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << "barygen-checkpoint 1\n";
  out << "model " << gen.model_name() << "\n";
  gen.write_descriptor(out);
  const Eigen::VectorXd v = gen.params();
  out << "params " << v.size() << "\n";
  char buf[32];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", v(i));
    out << buf << "\n";
  }
}

namespace {

std::runtime_error ckpt_error(const std::string& path, const std::string& what) {
  return std::runtime_error("load_checkpoint: " + path + ": " + what);
}

}  // namespace

std::unique_ptr<Generator> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ckpt_error(path, "cannot open");
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "barygen-checkpoint" || version != 1)
    throw ckpt_error(path, "bad header");
  std::string key, model;
  in >> key >> model;
  if (key != "model") throw ckpt_error(path, "missing model line");

  std::unique_ptr<Generator> gen;
  if (model == "affine_gaussian") {
    Eigen::Index d = 0;
    in >> key >> d;
    if (key != "dim" || d < 1) throw ckpt_error(path, "bad dim line");
    gen = std::make_unique<AffineGaussian>(d);
  } else if (model == "gaussian_mixture") {
    Eigen::Index d = 0, p = 0;
    in >> key >> d;
    if (key != "dim" || d < 1) throw ckpt_error(path, "bad dim line");
    in >> key >> p;
    if (key != "components" || p < 1)
      throw ckpt_error(path, "bad components line");
    in >> key;
    if (key != "weights") throw ckpt_error(path, "missing weights line");
    Eigen::VectorXd w(p);
    for (Eigen::Index i = 0; i < p; ++i) in >> w(i);
    std::vector<AffineGaussian> parts(static_cast<std::size_t>(p),
                                      AffineGaussian(d));
    gen = std::make_unique<GaussianMixture>(std::move(parts), std::move(w));
  } else if (model == "mlp") {
    in >> key;
    if (key != "layers") throw ckpt_error(path, "missing layers line");
    std::string rest;
    std::getline(in, rest);
    std::istringstream ls(rest);
    std::vector<int> sizes;
    int s = 0;
    while (ls >> s) sizes.push_back(s);
    if (sizes.size() < 2) throw ckpt_error(path, "bad layers line");
    SeededRng dummy(0);
    gen = std::make_unique<MlpGenerator>(std::move(sizes), dummy);
  } else if (model == "ellipse_pair") {
    gen = std::make_unique<EllipsePair>();
  } else if (model == "particle_cloud") {
    Eigen::Index d = 0, k = 0;
    int pass = 1;
    in >> key >> d;
    if (key != "dim" || d < 1) throw ckpt_error(path, "bad dim line");
    in >> key >> k;
    if (key != "atoms" || k < 1) throw ckpt_error(path, "bad atoms line");
    in >> key >> pass;
    if (key != "pass_through") throw ckpt_error(path, "bad pass_through line");
    gen = std::make_unique<ParticleCloud>(Eigen::MatrixXd::Zero(k, d),
                                          pass != 0);
  } else {
    throw ckpt_error(path, "unknown model '" + model + "'");
  }

  Eigen::Index count = 0;
  in >> key >> count;
  if (key != "params" || count != gen->param_count())
    throw ckpt_error(path, "bad params header");
  Eigen::VectorXd v(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    if (!(in >> v(i))) throw ckpt_error(path, "truncated parameter list");
  }
  gen->set_params(v);
  return gen;
}

}  // namespace barygen
