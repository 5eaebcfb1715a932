#include "barygen/measures.hpp"

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

}  // namespace

DiscreteMeasure::DiscreteMeasure(Eigen::MatrixXd points,
                                 Eigen::VectorXd weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  require(points_.rows() >= 1 && points_.cols() >= 1,
          "DiscreteMeasure: need N >= 1 atoms in d >= 1 dimensions");
  require(points_.rows() == weights_.size(),
          "DiscreteMeasure: weight count must match atom count");
  require(points_.allFinite(), "DiscreteMeasure: non-finite coordinate");
  require((weights_.array() >= 0.0).all(),
          "DiscreteMeasure: negative weight");
  require(std::abs(weights_.sum() - 1.0) <= kWeightTol,
          "DiscreteMeasure: weights must sum to 1 within 1e-12");
}

DiscreteMeasure DiscreteMeasure::uniform(Eigen::MatrixXd points) {
  const Eigen::Index n = points.rows();
  require(n >= 1, "DiscreteMeasure::uniform: need at least one atom");
  return DiscreteMeasure(std::move(points),
                         Eigen::VectorXd::Constant(n, 1.0 / double(n)));
}

void GaussianSpec::validate() const {
  require(mean.size() >= 1, "GaussianSpec: dimension must be >= 1");
  require(covariance.rows() == mean.size() &&
              covariance.cols() == mean.size(),
          "GaussianSpec: covariance shape must match mean dimension");
  require(mean.allFinite() && covariance.allFinite(),
          "GaussianSpec: non-finite entry");
  require((covariance - covariance.transpose()).cwiseAbs().maxCoeff() <= 1e-12,
          "GaussianSpec: covariance not symmetric within 1e-12");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance);
  require(es.eigenvalues().minCoeff() >= -1e-10,
          "GaussianSpec: covariance has an eigenvalue below -1e-10");
}

Eigen::MatrixXd GaussianSpec::sqrt_covariance() const {
  validate();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance);
  Eigen::VectorXd clamped = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * clamped.cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

DiscreteMeasure sample_gaussian(const GaussianSpec& spec, Eigen::Index n,
                                SeededRng& rng) {
  require(n >= 1, "sample_gaussian: n must be >= 1");
  const Eigen::MatrixXd root = spec.sqrt_covariance();
  const Eigen::Index d = spec.dim();
  Eigen::MatrixXd z(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k) z(i, k) = rng.normal();
  Eigen::MatrixXd pts = z * root.transpose();
  pts.rowwise() += spec.mean.transpose();
  return DiscreteMeasure::uniform(std::move(pts));
}

EllipseDataset make_nested_ellipses_detailed(int p, int n_per,
                                             SeededRng& rng) {
  require(p >= 1, "make_nested_ellipses: p must be >= 1");
  require(n_per >= 2 && n_per % 2 == 0,
          "make_nested_ellipses: n_per must be even and >= 2");
  EllipseDataset out;
  out.measures.reserve(p);
  out.geometry.reserve(p);
  const int half = n_per / 2;
  for (int m = 0; m < p; ++m) {
    EllipsePairGeometry geo;
    geo.center = {rng.uniform() - 0.5, rng.uniform() - 0.5};
    geo.outer_axes = {0.8 + 0.4 * rng.uniform(), 0.8 + 0.4 * rng.uniform()};
    geo.inner_scale = 0.4 + 0.2 * rng.uniform();
    Eigen::MatrixXd pts(n_per, 2);
    for (int i = 0; i < n_per; ++i) {
      const double theta = 2.0 * std::numbers::pi * rng.uniform();
      const double scale = i < half ? 1.0 : geo.inner_scale;
      pts(i, 0) = geo.center.x() + scale * geo.outer_axes.x() * std::cos(theta);
      pts(i, 1) = geo.center.y() + scale * geo.outer_axes.y() * std::sin(theta);
    }
    out.measures.push_back(DiscreteMeasure::uniform(std::move(pts)));
    out.geometry.push_back(geo);
  }
  return out;
}

std::vector<DiscreteMeasure> make_nested_ellipses(int p, int n_per,
                                                  SeededRng& rng) {
  return make_nested_ellipses_detailed(p, n_per, rng).measures;
}

DiscreteMeasure subsample(const DiscreteMeasure& mu, Eigen::Index j,
                          SeededRng& rng) {
  require(j >= 1, "subsample: j must be >= 1");
  const Eigen::Index n = mu.size();
  // Inverse-CDF multinomial draw.
  Eigen::VectorXd cdf(n);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    acc += mu.weights()(i);
    cdf(i) = acc;
  }
  cdf(n - 1) = 1.0;
  Eigen::MatrixXd pts(j, mu.dim());
  for (Eigen::Index s = 0; s < j; ++s) {
    const double u = rng.uniform();
    Eigen::Index lo = 0, hi = n - 1;
    while (lo < hi) {
      const Eigen::Index mid = (lo + hi) / 2;
      if (u < cdf(mid))
        hi = mid;
      else
        lo = mid + 1;
    }
    pts.row(s) = mu.points().row(lo);
  }
  return DiscreteMeasure::uniform(std::move(pts));
}

GaussianSpec fit_gaussian(const DiscreteMeasure& mu) {
  const Eigen::VectorXd& w = mu.weights();
  Eigen::VectorXd mean = mu.points().transpose() * w;
  Eigen::MatrixXd centered = mu.points().rowwise() - mean.transpose();
  Eigen::MatrixXd cov =
      centered.transpose() * w.asDiagonal() * centered;
  cov = 0.5 * (cov + cov.transpose()).eval();
  return GaussianSpec{std::move(mean), std::move(cov)};
}

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line,
                             const std::string& what) {
  throw std::runtime_error("csv parse error: " + path + " line " +
                           std::to_string(line) + ": " + what);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

DiscreteMeasure load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv parse error: cannot open " + path);
  std::string line;
  int line_no = 0;

  // Header determines dimension and whether a weight column is present.
  if (!std::getline(in, line)) parse_fail(path, 1, "empty file");
  ++line_no;
  const auto header = split_fields(line);
  bool has_weights = !header.empty() && header.back() == "w";
  const int d = int(header.size()) - (has_weights ? 1 : 0);
  if (d < 1) parse_fail(path, line_no, "no coordinate columns in header");
  for (int k = 0; k < d; ++k) {
    if (header[k] != "x" + std::to_string(k))
      parse_fail(path, line_no,
                 "expected column 'x" + std::to_string(k) + "', got '" +
                     header[k] + "'");
  }

  std::vector<Eigen::VectorXd> rows;
  std::vector<double> weights;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_fields(line);
    if (int(fields.size()) != d + (has_weights ? 1 : 0))
      parse_fail(path, line_no,
                 "expected " + std::to_string(d + (has_weights ? 1 : 0)) +
                     " fields, got " + std::to_string(fields.size()));
    Eigen::VectorXd row(d);
    for (int k = 0; k < int(fields.size()); ++k) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(fields[k], &used);
      } catch (const std::exception&) {
        parse_fail(path, line_no, "non-numeric field '" + fields[k] + "'");
      }
      if (used != fields[k].size() || !std::isfinite(v))
        parse_fail(path, line_no, "non-numeric field '" + fields[k] + "'");
      if (k < d)
        row(k) = v;
      else
        weights.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) parse_fail(path, line_no, "no data rows");

  Eigen::MatrixXd pts(Eigen::Index(rows.size()), d);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) pts.row(i) = rows[i];
  if (!has_weights) return DiscreteMeasure::uniform(std::move(pts));

  Eigen::VectorXd w =
      Eigen::Map<Eigen::VectorXd>(weights.data(), Eigen::Index(weights.size()));
  if ((w.array() < 0.0).any())
    throw std::runtime_error("csv parse error: " + path + ": negative weight");
  const double total = w.sum();
  if (total <= 0.0)
    throw std::runtime_error("csv parse error: " + path + ": zero total weight");
  w /= total;
  Eigen::Index imax = 0;
  w.maxCoeff(&imax);
  w(imax) += 1.0 - w.sum();  // absorb rounding into the heaviest atom
  return DiscreteMeasure(std::move(pts), std::move(w));
}

void save_csv(const DiscreteMeasure& mu, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_csv: cannot open " + path);
  const Eigen::Index d = mu.dim();
  for (Eigen::Index k = 0; k < d; ++k) out << "x" << k << ",";
  out << "w\n";
  char buf[32];
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    for (Eigen::Index k = 0; k < d; ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", mu.points()(i, k));
      out << buf << ",";
    }
    std::snprintf(buf, sizeof(buf), "%.17g", mu.weights()(i));
    out << buf << "\n";
  }
}

}  // namespace barygen
