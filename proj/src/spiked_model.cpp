#include "ebpca/spiked_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace ebpca {

namespace {

const double kSqrt3 = std::sqrt(3.0);
const double kSqrt2 = std::numbers::sqrt2;

bool coordinatewise(PriorKind kind) {
  return kind == PriorKind::kGaussian || kind == PriorKind::kUniform ||
         kind == PriorKind::kTwoPoint || kind == PriorKind::kPointNormal;
}

// 1-D discretizations for the coordinatewise kinds.
DiscretePrior discretize_scalar(const PriorSpec& spec, Index m) {
  DiscretePrior p;
  auto normal_grid = [](Index pts, double sd, Vector& x, Vector& w) {
    const double half = 7.0;
    x.resize(pts);
    w.resize(pts);
    for (Index i = 0; i < pts; ++i) {
      const double z = -half + 2.0 * half * static_cast<double>(i) / static_cast<double>(pts - 1);
      x(i) = z;
      w(i) = std::exp(-0.5 * z * z);
    }
    w /= w.sum();
    // Match the second moment exactly.
    const double m2 = (w.array() * x.array().square()).sum();
    x *= sd / std::sqrt(m2);
  };
  switch (spec.kind) {
    case PriorKind::kTwoPoint:
      p.atoms = (Matrix(2, 1) << -1.0, 1.0).finished();
      p.weights = Vector::Constant(2, 0.5);
      return p;
    case PriorKind::kUniform: {
      Vector x(m);
      for (Index i = 0; i < m; ++i) {
        x(i) = (2.0 * static_cast<double>(i) + 1.0 - static_cast<double>(m)) /
               static_cast<double>(m) * kSqrt3;
      }
      x /= std::sqrt(x.array().square().mean());
      p.atoms = x;
      p.weights = Vector::Constant(m, 1.0 / static_cast<double>(m));
      return p;
    }
    case PriorKind::kGaussian: {
      Vector x, w;
      normal_grid(m | 1, 1.0, x, w);
      p.atoms = x;
      p.weights = w;
      return p;
    }
    case PriorKind::kPointNormal: {
      const double eps = spec.sparsity;
      if (eps <= 0.0) return DiscretePrior::point_mass(Vector::Zero(1));
      Vector x, w;
      normal_grid(m | 1, std::sqrt(spec.effective_spike_variance()), x, w);
      // The grid is symmetric with an odd count, so its centre atom is 0.
      w *= eps;
      w(x.size() / 2) += 1.0 - eps;
      p.atoms = x;
      p.weights = w;
      return p;
    }
    default:
      break;
  }
  fail(ErrorKind::kValidation, "not a coordinatewise prior");
}

}  // namespace

// ---------------------------------------------------------------------------
// PriorSpec

PriorSpec PriorSpec::gaussian(Index k) {
  PriorSpec s;
  s.kind = PriorKind::kGaussian;
  s.dim = k;
  return s;
}

PriorSpec PriorSpec::uniform(Index k) {
  PriorSpec s;
  s.kind = PriorKind::kUniform;
  s.dim = k;
  return s;
}

PriorSpec PriorSpec::two_point(Index k) {
  PriorSpec s;
  s.kind = PriorKind::kTwoPoint;
  s.dim = k;
  return s;
}

PriorSpec PriorSpec::point_normal(double eps, Index k) {
  PriorSpec s;
  s.kind = PriorKind::kPointNormal;
  s.dim = k;
  s.sparsity = eps;
  return s;
}

PriorSpec PriorSpec::circle() {
  PriorSpec s;
  s.kind = PriorKind::kCircle;
  s.dim = 2;
  return s;
}

PriorSpec PriorSpec::three_point() {
  PriorSpec s;
  s.kind = PriorKind::kThreePoint;
  s.dim = 2;
  s.atoms.resize(3, 2);
  for (int j = 0; j < 3; ++j) {
    const double angle = std::numbers::pi / 2.0 + 2.0 * std::numbers::pi * j / 3.0;
    s.atoms(j, 0) = kSqrt2 * std::cos(angle);
    s.atoms(j, 1) = kSqrt2 * std::sin(angle);
  }
  s.weights = Vector::Constant(3, 1.0 / 3.0);
  return s;
}

PriorSpec PriorSpec::custom(Matrix atoms, Vector weights) {
  PriorSpec s;
  s.kind = PriorKind::kCustom;
  s.dim = atoms.cols();
  s.atoms = std::move(atoms);
  s.weights = std::move(weights);
  return s;
}

PriorSpec PriorSpec::parse(const std::string& text, Index k) {
  std::string head = text, arg;
  if (auto pos = text.find(':'); pos != std::string::npos) {
    head = text.substr(0, pos);
    arg = text.substr(pos + 1);
  }
  PriorSpec spec;
  if (head == "gaussian") spec = gaussian(k);
  else if (head == "uniform") spec = uniform(k);
  else if (head == "two_point") spec = two_point(k);
  else if (head == "point_normal") {
    double eps = 0.1;
    if (!arg.empty()) {
      try {
        std::size_t used = 0;
        eps = std::stod(arg, &used);
        if (used != arg.size()) throw std::invalid_argument(arg);
      } catch (const std::exception&) {
        fail(ErrorKind::kConfig, "bad point_normal sparsity '" + arg + "'");
      }
    }
    spec = point_normal(eps, k);
  } else if (head == "circle") spec = circle();
  else if (head == "three_point") spec = three_point();
  else fail(ErrorKind::kConfig, "unknown prior '" + text + "'");
  if (head != "point_normal" && !arg.empty()) {
    fail(ErrorKind::kConfig, "prior '" + head + "' takes no argument");
  }
  if (spec.dim != k) {
    fail(ErrorKind::kConfig, "prior '" + head + "' has dimension " + std::to_string(spec.dim) +
                                 " but k = " + std::to_string(k));
  }
  spec.validate();
  return spec;
}

std::string PriorSpec::name() const {
  switch (kind) {
    case PriorKind::kGaussian: return "gaussian";
    case PriorKind::kUniform: return "uniform";
    case PriorKind::kTwoPoint: return "two_point";
    case PriorKind::kPointNormal: {
      std::ostringstream os;
      os << "point_normal:" << sparsity;
      return os.str();
    }
    case PriorKind::kCircle: return "circle";
    case PriorKind::kThreePoint: return "three_point";
    case PriorKind::kCustom: return "custom";
  }
  return "unknown";
}

double PriorSpec::effective_spike_variance() const {
  if (spike_variance > 0.0) return spike_variance;
  return sparsity > 0.0 ? 1.0 / sparsity : 0.0;
}

bool PriorSpec::is_discrete() const {
  return kind == PriorKind::kTwoPoint || kind == PriorKind::kThreePoint ||
         kind == PriorKind::kCustom;
}

void PriorSpec::validate() const {
  require(dim >= 1, ErrorKind::kValidation, "prior dimension must be >= 1");
  switch (kind) {
    case PriorKind::kPointNormal:
      require(sparsity >= 0.0 && sparsity <= 1.0, ErrorKind::kValidation,
              "point-normal sparsity must lie in [0, 1]");
      require(std::isfinite(spike_variance) && spike_variance >= 0.0, ErrorKind::kValidation,
              "spike variance must be nonnegative");
      break;
    case PriorKind::kCircle:
      require(dim == 2, ErrorKind::kValidation, "circle prior is two-dimensional");
      break;
    case PriorKind::kThreePoint:
    case PriorKind::kCustom: {
      require(atoms.rows() >= 1 && atoms.cols() == dim, ErrorKind::kValidation,
              "discrete prior atoms must be m x k");
      require(weights.size() == atoms.rows(), ErrorKind::kValidation,
              "discrete prior weights/atoms size mismatch");
      require(atoms.allFinite(), ErrorKind::kValidation, "discrete prior atoms must be finite");
      require((weights.array() >= 0.0).all() && std::abs(weights.sum() - 1.0) <= 1e-12,
              ErrorKind::kValidation, "discrete prior weights must be a simplex vector");
      break;
    }
    default:
      break;
  }
}

// ---------------------------------------------------------------------------
// Sampling

Matrix sample_prior(const PriorSpec& spec, Index count, Rng& rng) {
  require(count >= 1, ErrorKind::kValidation, "sample count must be >= 1");
  spec.validate();
  const Index k = spec.dim;
  Matrix out(count, k);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  switch (spec.kind) {
    case PriorKind::kGaussian: {
      // Row-major draw order keeps rows independent of k's layout.
      Matrix t(k, count);
      fill_normal(rng, t.data(), t.size());
      out = t.transpose();
      break;
    }
    case PriorKind::kUniform:
      for (Index i = 0; i < count; ++i)
        for (Index c = 0; c < k; ++c) out(i, c) = kSqrt3 * (2.0 * unif(rng) - 1.0);
      break;
    case PriorKind::kTwoPoint:
      for (Index i = 0; i < count; ++i)
        for (Index c = 0; c < k; ++c) out(i, c) = unif(rng) < 0.5 ? -1.0 : 1.0;
      break;
    case PriorKind::kPointNormal: {
      const double sd = std::sqrt(spec.effective_spike_variance());
      for (Index i = 0; i < count; ++i) {
        for (Index c = 0; c < k; ++c) {
          const bool spike = unif(rng) < spec.sparsity;
          double z;
          fill_normal(rng, &z, 1);
          out(i, c) = spike ? sd * z : 0.0;
        }
      }
      break;
    }
    case PriorKind::kCircle:
      for (Index i = 0; i < count; ++i) {
        const double angle = 2.0 * std::numbers::pi * unif(rng);
        out(i, 0) = kSqrt2 * std::cos(angle);
        out(i, 1) = kSqrt2 * std::sin(angle);
      }
      break;
    case PriorKind::kThreePoint:
    case PriorKind::kCustom: {
      std::vector<double> cdf(static_cast<std::size_t>(spec.weights.size()));
      std::partial_sum(spec.weights.data(), spec.weights.data() + spec.weights.size(), cdf.begin());
      for (Index i = 0; i < count; ++i) {
        const double u = unif(rng) * cdf.back();
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const Index j = std::min<Index>(static_cast<Index>(it - cdf.begin()), spec.atoms.rows() - 1);
        out.row(i) = spec.atoms.row(j);
      }
      break;
    }
  }
  return out;
}

DiscretePrior discretize(const PriorSpec& spec, Index resolution) {
  spec.validate();
  const Index k = spec.dim;
  if (spec.kind == PriorKind::kThreePoint || spec.kind == PriorKind::kCustom) {
    DiscretePrior p{spec.atoms, spec.weights};
    p.weights /= p.weights.sum();
    return p;
  }
  if (spec.kind == PriorKind::kCircle) {
    const Index m = resolution > 0 ? resolution : 360;
    DiscretePrior p;
    p.atoms.resize(m, 2);
    for (Index j = 0; j < m; ++j) {
      const double angle = 2.0 * std::numbers::pi * (static_cast<double>(j) + 0.5) /
                           static_cast<double>(m);
      p.atoms(j, 0) = kSqrt2 * std::cos(angle);
      p.atoms(j, 1) = kSqrt2 * std::sin(angle);
    }
    p.weights = Vector::Constant(m, 1.0 / static_cast<double>(m));
    return p;
  }
  require(coordinatewise(spec.kind), ErrorKind::kValidation, "cannot discretize prior");
  const Index per_dim = resolution > 0 ? resolution : (k == 1 ? 401 : 61);
  const DiscretePrior one = discretize_scalar(spec, per_dim);
  // Tensor product across coordinates.
  DiscretePrior p = one;
  for (Index c = 1; c < k; ++c) {
    const Index a = p.size(), b = one.size();
    DiscretePrior next;
    next.atoms.resize(a * b, c + 1);
    next.weights.resize(a * b);
    for (Index i = 0; i < a; ++i) {
      for (Index j = 0; j < b; ++j) {
        next.atoms.row(i * b + j) << p.atoms.row(i), one.atoms(j, 0);
        next.weights(i * b + j) = p.weights(i) * one.weights(j);
      }
    }
    p = std::move(next);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Model

void SpikedConfig::validate() const {
  require(n >= 1 && d >= 1, ErrorKind::kValidation, "n and d must be positive");
  require(!signals.empty(), ErrorKind::kValidation, "need at least one signal strength");
  for (std::size_t i = 0; i < signals.size(); ++i) {
    require(std::isfinite(signals[i]) && signals[i] > 0.0, ErrorKind::kValidation,
            "signal strengths must be > 0");
    if (i > 0) {
      require(signals[i] < signals[i - 1], ErrorKind::kValidation,
              "signal strengths must be strictly decreasing");
    }
  }
  require(k() < std::min(n, d), ErrorKind::kDimension, "rank k must be below min(n, d)");
}

std::vector<Index> SpikedConfig::subcritical() const {
  const double threshold = std::pow(gamma(), -0.25);
  std::vector<Index> out;
  for (std::size_t i = 0; i < signals.size(); ++i) {
    if (signals[i] <= threshold) out.push_back(static_cast<Index>(i));
  }
  return out;
}

SpikedInstance generate_instance(const SpikedConfig& config, const PriorSpec& prior_u,
                                 const PriorSpec& prior_v, bool retain_noise) {
  config.validate();
  require(prior_u.dim == config.k() && prior_v.dim == config.k(), ErrorKind::kDimension,
          "prior dimensions must equal k");
  const Index n = config.n, d = config.d, k = config.k();
  Rng ru = make_stream(config.seed, streams::kPriorU);
  Rng rv = make_stream(config.seed, streams::kPriorV);
  Rng rw = make_stream(config.seed, streams::kNoise);

  SpikedInstance inst;
  inst.U = sample_prior(prior_u, n, ru);
  inst.V = sample_prior(prior_v, d, rv);
  inst.S = Matrix::Zero(k, k);
  for (Index i = 0; i < k; ++i) inst.S(i, i) = config.signals[static_cast<std::size_t>(i)];

  Matrix W(n, d);
  fill_normal(rw, W.data(), W.size());
  W *= 1.0 / std::sqrt(static_cast<double>(n));
  inst.Y.noalias() = (inst.U * inst.S) * inst.V.transpose();
  inst.Y *= 1.0 / static_cast<double>(n);
  inst.Y += W;
  if (retain_noise) inst.W = std::move(W);
  return inst;
}

// ---------------------------------------------------------------------------
// Metrics

double alignment(const Vector& a, const Vector& b) {
  require(a.size() == b.size(), ErrorKind::kDimension, "alignment needs equal lengths");
  const double na = a.norm(), nb = b.norm();
  require(na > 0.0 && nb > 0.0, ErrorKind::kUndefinedAlignment,
          "alignment undefined for a zero vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

namespace {

Matrix orthonormal_basis(const Matrix& A) {
  Eigen::ColPivHouseholderQR<Matrix> qr(A);
  qr.setThreshold(1e-10);
  require(qr.rank() == A.cols(), ErrorKind::kRank, "matrix is not of full column rank");
  return qr.householderQ() * Matrix::Identity(A.rows(), A.cols());
}

double perp_norm(const Matrix& est, const Matrix& truth) {
  require(est.rows() == truth.rows(), ErrorKind::kDimension, "row counts differ");
  require(est.cols() >= 1 && truth.cols() >= 1, ErrorKind::kRank, "empty column span");
  const Matrix qe = orthonormal_basis(est);
  const Matrix qt = orthonormal_basis(truth);
  return (qe - qt * (qt.transpose() * qe)).norm();
}

}  // namespace

double subspace_distance(const Matrix& est, const Matrix& truth) {
  const double k = static_cast<double>(est.cols());
  return std::min(1.0, perp_norm(est, truth) / std::sqrt(k));
}

double projector_distance(const Matrix& est, const Matrix& truth) {
  require(est.rows() == truth.rows(), ErrorKind::kDimension, "row counts differ");
  const Matrix qe = orthonormal_basis(est);
  const Matrix qt = orthonormal_basis(truth);
  // |P_e - P_t|_F^2 = k_e + k_t - 2 |Q_t^T Q_e|_F^2, without forming m x m projectors.
  const double cross = (qt.transpose() * qe).squaredNorm();
  const double sq = static_cast<double>(qe.cols() + qt.cols()) - 2.0 * cross;
  return std::sqrt(std::max(sq, 0.0) / static_cast<double>(est.cols()));
}

}  // namespace ebpca
