#include "ebpca/rmt.hpp"

#include "ebpca/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ebpca {

namespace {

struct Triplets {
  Matrix U;  // n x r, orthonormal
  Matrix V;  // d x r
  Vector s;  // r, descending
};

Triplets dense_svd(const Matrix& Y, Index r) {
  Eigen::BDCSVD<Matrix> svd(Y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Triplets t;
  r = std::min<Index>(r, svd.singularValues().size());
  t.s = svd.singularValues().head(r);
  t.U = svd.matrixU().leftCols(r);
  t.V = svd.matrixV().leftCols(r);
  return t;
}

// Reorthogonalize x against the first `cols` columns of Q (two passes).
void reorthogonalize(const Matrix& Q, Index cols, Vector& x) {
  if (cols == 0) return;
  for (int pass = 0; pass < 2; ++pass) {
    const Vector c = Q.leftCols(cols).transpose() * x;
    x.noalias() -= Q.leftCols(cols) * c;
  }
}

// Golub–Kahan–Lanczos bidiagonalization with full reorthogonalization.
// Returns false if it could not resolve r triplets, in which case the caller
// falls back to the dense path.
bool lanczos_svd(const Matrix& Y, Index r, const SvdOptions& opt, Triplets& out) {
  const Index n = Y.rows(), d = Y.cols();
  const Index max_steps = std::min<Index>({static_cast<Index>(opt.max_lanczos_steps), n, d});
  if (max_steps <= r + 2) return false;

  Matrix P(n, max_steps), Q(d, max_steps);
  Vector alpha(max_steps), beta(max_steps);

  Rng rng = make_stream(0x6c616e637a6f73ULL, streams::kLanczos);
  Vector q(d);
  fill_normal(rng, q.data(), d);
  q.normalize();
  Q.col(0) = q;

  Vector p = Y * q;
  alpha(0) = p.norm();
  if (alpha(0) == 0.0) return false;
  P.col(0) = p / alpha(0);

  double sigma1 = alpha(0);
  for (Index j = 0; j < max_steps; ++j) {
    // Right step.
    Vector qn = Y.transpose() * P.col(j) - alpha(j) * Q.col(j);
    reorthogonalize(Q, j + 1, qn);
    beta(j) = qn.norm();
    const Index m = j + 1;

    const bool check = m >= r + 1 && (m % 5 == 0 || m == max_steps || beta(j) <= 1e-14 * sigma1);
    if (check) {
      Matrix B = Matrix::Zero(m, m);
      B.diagonal() = alpha.head(m);
      for (Index i = 0; i + 1 < m; ++i) B(i, i + 1) = beta(i);
      Eigen::JacobiSVD<Matrix> small(B, Eigen::ComputeFullU | Eigen::ComputeFullV);
      sigma1 = std::max(sigma1, small.singularValues()(0));
      // Residual of Ritz triplet i: beta_m * |last component of left vector|.
      bool converged = true;
      for (Index i = 0; i < r - 1; ++i) {
        if (beta(j) * std::abs(small.matrixU()(m - 1, i)) > opt.tol * sigma1) converged = false;
      }
      if (converged || beta(j) <= 1e-14 * sigma1) {
        out.s = small.singularValues().head(r);
        out.U = P.leftCols(m) * small.matrixU().leftCols(r);
        out.V = Q.leftCols(m) * small.matrixV().leftCols(r);
        return true;
      }
    }
    if (m == max_steps) return false;
    if (beta(j) == 0.0) return false;
    Q.col(j + 1) = qn / beta(j);

    // Left step.
    Vector pn = Y * Q.col(j + 1) - beta(j) * P.col(j);
    reorthogonalize(P, j + 1, pn);
    alpha(j + 1) = pn.norm();
    if (alpha(j + 1) <= 1e-14 * sigma1) return false;
    P.col(j + 1) = pn / alpha(j + 1);
  }
  return false;
}

}  // namespace

SampleSpectrum top_k_svd(const Matrix& Y, Index k, const SvdOptions& options) {
  const Index n = Y.rows(), d = Y.cols();
  require(k >= 1, ErrorKind::kValidation, "k must be >= 1");
  require(k < std::min(n, d), ErrorKind::kDimension, "k must be below min(n, d)");
  require(Y.allFinite(), ErrorKind::kValidation, "matrix contains non-finite entries");

  // One extra triplet for the gap check. The k+1-th Ritz value from Lanczos is
  // only used for that check, so its own convergence is not required.
  Triplets t;
  const Index r = k + 1;
  if (std::min(n, d) <= options.dense_threshold || !lanczos_svd(Y, r, options, t)) {
    t = dense_svd(Y, r);
  }

  const double gamma = static_cast<double>(d) / static_cast<double>(n);
  const double sg = std::sqrt(gamma);
  if (options.check_gap) {
    const double gap = (t.s(k - 1) - t.s(k)) / sg;
    if (std::abs(gap) <= 1e-10) {
      fail(ErrorKind::kAmbiguousRank, "lambda_k equals lambda_{k+1}; the top-k subspace is not identified");
    }
    for (Index i = 0; i + 1 < k; ++i) {
      if (std::abs(t.s(i) - t.s(i + 1)) / sg <= 1e-10) {
        fail(ErrorKind::kAmbiguousRank, "tied singular values among the top k");
      }
    }
  }

  SampleSpectrum sp;
  sp.gamma = gamma;
  sp.lambda = t.s.head(k) / sg;
  sp.next_singular_value = t.s(k);
  sp.F = t.U.leftCols(k) * std::sqrt(static_cast<double>(n));
  sp.G = t.V.leftCols(k) * std::sqrt(static_cast<double>(d));
  for (Index i = 0; i < k; ++i) {
    Index arg = 0;
    sp.G.col(i).cwiseAbs().maxCoeff(&arg);
    if (sp.G(arg, i) < 0.0) {
      sp.G.col(i) *= -1.0;
      sp.F.col(i) *= -1.0;
    }
    // f_i is tied to g_i through Y.
    if (sp.F.col(i).dot(Y * sp.G.col(i)) < 0.0) sp.F.col(i) *= -1.0;
  }
  return sp;
}

Vector singular_values(const Matrix& Y) {
  Eigen::BDCSVD<Matrix> svd(Y);
  return svd.singularValues();
}

Normalized normalize(const Matrix& Y_obs, Index k, const SvdOptions& options) {
  const Index n = Y_obs.rows(), d = Y_obs.cols();
  SampleSpectrum raw = top_k_svd(Y_obs, k, options);
  const double gamma = raw.gamma;
  const double total = Y_obs.squaredNorm();
  double explained = 0.0;
  for (Index i = 0; i < k; ++i) {
    const double s = std::sqrt(gamma) * raw.lambda(i);
    explained += s * s;
  }
  const double resid = total - explained;
  if (!(total > 0.0) || resid <= 1e-10 * total) {
    fail(ErrorKind::kDegenerateNoise, "residual after removing the top-k PCs vanishes (tau_hat = 0)");
  }
  Normalized out;
  out.tau_hat = std::sqrt(resid / (static_cast<double>(n) * static_cast<double>(d)));
  const double scale = 1.0 / (out.tau_hat * std::sqrt(static_cast<double>(n)));
  out.Y = Y_obs * scale;
  out.spectrum = std::move(raw);
  out.spectrum.lambda *= scale;
  out.spectrum.next_singular_value *= scale;
  return out;
}

double critical_signal(double gamma) {
  require(gamma > 0.0, ErrorKind::kValidation, "gamma must be > 0");
  return std::pow(gamma, -0.25);
}

double spike_singular_limit(double s, double gamma) {
  require(gamma > 0.0 && s > 0.0, ErrorKind::kValidation, "need s > 0 and gamma > 0");
  const double s2 = s * s;
  return std::sqrt((gamma * s2 + 1.0) * (s2 + 1.0) / s2);
}

double estimate_signal(double lambda, double gamma) {
  require(gamma > 0.0, ErrorKind::kValidation, "gamma must be > 0");
  const double a = gamma * lambda * lambda - (1.0 + gamma);
  const double disc = a * a - 4.0 * gamma;
  if (a < 0.0 || disc < 0.0) {
    // Relative slack for the bulk edge itself, where disc is 0 up to rounding.
    if (!(a > 0.0 && disc > -1e-12 * a * a)) {
      fail(ErrorKind::kSubcritical, "singular value lies inside the noise bulk");
    }
  }
  const double s2 = (a + std::sqrt(std::max(disc, 0.0))) / (2.0 * gamma);
  return std::sqrt(s2);
}

RMTPrediction predict_observables(double s, double gamma) {
  require(gamma > 0.0, ErrorKind::kValidation, "gamma must be > 0");
  if (!(s > critical_signal(gamma))) {
    fail(ErrorKind::kSubcritical, "signal at or below the phase transition");
  }
  const double s2 = s * s;
  RMTPrediction p;
  p.sqrt_gamma_lambda_limit = spike_singular_limit(s, gamma);
  p.sigma_star_sq = (1.0 + gamma * s2) / (gamma * s2 * (s2 + 1.0));
  p.mu_star = std::sqrt(1.0 - p.sigma_star_sq);
  p.sigma_bar_star_sq = (1.0 + s2) / (s2 * (gamma * s2 + 1.0));
  p.mu_bar_star = std::sqrt(1.0 - p.sigma_bar_star_sq);
  return p;
}

std::pair<double, double> bulk_edges(double gamma) {
  require(gamma > 0.0, ErrorKind::kValidation, "gamma must be > 0");
  const double r = std::sqrt(gamma);
  return {std::abs(1.0 - r), 1.0 + r};
}

double mp_singular_density(double x, double gamma) {
  const auto [lo, hi] = bulk_edges(gamma);
  if (!(x > lo && x < hi) || x <= 0.0) return 0.0;
  const double a = lo * lo, b = hi * hi, t = x * x;
  return std::sqrt((b - t) * (t - a)) / (std::numbers::pi * std::min(gamma, 1.0) * x);
}

double mp_singular_cdf(double x, double gamma) {
  const auto [lo, hi] = bulk_edges(gamma);
  if (x <= lo) return 0.0;
  if (x >= hi) return 1.0;
  const double a = lo * lo, b = hi * hi, t = x * x;
  // t = a + (b - a)(1 - cos phi)/2 turns the square-root edges into sin^2.
  const double phi_max = std::acos(std::clamp(1.0 - 2.0 * (t - a) / (b - a), -1.0, 1.0));
  const auto& rule = quadrature::gauss_legendre(96);
  const double half = 0.5 * (b - a);
  double acc = 0.0;
  for (Index i = 0; i < rule.nodes.size(); ++i) {
    const double phi = 0.5 * phi_max * (rule.nodes(i) + 1.0);
    const double tt = a + half * (1.0 - std::cos(phi));
    const double sn = std::sin(phi);
    if (tt <= 0.0) continue;
    acc += rule.weights(i) * half * half * sn * sn / tt;
  }
  acc *= 0.5 * phi_max / (2.0 * std::numbers::pi * std::min(gamma, 1.0));
  return std::clamp(acc, 0.0, 1.0);
}

double outlier_threshold(Index n, Index d) {
  require(n >= 2 && d >= 1, ErrorKind::kValidation, "matrix too small");
  const double a = std::sqrt(static_cast<double>(n - 1));
  const double b = std::sqrt(static_cast<double>(d));
  const double mu = (a + b) * (a + b);
  const double sigma = (a + b) * std::cbrt(1.0 / a + 1.0 / b);
  return std::sqrt((mu + 3.0 * sigma) / static_cast<double>(n));
}

}  // namespace ebpca
