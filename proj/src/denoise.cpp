#include "ebpca/denoise.hpp"

#include "ebpca/quadrature.hpp"

#include <cmath>

namespace ebpca {

// ---------------------------------------------------------------------------
// Prior helpers

Index prior_dim(const Prior& prior) {
  return std::visit(
      [](const auto& p) -> Index {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, DiscretePrior>) return p.dim();
        else return p.cov.rows();
      },
      prior);
}

Matrix prior_second_moment(const Prior& prior) {
  return std::visit(
      [](const auto& p) -> Matrix {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, DiscretePrior>) return p.second_moment();
        else return p.cov;
      },
      prior);
}

Prior prior_from_spec(const PriorSpec& spec, Index resolution) {
  spec.validate();
  if (spec.kind == PriorKind::kGaussian) {
    return GaussianPrior{Matrix::Identity(spec.dim, spec.dim)};
  }
  return discretize(spec, resolution);
}

Prior transform_prior(const Prior& prior, const Matrix& D) {
  return std::visit(
      [&D](const auto& p) -> Prior {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, DiscretePrior>) {
          DiscretePrior out = p;
          out.atoms = p.atoms * D.transpose();
          return out;
        } else {
          return GaussianPrior{D * p.cov * D.transpose()};
        }
      },
      prior);
}

// ---------------------------------------------------------------------------
// Pointwise

namespace {

// Posterior responsibilities for a single observation.
Vector responsibilities(const Vector& x, const GaussianChannel& ch, const DiscretePrior& prior) {
  const Matrix K = ch.log_kernel(x.transpose(), prior.atoms);
  Vector logp(prior.size());
  for (Index j = 0; j < prior.size(); ++j) {
    logp(j) = prior.weights(j) > 0.0 ? K(0, j) + std::log(prior.weights(j))
                                     : -std::numeric_limits<double>::infinity();
  }
  const double lse = log_sum_exp(logp);
  return (logp.array() - lse).exp().matrix();
}

}  // namespace

Vector posterior_mean(const Vector& x, const CompoundParams& params, const DiscretePrior& prior) {
  prior.validate();
  require(x.size() == params.dim() && prior.dim() == params.dim(), ErrorKind::kDimension,
          "dimension mismatch in posterior_mean");
  GaussianChannel ch(params);
  return prior.atoms.transpose() * responsibilities(x, ch, prior);
}

Vector tweedie_posterior_mean(const Vector& x, const CompoundParams& params,
                              const DiscretePrior& prior) {
  prior.validate();
  GaussianChannel ch(params);
  const Matrix& Sinv = ch.sigma_inverse();
  const Index k = params.dim();
  // f(x) = sum_j w_j phi(x - M z_j), grad f = -sum_j w_j phi_j Sigma^{-1}(x - M z_j).
  // A common factor exp(-c) cancels in grad f / f.
  std::vector<double> expo(static_cast<std::size_t>(prior.size()));
  double c = -std::numeric_limits<double>::infinity();
  for (Index j = 0; j < prior.size(); ++j) {
    const Vector r = x - params.M * prior.atoms.row(j).transpose();
    expo[static_cast<std::size_t>(j)] = -0.5 * r.dot(Sinv * r);
    c = std::max(c, expo[static_cast<std::size_t>(j)]);
  }
  double f = 0.0;
  Vector grad = Vector::Zero(k);
  for (Index j = 0; j < prior.size(); ++j) {
    const double phi = prior.weights(j) * std::exp(expo[static_cast<std::size_t>(j)] - c);
    const Vector r = x - params.M * prior.atoms.row(j).transpose();
    f += phi;
    grad -= phi * (Sinv * r);
  }
  const Vector score = grad / f;
  return params.M.partialPivLu().solve(x + ch.sigma() * score);
}

Matrix posterior_jacobian(const Vector& x, const CompoundParams& params,
                          const DiscretePrior& prior) {
  prior.validate();
  GaussianChannel ch(params);
  const Vector r = responsibilities(x, ch, prior);
  const Vector mean = prior.atoms.transpose() * r;
  const Matrix centered = prior.atoms.rowwise() - mean.transpose();
  const Matrix cov = centered.transpose() * r.asDiagonal() * centered;
  return cov * params.M.transpose() * ch.sigma_inverse();
}

// ---------------------------------------------------------------------------
// Matrix denoising

Denoised denoise_matrix(const Matrix& X, const CompoundParams& params, const DiscretePrior& prior) {
  prior.validate();
  require(X.cols() == params.dim() && prior.dim() == params.dim(), ErrorKind::kDimension,
          "dimension mismatch in denoise_matrix");
  require(X.rows() >= 1, ErrorKind::kValidation, "nothing to denoise");
  GaussianChannel ch(params);
  const Index n = X.rows(), m = prior.size();

  Matrix R = ch.log_kernel(X, prior.atoms);
  RowVector logw(m);
  for (Index j = 0; j < m; ++j) {
    logw(j) = prior.weights(j) > 0.0 ? std::log(prior.weights(j))
                                     : -std::numeric_limits<double>::infinity();
  }
  R.rowwise() += logw;
  const Vector mx = R.rowwise().maxCoeff();
  R.colwise() -= mx;
  R = R.array().exp().matrix();
  const Vector total = R.rowwise().sum();
  R = total.cwiseInverse().asDiagonal() * R;

  Denoised out;
  out.mean.noalias() = R * prior.atoms;
  // Mean posterior covariance = Z^T diag(mean responsibility) Z - Theta^T Theta / n.
  const Vector rbar = R.colwise().sum().transpose() / static_cast<double>(n);
  out.avg_second_moment = prior.atoms.transpose() * rbar.asDiagonal() * prior.atoms;
  const Matrix cov = out.avg_second_moment - out.mean.transpose() * out.mean / static_cast<double>(n);
  out.avg_jacobian = cov * params.M.transpose() * ch.sigma_inverse();
  return out;
}

Denoised denoise_matrix(const Matrix& X, const CompoundParams& params, const GaussianPrior& prior) {
  require(X.cols() == params.dim() && prior.cov.rows() == params.dim(), ErrorKind::kDimension,
          "dimension mismatch in denoise_matrix");
  const Matrix sigma = params.regularized_sigma();
  const Matrix& C = prior.cov;
  const Matrix& M = params.M;
  // theta(x) = A x with A = C M^T (M C M^T + Sigma)^{-1}.
  const Matrix marg = M * C * M.transpose() + sigma;
  const Matrix A = marg.ldlt().solve(M * C).transpose();
  Denoised out;
  out.mean.noalias() = X * A.transpose();
  out.avg_jacobian = A;
  const Matrix post_cov = C - A * M * C;
  out.avg_second_moment =
      0.5 * (post_cov + post_cov.transpose()) + out.mean.transpose() * out.mean / static_cast<double>(X.rows());
  return out;
}

Denoised denoise_matrix(const Matrix& X, const CompoundParams& params, const Prior& prior) {
  return std::visit([&](const auto& p) { return denoise_matrix(X, params, p); }, prior);
}

// ---------------------------------------------------------------------------
// Expectations over the channel

namespace {

ChannelMoments gaussian_moments(const GaussianPrior& prior, const CompoundParams& params) {
  const Matrix sigma = params.regularized_sigma();
  const Matrix& C = prior.cov;
  const Matrix& M = params.M;
  const Matrix marg = M * C * M.transpose() + sigma;
  const Matrix A = marg.ldlt().solve(M * C).transpose();
  ChannelMoments cm;
  cm.mean_outer = A * marg * A.transpose();
  cm.mean_outer = 0.5 * (cm.mean_outer + cm.mean_outer.transpose());
  cm.mmse = (C - A * M * C).trace();
  cm.mean_outer_se = Matrix::Zero(C.rows(), C.cols());
  return cm;
}

// Tensor Gauss–Hermite over the noise, exact sum over atoms.
ChannelMoments quadrature_moments(const DiscretePrior& prior, const CompoundParams& params,
                                  int nodes) {
  const Index k = prior.dim();
  const auto& rule = quadrature::gauss_hermite(nodes);
  const Index q = rule.nodes.size();
  Index grid = 1;
  for (Index c = 0; c < k; ++c) grid *= q;

  // Noise points L h for every node tuple (L the Cholesky factor of Sigma).
  GaussianChannel ch(params);
  Eigen::LLT<Matrix> llt(ch.sigma());
  const Matrix L = llt.matrixL();
  Matrix H(grid, k);
  Vector hw(grid);
  for (Index g = 0; g < grid; ++g) {
    Index rem = g;
    double w = 1.0;
    for (Index c = 0; c < k; ++c) {
      const Index idx = rem % q;
      rem /= q;
      H(g, c) = rule.nodes(idx);
      w *= rule.weights(idx);
    }
    hw(g) = w;
  }
  const Matrix noise = H * L.transpose();

  ChannelMoments cm;
  cm.mean_outer = Matrix::Zero(k, k);
  cm.mean_outer_se = Matrix::Zero(k, k);
  cm.nodes = nodes;
  for (Index j = 0; j < prior.size(); ++j) {
    if (prior.weights(j) <= 0.0) continue;
    const Vector signal = params.M * prior.atoms.row(j).transpose();
    Matrix X = noise;
    X.rowwise() += signal.transpose();
    const Denoised den = denoise_matrix(X, params, prior);
    const Matrix weighted = hw.asDiagonal() * den.mean;
    cm.mean_outer += prior.weights(j) * (den.mean.transpose() * weighted);
    const Matrix err = den.mean.rowwise() - prior.atoms.row(j);
    cm.mmse += prior.weights(j) * (hw.array() * err.rowwise().squaredNorm().array()).sum();
  }
  cm.mean_outer = 0.5 * (cm.mean_outer + cm.mean_outer.transpose());
  return cm;
}

ChannelMoments adaptive_quadrature(const DiscretePrior& prior, const CompoundParams& params,
                                   const MmseOptions& opt) {
  int nodes = opt.min_nodes;
  ChannelMoments prev = quadrature_moments(prior, params, nodes);
  while (nodes * 2 <= opt.max_nodes) {
    nodes *= 2;
    ChannelMoments next = quadrature_moments(prior, params, nodes);
    const double scale = std::max({next.mean_outer.norm(), std::abs(next.mmse), 1e-300});
    const double change = std::max((next.mean_outer - prev.mean_outer).norm(),
                                   std::abs(next.mmse - prev.mmse));
    prev = std::move(next);
    if (change <= opt.rel_tol * scale) break;
  }
  return prev;
}

ChannelMoments monte_carlo_moments(const Prior& prior, const CompoundParams& params,
                                   const MmseOptions& opt) {
  require(opt.samples >= 2, ErrorKind::kValidation, "Monte Carlo needs at least two samples");
  const Index k = params.dim();
  Rng rng = make_stream(opt.seed, streams::kMonteCarlo);
  GaussianChannel ch(params);
  Eigen::LLT<Matrix> llt(ch.sigma());
  const Matrix L = llt.matrixL();

  // Running sums of each entry of theta theta^T and of the squared error,
  // plus their squares for standard errors.
  Matrix sum = Matrix::Zero(k, k), sum_sq = Matrix::Zero(k, k);
  double err_sum = 0.0, err_sq = 0.0;
  const Index block = 100000;
  for (Index done = 0; done < opt.samples; done += block) {
    const Index b = std::min(block, opt.samples - done);
    Matrix theta(b, k);
    if (const auto* g = std::get_if<GaussianPrior>(&prior)) {
      Matrix z(k, b);
      fill_normal(rng, z.data(), z.size());
      theta = (psd_sqrt(g->cov) * z).transpose();
    } else {
      const auto& dp = std::get<DiscretePrior>(prior);
      std::discrete_distribution<Index> pick(dp.weights.data(), dp.weights.data() + dp.size());
      for (Index i = 0; i < b; ++i) theta.row(i) = dp.atoms.row(pick(rng));
    }
    Matrix z(k, b);
    fill_normal(rng, z.data(), z.size());
    const Matrix X = theta * params.M.transpose() + (L * z).transpose();
    const Denoised den = denoise_matrix(X, params, prior);
    for (Index i = 0; i < b; ++i) {
      const Matrix outer = den.mean.row(i).transpose() * den.mean.row(i);
      sum += outer;
      sum_sq += outer.cwiseProduct(outer);
      const double e = (den.mean.row(i) - theta.row(i)).squaredNorm();
      err_sum += e;
      err_sq += e * e;
    }
  }
  const double N = static_cast<double>(opt.samples);
  ChannelMoments cm;
  cm.monte_carlo = true;
  cm.mean_outer = sum / N;
  const Matrix var = (sum_sq / N - cm.mean_outer.cwiseProduct(cm.mean_outer)).cwiseMax(0.0);
  cm.mean_outer_se = (var * (N / (N - 1.0)) / N).cwiseSqrt();
  cm.mmse = err_sum / N;
  cm.mmse_se = std::sqrt(std::max(err_sq / N - cm.mmse * cm.mmse, 0.0) * (N / (N - 1.0)) / N);
  return cm;
}

bool quadrature_feasible(const DiscretePrior& prior, const MmseOptions& opt) {
  if (prior.dim() == 1) return true;
  if (prior.dim() != 2) return false;
  const double m = static_cast<double>(prior.size());
  const double pts = static_cast<double>(opt.min_nodes) * opt.min_nodes;
  return m * m * pts <= 5e8;
}

}  // namespace

ChannelMoments channel_moments(const Prior& prior, const CompoundParams& params,
                               const MmseOptions& options) {
  require(prior_dim(prior) == params.dim(), ErrorKind::kDimension,
          "prior and channel dimensions differ");
  params.validate();
  if (const auto* g = std::get_if<GaussianPrior>(&prior)) {
    if (options.method != MmseMethod::kMonteCarlo) return gaussian_moments(*g, params);
    return monte_carlo_moments(prior, params, options);
  }
  const auto& dp = std::get<DiscretePrior>(prior);
  dp.validate();
  switch (options.method) {
    case MmseMethod::kQuadrature:
      return adaptive_quadrature(dp, params, options);
    case MmseMethod::kMonteCarlo:
      return monte_carlo_moments(prior, params, options);
    case MmseMethod::kAuto:
      break;
  }
  if (quadrature_feasible(dp, options)) return adaptive_quadrature(dp, params, options);
  return monte_carlo_moments(prior, params, options);
}

MmseResult mmse(const Prior& prior, const CompoundParams& params, const MmseOptions& options) {
  if (options.method == MmseMethod::kQuadrature && params.dim() != 1) {
    fail(ErrorKind::kUnsupported, "quadrature mmse is available for k = 1 only");
  }
  const ChannelMoments cm = channel_moments(prior, params, options);
  return {cm.mmse, cm.mmse_se};
}

MmseResult mmse(const PriorSpec& prior, const CompoundParams& params, const MmseOptions& options) {
  return mmse(prior_from_spec(prior), params, options);
}

}  // namespace ebpca
