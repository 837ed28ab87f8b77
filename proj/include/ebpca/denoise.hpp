#pragma once

// Posterior-mean denoising for X | Theta ~ N(M Theta, Sigma) under a discrete
// prior (or a Gaussian one, where everything is linear), its Jacobian, and
// Bayes risk evaluation.

#include "ebpca/common.hpp"
#include "ebpca/npmle.hpp"
#include "ebpca/spiked_model.hpp"

#include <variant>

namespace ebpca {

/// Centered Gaussian prior N(0, cov); kept in closed form.
struct GaussianPrior {
  Matrix cov;
};

using Prior = std::variant<DiscretePrior, GaussianPrior>;

Index prior_dim(const Prior& prior);
Matrix prior_second_moment(const Prior& prior);

/// Gaussian kinds map to GaussianPrior, everything else to a DiscretePrior
/// (exact or discretized, see discretize()).
Prior prior_from_spec(const PriorSpec& spec, Index resolution = 0);

/// Law of D Theta for Theta ~ prior.
Prior transform_prior(const Prior& prior, const Matrix& D);

/// E[Theta | X = x], responsibility form with log-sum-exp weights.
Vector posterior_mean(const Vector& x, const CompoundParams& params, const DiscretePrior& prior);

/// Same quantity through Tweedie's formula M^{-1}(x + Sigma grad log f(x)),
/// computed independently of posterior_mean (kept as a cross-check).
Vector tweedie_posterior_mean(const Vector& x, const CompoundParams& params,
                              const DiscretePrior& prior);

/// J_ab = d theta_a / d x_b = (Cov[Theta | x] M^T Sigma^{-1})_ab.
Matrix posterior_jacobian(const Vector& x, const CompoundParams& params,
                          const DiscretePrior& prior);

struct Denoised {
  Matrix mean;                // n x k, row-wise posterior means
  Matrix avg_jacobian;        // k x k, mean over rows
  Matrix avg_second_moment;   // k x k, mean over rows of E[Theta Theta^T | x_i]
};

Denoised denoise_matrix(const Matrix& X, const CompoundParams& params, const DiscretePrior& prior);
Denoised denoise_matrix(const Matrix& X, const CompoundParams& params, const GaussianPrior& prior);
Denoised denoise_matrix(const Matrix& X, const CompoundParams& params, const Prior& prior);

enum class MmseMethod { kAuto, kQuadrature, kMonteCarlo };

struct MmseOptions {
  MmseMethod method = MmseMethod::kAuto;
  Index samples = 1000000;
  std::uint64_t seed = 0;
  int min_nodes = 64;     // Gauss–Hermite nodes per dimension, doubled
  int max_nodes = 1024;   // until the relative change is below rel_tol
  double rel_tol = 1e-9;
};

/// Channel expectations used by the Bayes risk and by state evolution.
struct ChannelMoments {
  Matrix mean_outer;  // E[theta(X) theta(X)^T]
  double mmse = 0.0;  // E|Theta - theta(X)|^2
  Matrix mean_outer_se;  // Monte Carlo standard errors (zero for quadrature)
  double mmse_se = 0.0;
  bool monte_carlo = false;
  int nodes = 0;
};

ChannelMoments channel_moments(const Prior& prior, const CompoundParams& params,
                               const MmseOptions& options = {});

struct MmseResult {
  double value = 0.0;
  double std_error = 0.0;
};

/// Bayes risk E|Theta - E[Theta|X]|^2. Quadrature is offered for k = 1 only.
MmseResult mmse(const Prior& prior, const CompoundParams& params, const MmseOptions& options = {});
MmseResult mmse(const PriorSpec& prior, const CompoundParams& params, const MmseOptions& options = {});

}  // namespace ebpca
