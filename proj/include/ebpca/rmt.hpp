#pragma once

// Spectral front end: noise normalization, top-k SVD with fixed scaling and
// sign conventions, signal-strength estimation and the closed-form limits for
// spiked models with white noise.

#include "ebpca/common.hpp"

#include <utility>

namespace ebpca {

struct SampleSpectrum {
  Matrix F;       // n x k, columns of squared norm n
  Matrix G;       // d x k, columns of squared norm d
  Vector lambda;  // raw singular values are sqrt(gamma) * lambda
  double gamma = 1.0;
  double next_singular_value = 0.0;  // (k+1)-th raw singular value (estimate)

  Index k() const { return lambda.size(); }
};

struct SvdOptions {
  Index dense_threshold = 400;  // min(n, d) at or below this uses a dense SVD
  int max_lanczos_steps = 600;
  double tol = 1e-12;           // residual tolerance relative to sigma_1
  bool check_gap = true;        // reject lambda_k == lambda_{k+1} within 1e-10
};

/// Top-k singular triplets of Y, scaled and signed per SampleSpectrum: each
/// g_i has its largest-magnitude coordinate positive and f_i^T Y g_i > 0.
SampleSpectrum top_k_svd(const Matrix& Y, Index k, const SvdOptions& options = {});

/// All singular values of Y, descending.
Vector singular_values(const Matrix& Y);

struct Normalized {
  Matrix Y;      // Y_obs / (tau_hat sqrt(n))
  double tau_hat = 0.0;
  SampleSpectrum spectrum;  // of the normalized Y
};

/// tau_hat^2 = |Y_obs - best rank-k approx|_F^2 / (n d).
Normalized normalize(const Matrix& Y_obs, Index k, const SvdOptions& options = {});

/// Limit of the raw i-th sample singular value, sqrt(gamma) * lambda_i.
double spike_singular_limit(double s, double gamma);

/// Inverse of spike_singular_limit in lambda units (lambda = raw / sqrt(gamma)).
double estimate_signal(double lambda, double gamma);

struct RMTPrediction {
  double sqrt_gamma_lambda_limit = 0.0;
  double mu_star = 0.0;          // right PC: d^{-1} g^T v
  double sigma_star_sq = 0.0;
  double mu_bar_star = 0.0;      // left PC: n^{-1} f^T u
  double sigma_bar_star_sq = 0.0;
};

RMTPrediction predict_observables(double s, double gamma);

/// s_c = gamma^{-1/4}.
double critical_signal(double gamma);

/// Limits of the noise singular-value bulk, (|1 - sqrt g|, 1 + sqrt g).
std::pair<double, double> bulk_edges(double gamma);

/// Density of the nonzero noise singular values (square-root Marcenko–Pastur
/// law), normalized to integrate to one over the bulk for every gamma.
double mp_singular_density(double x, double gamma);
double mp_singular_cdf(double x, double gamma);

/// Outlier cut for the normalized top singular value of an n x d noise
/// matrix: lambda_+ plus three Tracy–Widom scale units.
double outlier_threshold(Index n, Index d);

}  // namespace ebpca
