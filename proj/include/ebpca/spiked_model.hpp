#pragma once

// Rank-k spiked model Y = (1/n) U S V^T + W, prior specifications and
// accuracy metrics against ground truth.

#include "ebpca/common.hpp"
#include "ebpca/npmle.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ebpca {

enum class PriorKind {
  kGaussian,
  kUniform,       // Uniform[-sqrt3, sqrt3] per coordinate
  kTwoPoint,      // +-1 per coordinate
  kPointNormal,   // (1 - eps) delta_0 + eps N(0, spike_variance) per coordinate
  kCircle,        // uniform on the circle of radius sqrt2 (k = 2)
  kThreePoint,    // discrete mixture in R^2
  kCustom,        // arbitrary discrete prior
};

struct PriorSpec {
  PriorKind kind = PriorKind::kGaussian;
  Index dim = 1;
  double sparsity = 0.1;        // eps, kPointNormal only
  double spike_variance = 0.0;  // <= 0 means 1/eps (unit overall variance)
  Matrix atoms;                 // kThreePoint / kCustom
  Vector weights;

  static PriorSpec gaussian(Index k = 1);
  static PriorSpec uniform(Index k = 1);
  static PriorSpec two_point(Index k = 1);
  static PriorSpec point_normal(double eps = 0.1, Index k = 1);
  static PriorSpec circle();
  /// Equal-weight equilateral triangle of radius sqrt2 with a vertex on the
  /// positive second axis: mean zero, identity covariance.
  static PriorSpec three_point();
  static PriorSpec custom(Matrix atoms, Vector weights);

  /// Parses "gaussian", "uniform", "two_point", "point_normal[:eps]",
  /// "circle", "three_point"; `k` applies to the coordinatewise kinds.
  static PriorSpec parse(const std::string& text, Index k);
  std::string name() const;

  double effective_spike_variance() const;
  bool is_discrete() const;
  void validate() const;
};

/// count x k matrix of i.i.d. rows.
Matrix sample_prior(const PriorSpec& spec, Index count, Rng& rng);

/// Discrete stand-in for a prior: exact for discrete kinds, otherwise a
/// deterministic grid/angle discretization with roughly `resolution` points
/// per dimension (moments matched to the continuous law).
DiscretePrior discretize(const PriorSpec& spec, Index resolution = 0);

struct SpikedConfig {
  Index n = 0;
  Index d = 0;
  std::vector<double> signals;  // strictly decreasing, > 0
  std::uint64_t seed = 0;

  Index k() const { return static_cast<Index>(signals.size()); }
  double gamma() const { return static_cast<double>(d) / static_cast<double>(n); }
  void validate() const;
  /// Indices of s_i <= gamma^{-1/4}.
  std::vector<Index> subcritical() const;
};

struct SpikedInstance {
  Matrix Y;
  Matrix U;
  Matrix V;
  Matrix S;  // diagonal
  std::optional<Matrix> W;

  double gamma() const { return static_cast<double>(Y.cols()) / static_cast<double>(Y.rows()); }
};

/// Bit-reproducible for a fixed config.seed. U, V and W draw from separate
/// streams derived from the seed.
SpikedInstance generate_instance(const SpikedConfig& config, const PriorSpec& prior_u,
                                 const PriorSpec& prior_v, bool retain_noise = false);

/// <a, b> / (|a| |b|).
double alignment(const Vector& a, const Vector& b);

/// |P_true^perp P_est|_F / sqrt(k).
double subspace_distance(const Matrix& est, const Matrix& truth);

/// |P_est - P_true|_F / sqrt(k); equals sqrt2 * subspace_distance for equal
/// ranks. This is the scale used in the usual bivariate error tables.
double projector_distance(const Matrix& est, const Matrix& truth);

}  // namespace ebpca
