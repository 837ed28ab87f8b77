#pragma once

// Kiefer–Wolfowitz NPMLE over a discrete exemplar support for the Gaussian
// compound decision channel X | Theta ~ N(M Theta, Sigma).

#include "ebpca/common.hpp"

#include <optional>
#include <vector>

namespace ebpca {

/// Discrete prior sum_j w_j delta_{z_j}; atoms are rows of `atoms`.
struct DiscretePrior {
  Matrix atoms;    // m x k
  Vector weights;  // m, on the simplex

  Index size() const { return atoms.rows(); }
  Index dim() const { return atoms.cols(); }

  /// Throws kValidation unless weights are a simplex vector (1e-10) and atoms
  /// finite.
  void validate() const;

  Vector mean() const;
  Matrix second_moment() const;

  static DiscretePrior point_mass(const Vector& at);
};

/// Channel parameters (M, Sigma).
struct CompoundParams {
  Matrix M;
  Matrix Sigma;

  Index dim() const { return M.rows(); }

  /// Sigma after symmetrization and the eigenvalue floor
  /// 1e-8 * trace(Sigma) / k (absolute 1e-8 when the trace vanishes).
  Matrix regularized_sigma() const;
  double condition_number() const;
  void validate() const;

  static CompoundParams scalar(double mu, double sigma2);
};

/// Precomputed whitening for log phi_Sigma(x - M z): a Cholesky factor of the
/// regularized Sigma and the Gaussian normalizer.
class GaussianChannel {
 public:
  explicit GaussianChannel(const CompoundParams& params);

  Index dim() const { return M_.rows(); }
  const Matrix& M() const { return M_; }
  const Matrix& sigma() const { return sigma_; }
  const Matrix& sigma_inverse() const { return sigma_inv_; }
  double log_normalizer() const { return log_norm_; }

  /// Rows of X mapped by L^{-1}, with L L^T = Sigma.
  Matrix whiten(const Matrix& X) const;
  /// Rows of atoms mapped by L^{-1} M.
  Matrix whiten_atoms(const Matrix& atoms) const;

  /// n x m matrix of log phi_Sigma(x_i - M z_j).
  Matrix log_kernel(const Matrix& X, const Matrix& atoms) const;

 private:
  Matrix M_;
  Matrix sigma_;
  Matrix sigma_inv_;
  Matrix chol_lower_;
  Matrix whiten_M_;  // L^{-1} M
  double log_norm_ = 0.0;
};

struct NpmleReport {
  std::vector<double> log_likelihood;  // mean log-density, one entry per iterate
  int iterations = 0;
  bool converged = false;
  double optimality_gap = 0.0;  // max_j gradient_j - 1 at the returned weights
  Index support_candidates = 0;  // atoms offered to the solver
  Index support_before_cap = 0;  // rows available before subsampling
  Index support_after_prune = 0;

  double final_log_likelihood() const {
    return log_likelihood.empty() ? 0.0 : log_likelihood.back();
  }
};

enum class NpmleSolver {
  /// Multiplicative fixed-point (EM) updates from uniform weights.
  kEm,
  /// Active-set constrained Newton: vertex additions from the gradient plus
  /// a nonnegative least-squares Newton step with Armijo backtracking.
  kActiveSetNewton,
};

struct NpmleOptions {
  double tol = 1e-7;
  int max_iter = 500;
  NpmleSolver solver = NpmleSolver::kActiveSetNewton;
  double prune_below = 1e-12;
};

/// Exemplar support: rows of X M^{-T} (i.e. z_i = M^{-1} x_i), uniformly
/// subsampled to `cap` rows when X has more. Row order is preserved.
Matrix build_support(const Matrix& X, const CompoundParams& params, Index cap,
                     Rng& rng, Index* rows_before_cap = nullptr);

/// (1/n) sum_i log sum_j w_j phi_Sigma(x_i - M z_j).
double log_marginal_likelihood(const Matrix& X, const CompoundParams& params,
                               const DiscretePrior& prior);

struct NpmleFit {
  DiscretePrior prior;
  NpmleReport report;
};

/// Maximizes the marginal likelihood over simplex weights on fixed atoms.
/// Non-convergence is reported through `report.converged`, not thrown.
NpmleFit fit_weights(const Matrix& X, const CompoundParams& params,
                     const Matrix& atoms, const NpmleOptions& options = {});

/// build_support followed by fit_weights.
NpmleFit fit_npmle(const Matrix& X, const CompoundParams& params, Index cap,
                   Rng& rng, const NpmleOptions& options = {});

/// Mixture gradient d_j = (1/n) sum_i phi_ij / f_i for every atom; the
/// optimality certificate is max_j d_j - 1 <= tol.
Vector mixture_gradient(const Matrix& X, const CompoundParams& params,
                        const DiscretePrior& prior);

}  // namespace ebpca
