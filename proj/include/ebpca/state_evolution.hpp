#pragma once

// Deterministic state evolution for the Bayes AMP iteration: the (M, Sigma)
// recursion, the equivalent SNR-matrix (Q) recursion, its fixed point and
// the predicted matrix risk.

#include "ebpca/denoise.hpp"

#include <vector>

namespace ebpca {

/// PCA limits as channel parameters: Sigma_0 = diag(sigma*^2), M_0 = diag(mu*)
/// (right-PC side). Throws kSubcritical for any s <= gamma^{-1/4}.
CompoundParams se_init(const std::vector<double>& signals, double gamma);

/// Q_{*,0} = diag((1/s)(gamma s^4 - 1)/(gamma s^2 + 1)).
Matrix se_initial_q(const std::vector<double>& signals, double gamma);

enum class SESide {
  kRight,  // denoise V: Sigmabar = gamma E[v v^T]
  kLeft,   // denoise U: Sigma    = E[u u^T]
};

struct SEStepResult {
  CompoundParams next;  // M = Sigma S
  Matrix sigma_se;      // Monte Carlo standard errors of Sigma (zero for quadrature)
  double mmse = 0.0;    // Bayes risk of the denoiser applied in this step
};

SEStepResult se_step(const CompoundParams& current, const Prior& prior, const Matrix& S,
                     double gamma, SESide side, const MmseOptions& options = {});

/// F_pi(Q) = E[E[Theta|X] E[Theta|X]^T] with X = Theta + Q^{-1/2} Z. Evaluated
/// in the equivalent form X' = Q^{1/2} Theta + Z, which stays defined for
/// singular Q.
struct QMapResult {
  Matrix value;
  Matrix std_error;
};
QMapResult q_map(const Prior& prior, const Matrix& Q, const MmseOptions& options = {});

struct SETrajectory {
  std::vector<CompoundParams> right;  // (M_t, Sigma_t), t = 0..T
  std::vector<CompoundParams> left;   // (Mbar_t, Sigmabar_t), t = 0..T
  std::vector<Matrix> Q;              // S^{1/2} Sigma_t S^{1/2}
  std::vector<Matrix> Qbar;           // gamma^{-1} S^{1/2} Sigmabar_t S^{1/2}
  std::vector<double> mmse_v;         // mmse(pi | M_t, Sigma_t)
  std::vector<double> mmse_u;         // mmse(pibar | Mbar_t, Sigmabar_t)
};

/// T+1 rounds of the (M, Sigma) recursion from se_init. prior_v is the law
/// of the rows of V, prior_u that of U.
SETrajectory se_trajectory(const Prior& prior_v, const Prior& prior_u,
                           const std::vector<double>& signals, double gamma, int T,
                           const MmseOptions& options = {});

struct SEOptions {
  double tol = 1e-8;  // Frobenius change in Q
  int max_iter = 200;
  MmseOptions expectation;
};

struct SEFixedPoint {
  Matrix Q;
  Matrix Qbar;
  std::vector<Matrix> Q_seq;     // Q_0, Q_1, ...
  std::vector<Matrix> Qbar_seq;  // Qbar_0, Qbar_1, ...
  std::vector<Matrix> Q_se;      // standard errors per entry (zero unless Monte Carlo)
  std::vector<Matrix> Qbar_se;
  std::vector<double> mmse_v;    // per t: Tr E[VV^T] - Tr S^{-1} Qbar_t
  std::vector<double> mmse_u;    // per t: Tr E[UU^T] - Tr S^{-1} Q_{t+1}
  int iterations = 0;
  bool converged = false;
};

SEFixedPoint se_fixed_point(const Prior& prior_v, const Prior& prior_u,
                            const std::vector<double>& signals, double gamma,
                            const SEOptions& options = {});

/// Tr E[U U^T S V V^T S] - Tr(Qbar Q).
double bayes_matrix_risk(const Matrix& Qbar, const Matrix& Q, const Prior& prior_u,
                         const Prior& prior_v, const Matrix& S);

}  // namespace ebpca
