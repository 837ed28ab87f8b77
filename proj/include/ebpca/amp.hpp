#pragma once

// EB-PCA (AMP with NPMLE-based posterior-mean denoisers and Onsager
// corrections), the oracle Bayes AMP baseline that uses the true priors and
// state evolution, and rank-one naive mean-field VB.

#include "ebpca/denoise.hpp"
#include "ebpca/npmle.hpp"
#include "ebpca/rmt.hpp"
#include "ebpca/spiked_model.hpp"
#include "ebpca/state_evolution.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ebpca {

struct Truth {
  Matrix U;  // n x k
  Matrix V;  // d x k
};

/// Accuracy of an estimate against ground truth. Alignments are reported as
/// absolute values since PC signs are not identified.
struct Accuracy {
  Vector alignment;        // |<est_i, true_i>| / (|est_i| |true_i|)
  Vector pc_distance;      // per-column subspace distance, sqrt(1 - a^2)
  double joint_distance = 0.0;   // subspace_distance over all k columns
  double joint_projector = 0.0;  // projector_distance over all k columns
  Vector pc_projector;     // per-column projector distance
};

/// NaN entries where an estimate column is zero or rank-deficient.
Accuracy accuracy(const Matrix& est, const Matrix& truth);

struct AmpOptions {
  int iters = 10;               // T; the loop runs t = 0..T
  Index support_cap = 2000;
  NpmleOptions npmle;
  std::uint64_t seed = 0;       // support subsampling stream
  bool marginal = false;        // product of per-PC priors instead of a joint prior
  std::optional<Truth> truth;   // enables per-iteration accuracy in the history
  SvdOptions svd;
};

struct IterationRecord {
  int t = 0;
  CompoundParams right;  // (M_t, Sigma_t) used to denoise G^t
  CompoundParams left;   // (Mbar_t, Sigmabar_t) used to denoise F^t
  Matrix B;              // <d theta> on the right side
  Matrix Bbar;           // <d theta> on the left side
  bool npmle_converged = true;
  double loglik_v = 0.0;  // NPMLE mean log-likelihood (sum over marginal fits)
  double loglik_u = 0.0;
  Index atoms_v = 0;
  Index atoms_u = 0;
  std::optional<Accuracy> acc_u;  // of U^t
  std::optional<Accuracy> acc_v;  // of V^t
};

struct AMPState {
  int t = 0;
  double gamma = 1.0;
  Matrix G;       // G^t, d x k
  Matrix F;       // F^t, n x k
  Matrix V;       // V^t
  Matrix U;       // U^t
  Matrix U_prev;  // U^{t-1}
  CompoundParams right;  // (M_t, Sigma_t)
  CompoundParams left;   // (Mbar_t, Sigmabar_t)
  Matrix B, Bbar;
  Matrix S_hat;          // diagonal, fixed after initialization
  std::vector<DiscretePrior> priors_v;  // one joint prior, or one per PC
  std::vector<DiscretePrior> priors_u;
  std::vector<Index> kept;              // indices of retained sample PCs
  std::vector<std::string> warnings;
  bool degenerate = false;
};

struct EBPCAResult {
  Matrix U;       // n x k
  Matrix V;       // d x k
  Matrix S_hat;
  double tau_hat = 1.0;
  Vector lambda;  // of the normalized data, retained components
  Matrix F_pca;   // sample PCs the run started from
  Matrix G_pca;
  std::vector<IterationRecord> history;
  std::vector<std::string> warnings;
  std::vector<Index> kept;
  bool degenerate = false;

  Index k() const { return U.cols(); }
};

/// Initialization from the sample PCs of normalized Y. Components whose
/// singular value does not clear the noise edge are dropped with a warning;
/// throws kNothingToDenoise when none remain.
AMPState initialize(const Matrix& Y, const SampleSpectrum& spectrum);
AMPState initialize(const Matrix& Y, Index k, const SvdOptions& svd = {});

/// One t of the EB-PCA loop (denoise V, then U). Appends to `record` if given.
void ebpca_step(AMPState& state, const Matrix& Y, const AmpOptions& options, Rng& support_rng,
                IterationRecord* record = nullptr);

/// normalize -> initialize -> t = 0..T.
EBPCAResult run_ebpca(const Matrix& Y_obs, Index k, const AmpOptions& options = {});

/// Same, for already-normalized data with its spectrum (tau_hat is carried
/// through to the result only).
EBPCAResult run_ebpca_normalized(const Matrix& Y, const SampleSpectrum& spectrum, double tau_hat,
                                 const AmpOptions& options = {});

struct InitialEstimates {
  Matrix U;  // theta(F | Mbar, Sigmabar, NPMLE on F)
  Matrix V;  // theta(G | M, Sigma, NPMLE on G)
};

/// Empirical Bayes denoising of the sample PCs alone, with the PCA-limit
/// channel parameters on each side. V matches V^0 of the AMP loop exactly.
InitialEstimates initial_eb_estimates(const Matrix& Y, const SampleSpectrum& spectrum,
                                      const AmpOptions& options = {});

/// Bayes AMP with the true priors and state parameters from state evolution.
/// prior_u / prior_v are the laws of the rows of U / V.
EBPCAResult run_oracle_bayes_amp(const Matrix& Y, Index k, int T, const Prior& prior_u,
                                 const Prior& prior_v, const std::vector<double>& signals,
                                 const AmpOptions& options = {});

/// Rank-one naive mean-field VB (CAVI) with NPMLE priors and s = s_hat.
EBPCAResult run_mean_field_vb(const Matrix& Y_obs, int T, const AmpOptions& options = {});

}  // namespace ebpca
