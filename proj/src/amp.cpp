#include "ebpca/amp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ebpca {

namespace {

constexpr double kDegenerateTrace = 1e-10;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

Matrix diag_matrix(const Vector& v) { return v.asDiagonal(); }

// PCA-limit channel parameters at signal s_hat: right (G) and left (F) sides.
void pca_channels(const Vector& s_hat, double gamma, CompoundParams& right, CompoundParams& left) {
  const Index k = s_hat.size();
  right.M = Matrix::Zero(k, k);
  right.Sigma = Matrix::Zero(k, k);
  left.M = Matrix::Zero(k, k);
  left.Sigma = Matrix::Zero(k, k);
  for (Index i = 0; i < k; ++i) {
    const RMTPrediction p = predict_observables(s_hat(i), gamma);
    right.M(i, i) = p.mu_star;
    right.Sigma(i, i) = p.sigma_star_sq;
    left.M(i, i) = p.mu_bar_star;
    left.Sigma(i, i) = p.sigma_bar_star_sq;
  }
}

struct SideFit {
  Denoised den;
  std::vector<DiscretePrior> priors;
  bool converged = true;
  double loglik = 0.0;
  Index atoms = 0;
};

// Product of per-coordinate priors. Kept bounded: beyond kMaxProductAtoms
// only the heaviest atoms survive (renormalized).
constexpr Index kMaxProductAtoms = 50000;

DiscretePrior product_prior(const std::vector<DiscretePrior>& parts) {
  DiscretePrior out;
  out.atoms = Matrix::Zero(1, 0);
  out.weights = Vector::Ones(1);
  for (const DiscretePrior& p : parts) {
    const Index m0 = out.size(), m1 = p.size(), k0 = out.atoms.cols();
    Matrix atoms(m0 * m1, k0 + 1);
    Vector w(m0 * m1);
    for (Index a = 0; a < m0; ++a) {
      for (Index b = 0; b < m1; ++b) {
        const Index r = a * m1 + b;
        atoms.row(r).head(k0) = out.atoms.row(a);
        atoms(r, k0) = p.atoms(b, 0);
        w(r) = out.weights(a) * p.weights(b);
      }
    }
    out.atoms = std::move(atoms);
    out.weights = std::move(w);
  }
  std::vector<Index> keep;
  for (Index j = 0; j < out.size(); ++j) if (out.weights(j) >= 1e-12) keep.push_back(j);
  if (static_cast<Index>(keep.size()) > kMaxProductAtoms) {
    std::stable_sort(keep.begin(), keep.end(),
                     [&](Index a, Index b) { return out.weights(a) > out.weights(b); });
    keep.resize(static_cast<std::size_t>(kMaxProductAtoms));
    std::sort(keep.begin(), keep.end());
  }
  DiscretePrior pruned;
  pruned.atoms.resize(static_cast<Index>(keep.size()), out.atoms.cols());
  pruned.weights.resize(static_cast<Index>(keep.size()));
  for (std::size_t r = 0; r < keep.size(); ++r) {
    pruned.atoms.row(static_cast<Index>(r)) = out.atoms.row(keep[r]);
    pruned.weights(static_cast<Index>(r)) = out.weights(keep[r]);
  }
  pruned.weights /= pruned.weights.sum();
  return pruned;
}

// NPMLE + posterior mean on one side. Joint mode fits one k-dimensional
// prior. Marginal mode fits a univariate prior per column (diagonal of
// (M, Sigma)) and denoises with their product through the full channel, so
// cross-PC leakage in M is still accounted for.
SideFit eb_denoise(const Matrix& X, const CompoundParams& params, const AmpOptions& opt,
                   Rng& rng) {
  SideFit out;
  const Index k = X.cols();
  if (!opt.marginal || k == 1) {
    NpmleFit fit = fit_npmle(X, params, opt.support_cap, rng, opt.npmle);
    out.den = denoise_matrix(X, params, fit.prior);
    out.converged = fit.report.converged;
    out.loglik = fit.report.final_log_likelihood();
    out.atoms = fit.prior.size();
    out.priors.push_back(std::move(fit.prior));
    return out;
  }
  for (Index i = 0; i < k; ++i) {
    const CompoundParams p = CompoundParams::scalar(params.M(i, i), params.Sigma(i, i));
    const Matrix col = X.col(i);
    NpmleFit fit = fit_npmle(col, p, opt.support_cap, rng, opt.npmle);
    out.converged = out.converged && fit.report.converged;
    out.loglik += fit.report.final_log_likelihood();
    out.atoms += fit.prior.size();
    out.priors.push_back(std::move(fit.prior));
  }
  out.den = denoise_matrix(X, params, product_prior(out.priors));
  return out;
}

bool degenerate_sigma(const Matrix& sigma) { return !(sigma.trace() >= kDegenerateTrace); }

std::optional<Accuracy> maybe_accuracy(const Matrix& est, const std::optional<Truth>& truth,
                                       bool left) {
  if (!truth) return std::nullopt;
  const Matrix& ref = left ? truth->U : truth->V;
  if (ref.rows() != est.rows()) return std::nullopt;
  // Truth may carry dropped components; compare the leading columns.
  if (ref.cols() < est.cols()) return std::nullopt;
  return accuracy(est, ref.leftCols(est.cols()));
}

void align_to_truth(Matrix& F, Matrix& G, const std::optional<Truth>& truth) {
  if (!truth) return;
  for (Index i = 0; i < G.cols() && i < truth->V.cols(); ++i) {
    if (G.col(i).dot(truth->V.col(i)) < 0.0) {
      G.col(i) *= -1.0;
      F.col(i) *= -1.0;
    }
  }
}

EBPCAResult finish(const AMPState& st, double tau_hat, const Vector& lambda, const Matrix& F,
                   const Matrix& G, std::vector<IterationRecord> history, const Matrix& U,
                   const Matrix& V) {
  EBPCAResult r;
  r.U = U;
  r.V = V;
  r.S_hat = st.S_hat;
  r.tau_hat = tau_hat;
  r.lambda = lambda;
  r.F_pca = F;
  r.G_pca = G;
  r.history = std::move(history);
  r.warnings = st.warnings;
  r.kept = st.kept;
  r.degenerate = st.degenerate;
  return r;
}

}  // namespace

Accuracy accuracy(const Matrix& est, const Matrix& truth) {
  require(est.rows() == truth.rows() && est.cols() == truth.cols(), ErrorKind::kDimension,
          "estimate and truth shapes differ");
  const Index k = est.cols();
  Accuracy a;
  a.alignment.resize(k);
  a.pc_distance.resize(k);
  a.pc_projector.resize(k);
  for (Index i = 0; i < k; ++i) {
    try {
      const double al = std::abs(alignment(est.col(i), truth.col(i)));
      a.alignment(i) = al;
      a.pc_distance(i) = std::sqrt(std::max(0.0, 1.0 - al * al));
      a.pc_projector(i) = std::sqrt(2.0) * a.pc_distance(i);
    } catch (const Error&) {
      a.alignment(i) = a.pc_distance(i) = a.pc_projector(i) = kNaN;
    }
  }
  try {
    a.joint_distance = subspace_distance(est, truth);
    a.joint_projector = projector_distance(est, truth);
  } catch (const Error&) {
    a.joint_distance = a.joint_projector = kNaN;
  }
  return a;
}

// ---------------------------------------------------------------------------
// Initialization

AMPState initialize(const Matrix& Y, const SampleSpectrum& spectrum) {
  const Index n = Y.rows(), d = Y.cols();
  require(spectrum.F.rows() == n && spectrum.G.rows() == d, ErrorKind::kDimension,
          "spectrum does not match Y");
  AMPState st;
  st.gamma = spectrum.gamma;
  const double sg = std::sqrt(st.gamma);
  const double edge = std::max(bulk_edges(st.gamma).second, outlier_threshold(n, d));

  std::vector<double> s_hat;
  for (Index i = 0; i < spectrum.k(); ++i) {
    const double raw = sg * spectrum.lambda(i);
    bool keep = raw > edge;
    double s = 0.0;
    if (keep) {
      try {
        s = estimate_signal(spectrum.lambda(i), st.gamma);
        keep = s > critical_signal(st.gamma);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kSubcritical) throw;
        keep = false;
      }
    }
    if (!keep) {
      std::ostringstream os;
      os << "component " << (i + 1) << " (singular value " << raw
         << ") does not separate from the noise bulk (edge " << edge << "); dropped";
      st.warnings.push_back(os.str());
      continue;
    }
    st.kept.push_back(i);
    s_hat.push_back(s);
  }
  if (st.kept.empty()) {
    fail(ErrorKind::kNothingToDenoise, "no super-critical components to denoise");
  }
  const Index k = static_cast<Index>(st.kept.size());
  Matrix F(n, k), G(d, k);
  Vector sh(k);
  for (Index c = 0; c < k; ++c) {
    F.col(c) = spectrum.F.col(st.kept[static_cast<std::size_t>(c)]);
    G.col(c) = spectrum.G.col(st.kept[static_cast<std::size_t>(c)]);
    sh(c) = s_hat[static_cast<std::size_t>(c)];
  }
  st.S_hat = diag_matrix(sh);
  pca_channels(sh, st.gamma, st.right, st.left);
  st.G = G;
  st.F = F;
  st.U = F * st.right.Sigma.cwiseSqrt();  // U^{-1} = F Sigma_0^{1/2}
  st.U_prev = st.U;
  st.V = Matrix::Zero(d, k);
  st.B = st.Bbar = Matrix::Zero(k, k);
  st.t = 0;
  return st;
}

AMPState initialize(const Matrix& Y, Index k, const SvdOptions& svd) {
  return initialize(Y, top_k_svd(Y, k, svd));
}

// ---------------------------------------------------------------------------
// EB-PCA

void ebpca_step(AMPState& st, const Matrix& Y, const AmpOptions& opt, Rng& rng,
                IterationRecord* rec) {
  const double n = static_cast<double>(Y.rows());
  if (degenerate_sigma(st.right.Sigma)) {
    st.degenerate = true;
    st.warnings.push_back("degenerate state: Sigma_t vanished at t = " + std::to_string(st.t));
    return;
  }
  IterationRecord local;
  IterationRecord& r = rec ? *rec : local;
  r.t = st.t;
  r.right = st.right;

  // Right PCs.
  SideFit fv = eb_denoise(st.G, st.right, opt, rng);
  const Matrix V = fv.den.mean;
  const Matrix B = fv.den.avg_jacobian;
  const Matrix Fn = Y * V - st.U * (st.gamma * B.transpose());
  CompoundParams left;
  left.Sigma = V.transpose() * V / n;
  left.M = left.Sigma * st.S_hat;
  r.B = B;
  r.left = left;
  r.npmle_converged = fv.converged;
  r.loglik_v = fv.loglik;
  r.atoms_v = fv.atoms;
  r.acc_v = maybe_accuracy(V, opt.truth, false);
  if (!fv.converged) {
    st.warnings.push_back("NPMLE did not reach tolerance (right side, t = " + std::to_string(st.t) + ")");
  }
  if (degenerate_sigma(left.Sigma)) {
    st.degenerate = true;
    st.warnings.push_back("degenerate state: Sigmabar_t vanished at t = " + std::to_string(st.t));
    st.V = V;
    st.B = B;
    return;
  }

  // Left PCs.
  SideFit fu = eb_denoise(Fn, left, opt, rng);
  const Matrix U = fu.den.mean;
  const Matrix Bbar = fu.den.avg_jacobian;
  const Matrix Gn = Y.transpose() * U - V * Bbar.transpose();
  CompoundParams right;
  right.Sigma = U.transpose() * U / n;
  right.M = right.Sigma * st.S_hat;
  r.Bbar = Bbar;
  r.npmle_converged = r.npmle_converged && fu.converged;
  r.loglik_u = fu.loglik;
  r.atoms_u = fu.atoms;
  r.acc_u = maybe_accuracy(U, opt.truth, true);
  if (!fu.converged) {
    st.warnings.push_back("NPMLE did not reach tolerance (left side, t = " + std::to_string(st.t) + ")");
  }

  st.V = V;
  st.F = Fn;
  st.B = B;
  st.Bbar = Bbar;
  st.left = left;
  st.U_prev = st.U;
  st.U = U;
  st.G = Gn;
  st.right = right;
  st.priors_v = std::move(fv.priors);
  st.priors_u = std::move(fu.priors);
  st.t += 1;
}

EBPCAResult run_ebpca_normalized(const Matrix& Y, const SampleSpectrum& spectrum, double tau_hat,
                                 const AmpOptions& opt) {
  require(opt.iters >= 0, ErrorKind::kValidation, "iteration count T must be >= 0");
  AMPState st = initialize(Y, spectrum);
  const Matrix F0 = st.F, G0 = st.G;
  Vector lambda(static_cast<Index>(st.kept.size()));
  for (std::size_t c = 0; c < st.kept.size(); ++c) lambda(static_cast<Index>(c)) = spectrum.lambda(st.kept[c]);

  Rng rng = make_stream(opt.seed, streams::kSupport);
  std::vector<IterationRecord> history;
  // Last complete iterate; zero until the first round finishes.
  Matrix U_good = Matrix::Zero(Y.rows(), st.S_hat.rows());
  Matrix V_good = Matrix::Zero(Y.cols(), st.S_hat.rows());
  for (int t = 0; t <= opt.iters; ++t) {
    IterationRecord rec;
    const int before = st.t;
    try {
      ebpca_step(st, Y, opt, rng, &rec);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kChannel) throw;
      st.degenerate = true;
      st.warnings.push_back(std::string("degenerate state: ") + e.what());
    }
    if (st.t == before) {
      if (history.empty()) {
        // Nothing completed; report whatever the right side produced.
        V_good = st.V;
      }
      break;
    }
    history.push_back(std::move(rec));
    U_good = st.U;
    V_good = st.V;
  }
  return finish(st, tau_hat, lambda, F0, G0, std::move(history), U_good, V_good);
}

EBPCAResult run_ebpca(const Matrix& Y_obs, Index k, const AmpOptions& opt) {
  Normalized nz = normalize(Y_obs, k, opt.svd);
  return run_ebpca_normalized(nz.Y, nz.spectrum, nz.tau_hat, opt);
}

InitialEstimates initial_eb_estimates(const Matrix& Y, const SampleSpectrum& spectrum,
                                      const AmpOptions& opt) {
  AMPState st = initialize(Y, spectrum);
  Rng rng = make_stream(opt.seed, streams::kSupport);
  InitialEstimates out;
  out.V = eb_denoise(st.G, st.right, opt, rng).den.mean;
  out.U = eb_denoise(st.F, st.left, opt, rng).den.mean;
  return out;
}

// ---------------------------------------------------------------------------
// Oracle Bayes AMP

EBPCAResult run_oracle_bayes_amp(const Matrix& Y, Index k, int T, const Prior& prior_u,
                                 const Prior& prior_v, const std::vector<double>& signals,
                                 const AmpOptions& opt) {
  require(T >= 0, ErrorKind::kValidation, "iteration count T must be >= 0");
  require(static_cast<Index>(signals.size()) == k && prior_dim(prior_u) == k &&
              prior_dim(prior_v) == k,
          ErrorKind::kDimension, "oracle priors and signals must have dimension k");
  const double gamma = static_cast<double>(Y.cols()) / static_cast<double>(Y.rows());
  SampleSpectrum sp = top_k_svd(Y, k, opt.svd);
  align_to_truth(sp.F, sp.G, opt.truth);

  const SETrajectory se = se_trajectory(prior_v, prior_u, signals, gamma, T);
  AMPState st;
  st.gamma = gamma;
  st.S_hat = Matrix::Zero(k, k);
  for (Index i = 0; i < k; ++i) st.S_hat(i, i) = signals[static_cast<std::size_t>(i)];
  for (Index i = 0; i < k; ++i) st.kept.push_back(i);
  st.G = sp.G;
  st.F = sp.F;
  st.U = sp.F * se.right[0].Sigma.cwiseSqrt();

  std::vector<IterationRecord> history;
  Matrix U = Matrix::Zero(Y.rows(), k), V = Matrix::Zero(Y.cols(), k);
  for (int t = 0; t <= T; ++t) {
    const CompoundParams& right = se.right[static_cast<std::size_t>(t)];
    const CompoundParams& left = se.left[static_cast<std::size_t>(t)];
    if (degenerate_sigma(right.Sigma) || degenerate_sigma(left.Sigma)) {
      st.degenerate = true;
      st.warnings.push_back("degenerate state-evolution parameters at t = " + std::to_string(t));
      break;
    }
    IterationRecord rec;
    rec.t = t;
    rec.right = right;
    rec.left = left;
    const Denoised dv = denoise_matrix(st.G, right, prior_v);
    const Matrix Fn = Y * dv.mean - st.U * (gamma * dv.avg_jacobian.transpose());
    const Denoised du = denoise_matrix(Fn, left, prior_u);
    const Matrix Gn = Y.transpose() * du.mean - dv.mean * du.avg_jacobian.transpose();
    rec.B = dv.avg_jacobian;
    rec.Bbar = du.avg_jacobian;
    rec.acc_v = maybe_accuracy(dv.mean, opt.truth, false);
    rec.acc_u = maybe_accuracy(du.mean, opt.truth, true);
    history.push_back(std::move(rec));
    st.V = V = dv.mean;
    st.U = U = du.mean;
    st.F = Fn;
    st.G = Gn;
    st.right = right;
    st.left = left;
    st.t = t + 1;
  }
  return finish(st, 1.0, sp.lambda, sp.F, sp.G, std::move(history), U, V);
}

// ---------------------------------------------------------------------------
// Mean-field VB (rank one)

EBPCAResult run_mean_field_vb(const Matrix& Y_obs, int T, const AmpOptions& opt) {
  require(T >= 0, ErrorKind::kValidation, "iteration count T must be >= 0");
  Normalized nz = normalize(Y_obs, 1, opt.svd);
  const Matrix& Y = nz.Y;
  AMPState st = initialize(Y, nz.spectrum);
  require(st.kept.size() == 1, ErrorKind::kUnsupported, "mean-field VB is rank-one only");
  const double gamma = st.gamma;
  const double s = st.S_hat(0, 0);
  const double lambda = nz.spectrum.lambda(0);

  AmpOptions side = opt;
  side.marginal = false;
  Rng rng = make_stream(opt.seed, streams::kSupport);
  // u^{-1} = f / lambda, so that g^0 = Y^T u^{-1} is exactly the sample PC g.
  Matrix u = st.F / lambda;
  double mu = st.right.M(0, 0), sigma2 = st.right.Sigma(0, 0);

  std::vector<IterationRecord> history;
  Matrix U_good = Matrix::Zero(Y.rows(), 1), V_good = Matrix::Zero(Y.cols(), 1);
  for (int t = 0; t <= T; ++t) {
    if (!(sigma2 >= kDegenerateTrace) || !(mu > 0.0)) {
      st.degenerate = true;
      st.warnings.push_back("degenerate state at t = " + std::to_string(t));
      break;
    }
    IterationRecord rec;
    rec.t = t;
    rec.right = CompoundParams::scalar(mu, sigma2);
    const Matrix g = Y.transpose() * u;
    SideFit fv;
    try {
      fv = eb_denoise(g, rec.right, side, rng);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kChannel) throw;
      st.degenerate = true;
      st.warnings.push_back(std::string("degenerate state: ") + e.what());
      break;
    }
    const Matrix v = fv.den.mean;
    const double sbar2 = gamma * fv.den.avg_second_moment(0, 0);
    const double mubar = s * sbar2;
    rec.left = CompoundParams::scalar(mubar, sbar2);
    rec.B = Matrix::Zero(1, 1);
    rec.Bbar = Matrix::Zero(1, 1);
    rec.loglik_v = fv.loglik;
    rec.atoms_v = fv.atoms;
    rec.acc_v = maybe_accuracy(v, opt.truth, false);
    if (!(sbar2 >= kDegenerateTrace) || !(mubar > 0.0)) {
      st.degenerate = true;
      st.warnings.push_back("degenerate state: sigmabar_t vanished at t = " + std::to_string(t));
      if (history.empty()) V_good = v;
      break;
    }
    const Matrix f = Y * v;
    SideFit fu = eb_denoise(f, rec.left, side, rng);
    u = fu.den.mean;
    sigma2 = fu.den.avg_second_moment(0, 0);
    mu = s * sigma2;
    rec.loglik_u = fu.loglik;
    rec.atoms_u = fu.atoms;
    rec.npmle_converged = fv.converged && fu.converged;
    rec.acc_u = maybe_accuracy(u, opt.truth, true);
    history.push_back(std::move(rec));
    U_good = u;
    V_good = v;
  }
  return finish(st, nz.tau_hat, nz.spectrum.lambda.head(1), st.F, st.G, std::move(history),
                U_good, V_good);
}

}  // namespace ebpca
