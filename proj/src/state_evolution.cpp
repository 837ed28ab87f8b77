#include "ebpca/state_evolution.hpp"

#include "ebpca/rmt.hpp"

#include <cmath>

namespace ebpca {

namespace {

Matrix diag_of(const std::vector<double>& values) {
  const Index k = static_cast<Index>(values.size());
  Matrix out = Matrix::Zero(k, k);
  for (Index i = 0; i < k; ++i) out(i, i) = values[static_cast<std::size_t>(i)];
  return out;
}

Matrix diag_sqrt(const Matrix& S) { return S.diagonal().cwiseSqrt().asDiagonal(); }

void check_signals(const std::vector<double>& signals, double gamma) {
  require(!signals.empty(), ErrorKind::kValidation, "need at least one signal strength");
  require(gamma > 0.0, ErrorKind::kValidation, "gamma must be > 0");
  const double sc = critical_signal(gamma);
  for (double s : signals) {
    if (!(s > sc)) fail(ErrorKind::kSubcritical, "signal strength at or below gamma^{-1/4}");
  }
}

}  // namespace

CompoundParams se_init(const std::vector<double>& signals, double gamma) {
  check_signals(signals, gamma);
  const Index k = static_cast<Index>(signals.size());
  CompoundParams p;
  p.M = Matrix::Zero(k, k);
  p.Sigma = Matrix::Zero(k, k);
  for (Index i = 0; i < k; ++i) {
    const RMTPrediction pred = predict_observables(signals[static_cast<std::size_t>(i)], gamma);
    p.M(i, i) = pred.mu_star;
    p.Sigma(i, i) = pred.sigma_star_sq;
  }
  return p;
}

Matrix se_initial_q(const std::vector<double>& signals, double gamma) {
  check_signals(signals, gamma);
  const Index k = static_cast<Index>(signals.size());
  Matrix Q = Matrix::Zero(k, k);
  for (Index i = 0; i < k; ++i) {
    const double s = signals[static_cast<std::size_t>(i)];
    Q(i, i) = (gamma * s * s * s * s - 1.0) / (s * (gamma * s * s + 1.0));
  }
  return Q;
}

SEStepResult se_step(const CompoundParams& current, const Prior& prior, const Matrix& S,
                     double gamma, SESide side, const MmseOptions& options) {
  require(S.rows() == current.dim() && S.cols() == current.dim(), ErrorKind::kDimension,
          "S must be k x k");
  const ChannelMoments cm = channel_moments(prior, current, options);
  const double mult = side == SESide::kRight ? gamma : 1.0;
  SEStepResult r;
  r.next.Sigma = mult * cm.mean_outer;
  r.next.M = r.next.Sigma * S;
  r.sigma_se = mult * cm.mean_outer_se;
  r.mmse = cm.mmse;
  return r;
}

QMapResult q_map(const Prior& prior, const Matrix& Q, const MmseOptions& options) {
  const Index k = prior_dim(prior);
  require(Q.rows() == k && Q.cols() == k, ErrorKind::kDimension, "Q must be k x k");
  CompoundParams ch;
  ch.M = psd_sqrt(Q);
  ch.Sigma = Matrix::Identity(k, k);
  const ChannelMoments cm = channel_moments(prior, ch, options);
  return {cm.mean_outer, cm.mean_outer_se};
}

SETrajectory se_trajectory(const Prior& prior_v, const Prior& prior_u,
                           const std::vector<double>& signals, double gamma, int T,
                           const MmseOptions& options) {
  require(T >= 0, ErrorKind::kValidation, "T must be >= 0");
  const Matrix S = diag_of(signals);
  const Matrix Sh = diag_sqrt(S);
  SETrajectory tr;
  CompoundParams right = se_init(signals, gamma);
  for (int t = 0; t <= T; ++t) {
    tr.right.push_back(right);
    tr.Q.push_back(Sh * right.Sigma * Sh);
    if (t == 0) tr.Q.back() = se_initial_q(signals, gamma);
    const SEStepResult bar = se_step(right, prior_v, S, gamma, SESide::kRight, options);
    tr.mmse_v.push_back(bar.mmse);
    tr.left.push_back(bar.next);
    tr.Qbar.push_back(Sh * bar.next.Sigma * Sh / gamma);
    const SEStepResult nxt = se_step(bar.next, prior_u, S, gamma, SESide::kLeft, options);
    tr.mmse_u.push_back(nxt.mmse);
    right = nxt.next;
  }
  return tr;
}

SEFixedPoint se_fixed_point(const Prior& prior_v, const Prior& prior_u,
                            const std::vector<double>& signals, double gamma,
                            const SEOptions& options) {
  require(options.tol > 0.0 && options.max_iter >= 1, ErrorKind::kValidation,
          "invalid fixed-point options");
  const Matrix S = diag_of(signals);
  const Matrix Sh = diag_sqrt(S);
  const Matrix Sinv = S.inverse();
  const Prior pv = transform_prior(prior_v, Sh);
  const Prior pu = transform_prior(prior_u, Sh);
  const double tr_v = prior_second_moment(prior_v).trace();
  const double tr_u = prior_second_moment(prior_u).trace();

  SEFixedPoint fp;
  Matrix Q = se_initial_q(signals, gamma);
  fp.Q_seq.push_back(Q);
  fp.Q_se.push_back(Matrix::Zero(Q.rows(), Q.cols()));
  for (int it = 0; it < options.max_iter; ++it) {
    const QMapResult qbar = q_map(pv, Q, options.expectation);
    const QMapResult qn = q_map(pu, gamma * qbar.value, options.expectation);
    fp.Qbar_seq.push_back(qbar.value);
    fp.Qbar_se.push_back(qbar.std_error);
    fp.Q_seq.push_back(qn.value);
    fp.Q_se.push_back(qn.std_error);
    fp.mmse_v.push_back(tr_v - (Sinv * qbar.value).trace());
    fp.mmse_u.push_back(tr_u - (Sinv * qn.value).trace());
    fp.iterations = it + 1;
    const double change = (qn.value - Q).norm();
    Q = qn.value;
    if (change < options.tol) {
      fp.converged = true;
      break;
    }
  }
  fp.Q = fp.Q_seq.back();
  fp.Qbar = fp.Qbar_seq.back();
  return fp;
}

double bayes_matrix_risk(const Matrix& Qbar, const Matrix& Q, const Prior& prior_u,
                         const Prior& prior_v, const Matrix& S) {
  const Matrix Eu = prior_second_moment(prior_u);
  const Matrix Ev = prior_second_moment(prior_v);
  require(Eu.rows() == S.rows() && Ev.rows() == S.rows() && Q.rows() == S.rows() &&
              Qbar.rows() == S.rows(),
          ErrorKind::kDimension, "dimension mismatch in bayes_matrix_risk");
  return (Eu * S * Ev * S).trace() - (Qbar * Q).trace();
}

}  // namespace ebpca
