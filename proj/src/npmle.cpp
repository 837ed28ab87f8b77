#include "ebpca/npmle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ebpca {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kMaxCondition = 1e12;
}  // namespace

// ---------------------------------------------------------------------------
// DiscretePrior / CompoundParams

void DiscretePrior::validate() const {
  require(atoms.rows() >= 1, ErrorKind::kValidation, "prior needs at least one atom");
  require(weights.size() == atoms.rows(), ErrorKind::kValidation,
          "prior weights/atoms size mismatch");
  require(atoms.allFinite(), ErrorKind::kValidation, "prior atoms must be finite");
  require((weights.array() >= 0.0).all(), ErrorKind::kValidation,
          "prior weights must be nonnegative");
  require(std::abs(weights.sum() - 1.0) <= 1e-10, ErrorKind::kValidation,
          "prior weights must sum to one");
}

Vector DiscretePrior::mean() const { return atoms.transpose() * weights; }

Matrix DiscretePrior::second_moment() const {
  return atoms.transpose() * weights.asDiagonal() * atoms;
}

DiscretePrior DiscretePrior::point_mass(const Vector& at) {
  DiscretePrior p;
  p.atoms = at.transpose();
  p.weights = Vector::Ones(1);
  return p;
}

Matrix CompoundParams::regularized_sigma() const {
  const Index k = Sigma.rows();
  const double tr = Sigma.trace();
  const double floor = tr > 0.0 ? 1e-8 * tr / static_cast<double>(k) : 1e-8;
  return floor_eigenvalues(Sigma, floor);
}

double CompoundParams::condition_number() const {
  Eigen::JacobiSVD<Matrix> svd(M);
  const Vector& sv = svd.singularValues();
  if (sv(sv.size() - 1) <= 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / sv(sv.size() - 1);
}

void CompoundParams::validate() const {
  require(M.rows() == M.cols() && M.rows() >= 1, ErrorKind::kDimension,
          "channel matrix M must be square");
  require(Sigma.rows() == M.rows() && Sigma.cols() == M.cols(), ErrorKind::kDimension,
          "Sigma must match M");
  require(M.allFinite() && Sigma.allFinite(), ErrorKind::kChannel,
          "channel parameters must be finite");
  require((Sigma - Sigma.transpose()).cwiseAbs().maxCoeff() <=
              1e-8 * std::max(1.0, Sigma.cwiseAbs().maxCoeff()),
          ErrorKind::kChannel, "Sigma must be symmetric");
}

CompoundParams CompoundParams::scalar(double mu, double sigma2) {
  CompoundParams p;
  p.M = Matrix::Constant(1, 1, mu);
  p.Sigma = Matrix::Constant(1, 1, sigma2);
  return p;
}

// ---------------------------------------------------------------------------
// GaussianChannel

GaussianChannel::GaussianChannel(const CompoundParams& params) {
  params.validate();
  M_ = params.M;
  sigma_ = params.regularized_sigma();
  Eigen::LLT<Matrix> llt(sigma_);
  require(llt.info() == Eigen::Success, ErrorKind::kChannel,
          "Sigma is not positive definite after regularization");
  chol_lower_ = llt.matrixL();
  sigma_inv_ = llt.solve(Matrix::Identity(sigma_.rows(), sigma_.cols()));
  whiten_M_ = chol_lower_.triangularView<Eigen::Lower>().solve(M_);
  const double k = static_cast<double>(M_.rows());
  log_norm_ = -0.5 * k * kLog2Pi - chol_lower_.diagonal().array().log().sum();
}

Matrix GaussianChannel::whiten(const Matrix& X) const {
  return chol_lower_.triangularView<Eigen::Lower>().solve(X.transpose()).transpose();
}

Matrix GaussianChannel::whiten_atoms(const Matrix& atoms) const {
  return atoms * whiten_M_.transpose();
}

Matrix GaussianChannel::log_kernel(const Matrix& X, const Matrix& atoms) const {
  require(X.cols() == dim() && atoms.cols() == dim(), ErrorKind::kDimension,
          "kernel inputs must have k columns");
  const Matrix xw = whiten(X);
  const Matrix zw = whiten_atoms(atoms);
  const Index n = xw.rows(), m = zw.rows(), k = dim();
  Matrix out(n, m);
  if (k <= 2) {
    for (Index j = 0; j < m; ++j) {
      for (Index i = 0; i < n; ++i) {
        double q = 0.0;
        for (Index c = 0; c < k; ++c) {
          const double diff = xw(i, c) - zw(j, c);
          q += diff * diff;
        }
        out(i, j) = log_norm_ - 0.5 * q;
      }
    }
    return out;
  }
  const Vector xn = xw.rowwise().squaredNorm();
  const Vector zn = zw.rowwise().squaredNorm();
  out.noalias() = xw * zw.transpose();
  out *= 2.0;
  out.colwise() -= xn;
  out.rowwise() -= zn.transpose();
  out = (0.5 * out.array() + log_norm_).matrix();
  return out;
}

// ---------------------------------------------------------------------------
// Support

Matrix build_support(const Matrix& X, const CompoundParams& params, Index cap, Rng& rng,
                     Index* rows_before_cap) {
  require(cap >= 1, ErrorKind::kValidation, "support cap must be >= 1");
  params.validate();
  require(X.cols() == params.dim(), ErrorKind::kDimension, "X must have k columns");
  require(params.condition_number() <= kMaxCondition, ErrorKind::kChannel,
          "channel matrix M is singular beyond condition threshold");
  const Index n = X.rows();
  if (rows_before_cap) *rows_before_cap = n;

  std::vector<Index> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), Index{0});
  if (n > cap) {
    // Partial Fisher–Yates, then restore the original order.
    for (Index i = 0; i < cap; ++i) {
      std::uniform_int_distribution<Index> pick(i, n - 1);
      std::swap(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(pick(rng))]);
    }
    rows.resize(static_cast<std::size_t>(cap));
    std::sort(rows.begin(), rows.end());
  }
  Matrix chosen(static_cast<Index>(rows.size()), X.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) chosen.row(static_cast<Index>(r)) = X.row(rows[r]);
  // z = M^{-1} x for each row.
  return params.M.partialPivLu().solve(chosen.transpose()).transpose();
}

// ---------------------------------------------------------------------------
// Likelihood

double log_marginal_likelihood(const Matrix& X, const CompoundParams& params,
                               const DiscretePrior& prior) {
  prior.validate();
  GaussianChannel channel(params);
  const Matrix K = channel.log_kernel(X, prior.atoms);
  Vector logw(prior.size());
  for (Index j = 0; j < prior.size(); ++j) {
    logw(j) = prior.weights(j) > 0.0 ? std::log(prior.weights(j))
                                     : -std::numeric_limits<double>::infinity();
  }
  double total = 0.0;
  for (Index i = 0; i < K.rows(); ++i) {
    total += log_sum_exp(K.row(i).transpose() + logw);
  }
  return total / static_cast<double>(K.rows());
}

namespace {

// Row-scaled likelihood matrix: L_ij = exp(K_ij - offset_i).
struct ScaledKernel {
  Matrix L;
  Vector offset;
  double mean_offset = 0.0;
};

ScaledKernel scaled_kernel(const Matrix& X, const CompoundParams& params, const Matrix& atoms) {
  GaussianChannel channel(params);
  ScaledKernel sk;
  sk.L = channel.log_kernel(X, atoms);
  sk.offset = sk.L.rowwise().maxCoeff();
  sk.L.colwise() -= sk.offset;
  sk.L = sk.L.array().exp().matrix();
  sk.mean_offset = sk.offset.mean();
  return sk;
}

double mean_log(const Vector& f) { return f.array().log().mean(); }

// Lawson–Hanson NNLS: min |Ax - b|, x >= 0. Subproblems go through QR on
// the passive columns; the normal equations lose too much when nearby atoms
// give nearly collinear columns.
// `eps` is the dual threshold for activating a column.
Vector nnls(const Matrix& A, const Vector& b, double eps) {
  const Index s = A.cols();
  Vector x = Vector::Zero(s);
  std::vector<bool> passive(static_cast<std::size_t>(s), false);
  Vector w = A.transpose() * (b - A * x);
  for (int outer = 0; outer < 3 * s + 10; ++outer) {
    Index best = -1;
    double best_w = eps;
    for (Index j = 0; j < s; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;
    bool progressed = false;
    for (int inner = 0; inner < 3 * s + 10; ++inner) {
      std::vector<Index> idx;
      for (Index j = 0; j < s; ++j) if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
      const Index p = static_cast<Index>(idx.size());
      if (p == 0) break;
      Matrix Ap(A.rows(), p);
      for (Index c = 0; c < p; ++c) Ap.col(c) = A.col(idx[static_cast<std::size_t>(c)]);
      const Vector zp = Ap.colPivHouseholderQr().solve(b);
      bool feasible = true;
      for (Index c = 0; c < p; ++c) if (!(zp(c) > 0.0)) feasible = false;
      if (feasible) {
        x.setZero();
        for (Index c = 0; c < p; ++c) x(idx[static_cast<std::size_t>(c)]) = zp(c);
        progressed = true;
        break;
      }
      double alpha = 1.0;
      for (Index c = 0; c < p; ++c) {
        const Index j = idx[static_cast<std::size_t>(c)];
        if (!(zp(c) > 0.0)) {
          const double denom = x(j) - zp(c);
          if (denom > 0.0) alpha = std::min(alpha, x(j) / denom);
        }
      }
      for (Index c = 0; c < p; ++c) {
        const Index j = idx[static_cast<std::size_t>(c)];
        x(j) += alpha * (zp(c) - x(j));
        if (x(j) <= 1e-15) {
          x(j) = 0.0;
          passive[static_cast<std::size_t>(j)] = false;
        }
      }
    }
    if (!progressed && !passive[static_cast<std::size_t>(best)]) break;  // would cycle
    w = A.transpose() * (b - A * x);
  }
  return x.cwiseMax(0.0);
}

struct SolverState {
  Vector weights;  // length m
  NpmleReport report;
};

SolverState solve_em(const ScaledKernel& sk, const NpmleOptions& opt) {
  const Index n = sk.L.rows(), m = sk.L.cols();
  SolverState st;
  st.weights = Vector::Constant(m, 1.0 / static_cast<double>(m));
  Vector f = sk.L * st.weights;
  double ll = mean_log(f) + sk.mean_offset;
  st.report.log_likelihood.push_back(ll);
  for (int it = 0; it < opt.max_iter; ++it) {
    const Vector grad = sk.L.transpose() * f.cwiseInverse() / static_cast<double>(n);
    st.report.optimality_gap = grad.maxCoeff() - 1.0;
    if (st.report.optimality_gap <= opt.tol) {
      st.report.converged = true;
      return st;
    }
    Vector next = st.weights.cwiseProduct(grad);
    next /= next.sum();
    const Vector f_next = sk.L * next;
    const double ll_next = mean_log(f_next) + sk.mean_offset;
    if (!(ll_next >= ll)) break;  // no representable ascent left
    st.weights = next;
    f = f_next;
    ll = ll_next;
    st.report.log_likelihood.push_back(ll);
    st.report.iterations = it + 1;
  }
  const Vector grad = sk.L.transpose() * f.cwiseInverse() / static_cast<double>(n);
  st.report.optimality_gap = grad.maxCoeff() - 1.0;
  st.report.converged = st.report.optimality_gap <= opt.tol;
  return st;
}

SolverState solve_active_set(const ScaledKernel& sk, const Matrix& atoms,
                             const NpmleOptions& opt) {
  const Index n = sk.L.rows(), m = sk.L.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  SolverState st;
  st.weights = Vector::Zero(m);

  // For k = 1 the candidates are ordered once so new vertices can be taken
  // at local maxima of the gradient.
  std::vector<Index> order;
  if (atoms.cols() == 1) {
    order.resize(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return atoms(a, 0) < atoms(b, 0); });
  }

  // Spread start. A single-atom start makes the quadratic model exact on the
  // active column, so new atoms never receive mass.
  std::vector<Index> active;
  {
    const Index count = std::min<Index>(m, 32);
    for (Index c = 0; c < count; ++c) {
      const Index pos = count == 1 ? 0 : c * (m - 1) / (count - 1);
      const Index j = order.empty() ? pos : order[static_cast<std::size_t>(pos)];
      if (active.empty() || active.back() != j) active.push_back(j);
    }
  }
  // Rows far from every spread atom (heavy tails) would start with a mixture
  // density that underflows; give each such row its own best atom. Each row's
  // best candidate has scaled kernel 1, so afterwards every f_i >= 1/n.
  {
    Vector f0 = Vector::Zero(n);
    for (Index j : active) f0 += sk.L.col(j);
    f0 /= static_cast<double>(active.size());
    std::vector<bool> in_set(static_cast<std::size_t>(m), false);
    for (Index j : active) in_set[static_cast<std::size_t>(j)] = true;
    for (Index i = 0; i < n; ++i) {
      if (f0(i) >= inv_n) continue;
      Index j;
      sk.L.row(i).maxCoeff(&j);
      if (!in_set[static_cast<std::size_t>(j)]) {
        in_set[static_cast<std::size_t>(j)] = true;
        active.push_back(j);
      }
    }
  }
  for (Index j : active) st.weights(j) = 1.0 / static_cast<double>(active.size());
  Vector f = sk.L * st.weights;

  double ll = mean_log(f) + sk.mean_offset;
  st.report.log_likelihood.push_back(ll);
  for (int it = 0; it < opt.max_iter; ++it) {
    const Vector grad = sk.L.transpose() * f.cwiseInverse() * inv_n;
    Index arg = 0;
    st.report.optimality_gap = grad.maxCoeff(&arg) - 1.0;
    if (st.report.optimality_gap <= opt.tol) {
      st.report.converged = true;
      break;
    }

    std::vector<bool> in_set(static_cast<std::size_t>(m), false);
    for (Index j : active) in_set[static_cast<std::size_t>(j)] = true;
    std::vector<Index> cand = active;
    auto add = [&](Index j) {
      if (!in_set[static_cast<std::size_t>(j)] && grad(j) > 1.0) {
        in_set[static_cast<std::size_t>(j)] = true;
        cand.push_back(j);
      }
    };
    add(arg);
    if (!order.empty()) {
      for (std::size_t p = 0; p < order.size(); ++p) {
        const Index j = order[p];
        const double left = p > 0 ? grad(order[p - 1]) : -1.0;
        const double right = p + 1 < order.size() ? grad(order[p + 1]) : -1.0;
        if (grad(j) >= left && grad(j) >= right) add(j);
      }
    } else {
      std::vector<Index> idx(static_cast<std::size_t>(m));
      std::iota(idx.begin(), idx.end(), Index{0});
      const std::size_t top = std::min<std::size_t>(8, idx.size());
      std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(top), idx.end(),
                        [&](Index a, Index b) { return grad(a) > grad(b); });
      for (std::size_t p = 0; p < top; ++p) add(idx[p]);
    }

    const Index s = static_cast<Index>(cand.size());
    Matrix Ls(n, s);
    Vector w0(s), g0(s);
    for (Index c = 0; c < s; ++c) {
      Ls.col(c) = sk.L.col(cand[static_cast<std::size_t>(c)]);
      w0(c) = st.weights(cand[static_cast<std::size_t>(c)]);
      g0(c) = grad(cand[static_cast<std::size_t>(c)]);
    }
    const Matrix S = f.cwiseInverse().asDiagonal() * Ls;
    // The quadratic model only makes sense on the simplex: without the
    // weighted sum-to-one row, 2 * w0 fits it exactly and nothing moves.
    const double c = 1e3 * std::sqrt(static_cast<double>(n));
    Matrix Sa(n + 1, s);
    Sa.topRows(n) = S;
    Sa.row(n).setConstant(c);
    Vector ba = Vector::Constant(n + 1, 2.0);
    ba(n) = c;
    Vector target = nnls(Sa, ba, 1e-12 * static_cast<double>(n));
    const double total = target.sum();
    if (!(total > 0.0)) break;
    target /= total;
    const Vector dir = target - w0;
    const double slope = g0.dot(dir);

    // The optimum has f_i >= 1/n (KKT with each row's best atom), but the
    // quadratic model barely penalizes dropping a row's only support; a row
    // pushed to ~0 then recovers by at most a factor 2 per step. Keep
    // densities off the floor.
    const Vector floor = (0.5 * f).cwiseMin(0.5 * inv_n);
    double alpha = 1.0;
    bool accepted = false;
    Vector f_new, w_new;
    double ll_new = ll;
    for (int ls = 0; ls < 50; ++ls) {
      w_new = (w0 + alpha * dir).cwiseMax(0.0);
      w_new /= w_new.sum();
      f_new = Ls * w_new;
      ll_new = mean_log(f_new) + sk.mean_offset;
      if (ll_new >= ll + 1e-4 * alpha * std::max(slope, 0.0) && ll_new >= ll &&
          (f_new.array() >= floor.array()).all()) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;

    active.clear();
    for (Index c = 0; c < s; ++c) {
      const Index j = cand[static_cast<std::size_t>(c)];
      st.weights(j) = w_new(c);
      if (w_new(c) > 0.0) active.push_back(j);
    }
    f = f_new;
    ll = ll_new;
    st.report.log_likelihood.push_back(ll);
    st.report.iterations = it + 1;
  }
  if (!st.report.converged) {
    const Vector grad = sk.L.transpose() * f.cwiseInverse() * inv_n;
    st.report.optimality_gap = grad.maxCoeff() - 1.0;
    st.report.converged = st.report.optimality_gap <= opt.tol;
  }
  return st;
}

}  // namespace

Vector mixture_gradient(const Matrix& X, const CompoundParams& params,
                        const DiscretePrior& prior) {
  prior.validate();
  const ScaledKernel sk = scaled_kernel(X, params, prior.atoms);
  const Vector f = sk.L * prior.weights;
  return sk.L.transpose() * f.cwiseInverse() / static_cast<double>(X.rows());
}

NpmleFit fit_weights(const Matrix& X, const CompoundParams& params, const Matrix& atoms,
                     const NpmleOptions& options) {
  require(atoms.rows() >= 1, ErrorKind::kValidation, "support must contain at least one atom");
  require(X.rows() >= 1, ErrorKind::kValidation, "need at least one observation");
  require(X.cols() == params.dim() && atoms.cols() == params.dim(), ErrorKind::kDimension,
          "observations and atoms must have k columns");
  require(options.tol > 0.0 && options.max_iter >= 0, ErrorKind::kValidation,
          "invalid NPMLE options");
  const ScaledKernel sk = scaled_kernel(X, params, atoms);

  SolverState st = options.solver == NpmleSolver::kEm ? solve_em(sk, options)
                                                      : solve_active_set(sk, atoms, options);
  st.report.support_candidates = atoms.rows();
  st.report.support_before_cap = atoms.rows();

  // Drop negligible atoms.
  std::vector<Index> keep;
  for (Index j = 0; j < atoms.rows(); ++j) {
    if (st.weights(j) >= options.prune_below) keep.push_back(j);
  }
  if (keep.empty()) {
    Index j;
    st.weights.maxCoeff(&j);
    keep.push_back(j);
  }
  NpmleFit fit;
  fit.prior.atoms.resize(static_cast<Index>(keep.size()), atoms.cols());
  fit.prior.weights.resize(static_cast<Index>(keep.size()));
  for (std::size_t r = 0; r < keep.size(); ++r) {
    fit.prior.atoms.row(static_cast<Index>(r)) = atoms.row(keep[r]);
    fit.prior.weights(static_cast<Index>(r)) = st.weights(keep[r]);
  }
  fit.prior.weights /= fit.prior.weights.sum();
  st.report.support_after_prune = static_cast<Index>(keep.size());
  fit.report = std::move(st.report);
  return fit;
}

NpmleFit fit_npmle(const Matrix& X, const CompoundParams& params, Index cap, Rng& rng,
                   const NpmleOptions& options) {
  Index before = 0;
  const Matrix atoms = build_support(X, params, cap, rng, &before);
  NpmleFit fit = fit_weights(X, params, atoms, options);
  fit.report.support_before_cap = before;
  return fit;
}

}  // namespace ebpca
