// Python bindings: thin wrappers returning numpy arrays and dicts.

#include "ebpca/experiment.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace ebpca;

namespace {

py::dict accuracy_dict(const Accuracy& a) {
  py::dict d;
  d["alignment"] = a.alignment;
  d["pc_distance"] = a.pc_distance;
  d["pc_projector"] = a.pc_projector;
  d["joint_distance"] = a.joint_distance;
  d["joint_projector"] = a.joint_projector;
  return d;
}

py::dict result_dict(const EBPCAResult& r) {
  py::dict d;
  d["U"] = r.U;
  d["V"] = r.V;
  d["S_hat"] = Vector(r.S_hat.diagonal());
  d["tau_hat"] = r.tau_hat;
  d["lambda"] = r.lambda;
  d["F_pca"] = r.F_pca;
  d["G_pca"] = r.G_pca;
  std::vector<Index> kept(r.kept.begin(), r.kept.end());
  d["kept"] = kept;
  d["warnings"] = r.warnings;
  d["degenerate"] = r.degenerate;
  py::list hist;
  for (const auto& h : r.history) {
    py::dict e;
    e["t"] = h.t;
    e["sigma"] = h.right.Sigma;
    e["sigmabar"] = h.left.Sigma;
    e["npmle_converged"] = h.npmle_converged;
    if (h.acc_u) e["acc_u"] = accuracy_dict(*h.acc_u);
    if (h.acc_v) e["acc_v"] = accuracy_dict(*h.acc_v);
    hist.append(e);
  }
  d["history"] = hist;
  return d;
}

AmpOptions amp_options(int iters, std::uint64_t seed, bool marginal, Index support_cap) {
  AmpOptions o;
  o.iters = iters;
  o.seed = seed;
  o.marginal = marginal;
  o.support_cap = support_cap;
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Empirical Bayes PCA (native core)";
  m.attr("__version__") = kVersion;

  // Messages already carry the error kind as a prefix.
  py::register_exception<Error>(m, "EbpcaError", PyExc_ValueError);

  m.def(
      "generate",
      [](Index n, Index d, std::vector<double> signals, std::uint64_t seed, const std::string& prior_u,
         const std::string& prior_v) {
        const Index k = static_cast<Index>(signals.size());
        const auto inst = generate_instance({n, d, std::move(signals), seed}, PriorSpec::parse(prior_u, k),
                                            PriorSpec::parse(prior_v, k));
        py::dict out;
        out["Y"] = inst.Y;
        out["U"] = inst.U;
        out["V"] = inst.V;
        out["S"] = Vector(inst.S.diagonal());
        return out;
      },
      py::arg("n"), py::arg("d"), py::arg("signals"), py::arg("seed") = 1,
      py::arg("prior_u") = "two_point", py::arg("prior_v") = "two_point",
      "Draw Y = U S V^T / n + W from the spiked model.");

  m.def(
      "normalize",
      [](const Matrix& Y, Index k) {
        const Normalized nz = normalize(Y, k);
        py::dict out;
        out["Y"] = nz.Y;
        out["tau_hat"] = nz.tau_hat;
        out["F"] = nz.spectrum.F;
        out["G"] = nz.spectrum.G;
        out["lambda"] = nz.spectrum.lambda;
        out["gamma"] = nz.spectrum.gamma;
        return out;
      },
      py::arg("Y"), py::arg("k"), "Estimate the noise level, rescale, and take the top-k PCs.");

  m.def("estimate_signal", &estimate_signal, py::arg("lam"), py::arg("gamma"));
  m.def("spike_singular_limit", &spike_singular_limit, py::arg("s"), py::arg("gamma"));
  m.def("critical_signal", &critical_signal, py::arg("gamma"));
  m.def("bulk_edges", &bulk_edges, py::arg("gamma"));
  m.def(
      "predict_observables",
      [](double s, double gamma) {
        const RMTPrediction p = predict_observables(s, gamma);
        py::dict out;
        out["sqrt_gamma_lambda_limit"] = p.sqrt_gamma_lambda_limit;
        out["mu_star"] = p.mu_star;
        out["sigma_star_sq"] = p.sigma_star_sq;
        out["mu_bar_star"] = p.mu_bar_star;
        out["sigma_bar_star_sq"] = p.sigma_bar_star_sq;
        return out;
      },
      py::arg("s"), py::arg("gamma"));

  m.def(
      "fit_npmle",
      [](const Matrix& X, const Matrix& M, const Matrix& Sigma, Index support_cap, std::uint64_t seed) {
        CompoundParams p{M, Sigma};
        Rng rng = make_stream(seed, streams::kSupport);
        const NpmleFit fit = fit_npmle(X, p, support_cap, rng);
        py::dict out;
        out["atoms"] = fit.prior.atoms;
        out["weights"] = fit.prior.weights;
        out["log_likelihood"] = fit.report.log_likelihood;
        out["converged"] = fit.report.converged;
        out["optimality_gap"] = fit.report.optimality_gap;
        return out;
      },
      py::arg("X"), py::arg("M"), py::arg("Sigma"), py::arg("support_cap") = 2000, py::arg("seed") = 0,
      "NPMLE of the prior for rows X_i = M theta_i + N(0, Sigma).");

  m.def(
      "denoise",
      [](const Matrix& X, const Matrix& M, const Matrix& Sigma, const Matrix& atoms, const Vector& weights) {
        const Denoised dn = denoise_matrix(X, CompoundParams{M, Sigma}, DiscretePrior{atoms, weights});
        return py::make_tuple(dn.mean, dn.avg_jacobian);
      },
      py::arg("X"), py::arg("M"), py::arg("Sigma"), py::arg("atoms"), py::arg("weights"),
      "Row-wise posterior means and the average Jacobian under a discrete prior.");

  m.def(
      "se_fixed_point",
      [](const std::string& prior_u, const std::string& prior_v, std::vector<double> signals, double gamma) {
        const Index k = static_cast<Index>(signals.size());
        const Prior pu = prior_from_spec(PriorSpec::parse(prior_u, k));
        const Prior pv = prior_from_spec(PriorSpec::parse(prior_v, k));
        const SEFixedPoint fp = se_fixed_point(pv, pu, signals, gamma);
        Matrix S = Matrix::Zero(k, k);
        for (Index i = 0; i < k; ++i) S(i, i) = signals[static_cast<std::size_t>(i)];
        py::dict out;
        out["Q"] = fp.Q;
        out["Qbar"] = fp.Qbar;
        out["Q_seq"] = fp.Q_seq;
        out["converged"] = fp.converged;
        out["mmse_u"] = fp.mmse_u;
        out["mmse_v"] = fp.mmse_v;
        out["bayes_risk"] = bayes_matrix_risk(fp.Qbar, fp.Q, pu, pv, S);
        return out;
      },
      py::arg("prior_u"), py::arg("prior_v"), py::arg("signals"), py::arg("gamma"));

  m.def(
      "ebpca",
      [](const Matrix& Y, Index k, int iters, std::uint64_t seed, bool marginal, Index support_cap,
         std::optional<Matrix> U_true, std::optional<Matrix> V_true) {
        AmpOptions o = amp_options(iters, seed, marginal, support_cap);
        if (U_true && V_true) o.truth = Truth{*U_true, *V_true};
        EBPCAResult r;
        {
          py::gil_scoped_release release;
          r = run_ebpca(Y, k, o);
        }
        return result_dict(r);
      },
      py::arg("Y"), py::arg("k"), py::arg("iters") = 10, py::arg("seed") = 0, py::arg("marginal") = false,
      py::arg("support_cap") = 2000, py::arg("U_true") = py::none(), py::arg("V_true") = py::none(),
      "Run EB-PCA on a raw data matrix (rows = samples).");

  m.def(
      "mean_field_vb",
      [](const Matrix& Y, int iters, std::uint64_t seed) {
        return result_dict(run_mean_field_vb(Y, iters, amp_options(iters, seed, false, 2000)));
      },
      py::arg("Y"), py::arg("iters") = 10, py::arg("seed") = 0);

  m.def(
      "diagnose",
      [](const Matrix& Y, Index k) {
        const Diagnosis dg = diagnose_matrix(Y, k);
        py::dict out;
        out["n"] = dg.n;
        out["d"] = dg.d;
        out["gamma"] = dg.gamma;
        out["tau_hat"] = dg.tau_hat;
        out["singular_values"] = dg.singular_values;
        out["edges"] = py::make_tuple(dg.lambda_minus, dg.lambda_plus);
        out["threshold"] = dg.threshold;
        out["outliers"] = dg.outliers;
        out["s_hat"] = dg.s_hat;
        out["ks_bulk"] = dg.ks_bulk;
        return out;
      },
      py::arg("Y"), py::arg("k") = 1, "Singular values of the normalized matrix against the noise bulk.");

  m.def(
      "accuracy",
      [](const Matrix& est, const Matrix& truth) { return accuracy_dict(accuracy(est, truth)); },
      py::arg("est"), py::arg("truth"));
}
