#include "ebpca/amp.hpp"

#include <doctest.h>

#include <cmath>

using namespace ebpca;

namespace {

SpikedInstance small_instance(std::vector<double> signals, std::uint64_t seed,
                              const PriorSpec& pu, const PriorSpec& pv, Index n = 400,
                              Index d = 600) {
  return generate_instance({n, d, std::move(signals), seed}, pu, pv);
}

}  // namespace

TEST_CASE("zero iterations reproduce the initial EB estimates") {
  const auto inst = small_instance({2.5}, 3, PriorSpec::two_point(), PriorSpec::two_point());
  AmpOptions opt;
  opt.iters = 0;
  opt.seed = 3;
  const EBPCAResult r = run_ebpca(inst.Y, 1, opt);
  REQUIRE(r.k() == 1);
  REQUIRE(r.history.size() == 1);

  const Normalized nz = normalize(inst.Y, 1);
  const InitialEstimates init = initial_eb_estimates(nz.Y, nz.spectrum, opt);
  CHECK((r.V - init.V).cwiseAbs().maxCoeff() < 1e-10);
  // U^0 denoises the Onsager-corrected F^0, so it is not the direct estimate;
  // both should still point the same way.
  CHECK(accuracy(r.U, init.U).alignment(0) > 0.9);
}

TEST_CASE("EB-PCA improves on PCA for a two-point prior") {
  const auto inst = small_instance({2.0}, 5, PriorSpec::two_point(), PriorSpec::two_point(), 800, 1200);
  AmpOptions opt;
  opt.iters = 5;
  opt.seed = 5;
  opt.truth = Truth{inst.U, inst.V};
  const EBPCAResult r = run_ebpca(inst.Y, 1, opt);
  const Accuracy pca_v = accuracy(r.G_pca, inst.V);
  const Accuracy eb_v = accuracy(r.V, inst.V);
  CHECK(eb_v.alignment(0) > pca_v.alignment(0));
  CHECK(r.history.size() == 6);
  REQUIRE(r.history.back().acc_v.has_value());
  CHECK(r.history.back().acc_v->alignment(0) == doctest::Approx(eb_v.alignment(0)).epsilon(1e-12));
  // Noise entries have sd 1/sqrt(n).
  CHECK(r.tau_hat * std::sqrt(800.0) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("reruns are deterministic") {
  const auto inst = small_instance({2.5}, 8, PriorSpec::uniform(), PriorSpec::point_normal(0.1));
  AmpOptions opt;
  opt.iters = 3;
  opt.seed = 8;
  const EBPCAResult a = run_ebpca(inst.Y, 1, opt);
  const EBPCAResult b = run_ebpca(inst.Y, 1, opt);
  CHECK(a.U == b.U);
  CHECK(a.V == b.V);
}

TEST_CASE("components inside the bulk are dropped with a warning") {
  const auto inst = small_instance({3.0, 0.3}, 11, PriorSpec::two_point(2), PriorSpec::two_point(2));
  AmpOptions opt;
  opt.iters = 2;
  const EBPCAResult r = run_ebpca(inst.Y, 2, opt);
  CHECK(r.k() == 1);
  REQUIRE(r.kept.size() == 1);
  CHECK(r.kept[0] == 0);
  bool found = false;
  for (const auto& w : r.warnings) found = found || w.find("component 2") != std::string::npos;
  CHECK(found);
}

TEST_CASE("pure noise leaves nothing to denoise") {
  Rng rng = make_stream(13, streams::kNoise);
  Matrix Y(300, 300);
  fill_normal(rng, Y.data(), Y.size());
  try {
    run_ebpca(Y, 1);
    FAIL("expected nothing-to-denoise");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNothingToDenoise);
  }
}

TEST_CASE("Gaussian prior stays near the PCA direction") {
  // No structure beyond the second moment: EB-PCA should not lose accuracy.
  const auto inst = small_instance({2.0}, 17, PriorSpec::gaussian(), PriorSpec::gaussian(), 800, 800);
  AmpOptions opt;
  opt.iters = 5;
  opt.seed = 17;
  const EBPCAResult r = run_ebpca(inst.Y, 1, opt);
  const double pca = accuracy(r.G_pca, inst.V).alignment(0);
  const double eb = accuracy(r.V, inst.V).alignment(0);
  CHECK(std::isfinite(eb));
  CHECK(eb > pca - 0.03);
}

TEST_CASE("oracle Bayes AMP tracks its state evolution") {
  const auto inst = small_instance({2.0}, 19, PriorSpec::two_point(), PriorSpec::two_point(), 1000, 1000);
  const Prior p = prior_from_spec(PriorSpec::two_point());
  const EBPCAResult r = run_oracle_bayes_amp(inst.Y, 1, 5, p, p, {2.0});
  const SEFixedPoint fp = se_fixed_point(p, p, {2.0}, 1.0);
  // Predicted alignment of U: sqrt(Q / s) at the fixed point.
  const double predicted = std::sqrt(fp.Q(0, 0) / 2.0);
  CHECK(std::abs(accuracy(r.U, inst.U).alignment(0) - predicted) < 0.05);
}

TEST_CASE("mean-field VB is rank one") {
  const auto one = small_instance({2.5}, 23, PriorSpec::two_point(), PriorSpec::two_point());
  const EBPCAResult r = run_mean_field_vb(one.Y, 3);
  CHECK(r.k() == 1);
  CHECK(std::isfinite(accuracy(r.V, one.V).alignment(0)));
}

TEST_CASE("accuracy metrics") {
  Rng rng = make_stream(29, 1);
  Matrix T(200, 2);
  fill_normal(rng, T.data(), T.size());
  const Accuracy self = accuracy(T, T);
  CHECK(self.alignment(0) == doctest::Approx(1.0));
  CHECK(self.joint_distance < 1e-7);
  const Accuracy flipped = accuracy(-T, T);
  CHECK(flipped.alignment(1) == doctest::Approx(1.0));
  CHECK(flipped.pc_projector(0) == doctest::Approx(std::sqrt(2.0) * flipped.pc_distance(0)).epsilon(1e-6));
}
