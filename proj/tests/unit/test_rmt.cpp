#include "ebpca/rmt.hpp"

#include "ebpca/quadrature.hpp"
#include "ebpca/spiked_model.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace ebpca;

namespace {

Matrix noise(Index n, Index d, double sd, std::uint64_t seed) {
  Rng rng = make_stream(seed, streams::kNoise);
  Matrix W(n, d);
  fill_normal(rng, W.data(), W.size());
  return sd * W;
}

// Forward map in lambda units: lambda = limit / sqrt(gamma).
double forward_lambda(double s, double g) {
  return std::sqrt((g * s * s + 1.0) * (s * s + 1.0) / (s * s)) / std::sqrt(g);
}

}  // namespace

TEST_CASE("normalize recovers the noise level") {
  const Matrix Y = noise(500, 500, 2.0, 1);
  const Normalized nz = normalize(Y, 1);
  CHECK(std::abs(nz.tau_hat - 2.0) < 0.1);
  // Residual entrywise variance of the normalized matrix is about 1/n.
  const Normalized again = normalize(nz.Y * std::sqrt(500.0), 1);
  CHECK(again.tau_hat == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("normalize rejects an exactly rank-k matrix") {
  Rng rng = make_stream(2, 1);
  Vector u(40), v(60);
  fill_normal(rng, u.data(), 40);
  fill_normal(rng, v.data(), 60);
  const Matrix Y = u * v.transpose();
  try {
    normalize(Y, 1);
    FAIL("expected a degenerate-noise error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDegenerateNoise);
  }
}

TEST_CASE("top_k_svd scaling and sign conventions") {
  const Matrix Y = noise(300, 200, 1.0 / std::sqrt(300.0), 3);
  const SampleSpectrum sp = top_k_svd(Y, 3);
  CHECK((sp.F.transpose() * sp.F / 300.0 - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((sp.G.transpose() * sp.G / 200.0 - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-8);
  const Eigen::BDCSVD<Matrix> svd(Y);
  const double g = 200.0 / 300.0;
  for (Index i = 0; i < 3; ++i) {
    CHECK(std::sqrt(g) * sp.lambda(i) == doctest::Approx(svd.singularValues()(i)).epsilon(1e-10));
    Index arg = 0;
    sp.G.col(i).cwiseAbs().maxCoeff(&arg);
    CHECK(sp.G(arg, i) > 0.0);
    CHECK(sp.F.col(i).dot(Y * sp.G.col(i)) > 0.0);
  }
  CHECK(sp.lambda(0) > sp.lambda(1));
}

TEST_CASE("top_k_svd Lanczos path matches the dense SVD") {
  const Matrix Y = noise(900, 1200, 1.0 / 30.0, 4);
  SvdOptions dense;
  dense.dense_threshold = 100000;
  const SampleSpectrum a = top_k_svd(Y, 2);
  const SampleSpectrum b = top_k_svd(Y, 2, dense);
  CHECK((a.lambda - b.lambda).cwiseAbs().maxCoeff() < 1e-10 * b.lambda(0));
  CHECK(subspace_distance(a.G, b.G) < 1e-6);
  CHECK(subspace_distance(a.F, b.F) < 1e-6);
}

TEST_CASE("noiseless rank one is recovered exactly") {
  const Index n = 80, d = 120;
  Rng rng = make_stream(5, 1);
  const Matrix u = sample_prior(PriorSpec::two_point(), n, rng);
  const Matrix v = sample_prior(PriorSpec::two_point(), d, rng);
  const Matrix Y = u * v.transpose() / static_cast<double>(n);
  SvdOptions opt;
  opt.check_gap = false;
  const SampleSpectrum sp = top_k_svd(Y, 1, opt);
  CHECK(subspace_distance(sp.F, u) < 1e-10);
  CHECK(subspace_distance(sp.G, v) < 1e-10);
  CHECK((sp.F.cwiseAbs() - u.cwiseAbs()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("top_k_svd rejects tied singular values") {
  Matrix Y = Matrix::Zero(10, 8);
  for (Index i = 0; i < 8; ++i) Y(i, i) = i < 2 ? 3.0 : 1.0 / (i + 1.0);
  try {
    top_k_svd(Y, 1);
    FAIL("expected an ambiguous-rank error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kAmbiguousRank);
  }
}

TEST_CASE("estimate_signal values") {
  CHECK(estimate_signal(2.5, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(estimate_signal(2.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  try {
    estimate_signal(1.9, 1.0);
    FAIL("expected a sub-critical error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kSubcritical);
  }
}

TEST_CASE("estimate_signal inverts the outlier map on a grid") {
  int checked = 0;
  for (int i = 0; i < 10; ++i) {
    const double g = 0.2 + 0.4 * i;
    const double sc = std::pow(g, -0.25);
    for (int j = 1; j <= 10; ++j) {
      const double s = sc * (1.0 + 0.3 * j);
      CHECK(std::abs(estimate_signal(forward_lambda(s, g), g) - s) < 1e-10);
      CHECK(spike_singular_limit(s, g) == doctest::Approx(std::sqrt(g) * forward_lambda(s, g)).epsilon(1e-14));
      ++checked;
    }
  }
  CHECK(checked == 100);
}

TEST_CASE("predict_observables closed forms") {
  const RMTPrediction p = predict_observables(2.0, 2.0);
  CHECK(p.sigma_star_sq == doctest::Approx(9.0 / 40.0).epsilon(1e-14));
  CHECK(p.mu_star == doctest::Approx(std::sqrt(0.775)).epsilon(1e-14));
  CHECK(p.sigma_bar_star_sq == doctest::Approx(5.0 / 36.0).epsilon(1e-14));
  CHECK(p.mu_bar_star == doctest::Approx(0.9279607271).epsilon(1e-9));
  CHECK(p.mu_star * p.mu_star + p.sigma_star_sq == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.mu_bar_star * p.mu_bar_star + p.sigma_bar_star_sq == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(predict_observables(2.0, 1.0).sqrt_gamma_lambda_limit == doctest::Approx(2.5).epsilon(1e-14));
  CHECK_THROWS_AS(predict_observables(1.0, 1.0), Error);
  for (double s : {1.2, 1.5, 3.0, 10.0}) {
    const RMTPrediction q = predict_observables(s, 1.0);
    CHECK(q.mu_star > 0.0);
    CHECK(q.mu_star < 1.0);
    CHECK(q.sigma_star_sq > 0.0);
    CHECK(q.sigma_star_sq < 1.0);
  }
}

TEST_CASE("bulk edges") {
  CHECK(bulk_edges(1.0).first == 0.0);
  CHECK(bulk_edges(1.0).second == 2.0);
  CHECK(bulk_edges(4.0).first == doctest::Approx(1.0));
  CHECK(bulk_edges(4.0).second == doctest::Approx(3.0));
  CHECK(bulk_edges(0.25).first == doctest::Approx(0.5));
  CHECK(bulk_edges(0.25).second == doctest::Approx(1.5));
}

TEST_CASE("square-root MP density integrates to one") {
  CHECK(mp_singular_density(0.1, 0.5) == 0.0);
  CHECK(mp_singular_density(2.0, 0.5) == 0.0);
  for (double g : {0.5, 1.0, 2.0}) {
    CAPTURE(g);
    // Substitution x^2 = a + (b - a)(1 - cos t)/2 removes the edge singularities.
    const auto [lo, hi] = bulk_edges(g);
    const double a = lo * lo, b = hi * hi;
    const auto& rule = quadrature::gauss_legendre(200);
    double total = 0.0;
    for (Index i = 0; i < rule.nodes.size(); ++i) {
      const double t = 0.5 * std::numbers::pi * (rule.nodes(i) + 1.0);
      const double x2 = a + 0.5 * (b - a) * (1.0 - std::cos(t));
      const double dx = 0.25 * (b - a) * std::sin(t) / std::sqrt(x2);
      total += rule.weights(i) * 0.5 * std::numbers::pi * mp_singular_density(std::sqrt(x2), g) * dx;
    }
    CHECK(std::abs(total - 1.0) < 1e-6);
    CHECK(mp_singular_cdf(hi, g) == 1.0);
    CHECK(mp_singular_cdf(0.5 * (lo + hi), g) > 0.0);
  }
}

TEST_CASE("square noise singular values follow the MP law") {
  const Index n = 1000;
  const Matrix W = noise(n, n, 1.0 / std::sqrt(static_cast<double>(n)), 6);
  Vector sv = singular_values(W);
  std::vector<double> xs(sv.data(), sv.data() + sv.size());
  std::sort(xs.begin(), xs.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double F = mp_singular_cdf(xs[i], 1.0);
    ks = std::max({ks, std::abs(F - static_cast<double>(i) / n), std::abs(F - static_cast<double>(i + 1) / n)});
  }
  CHECK(ks < 0.03);
}

TEST_CASE("sample PC alignments match their limits") {
  // Small-scale version of the Monte Carlo check.
  const double s = 2.0, g = 1.0;
  const RMTPrediction p = predict_observables(s, g);
  double dv = 0.0, du = 0.0;
  const int seeds = 3;
  for (int seed = 1; seed <= seeds; ++seed) {
    SpikedConfig c{1000, 1000, {s}, static_cast<std::uint64_t>(seed)};
    const auto inst = generate_instance(c, PriorSpec::gaussian(), PriorSpec::two_point());
    SampleSpectrum sp = top_k_svd(inst.Y, 1);
    dv += std::abs(std::abs(sp.G.col(0).dot(inst.V.col(0))) / 1000.0 - p.mu_star);
    du += std::abs(std::abs(sp.F.col(0).dot(inst.U.col(0))) / 1000.0 - p.mu_bar_star);
  }
  CHECK(dv / seeds < 0.03);
  CHECK(du / seeds < 0.03);
}

TEST_CASE("outlier threshold sits just above the bulk edge") {
  const double t = outlier_threshold(1000, 1000);
  CHECK(t > 2.0);
  CHECK(t < 2.1);
}
