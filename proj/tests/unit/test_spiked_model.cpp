#include "ebpca/spiked_model.hpp"

#include "ebpca/rmt.hpp"

#include <doctest.h>

#include <cmath>

using namespace ebpca;

namespace {

Matrix empirical_second_moment(const Matrix& X) {
  return X.transpose() * X / static_cast<double>(X.rows());
}

}  // namespace

TEST_CASE("two-point samples are +-1") {
  Rng rng = make_stream(7, 1);
  const Matrix X = sample_prior(PriorSpec::two_point(), 4, rng);
  for (Index i = 0; i < X.rows(); ++i) CHECK(std::abs(X(i, 0)) == 1.0);
}

TEST_CASE("point-normal 0.9 delta_0 + 0.1 N(0,10) has unit variance") {
  Rng rng = make_stream(3, 1);
  const PriorSpec spec = PriorSpec::point_normal(0.1);
  CHECK(spec.effective_spike_variance() == doctest::Approx(10.0));
  const Matrix X = sample_prior(spec, 100000, rng);
  const double var = X.squaredNorm() / static_cast<double>(X.rows());
  CHECK(std::abs(var - 1.0) < 0.05);
  Index zeros = 0;
  for (Index i = 0; i < X.rows(); ++i) zeros += X(i, 0) == 0.0;
  CHECK(std::abs(static_cast<double>(zeros) / 1e5 - 0.9) < 0.01);
}

TEST_CASE("uniform prior lives on [-sqrt3, sqrt3] with unit variance") {
  Rng rng = make_stream(11, 1);
  const Matrix X = sample_prior(PriorSpec::uniform(), 100000, rng);
  CHECK(X.maxCoeff() <= std::sqrt(3.0));
  CHECK(X.minCoeff() >= -std::sqrt(3.0));
  CHECK(std::abs(X.squaredNorm() / 1e5 - 1.0) < 0.02);
}

TEST_CASE("built-in priors are centered with identity covariance") {
  const std::vector<PriorSpec> specs{PriorSpec::gaussian(2),   PriorSpec::uniform(2),
                                     PriorSpec::two_point(2),  PriorSpec::point_normal(0.1, 2),
                                     PriorSpec::circle(),      PriorSpec::three_point()};
  for (const auto& spec : specs) {
    CAPTURE(spec.name());
    Rng rng = make_stream(5, 1);
    const Matrix X = sample_prior(spec, 1000000, rng);
    const Matrix C = empirical_second_moment(X);
    CHECK(std::abs(C(0, 1)) < 0.01);
    CHECK(std::abs(C(0, 0) - 1.0) < 0.01);
    CHECK(std::abs(C(1, 1) - 1.0) < 0.01);
    CHECK(std::abs(X.col(0).mean()) < 0.01);
    // Discretized stand-ins must carry the same first two moments.
    const DiscretePrior dp = discretize(spec);
    CHECK(dp.mean().norm() < 1e-8);
    CHECK((dp.second_moment() - Matrix::Identity(2, 2)).norm() < 1e-6);
  }
}

TEST_CASE("invalid prior parameters are rejected") {
  CHECK_THROWS_AS(PriorSpec::point_normal(1.5).validate(), Error);
  CHECK_THROWS_AS(PriorSpec::point_normal(-0.1).validate(), Error);
  Matrix atoms(2, 1);
  atoms << -1.0, 1.0;
  Vector w(2);
  w << 0.5, 0.6;
  CHECK_THROWS_AS(PriorSpec::custom(atoms, w).validate(), Error);
  w << 0.5, 0.5;
  CHECK_NOTHROW(PriorSpec::custom(atoms, w).validate());
  CHECK_THROWS_AS(PriorSpec::parse("laplace", 1), Error);
  CHECK(PriorSpec::parse("point_normal:0.2", 1).sparsity == doctest::Approx(0.2));
}

TEST_CASE("generate_instance reconstruction and reproducibility") {
  SpikedConfig c{200, 300, {3.0, 2.0}, 42};
  const auto a = generate_instance(c, PriorSpec::two_point(2), PriorSpec::gaussian(2), true);
  REQUIRE(a.W.has_value());
  const Matrix recon = a.U * a.S * a.V.transpose() / 200.0 + *a.W;
  CHECK((recon - a.Y).cwiseAbs().maxCoeff() < 1e-10);
  const auto b = generate_instance(c, PriorSpec::two_point(2), PriorSpec::gaussian(2));
  CHECK(hash_matrix(a.Y) == hash_matrix(b.Y));
  CHECK(a.Y == b.Y);
  // Noise entries have variance 1/n.
  CHECK(std::abs(a.W->squaredNorm() / (200.0 * 300.0) * 200.0 - 1.0) < 0.02);
  // Column second moments of the truth near one.
  CHECK(std::abs(a.U.col(0).squaredNorm() / 200.0 - 1.0) < 1e-12);
  CHECK(std::abs(a.V.col(1).squaredNorm() / 300.0 - 1.0) < 0.3);
}

TEST_CASE("generate_instance validation") {
  CHECK_THROWS_AS(generate_instance({100, 200, {0.0}, 1}, PriorSpec::two_point(), PriorSpec::two_point()), Error);
  CHECK_THROWS_AS(generate_instance({100, 200, {1.0, 2.0}, 1}, PriorSpec::two_point(2), PriorSpec::two_point(2)), Error);
  try {
    generate_instance({3, 200, {3.0, 2.0, 1.0}, 1}, PriorSpec::two_point(3), PriorSpec::two_point(3));
    FAIL("expected a dimension error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDimension);
  }
  SpikedConfig sub{1000, 2000, {2.0, 0.5}, 1};
  REQUIRE(sub.subcritical().size() == 1);
  CHECK(sub.subcritical()[0] == 1);
}

TEST_CASE("rank-one instance top singular value follows the outlier limit") {
  SpikedConfig c{2000, 4000, {2.0}, 9};
  const auto inst = generate_instance(c, PriorSpec::two_point(), PriorSpec::two_point());
  const SampleSpectrum sp = top_k_svd(inst.Y, 1);
  // Independent evaluation of the limit: sqrt((g s^2 + 1)(s^2 + 1) / s^2).
  const double g = 2.0, s = 2.0;
  const double limit = std::sqrt((g * s * s + 1.0) * (s * s + 1.0) / (s * s));
  CHECK(limit == doctest::Approx(3.3541019662).epsilon(1e-9));
  CHECK(std::abs(std::sqrt(g) * sp.lambda(0) - limit) < 0.05);
}

TEST_CASE("alignment") {
  Vector v(3);
  v << 1.0, -2.0, 0.5;
  CHECK(alignment(v, v) == doctest::Approx(1.0));
  CHECK(alignment(v, -v) == doctest::Approx(-1.0));
  CHECK(alignment(Vector::Unit(3, 0), Vector::Unit(3, 1)) == 0.0);
  try {
    alignment(Vector::Zero(3), v);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUndefinedAlignment);
  }
}

TEST_CASE("subspace distance") {
  Rng rng = make_stream(1, 99);
  Matrix A(50, 2);
  fill_normal(rng, A.data(), A.size());
  Matrix R(2, 2);
  R << 2.0, 1.0, -0.5, 3.0;
  CHECK(subspace_distance(A * R, A) < 1e-10);
  CHECK(projector_distance(A * R, A) < 1e-7);

  Matrix E1 = Matrix::Zero(50, 2), E2 = Matrix::Zero(50, 2);
  E1(0, 0) = E1(1, 1) = 1.0;
  E2(2, 0) = E2(3, 1) = 1.0;
  CHECK(subspace_distance(E1, E2) == doctest::Approx(1.0));

  Matrix B(50, 2);
  fill_normal(rng, B.data(), B.size());
  CHECK(subspace_distance(A, B) == doctest::Approx(subspace_distance(B, A)).epsilon(1e-10));
  CHECK(projector_distance(A, B) == doctest::Approx(std::sqrt(2.0) * subspace_distance(A, B)).epsilon(1e-10));

  // k = 1 reduces to sqrt(1 - alignment^2).
  const Vector a = A.col(0), b = B.col(0);
  const double al = alignment(a, b);
  CHECK(subspace_distance(a, b) == doctest::Approx(std::sqrt(1.0 - al * al)).epsilon(1e-10));

  Matrix deficient(50, 2);
  deficient.col(0) = A.col(0);
  deficient.col(1) = 2.0 * A.col(0);
  try {
    subspace_distance(deficient, A);
    FAIL("expected a rank error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kRank);
  }
}
