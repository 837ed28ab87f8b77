#include "ebpca/state_evolution.hpp"

#include <doctest.h>

#include <cmath>

using namespace ebpca;

namespace {

Prior two_point() { return prior_from_spec(PriorSpec::two_point()); }
Prior gaussian() { return GaussianPrior{Matrix::Identity(1, 1)}; }

}  // namespace

TEST_CASE("initial state") {
  const CompoundParams p = se_init({2.0}, 1.0);
  CHECK(p.Sigma(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(p.M(0, 0) == doctest::Approx(std::sqrt(0.75)).epsilon(1e-14));
  CHECK(se_initial_q({2.0}, 1.0)(0, 0) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK_THROWS_AS(se_init({0.9}, 1.0), Error);
  const CompoundParams two = se_init({3.0, 2.0}, 0.5);
  CHECK(two.M(0, 1) == 0.0);
  CHECK(two.M(0, 0) > two.M(1, 1));
}

TEST_CASE("Gaussian prior: closed-form fixed point") {
  // Scaled prior N(0, s): map is q -> s^2 q / (s q + 1); with s = 2 the
  // fixed point solves q = 4q / (2q + 1), i.e. q = 3/2.
  const Matrix S = Matrix::Identity(1, 1) * 2.0;
  const Prior scaled = transform_prior(gaussian(), S.cwiseSqrt());
  CHECK(q_map(scaled, Matrix::Identity(1, 1) * 1.5).value(0, 0) == doctest::Approx(1.5).epsilon(1e-10));
  const SEFixedPoint fp = se_fixed_point(gaussian(), gaussian(), {2.0}, 1.0);
  CHECK(fp.converged);
  CHECK(fp.Q(0, 0) == doctest::Approx(1.5).epsilon(1e-7));
  CHECK(fp.Qbar(0, 0) == doctest::Approx(1.5).epsilon(1e-7));
  // Risk = Tr(E uu S E vv S) - Tr(Qbar Q) = 4 - 2.25.
  CHECK(bayes_matrix_risk(fp.Qbar, fp.Q, gaussian(), gaussian(), S) == doctest::Approx(1.75).epsilon(1e-6));
}

TEST_CASE("two-point prior fixed point") {
  const SEFixedPoint fp = se_fixed_point(two_point(), two_point(), {2.0}, 1.0);
  CHECK(fp.converged);
  CHECK(fp.Q(0, 0) == doctest::Approx(1.833022022076).epsilon(1e-9));
  CHECK(fp.Qbar(0, 0) == doctest::Approx(1.833022022076).epsilon(1e-9));
  const Matrix S = Matrix::Identity(1, 1) * 2.0;
  CHECK(bayes_matrix_risk(fp.Qbar, fp.Q, two_point(), two_point(), S) ==
        doctest::Approx(0.640030266586).epsilon(1e-8));
  CHECK(fp.mmse_u.back() == doctest::Approx(0.083488988962).epsilon(1e-8));

  // Started from the spectral estimate, Q increases monotonically and the
  // per-iteration risks never go up.
  for (std::size_t t = 1; t < fp.Q_seq.size(); ++t) CHECK(fp.Q_seq[t](0, 0) >= fp.Q_seq[t - 1](0, 0) - 1e-12);
  for (std::size_t t = 1; t < fp.mmse_u.size(); ++t) CHECK(fp.mmse_u[t] <= fp.mmse_u[t - 1] + 1e-12);
  for (std::size_t t = 1; t < fp.mmse_v.size(); ++t) CHECK(fp.mmse_v[t] <= fp.mmse_v[t - 1] + 1e-12);
}

TEST_CASE("state evolution step") {
  const CompoundParams cur = se_init({2.0}, 1.0);
  const Matrix S = Matrix::Identity(1, 1) * 2.0;
  const SEStepResult r = se_step(cur, two_point(), S, 1.0, SESide::kRight);
  CHECK((r.next.M - r.next.Sigma * S).norm() == 0.0);
  CHECK(r.next.Sigma(0, 0) > 0.0);
  CHECK(r.next.Sigma(0, 0) < 1.0);

  // A point mass at zero carries no signal.
  const Prior zero = DiscretePrior::point_mass(Vector::Zero(1));
  const SEStepResult z = se_step(cur, zero, S, 1.0, SESide::kLeft);
  CHECK(z.next.Sigma(0, 0) == doctest::Approx(0.0));
  CHECK(z.next.M(0, 0) == doctest::Approx(0.0));

  CHECK_THROWS_AS(se_step(cur, two_point(), Matrix::Identity(2, 2), 1.0, SESide::kRight), Error);
}

TEST_CASE("trajectory agrees with the fixed-point iteration") {
  const SETrajectory tr = se_trajectory(two_point(), two_point(), {2.0}, 1.0, 6);
  CHECK(tr.right.size() == 7);
  CHECK(tr.left.size() == 7);
  const SEFixedPoint fp = se_fixed_point(two_point(), two_point(), {2.0}, 1.0);
  // Same recursion written in different coordinates.
  for (std::size_t t = 0; t < 6; ++t) {
    CHECK(tr.Qbar[t](0, 0) == doctest::Approx(fp.Qbar_seq[t](0, 0)).epsilon(1e-8));
  }
  CHECK(tr.Q.back()(0, 0) == doctest::Approx(fp.Q(0, 0)).epsilon(1e-4));
}
