#include "support.hpp"

#include "medsel/factor_model.hpp"
#include "medsel/mediator_model.hpp"
#include "medsel/proxy.hpp"

#include <doctest.h>

using namespace medsel;

namespace {

const BasisSpec kInteraction{{BasisTerm::constant(), BasisTerm::treatment(), BasisTerm::covariate(0),
                              BasisTerm::treatment_covariate(0)}};

}  // namespace

TEST_CASE("delta for the three-mediator example is a quarter of the loading") {
  const VectorXd delta = compute_delta(MatrixXd::Ones(3, 1), VectorXd::Ones(3)).col(0);
  for (Index j = 0; j < 3; ++j) CHECK(std::abs(delta(j) - 0.25) < 1e-12);
}

TEST_CASE("delta special cases") {
  CHECK(compute_delta(MatrixXd::Zero(4, 2), VectorXd::Ones(4)).isZero(0.0));
  MatrixXd g(2, 1);
  g << 1, 2;
  const MatrixXd delta = compute_delta(g, VectorXd::Ones(2));
  CHECK(delta(0, 0) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK(delta(1, 0) == doctest::Approx(2.0 / 6.0).epsilon(1e-14));
}

TEST_CASE("Woodbury and direct delta agree") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd g = testing::normal_matrix(12, 1 + trial % 3, rng);
    const VectorXd psi = (testing::normal_vector(12, rng).array().abs() + 0.1).matrix();
    CHECK(testing::rel_diff(compute_delta(g, psi), compute_delta_direct(g, psi)) < 1e-10);
  }
}

TEST_CASE("proxy is Delta' times residual rows") {
  MatrixXd r(1, 3);
  r << 4, 0, 0;
  const MatrixXd delta = MatrixXd::Constant(3, 1, 0.25);
  CHECK(compute_proxy(r, delta)(0, 0) == doctest::Approx(1.0));
  CHECK(compute_proxy(r, MatrixXd::Zero(3, 2)).isZero(0.0));
}

TEST_CASE("three-mediator example proxy formula on exact residuals") {
  const auto ex = testing::example_one(50, 4);
  const Dataset& d = ex.d;
  MatrixXd resid(50, 3);
  for (Index i = 0; i < 50; ++i) {
    const double z = d.z(i), x = d.x(i, 0);
    resid(i, 0) = d.m(i, 0) - (z + x + z * x);
    resid(i, 1) = d.m(i, 1) - (z + x);
    resid(i, 2) = d.m(i, 2) - (z + x);
  }
  const MatrixXd l = compute_proxy(resid, compute_delta(MatrixXd::Ones(3, 1), VectorXd::Ones(3)));
  for (Index i = 0; i < 50; ++i) {
    const double z = d.z(i), x = d.x(i, 0);
    const double formula = (d.m.row(i).sum() - 3 * z - 3 * x - z * x) / 4.0;
    CHECK(std::abs(l(i, 0) - formula) < 1e-10);
  }
}

TEST_CASE("proxy covariance consistency") {
  const auto ex = testing::example_one(500, 6);
  const MediatorFit mf = fit_mediator_model(ex.d, kInteraction);
  const FactorFit ff = fit_factor(mf.residuals, 1);
  const ProxyResult pr = construct_proxy(ex.d, mf, ff);
  REQUIRE(pr.proxy.rows() == 500);
  REQUIRE(pr.proxy.cols() == 1);
  const MatrixXd lhs = pr.proxy.transpose() * mf.residuals / 500.0;
  const MatrixXd rhs = pr.delta.transpose() * sample_second_moment(mf.residuals);
  CHECK(testing::rel_diff(lhs, rhs) < 1e-8);
}

TEST_CASE("condition (ii) in the three-mediator example holds") {
  const auto ex = testing::example_one(5000, 8);
  const MediatorFit mf = fit_mediator_model(ex.d, kInteraction);
  const FactorFit ff = fit_factor(mf.residuals, 1);
  const ProxyResult pr = construct_proxy(ex.d, mf, ff);
  CHECK(pr.condition_ii.holds);
  CHECK(pr.condition_ii.rank == 2 + 3 + 1 + 1);
}

TEST_CASE("condition (ii) fails for a linear mediator model") {
  // drop the interaction: L becomes a linear combination of M, Z, X
  auto ex = testing::example_one(5000, 9);
  for (Index i = 0; i < 5000; ++i) ex.d.m(i, 0) -= ex.d.z(i) * ex.d.x(i, 0);
  const MediatorFit mf = fit_mediator_model(ex.d, BasisSpec::linear(1));
  const FactorFit ff = fit_factor(mf.residuals, 1);
  const ProxyResult pr = construct_proxy(ex.d, mf, ff);
  CHECK_FALSE(pr.condition_ii.holds);
  CHECK(pr.condition_ii.rank < 7);
}

TEST_CASE("condition (ii) fails when n is below the regressor count") {
  const auto ex = testing::example_one(5, 10);
  MatrixXd proxy(5, 1);
  proxy << 1, 2, 3, 4, 6;
  CHECK_FALSE(check_condition_ii(ex.d, proxy).holds);
}

TEST_CASE("rotating the loading rotates the proxy") {
  Rng rng(14);
  const auto ex = testing::example_one(300, 12);
  MatrixXd resid = testing::normal_matrix(300, 7, rng);
  const MatrixXd g = testing::normal_matrix(7, 2, rng);
  const VectorXd psi = VectorXd::Constant(7, 0.8);
  const MatrixXd a = testing::random_rotation(2, rng);
  const MatrixXd l = compute_proxy(resid, compute_delta(g, psi));
  const MatrixXd la = compute_proxy(resid, compute_delta(g * a, psi));
  CHECK(testing::rel_diff(la, l * a) < 1e-12);
  // spans agree: projecting one onto the other leaves no residual
  const MatrixXd proj = l * (l.transpose() * l).ldlt().solve(l.transpose() * la);
  CHECK(testing::rel_diff(proj, la) < 1e-8);
}
