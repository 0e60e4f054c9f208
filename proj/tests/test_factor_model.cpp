#include "support.hpp"

#include "medsel/error.hpp"
#include "medsel/factor_model.hpp"
#include "medsel/mediator_model.hpp"
#include "medsel/simulation.hpp"

#include "factor_algebra.hpp"

#include <doctest.h>

#include <cmath>

using namespace medsel;

namespace {

MatrixXd planted_cov(const MatrixXd& loading, const VectorXd& uniqueness) {
  MatrixXd s = loading * loading.transpose();
  s.diagonal() += uniqueness;
  return s;
}

Eigen::FullPivLU<MatrixXd> lu_of(const MatrixXd& g, const std::vector<Index>& rows) {
  MatrixXd sub(static_cast<Index>(rows.size()), g.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) sub.row(static_cast<Index>(i)) = g.row(rows[i]);
  return Eigen::FullPivLU<MatrixXd>(sub);
}

}  // namespace

TEST_CASE("planted one-factor covariance is reproduced") {
  const MatrixXd gamma = MatrixXd::Ones(3, 1);
  const MatrixXd t_n = planted_cov(gamma, VectorXd::Ones(3));
  const FactorFit fit = fit_factor_covariance(t_n, 1);
  CHECK((fit.implied_covariance() - t_n).norm() < 1e-6);
  CHECK(std::abs(std::abs(fit.loading(0, 0)) - 1.0) < 1e-4);
  CHECK(std::abs(fit.loading(1, 0) - fit.loading(0, 0)) < 1e-4);
  CHECK(std::abs(fit.loading(2, 0) - fit.loading(0, 0)) < 1e-4);
  CHECK(fit.converged);
  CHECK(fit.stationary);
}

TEST_CASE("factor count and row requirements") {
  const MatrixXd t_n = MatrixXd::Identity(5, 5);
  CHECK_THROWS_AS(fit_factor_covariance(t_n, 0), InvalidInput);
  CHECK_THROWS_AS(fit_factor_covariance(t_n, 3), InvalidInput);
  CHECK_NOTHROW(fit_factor_covariance(t_n, 2));
}

TEST_CASE("scenario-1 loadings separate confounded mediators") {
  SimConfig cfg;
  cfg.n = 1000;
  const auto [d, truth] = generate(cfg, 2);
  const MediatorFit mf = fit_mediator_model(d, BasisSpec::simulation_default());
  const FactorFit fit = fit_factor(mf.residuals, 1);
  const double se = 1.0 / std::sqrt(1000.0);
  CHECK(fit.stationary);
  CHECK(fit.loading.col(0).head(10).cwiseAbs().minCoeff() > 0.7);
  int within = 0;
  for (Index j = 10; j < 100; ++j) within += std::abs(fit.loading(j, 0)) < 3.0 * se;
  CHECK(within >= 85);
  CHECK(fit.loading.col(0).tail(90).cwiseAbs().maxCoeff() < 5.0 * se);
}

TEST_CASE("likelihood never decreases across EM iterations") {
  Rng rng(12);
  MatrixXd gamma = testing::normal_matrix(12, 2, rng);
  const MatrixXd r = testing::normal_matrix(400, 2, rng) * gamma.transpose() +
                     testing::normal_matrix(400, 12, rng);
  FactorOptions opts;
  opts.keep_trace = true;
  const FactorFit fit = fit_factor(r, 2, opts);
  REQUIRE(fit.trace.size() > 2);
  for (std::size_t i = 1; i < fit.trace.size(); ++i)
    CHECK(fit.trace[i] >= fit.trace[i - 1] - 1e-12 * std::abs(fit.trace[i - 1]));
  CHECK(fit.max_gradient <= 1e-5);
}

TEST_CASE("fitted Gram matrix is diagonal and decreasing") {
  Rng rng(13);
  MatrixXd gamma = testing::normal_matrix(10, 3, rng);
  const MatrixXd r = testing::normal_matrix(800, 3, rng) * gamma.transpose() +
                     testing::normal_matrix(800, 10, rng) * 0.7;
  const FactorFit fit = fit_factor(r, 3);
  const MatrixXd gram = fit.loading.transpose() * fit.uniqueness.cwiseInverse().asDiagonal() * fit.loading;
  for (Index a = 0; a < 3; ++a)
    for (Index b = 0; b < 3; ++b)
      if (a != b) CHECK(std::abs(gram(a, b)) < 1e-6);
  CHECK(gram(0, 0) > gram(1, 1));
  CHECK(gram(1, 1) > gram(2, 2));
  CHECK(gram(2, 2) > 0.0);
  CHECK(fit.uniqueness.minCoeff() >= fit.uniqueness_floor);
  CHECK(Eigen::LLT<MatrixXd>(fit.implied_covariance()).info() == Eigen::Success);
}

TEST_CASE("Heywood case stays on the uniqueness floor") {
  MatrixXd t_n(3, 3);
  t_n << 1, 0.9, 0.9, 0.9, 1, 0.5, 0.9, 0.5, 1;
  const FactorFit fit = fit_factor_covariance(t_n, 1);
  CHECK(fit.uniqueness.minCoeff() >= fit.uniqueness_floor);
  CHECK(fit.uniqueness(0) == doctest::Approx(fit.uniqueness_floor));
  CHECK(fit.stationary);
}

TEST_CASE("scale equivariance") {
  Rng rng(21);
  MatrixXd gamma = testing::normal_matrix(8, 1, rng);
  const MatrixXd r = testing::normal_matrix(500, 1, rng) * gamma.transpose() + testing::normal_matrix(500, 8, rng);
  FactorOptions opts;
  opts.relative_tolerance = 1e-15;
  opts.stationarity_tolerance = 1e-10;
  const double c = 3.0;
  const FactorFit a = fit_factor(r, 1, opts);
  opts.stationarity_tolerance = 1e-10 / (c * c);
  const FactorFit b = fit_factor(c * r, 1, opts);
  CHECK(testing::rel_diff(b.loading, c * a.loading) < 1e-6);
  CHECK(testing::rel_diff(b.uniqueness, c * c * a.uniqueness) < 1e-6);
}

TEST_CASE("likelihood gradient matches central differences") {
  Rng rng(5);
  const MatrixXd gamma = testing::normal_matrix(6, 2, rng);
  const VectorXd psi = (testing::normal_vector(6, rng).array().abs() + 0.5).matrix();
  const MatrixXd r = testing::normal_matrix(100, 6, rng);
  const MatrixXd t_n = sample_second_moment(r);
  const VectorXd g = factor_loglik_gradient(t_n, gamma, psi);
  const double h = 1e-6;
  for (Index i = 0; i < 12 + 6; ++i) {
    MatrixXd gp = gamma, gm = gamma;
    VectorXd pp = psi, pm = psi;
    if (i < 12) {
      gp(i / 2, i % 2) += h;
      gm(i / 2, i % 2) -= h;
    } else {
      pp(i - 12) += h;
      pm(i - 12) -= h;
    }
    const double fd = (factor_loglik(t_n, gp, pp) - factor_loglik(t_n, gm, pm)) / (2 * h);
    CHECK(g(i) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("one-dimensional rotation is a sign") {
  MatrixXd g(4, 1);
  g << 0.5, -2, 1, 0.1;
  const auto r = fix_rotation(g, VectorXd::Ones(4));
  CHECK(r.loading == -g);
  CHECK_FALSE(r.warning);
  const auto again = fix_rotation(r.loading, VectorXd::Ones(4));
  CHECK(again.loading == r.loading);
}

TEST_CASE("rotation of a random 6 x 2 loading") {
  Rng rng(3);
  const MatrixXd g = testing::normal_matrix(6, 2, rng);
  const auto r = fix_rotation(g, VectorXd::Ones(6));
  const MatrixXd gram = r.loading.transpose() * r.loading;
  CHECK(std::abs(gram(0, 1)) < 1e-10);
  CHECK(gram(0, 0) > gram(1, 1));
  CHECK((r.loading * r.loading.transpose() - g * g.transpose()).norm() < 1e-10);
  for (Index s = 0; s < 2; ++s) {
    Index arg;
    r.loading.col(s).cwiseAbs().maxCoeff(&arg);
    CHECK(r.loading(arg, s) > 0.0);
  }
  const auto twice = fix_rotation(r.loading, VectorXd::Ones(6));
  CHECK((twice.loading - r.loading).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rotation preserves the implied covariance") {
  Rng rng(7);
  const MatrixXd g = testing::normal_matrix(9, 3, rng);
  const VectorXd psi = (testing::normal_vector(9, rng).array().abs() + 0.2).matrix();
  const MatrixXd a = testing::random_rotation(3, rng);
  const auto r = fix_rotation(g * a, psi);
  CHECK((planted_cov(r.loading, psi) - planted_cov(g, psi)).norm() < 1e-10);
  const auto direct = fix_rotation(g, psi);
  CHECK((r.loading - direct.loading).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("tied Gram eigenvalues raise the rotation warning") {
  MatrixXd g = MatrixXd::Zero(4, 2);
  g(0, 0) = 1;
  g(1, 1) = 1;
  CHECK(fix_rotation(g, VectorXd::Ones(4)).warning);
}

TEST_CASE("condition (i) for one factor") {
  CHECK(check_condition_i(MatrixXd::Ones(3, 1)).holds());
  MatrixXd two = MatrixXd::Zero(6, 1);
  two(0, 0) = two(1, 0) = 1.0;
  const auto res = check_condition_i(two);
  CHECK(res.verdict == Verdict::Fails);
  CHECK(res.failing_row.has_value());
}

TEST_CASE("condition (i) for stacked 2 x 2 blocks, witnesses checked") {
  MatrixXd block(2, 2);
  block << 1, 2, -1, 1;
  MatrixXd g(6, 2);
  g << block, block, block;
  const auto res = check_condition_i(g);
  REQUIRE(res.holds());
  REQUIRE(res.witnesses.size() == 6);
  for (const auto& w : res.witnesses) {
    for (Index a : w.first) {
      CHECK(a != w.deleted_row);
      for (Index b : w.second) CHECK(a != b);
    }
    for (Index b : w.second) CHECK(b != w.deleted_row);
    CHECK(lu_of(g, w.first).rank() == 2);
    CHECK(lu_of(g, w.second).rank() == 2);
  }
}

TEST_CASE("condition (i) fails with four rank-two rows") {
  MatrixXd g = MatrixXd::Zero(7, 2);
  g.topRows(4) << 1, 0, 0, 1, 1, 1, 1, -1;
  const auto res = check_condition_i(g);
  // deleting one of the four leaves three rows: not two disjoint rank-2 pairs
  CHECK(res.verdict == Verdict::Fails);
  MatrixXd h = MatrixXd::Zero(7, 2);
  h.topRows(5) << 1, 0, 0, 1, 1, 1, 1, -1, 2, 1;
  CHECK(check_condition_i(h).holds());
}

TEST_CASE("factor count: dominant factor and flat spectrum") {
  Rng rng(17);
  MatrixXd gamma = MatrixXd::Zero(9, 1);
  gamma.col(0).setConstant(10.0 / 3.0);  // norm 10
  const auto dominant = select_num_factors(testing::planted_residuals(planted_cov(gamma, VectorXd::Ones(9)), 200, rng), 4);
  CHECK(dominant.t == 1);
  CHECK_FALSE(dominant.low_confidence);
  CHECK(dominant.eigenvalues[0] == doctest::Approx(101.0));
  const auto flat = select_num_factors(testing::planted_residuals(MatrixXd::Identity(9, 9), 200, rng), 4);
  CHECK(flat.t == 1);
  CHECK(flat.low_confidence);
  CHECK_THROWS_AS(select_num_factors(MatrixXd::Identity(9, 9), 5), InvalidInput);
}

TEST_CASE("factor count on scenario-1 residuals") {
  SimConfig cfg;
  cfg.n = 1000;
  int ones = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto [d, truth] = generate(cfg, rep);
    const MediatorFit mf = fit_mediator_model(d, BasisSpec::simulation_default());
    ones += select_num_factors(mf.residuals, 5).t == 1;
  }
  CHECK(ones >= 19);
}

TEST_CASE("sandwich diagonal matches the dense product") {
  Rng rng(31);
  for (Index t : {1, 2, 4}) {
    const MatrixXd g = testing::normal_matrix(15, t, rng);
    const VectorXd psi = (testing::normal_vector(15, rng).array().abs() + 0.3).matrix();
    const MatrixXd t_n = sample_second_moment(testing::normal_matrix(60, 15, rng));
    const detail::WoodburyInverse w(g, psi);
    const MatrixXd inv = w.dense();
    const VectorXd dense = (inv * t_n * inv).diagonal();
    CHECK(testing::rel_diff(detail::sandwich_diagonal(t_n, w), dense) < 1e-12);
    CHECK(testing::rel_diff(inv, planted_cov(g, psi).inverse()) < 1e-10);
    CHECK(detail::trace_product(t_n, w) == doctest::Approx((t_n * inv).trace()).epsilon(1e-12));
  }
}
