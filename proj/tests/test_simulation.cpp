#include "support.hpp"

#include "medsel/error.hpp"
#include "medsel/simulation.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace medsel;

TEST_CASE("zero-noise generator reproduces the linear formula") {
  SimConfig cfg;
  cfg.n = 50;
  cfg.p = 12;
  cfg.phi = 0.0;
  cfg.zero_noise = true;
  const auto [d, truth] = generate(cfg, 0);
  for (Index i = 0; i < 50; ++i) {
    const double z = d.z(i), x = d.x(i, 0), u = truth.u_values(i);
    for (Index j = 0; j < 12; ++j) {
      const double expect = z + x + (j < 3 ? 0.5 * std::exp(x) : 0.0) + (j < 10 ? u : 0.0);
      CHECK(std::abs(d.m(i, j) - expect) < 1e-12);
    }
    CHECK(std::abs(d.y(i) - (z + d.m.row(i).head(5).sum() + x)) < 1e-12);
  }
}

TEST_CASE("the squared confounder term enters only through phi1") {
  SimConfig cfg;
  cfg.n = 40;
  cfg.p = 10;
  cfg.zero_noise = true;
  cfg.phi = 2.0;
  const auto [a, ta] = generate(cfg, 5);
  cfg.phi1 = 0.5;
  const auto [b, tb] = generate(cfg, 5);
  CHECK(a.m == b.m);
  const VectorXd diff = b.y - a.y;
  CHECK((diff - 0.5 * ta.u_values.cwiseAbs2()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("support and confounding counts") {
  SimConfig cfg;
  cfg.n = 300;
  const auto [d, truth] = generate(cfg, 0);
  CHECK(truth.active_true == std::vector<Index>{0, 1, 2, 3, 4});
  CHECK(truth.beta2_true.sum() == 5.0);
  CHECK(d.q() == 1);
  CHECK(d.p() == 100);
  // confounded mediators correlate with U, the rest do not
  int confounded = 0;
  for (Index j = 0; j < 100; ++j) {
    const VectorXd mc = d.m.col(j).array() - d.m.col(j).mean();
    const VectorXd uc = truth.u_values.array() - truth.u_values.mean();
    const double corr = mc.dot(uc) / std::sqrt(mc.squaredNorm() * uc.squaredNorm());
    confounded += corr > 0.25;
  }
  CHECK(confounded == 10);

  cfg.scenario = 2;
  const auto [d2, truth2] = generate(cfg, 0);
  std::vector<Index> expect{0, 1, 2, 3, 4};
  for (Index j = 85; j < 100; ++j) expect.push_back(j);
  CHECK(truth2.active_true == expect);
}

TEST_CASE("generation is a function of seed and replication") {
  SimConfig cfg;
  cfg.n = 30;
  cfg.p = 10;
  const auto a = generate(cfg, 3);
  const auto b = generate(cfg, 3);
  CHECK(a.first.y == b.first.y);
  CHECK(a.first.m == b.first.m);
  CHECK(generate(cfg, 4).first.y != a.first.y);
  cfg.seed = 2;
  CHECK(generate(cfg, 3).first.y != a.first.y);
  CHECK(cv_seed(cfg, 3) != cv_seed(cfg, 4));
}

TEST_CASE("metrics examples") {
  SimConfig cfg;
  cfg.n = 10;
  const auto [d, truth] = generate(cfg, 0);
  const Metrics exact = metrics(truth.beta2_true, truth);
  CHECK(exact.mse == 0.0);
  CHECK(exact.tp == 5.0);
  CHECK(exact.fp == 0.0);
  const Metrics none = metrics(VectorXd::Zero(100), truth);
  CHECK(none.mse == 5.0);
  CHECK(none.tp == 0.0);
  CHECK(none.fp == 0.0);
  VectorXd spurious = truth.beta2_true;
  spurious(40) = 0.1;
  const Metrics one = metrics(spurious, truth);
  CHECK(one.fp == 1.0);
  CHECK(one.mse == doctest::Approx(0.01));
  CHECK_THROWS_AS(metrics(VectorXd::Zero(3), truth), InvalidInput);
}

TEST_CASE("config validation") {
  SimConfig cfg;
  cfg.n_reps = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = SimConfig{};
  cfg.p = 9;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = SimConfig{};
  cfg.scenario = 3;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = SimConfig{};
  cfg.null_treatment = {100};
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = SimConfig{};
  cfg.methods.clear();
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  CHECK(parse_method("naive_adaptive_lasso") == Method::NaiveAdaptiveLasso);
  CHECK_THROWS_AS(parse_method("ridge"), InvalidInput);
}

TEST_CASE("a single replication row equals that replication") {
  SimConfig cfg;
  cfg.n = 300;
  cfg.p = 20;
  cfg.n_reps = 1;
  const auto rows = run_replications(cfg);
  const ReplicationOutcome one = run_replication(cfg, 0);
  REQUIRE(rows.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(rows[k].method == cfg.methods[k]);
    CHECK(rows[k].mse == one.metrics[k].mse);
    CHECK(rows[k].tp == one.metrics[k].tp);
    CHECK(rows[k].fp == one.metrics[k].fp);
    CHECK(rows[k].n_reps == 1);
  }
}

TEST_CASE("results do not depend on the worker count") {
  SimConfig cfg;
  cfg.n = 300;
  cfg.p = 20;
  cfg.n_reps = 6;
  std::ostringstream a, b;
  write_metrics_csv(a, run_replications(cfg));
  cfg.threads = 4;
  write_metrics_csv(b, run_replications(cfg));
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("method,scenario,n,p,phi,phi1,MSE,TP,FP,reps,failures\n", 0) == 0);
}

TEST_CASE("without confounding naive and proposed estimates agree") {
  SimConfig cfg;
  cfg.phi = 0.0;
  double gap = 0.0, spread = 0.0;
  const int reps = 5;
  for (int rep = 0; rep < reps; ++rep) {
    const auto [d, truth] = generate(cfg, rep);
    TwoStageOptions opts;
    opts.seed = cv_seed(cfg, rep);
    const VectorXd prop = fit_proposed(d, opts).params.beta2;
    const VectorXd naive = fit_naive(d, true, opts).params.beta2;
    gap += (prop - naive).head(5).mean();
    spread += (naive - truth.beta2_true).head(5).cwiseAbs().mean();
  }
  // the paired difference is well inside the sampling error of either fit
  CHECK(std::abs(gap / reps) < 0.02);
  CHECK(spread / reps < 0.1);
}

TEST_CASE("confounding bias separates the naive adaptive lasso") {
  SimConfig cfg;
  cfg.phi = 4.0;
  cfg.n_reps = 4;
  const auto rows = run_replications(cfg);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].mse < 0.1);
  CHECK(rows[2].mse > 1.0);
  CHECK(rows[2].fp >= 4.0);
}

TEST_CASE("false positives fall with n under strong confounding") {
  double previous = 1e9;
  for (Index n : {300, 600, 1000}) {
    SimConfig cfg;
    cfg.n = n;
    cfg.phi = 4.0;
    cfg.n_reps = 20;
    cfg.methods = {Method::Proposed};
    cfg.threads = 4;
    const double fp = run_replications(cfg)[0].fp;
    CHECK(fp <= previous);
    previous = fp;
  }
}
