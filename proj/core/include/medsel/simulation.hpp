#pragma once

#include "medsel/dataset.hpp"
#include "medsel/penalized_outcome.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace medsel {

enum class Method { Proposed, NaiveLasso, NaiveAdaptiveLasso };

Method parse_method(const std::string& name);  // proposed, naive_lasso, naive_adaptive_lasso
std::string to_string(Method m);

struct SimConfig {
  Index n = 1000;
  Index p = 100;
  int scenario = 1;
  double phi = 1.0;
  double phi1 = 0.0;  // coefficient of U^2 in the outcome
  int n_reps = 200;
  std::uint64_t seed = 1;
  std::vector<Method> methods{Method::Proposed, Method::NaiveLasso, Method::NaiveAdaptiveLasso};
  // Mediators given beta2 = 1 and no treatment effect (gamma1 = 0).
  std::vector<Index> null_treatment;
  bool zero_noise = false;  // debug: epsilon = eta = 0
  unsigned threads = 1;
  TwoStageOptions outcome;

  void validate() const;
};

struct SimTruth {
  VectorXd beta2_true;
  std::vector<Index> active_true;
  VectorXd gamma1;
  VectorXd u_values;
};

// Replication `rep` of the configured design; q = 1 covariate.
std::pair<Dataset, SimTruth> generate(const SimConfig& cfg, int rep);

// Seed for cross-validation folds in replication `rep`, shared by all methods.
std::uint64_t cv_seed(const SimConfig& cfg, int rep);

// Penalized fits on (1, Z, M, X) with no proxy.
OutcomeFit fit_naive(const Dataset& d, bool adaptive, const TwoStageOptions& opts = {});

// Mediator basis {1, Z, X, exp(X)}, one factor, proxy, then the two-stage fit.
OutcomeFit fit_proposed(const Dataset& d, const TwoStageOptions& opts = {});

struct Metrics {
  double mse = 0.0;
  double tp = 0.0;
  double fp = 0.0;
};

Metrics metrics(const VectorXd& beta2_hat, const SimTruth& truth);

struct MetricsRow {
  Method method = Method::Proposed;
  int scenario = 1;
  Index n = 0;
  Index p = 0;
  double phi = 0.0;
  double phi1 = 0.0;
  double mse = 0.0;
  double tp = 0.0;
  double fp = 0.0;
  int n_reps = 0;     // successful replications
  int failures = 0;
};

struct ReplicationOutcome {
  std::vector<Metrics> metrics;  // one per configured method
  std::vector<bool> failed;
  std::vector<std::string> errors;
};

ReplicationOutcome run_replication(const SimConfig& cfg, int rep);

// Averages over replications per method. Throws NumericalFailure when more
// than 5% of some method's fits fail.
std::vector<MetricsRow> run_replications(const SimConfig& cfg);

// method,scenario,n,p,phi,phi1,MSE,TP,FP,reps,failures
void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);

}  // namespace medsel
