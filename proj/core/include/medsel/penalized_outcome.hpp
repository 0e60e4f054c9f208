#pragma once

#include "medsel/dataset.hpp"

#include <cstdint>
#include <vector>

namespace medsel {

// Penalty on the mediator coefficients beta2 only; intercept, treatment,
// covariates and proxy columns are never penalized.
struct PenaltySpec {
  double lambda = 0.0;
  VectorXd weights;             // length p, >= 0; empty means all ones
  double delta = 1.0;           // adaptive exponent, recorded with the fit
  std::vector<bool> penalized;  // length p; empty means every mediator

  void validate(Index p) const;
  VectorXd effective_weights(Index p) const;
  bool is_penalized(Index j) const;
};

struct CvRow {
  double lambda = 0.0;
  double delta = 1.0;
  double mean_error = 0.0;
  double se = 0.0;
  Index nonzero = 0;  // support size of the full-data fit at this lambda
};

struct OutcomeFit {
  OutcomeParams params;
  std::vector<Index> active_set;  // j with beta2_j != 0
  VectorXd residuals;             // psi-hat
  double lambda_used = 0.0;
  double delta_used = 1.0;
  VectorXd weights;
  std::vector<CvRow> cv_table;
  double objective = 0.0;
  int sweeps = 0;
  std::vector<double> objective_trace;  // per sweep, when requested
};

struct SolverOptions {
  double tolerance = 1e-9;  // max coefficient change between sweeps
  int max_sweeps = 100000;
  bool keep_trace = false;
};

// Minimises E(Y - R'xi)^2 + (lambda/n) sum_r w_r |beta2_r| over
// R = (1, Z, M, X, L) by cyclic coordinate descent.
OutcomeFit fit_partial_lasso(const Dataset& d, const MatrixXd& proxy, const PenaltySpec& spec,
                             const SolverOptions& opts = {});

// Warm-started fits along a lambda grid, in the order given.
std::vector<OutcomeFit> fit_path(const Dataset& d, const MatrixXd& proxy, const PenaltySpec& base,
                                 const std::vector<double>& lambdas,
                                 const SolverOptions& opts = {});

double partial_objective(const Dataset& d, const MatrixXd& proxy, const OutcomeParams& params,
                         const PenaltySpec& spec);

// Largest violation of the optimality conditions of the penalized objective.
double kkt_check(const OutcomeFit& fit, const Dataset& d, const MatrixXd& proxy,
                 const PenaltySpec& spec);

struct AdaptiveWeights {
  VectorXd weights;
  std::vector<Index> flipped_offset;  // coordinates where beta + 1/n was exactly 0
};

// w_r = |beta_r + 1/n|^-delta.
AdaptiveWeights adaptive_weights(const VectorXd& beta_la_2, double delta, Index n);

// Smallest lambda at which every penalized coordinate is zero.
double lambda_max(const Dataset& d, const MatrixXd& proxy, const PenaltySpec& spec);

// `count` log-spaced values from lambda_max down to ratio * lambda_max.
std::vector<double> lambda_grid(double lambda_max, int count = 100, double ratio = 1e-4);

// Minimum: lambda with the smallest mean CV error. OneSe: the largest lambda
// whose mean error is within one standard error of that minimum.
enum class CvRule { Minimum, OneSe };

struct CvOptions {
  int folds = 5;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  CvRule rule = CvRule::Minimum;
  // The full-data path stops once the deviance ratio R^2 gains less than
  // path_fdev * R^2 per step (or exceeds 0.999), after at least min_path
  // points; 0 keeps the whole grid.
  double path_fdev = 1e-5;
  int min_path = 5;
};

struct CvResult {
  double lambda_star = 0.0;
  std::vector<CvRow> table;
  std::vector<int> skipped_folds;
  std::vector<OutcomeFit> path;  // full-data fits along the (deduplicated, truncated) grid
  bool truncated = false;
};

// Deterministic fold of each row for (n, folds, seed).
std::vector<int> fold_assignment(Index n, int folds, std::uint64_t seed);

// K-fold CV of squared prediction error. The grid is deduplicated, sorted
// descending and possibly truncated (see CvOptions::path_fdev); ties in mean
// error go to the larger lambda.
CvResult cross_validate(const Dataset& d, const MatrixXd& proxy, const PenaltySpec& base,
                        std::vector<double> grid, const CvOptions& opts,
                        const SolverOptions& solver = {});

struct TwoStageOptions {
  int folds = 5;
  std::uint64_t seed = 0;
  int n_lambda = 100;
  double lambda_ratio = 1e-4;
  std::vector<double> delta_grid{2.0};
  unsigned threads = 1;
  CvRule rule = CvRule::Minimum;
  double path_fdev = 1e-5;
  double adaptive_path_fdev = 1e-6;  // same rule, adaptive stage
  int min_path = 5;
  SolverOptions solver;
};

struct TwoStageFit {
  OutcomeFit initial;   // partially penalized lasso, unit weights
  OutcomeFit adaptive;  // adaptive lasso with weights from `initial`
  VectorXd weights;
  std::vector<Index> flipped_offset;
};

// One CV-tuned stage with fixed weights.
OutcomeFit fit_lasso_cv(const Dataset& d, const MatrixXd& proxy, const PenaltySpec& base,
                        const TwoStageOptions& opts);

// Initial lasso, adaptive weights, adaptive lasso; each stage tuned by its own CV.
TwoStageFit fit_two_stage(const Dataset& d, const MatrixXd& proxy, const TwoStageOptions& opts);

}  // namespace medsel
