#pragma once

#include "medsel/dataset.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace medsel {

struct FactorOptions {
  int max_iterations = 2000;
  double relative_tolerance = 1e-9;  // on the quasi-log-likelihood
  double floor_fraction = 1e-4;      // uniqueness floor, relative to mean diag(T_n)
  double stationarity_tolerance = 1e-5;
  bool keep_trace = false;
};

struct FactorFit {
  MatrixXd loading;     // p x t, rotation-fixed
  VectorXd uniqueness;  // p, each >= floor
  Index t = 0;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  double max_gradient = 0.0;  // sup-norm of the likelihood gradient at the solution
  bool stationary = false;
  bool rotation_warning = false;
  double uniqueness_floor = 0.0;
  std::vector<double> trace;  // log-likelihood per iteration when requested

  MatrixXd implied_covariance() const;
};

// l(Gamma, Psi) = -log|Sigma| - tr(T Sigma^-1), Sigma = Gamma Gamma' + diag(Psi).
double factor_loglik(const MatrixXd& sample_cov, const MatrixXd& loading,
                     const VectorXd& uniqueness);

// Gradient of factor_loglik: first the loading block (row-major, j*t + s),
// then the uniqueness block.
VectorXd factor_loglik_gradient(const MatrixXd& sample_cov, const MatrixXd& loading,
                                const VectorXd& uniqueness);

// Quasi-ML factor analysis of residuals via EM on T_n = E[r r'].
// Throws InvalidInput when t < 1 or p < 2t + 1.
FactorFit fit_factor(const MatrixXd& residuals, Index t, const FactorOptions& opts = {});
FactorFit fit_factor_covariance(const MatrixXd& sample_cov, Index t,
                                const FactorOptions& opts = {});

struct RotationResult {
  MatrixXd loading;
  bool warning = false;  // Gram eigenvalues nearly tied: rotation not unique
};

// Orthogonal rotation making Gamma' Psi^-1 Gamma diagonal with decreasing
// entries; each column's largest-magnitude entry is made positive.
RotationResult fix_rotation(const MatrixXd& loading, const VectorXd& uniqueness);

enum class Verdict { Holds, Fails, Inconclusive };

struct RowPartition {
  Index deleted_row = -1;
  std::vector<Index> first;
  std::vector<Index> second;
};

struct ConditionIResult {
  Verdict verdict = Verdict::Fails;
  bool holds() const { return verdict == Verdict::Holds; }
  std::vector<RowPartition> witnesses;  // one per deleted row when it holds
  std::optional<Index> failing_row;     // first deletion without a witness
  std::string detail;
};

// After deleting any row, two disjoint row subsets of full column rank remain.
ConditionIResult check_condition_i(const MatrixXd& loading, double zero_tol = 1e-8);

struct FactorCountResult {
  Index t = 1;
  bool low_confidence = false;
  std::vector<double> eigenvalues;  // descending
  std::vector<double> ratios;       // mu_j / mu_{j+1}, j = 1..t_max
};

// Eigenvalue-ratio selection of the factor count over 1..t_max.
FactorCountResult select_num_factors(const MatrixXd& residuals, Index t_max);

MatrixXd sample_second_moment(const MatrixXd& residuals);

}  // namespace medsel
