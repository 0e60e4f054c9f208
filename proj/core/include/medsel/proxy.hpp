#pragma once

#include "medsel/dataset.hpp"
#include "medsel/factor_model.hpp"
#include "medsel/mediator_model.hpp"

namespace medsel {

// Delta = (Gamma Gamma' + Psi)^-1 Gamma via the Woodbury form
// Psi^-1 Gamma (I + Gamma' Psi^-1 Gamma)^-1.
MatrixXd compute_delta(const MatrixXd& loading, const VectorXd& uniqueness);

// Same quantity from a dense solve against the implied covariance.
MatrixXd compute_delta_direct(const MatrixXd& loading, const VectorXd& uniqueness);

// Row i of the proxy is Delta' times row i of the residuals.
MatrixXd compute_proxy(const MatrixXd& residuals, const MatrixXd& delta);

struct ConditionII {
  Index rank = 0;
  double condition_number = 0.0;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  bool holds = false;
};

// Full-rank check of H = E[R R'], R = (1, Z, M, X, L).
ConditionII check_condition_ii(const Dataset& d, const MatrixXd& proxy,
                               double relative_threshold = 1e-10);

struct ProxyResult {
  MatrixXd delta;  // p x t
  MatrixXd proxy;  // n x t
  ConditionII condition_ii;
};

ProxyResult construct_proxy(const Dataset& d, const MediatorFit& mediators,
                            const FactorFit& factors);

}  // namespace medsel
