#pragma once

#include "medsel/dataset.hpp"
#include "medsel/factor_model.hpp"
#include "medsel/mediator_model.hpp"
#include "medsel/penalized_outcome.hpp"

#include <optional>
#include <string>
#include <vector>

namespace medsel {

struct SandwichOptions {
  bool full_index_set = false;  // every mediator instead of the active set
  double condition_limit = 1e12;
  unsigned threads = 1;
};

struct SandwichResult {
  MatrixXd sigma;                // covariance of sqrt(n)(xi-hat - xi) over the index set
  std::vector<Index> index_map;  // position -> flattened outcome coordinate
  MatrixXd c_tilde;              // E-hat[R R'] over the index set
  MatrixXd k_outer;              // E-hat[K K']
  VectorXd se;                   // sqrt(diag(sigma) / n)
  Index n = 0;
  double c_condition = 0.0;
  double lambda_over_sqrt_n = 0.0;
  std::vector<std::string> warnings;

  // Position of outcome coordinate c, if retained.
  std::optional<Index> position(Index coordinate) const;
  // Standard error of outcome coordinate c; throws InvalidInput when absent.
  double se_of(Index coordinate) const;
};

// Retained coordinates: intercept, treatment, active mediators (or all),
// covariates, proxy columns. Values are flattened OutcomeParams indices.
std::vector<Index> retained_index_set(const OutcomeFit& fit, Index p, Index q, Index t,
                                      bool full);

// Plug-in sandwich for the outcome coefficients, accounting for estimation
// of the proxy through the mediator and factor models. `factors` must be the
// fit that produced `proxy`.
SandwichResult estimate_sandwich(const Dataset& d, const MediatorFit& mediators,
                                 const FactorFit& factors, const MatrixXd& proxy,
                                 const OutcomeFit& fit, const SandwichOptions& opts = {});

// Same covariance with nu known: C^-1 E-hat(R psi^2 R') C^-1.
SandwichResult ols_sandwich(const Dataset& d, const MatrixXd& proxy, const OutcomeFit& fit,
                            const SandwichOptions& opts = {});

struct EffectEstimate {
  double estimate = 0.0;
  double se = 0.0;
  double p_value = 1.0;
};

EffectEstimate nde_from_parts(double beta1, double se_beta1, double z, double z_prime);
EffectEstimate test_nde(const OutcomeFit& fit, const SandwichResult& sandwich, double z,
                        double z_prime);

// Product-method SE, beta and lambda treated as independent.
EffectEstimate nie_from_parts(double beta2, double se_beta2, const LambdaEstimate& lambda);
EffectEstimate estimate_nie(Index j, const OutcomeFit& fit, const MediatorFit& mediators,
                            const SandwichResult& sandwich, double z, double z_prime,
                            const MatrixXd& x_sample);

}  // namespace medsel
