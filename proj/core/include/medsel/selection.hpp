#pragma once

#include "medsel/dataset.hpp"
#include "medsel/mediator_model.hpp"
#include "medsel/multiple_testing.hpp"
#include "medsel/penalized_outcome.hpp"
#include "medsel/sandwich.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace medsel {

struct PathwayRow {
  Index index = -1;
  std::string name;
  double beta2_hat = 0.0;
  double beta2_se = 0.0;    // NaN without a sandwich
  double lambda_hat = 0.0;
  double lambda_se = 0.0;
  double nie_hat = 0.0;
  double nie_se = 0.0;      // product-method SE, NaN without a sandwich
  double raw_p = 1.0;       // test of lambda_j = 0
  double adjusted_p = 1.0;
  bool lambda_degenerate = false;
  bool active = false;
};

struct SelectionReport {
  EffectEstimate nde;  // se and p NaN without a sandwich
  std::vector<PathwayRow> pathways;
  Correction method = Correction::Bonferroni;
  double alpha = 0.05;
  double z = 1.0;
  double z_prime = 0.0;
  std::vector<Index> active_pathways;
  std::string nie_se_method = "product-method SE";
};

// Step 1 takes the nonzero beta2 of `fit`; step 2 tests lambda_j = 0 for each
// and applies `method` at level alpha over those hypotheses.
SelectionReport select_active_pathways(const Dataset& d, const OutcomeFit& fit,
                                       const MediatorFit& mediators, Correction method,
                                       double alpha, double z, double z_prime,
                                       const SandwichResult* sandwich = nullptr);

// mediator,estimate,sd,p_value,adjusted_p,beta2,beta2_se,lambda,lambda_se,active
void write_selection_csv(std::ostream& out, const SelectionReport& report);

}  // namespace medsel
