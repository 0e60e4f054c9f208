#pragma once

#include "medsel/dataset.hpp"
#include "medsel/factor_model.hpp"
#include "medsel/mediator_model.hpp"
#include "medsel/multiple_testing.hpp"
#include "medsel/penalized_outcome.hpp"
#include "medsel/proxy.hpp"
#include "medsel/sandwich.hpp"
#include "medsel/selection.hpp"

#include <optional>
#include <string>
#include <vector>

namespace medsel {

struct PipelineOptions {
  std::optional<BasisSpec> basis;  // default: {1, Z, X_1..X_q}
  std::optional<Index> t;          // factor count; empty selects it from the data
  Index t_max = 5;
  FactorOptions factor;
  TwoStageOptions outcome;
  bool sandwich = true;
  SandwichOptions sandwich_options;
  Correction correction = Correction::Bonferroni;
  double alpha = 0.05;
  double z = 1.0;
  double z_prime = 0.0;
};

struct IdentificationReport {
  MediatorFit mediators;
  std::optional<FactorCountResult> factor_count;
  FactorFit factors;
  ConditionIResult condition_i;
  ProxyResult proxy;  // carries condition (ii)
};

// Stages 1 and 2 plus the proxy, with both identification checks.
IdentificationReport identify(const Dataset& d, const PipelineOptions& opts);

struct PipelineResult {
  IdentificationReport id;
  TwoStageFit outcome;
  std::optional<SandwichResult> sandwich;
  SelectionReport selection;
  std::vector<std::string> warnings;
};

// Mediator fit, factor fit, proxy, partial lasso, adaptive lasso, sandwich,
// pathway selection. Throws NumericalFailure when condition (ii) fails.
PipelineResult analyze(const Dataset& d, const PipelineOptions& opts);

// Human-readable identification summary.
std::string identification_text(const IdentificationReport& id);

}  // namespace medsel
