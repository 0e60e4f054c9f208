#pragma once

#include "medsel/pipeline.hpp"

#include <iosfwd>
#include <string>

namespace medsel {

// Names of the flattened outcome coordinates: (intercept), z, mediators, covariates, L1..Lt.
std::vector<std::string> coordinate_names(const Dataset& d, Index t);

std::string fit_report_json(const Dataset& d, const PipelineResult& res);

// coordinate,estimate,se,initial_estimate,z_value,p_value
void write_coefficients_csv(std::ostream& out, const Dataset& d, const PipelineResult& res);

// stage,lambda,delta,mean_error,se,nonzero
void write_cv_csv(std::ostream& out, const TwoStageFit& fit);

}  // namespace medsel
