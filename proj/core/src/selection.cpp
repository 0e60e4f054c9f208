#include "medsel/selection.hpp"

#include "medsel/csv.hpp"
#include "medsel/error.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace medsel {

SelectionReport select_active_pathways(const Dataset& d, const OutcomeFit& fit,
                                       const MediatorFit& mediators, Correction method,
                                       double alpha, double z, double z_prime,
                                       const SandwichResult* sandwich) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("significance level must lie in (0, 1)");
  if (fit.params.beta2.size() != d.p() || mediators.p() != d.p())
    throw InvalidInput("fits do not match the dataset");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  SelectionReport rep;
  rep.method = method;
  rep.alpha = alpha;
  rep.z = z;
  rep.z_prime = z_prime;
  if (sandwich) {
    rep.nde = test_nde(fit, *sandwich, z, z_prime);
  } else {
    rep.nde = {fit.params.beta1 * (z - z_prime), nan, nan};
    if (z == z_prime) rep.nde = {};
  }

  std::vector<double> raw;
  for (Index j : fit.active_set) {
    PathwayRow row;
    row.index = j;
    row.name = d.mediator_name(j);
    row.beta2_hat = fit.params.beta2(j);
    const LambdaEstimate lam = lambda_hat(mediators, j, z, z_prime, d.x);
    const LambdaTest test = test_lambda(lam);
    row.lambda_hat = lam.estimate;
    row.lambda_se = lam.se;
    row.raw_p = test.p_value;
    row.lambda_degenerate = test.degenerate;
    row.nie_hat = row.beta2_hat * lam.estimate;
    if (sandwich) {
      row.beta2_se = sandwich->se_of(2 + j);
      row.nie_se = nie_from_parts(row.beta2_hat, row.beta2_se, lam).se;
    } else {
      row.beta2_se = nan;
      row.nie_se = nan;
    }
    raw.push_back(row.raw_p);
    rep.pathways.push_back(std::move(row));
  }
  const auto adj = adjust_pvalues(raw, method);
  for (std::size_t i = 0; i < rep.pathways.size(); ++i) {
    rep.pathways[i].adjusted_p = adj[i];
    rep.pathways[i].active = adj[i] <= alpha;
    if (rep.pathways[i].active) rep.active_pathways.push_back(rep.pathways[i].index);
  }
  return rep;
}

void write_selection_csv(std::ostream& out, const SelectionReport& report) {
  out << "mediator,estimate,sd,p_value,adjusted_p,beta2,beta2_se,lambda,lambda_se,active\n";
  for (const auto& r : report.pathways) {
    out << csv_escape(r.name) << ',' << format_double(r.nie_hat) << ',' << format_double(r.nie_se)
        << ',' << format_double(r.raw_p) << ',' << format_double(r.adjusted_p) << ','
        << format_double(r.beta2_hat) << ',' << format_double(r.beta2_se) << ','
        << format_double(r.lambda_hat) << ',' << format_double(r.lambda_se) << ','
        << (r.active ? 1 : 0) << '\n';
  }
}

}  // namespace medsel
