#include "medsel/report.hpp"

#include "medsel/csv.hpp"
#include "medsel/stats.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <ostream>

namespace medsel {

using nlohmann::json;

namespace {

// JSON has no NaN; missing values become null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json effect_json(const EffectEstimate& e) {
  return {{"estimate", num(e.estimate)}, {"se", num(e.se)}, {"p_value", num(e.p_value)}};
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Holds: return "holds";
    case Verdict::Fails: return "fails";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

}  // namespace

std::vector<std::string> coordinate_names(const Dataset& d, Index t) {
  std::vector<std::string> names{"(intercept)", "z"};
  for (Index j = 0; j < d.p(); ++j) names.push_back(d.mediator_name(j));
  for (Index j = 0; j < d.q(); ++j) names.push_back(d.covariate_name(j));
  for (Index s = 0; s < t; ++s) names.push_back("L" + std::to_string(s + 1));
  return names;
}

std::string fit_report_json(const Dataset& d, const PipelineResult& res) {
  const OutcomeFit& ad = res.outcome.adaptive;
  const OutcomeFit& la = res.outcome.initial;
  const auto& id = res.id;
  json j;
  j["n"] = d.n();
  j["p"] = d.p();
  j["q"] = d.q();
  j["t"] = id.factors.t;
  j["nde"] = effect_json(res.selection.nde);
  j["contrast"] = {{"z", res.selection.z}, {"z_prime", res.selection.z_prime}};

  json active = json::array();
  for (Index a : ad.active_set) active.push_back(d.mediator_name(a));
  j["active_set"] = active;
  json act = json::array();
  for (Index a : res.selection.active_pathways) act.push_back(d.mediator_name(a));
  j["active_pathways"] = act;
  j["correction"] = to_string(res.selection.method);
  j["alpha"] = res.selection.alpha;

  j["tuning"] = {{"initial", {{"lambda", la.lambda_used}, {"nonzero", la.active_set.size()}}},
                 {"adaptive",
                  {{"lambda", ad.lambda_used},
                   {"delta", ad.delta_used},
                   {"nonzero", ad.active_set.size()},
                   {"objective", ad.objective}}}};

  json fac;
  fac["loglik"] = id.factors.loglik;
  fac["iterations"] = id.factors.iterations;
  fac["converged"] = id.factors.converged;
  fac["stationary"] = id.factors.stationary;
  fac["max_gradient"] = id.factors.max_gradient;
  fac["rotation_warning"] = id.factors.rotation_warning;
  if (id.factor_count) {
    fac["selected_t"] = id.factor_count->t;
    fac["low_confidence"] = id.factor_count->low_confidence;
    fac["eigenvalue_ratios"] = id.factor_count->ratios;
  }
  j["factor_model"] = fac;

  const auto& c2 = id.proxy.condition_ii;
  j["identification"] = {
      {"condition_i", {{"verdict", verdict_name(id.condition_i.verdict)}, {"detail", id.condition_i.detail}}},
      {"condition_ii",
       {{"holds", c2.holds}, {"rank", c2.rank}, {"condition_number", num(c2.condition_number)}}}};

  if (res.sandwich) {
    j["sandwich"] = {{"dimension", res.sandwich->index_map.size()},
                     {"c_condition", num(res.sandwich->c_condition)},
                     {"lambda_over_sqrt_n", res.sandwich->lambda_over_sqrt_n}};
  }
  json paths = json::array();
  for (const auto& r : res.selection.pathways)
    paths.push_back({{"mediator", r.name},
                     {"beta2", num(r.beta2_hat)},
                     {"beta2_se", num(r.beta2_se)},
                     {"lambda", num(r.lambda_hat)},
                     {"lambda_se", num(r.lambda_se)},
                     {"nie", num(r.nie_hat)},
                     {"nie_se", num(r.nie_se)},
                     {"raw_p", num(r.raw_p)},
                     {"adjusted_p", num(r.adjusted_p)},
                     {"active", r.active}});
  j["pathways"] = paths;
  j["nie_se_method"] = res.selection.nie_se_method;
  j["warnings"] = res.warnings;
  return j.dump(2) + "\n";
}

void write_coefficients_csv(std::ostream& out, const Dataset& d, const PipelineResult& res) {
  const VectorXd xi = res.outcome.adaptive.params.flatten();
  const VectorXd xi0 = res.outcome.initial.params.flatten();
  const auto names = coordinate_names(d, res.outcome.adaptive.params.phi.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out << "coordinate,estimate,se,initial_estimate,z_value,p_value\n";
  for (Index c = 0; c < xi.size(); ++c) {
    double se = nan;
    if (res.sandwich)
      if (auto pos = res.sandwich->position(c)) se = res.sandwich->se(*pos);
    const double zv = se > 0.0 ? xi(c) / se : nan;
    const double pv = std::isfinite(zv) ? two_sided_normal_p(zv) : nan;
    out << csv_escape(names[static_cast<std::size_t>(c)]) << ',' << format_double(xi(c)) << ','
        << format_double(se) << ',' << format_double(xi0(c)) << ',' << format_double(zv) << ','
        << format_double(pv) << '\n';
  }
}

void write_cv_csv(std::ostream& out, const TwoStageFit& fit) {
  out << "stage,lambda,delta,mean_error,se,nonzero\n";
  auto rows = [&](const char* stage, const OutcomeFit& f) {
    for (const auto& r : f.cv_table)
      out << stage << ',' << format_double(r.lambda) << ',' << format_double(r.delta) << ','
          << format_double(r.mean_error) << ',' << format_double(r.se) << ',' << r.nonzero << '\n';
  };
  rows("initial", fit.initial);
  rows("adaptive", fit.adaptive);
}

}  // namespace medsel
