#include "medsel/pipeline.hpp"

#include "medsel/error.hpp"

#include <algorithm>
#include <sstream>

namespace medsel {

IdentificationReport identify(const Dataset& d, const PipelineOptions& opts) {
  require_valid(d);
  for (Index j = 0; j < d.p(); ++j) {
    const auto col = d.m.col(j);
    if ((col.array() == col(0)).all())
      throw InvalidInput("mediator '" + d.mediator_name(j) + "' is constant");
  }
  const BasisSpec basis = opts.basis ? *opts.basis : BasisSpec::linear(d.q());
  IdentificationReport id{fit_mediator_model(d, basis), std::nullopt, {}, {}, {}};
  Index t;
  if (opts.t) {
    t = *opts.t;
  } else {
    const Index t_max = std::min<Index>(opts.t_max, (d.p() - 1) / 2);
    if (t_max < 1) throw InvalidInput("too few mediators to select a factor count");
    id.factor_count = select_num_factors(id.mediators.residuals, t_max);
    t = id.factor_count->t;
  }
  id.factors = fit_factor(id.mediators.residuals, t, opts.factor);
  id.condition_i = check_condition_i(id.factors.loading);
  id.proxy = construct_proxy(d, id.mediators, id.factors);
  return id;
}

PipelineResult analyze(const Dataset& d, const PipelineOptions& opts) {
  PipelineResult res;
  res.id = identify(d, opts);
  const ConditionII& c2 = res.id.proxy.condition_ii;
  if (!c2.holds) {
    std::ostringstream msg;
    msg << "identification condition (ii) fails: E[R R'] has rank " << c2.rank
        << ", condition number " << c2.condition_number;
    throw NumericalFailure(msg.str());
  }
  if (!res.id.factors.converged) res.warnings.push_back("factor EM reached the iteration limit");
  if (res.id.factors.rotation_warning)
    res.warnings.push_back("factor rotation is not unique (nearly tied Gram eigenvalues)");
  if (res.id.condition_i.verdict != Verdict::Holds)
    res.warnings.push_back("identification condition (i) not confirmed: " + res.id.condition_i.detail);
  if (res.id.factor_count && res.id.factor_count->low_confidence)
    res.warnings.push_back("factor count selection is low confidence");

  res.outcome = fit_two_stage(d, res.id.proxy.proxy, opts.outcome);
  if (!res.outcome.flipped_offset.empty())
    res.warnings.push_back("adaptive weight offset flipped for an initial estimate of exactly -1/n");

  const SandwichResult* sw = nullptr;
  if (opts.sandwich) {
    res.sandwich = estimate_sandwich(d, res.id.mediators, res.id.factors, res.id.proxy.proxy,
                                     res.outcome.adaptive, opts.sandwich_options);
    sw = &*res.sandwich;
    for (const auto& w : res.sandwich->warnings) res.warnings.push_back(w);
  }
  res.selection = select_active_pathways(d, res.outcome.adaptive, res.id.mediators, opts.correction,
                                         opts.alpha, opts.z, opts.z_prime, sw);
  return res;
}

std::string identification_text(const IdentificationReport& id) {
  std::ostringstream out;
  out << "mediators: " << id.mediators.p() << "\n";
  out << "basis: ";
  for (std::size_t i = 0; i < id.mediators.basis.terms.size(); ++i)
    out << (i ? ", " : "") << id.mediators.basis.terms[i].label();
  out << "\nmediator design condition number: " << id.mediators.condition_number << "\n";
  if (id.factor_count) {
    out << "factor count (eigenvalue ratio): t = " << id.factor_count->t
        << (id.factor_count->low_confidence ? " (low confidence)" : "") << "\n";
    for (std::size_t j = 0; j < id.factor_count->ratios.size(); ++j)
      out << "  j = " << j + 1 << "  eigenvalue = " << id.factor_count->eigenvalues[j]
          << "  ratio = " << id.factor_count->ratios[j] << "\n";
  }
  out << "factors: t = " << id.factors.t << ", iterations = " << id.factors.iterations
      << ", converged = " << (id.factors.converged ? "yes" : "no")
      << ", max gradient = " << id.factors.max_gradient << "\n";

  const auto& c1 = id.condition_i;
  out << "condition (i): "
      << (c1.verdict == Verdict::Holds ? "holds" : c1.verdict == Verdict::Fails ? "fails" : "inconclusive")
      << "\n";
  if (!c1.detail.empty()) out << "  " << c1.detail << "\n";
  if (c1.failing_row) out << "  counterexample: deleting row " << *c1.failing_row + 1 << "\n";
  const std::size_t shown = std::min<std::size_t>(c1.witnesses.size(), 10);
  for (std::size_t k = 0; k < shown; ++k) {
    const auto& w = c1.witnesses[k];
    out << "  delete row " << w.deleted_row + 1 << ": {";
    for (std::size_t i = 0; i < w.first.size(); ++i) out << (i ? "," : "") << w.first[i] + 1;
    out << "} and {";
    for (std::size_t i = 0; i < w.second.size(); ++i) out << (i ? "," : "") << w.second[i] + 1;
    out << "}\n";
  }
  if (shown < c1.witnesses.size())
    out << "  ... " << c1.witnesses.size() - shown << " more deletions, each with a witness\n";
  const auto& c2 = id.proxy.condition_ii;
  out << "condition (ii): " << (c2.holds ? "holds" : "fails") << "\n"
      << "  rank = " << c2.rank << ", condition number = " << c2.condition_number
      << ", min eigenvalue = " << c2.min_eigenvalue << ", max eigenvalue = " << c2.max_eigenvalue
      << "\n";
  return out.str();
}

}  // namespace medsel
