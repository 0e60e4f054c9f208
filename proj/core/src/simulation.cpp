#include "medsel/simulation.hpp"

#include "medsel/csv.hpp"
#include "medsel/error.hpp"
#include "medsel/factor_model.hpp"
#include "medsel/mediator_model.hpp"
#include "medsel/parallel.hpp"
#include "medsel/proxy.hpp"
#include "medsel/random.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

namespace medsel {

Method parse_method(const std::string& name) {
  if (name == "proposed") return Method::Proposed;
  if (name == "naive_lasso") return Method::NaiveLasso;
  if (name == "naive_adaptive_lasso") return Method::NaiveAdaptiveLasso;
  throw InvalidInput("unknown method '" + name + "'");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Proposed: return "proposed";
    case Method::NaiveLasso: return "naive_lasso";
    case Method::NaiveAdaptiveLasso: return "naive_adaptive_lasso";
  }
  return "proposed";
}

void SimConfig::validate() const {
  if (n < 1) throw InvalidInput("simulation needs n >= 1");
  if (p < 10) throw InvalidInput("simulation needs p >= 10 (ten confounded mediators)");
  if (scenario != 1 && scenario != 2) throw InvalidInput("scenario must be 1 or 2");
  if (scenario == 2 && p < 20) throw InvalidInput("scenario 2 needs p >= 20");
  if (n_reps < 1) throw InvalidInput("simulation needs at least one replication");
  if (!std::isfinite(phi) || !std::isfinite(phi1)) throw InvalidInput("phi and phi1 must be finite");
  if (methods.empty()) throw InvalidInput("no methods selected");
  for (Index j : null_treatment)
    if (j < 0 || j >= p) throw InvalidInput("null_treatment index out of range");
}

std::pair<Dataset, SimTruth> generate(const SimConfig& cfg, int rep) {
  cfg.validate();
  const Index n = cfg.n, p = cfg.p;
  SimTruth truth;
  truth.beta2_true = VectorXd::Zero(p);
  truth.beta2_true.head(5).setOnes();
  if (cfg.scenario == 2) truth.beta2_true.tail(15).setOnes();
  truth.gamma1 = VectorXd::Ones(p);
  for (Index j : cfg.null_treatment) {
    truth.gamma1(j) = 0.0;
    truth.beta2_true(j) = 1.0;
  }
  for (Index j = 0; j < p; ++j)
    if (truth.beta2_true(j) != 0.0) truth.active_true.push_back(j);
  VectorXd gamma3 = VectorXd::Zero(p);
  gamma3.head(3).setConstant(0.5);
  VectorXd loading = VectorXd::Zero(p);
  loading.head(10).setOnes();

  Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(rep), 0));
  std::normal_distribution<double> norm(0.0, 1.0);
  Dataset d;
  d.y.resize(n);
  d.z.resize(n);
  d.m.resize(n, p);
  d.x.resize(n, 1);
  truth.u_values.resize(n);
  const double noise = cfg.zero_noise ? 0.0 : 1.0;
  for (Index i = 0; i < n; ++i) {
    const double z = norm(rng), x = norm(rng), u = norm(rng);
    double y = z + x + cfg.phi * u + cfg.phi1 * u * u;
    const double ex = std::exp(x);
    for (Index j = 0; j < p; ++j) {
      const double m = truth.gamma1(j) * z + x + gamma3(j) * ex + loading(j) * u + noise * norm(rng);
      d.m(i, j) = m;
      y += truth.beta2_true(j) * m;
    }
    y += noise * norm(rng);
    d.y(i) = y;
    d.z(i) = z;
    d.x(i, 0) = x;
    truth.u_values(i) = u;
  }
  return {std::move(d), std::move(truth)};
}

std::uint64_t cv_seed(const SimConfig& cfg, int rep) {
  return derive_seed(cfg.seed, static_cast<std::uint64_t>(rep), 1);
}

OutcomeFit fit_naive(const Dataset& d, bool adaptive, const TwoStageOptions& opts) {
  const MatrixXd none(d.n(), 0);
  if (!adaptive) return fit_lasso_cv(d, none, PenaltySpec{}, opts);
  return fit_two_stage(d, none, opts).adaptive;
}

OutcomeFit fit_proposed(const Dataset& d, const TwoStageOptions& opts) {
  const MediatorFit med = fit_mediator_model(d, BasisSpec::simulation_default());
  const FactorFit fac = fit_factor(med.residuals, 1);
  const ProxyResult proxy = construct_proxy(d, med, fac);
  if (!proxy.condition_ii.holds) throw NumericalFailure("identification condition (ii) fails");
  return fit_two_stage(d, proxy.proxy, opts).adaptive;
}

Metrics metrics(const VectorXd& beta2_hat, const SimTruth& truth) {
  if (beta2_hat.size() != truth.beta2_true.size())
    throw InvalidInput("estimate and truth have different lengths");
  Metrics m;
  for (Index j = 0; j < beta2_hat.size(); ++j) {
    const double e = beta2_hat(j) - truth.beta2_true(j);
    m.mse += e * e;
    if (beta2_hat(j) != 0.0) (truth.beta2_true(j) != 0.0 ? m.tp : m.fp) += 1.0;
  }
  return m;
}

ReplicationOutcome run_replication(const SimConfig& cfg, int rep) {
  auto [d, truth] = generate(cfg, rep);
  TwoStageOptions opts = cfg.outcome;
  opts.seed = cv_seed(cfg, rep);
  opts.threads = 1;
  ReplicationOutcome out;
  for (Method m : cfg.methods) {
    try {
      OutcomeFit fit;
      switch (m) {
        case Method::Proposed: fit = fit_proposed(d, opts); break;
        case Method::NaiveLasso: fit = fit_naive(d, false, opts); break;
        case Method::NaiveAdaptiveLasso: fit = fit_naive(d, true, opts); break;
      }
      out.metrics.push_back(metrics(fit.params.beta2, truth));
      out.failed.push_back(false);
      out.errors.emplace_back();
    } catch (const NumericalFailure& e) {
      out.metrics.emplace_back();
      out.failed.push_back(true);
      out.errors.emplace_back(e.what());
    }
  }
  return out;
}

std::vector<MetricsRow> run_replications(const SimConfig& cfg) {
  cfg.validate();
  std::vector<ReplicationOutcome> reps(static_cast<std::size_t>(cfg.n_reps));
  parallel_for(reps.size(), cfg.threads,
               [&](std::size_t r) { reps[r] = run_replication(cfg, static_cast<int>(r)); });

  std::vector<MetricsRow> rows;
  for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
    MetricsRow row;
    row.method = cfg.methods[k];
    row.scenario = cfg.scenario;
    row.n = cfg.n;
    row.p = cfg.p;
    row.phi = cfg.phi;
    row.phi1 = cfg.phi1;
    std::string first_error;
    for (const auto& r : reps) {
      if (r.failed[k]) {
        ++row.failures;
        if (first_error.empty()) first_error = r.errors[k];
        continue;
      }
      row.mse += r.metrics[k].mse;
      row.tp += r.metrics[k].tp;
      row.fp += r.metrics[k].fp;
      ++row.n_reps;
    }
    if (row.failures > 0.05 * cfg.n_reps) {
      std::ostringstream msg;
      msg << to_string(row.method) << ": " << row.failures << " of " << cfg.n_reps
          << " replications failed (first: " << first_error << ")";
      throw NumericalFailure(msg.str());
    }
    if (row.n_reps > 0) {
      row.mse /= row.n_reps;
      row.tp /= row.n_reps;
      row.fp /= row.n_reps;
    }
    rows.push_back(row);
  }
  return rows;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << "method,scenario,n,p,phi,phi1,MSE,TP,FP,reps,failures\n";
  for (const auto& r : rows)
    out << to_string(r.method) << ',' << r.scenario << ',' << r.n << ',' << r.p << ','
        << format_double(r.phi) << ',' << format_double(r.phi1) << ',' << format_double(r.mse) << ','
        << format_double(r.tp) << ',' << format_double(r.fp) << ',' << r.n_reps << ','
        << r.failures << '\n';
}

}  // namespace medsel
