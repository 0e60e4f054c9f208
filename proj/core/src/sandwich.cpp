#include "medsel/sandwich.hpp"

#include "medsel/error.hpp"
#include "medsel/estimating_equations.hpp"
#include "medsel/parallel.hpp"
#include "medsel/proxy.hpp"
#include "medsel/stats.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace medsel {

std::optional<Index> SandwichResult::position(Index coordinate) const {
  for (std::size_t i = 0; i < index_map.size(); ++i)
    if (index_map[i] == coordinate) return static_cast<Index>(i);
  return std::nullopt;
}

double SandwichResult::se_of(Index coordinate) const {
  const auto pos = position(coordinate);
  if (!pos) throw InvalidInput("coordinate " + std::to_string(coordinate) + " is not in the sandwich index set");
  return se(*pos);
}

std::vector<Index> retained_index_set(const OutcomeFit& fit, Index p, Index q, Index t, bool full) {
  std::vector<Index> idx{0, 1};
  if (full) {
    for (Index j = 0; j < p; ++j) idx.push_back(2 + j);
  } else {
    for (Index j : fit.active_set) idx.push_back(2 + j);
  }
  for (Index c = 0; c < q; ++c) idx.push_back(2 + p + c);
  for (Index s = 0; s < t; ++s) idx.push_back(2 + p + q + s);
  return idx;
}

namespace {

MatrixXd select_columns(const MatrixXd& a, const std::vector<Index>& idx) {
  MatrixXd out(a.rows(), static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Index>(i)) = a.col(idx[i]);
  return out;
}

struct Prepared {
  std::vector<Index> idx;
  MatrixXd ra;   // n x a
  VectorXd psi;
  MatrixXd c;
  double cond = 0.0;
};

Prepared prepare(const Dataset& d, const MatrixXd& proxy, const OutcomeFit& fit,
                 const SandwichOptions& opts) {
  require_valid(d);
  const Index p = d.p(), q = d.q(), t = proxy.cols();
  if (fit.params.beta2.size() != p || fit.params.beta3.size() != q || fit.params.phi.size() != t)
    throw InvalidInput("outcome fit dimensions disagree with data and proxy");
  Prepared pr;
  pr.idx = retained_index_set(fit, p, q, t, opts.full_index_set);
  if (static_cast<Index>(pr.idx.size()) > d.n())
    throw InvalidInput("index set larger than the sample size");
  const MatrixXd r = outcome_design(d, proxy);
  pr.ra = select_columns(r, pr.idx);
  pr.psi = d.y - r * fit.params.flatten();
  const double n = static_cast<double>(d.n());
  pr.c = pr.ra.transpose() * pr.ra / n;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(pr.c, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  pr.cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(pr.cond <= opts.condition_limit)) {
    std::ostringstream msg;
    msg << "E-hat[R R'] over the retained coordinates has condition number " << pr.cond
        << "; identification condition (ii) fails";
    throw NumericalFailure(msg.str());
  }
  return pr;
}

SandwichResult assemble(const Dataset& d, Prepared&& pr, const MatrixXd& k, const OutcomeFit& fit) {
  const double n = static_cast<double>(d.n());
  SandwichResult out;
  out.n = d.n();
  out.index_map = std::move(pr.idx);
  out.c_tilde = pr.c;
  out.c_condition = pr.cond;
  out.k_outer = k * k.transpose() / n;
  Eigen::LDLT<MatrixXd> ldlt(pr.c);
  const MatrixXd half = ldlt.solve(out.k_outer);
  MatrixXd sigma = ldlt.solve(half.transpose());
  out.sigma = 0.5 * (sigma + sigma.transpose());
  out.se = (out.sigma.diagonal().cwiseMax(0.0) / n).cwiseSqrt();
  out.lambda_over_sqrt_n = fit.lambda_used / std::sqrt(n);
  if (out.lambda_over_sqrt_n > 1.0)
    out.warnings.push_back("lambda / sqrt(n) exceeds 1; the rate condition on the tuning parameter is doubtful");
  return out;
}

// Rows that rule out infinitesimal rotations dGamma = Gamma S (S skew): the
// skew part of Gamma' Sigma_eps^-1 dGamma is zero. They pin down the rotation
// left free by the estimating equations when t >= 2 and rotate with Gamma.
MatrixXd rotation_rows(const ParameterVectorNu& nu) {
  const Index p = nu.p(), t = nu.t(), off = nu.alpha_offset();
  MatrixXd rows = MatrixXd::Zero(t * (t - 1) / 2, nu.size());
  Index r = 0;
  for (Index a = 0; a < t; ++a)
    for (Index b = a + 1; b < t; ++b, ++r)
      for (Index j = 0; j < p; ++j) {
        const double inv = 1.0 / nu.uniqueness(j);
        rows(r, off + j * t + b) = nu.loading(j, a) * inv;
        rows(r, off + j * t + a) = -nu.loading(j, b) * inv;
      }
  return rows;
}

}  // namespace

SandwichResult estimate_sandwich(const Dataset& d, const MediatorFit& mediators,
                                 const FactorFit& factors, const MatrixXd& proxy,
                                 const OutcomeFit& fit, const SandwichOptions& opts) {
  const Index t = proxy.cols();
  if (factors.loading.cols() != t || factors.loading.rows() != d.p())
    throw InvalidInput("factor fit does not match the proxy dimensions");
  if (mediators.p() != d.p()) throw InvalidInput("mediator fit does not match the data");
  Prepared pr = prepare(d, proxy, fit, opts);
  const double n = static_cast<double>(d.n());
  MatrixXd k = pr.ra.transpose() * pr.psi.asDiagonal();  // a x n

  std::vector<std::string> warnings;
  if (t > 0) {
    ParameterVectorNu nu{mediators.gamma_hat, factors.loading, factors.uniqueness};
    nu.validate();
    const EstimatingEquations ee(d, mediators.basis);
    const Index dim = nu.size();
    const MatrixXd jac = ee.jacobian(nu, opts.threads);

    // A = d/dnu E-hat[R phi' L(nu)] = d/dnu (S_RM - S_RB G') Delta(alpha) phi
    const MatrixXd srm = pr.ra.transpose() * ee.mediators() / n;
    const MatrixXd srb = pr.ra.transpose() * ee.basis_design() / n;
    const VectorXd phi = fit.params.phi;
    auto proxy_moment = [&](const VectorXd& flat) -> VectorXd {
      const auto v = ParameterVectorNu::unflatten(flat, nu.p(), nu.k(), t);
      return (srm - srb * v.gamma.transpose()) * (compute_delta(v.loading, v.uniqueness) * phi);
    };
    const VectorXd base = nu.flatten();
    MatrixXd amat(pr.ra.cols(), dim);
    parallel_for(static_cast<std::size_t>(dim), opts.threads, [&](std::size_t cc) {
      const Index c = static_cast<Index>(cc);
      const double h = fd_step(base(c));
      VectorXd up = base, dn = base;
      up(c) += h;
      dn(c) -= h;
      amat.col(c) = (proxy_moment(up) - proxy_moment(dn)) / (up(c) - dn(c));
    });

    MatrixXd jaug(dim + t * (t - 1) / 2, dim);
    jaug.topRows(dim) = jac;
    if (t > 1) jaug.bottomRows(t * (t - 1) / 2) = rotation_rows(nu);
    Eigen::ColPivHouseholderQR<MatrixXd> qr(jaug);
    const auto rdiag = qr.matrixQR().diagonal().head(dim).cwiseAbs();
    if (!(rdiag.minCoeff() > 1e-12 * rdiag.maxCoeff()))
      throw NumericalFailure("Jacobian of the estimating equations is singular");
    // W' = Q [R^-T P' A'; 0], first dim rows
    const MatrixXd ap = amat * qr.colsPermutation();
    MatrixXd zpad = MatrixXd::Zero(jaug.rows(), amat.rows());
    zpad.topRows(dim) = qr.matrixQR()
                            .topLeftCorner(dim, dim)
                            .triangularView<Eigen::Upper>()
                            .transpose()
                            .solve(ap.transpose());
    const MatrixXd wt = (qr.householderQ() * zpad).topRows(dim);  // dim x a
    k.noalias() += wt.transpose() * ee.row_Q(nu);

    if (factors.rotation_warning)
      warnings.push_back("factor Gram eigenvalues nearly tied; rotation not unique");
    if (!factors.stationary)
      warnings.push_back("factor fit is not a stationary point; nu-hat may not solve the estimating equations");
  }
  SandwichResult out = assemble(d, std::move(pr), k, fit);
  out.warnings.insert(out.warnings.end(), warnings.begin(), warnings.end());
  return out;
}

SandwichResult ols_sandwich(const Dataset& d, const MatrixXd& proxy, const OutcomeFit& fit,
                            const SandwichOptions& opts) {
  Prepared pr = prepare(d, proxy, fit, opts);
  const MatrixXd k = pr.ra.transpose() * pr.psi.asDiagonal();
  return assemble(d, std::move(pr), k, fit);
}

EffectEstimate nde_from_parts(double beta1, double se_beta1, double z, double z_prime) {
  EffectEstimate e;
  if (z == z_prime) return e;
  e.estimate = beta1 * (z - z_prime);
  e.se = std::abs(z - z_prime) * se_beta1;
  if (e.se > 0.0)
    e.p_value = two_sided_normal_p(e.estimate / e.se);
  else
    e.p_value = e.estimate == 0.0 ? 1.0 : 0.0;
  return e;
}

EffectEstimate test_nde(const OutcomeFit& fit, const SandwichResult& sandwich, double z,
                        double z_prime) {
  return nde_from_parts(fit.params.beta1, sandwich.se_of(1), z, z_prime);
}

EffectEstimate nie_from_parts(double beta2, double se_beta2, const LambdaEstimate& lambda) {
  EffectEstimate e;
  e.estimate = beta2 * lambda.estimate;
  e.se = std::sqrt(beta2 * beta2 * lambda.se * lambda.se +
                   lambda.estimate * lambda.estimate * se_beta2 * se_beta2);
  if (e.se > 0.0)
    e.p_value = two_sided_normal_p(e.estimate / e.se);
  else
    e.p_value = e.estimate == 0.0 ? 1.0 : 0.0;
  return e;
}

EffectEstimate estimate_nie(Index j, const OutcomeFit& fit, const MediatorFit& mediators,
                            const SandwichResult& sandwich, double z, double z_prime,
                            const MatrixXd& x_sample) {
  if (std::find(fit.active_set.begin(), fit.active_set.end(), j) == fit.active_set.end())
    throw InvalidInput("mediator " + std::to_string(j) + " is not in the active set");
  const LambdaEstimate lam = lambda_hat(mediators, j, z, z_prime, x_sample);
  return nie_from_parts(fit.params.beta2(j), sandwich.se_of(2 + j), lam);
}

}  // namespace medsel
