#include "medsel/proxy.hpp"

#include "medsel/error.hpp"

#include <cmath>
#include <limits>

namespace medsel {

MatrixXd compute_delta(const MatrixXd& loading, const VectorXd& uniqueness) {
  if (uniqueness.size() != loading.rows())
    throw InvalidInput("compute_delta: loading and uniqueness disagree on p");
  if ((uniqueness.array() <= 0.0).any())
    throw InvalidInput("compute_delta: uniqueness entries must be positive");
  const Index t = loading.cols();
  const MatrixXd scaled = uniqueness.cwiseInverse().asDiagonal() * loading;
  const MatrixXd core = MatrixXd::Identity(t, t) + loading.transpose() * scaled;
  const Eigen::LLT<MatrixXd> llt(core);
  if (llt.info() != Eigen::Success) throw NumericalFailure("compute_delta: singular implied covariance");
  return llt.solve(scaled.transpose()).transpose();
}

MatrixXd compute_delta_direct(const MatrixXd& loading, const VectorXd& uniqueness) {
  MatrixXd sigma = loading * loading.transpose();
  sigma.diagonal() += uniqueness;
  const Eigen::LLT<MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw NumericalFailure("compute_delta_direct: implied covariance is not positive definite");
  return llt.solve(loading);
}

MatrixXd compute_proxy(const MatrixXd& residuals, const MatrixXd& delta) {
  if (residuals.cols() != delta.rows())
    throw InvalidInput("compute_proxy: residuals have " + std::to_string(residuals.cols()) +
                       " columns, delta has " + std::to_string(delta.rows()) + " rows");
  return residuals * delta;
}

ConditionII check_condition_ii(const Dataset& d, const MatrixXd& proxy,
                               double relative_threshold) {
  const MatrixXd r = outcome_design(d, proxy);
  const MatrixXd h = r.transpose() * r / static_cast<double>(d.n());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (h + h.transpose()), Eigen::EigenvaluesOnly);
  const VectorXd& mu = eig.eigenvalues();
  ConditionII out;
  out.min_eigenvalue = mu(0);
  out.max_eigenvalue = mu(mu.size() - 1);
  const double cutoff = relative_threshold * out.max_eigenvalue;
  for (Index i = 0; i < mu.size(); ++i)
    if (mu(i) > cutoff) ++out.rank;
  out.condition_number = out.min_eigenvalue > 0.0 ? out.max_eigenvalue / out.min_eigenvalue
                                                  : std::numeric_limits<double>::infinity();
  out.holds = out.min_eigenvalue > cutoff && d.n() >= r.cols();
  return out;
}

ProxyResult construct_proxy(const Dataset& d, const MediatorFit& mediators,
                            const FactorFit& factors) {
  ProxyResult out;
  out.delta = compute_delta(factors.loading, factors.uniqueness);
  out.proxy = compute_proxy(mediators.residuals, out.delta);
  out.condition_ii = check_condition_ii(d, out.proxy);
  return out;
}

}  // namespace medsel
