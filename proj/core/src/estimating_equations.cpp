#include "medsel/estimating_equations.hpp"

#include "factor_algebra.hpp"
#include "medsel/error.hpp"
#include "medsel/parallel.hpp"

#include <cmath>
#include <limits>

namespace medsel {

namespace {

detail::WoodburyInverse sigma_inverse(const ParameterVectorNu& nu) {
  nu.validate();
  detail::WoodburyInverse w(nu.loading, nu.uniqueness);
  if (!w.mt.allFinite() || !std::isfinite(w.logdet))
    throw NumericalFailure("implied covariance Gamma Gamma' + Sigma_eps is singular");
  return w;
}

VectorXd flatten_rows(const MatrixXd& a) {
  VectorXd out(a.size());
  for (Index j = 0; j < a.rows(); ++j)
    for (Index c = 0; c < a.cols(); ++c) out(j * a.cols() + c) = a(j, c);
  return out;
}

}  // namespace

double fd_step(double v) {
  static const double base = std::cbrt(std::numeric_limits<double>::epsilon());
  return base * std::max(1.0, std::abs(v));
}

SampleRow sample_row(const Dataset& d, Index i) {
  SampleRow r;
  r.z = d.z(i);
  r.x = d.q() > 0 ? Eigen::RowVectorXd(d.x.row(i)) : Eigen::RowVectorXd(0);
  r.m = d.m.row(i).transpose();
  return r;
}

VectorXd evaluate_Q(const SampleRow& row, const ParameterVectorNu& nu, const BasisSpec& basis) {
  if (row.m.size() != nu.p() || basis.k() != nu.k())
    throw InvalidInput("sample row, basis and nu dimensions disagree");
  const detail::WoodburyInverse w = sigma_inverse(nu);
  const Eigen::RowVectorXd b = basis.row(row.z, row.x);
  const VectorXd r = row.m - nu.gamma * b.transpose();
  const VectorXd a = w.apply(r);
  const Index p = nu.p(), k = nu.k(), t = nu.t();
  VectorXd q(nu.size());
  for (Index j = 0; j < p; ++j)
    for (Index c = 0; c < k; ++c) q(j * k + c) = r(j) * b(c);
  if (t > 0) {
    const MatrixXd sg = w.apply(nu.loading);  // Sigma^-1 Gamma
    const MatrixXd blk = 2.0 * sg - 2.0 * a * (a.transpose() * nu.loading);
    q.segment(p * k, p * t) = flatten_rows(blk);
  }
  q.tail(p) = w.diagonal() - a.cwiseProduct(a);
  return q;
}

double mediator_row_loss(const SampleRow& row, const ParameterVectorNu& nu, const BasisSpec& basis) {
  const VectorXd r = row.m - nu.gamma * basis.row(row.z, row.x).transpose();
  return -0.5 * r.squaredNorm();
}

double factor_row_loss(const SampleRow& row, const ParameterVectorNu& nu, const BasisSpec& basis) {
  const detail::WoodburyInverse w = sigma_inverse(nu);
  const VectorXd r = row.m - nu.gamma * basis.row(row.z, row.x).transpose();
  return r.dot(w.apply(r).col(0)) + w.logdet;
}

EstimatingEquations::EstimatingEquations(const Dataset& d, const BasisSpec& basis) {
  require_valid(d);
  basis.validate(d.q());
  n_ = d.n();
  b_ = build_design(d, basis);
  m_ = d.m;
  const double inv = 1.0 / static_cast<double>(n_);
  sbb_ = b_.transpose() * b_ * inv;
  smb_ = m_.transpose() * b_ * inv;
  smm_ = m_.transpose() * m_ * inv;
}

MatrixXd EstimatingEquations::residuals(const MatrixXd& gamma) const {
  return m_ - b_ * gamma.transpose();
}

MatrixXd EstimatingEquations::residual_moment(const MatrixXd& gamma) const {
  const MatrixXd cross = smb_ * gamma.transpose();  // E[m b'] G'
  MatrixXd t = smm_ - cross - cross.transpose() + gamma * sbb_ * gamma.transpose();
  return 0.5 * (t + t.transpose());
}

VectorXd EstimatingEquations::mean_Q(const ParameterVectorNu& nu) const {
  if (nu.p() != p() || nu.k() != k()) throw InvalidInput("nu dimensions disagree with the data");
  const detail::WoodburyInverse w = sigma_inverse(nu);
  const MatrixXd t = residual_moment(nu.gamma);
  const Index pp = p(), kk = k(), tt = nu.t();
  VectorXd q(nu.size());
  q.head(pp * kk) = flatten_rows(smb_ - nu.gamma * sbb_);
  if (tt > 0) {
    const MatrixXd sg = w.apply(nu.loading);
    const MatrixXd blk = 2.0 * sg - 2.0 * w.apply(t * sg);
    q.segment(pp * kk, pp * tt) = flatten_rows(blk);
  }
  q.tail(pp) = w.diagonal() - detail::sandwich_diagonal(t, w);
  return q;
}

MatrixXd EstimatingEquations::row_Q(const ParameterVectorNu& nu) const {
  if (nu.p() != p() || nu.k() != k()) throw InvalidInput("nu dimensions disagree with the data");
  const detail::WoodburyInverse w = sigma_inverse(nu);
  const Index pp = p(), kk = k(), tt = nu.t();
  const MatrixXd r = residuals(nu.gamma);              // n x p
  const MatrixXd a = w.apply(r.transpose());           // p x n
  MatrixXd q(nu.size(), n_);
  for (Index j = 0; j < pp; ++j)
    for (Index c = 0; c < kk; ++c)
      q.row(j * kk + c) = r.col(j).cwiseProduct(b_.col(c)).transpose();
  if (tt > 0) {
    const MatrixXd sg = w.apply(nu.loading);
    const MatrixXd ag = nu.loading.transpose() * a;  // t x n
    for (Index j = 0; j < pp; ++j)
      for (Index s = 0; s < tt; ++s)
        q.row(pp * kk + j * tt + s) =
            (2.0 * sg(j, s) - 2.0 * a.row(j).array() * ag.row(s).array()).matrix();
  }
  const VectorXd dg = w.diagonal();
  for (Index j = 0; j < pp; ++j)
    q.row(pp * kk + pp * tt + j) = (dg(j) - a.row(j).array().square()).matrix();
  return q;
}

MatrixXd EstimatingEquations::jacobian(const ParameterVectorNu& nu, unsigned threads) const {
  const Index dim = nu.size();
  const VectorXd base = nu.flatten();
  MatrixXd jac(dim, dim);
  parallel_for(static_cast<std::size_t>(dim), threads, [&](std::size_t cc) {
    const Index c = static_cast<Index>(cc);
    const double h = fd_step(base(c));
    VectorXd up = base, dn = base;
    up(c) += h;
    dn(c) -= h;
    const VectorXd fu = mean_Q(ParameterVectorNu::unflatten(up, nu.p(), nu.k(), nu.t()));
    const VectorXd fd = mean_Q(ParameterVectorNu::unflatten(dn, nu.p(), nu.k(), nu.t()));
    jac.col(c) = (fu - fd) / (up(c) - dn(c));
  });
  return jac;
}

}  // namespace medsel
