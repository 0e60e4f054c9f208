#pragma once

// Internal helpers for Sigma = Gamma Gamma' + diag(psi) without forming
// p x p inverses: Sigma^-1 = D - P Mt P' with D = diag(1/psi), P = D Gamma,
// Mt = (I + Gamma' D Gamma)^-1.

#include <Eigen/Dense>

#include <cmath>

namespace medsel::detail {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct WoodburyInverse {
  VectorXd dinv;
  MatrixXd p;
  MatrixXd mt;
  double logdet = 0.0;  // log|Sigma|

  WoodburyInverse(const MatrixXd& loading, const VectorXd& uniqueness) {
    dinv = uniqueness.cwiseInverse();
    p = dinv.asDiagonal() * loading;
    const Index t = loading.cols();
    MatrixXd core = MatrixXd::Identity(t, t) + loading.transpose() * p;
    Eigen::LLT<MatrixXd> llt(core);
    mt = llt.solve(MatrixXd::Identity(t, t));
    double logdet_core = 0.0;
    const MatrixXd& l = llt.matrixL();
    for (Index s = 0; s < t; ++s) logdet_core += 2.0 * std::log(l(s, s));
    logdet = uniqueness.array().log().sum() + logdet_core;
  }

  template <class Derived>
  MatrixXd apply(const Eigen::MatrixBase<Derived>& v) const {
    return dinv.asDiagonal() * v - p * (mt * (p.transpose() * v));
  }

  VectorXd diagonal() const {
    return dinv - ((p * mt).cwiseProduct(p)).rowwise().sum();
  }

  MatrixXd dense() const {
    MatrixXd out = -p * mt * p.transpose();
    out.diagonal() += dinv;
    return out;
  }
};

// tr(T Sigma^-1).
inline double trace_product(const MatrixXd& sample_cov, const WoodburyInverse& w) {
  const MatrixXd tp = sample_cov * w.p;  // p x t
  return sample_cov.diagonal().dot(w.dinv) - (w.mt * (w.p.transpose() * tp)).trace();
}

// diag(Sigma^-1 T Sigma^-1) in O(p^2 t).
inline VectorXd sandwich_diagonal(const MatrixXd& sample_cov, const WoodburyInverse& w) {
  const MatrixXd tv = sample_cov * w.p;  // p x t
  const MatrixXd vc = w.p * w.mt;        // p x t
  const MatrixXd vtv = w.p.transpose() * tv;
  VectorXd out = w.dinv.cwiseProduct(w.dinv).cwiseProduct(sample_cov.diagonal());
  out -= 2.0 * w.dinv.cwiseProduct((tv * w.mt).cwiseProduct(w.p).rowwise().sum());
  out += ((vc * vtv).cwiseProduct(vc)).rowwise().sum();
  return out;
}

}  // namespace medsel::detail
