#pragma once

#include "medsel/dataset.hpp"
#include "medsel/mediator_model.hpp"

namespace medsel {

struct SampleRow {
  double z = 0.0;
  Eigen::RowVectorXd x;
  VectorXd m;
};

SampleRow sample_row(const Dataset& d, Index i);

// Per-observation estimating function, length nu.size(): the gamma block
// r_j * b_c (mediator-major) followed by the derivative of
// r' Sigma^-1 r + log|Sigma| in (Gamma row-major, diag Sigma_eps), where
// r = m - gamma b(z, x). Throws NumericalFailure when Sigma is singular.
VectorXd evaluate_Q(const SampleRow& row, const ParameterVectorNu& nu, const BasisSpec& basis);

// Scalar losses whose gradients are the two blocks of evaluate_Q:
// d/dgamma of -|r|^2 / 2 and d/dalpha of r' Sigma^-1 r + log|Sigma|.
double mediator_row_loss(const SampleRow& row, const ParameterVectorNu& nu,
                         const BasisSpec& basis);
double factor_row_loss(const SampleRow& row, const ParameterVectorNu& nu,
                       const BasisSpec& basis);

// Sample-level estimating equations E-hat{Q(S; nu)} from sufficient statistics.
class EstimatingEquations {
 public:
  EstimatingEquations(const Dataset& d, const BasisSpec& basis);

  Index n() const { return n_; }
  Index p() const { return m_.cols(); }
  Index k() const { return b_.cols(); }
  const MatrixXd& basis_design() const { return b_; }
  const MatrixXd& mediators() const { return m_; }

  MatrixXd residuals(const MatrixXd& gamma) const;  // n x p
  MatrixXd residual_moment(const MatrixXd& gamma) const;  // E-hat[r r']

  VectorXd mean_Q(const ParameterVectorNu& nu) const;
  // Column i is Q(S_i; nu).
  MatrixXd row_Q(const ParameterVectorNu& nu) const;
  // d mean_Q / d nu by central differences, h = eps^(1/3) max(1, |nu_c|).
  MatrixXd jacobian(const ParameterVectorNu& nu, unsigned threads = 1) const;

 private:
  Index n_ = 0;
  MatrixXd b_;    // n x k basis design
  MatrixXd m_;    // n x p
  MatrixXd sbb_;  // k x k
  MatrixXd smb_;  // p x k
  MatrixXd smm_;  // p x p
};

// Central-difference step for coordinate value v.
double fd_step(double v);

}  // namespace medsel
