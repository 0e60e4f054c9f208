#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace medsel {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// One observed sample: outcome y, scalar treatment z, mediators m (n x p),
// covariates x (n x q, q may be zero).
struct Dataset {
  VectorXd y;
  VectorXd z;
  MatrixXd m;
  MatrixXd x;
  std::vector<std::string> row_ids;         // optional, empty or length n
  std::vector<std::string> mediator_names;  // optional, empty or length p
  std::vector<std::string> covariate_names; // optional, empty or length q

  Index n() const { return y.size(); }
  Index p() const { return m.cols(); }
  Index q() const { return x.cols(); }

  // Label for mediator j; falls back to "m<j+1>".
  std::string mediator_name(Index j) const;
  std::string covariate_name(Index j) const;
};

struct Violation {
  enum class Kind { RowCount, NonFinite, NoMediators, LabelCount };
  Kind kind;
  std::string component;  // "y", "z", "m", "x", "row_ids", ...
  Index row = -1;
  Index col = -1;
  std::string message;
};

// Every invariant violation, with coordinates. Empty iff the dataset is valid.
std::vector<Violation> validate_dataset(const Dataset& d);

// Throws InvalidInput summarising the violations, if any.
void require_valid(const Dataset& d);

struct Standardized {
  MatrixXd values;
  VectorXd mean;
  VectorXd scale;  // population standard deviation (denominator n)
};

// Centre and scale every column to mean 0, population sd 1.
// Throws InvalidInput("constant column j") for a zero-variance column.
Standardized standardize_columns(const Eigen::Ref<const MatrixXd>& mat);

MatrixXd unstandardize(const Standardized& s);

// Mediator-model coefficients plus factor-model parameters, the full nuisance
// vector of the estimating equations. Flattened order: gamma (mediator-major,
// j*k + c), loading (row-major, j*t + s), uniqueness.
struct ParameterVectorNu {
  MatrixXd gamma;       // p x k
  MatrixXd loading;     // p x t
  VectorXd uniqueness;  // p, strictly positive

  Index p() const { return gamma.rows(); }
  Index k() const { return gamma.cols(); }
  Index t() const { return loading.cols(); }
  Index size() const { return p() * k() + p() * t() + p(); }
  Index alpha_offset() const { return p() * k(); }

  VectorXd flatten() const;
  static ParameterVectorNu unflatten(const VectorXd& flat, Index p, Index k,
                                     Index t);
  // Throws InvalidInput on inconsistent layout or non-positive uniqueness.
  void validate() const;
};

// Outcome-model coefficients. Flattened order matches the regressor vector
// (1, Z, M, X, L): beta0, beta1, beta2, beta3, phi.
struct OutcomeParams {
  double beta0 = 0.0;
  double beta1 = 0.0;
  VectorXd beta2;
  VectorXd beta3;
  VectorXd phi;

  Index size() const { return 2 + beta2.size() + beta3.size() + phi.size(); }
  VectorXd flatten() const;
  static OutcomeParams unflatten(const VectorXd& xi, Index p, Index q, Index t);
};

// Regressor matrix (1, Z, M, X, L) with n rows and 2 + p + q + t columns.
MatrixXd outcome_design(const Dataset& d, const MatrixXd& proxy);

}  // namespace medsel
