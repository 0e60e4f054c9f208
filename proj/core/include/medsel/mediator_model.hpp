#pragma once

#include "medsel/dataset.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace medsel {

enum class TermKind {
  Constant,
  Treatment,
  Covariate,
  CovariateSquare,
  CovariateExp,
  TreatmentCovariate,
  Custom,
};

// Named transform of (z, covariate row) for user-defined basis terms.
using CustomTransform = std::function<double(double z, const Eigen::RowVectorXd& x)>;

struct BasisTerm {
  TermKind kind = TermKind::Constant;
  Index index = -1;             // covariate index for covariate-based terms
  std::string name;             // custom terms only
  CustomTransform transform;    // custom terms only

  static BasisTerm constant() { return {TermKind::Constant, -1, {}, {}}; }
  static BasisTerm treatment() { return {TermKind::Treatment, -1, {}, {}}; }
  static BasisTerm covariate(Index j) { return {TermKind::Covariate, j, {}, {}}; }
  static BasisTerm covariate_square(Index j) { return {TermKind::CovariateSquare, j, {}, {}}; }
  static BasisTerm covariate_exp(Index j) { return {TermKind::CovariateExp, j, {}, {}}; }
  static BasisTerm treatment_covariate(Index j) {
    return {TermKind::TreatmentCovariate, j, {}, {}};
  }
  static BasisTerm custom(std::string name, CustomTransform fn) {
    return {TermKind::Custom, -1, std::move(name), std::move(fn)};
  }

  double evaluate(double z, const Eigen::RowVectorXd& x) const;
  std::string label() const;
  // True when the term's value changes with z.
  bool depends_on_treatment() const;
};

// Ordered basis of the mediator regression g(Z, X; gamma) = B(Z, X) gamma_j.
struct BasisSpec {
  std::vector<BasisTerm> terms;

  Index k() const { return static_cast<Index>(terms.size()); }
  // Non-empty, exactly one constant, covariate indices below q (if q >= 0),
  // custom terms carry a transform.
  void validate(Index q = -1) const;
  Eigen::RowVectorXd row(double z, const Eigen::RowVectorXd& x) const;

  // {1, Z, X_0, exp(X_0)}: the simulation design.
  static BasisSpec simulation_default();
  // {1, Z, X_0..X_{q-1}}.
  static BasisSpec linear(Index q);
};

std::string basis_to_json(const BasisSpec& spec);
// Parses [{"term": "constant"}, {"term": "covariate_exp", "index": 0}, ...].
// Custom terms are resolved by name from `customs`.
BasisSpec basis_from_json(const std::string& text,
                          const std::map<std::string, CustomTransform>& customs = {});

MatrixXd build_design(const Dataset& d, const BasisSpec& spec);

struct MediatorFit {
  MatrixXd gamma_hat;               // p x k
  MatrixXd residuals;               // n x p
  std::vector<MatrixXd> gamma_cov;  // p blocks, k x k, heteroskedasticity-robust
  BasisSpec basis;
  MatrixXd design;                  // n x k
  double condition_number = 0.0;

  Index p() const { return gamma_hat.rows(); }
  Index k() const { return gamma_hat.cols(); }
};

// Per-mediator least squares of M on the basis. Throws NumericalFailure when
// the design's condition number exceeds 1e10.
MediatorFit fit_mediator_model(const Dataset& d, const BasisSpec& spec);

struct LambdaEstimate {
  double estimate = 0.0;
  double se = 0.0;
};

// Average over x_sample rows of g_j(z, x) - g_j(z', x), with delta-method SE
// from gamma_cov (x_sample treated as fixed).
LambdaEstimate lambda_hat(const MediatorFit& fit, Index j, double z, double z_prime,
                          const MatrixXd& x_sample);

struct LambdaTest {
  double p_value = 1.0;
  bool degenerate = false;  // SE was zero with a nonzero estimate
};

LambdaTest test_lambda(const LambdaEstimate& est);
LambdaTest test_lambda(const MediatorFit& fit, Index j, double z, double z_prime,
                       const MatrixXd& x_sample);

}  // namespace medsel
