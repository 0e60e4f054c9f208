#include "medsel/mediator_model.hpp"

#include "medsel/error.hpp"
#include "medsel/stats.hpp"

#include <json.hpp>

#include <cmath>

namespace medsel {

double BasisTerm::evaluate(double z, const Eigen::RowVectorXd& x) const {
  switch (kind) {
    case TermKind::Constant: return 1.0;
    case TermKind::Treatment: return z;
    case TermKind::Covariate: return x(index);
    case TermKind::CovariateSquare: return x(index) * x(index);
    case TermKind::CovariateExp: return std::exp(x(index));
    case TermKind::TreatmentCovariate: return z * x(index);
    case TermKind::Custom: return transform(z, x);
  }
  return 0.0;
}

std::string BasisTerm::label() const {
  const std::string idx = std::to_string(index);
  switch (kind) {
    case TermKind::Constant: return "constant";
    case TermKind::Treatment: return "treatment";
    case TermKind::Covariate: return "covariate(" + idx + ")";
    case TermKind::CovariateSquare: return "covariate_square(" + idx + ")";
    case TermKind::CovariateExp: return "covariate_exp(" + idx + ")";
    case TermKind::TreatmentCovariate: return "treatment_covariate_interaction(" + idx + ")";
    case TermKind::Custom: return "custom(" + name + ")";
  }
  return "?";
}

bool BasisTerm::depends_on_treatment() const {
  return kind == TermKind::Treatment || kind == TermKind::TreatmentCovariate ||
         kind == TermKind::Custom;
}

void BasisSpec::validate(Index q) const {
  if (terms.empty()) throw InvalidInput("basis: term list is empty");
  int constants = 0;
  for (const auto& term : terms) {
    if (term.kind == TermKind::Constant) ++constants;
    const bool indexed = term.kind == TermKind::Covariate ||
                         term.kind == TermKind::CovariateSquare ||
                         term.kind == TermKind::CovariateExp ||
                         term.kind == TermKind::TreatmentCovariate;
    if (indexed && (term.index < 0 || (q >= 0 && term.index >= q)))
      throw InvalidInput("basis: term " + term.label() + " refers to a covariate outside 0.." +
                         std::to_string(q - 1));
    if (term.kind == TermKind::Custom && !term.transform)
      throw InvalidInput("basis: custom term '" + term.name + "' has no transform");
  }
  if (constants != 1)
    throw InvalidInput("basis: the constant term must appear exactly once (found " +
                       std::to_string(constants) + ")");
}

Eigen::RowVectorXd BasisSpec::row(double z, const Eigen::RowVectorXd& x) const {
  Eigen::RowVectorXd out(k());
  for (Index c = 0; c < k(); ++c) out(c) = terms[static_cast<std::size_t>(c)].evaluate(z, x);
  return out;
}

BasisSpec BasisSpec::simulation_default() {
  return {{BasisTerm::constant(), BasisTerm::treatment(), BasisTerm::covariate(0),
           BasisTerm::covariate_exp(0)}};
}

BasisSpec BasisSpec::linear(Index q) {
  BasisSpec spec{{BasisTerm::constant(), BasisTerm::treatment()}};
  for (Index j = 0; j < q; ++j) spec.terms.push_back(BasisTerm::covariate(j));
  return spec;
}

namespace {

const std::map<std::string, TermKind>& term_names() {
  static const std::map<std::string, TermKind> names{
      {"constant", TermKind::Constant},
      {"treatment", TermKind::Treatment},
      {"covariate", TermKind::Covariate},
      {"covariate_square", TermKind::CovariateSquare},
      {"covariate_exp", TermKind::CovariateExp},
      {"treatment_covariate_interaction", TermKind::TreatmentCovariate},
      {"custom", TermKind::Custom},
  };
  return names;
}

}  // namespace

std::string basis_to_json(const BasisSpec& spec) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& term : spec.terms) {
    nlohmann::ordered_json obj;
    for (const auto& [name, kind] : term_names())
      if (kind == term.kind) obj["term"] = name;
    if (term.index >= 0) obj["index"] = term.index;
    if (term.kind == TermKind::Custom) obj["name"] = term.name;
    arr.push_back(obj);
  }
  return arr.dump();
}

BasisSpec basis_from_json(const std::string& text,
                          const std::map<std::string, CustomTransform>& customs) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("basis: malformed JSON: ") + e.what());
  }
  if (!doc.is_array()) throw InvalidInput("basis: expected a JSON array of terms");
  BasisSpec spec;
  for (const auto& item : doc) {
    std::string name;
    if (item.is_string()) {
      name = item.get<std::string>();
    } else if (item.is_object() && item.contains("term") && item.at("term").is_string()) {
      name = item.at("term").get<std::string>();
    } else {
      throw InvalidInput("basis: each term needs a \"term\" name");
    }
    const auto it = term_names().find(name);
    if (it == term_names().end()) throw InvalidInput("basis: unknown term '" + name + "'");
    BasisTerm term;
    term.kind = it->second;
    if (item.is_object() && item.contains("index")) term.index = item.at("index").get<Index>();
    if (term.kind == TermKind::Custom) {
      if (!item.is_object() || !item.contains("name"))
        throw InvalidInput("basis: custom term needs a \"name\"");
      term.name = item.at("name").get<std::string>();
      const auto fn = customs.find(term.name);
      if (fn == customs.end())
        throw InvalidInput("basis: no transform registered for custom term '" + term.name + "'");
      term.transform = fn->second;
    }
    spec.terms.push_back(std::move(term));
  }
  spec.validate();
  return spec;
}

MatrixXd build_design(const Dataset& d, const BasisSpec& spec) {
  spec.validate(d.q());
  MatrixXd b(d.n(), spec.k());
  Eigen::RowVectorXd xrow(d.q());
  for (Index i = 0; i < d.n(); ++i) {
    if (d.q() > 0) xrow = d.x.row(i);
    b.row(i) = spec.row(d.z(i), xrow);
  }
  return b;
}

MediatorFit fit_mediator_model(const Dataset& d, const BasisSpec& spec) {
  MediatorFit fit;
  fit.basis = spec;
  fit.design = build_design(d, spec);
  const MatrixXd& b = fit.design;
  const Index n = b.rows(), k = b.cols(), p = d.p();

  Eigen::JacobiSVD<MatrixXd> svd(b);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  fit.condition_number = smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
  if (!(fit.condition_number < 1e10) || n < k)
    throw NumericalFailure("mediator design is rank deficient (condition number " +
                           std::to_string(fit.condition_number) + ")");

  const Eigen::ColPivHouseholderQR<MatrixXd> qr(b);
  fit.gamma_hat = qr.solve(d.m).transpose();  // p x k
  fit.residuals = d.m - b * fit.gamma_hat.transpose();

  const MatrixXd btb_inv = (b.transpose() * b).inverse();
  fit.gamma_cov.reserve(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) {
    const VectorXd e2 = fit.residuals.col(j).array().square();
    const MatrixXd meat = b.transpose() * e2.asDiagonal() * b;
    MatrixXd cov = btb_inv * meat * btb_inv;
    fit.gamma_cov.push_back(0.5 * (cov + cov.transpose()));
  }
  return fit;
}

LambdaEstimate lambda_hat(const MediatorFit& fit, Index j, double z, double z_prime,
                          const MatrixXd& x_sample) {
  if (j < 0 || j >= fit.p()) throw InvalidInput("lambda_hat: mediator index out of range");
  const Index rows = std::max<Index>(x_sample.rows(), 1);
  Eigen::RowVectorXd contrast = Eigen::RowVectorXd::Zero(fit.k());
  Eigen::RowVectorXd xrow(x_sample.cols());
  if (x_sample.rows() == 0) {
    contrast = fit.basis.row(z, xrow) - fit.basis.row(z_prime, xrow);
  } else {
    for (Index i = 0; i < x_sample.rows(); ++i) {
      xrow = x_sample.row(i);
      contrast += fit.basis.row(z, xrow) - fit.basis.row(z_prime, xrow);
    }
    contrast /= static_cast<double>(rows);
  }
  LambdaEstimate out;
  out.estimate = contrast.dot(fit.gamma_hat.row(j));
  const double var = contrast * fit.gamma_cov[static_cast<std::size_t>(j)] * contrast.transpose();
  out.se = std::sqrt(std::max(var, 0.0));
  return out;
}

LambdaTest test_lambda(const LambdaEstimate& est) {
  if (est.se > 0.0) return {two_sided_normal_p(est.estimate / est.se), false};
  if (est.estimate == 0.0) return {1.0, false};
  return {0.0, true};
}

LambdaTest test_lambda(const MediatorFit& fit, Index j, double z, double z_prime,
                       const MatrixXd& x_sample) {
  return test_lambda(lambda_hat(fit, j, z, z_prime, x_sample));
}

}  // namespace medsel
