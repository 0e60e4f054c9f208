#include "medsel/dataset.hpp"

#include "medsel/error.hpp"

#include <cmath>
#include <sstream>

namespace medsel {

std::string Dataset::mediator_name(Index j) const {
  if (j >= 0 && static_cast<std::size_t>(j) < mediator_names.size())
    return mediator_names[static_cast<std::size_t>(j)];
  return "m" + std::to_string(j + 1);
}

std::string Dataset::covariate_name(Index j) const {
  if (j >= 0 && static_cast<std::size_t>(j) < covariate_names.size())
    return covariate_names[static_cast<std::size_t>(j)];
  return "x" + std::to_string(j + 1);
}

namespace {

void scan_non_finite(const MatrixXd& a, const char* component,
                     const char* col_word, std::vector<Violation>& out) {
  for (Index c = 0; c < a.cols(); ++c)
    for (Index r = 0; r < a.rows(); ++r)
      if (!std::isfinite(a(r, c))) {
        std::ostringstream msg;
        msg << "non-finite value in " << component << " at (row " << r << ", "
            << col_word << " " << c << ")";
        out.push_back({Violation::Kind::NonFinite, component, r, c, msg.str()});
      }
}

void scan_non_finite(const VectorXd& v, const char* component,
                     std::vector<Violation>& out) {
  for (Index r = 0; r < v.size(); ++r)
    if (!std::isfinite(v(r))) {
      std::ostringstream msg;
      msg << "non-finite value in " << component << " at row " << r;
      out.push_back({Violation::Kind::NonFinite, component, r, -1, msg.str()});
    }
}

}  // namespace

std::vector<Violation> validate_dataset(const Dataset& d) {
  std::vector<Violation> out;
  const Index n = d.y.size();
  if (n < 1)
    out.push_back({Violation::Kind::RowCount, "y", -1, -1,
                   "dataset must contain at least one row"});

  auto check_rows = [&](Index rows, const char* component) {
    if (rows != n) {
      std::ostringstream msg;
      msg << "row count mismatch: y has " << n << " rows, " << component
          << " has " << rows;
      out.push_back({Violation::Kind::RowCount, component, -1, -1, msg.str()});
    }
  };
  check_rows(d.z.size(), "z");
  check_rows(d.m.rows(), "m");
  // An empty covariate block (q = 0) may be stored as 0 x 0.
  if (d.x.cols() > 0 || d.x.rows() > 0) check_rows(d.x.rows(), "x");

  if (d.m.cols() < 1)
    out.push_back({Violation::Kind::NoMediators, "m", -1, -1,
                   "at least one mediator column is required"});

  scan_non_finite(d.y, "y", out);
  scan_non_finite(d.z, "z", out);
  scan_non_finite(d.m, "m", "mediator", out);
  scan_non_finite(d.x, "x", "covariate", out);

  auto check_labels = [&](std::size_t labels, Index expected,
                          const char* component) {
    if (labels != 0 && labels != static_cast<std::size_t>(expected)) {
      std::ostringstream msg;
      msg << component << " has " << labels << " labels, expected " << expected;
      out.push_back({Violation::Kind::LabelCount, component, -1, -1, msg.str()});
    }
  };
  check_labels(d.row_ids.size(), n, "row_ids");
  check_labels(d.mediator_names.size(), d.m.cols(), "mediator_names");
  check_labels(d.covariate_names.size(), d.x.cols(), "covariate_names");
  return out;
}

void require_valid(const Dataset& d) {
  const auto violations = validate_dataset(d);
  if (violations.empty()) return;
  std::ostringstream msg;
  msg << "invalid dataset (" << violations.size() << " violation"
      << (violations.size() == 1 ? "" : "s") << "): " << violations.front().message;
  if (violations.size() > 1) msg << "; ...";
  throw InvalidInput(msg.str());
}

Standardized standardize_columns(const Eigen::Ref<const MatrixXd>& mat) {
  const Index n = mat.rows();
  if (n < 1) throw InvalidInput("standardize_columns: matrix has no rows");
  Standardized s;
  s.mean = mat.colwise().mean().transpose();
  s.scale.resize(mat.cols());
  s.values.resize(n, mat.cols());
  for (Index c = 0; c < mat.cols(); ++c) {
    const auto centred = (mat.col(c).array() - s.mean(c)).eval();
    const double sd = std::sqrt(centred.square().sum() / static_cast<double>(n));
    const double magnitude = std::max(1.0, std::abs(s.mean(c)));
    if (!(sd > 1e-12 * magnitude))
      throw InvalidInput("constant column " + std::to_string(c));
    s.scale(c) = sd;
    s.values.col(c) = centred / sd;
  }
  return s;
}

MatrixXd unstandardize(const Standardized& s) {
  MatrixXd out = s.values;
  for (Index c = 0; c < out.cols(); ++c)
    out.col(c) = out.col(c).array() * s.scale(c) + s.mean(c);
  return out;
}

VectorXd ParameterVectorNu::flatten() const {
  VectorXd flat(size());
  Index pos = 0;
  for (Index j = 0; j < p(); ++j)
    for (Index c = 0; c < k(); ++c) flat(pos++) = gamma(j, c);
  for (Index j = 0; j < p(); ++j)
    for (Index s = 0; s < t(); ++s) flat(pos++) = loading(j, s);
  for (Index j = 0; j < p(); ++j) flat(pos++) = uniqueness(j);
  return flat;
}

ParameterVectorNu ParameterVectorNu::unflatten(const VectorXd& flat, Index p,
                                               Index k, Index t) {
  if (flat.size() != p * k + p * t + p)
    throw InvalidInput("parameter vector length does not match (p, k, t)");
  ParameterVectorNu nu;
  nu.gamma.resize(p, k);
  nu.loading.resize(p, t);
  nu.uniqueness.resize(p);
  Index pos = 0;
  for (Index j = 0; j < p; ++j)
    for (Index c = 0; c < k; ++c) nu.gamma(j, c) = flat(pos++);
  for (Index j = 0; j < p; ++j)
    for (Index s = 0; s < t; ++s) nu.loading(j, s) = flat(pos++);
  for (Index j = 0; j < p; ++j) nu.uniqueness(j) = flat(pos++);
  return nu;
}

void ParameterVectorNu::validate() const {
  if (loading.rows() != gamma.rows() || uniqueness.size() != gamma.rows())
    throw InvalidInput("parameter vector blocks disagree on p");
  for (Index j = 0; j < uniqueness.size(); ++j)
    if (!(uniqueness(j) > 0.0))
      throw InvalidInput("uniqueness entry " + std::to_string(j) +
                         " is not strictly positive");
}

VectorXd OutcomeParams::flatten() const {
  VectorXd xi(size());
  xi(0) = beta0;
  xi(1) = beta1;
  xi.segment(2, beta2.size()) = beta2;
  xi.segment(2 + beta2.size(), beta3.size()) = beta3;
  xi.tail(phi.size()) = phi;
  return xi;
}

OutcomeParams OutcomeParams::unflatten(const VectorXd& xi, Index p, Index q,
                                       Index t) {
  if (xi.size() != 2 + p + q + t)
    throw InvalidInput("outcome parameter vector length does not match (p, q, t)");
  OutcomeParams out;
  out.beta0 = xi(0);
  out.beta1 = xi(1);
  out.beta2 = xi.segment(2, p);
  out.beta3 = xi.segment(2 + p, q);
  out.phi = xi.tail(t);
  return out;
}

MatrixXd outcome_design(const Dataset& d, const MatrixXd& proxy) {
  const Index n = d.n();
  const Index t = proxy.cols();
  if (t > 0 && proxy.rows() != n)
    throw InvalidInput("proxy has " + std::to_string(proxy.rows()) +
                       " rows, dataset has " + std::to_string(n));
  MatrixXd r(n, 2 + d.p() + d.q() + t);
  r.col(0).setOnes();
  r.col(1) = d.z;
  r.middleCols(2, d.p()) = d.m;
  if (d.q() > 0) r.middleCols(2 + d.p(), d.q()) = d.x;
  if (t > 0) r.rightCols(t) = proxy;
  return r;
}

}  // namespace medsel
