#include "support.hpp"

#include "medsel/csv.hpp"
#include "medsel/error.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace medsel;

namespace {

Dataset small_dataset() {
  Dataset d;
  d.y = VectorXd::LinSpaced(3, 1.0, 3.0);
  d.z = VectorXd::LinSpaced(3, 0.0, 1.0);
  d.m.resize(3, 2);
  d.m << 1, 2, 3, 4, 5, 7;
  d.x.resize(3, 1);
  d.x << 0.1, -0.2, 0.4;
  return d;
}

}  // namespace

TEST_CASE("well formed dataset has no violations") {
  const Dataset d = small_dataset();
  CHECK(validate_dataset(d).empty());
  CHECK_NOTHROW(require_valid(d));
}

TEST_CASE("a NaN mediator entry is reported with its coordinates") {
  Dataset d = small_dataset();
  d.m(2, 1) = std::numeric_limits<double>::quiet_NaN();
  const auto v = validate_dataset(d);
  REQUIRE(v.size() == 1);
  CHECK(v[0].kind == Violation::Kind::NonFinite);
  CHECK(v[0].component == "m");
  CHECK(v[0].row == 2);
  CHECK(v[0].col == 1);
  CHECK_THROWS_AS(require_valid(d), InvalidInput);
}

TEST_CASE("row count mismatch") {
  Dataset d;
  d.y = VectorXd::Zero(4);
  d.z = VectorXd::Zero(4);
  d.m = MatrixXd::Ones(5, 2);
  const auto v = validate_dataset(d);
  REQUIRE(v.size() == 1);
  CHECK(v[0].kind == Violation::Kind::RowCount);
  CHECK(v[0].component == "m");
}

TEST_CASE("validation is pure") {
  Dataset d = small_dataset();
  d.y(0) = std::numeric_limits<double>::infinity();
  d.mediator_names = {"a"};
  const auto a = validate_dataset(d);
  const auto b = validate_dataset(d);
  REQUIRE(a.size() == b.size());
  CHECK(a.size() == 2);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].message == b[i].message);
}

TEST_CASE("no mediators") {
  Dataset d;
  d.y = VectorXd::Zero(2);
  d.z = VectorXd::Zero(2);
  d.m.resize(2, 0);
  const auto v = validate_dataset(d);
  REQUIRE(v.size() == 1);
  CHECK(v[0].kind == Violation::Kind::NoMediators);
}

TEST_CASE("standardize uses the population sd") {
  MatrixXd a(3, 1);
  a << 1, 2, 3;
  const auto s = standardize_columns(a);
  CHECK(s.mean(0) == doctest::Approx(2.0));
  CHECK(s.scale(0) == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-14));
  CHECK(s.values(0, 0) == doctest::Approx(-std::sqrt(1.5)));
  CHECK(s.values(1, 0) == doctest::Approx(0.0));
  CHECK(s.values.col(0).squaredNorm() / 3.0 == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("standardize is idempotent on standardized columns") {
  Rng rng(4);
  const auto once = standardize_columns(testing::normal_matrix(50, 3, rng));
  const auto twice = standardize_columns(once.values);
  CHECK(testing::rel_diff(twice.values, once.values) < 1e-12);
  CHECK(twice.mean.cwiseAbs().maxCoeff() < 1e-14);
  CHECK((twice.scale.array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("standardize rejects a constant column by index") {
  MatrixXd a(3, 2);
  a << 1, 5, 2, 5, 3, 5;
  try {
    standardize_columns(a);
    FAIL("expected InvalidInput");
  } catch (const InvalidInput& e) {
    CHECK(std::string(e.what()) == "constant column 1");
  }
}

TEST_CASE("standardize round trip") {
  Rng rng(9);
  MatrixXd a = testing::normal_matrix(40, 5, rng) * 3.0;
  a.array() += 10.0;
  const auto s = standardize_columns(a);
  CHECK(testing::rel_diff(unstandardize(s), a) < 1e-12);
}

TEST_CASE("nu flatten round trip and layout") {
  ParameterVectorNu nu;
  nu.gamma = MatrixXd::Random(4, 3);
  nu.loading = MatrixXd::Random(4, 2);
  nu.uniqueness = VectorXd::Constant(4, 0.5);
  const VectorXd flat = nu.flatten();
  CHECK(flat.size() == 4 * 3 + 4 * 2 + 4);
  CHECK(flat(1 * 3 + 2) == nu.gamma(1, 2));
  CHECK(flat(nu.alpha_offset() + 3 * 2 + 1) == nu.loading(3, 1));
  const auto back = ParameterVectorNu::unflatten(flat, 4, 3, 2);
  CHECK(back.gamma == nu.gamma);
  CHECK(back.loading == nu.loading);
  CHECK(back.uniqueness == nu.uniqueness);
  CHECK_THROWS_AS(ParameterVectorNu::unflatten(flat, 4, 3, 1), InvalidInput);
  nu.uniqueness(2) = 0.0;
  CHECK_THROWS_AS(nu.validate(), InvalidInput);
}

TEST_CASE("outcome params flatten in regressor order") {
  OutcomeParams op;
  op.beta0 = 1;
  op.beta1 = 2;
  op.beta2 = VectorXd::Constant(2, 3);
  op.beta3 = VectorXd::Constant(1, 4);
  op.phi = VectorXd::Constant(1, 5);
  VectorXd expect(6);
  expect << 1, 2, 3, 3, 4, 5;
  CHECK(op.flatten() == expect);
  const auto back = OutcomeParams::unflatten(expect, 2, 1, 1);
  CHECK(back.beta1 == 2);
  CHECK(back.phi(0) == 5);
}

TEST_CASE("design has columns 1, z, m, x, L") {
  const Dataset d = small_dataset();
  MatrixXd proxy(3, 1);
  proxy << 7, 8, 9;
  const MatrixXd r = outcome_design(d, proxy);
  REQUIRE(r.cols() == 2 + 2 + 1 + 1);
  CHECK(r.col(0).isOnes());
  CHECK(r.col(1) == d.z);
  CHECK(r.col(3) == d.m.col(1));
  CHECK(r.col(4) == d.x.col(0));
  CHECK(r.col(5) == proxy.col(0));
}

TEST_CASE("csv reader handles quotes and rejects ragged rows") {
  std::istringstream ok("a,\"b,c\",d\n1,\"2\",3\n");
  const auto t = read_csv(ok);
  REQUIRE(t.header.size() == 3);
  CHECK(t.header[1] == "b,c");
  CHECK(t.rows[0][1] == "2");
  std::istringstream bad("a,b\n1,2,3\n");
  CHECK_THROWS_AS(read_csv(bad), InvalidInput);
}

TEST_CASE("dataset csv round trip through roles") {
  Dataset d = small_dataset();
  d.mediator_names = {"g,1", "g2"};
  std::ostringstream out;
  const RoleMap roles = write_dataset_csv(out, d);
  std::istringstream in(out.str());
  const Dataset back = dataset_from_table(read_csv(in), parse_roles_json(roles_to_json(roles)));
  CHECK(back.y == d.y);
  CHECK(back.z == d.z);
  CHECK(back.m == d.m);
  CHECK(back.x == d.x);
  CHECK(back.mediator_names[0] == "g,1");
}

TEST_CASE("table cells that do not parse are rejected with coordinates") {
  std::istringstream in("y,z,m\n1,0,2\n2,1,oops\n");
  const auto t = read_csv(in);
  RoleMap roles{{"y", ColumnRole::Outcome}, {"z", ColumnRole::Treatment}, {"m", ColumnRole::Mediator}};
  try {
    dataset_from_table(t, roles);
    FAIL("expected InvalidInput");
  } catch (const InvalidInput& e) {
    const std::string msg = e.what();
    CHECK(msg.find("'m'") != std::string::npos);
  }
  CHECK_THROWS_AS(dataset_from_table(t, {{"y", ColumnRole::Outcome}}), InvalidInput);
}

TEST_CASE("format_double round trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345678.9}) CHECK(std::stod(format_double(v)) == v);
}
