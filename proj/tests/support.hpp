#pragma once

#include "medsel/dataset.hpp"
#include "medsel/random.hpp"

#include <random>

namespace medsel::testing {

inline MatrixXd normal_matrix(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> nd;
  MatrixXd out(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) out(r, c) = nd(rng);
  return out;
}

inline VectorXd normal_vector(Index n, Rng& rng) { return normal_matrix(n, 1, rng).col(0); }

// M1 = Z + X + ZX + U + e1, M2 = M3 = Z + X + U + e, Y = Z + M1 + M2 + M3 + X + U + eta.
struct ExampleOne {
  Dataset d;
  VectorXd u;
};

inline ExampleOne example_one(Index n, std::uint64_t seed, bool noise = true) {
  Rng rng(seed);
  std::normal_distribution<double> nd;
  ExampleOne ex;
  Dataset& d = ex.d;
  d.y.resize(n);
  d.z.resize(n);
  d.m.resize(n, 3);
  d.x.resize(n, 1);
  ex.u.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double z = nd(rng), x = nd(rng), u = nd(rng);
    double e[3], eta;
    for (double& v : e) v = noise ? nd(rng) : 0.0;
    eta = noise ? nd(rng) : 0.0;
    d.z(i) = z;
    d.x(i, 0) = x;
    ex.u(i) = u;
    d.m(i, 0) = z + x + z * x + u + e[0];
    d.m(i, 1) = z + x + u + e[1];
    d.m(i, 2) = z + x + u + e[2];
    d.y(i) = z + d.m.row(i).sum() + x + u + eta;
  }
  return ex;
}

// Random orthogonal t x t matrix.
inline MatrixXd random_rotation(Index t, Rng& rng) {
  const MatrixXd a = normal_matrix(t, t, rng);
  Eigen::HouseholderQR<MatrixXd> qr(a);
  MatrixXd q = qr.householderQ();
  return q;
}

// n x p residuals whose second moment E[r r'] is exactly `cov`.
inline MatrixXd planted_residuals(const MatrixXd& cov, Index n, Rng& rng) {
  Eigen::HouseholderQR<MatrixXd> qr(normal_matrix(n, cov.cols(), rng));
  const MatrixXd q = qr.householderQ() * MatrixXd::Identity(n, cov.cols());
  const MatrixXd l = cov.llt().matrixL();
  return std::sqrt(static_cast<double>(n)) * q * l.transpose();
}

inline double rel_diff(const MatrixXd& a, const MatrixXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace medsel::testing
