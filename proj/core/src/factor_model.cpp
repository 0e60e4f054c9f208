#include "medsel/factor_model.hpp"

#include "factor_algebra.hpp"
#include "medsel/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace medsel {

using detail::WoodburyInverse;

MatrixXd FactorFit::implied_covariance() const {
  MatrixXd sigma = loading * loading.transpose();
  sigma.diagonal() += uniqueness;
  return sigma;
}

MatrixXd sample_second_moment(const MatrixXd& residuals) {
  if (residuals.rows() < 1) throw InvalidInput("residual matrix has no rows");
  MatrixXd t = residuals.transpose() * residuals / static_cast<double>(residuals.rows());
  return 0.5 * (t + t.transpose());
}

double factor_loglik(const MatrixXd& sample_cov, const MatrixXd& loading,
                     const VectorXd& uniqueness) {
  const WoodburyInverse w(loading, uniqueness);
  return -w.logdet - detail::trace_product(sample_cov, w);
}

VectorXd factor_loglik_gradient(const MatrixXd& sample_cov, const MatrixXd& loading,
                                const VectorXd& uniqueness) {
  const Index p = loading.rows(), t = loading.cols();
  const WoodburyInverse w(loading, uniqueness);
  const MatrixXd sg = w.apply(loading);                 // Sigma^-1 Gamma
  const MatrixXd stsg = w.apply(sample_cov * sg);       // Sigma^-1 T Sigma^-1 Gamma
  const MatrixXd grad_loading = 2.0 * (stsg - sg);
  const VectorXd grad_unique = detail::sandwich_diagonal(sample_cov, w) - w.diagonal();
  VectorXd out(p * t + p);
  for (Index j = 0; j < p; ++j)
    for (Index s = 0; s < t; ++s) out(j * t + s) = grad_loading(j, s);
  out.tail(p) = grad_unique;
  return out;
}

RotationResult fix_rotation(const MatrixXd& loading, const VectorXd& uniqueness) {
  const Index t = loading.cols();
  RotationResult out;
  if (t == 0) {
    out.loading = loading;
    return out;
  }
  const MatrixXd gram = loading.transpose() * uniqueness.cwiseInverse().asDiagonal() * loading;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (gram + gram.transpose()));
  const VectorXd& mu = eig.eigenvalues();  // ascending
  MatrixXd rotation(t, t);
  for (Index s = 0; s < t; ++s) rotation.col(s) = eig.eigenvectors().col(t - 1 - s);
  out.loading = loading * rotation;

  const double top = std::max(std::abs(mu(t - 1)), std::numeric_limits<double>::min());
  for (Index s = 0; s + 1 < t; ++s)
    if (mu(s + 1) - mu(s) < 1e-10 * top) out.warning = true;
  if (mu(0) <= 1e-14 * top) out.warning = true;

  for (Index s = 0; s < t; ++s) {
    Index best = 0;
    for (Index j = 1; j < out.loading.rows(); ++j)
      if (std::abs(out.loading(j, s)) > std::abs(out.loading(best, s))) best = j;
    if (out.loading(best, s) < 0.0) out.loading.col(s) *= -1.0;
  }
  return out;
}

namespace {

void pca_start(const MatrixXd& sample_cov, Index t, double floor, MatrixXd& loading,
               VectorXd& uniqueness) {
  const Index p = sample_cov.rows();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sample_cov);
  const VectorXd& mu = eig.eigenvalues();  // ascending
  const double rest = p > t ? mu.head(p - t).mean() : 0.0;
  loading.resize(p, t);
  for (Index s = 0; s < t; ++s) {
    const Index idx = p - 1 - s;
    const double excess = std::max(mu(idx) - rest, 1e-6 * std::abs(mu(idx)) + floor);
    loading.col(s) = eig.eigenvectors().col(idx) * std::sqrt(excess);
  }
  uniqueness = sample_cov.diagonal() - loading.rowwise().squaredNorm();
  uniqueness = uniqueness.cwiseMax(floor);
}

}  // namespace

namespace {
// argmax over Gamma of l(Gamma, Psi) for fixed Psi: Psi^1/2 V (Lambda - I)_+^1/2 from the
// top-t eigenpairs of Psi^-1/2 T Psi^-1/2.
MatrixXd profile_loading(const MatrixXd& sample_cov, const VectorXd& uniqueness, Index t) {
  const VectorXd root = uniqueness.cwiseSqrt();
  const VectorXd inv_root = root.cwiseInverse();
  const MatrixXd scaled = inv_root.asDiagonal() * sample_cov * inv_root.asDiagonal();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(scaled);
  const Index p = sample_cov.rows();
  MatrixXd out(p, t);
  for (Index s = 0; s < t; ++s) {
    const Index col = p - 1 - s;
    out.col(s) = root.cwiseProduct(eig.eigenvectors().col(col)) *
                 std::sqrt(std::max(eig.eigenvalues()(col) - 1.0, 0.0));
  }
  return out;
}

// Floored uniquenesses sit on the boundary; only the inward component counts.
double projected_gradient(const MatrixXd& sample_cov, const MatrixXd& loading,
                          const VectorXd& uniqueness, double floor) {
  const Index pt = loading.size();
  const VectorXd grad = factor_loglik_gradient(sample_cov, loading, uniqueness);
  double max_grad = 0.0;
  for (Index i = 0; i < grad.size(); ++i) {
    const bool on_floor = i >= pt && uniqueness(i - pt) <= floor && grad(i) < 0.0;
    if (!on_floor) max_grad = std::max(max_grad, std::abs(grad(i)));
  }
  return max_grad;
}
}  // namespace

FactorFit fit_factor_covariance(const MatrixXd& sample_cov, Index t, const FactorOptions& opts) {
  const Index p = sample_cov.rows();
  if (t < 1) throw InvalidInput("fit_factor: factor count must be at least 1");
  if (p < 2 * t + 1)
    throw InvalidInput("fit_factor: p = " + std::to_string(p) + " is below 2t + 1 = " +
                       std::to_string(2 * t + 1));
  if (sample_cov.cols() != p) throw InvalidInput("fit_factor: covariance must be square");
  if (!sample_cov.allFinite()) throw InvalidInput("fit_factor: covariance has non-finite entries");

  FactorFit fit;
  fit.t = t;
  const double mean_diag = sample_cov.diagonal().mean();
  if (!(mean_diag > 0.0)) throw InvalidInput("fit_factor: residuals have zero variance");
  fit.uniqueness_floor = opts.floor_fraction * mean_diag;
  const double floor = fit.uniqueness_floor;

  MatrixXd loading;
  VectorXd uniqueness;
  pca_start(sample_cov, t, floor, loading, uniqueness);
  double loglik = factor_loglik(sample_cov, loading, uniqueness);
  if (opts.keep_trace) fit.trace.push_back(loglik);

  const MatrixXd eye = MatrixXd::Identity(t, t);
  int iter = 0;
  bool converged = false;
  while (iter < opts.max_iterations) {
    ++iter;
    const WoodburyInverse w(loading, uniqueness);
    const MatrixXd beta = w.apply(loading).transpose();          // t x p
    const MatrixXd beta_t = beta * sample_cov;                    // t x p
    const MatrixXd ezz = eye - beta * loading + beta_t * beta.transpose();
    const MatrixXd next_loading = ezz.llt().solve(beta_t).transpose();  // p x t
    VectorXd next_unique(p);
    for (Index j = 0; j < p; ++j)
      next_unique(j) = sample_cov(j, j) - next_loading.row(j).dot(beta_t.col(j));
    next_unique = next_unique.cwiseMax(floor);

    loading = next_loading;
    uniqueness = next_unique;
    // EM crawls along the boundary once a uniqueness is floored; the loading
    // maximiser for fixed Psi is closed form, so take it directly
    if ((uniqueness.array() <= floor).any()) loading = profile_loading(sample_cov, uniqueness, t);
    const double next = factor_loglik(sample_cov, loading, uniqueness);
    if (opts.keep_trace) fit.trace.push_back(next);
    const double change = std::abs(next - loglik);
    loglik = next;
    // the likelihood is flat along weakly identified directions, so a small
    // change alone is not enough; require the projected gradient too
    if (change <= opts.relative_tolerance * std::max(1.0, std::abs(loglik)) &&
        projected_gradient(sample_cov, loading, uniqueness, floor) <= opts.stationarity_tolerance) {
      converged = true;
      break;
    }
  }

  const auto rotated = fix_rotation(loading, uniqueness);
  fit.loading = rotated.loading;
  fit.rotation_warning = rotated.warning;
  fit.uniqueness = uniqueness;
  fit.loglik = factor_loglik(sample_cov, fit.loading, fit.uniqueness);
  fit.iterations = iter;
  fit.converged = converged;
  fit.max_gradient = projected_gradient(sample_cov, fit.loading, fit.uniqueness, floor);
  fit.stationary = fit.max_gradient <= opts.stationarity_tolerance;
  return fit;
}

FactorFit fit_factor(const MatrixXd& residuals, Index t, const FactorOptions& opts) {
  return fit_factor_covariance(sample_second_moment(residuals), t, opts);
}

namespace {

Index numerical_rank(const MatrixXd& rows, double tol) {
  if (rows.rows() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(rows);
  const auto& sv = svd.singularValues();
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rank;
  return rank;
}

MatrixXd take_rows(const MatrixXd& g, const std::vector<Index>& idx) {
  MatrixXd out(static_cast<Index>(idx.size()), g.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = g.row(idx[i]);
  return out;
}

// Greedy Gram-Schmidt selection of up to t independent rows, in order.
std::vector<Index> greedy_basis(const MatrixXd& g, const std::vector<Index>& candidates,
                                double tol) {
  const Index t = g.cols();
  std::vector<Index> chosen;
  MatrixXd q(0, t);
  for (Index r : candidates) {
    if (static_cast<Index>(chosen.size()) == t) break;
    Eigen::RowVectorXd v = g.row(r);
    for (Index i = 0; i < q.rows(); ++i) v -= v.dot(q.row(i)) * q.row(i);
    const double norm = v.norm();
    if (norm > tol) {
      q.conservativeResize(q.rows() + 1, Eigen::NoChange);
      q.row(q.rows() - 1) = v / norm;
      chosen.push_back(r);
    }
  }
  return chosen;
}

// Search for two disjoint rank-t row subsets within `rows`. Exhaustive over
// the first subset when `exhaustive`; otherwise a few greedy attempts.
std::optional<std::pair<std::vector<Index>, std::vector<Index>>> find_partition(
    const MatrixXd& g, const std::vector<Index>& rows, double tol, bool exhaustive,
    bool& inconclusive) {
  const Index t = g.cols();
  const auto m = static_cast<Index>(rows.size());
  inconclusive = false;
  if (m < 2 * t || numerical_rank(take_rows(g, rows), tol) < t) return std::nullopt;

  auto try_first = [&](const std::vector<Index>& first)
      -> std::optional<std::pair<std::vector<Index>, std::vector<Index>>> {
    if (numerical_rank(take_rows(g, first), tol) < t) return std::nullopt;
    std::vector<Index> rest;
    for (Index r : rows)
      if (std::find(first.begin(), first.end(), r) == first.end()) rest.push_back(r);
    auto second = greedy_basis(g, rest, tol);
    if (static_cast<Index>(second.size()) < t) return std::nullopt;
    return std::make_pair(first, second);
  };

  if (exhaustive) {
    std::vector<Index> pick(static_cast<std::size_t>(t));
    std::iota(pick.begin(), pick.end(), Index{0});
    for (;;) {
      std::vector<Index> first;
      for (Index i : pick) first.push_back(rows[static_cast<std::size_t>(i)]);
      if (auto found = try_first(first)) return found;
      Index pos = t - 1;
      while (pos >= 0 && pick[static_cast<std::size_t>(pos)] == m - t + pos) --pos;
      if (pos < 0) break;
      ++pick[static_cast<std::size_t>(pos)];
      for (Index i = pos + 1; i < t; ++i)
        pick[static_cast<std::size_t>(i)] = pick[static_cast<std::size_t>(i - 1)] + 1;
    }
    return std::nullopt;
  }

  // Greedy: forward order, reverse order, then rows sorted by decreasing norm.
  std::vector<std::vector<Index>> orders{rows, std::vector<Index>(rows.rbegin(), rows.rend())};
  auto by_norm = rows;
  std::stable_sort(by_norm.begin(), by_norm.end(),
                   [&](Index a, Index b) { return g.row(a).norm() > g.row(b).norm(); });
  orders.push_back(by_norm);
  for (const auto& order : orders) {
    auto first = greedy_basis(g, order, tol);
    if (static_cast<Index>(first.size()) < t) continue;
    if (auto found = try_first(first)) return found;
  }
  inconclusive = true;
  return std::nullopt;
}

}  // namespace

ConditionIResult check_condition_i(const MatrixXd& loading, double zero_tol) {
  const Index p = loading.rows(), t = loading.cols();
  ConditionIResult out;
  if (t < 1) {
    out.verdict = Verdict::Fails;
    out.detail = "loading matrix has no columns";
    return out;
  }
  MatrixXd g = loading;
  for (Index j = 0; j < p; ++j)
    for (Index s = 0; s < t; ++s)
      if (std::abs(g(j, s)) < zero_tol) g(j, s) = 0.0;

  if (t == 1) {
    std::vector<Index> nonzero;
    for (Index j = 0; j < p; ++j)
      if (g(j, 0) != 0.0) nonzero.push_back(j);
    if (nonzero.size() >= 3) {
      out.verdict = Verdict::Holds;
      for (Index r = 0; r < p; ++r) {
        std::vector<Index> left;
        for (Index j : nonzero)
          if (j != r && left.size() < 2) left.push_back(j);
        out.witnesses.push_back({r, {left[0]}, {left[1]}});
      }
      out.detail = std::to_string(nonzero.size()) + " nonzero loadings";
    } else {
      out.verdict = Verdict::Fails;
      out.failing_row = nonzero.size() == 2 ? nonzero.front() : Index{0};
      out.detail = "only " + std::to_string(nonzero.size()) +
                   " nonzero loadings; at least 3 are required";
    }
    return out;
  }

  const double tol = zero_tol * std::max(g.norm(), std::numeric_limits<double>::min());
  const bool exhaustive = p <= 20 || t <= 2;
  bool any_inconclusive = false;
  for (Index r = 0; r < p; ++r) {
    std::vector<Index> rows;
    for (Index j = 0; j < p; ++j)
      if (j != r && g.row(j).norm() > 0.0) rows.push_back(j);
    bool inconclusive = false;
    auto found = find_partition(g, rows, tol, exhaustive, inconclusive);
    if (found) {
      out.witnesses.push_back({r, found->first, found->second});
      continue;
    }
    if (inconclusive) {
      any_inconclusive = true;
      if (!out.failing_row) out.failing_row = r;
      continue;
    }
    out.verdict = Verdict::Fails;
    out.failing_row = r;
    out.witnesses.clear();
    out.detail = "deleting row " + std::to_string(r) +
                 " leaves no two disjoint full-rank row subsets";
    return out;
  }
  if (any_inconclusive) {
    out.verdict = Verdict::Inconclusive;
    out.detail = "greedy search found no witness for row " + std::to_string(*out.failing_row) +
                 "; exact search is skipped for p > 20 and t > 2";
    return out;
  }
  out.verdict = Verdict::Holds;
  out.detail = "witness partition found for every deleted row";
  return out;
}

FactorCountResult select_num_factors(const MatrixXd& residuals, Index t_max) {
  const Index p = residuals.cols();
  if (t_max < 1) throw InvalidInput("select_num_factors: t_max must be at least 1");
  if (2 * t_max + 1 > p)
    throw InvalidInput("select_num_factors: t_max = " + std::to_string(t_max) +
                       " exceeds (p - 1) / 2");
  const MatrixXd t_n = sample_second_moment(residuals);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(t_n, Eigen::EigenvaluesOnly);
  FactorCountResult out;
  for (Index i = p - 1; i >= 0; --i) out.eigenvalues.push_back(eig.eigenvalues()(i));
  double best = -1.0;
  for (Index j = 0; j < t_max; ++j) {
    const double num = out.eigenvalues[static_cast<std::size_t>(j)];
    const double den = out.eigenvalues[static_cast<std::size_t>(j + 1)];
    const double ratio = den > 0.0 ? num / den : std::numeric_limits<double>::infinity();
    out.ratios.push_back(ratio);
    // ties to the smaller count; rounding must not pick t for a flat spectrum
    if (ratio > best * (1.0 + 1e-10)) {
      best = ratio;
      out.t = j + 1;
    }
  }
  out.low_confidence = best < 1.5;
  return out;
}

}  // namespace medsel
