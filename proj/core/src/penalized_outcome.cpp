#include "medsel/penalized_outcome.hpp"

#include "medsel/error.hpp"
#include "medsel/parallel.hpp"
#include "medsel/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace medsel {

void PenaltySpec::validate(Index p) const {
  if (!std::isfinite(lambda) || lambda < 0.0)
    throw InvalidInput("penalty lambda must be finite and >= 0");
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw InvalidInput("adaptive exponent delta must be > 0");
  if (weights.size() != 0) {
    if (weights.size() != p)
      throw InvalidInput("penalty weights have length " + std::to_string(weights.size()) +
                         ", expected " + std::to_string(p));
    for (Index j = 0; j < p; ++j)
      if (!std::isfinite(weights(j)) || weights(j) < 0.0)
        throw InvalidInput("penalty weight " + std::to_string(j) + " must be finite and >= 0");
  }
  if (!penalized.empty() && penalized.size() != static_cast<std::size_t>(p))
    throw InvalidInput("penalized mask has wrong length");
}

VectorXd PenaltySpec::effective_weights(Index p) const {
  return weights.size() == 0 ? VectorXd::Ones(p) : weights;
}

bool PenaltySpec::is_penalized(Index j) const {
  return penalized.empty() || penalized[static_cast<std::size_t>(j)];
}

namespace {

double soft(double x, double thr) {
  if (x > thr) return x - thr;
  if (x < -thr) return x + thr;
  return 0.0;
}

// Outcome design with penalized mediator columns centred and scaled. The
// penalty weight of a scaled column is w / sd, so the objective is the one
// stated on the original scale; scaling only conditions the sweeps.
struct Layout {
  MatrixXd design;
  VectorXd y;
  std::vector<Index> pen;    // design columns under the penalty
  std::vector<Index> unpen;  // everything else, profiled out exactly
  VectorXd center;           // per design column
  VectorXd scale;
  VectorXd w;                // internal weight per pen entry
  VectorXd unit;             // 1 / sd per pen entry, converts steps to original scale
  Index p = 0, q = 0, t = 0;
};

Layout make_layout(const Dataset& d, const MatrixXd& proxy, const PenaltySpec& spec) {
  require_valid(d);
  spec.validate(d.p());
  Layout lay;
  lay.p = d.p();
  lay.q = d.q();
  lay.t = proxy.cols();
  lay.design = outcome_design(d, proxy);
  if (!lay.design.allFinite()) throw InvalidInput("outcome design has non-finite entries");
  lay.y = d.y;
  const Index cols = lay.design.cols();
  const Index n = d.n();
  lay.center = VectorXd::Zero(cols);
  lay.scale = VectorXd::Ones(cols);
  const VectorXd w = spec.effective_weights(d.p());
  std::vector<double> wi, ui;
  for (Index c = 0; c < cols; ++c) {
    const bool is_med = c >= 2 && c < 2 + lay.p;
    if (!is_med || !spec.is_penalized(c - 2)) {
      lay.unpen.push_back(c);
      continue;
    }
    const Index j = c - 2;
    const double mu = lay.design.col(c).mean();
    const double sd = std::sqrt((lay.design.col(c).array() - mu).square().sum() / n);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mu))))
      throw InvalidInput("constant mediator column '" + d.mediator_name(j) + "'");
    lay.design.col(c) = (lay.design.col(c).array() - mu) / sd;
    lay.center(c) = mu;
    lay.scale(c) = sd;
    lay.pen.push_back(c);
    wi.push_back(w(j) / sd);
    ui.push_back(1.0 / sd);
  }
  lay.w = Eigen::Map<VectorXd>(wi.data(), static_cast<Index>(wi.size()));
  lay.unit = Eigen::Map<VectorXd>(ui.data(), static_cast<Index>(ui.size()));
  return lay;
}

struct Gram {
  MatrixXd g;
  VectorXd c;
  double yy = 0.0;
  Index rows = 0;
};

Gram gram_of(const MatrixXd& design, const VectorXd& y) {
  Gram s;
  s.g = MatrixXd::Zero(design.cols(), design.cols());
  s.g.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose());
  s.g.triangularView<Eigen::StrictlyUpper>() = s.g.transpose();
  s.c = design.transpose() * y;
  s.yy = y.squaredNorm();
  s.rows = design.rows();
  return s;
}

Gram gram_rows(const Layout& lay, const std::vector<Index>& rows) {
  MatrixXd dsub(static_cast<Index>(rows.size()), lay.design.cols());
  VectorXd ysub(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    dsub.row(static_cast<Index>(i)) = lay.design.row(rows[i]);
    ysub(static_cast<Index>(i)) = lay.y(rows[i]);
  }
  return gram_of(dsub, ysub);
}

MatrixXd pick(const MatrixXd& g, const std::vector<Index>& r, const std::vector<Index>& c) {
  MatrixXd out(static_cast<Index>(r.size()), static_cast<Index>(c.size()));
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j)
      out(static_cast<Index>(i), static_cast<Index>(j)) = g(r[i], c[j]);
  return out;
}

VectorXd pick(const VectorXd& v, const std::vector<Index>& r) {
  VectorXd out(static_cast<Index>(r.size()));
  for (std::size_t i = 0; i < r.size(); ++i) out(static_cast<Index>(i)) = v(r[i]);
  return out;
}

// Penalized block after the unpenalized regressors are profiled out:
// n * objective = yy_res - 2 b'theta + theta' A theta + lambda sum w |theta|.
struct Profiled {
  MatrixXd a;
  VectorXd b;
  MatrixXd h;   // G_uu^-1 G_up
  VectorXd hu;  // G_uu^-1 c_u
  double yy_res = 0.0;
  Index rows = 0;
};

Profiled profile(const Gram& s, const Layout& lay) {
  const MatrixXd guu = pick(s.g, lay.unpen, lay.unpen);
  const MatrixXd gup = pick(s.g, lay.unpen, lay.pen);
  const VectorXd cu = pick(s.c, lay.unpen);
  // Jacobi scaling before the Cholesky factorisation.
  VectorXd dg = guu.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  const MatrixXd scaled = dg.asDiagonal() * guu * dg.asDiagonal();
  Eigen::LLT<MatrixXd> llt(scaled);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-13 ||
      (guu.diagonal().array() <= 0.0).any())
    throw NumericalFailure(
        "unpenalized regressors (1, Z, X, L) are collinear; identification condition (ii) fails");
  auto solve = [&](const MatrixXd& rhs) -> MatrixXd {
    return dg.asDiagonal() * llt.solve(dg.asDiagonal() * rhs);
  };
  Profiled pr;
  pr.rows = s.rows;
  pr.h = solve(gup);
  pr.hu = solve(cu);
  pr.a = pick(s.g, lay.pen, lay.pen) - gup.transpose() * pr.h;
  pr.a = 0.5 * (pr.a + pr.a.transpose()).eval();
  pr.b = pick(s.c, lay.pen) - gup.transpose() * pr.hu;
  pr.yy_res = s.yy - cu.dot(pr.hu);
  for (Index j = 0; j < pr.a.rows(); ++j)
    if (!(pr.a(j, j) > 1e-12 * std::max(1.0, static_cast<double>(s.rows))))
      throw NumericalFailure("mediator column " + std::to_string(lay.pen[static_cast<std::size_t>(j)] - 2) +
                             " is collinear with the unpenalized regressors");
  return pr;
}

double profiled_objective(const Profiled& pr, const VectorXd& th, const VectorXd& grad,
                          double lambda, const VectorXd& w) {
  // theta'A theta - 2 b'theta = -theta'(b + grad) with grad = b - A theta
  const double quad = -th.dot(pr.b + grad);
  return (pr.yy_res + quad + lambda * w.cwiseProduct(th.cwiseAbs()).sum()) /
         static_cast<double>(pr.rows);
}

struct CdResult {
  VectorXd theta;
  int sweeps = 0;
  std::vector<double> trace;
};

CdResult coordinate_descent(const Profiled& pr, double lambda, const VectorXd& w,
                            const VectorXd& unit, VectorXd theta, const SolverOptions& opts) {
  const Index s = pr.a.rows();
  CdResult out;
  if (s == 0) {
    out.theta = theta;
    return out;
  }
  const MatrixXd& a = pr.a;
  VectorXd grad = pr.b - a * theta;

  auto update = [&](Index j) {
    const double ajj = a(j, j);
    const double old = theta(j);
    const double next = soft(grad(j) + ajj * old, 0.5 * lambda * w(j)) / ajj;
    if (next != old) {
      grad.noalias() -= a.col(j) * (next - old);
      theta(j) = next;
    }
    return std::abs(next - old) * unit(j);
  };
  auto record = [&] {
    ++out.sweeps;
    if (opts.keep_trace) out.trace.push_back(profiled_objective(pr, theta, grad, lambda, w));
  };
  auto give_up = [&](double change) {
    std::ostringstream msg;
    msg << "coordinate descent did not converge after " << out.sweeps
        << " sweeps (lambda = " << lambda << ", last max change = " << change << ")";
    throw NumericalFailure(msg.str());
  };
  auto signs = [&] {
    std::vector<signed char> sg(static_cast<std::size_t>(s));
    for (Index j = 0; j < s; ++j) sg[static_cast<std::size_t>(j)] = (theta(j) > 0) - (theta(j) < 0);
    return sg;
  };
  // Exact minimiser on the current orthant face, kept only if signs survive.
  auto polish = [&](const std::vector<signed char>& sg) {
    std::vector<Index> act;
    for (Index j = 0; j < s; ++j)
      if (sg[static_cast<std::size_t>(j)] != 0) act.push_back(j);
    if (act.empty()) return;
    const Index m = static_cast<Index>(act.size());
    MatrixXd aa(m, m);
    VectorXd rhs(m);
    for (Index i = 0; i < m; ++i) {
      for (Index k = 0; k < m; ++k) aa(i, k) = a(act[i], act[k]);
      rhs(i) = pr.b(act[i]) - 0.5 * lambda * w(act[i]) * sg[static_cast<std::size_t>(act[i])];
    }
    Eigen::LLT<MatrixXd> llt(aa);
    if (llt.info() != Eigen::Success) return;
    const VectorXd sol = llt.solve(rhs);
    for (Index i = 0; i < m; ++i)
      if ((sol(i) > 0) - (sol(i) < 0) != sg[static_cast<std::size_t>(act[i])]) return;
    VectorXd cand = theta;
    for (Index i = 0; i < m; ++i) cand(act[i]) = sol(i);
    const VectorXd cand_grad = pr.b - a * cand;
    if (profiled_objective(pr, cand, cand_grad, lambda, w) >
        profiled_objective(pr, theta, grad, lambda, w))
      return;
    theta = cand;
    grad = cand_grad;
  };

  std::vector<signed char> previous;
  for (;;) {
    double change = 0.0;
    for (Index j = 0; j < s; ++j) change = std::max(change, update(j));
    record();
    if (change < opts.tolerance) break;
    if (out.sweeps >= opts.max_sweeps) give_up(change);
    auto sg = signs();
    if (sg == previous) polish(sg);
    previous = std::move(sg);

    std::vector<Index> active;
    for (Index j = 0; j < s; ++j)
      if (theta(j) != 0.0) active.push_back(j);
    for (;;) {
      double inner = 0.0;
      for (Index j : active) inner = std::max(inner, update(j));
      record();
      if (inner < opts.tolerance) break;
      if (out.sweeps >= opts.max_sweeps) give_up(inner);
    }
  }
  out.theta = std::move(theta);
  return out;
}

// Full coefficient vector on the internal (scaled) design.
VectorXd internal_xi(const Layout& lay, const Profiled& pr, const VectorXd& theta) {
  VectorXd xi = VectorXd::Zero(lay.design.cols());
  const VectorXd u = pr.hu - pr.h * theta;
  for (std::size_t i = 0; i < lay.unpen.size(); ++i) xi(lay.unpen[i]) = u(static_cast<Index>(i));
  for (std::size_t i = 0; i < lay.pen.size(); ++i) xi(lay.pen[i]) = theta(static_cast<Index>(i));
  return xi;
}

OutcomeFit finish_fit(const Layout& lay, const Dataset& d, const MatrixXd& proxy, const Profiled& pr,
                      const CdResult& cd, const PenaltySpec& spec) {
  VectorXd xi = internal_xi(lay, pr, cd.theta);
  for (Index c : lay.pen) {
    xi(c) /= lay.scale(c);
    xi(0) -= xi(c) * lay.center(c);
  }
  OutcomeFit fit;
  fit.params = OutcomeParams::unflatten(xi, lay.p, lay.q, lay.t);
  for (Index j = 0; j < lay.p; ++j)
    if (fit.params.beta2(j) != 0.0) fit.active_set.push_back(j);
  fit.residuals = d.y - outcome_design(d, proxy) * xi;
  fit.lambda_used = spec.lambda;
  fit.delta_used = spec.delta;
  fit.weights = spec.effective_weights(lay.p);
  fit.objective = partial_objective(d, proxy, fit.params, spec);
  fit.sweeps = cd.sweeps;
  fit.objective_trace = cd.trace;
  return fit;
}

std::vector<double> clean_grid(std::vector<double> grid) {
  if (grid.empty()) throw InvalidInput("lambda grid is empty");
  for (double v : grid)
    if (!std::isfinite(v) || v < 0.0) throw InvalidInput("lambda grid values must be finite and >= 0");
  std::sort(grid.begin(), grid.end(), std::greater<>());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

}  // namespace

double partial_objective(const Dataset& d, const MatrixXd& proxy, const OutcomeParams& params,
                         const PenaltySpec& spec) {
  const VectorXd r = d.y - outcome_design(d, proxy) * params.flatten();
  const VectorXd w = spec.effective_weights(d.p());
  double pen = 0.0;
  for (Index j = 0; j < d.p(); ++j)
    if (spec.is_penalized(j)) pen += w(j) * std::abs(params.beta2(j));
  const double n = static_cast<double>(d.n());
  return r.squaredNorm() / n + spec.lambda * pen / n;
}

OutcomeFit fit_partial_lasso(const Dataset& d, const MatrixXd& proxy, const PenaltySpec& spec,
                             const SolverOptions& opts) {
  const Layout lay = make_layout(d, proxy, spec);
  const Profiled pr = profile(gram_of(lay.design, lay.y), lay);
  const CdResult cd = coordinate_descent(pr, spec.lambda, lay.w, lay.unit,
                                         VectorXd::Zero(pr.a.rows()), opts);
  return finish_fit(lay, d, proxy, pr, cd, spec);
}

std::vector<OutcomeFit> fit_path(const Dataset& d, const MatrixXd& proxy, const PenaltySpec& base,
                                 const std::vector<double>& lambdas, const SolverOptions& opts) {
  const Layout lay = make_layout(d, proxy, base);
  const Profiled pr = profile(gram_of(lay.design, lay.y), lay);
  std::vector<OutcomeFit> out;
  VectorXd theta = VectorXd::Zero(pr.a.rows());
  for (double lam : lambdas) {
    PenaltySpec spec = base;
    spec.lambda = lam;
    spec.validate(d.p());
    CdResult cd = coordinate_descent(pr, lam, lay.w, lay.unit, theta, opts);
    theta = cd.theta;
    out.push_back(finish_fit(lay, d, proxy, pr, cd, spec));
  }
  return out;
}

double kkt_check(const OutcomeFit& fit, const Dataset& d, const MatrixXd& proxy,
                 const PenaltySpec& spec) {
  const MatrixXd r = outcome_design(d, proxy);
  const VectorXd xi = fit.params.flatten();
  const double n = static_cast<double>(d.n());
  const VectorXd grad = -2.0 / n * (r.transpose() * (d.y - r * xi));
  const VectorXd w = spec.effective_weights(d.p());
  double worst = 0.0;
  for (Index c = 0; c < r.cols(); ++c) {
    const bool is_med = c >= 2 && c < 2 + d.p();
    double v;
    if (!is_med || !spec.is_penalized(c - 2)) {
      v = std::abs(grad(c));
    } else {
      const double thr = spec.lambda * w(c - 2) / n;
      if (xi(c) != 0.0)
        v = std::abs(grad(c) + thr * (xi(c) > 0 ? 1.0 : -1.0));
      else
        v = std::max(0.0, std::abs(grad(c)) - thr);
    }
    worst = std::max(worst, v);
  }
  return worst;
}

AdaptiveWeights adaptive_weights(const VectorXd& beta_la_2, double delta, Index n) {
  if (n < 1) throw InvalidInput("adaptive weights need n >= 1");
  if (!(delta > 0.0) || !std::isfinite(delta)) throw InvalidInput("adaptive exponent delta must be > 0");
  AdaptiveWeights out;
  out.weights.resize(beta_la_2.size());
  const double off = 1.0 / static_cast<double>(n);
  for (Index j = 0; j < beta_la_2.size(); ++j) {
    double base = beta_la_2(j) + off;
    if (base == 0.0) {
      base = beta_la_2(j) - off;
      out.flipped_offset.push_back(j);
    }
    out.weights(j) = std::pow(std::abs(base), -delta);
    if (!std::isfinite(out.weights(j)))
      throw NumericalFailure("adaptive weight " + std::to_string(j) + " is not finite");
  }
  return out;
}

double lambda_max(const Dataset& d, const MatrixXd& proxy, const PenaltySpec& spec) {
  const Layout lay = make_layout(d, proxy, spec);
  const Profiled pr = profile(gram_of(lay.design, lay.y), lay);
  double out = 0.0;
  for (Index j = 0; j < pr.b.size(); ++j)
    if (lay.w(j) > 0.0) out = std::max(out, 2.0 * std::abs(pr.b(j)) / lay.w(j));
  return out;
}

std::vector<double> lambda_grid(double lmax, int count, double ratio) {
  if (count < 1) throw InvalidInput("lambda grid needs at least one point");
  if (!(ratio > 0.0 && ratio <= 1.0)) throw InvalidInput("lambda grid ratio must lie in (0, 1]");
  if (!std::isfinite(lmax) || lmax < 0.0) throw InvalidInput("lambda_max must be finite and >= 0");
  if (lmax == 0.0 || count == 1) return {lmax};
  std::vector<double> grid(static_cast<std::size_t>(count));
  const double la = std::log(lmax), lb = std::log(lmax * ratio);
  for (int i = 0; i < count; ++i)
    grid[static_cast<std::size_t>(i)] = std::exp(la + (lb - la) * i / (count - 1));
  grid.front() = lmax;
  return grid;
}

std::vector<int> fold_assignment(Index n, int folds, std::uint64_t seed) {
  if (folds < 2) throw InvalidInput("cross-validation needs at least 2 folds");
  if (n < folds) throw InvalidInput("fewer rows than cross-validation folds");
  const auto perm = random_permutation(static_cast<std::size_t>(n), seed);
  std::vector<int> out(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < perm.size(); ++i) out[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
  return out;
}

CvResult cross_validate(const Dataset& d, const MatrixXd& proxy, const PenaltySpec& base,
                        std::vector<double> grid, const CvOptions& opts,
                        const SolverOptions& solver) {
  grid = clean_grid(std::move(grid));
  const Layout lay = make_layout(d, proxy, base);
  const Gram full = gram_of(lay.design, lay.y);
  const auto fold = fold_assignment(d.n(), opts.folds, opts.seed);
  CvResult out;

  // full-data path first; it fixes where the grid stops
  {
    const Profiled pr = profile(full, lay);
    const double tss = (lay.y.array() - lay.y.mean()).square().sum();
    VectorXd theta = VectorXd::Zero(pr.a.rows());
    double prev_rsq = 0.0;
    for (std::size_t l = 0; l < grid.size(); ++l) {
      PenaltySpec spec = base;
      spec.lambda = grid[l];
      CdResult cd = coordinate_descent(pr, grid[l], lay.w, lay.unit, theta, solver);
      theta = cd.theta;
      out.path.push_back(finish_fit(lay, d, proxy, pr, cd, spec));
      if (opts.path_fdev > 0.0 && tss > 0.0 && static_cast<int>(l) + 1 >= opts.min_path) {
        const double rsq = 1.0 - out.path.back().residuals.squaredNorm() / tss;
        if (rsq - prev_rsq < opts.path_fdev * rsq || rsq > 0.999) {
          out.truncated = l + 1 < grid.size();
          grid.resize(l + 1);
          break;
        }
        prev_rsq = rsq;
      } else if (tss > 0.0) {
        prev_rsq = 1.0 - out.path.back().residuals.squaredNorm() / tss;
      }
    }
  }

  const std::size_t k = static_cast<std::size_t>(opts.folds);
  const std::size_t g = grid.size();
  std::vector<std::vector<double>> err(k);
  std::vector<char> skipped(k, 0);
  parallel_for(k, opts.threads, [&](std::size_t f) {
    std::vector<Index> rows;
    for (Index i = 0; i < d.n(); ++i)
      if (fold[static_cast<std::size_t>(i)] == static_cast<int>(f)) rows.push_back(i);
    const VectorXd yf = pick(lay.y, rows);
    if (yf.maxCoeff() == yf.minCoeff()) {
      skipped[f] = 1;
      return;
    }
    const Gram held = gram_rows(lay, rows);
    Gram train{full.g - held.g, full.c - held.c, full.yy - held.yy, full.rows - held.rows};
    const Profiled pr = profile(train, lay);
    MatrixXd df(static_cast<Index>(rows.size()), lay.design.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) df.row(static_cast<Index>(i)) = lay.design.row(rows[i]);
    VectorXd theta = VectorXd::Zero(pr.a.rows());
    err[f].resize(g);
    for (std::size_t l = 0; l < g; ++l) {
      theta = coordinate_descent(pr, grid[l], lay.w, lay.unit, theta, solver).theta;
      const VectorXd xi = internal_xi(lay, pr, theta);
      err[f][l] = (yf - df * xi).squaredNorm() / static_cast<double>(rows.size());
    }
  });

  for (std::size_t f = 0; f < k; ++f)
    if (skipped[f]) out.skipped_folds.push_back(static_cast<int>(f));
  const std::size_t used = k - out.skipped_folds.size();
  if (used == 0) throw InvalidInput("every cross-validation fold has a constant outcome");

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < g; ++l) {
    double mean = 0.0;
    for (std::size_t f = 0; f < k; ++f)
      if (!skipped[f]) mean += err[f][l];
    mean /= static_cast<double>(used);
    double var = 0.0;
    for (std::size_t f = 0; f < k; ++f)
      if (!skipped[f]) var += (err[f][l] - mean) * (err[f][l] - mean);
    const double se = used > 1 ? std::sqrt(var / static_cast<double>(used - 1) / static_cast<double>(used)) : 0.0;
    out.table.push_back({grid[l], base.delta, mean, se,
                         static_cast<Index>(out.path[l].active_set.size())});
    // strict comparison keeps the larger lambda on ties
    if (mean < best) {
      best = mean;
      out.lambda_star = grid[l];
    }
  }
  if (opts.rule == CvRule::OneSe) {
    double bound = 0.0;
    for (const auto& row : out.table)
      if (row.lambda == out.lambda_star) bound = row.mean_error + row.se;
    for (const auto& row : out.table)
      if (row.mean_error <= bound) {
        out.lambda_star = row.lambda;
        break;
      }
  }
  return out;
}

OutcomeFit fit_lasso_cv(const Dataset& d, const MatrixXd& proxy, const PenaltySpec& base,
                        const TwoStageOptions& opts) {
  const double lmax = lambda_max(d, proxy, base);
  CvResult cv = cross_validate(d, proxy, base, lambda_grid(lmax, opts.n_lambda, opts.lambda_ratio),
                               {opts.folds, opts.seed, opts.threads, opts.rule, opts.path_fdev, opts.min_path}, opts.solver);
  std::size_t at = 0;
  while (cv.table[at].lambda != cv.lambda_star) ++at;
  OutcomeFit fit = std::move(cv.path[at]);
  fit.cv_table = std::move(cv.table);
  return fit;
}

TwoStageFit fit_two_stage(const Dataset& d, const MatrixXd& proxy, const TwoStageOptions& opts) {
  if (opts.delta_grid.empty()) throw InvalidInput("delta grid is empty");
  TwoStageFit out;
  PenaltySpec first;
  out.initial = fit_lasso_cv(d, proxy, first, opts);

  auto cv_error = [](const OutcomeFit& f) {
    for (const auto& row : f.cv_table)
      if (row.lambda == f.lambda_used) return row.mean_error;
    return std::numeric_limits<double>::infinity();
  };
  TwoStageOptions second = opts;
  second.path_fdev = opts.adaptive_path_fdev;
  std::vector<CvRow> all_rows;
  bool have = false;
  for (double delta : opts.delta_grid) {
    AdaptiveWeights aw = adaptive_weights(out.initial.params.beta2, delta, d.n());
    PenaltySpec spec;
    spec.weights = aw.weights;
    spec.delta = delta;
    OutcomeFit fit = fit_lasso_cv(d, proxy, spec, second);
    all_rows.insert(all_rows.end(), fit.cv_table.begin(), fit.cv_table.end());
    if (!have || cv_error(fit) < cv_error(out.adaptive)) {
      out.adaptive = std::move(fit);
      out.weights = aw.weights;
      out.flipped_offset = aw.flipped_offset;
      have = true;
    }
  }
  out.adaptive.cv_table = std::move(all_rows);
  return out;
}

}  // namespace medsel
