#include "esspec/regular.hpp"

#include <algorithm>
#include <cmath>

#include "esspec/errors.hpp"
#include "esspec/schur.hpp"

namespace esspec {

namespace {

// Sample points: a uniform sweep of the window plus a geometric tail into
// beta, where the interesting behavior concentrates.
std::vector<double> sample_grid(double alpha, double beta, int grid,
                                int tail_levels) {
  std::vector<double> ts;
  if (std::isfinite(beta)) {
    double span = beta - alpha;
    double t_hi = beta - span / 8.0;
    for (int i = 0; i < grid; ++i)
      ts.push_back(alpha + (t_hi - alpha) * i / (grid - 1));
    double h = span / 16.0;
    for (int k = 1; k < tail_levels; ++k, h /= 2.0) ts.push_back(beta - h);
  } else {
    double t_hi = std::max(64.0, alpha + 64.0);
    for (int i = 0; i < grid; ++i)
      ts.push_back(alpha + (t_hi - alpha) * i / (grid - 1));
    double t = 2.0 * t_hi;
    for (int k = 1; k < tail_levels; ++k, t *= 2.0) ts.push_back(t);
  }
  return ts;
}

std::vector<double> sorted_eigenvalues(const Eigen::MatrixXcd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(A, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw NumericError("Hermitian eigendecomposition failed");
  std::vector<double> v(es.eigenvalues().data(),
                        es.eigenvalues().data() + A.rows());
  return v;
}

// Polish an interior extremum bracketed by three samples: repeatedly bisect
// the flanks and keep the bracket around the best point.  Branches kink at
// eigenvalue crossings, so plain bracket-shrinking is used instead of a
// parabolic model.
// Bracket-shrinking search for an interior extremum.  Plain trisection is
// used instead of a parabolic model because branches may kink where two
// eigenvalue curves cross; the bracket halves every step, so driving it
// down to min_step certifies the value to second order in min_step.
double refine_extremum(const std::function<double(double)>& f, double a,
                       double b, double c, bool maximize, double min_step) {
  double sign = maximize ? 1.0 : -1.0;
  double fb = sign * f(b);
  for (int it = 0; it < 60 && c - a >= min_step; ++it) {
    double m1 = 0.5 * (a + b), m2 = 0.5 * (b + c);
    double f1 = sign * f(m1), f2 = sign * f(m2);
    if (f1 >= fb && f1 >= f2) {
      c = b;
      b = m1;
      fb = f1;
    } else if (f2 >= fb && f2 >= f1) {
      a = b;
      b = m2;
      fb = f2;
    } else {
      a = m1;
      c = m2;
    }
  }
  return sign * fb;
}

}  // namespace

EigBranches eigenvalue_branches(const MatrixFn& fn,
                                const std::vector<double>& ts) {
  EigBranches out;
  out.t = ts;
  if (ts.empty()) return out;
  int dim = static_cast<int>(fn(ts.front()).rows());
  out.values.resize(static_cast<Eigen::Index>(ts.size()), dim);
  for (std::size_t k = 0; k < ts.size(); ++k) {
    std::vector<double> ev = sorted_eigenvalues(fn(ts[k]));
    for (int j = 0; j < dim; ++j) out.values(static_cast<Eigen::Index>(k), j) = ev[j];
  }
  return out;
}

IntervalSet branch_range_closure(const MatrixFn& fn, int dim, double alpha,
                                 double beta, const RegularOptions& opt,
                                 std::vector<std::string>* warnings) {
  std::vector<double> ts = sample_grid(alpha, beta, opt.grid, opt.tail_levels);
  EigBranches br = eigenvalue_branches(fn, ts);
  double span = std::isfinite(beta) ? beta - alpha : 1.0;
  double min_step = opt.min_step > 0.0 ? opt.min_step : 1e-9 * span;

  IntervalSet set;
  for (int j = 0; j < dim; ++j) {
    auto branch = [&](double t) { return sorted_eigenvalues(fn(t))[j]; };

    Eigen::Index imin, imax;
    Eigen::VectorXd col = br.values.col(j);
    double vmin = col.minCoeff(&imin);
    double vmax = col.maxCoeff(&imax);

    // interior extrema: polish between the neighboring samples
    if (imin > 0 && imin + 1 < col.size())
      vmin = std::min(vmin, refine_extremum(branch, ts[imin - 1], ts[imin],
                                            ts[imin + 1], false, min_step));
    if (imax > 0 && imax + 1 < col.size())
      vmax = std::max(vmax, refine_extremum(branch, ts[imax - 1], ts[imax],
                                            ts[imax + 1], true, min_step));

    // behavior at the singular endpoint: a finite limit joins the closure,
    // unbounded growth turns the interval into a ray
    GrowthProbe gp = growth_probe(branch, alpha, beta, opt.diverge_threshold);
    if (gp.diverges) {
      if (gp.sign >= 0)
        vmax = std::numeric_limits<double>::infinity();
      else
        vmin = -std::numeric_limits<double>::infinity();
    } else {
      LimitResult lr = limit_extrapolate(branch, alpha, beta, opt.limit);
      if (lr.status == LimitStatus::ok) {
        vmin = std::min(vmin, lr.value);
        vmax = std::max(vmax, lr.value);
      } else if (warnings) {
        warnings->push_back("branch " + std::to_string(j) +
                            ": extremum toward the singular endpoint "
                            "unresolved (" +
                            limit_status_name(lr.status) + ")");
      }
    }
    set.insert(vmin, vmax);
  }
  return set;
}

IntervalSet regular_part(const CoefficientModel& m, const RegularOptions& opt) {
  MatrixFn delta = [&m](double t) { return delta_matrix(m, t); };
  return branch_range_closure(delta, m.dim, m.alpha, m.beta, opt, nullptr);
}

LambdaBetaD lambda_beta(const CoefficientModel& m,
                        const LambdaBetaOptions& opt) {
  LambdaBetaD out;
  for (int j = 0; j < m.dim; ++j) {
    auto branch = [&](double t) {
      return sorted_eigenvalues(m.D_value(t))[j];
    };
    GrowthProbe gp =
        growth_probe(branch, m.alpha, m.beta, opt.diverge_threshold,
                     opt.growth_levels);
    if (gp.diverges) {
      ++out.improper;
      if (gp.sign < 0) ++out.improper_neg;
      continue;
    }
    LimitResult lr = limit_extrapolate(branch, m.alpha, m.beta, opt.limit);
    if (lr.status == LimitStatus::ok) {
      out.branch_limits.push_back(lr.value);
      out.branch_errs.push_back(lr.err);
      out.finite_positions.push_back(j);
      ++out.j0;
    } else {
      out.undecided = true;
      out.warnings.push_back(
          "branch " + std::to_string(j) + " of D: no boundary limit (" +
          limit_status_name(lr.status) +
          "); boundary eigenvalue assumptions not verifiable here");
    }
  }

  // dedup into the point set
  std::vector<double> lim = out.branch_limits;
  std::sort(lim.begin(), lim.end());
  for (double v : lim) {
    if (out.finite_limits.empty() ||
        v - out.finite_limits.back() > opt.dedup_tol * (1.0 + std::abs(v)))
      out.finite_limits.push_back(v);
  }
  return out;
}

}  // namespace esspec
