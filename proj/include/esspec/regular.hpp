#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "esspec/intervals.hpp"
#include "esspec/limits.hpp"
#include "esspec/model.hpp"

namespace esspec {

// ---------------------------------------------------------------------------
// Regular part of the essential spectrum and boundary eigenvalue limits
// ---------------------------------------------------------------------------
//
// The regular part is the closure of the union of the eigenvalue branch
// ranges of the symbol Delta(t) = D(t) - b(t) b(t)*/p(t) over [alpha, beta).
// The boundary set Lambda_beta(D) collects the finite limits of the
// eigenvalue branches of D(t) as t approaches beta; branches growing beyond
// every bound are "improper" and contribute no point.

// Ascending eigenvalue samples: row k of `values` holds the sorted
// eigenvalues at t[k].  Branch j is the j-th column; columns are continuous
// but kink where branches cross.
struct EigBranches {
  std::vector<double> t;
  Eigen::MatrixXd values;
};

using MatrixFn = std::function<Eigen::MatrixXcd(double)>;

EigBranches eigenvalue_branches(const MatrixFn& fn,
                                const std::vector<double>& ts);

struct RegularOptions {
  int grid = 257;                  // uniform samples across the window
  int tail_levels = 26;            // geometric refinement toward beta
  double min_step = 0.0;           // extremum bracket floor; 0 = auto:
                                   // 1e-9 * window span
  double diverge_threshold = 1e12;
  LimitOptions limit;              // branch-limit extrapolation at beta
};

// Closure of the branch ranges of Delta: at most dim intervals before
// merging.  Branches with a finite limit at beta contribute that limit;
// branches growing without bound extend their interval into a ray.
IntervalSet regular_part(const CoefficientModel& m,
                         const RegularOptions& opt = {});

// Same computation for a caller-supplied Hermitian matrix function.
IntervalSet branch_range_closure(const MatrixFn& fn, int dim, double alpha,
                                 double beta, const RegularOptions& opt,
                                 std::vector<std::string>* warnings = nullptr);

struct LambdaBetaD {
  std::vector<double> finite_limits;    // deduplicated, ascending
  std::vector<double> branch_limits;    // one per proper branch (may repeat)
  std::vector<double> branch_errs;
  int j0 = 0;                           // branches with a finite limit
  int improper = 0;                     // branches growing without bound
  int improper_neg = 0;                 // of which toward -infinity
  // Sorted positions (near beta) occupied by the proper branches: the
  // improper branches peel off to -inf below and +inf above them.
  std::vector<int> finite_positions;
  bool undecided = false;               // some branch resisted classification
  std::vector<std::string> warnings;
};

struct LambdaBetaOptions {
  LimitOptions limit;
  double diverge_threshold = 1e12;
  int growth_levels = 26;
  double dedup_tol = 1e-8;
};

LambdaBetaD lambda_beta(const CoefficientModel& m,
                        const LambdaBetaOptions& opt = {});

}  // namespace esspec
