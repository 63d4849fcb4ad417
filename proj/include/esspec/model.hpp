#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "esspec/expr.hpp"
#include "esspec/intervals.hpp"
#include "esspec/taylor.hpp"

namespace esspec {

// How the scalar Schur function pi behaves at the singular endpoint beta:
// pi0 != 0 (case I), pi0 = 0 with pi1 != 0 (case II), pi0 = pi1 = 0
// (case III, the only case that can contribute singular essential spectrum
// beyond the boundary eigenvalue limits).
enum class CaseKind { I, II, III, unresolved };

const char* case_name(CaseKind k);

// Closed-form boundary data a generating family can attach to its models.
// When present these limits are the source of truth and the numerical
// extrapolator runs as a cross-check; all members are optional.
struct ClosedFormLimits {
  std::optional<CaseKind> case_kind;

  // Boundary limits as functions of the spectral parameter (null when the
  // family does not provide them).  pi2/r1/kappa0 are meaningful in case III.
  std::function<double(double)> pi0, pi1, pi2, r1, kappa0;

  // Finite limits of the eigenvalue branches of D at beta, and how many
  // branches have them.
  std::optional<std::vector<double>> lambda_beta_points;
  std::optional<int> j0;

  // Case III: the closed-form singular component and spectral radius.
  std::optional<std::vector<Interval>> case3_intervals;
  std::optional<double> radius;

  // Membership of exceptional boundary points, when the family decides it:
  // pairs (point, "in-regular" | "in-singular-closure").
  std::vector<std::pair<double, std::string>> exceptional_status;
};

// ---------------------------------------------------------------------------
// Coefficient model
// ---------------------------------------------------------------------------
//
// The data (p, q, b, c, D) of a block operator pencil on [alpha, beta):
// real scalars p > 0 and q, complex n-vectors b and c, and a Hermitian n x n
// matrix D.  Evaluators return order-4 jets in t so that first and second
// t-derivatives of the derived Schur functions are exact.  Models are
// immutable once built; evaluation is const and thread-safe.

class CoefficientModel {
 public:
  using RealFn = std::function<Jet4(double)>;
  using ComplexFn = std::function<CJet4(double)>;

  double alpha = 0.0;
  double beta = 1.0;  // +infinity allowed
  int dim = 1;
  RealFn p, q;
  std::vector<ComplexFn> b, c;
  // Lower triangle of D: row i holds columns 0..i; the diagonal is
  // real-valued and the upper triangle is the conjugate mirror, so the
  // assembled matrix is Hermitian by construction.
  std::vector<std::vector<ComplexFn>> D_low;
  std::string name = "custom";
  std::shared_ptr<const ClosedFormLimits> closed_form;

  bool beta_finite() const { return std::isfinite(beta); }

  Jet4 p_jet(double t) const { return p(t); }
  Jet4 q_jet(double t) const { return q(t); }

  // Taylor coefficient stacks: element k of the result is the k-th scaled
  // Taylor coefficient (f^(k)/k!) of the vector/matrix at t.
  std::array<Eigen::VectorXcd, 5> b_taylor(double t) const;
  std::array<Eigen::VectorXcd, 5> c_taylor(double t) const;
  std::array<Eigen::MatrixXcd, 5> D_taylor(double t) const;

  Eigen::MatrixXcd D_value(double t) const { return D_taylor(t)[0]; }
};

// A custom model described by expression text (the JSON-facing form).
// D accepts either the full dim x dim matrix (validated for Hermitian
// symmetry) or just the lower triangle (row i with i+1 entries).
struct ExprModel {
  double alpha = 0.0;
  double beta = 1.0;
  int dim = 1;
  std::string p = "1";
  std::string q = "0";
  std::vector<std::array<std::string, 2>> b;  // {re, im} per component
  std::vector<std::array<std::string, 2>> c;
  std::vector<std::vector<std::array<std::string, 2>>> D;
};

// Parses and validates an expression-backed model.  Throws ModelError on
// dimension mismatches, parse failures (with the offending field named),
// nonpositive p, a non-Hermitian full-form D, or evaluation failures on the
// validation grid.
CoefficientModel build_model(const ExprModel& spec);

// Helpers for assembling models programmatically.
CoefficientModel::RealFn real_fn(Expr e);
CoefficientModel::ComplexFn complex_fn(Expr re, Expr im);
CoefficientModel::ComplexFn complex_fn(Expr re);

// The validation pass run by build_model, usable on programmatic models too:
// checks dimensions and samples p > 0 across the interval.
void validate_model(const CoefficientModel& m);

}  // namespace esspec
