#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "esspec/asymptotics.hpp"
#include "esspec/intervals.hpp"
#include "esspec/model.hpp"
#include "esspec/regular.hpp"

namespace esspec {

// ---------------------------------------------------------------------------
// Boundary discriminant
// ---------------------------------------------------------------------------
//
// In case III the singular component of the essential spectrum is the closure
// of the set where the boundary discriminant is nonnegative.  Two equivalent
// expressions are computed: the polynomial combination
//
//   poly = r1^2 - varkappa0 pi2 - (1/4) pi2^2      (finite endpoint;
//                                                   the 1/4 term drops at
//                                                   an infinite endpoint)
//
// built from the plain limits, and the weighted form
//
//   dis = rtilde^2 - ktilde - 1/4                  (again without the 1/4
//                                                   at an infinite endpoint)
//
// built from the pi-normalized limits.  Off the poles of the weighted
// limits, dis = poly / pi2^2, so the two agree in sign; `poly` is the
// authoritative value for sign work because it stays finite and continuous
// where pi2 vanishes.  `cross_err` records |dis - poly / pi2^2| when the
// comparison is meaningful and is NaN otherwise.

struct DiscriminantValue {
  double poly = 0.0;
  double dis = 0.0;
  double cross_err = std::numeric_limits<double>::quiet_NaN();
};

// Throws NumericError naming the first input limit that is unreliable at
// tolerance `limit_tol` (closed-form channels always count as reliable).
DiscriminantValue discriminant(const AsymCoeffs& a, double limit_tol = 1e-6);

// ---------------------------------------------------------------------------
// Options shared by the singular-part scan and the structure fit
// ---------------------------------------------------------------------------

struct SingularOptions {
  int grid = 257;                 // scan points across the window (>= 16)
  double root_tol = 1e-9;         // endpoint refinement tolerance
  double exclusion_margin = 0.0;  // half-width of the skip zones around the
                                  // regular part and the boundary eigenvalue
                                  // limits; 0 = auto: 1e-4 * scale
  double fit_tol = 1e-6;          // residual budget for the structure fit
  int case_probes = 5;            // spectral parameters probed for the case
  bool ray_extension = true;      // extend edge intervals into rays when the
                                  // structure class admits them
  std::array<double, 2> window{0.0, 0.0};  // analysis window; {0, 0} = auto

  AsymOptions asym;               // boundary-limit extrapolation
  RegularOptions regular;         // regular-part scan
  LambdaBetaOptions lambda_beta;  // boundary eigenvalue limits
};

// ---------------------------------------------------------------------------
// Singular component over a window
// ---------------------------------------------------------------------------
//
// The discriminant is evaluated on a uniform grid over the window, skipping
// spectral parameters within the exclusion margin of the regular part and of
// the boundary eigenvalue limits; sign changes between evaluable neighbours
// are refined by bisection, falling back to a secant through the edge values
// when the crossing sits inside a skip zone.  Closed intervals where the
// discriminant is nonnegative make up the set (ties at zero are included).
// In cases I and II the set is empty by the case characterization.

struct SingularSet {
  CaseKind case_kind = CaseKind::unresolved;
  IntervalSet set;
  bool left_ray = false;   // leftmost interval extended to -infinity
  bool right_ray = false;  // rightmost interval extended to +infinity
  // Midpoints of exclusion zones that intersect the emitted set: there the
  // intervals are interpolated across, not evaluated, and the result is to
  // be read modulo the regular part and the boundary eigenvalue limits.
  std::vector<double> excluded_overlaps;
  std::vector<std::string> warnings;
};

SingularSet singular_part(const CoefficientModel& m, double lambda_min,
                          double lambda_max, const SingularOptions& opt = {});

// ---------------------------------------------------------------------------
// Boundary structure coefficients
// ---------------------------------------------------------------------------
//
// At a finite singular endpoint the case-III limit functions have the
// rational normal forms
//
//   -pi2(lambda)      = f + g lambda + sum_j sigma_j / (pole_j - lambda)
//   -varkappa0(lambda)= phi + psi lambda + sum_j mu_j / (pole_j - lambda)
//   r1(lambda)        = h                      (independent of lambda)
//
// with g >= 0 and sigma_j >= 0, the poles being the finite limits of the
// eigenvalue branches of D.  The coefficients are recovered two independent
// ways: a least-squares fit of the sampled limits against {1, lambda,
// 1/(pole_j - lambda)}, and direct boundary limits of weighted eigenvector
// data of D (sigma_j, f, g only).  `cross_err` is the largest relative
// disagreement between the routes; `fit_residual` the relative residual of
// the fit.  Small negative g / sigma_j are clamped to zero; violations
// beyond tolerance are reported in `warnings` and clear `reliable`.

struct StructureCoeffs {
  double f_beta = 0.0;
  double g_beta = 0.0;
  std::vector<std::pair<double, double>> sigma_beta;  // (pole, weight >= 0)
  double phi_beta = 0.0;
  double psi_beta = 0.0;
  std::vector<std::pair<double, double>> mu_beta;     // (pole, weight)
  double h_beta = 0.0;
  double fit_residual = std::numeric_limits<double>::infinity();
  double cross_err = std::numeric_limits<double>::quiet_NaN();
  double h_spread = 0.0;  // variation of r1 across the probe parameters
  bool reliable = false;
  std::vector<std::string> warnings;
};

StructureCoeffs structure_coeffs(const CoefficientModel& m,
                                 const LambdaBetaD& lb,
                                 const SingularOptions& opt = {});

// ---------------------------------------------------------------------------
// Topological classification of the singular component
// ---------------------------------------------------------------------------
//
// With j0 poles the singular set is a union of at most j0 + 2 intervals
// whose shape is decided by sign conditions on the structure coefficients:
//
//   (a) g > 0:           a1 if g + 4 psi > 0   -> <= j0 + 1 compact intervals
//                        a2 if g + 4 psi < 0   -> two rays + <= j0 compact
//   (b) g = 0, f != 0:   b1 if f psi > 0       -> left ray + <= j0 compact
//                        b2 if f psi < 0       -> right ray + <= j0 compact
//   (c) g = f = 0:       c1 if h^2 + psi S < 0 -> <= j0 compact
//                        c2 if h^2 + psi S > 0 -> two rays + <= j0 - 1 compact
//
// where S = sum_j sigma_j.  When the quantity that decides the applicable
// branch vanishes within tolerance the classification is `degenerate` and no
// interval bound is asserted.

enum class StructureBranch { a1, a2, b1, b2, c1, c2, degenerate };

const char* branch_name(StructureBranch b);

struct StructureClass {
  StructureBranch branch = StructureBranch::degenerate;
  int compact_bound = -1;  // max number of compact intervals; -1 when none
                           // is asserted (degenerate)
  bool left_ray = false;
  bool right_ray = false;
  // Decisive quantities, recorded for reporting regardless of the branch.
  double g_beta = 0.0;
  double g4psi = 0.0;   // g + 4 psi
  double f_psi = 0.0;   // f * psi
  double hsum = 0.0;    // h^2 + psi * sum sigma_j
  std::string note;
};

StructureClass classify_structure(const StructureCoeffs& s, int j0,
                                  double tol = 1e-9);

// ---------------------------------------------------------------------------
// Essential spectral radius
// ---------------------------------------------------------------------------
//
// sup |lambda| over the union of the regular and singular parts; +infinity
// when either is unbounded, 0 when both are empty.  When the structure data
// is supplied, has no poles, and classifies as a1, the single compact
// singular interval has the closed form [lambda_-, lambda_+] with
//
//   M lambda^2 + 2 N lambda + K <= 0,
//   M = g (g + 4 psi),  N = f (g + 2 psi) + 2 g phi,
//   K = f (f + 4 phi) - 4 h^2,
//
// and the interval route is cross-checked against it; disagreement beyond
// 10 * root_tol (relative) throws NumericError carrying both values.

double essential_radius(const IntervalSet& regular_set,
                        const IntervalSet& singular_set,
                        const StructureCoeffs* s = nullptr,
                        const StructureClass* cls = nullptr,
                        double root_tol = 1e-9);

// ---------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------

// A boundary eigenvalue limit with its membership classification.  `status`
// is decided by set membership against the computed parts ("in-regular",
// "in-singular-closure", or "undetermined"); `analytic_status` carries the
// generating family's own classification when it provides one ("" when not).
struct ExceptionalPoint {
  double lambda = 0.0;
  std::string status;
  std::string analytic_status;
};

struct SpectrumReport {
  std::string model_name;
  double alpha = 0.0;
  double beta = 1.0;
  int dim = 1;

  CaseKind case_kind = CaseKind::unresolved;
  std::vector<std::pair<double, CaseTag>> probes;  // case tag per probe

  double window_lo = 0.0;
  double window_hi = 0.0;

  IntervalSet regular;
  LambdaBetaD lambda_beta;  // finite_limits/j0 reconciled with the family's
                            // closed forms when available
  std::vector<ExceptionalPoint> exceptional;

  SingularSet singular;
  std::optional<StructureCoeffs> structure;
  std::optional<StructureClass> structure_class;
  std::string structure_note;  // e.g. "unclassified (beta = infinity)"

  double radius = 0.0;  // may be +infinity

  // Invariant: merged union of `regular` and `singular.set`; the
  // exceptional points are listed separately, not folded in.
  IntervalSet essential;

  std::optional<DiagnosticsReport> diagnostics;
  std::vector<std::string> warnings;
};

// Orchestrates the full analysis: regular part, boundary eigenvalue limits,
// case classification (uniform over the window or the run is rejected),
// singular component, structure coefficients and class (case III, finite
// endpoint), spectral radius with closed-form cross-checks, and membership
// status of the exceptional points.  The window defaults to
// [-10 s, 10 s] with s = 1 + max |finite boundary limits| + max |finite
// endpoints of the regular part|.
SpectrumReport essential_spectrum(const CoefficientModel& m,
                                  const SingularOptions& opt = {});

}  // namespace esspec
