#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "esspec/intervals.hpp"
#include "esspec/limits.hpp"
#include "esspec/model.hpp"

namespace esspec {

// ---------------------------------------------------------------------------
// Boundary expansion of the Schur functions
// ---------------------------------------------------------------------------
//
// Near the singular endpoint, pi(t, lambda) = pi0 + pi1 (t - beta) + R with
// pi0 = lim pi and pi1 = lim pi'.  Which of pi0, pi1 vanish fixes the
// boundary case (I / II / III); in case III the second-order data
//
//   pi2 = (1/2) lim pi'',  r1 = lim r',  varkappa0 = lim varkappa
//
// and the weighted limits rtilde/ktilde of (beta-t) r / pi and
// (beta-t)^2 varkappa / pi drive the singular part.  For beta = +infinity
// the weights drop and derivatives are taken in s = 1/t.

struct FieldLimit {
  double value = 0.0;
  double err = std::numeric_limits<double>::infinity();
  LimitStatus status = LimitStatus::ok;
  bool closed_form = false;  // value from a generating family's side channel

  bool reliable(double tol) const {
    return status == LimitStatus::ok && (closed_form || err <= tol);
  }
};

struct AsymCoeffs {
  double lambda = 0.0;
  bool beta_finite = true;
  FieldLimit pi0, pi1, pi2, r1, varkappa0, rtilde_beta, ktilde_beta;
  // disagreement between the two case-III routes to pi2:
  // (1/2) lim pi'' versus lim pi / (beta - t)^2
  double pi2_cross_err = std::numeric_limits<double>::quiet_NaN();
};

struct AsymOptions {
  LimitOptions limit;
  double limit_tol = 1e-6;   // err budget for a field to count as resolved
  double eps_class = 0.0;    // 0 = auto: 1e-6 * (1 + |p| near beta)
  bool use_closed_form = true;
};

AsymCoeffs asym_coeffs(const CoefficientModel& m, double lambda,
                       const AsymOptions& opt = {});

// Case decision with the decisive magnitudes attached.  `unresolved` is
// returned when an error band straddles the threshold, so the call never
// silently guesses.
struct CaseTag {
  CaseKind kind = CaseKind::unresolved;
  double pi0_mag = 0.0;
  double pi1_mag = 0.0;
  double threshold = 0.0;
  std::string detail;
};

double case_threshold(const CoefficientModel& m, double eps_class);
CaseTag classify_case(const CoefficientModel& m, const AsymCoeffs& a,
                      const AsymOptions& opt = {});
CaseTag classify_case(const CoefficientModel& m, double lambda,
                      const AsymOptions& opt = {});

// ---------------------------------------------------------------------------
// Numerical evidence for the standing assumptions
// ---------------------------------------------------------------------------
//
// The spectral characterizations rest on hypotheses that cannot be proven
// numerically; these probes gather best-effort evidence on a geometric
// tail grid and report pass / fail / inconclusive per probe.

struct Probe {
  enum class Status { pass, fail, inconclusive };
  std::string name;
  double observed = std::numeric_limits<double>::quiet_NaN();
  double target = std::numeric_limits<double>::quiet_NaN();
  Status status = Status::inconclusive;
  std::string note;
};

struct DiagnosticsReport {
  double lambda = 0.0;
  CaseTag case_tag;
  int s_pi = 0;              // sign of pi on the tail (+1 / -1)
  bool s_pi_constant = true;
  Probe v_eta_bounded_below;  // the case-weighted potential stays bounded below
  Probe eta_h2_integrable;    // the weighted comparison function is integrable
  Probe phi1_limit;           // (beta-t) pi'/pi approaches the case target
  Probe phi2_limit;           // (beta-t)^2 r'/pi approaches the case target
  std::vector<std::pair<int, double>> branch_growth;  // diverging D branches:
                                                      // (index, log-log slope)
};

DiagnosticsReport assumption_diagnostics(const CoefficientModel& m,
                                         double lambda,
                                         const AsymOptions& opt = {});

// Sweep of the eigenvalue branches of D over the extrapolation schedule,
// inflated by `margin` on both sides.  Spectral parameters inside these
// zones sit too close to a resolvent pole for boundary limits to be
// evaluated; callers place probe points outside them.
IntervalSet resolvent_exclusion(const CoefficientModel& m, double margin,
                                const LimitOptions& opt = {});

}  // namespace esspec
