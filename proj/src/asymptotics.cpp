#include "esspec/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "esspec/errors.hpp"
#include "esspec/schur.hpp"

namespace esspec {

namespace {

// All boundary fields extrapolate over the same node schedule, so Schur
// evaluations are shared through a per-call cache keyed by the node value.
struct SchurCache {
  const CoefficientModel& m;
  double lambda;
  std::unordered_map<double, SchurPoint> seen;

  const SchurPoint& at(double t) {
    auto it = seen.find(t);
    if (it == seen.end())
      it = seen.emplace(t, schur_point(m, t, lambda)).first;
    return it->second;
  }
};

FieldLimit extrapolate_field(SchurCache& cache, double alpha, double beta,
                             const LimitOptions& lo,
                             const std::function<double(double, const SchurPoint&)>& pick) {
  LimitResult lr = limit_extrapolate(
      [&](double t) { return pick(t, cache.at(t)); }, alpha, beta, lo);
  FieldLimit f;
  f.value = lr.value;
  f.err = lr.err;
  f.status = lr.status;
  return f;
}

void apply_closed_form(FieldLimit& f, const std::function<double(double)>& cf,
                       double lambda) {
  if (!cf) return;
  double v = cf(lambda);
  // keep the distance to the extrapolated value as a cross-check when the
  // numeric route converged; otherwise there is nothing to compare against
  f.err = f.status == LimitStatus::ok ? std::abs(f.value - v) : 0.0;
  f.value = v;
  f.status = LimitStatus::ok;
  f.closed_form = true;
}

}  // namespace

AsymCoeffs asym_coeffs(const CoefficientModel& m, double lambda,
                       const AsymOptions& opt) {
  AsymCoeffs a;
  a.lambda = lambda;
  a.beta_finite = m.beta_finite();
  SchurCache cache{m, lambda, {}};
  const double beta = m.beta;
  auto field = [&](auto pick) {
    return extrapolate_field(cache, m.alpha, beta, opt.limit, pick);
  };

  FieldLimit cross;  // pi / (beta-t)^2, the second route to pi2
  if (a.beta_finite) {
    a.pi0 = field([](double, const SchurPoint& s) { return s.pi; });
    a.pi1 = field([](double, const SchurPoint& s) { return s.pi_d1; });
    a.pi2 = field([](double, const SchurPoint& s) { return 0.5 * s.pi_d2; });
    cross = field([beta](double t, const SchurPoint& s) {
      double h = beta - t;
      return s.pi / (h * h);
    });
    a.r1 = field([](double, const SchurPoint& s) { return s.r_d1; });
    a.varkappa0 = field([](double, const SchurPoint& s) { return s.varkappa; });
    a.rtilde_beta = field([beta](double t, const SchurPoint& s) {
      return (beta - t) * s.r / s.pi;
    });
    a.ktilde_beta = field([beta](double t, const SchurPoint& s) {
      double h = beta - t;
      return h * h * s.varkappa / s.pi;
    });
  } else {
    // derivatives with respect to s = 1/t; the weights drop
    a.pi0 = field([](double, const SchurPoint& s) { return s.pi; });
    a.pi1 = field([](double t, const SchurPoint& s) { return -t * t * s.pi_d1; });
    a.pi2 = field([](double t, const SchurPoint& s) {
      return 0.5 * (t * t * t * t * s.pi_d2 + 2.0 * t * t * t * s.pi_d1);
    });
    cross = field([](double t, const SchurPoint& s) { return t * t * s.pi; });
    a.r1 = field([](double t, const SchurPoint& s) { return -t * t * s.r_d1; });
    a.varkappa0 = field([](double, const SchurPoint& s) { return s.varkappa; });
    a.rtilde_beta = field([](double, const SchurPoint& s) { return s.r / s.pi; });
    a.ktilde_beta = field([](double, const SchurPoint& s) {
      return s.varkappa / s.pi;
    });
  }

  if (m.closed_form && opt.use_closed_form) {
    const ClosedFormLimits& cf = *m.closed_form;
    apply_closed_form(a.pi0, cf.pi0, lambda);
    apply_closed_form(a.pi1, cf.pi1, lambda);
    apply_closed_form(a.pi2, cf.pi2, lambda);
    apply_closed_form(a.r1, cf.r1, lambda);
    apply_closed_form(a.varkappa0, cf.kappa0, lambda);
    if (a.beta_finite && cf.pi2 && cf.r1 && cf.kappa0) {
      // case III identities for the weighted limits
      double p2 = cf.pi2(lambda);
      if (p2 != 0.0) {
        apply_closed_form(a.rtilde_beta,
                          [&cf](double l) { return -cf.r1(l) / cf.pi2(l); },
                          lambda);
        apply_closed_form(a.ktilde_beta,
                          [&cf](double l) { return cf.kappa0(l) / cf.pi2(l); },
                          lambda);
      }
    }
  }

  if (a.pi2.status == LimitStatus::ok && cross.status == LimitStatus::ok)
    a.pi2_cross_err = std::abs(a.pi2.value - cross.value);
  return a;
}

double case_threshold(const CoefficientModel& m, double eps_class) {
  if (eps_class > 0.0) return eps_class;
  LimitOptions lo;
  std::vector<double> nodes = limit_nodes(m.alpha, m.beta, lo);
  double p_near = std::abs(m.p(nodes.back()).value());
  return 1e-6 * (1.0 + p_near);
}

namespace {

// -1 clearly below threshold, +1 clearly above, 0 when the error band
// straddles the line.
int decide(const FieldLimit& f, double thr) {
  double err = f.closed_form ? 0.0 : f.err;
  if (std::abs(f.value) - err > thr) return 1;
  if (std::abs(f.value) + err < thr) return -1;
  return 0;
}

}  // namespace

CaseTag classify_case(const CoefficientModel& m, const AsymCoeffs& a,
                      const AsymOptions& opt) {
  CaseTag tag;
  tag.threshold = case_threshold(m, opt.eps_class);
  tag.pi0_mag = std::abs(a.pi0.value);
  tag.pi1_mag = std::abs(a.pi1.value);

  if (m.closed_form && opt.use_closed_form && m.closed_form->case_kind) {
    tag.kind = *m.closed_form->case_kind;
    tag.detail = "case fixed analytically by the generating family";
    return tag;
  }

  if (a.pi0.status != LimitStatus::ok) {
    tag.detail = std::string("pi has no boundary limit (") +
                 limit_status_name(a.pi0.status) + ")";
    return tag;
  }
  int d0 = decide(a.pi0, tag.threshold);
  if (d0 > 0) {
    tag.kind = CaseKind::I;
    return tag;
  }
  if (d0 == 0) {
    tag.detail = "pi0 error band straddles the classification threshold";
    return tag;
  }
  if (a.pi1.status != LimitStatus::ok) {
    tag.detail = std::string("pi' has no boundary limit (") +
                 limit_status_name(a.pi1.status) + ")";
    return tag;
  }
  int d1 = decide(a.pi1, tag.threshold);
  if (d1 > 0) {
    tag.kind = CaseKind::II;
    return tag;
  }
  if (d1 == 0) {
    tag.detail = "pi1 error band straddles the classification threshold";
    return tag;
  }
  tag.kind = CaseKind::III;
  return tag;
}

CaseTag classify_case(const CoefficientModel& m, double lambda,
                      const AsymOptions& opt) {
  return classify_case(m, asym_coeffs(m, lambda, opt), opt);
}

namespace {

struct EtaWeights {
  double eta, d1, d2;
};

// Case-dependent comparison weight used by the potential probe.
EtaWeights eta_for(CaseKind kind, double h, double span) {
  switch (kind) {
    case CaseKind::I:
      return {h, -1.0, 0.0};
    case CaseKind::II: {
      double C = 1.0 / (2.0 * span);
      return {-std::log(C * h), 1.0 / h, 1.0 / (h * h)};
    }
    default:
      return {1.0, 0.0, 0.0};
  }
}

double trapezoid(const std::vector<double>& x, const std::vector<double>& y,
                 std::size_t i0, std::size_t i1) {
  double s = 0.0;
  for (std::size_t i = i0 + 1; i <= i1; ++i)
    s += 0.5 * (y[i] + y[i - 1]) * std::abs(x[i] - x[i - 1]);
  return s;
}

}  // namespace

DiagnosticsReport assumption_diagnostics(const CoefficientModel& m,
                                         double lambda,
                                         const AsymOptions& opt) {
  DiagnosticsReport rep;
  rep.lambda = lambda;
  AsymCoeffs a = asym_coeffs(m, lambda, opt);
  rep.case_tag = classify_case(m, a, opt);

  const bool finite = m.beta_finite();
  const double span = finite ? m.beta - m.alpha : 1.0;

  // 64 geometric tail points spanning six decades of distance to beta
  const int kTail = 64;
  const double rho = std::pow(1e-6, 1.0 / (kTail - 1));
  std::vector<double> ts(kTail), hs(kTail);
  for (int i = 0; i < kTail; ++i) {
    if (finite) {
      hs[i] = span / 8.0 * std::pow(rho, i);
      ts[i] = m.beta - hs[i];
    } else {
      ts[i] = std::max(8.0, m.alpha + 8.0) * std::pow(rho, -i);
      hs[i] = 1.0 / ts[i];
    }
  }
  std::vector<SchurPoint> sp(kTail);
  for (int i = 0; i < kTail; ++i) sp[i] = schur_point(m, ts[i], lambda);

  // sign of pi along the tail
  auto sgn = [](double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); };
  rep.s_pi = sgn(sp.back().pi);
  for (const SchurPoint& s : sp)
    if (sgn(s.pi) != rep.s_pi) rep.s_pi_constant = false;

  // --- potential bounded below -------------------------------------------
  rep.v_eta_bounded_below.name = "V_eta bounded below";
  if (!rep.s_pi_constant || rep.s_pi == 0) {
    rep.v_eta_bounded_below.note = "sign of pi not constant on the tail";
  } else if (rep.case_tag.kind == CaseKind::unresolved) {
    rep.v_eta_bounded_below.note = "boundary case unresolved";
  } else {
    std::vector<double> V(kTail);
    for (int i = 0; i < kTail; ++i) {
      EtaWeights w = finite ? eta_for(rep.case_tag.kind, hs[i], span)
                            : EtaWeights{1.0, 0.0, 0.0};
      const SchurPoint& s = sp[i];
      double corr = (s.pi_d1 * w.d1 + s.pi * w.d2) / (2.0 * w.eta) -
                    s.pi * w.d1 * w.d1 / (4.0 * w.eta * w.eta);
      V[i] = rep.s_pi * (s.varkappa - s.r * s.r / s.pi - corr);
    }
    auto min_over = [&](int i0, int i1) {
      double v = V[i0];
      for (int i = i0; i < i1; ++i) v = std::min(v, V[i]);
      return v;
    };
    double overall = min_over(0, kTail);
    double m1 = min_over(0, kTail / 2), m2 = min_over(kTail / 2, kTail);
    rep.v_eta_bounded_below.observed = overall;
    if (m2 >= m1 - 0.05 * (1.0 + std::abs(m1))) {
      rep.v_eta_bounded_below.status = Probe::Status::pass;
    } else {
      double m3 = min_over(kTail / 2, 3 * kTail / 4);
      double m4 = min_over(3 * kTail / 4, kTail);
      rep.v_eta_bounded_below.status =
          m4 < m3 - 0.05 * (1.0 + std::abs(m3)) ? Probe::Status::fail
                                                : Probe::Status::inconclusive;
      rep.v_eta_bounded_below.note = "potential still descending on the tail";
    }
  }

  // --- integrability of eta h^2 -------------------------------------------
  rep.eta_h2_integrable.name = "eta h^2 integrable";
  if (rep.s_pi_constant && rep.s_pi != 0 &&
      rep.case_tag.kind != CaseKind::unresolved) {
    std::vector<double> eta(kTail), w(kTail);
    for (int i = 0; i < kTail; ++i) {
      eta[i] = finite ? eta_for(rep.case_tag.kind, hs[i], span).eta : 1.0;
      w[i] = 1.0 / (eta[i] * std::abs(sp[i].pi));
    }
    // does 1/(eta |pi|) stay integrable toward beta?  compare the last two
    // sixteen-point segment integrals
    double seg_prev = trapezoid(ts, w, kTail - 32, kTail - 16);
    double seg_last = trapezoid(ts, w, kTail - 16, kTail - 1);
    bool w_integrable = seg_last < seg_prev;
    std::vector<double> h2(kTail, 0.0);
    if (w_integrable) {
      // h^2(t) = integral from t to beta, with a geometric remainder
      double ratio = seg_prev > 0.0 ? seg_last / seg_prev : 0.0;
      double rem = ratio < 1.0 ? seg_last * ratio / (1.0 - ratio) : 0.0;
      double acc = rem;
      for (int i = kTail - 2; i >= 0; --i) {
        acc += 0.5 * (w[i] + w[i + 1]) * std::abs(ts[i + 1] - ts[i]);
        h2[i] = acc;
      }
    } else {
      double acc = 0.0;
      for (int i = 1; i < kTail; ++i) {
        acc += 0.5 * (w[i] + w[i - 1]) * std::abs(ts[i] - ts[i - 1]);
        h2[i] = acc;
      }
    }
    std::vector<double> integrand(kTail);
    for (int i = 0; i < kTail; ++i) integrand[i] = eta[i] * h2[i];
    double c_prev = trapezoid(ts, integrand, kTail - 32, kTail - 16);
    double c_last = trapezoid(ts, integrand, kTail - 16, kTail - 1);
    rep.eta_h2_integrable.observed = trapezoid(ts, integrand, 0, kTail - 1);
    rep.eta_h2_integrable.note =
        w_integrable ? "comparison function integrated from the endpoint"
                     : "comparison function integrated from the tail start";
    if (c_last < 0.75 * c_prev)
      rep.eta_h2_integrable.status = Probe::Status::pass;
    else if (c_last > 1.25 * c_prev)
      rep.eta_h2_integrable.status = Probe::Status::fail;
    else
      rep.eta_h2_integrable.status = Probe::Status::inconclusive;
  } else {
    rep.eta_h2_integrable.note = "prerequisites unavailable";
  }

  // --- logarithmic derivative limits ---------------------------------------
  SchurCache cache{m, lambda, {}};
  auto phi_probe = [&](Probe& p, const char* name, double target,
                       auto integrand) {
    p.name = name;
    p.target = target;
    LimitResult lr = limit_extrapolate(
        [&](double t) { return integrand(t, cache.at(t)); }, m.alpha, m.beta,
        opt.limit);
    if (lr.status != LimitStatus::ok || std::isnan(target)) {
      p.note = lr.status != LimitStatus::ok
                   ? std::string("no limit (") + limit_status_name(lr.status) + ")"
                   : "target unavailable";
      return;
    }
    p.observed = lr.value;
    p.status = std::abs(lr.value - target) <= 1e-4 * (1.0 + std::abs(target))
                   ? Probe::Status::pass
                   : Probe::Status::fail;
  };

  double phi1_target = 0.0, phi2_target = 0.0;
  if (finite) {
    switch (rep.case_tag.kind) {
      case CaseKind::I: phi1_target = 0.0; break;
      case CaseKind::II: phi1_target = -1.0; break;
      case CaseKind::III: phi1_target = -2.0; break;
      default: phi1_target = std::numeric_limits<double>::quiet_NaN();
    }
    phi2_target = rep.case_tag.kind == CaseKind::III
                      ? (a.rtilde_beta.status == LimitStatus::ok
                             ? -a.rtilde_beta.value
                             : std::numeric_limits<double>::quiet_NaN())
                      : 0.0;
    if (rep.case_tag.kind == CaseKind::unresolved)
      phi2_target = std::numeric_limits<double>::quiet_NaN();
    phi_probe(rep.phi1_limit, "(beta-t) pi'/pi", phi1_target,
              [beta = m.beta](double t, const SchurPoint& s) {
                return (beta - t) * s.pi_d1 / s.pi;
              });
    phi_probe(rep.phi2_limit, "(beta-t)^2 r'/pi", phi2_target,
              [beta = m.beta](double t, const SchurPoint& s) {
                double h = beta - t;
                return h * h * s.r_d1 / s.pi;
              });
  } else {
    phi_probe(rep.phi1_limit, "pi'/pi", 0.0,
              [](double, const SchurPoint& s) { return s.pi_d1 / s.pi; });
    phi_probe(rep.phi2_limit, "r'/pi", 0.0,
              [](double, const SchurPoint& s) { return s.r_d1 / s.pi; });
  }

  // --- growth exponents of the improper branches ---------------------------
  for (int j = 0; j < m.dim; ++j) {
    auto branch = [&](double t) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
          m.D_value(t), Eigen::EigenvaluesOnly);
      return es.eigenvalues()(j);
    };
    GrowthProbe gp = growth_probe(branch, m.alpha, m.beta);
    if (gp.diverges) rep.branch_growth.emplace_back(j, gp.exponent);
  }
  return rep;
}

IntervalSet resolvent_exclusion(const CoefficientModel& m, double margin,
                                const LimitOptions& lo) {
  std::vector<double> nodes = limit_nodes(m.alpha, m.beta, lo);
  IntervalSet zones;
  std::vector<std::vector<double>> per_branch(m.dim);
  for (double t : nodes) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m.D_value(t),
                                                       Eigen::EigenvaluesOnly);
    for (int j = 0; j < m.dim; ++j) per_branch[j].push_back(es.eigenvalues()(j));
  }
  for (int j = 0; j < m.dim; ++j) {
    auto [lo_it, hi_it] =
        std::minmax_element(per_branch[j].begin(), per_branch[j].end());
    zones.insert(*lo_it - margin, *hi_it + margin);
  }
  return zones;
}

}  // namespace esspec
