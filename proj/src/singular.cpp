#include "esspec/singular.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>

#include "esspec/errors.hpp"
#include "esspec/expr.hpp"

namespace esspec {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_reliable(const FieldLimit& f, double tol, const char* name) {
  if (!f.reliable(tol))
    throw NumericError(std::string("boundary limit for ") + name +
                       " is unreliable (err = " + format_double(f.err) +
                       ", status = " + limit_status_name(f.status) + ")");
}

}  // namespace

DiscriminantValue discriminant(const AsymCoeffs& a, double limit_tol) {
  DiscriminantValue out;
  if (a.beta_finite) {
    require_reliable(a.pi2, limit_tol, "pi2");
    require_reliable(a.r1, limit_tol, "r1");
    require_reliable(a.varkappa0, limit_tol, "varkappa0");
    const double p2 = a.pi2.value;
    out.poly = a.r1.value * a.r1.value - a.varkappa0.value * p2 - 0.25 * p2 * p2;
    if (a.rtilde_beta.reliable(limit_tol) && a.ktilde_beta.reliable(limit_tol)) {
      const double rt = a.rtilde_beta.value;
      out.dis = rt * rt - a.ktilde_beta.value - 0.25;
      // off the zeros of pi2 the two forms are proportional by pi2^2
      if (std::abs(p2) > 1e-8 * (1.0 + std::abs(a.lambda)))
        out.cross_err = std::abs(out.dis - out.poly / (p2 * p2));
    } else {
      out.dis = kNaN;
    }
  } else {
    // at an infinite endpoint the weighted limits carry the sign; the
    // quarter term is absent
    require_reliable(a.rtilde_beta, limit_tol, "rtilde_beta");
    require_reliable(a.ktilde_beta, limit_tol, "ktilde_beta");
    const double rt = a.rtilde_beta.value;
    out.dis = rt * rt - a.ktilde_beta.value;
    if (a.pi2.reliable(limit_tol) && a.r1.reliable(limit_tol) &&
        a.varkappa0.reliable(limit_tol))
      out.poly = a.r1.value * a.r1.value - a.varkappa0.value * a.pi2.value;
    else
      out.poly = kNaN;
  }
  return out;
}

namespace {

// ---------------------------------------------------------------------------
// Shared preliminaries: regular part, boundary limits, case over a window
// ---------------------------------------------------------------------------

struct CasePieces {
  IntervalSet reg;
  LambdaBetaD lb;                  // finite_limits / j0 reconciled below
  std::vector<double> lam_pts;     // boundary eigenvalue limits in force
  int j0 = 0;
  CaseKind kind = CaseKind::unresolved;
  std::vector<std::pair<double, CaseTag>> probes;
  double scale = 1.0;
  double window_lo = 0.0, window_hi = 0.0;
  double margin = 0.0;
  IntervalSet excl;                // skip zones for spectral parameters
  std::vector<std::string> warnings;
};

double window_scale(const IntervalSet& reg, const std::vector<double>& pts) {
  double mp = 0.0;
  for (double x : pts) mp = std::max(mp, std::abs(x));
  double mr = 0.0;
  for (const Interval& iv : reg.intervals()) {
    if (std::isfinite(iv.lo)) mr = std::max(mr, std::abs(iv.lo));
    if (std::isfinite(iv.hi)) mr = std::max(mr, std::abs(iv.hi));
  }
  return 1.0 + mp + mr;
}

CasePieces analyze_case(const CoefficientModel& m, const SingularOptions& opt,
                        std::optional<double> lo, std::optional<double> hi) {
  CasePieces cp;
  cp.reg = regular_part(m, opt.regular);
  cp.lb = lambda_beta(m, opt.lambda_beta);
  for (const std::string& w : cp.lb.warnings) cp.warnings.push_back(w);

  // the generating family's closed-form boundary limits take precedence;
  // the numerical route stays on as a cross-check
  cp.lam_pts = cp.lb.finite_limits;
  cp.j0 = cp.lb.j0;
  const ClosedFormLimits* cf =
      (m.closed_form && opt.asym.use_closed_form) ? m.closed_form.get() : nullptr;
  if (cf && cf->lambda_beta_points) {
    std::vector<double> pts = *cf->lambda_beta_points;
    std::sort(pts.begin(), pts.end());
    for (double L : pts) {
      bool matched = false;
      for (double x : cp.lb.finite_limits)
        if (std::abs(x - L) <= 1e-6 * (1.0 + std::abs(L))) matched = true;
      if (!matched && !cp.lb.undecided)
        cp.warnings.push_back(
            "boundary eigenvalue limit " + format_double(L) +
            " from the closed form has no numerically detected counterpart");
    }
    cp.lam_pts = std::move(pts);
    if (cf->j0) cp.j0 = *cf->j0;
  }

  cp.scale = window_scale(cp.reg, cp.lam_pts);
  if (lo && hi) {
    cp.window_lo = *lo;
    cp.window_hi = *hi;
  } else {
    cp.window_lo = -10.0 * cp.scale;
    cp.window_hi = 10.0 * cp.scale;
  }
  if (!(cp.window_lo < cp.window_hi) || !std::isfinite(cp.window_lo) ||
      !std::isfinite(cp.window_hi))
    throw ModelError("lambda window must be a nonempty finite interval");

  cp.margin = opt.exclusion_margin > 0.0 ? opt.exclusion_margin
                                         : 1e-4 * cp.scale;

  // skip zones: the regular part and the boundary eigenvalue limits,
  // inflated by the margin, plus the swept resolvent poles where the
  // boundary limits cannot be formed at all
  for (const Interval& iv : cp.reg.intervals())
    cp.excl.insert(iv.lo - cp.margin, iv.hi + cp.margin);
  for (double L : cp.lam_pts) cp.excl.insert(L - cp.margin, L + cp.margin);
  try {
    IntervalSet poles = resolvent_exclusion(m, cp.margin, opt.asym.limit);
    for (const Interval& iv : poles.intervals()) cp.excl.insert(iv);
  } catch (const std::exception& e) {
    cp.warnings.push_back(std::string("resolvent exclusion sweep failed: ") +
                          e.what());
  }

  // probe the boundary case across the window; a window mixing cases is
  // rejected rather than silently split
  const int n = std::max(1, opt.case_probes);
  const double span = cp.window_hi - cp.window_lo;
  for (int i = 0; i < n; ++i) {
    double x = cp.window_lo + span * (i + 0.5) / n;
    int tries = 0;
    while (cp.excl.contains(x) && tries++ < 50) x += span / (4.0 * n);
    if (x > cp.window_hi || cp.excl.contains(x)) continue;
    CaseTag tag;
    try {
      tag = classify_case(m, x, opt.asym);
    } catch (const std::exception& e) {
      tag.kind = CaseKind::unresolved;
      tag.detail = e.what();
    }
    cp.probes.emplace_back(x, tag);
  }

  CaseKind seen = CaseKind::unresolved;
  for (const auto& [x, tag] : cp.probes) {
    if (tag.kind == CaseKind::unresolved) continue;
    if (seen == CaseKind::unresolved) {
      seen = tag.kind;
    } else if (seen != tag.kind) {
      throw ModelError("case not uniform; split the window");
    }
  }
  cp.kind = (cf && cf->case_kind) ? *cf->case_kind : seen;
  if (cp.kind == CaseKind::unresolved)
    throw NumericError("boundary case could not be resolved in the window");
  return cp;
}

// ---------------------------------------------------------------------------
// Discriminant scan
// ---------------------------------------------------------------------------

struct DisEval {
  const CoefficientModel& m;
  const SingularOptions& opt;
  std::vector<std::string>* warnings;
  mutable int failures = 0;

  std::optional<double> operator()(double lambda) const {
    try {
      AsymCoeffs a = asym_coeffs(m, lambda, opt.asym);
      DiscriminantValue d = discriminant(a, opt.asym.limit_tol);
      const double v = a.beta_finite ? d.poly : d.dis;
      if (!std::isfinite(v)) return std::nullopt;
      return v;
    } catch (const std::exception& e) {
      if (warnings && failures == 0)
        warnings->push_back(std::string("discriminant evaluation failed at "
                                        "lambda = ") +
                            format_double(lambda) + ": " + e.what());
      ++failures;
      return std::nullopt;
    }
  }
};

inline int sgn_nonneg(double d) { return d >= 0.0 ? 1 : -1; }

// Sign-change refinement between evaluable points a < b.  The skip zones are
// never evaluated: a crossing whose bracket runs into a zone is first
// narrowed to the zone edges and then located by a secant through the edge
// values, which is why endpoints just inside a zone still come out to high
// accuracy when the discriminant is smooth across it.
double refine_root(const DisEval& ev, const IntervalSet& excl, double a,
                   double fa, double b, double fb, double root_tol,
                   double margin) {
  auto secant = [](double xa, double ya, double xb, double yb) {
    if (ya == yb) return 0.5 * (xa + xb);
    double x = xa - ya * (xb - xa) / (yb - ya);
    return std::clamp(x, std::min(xa, xb), std::max(xa, xb));
  };
  const double off = 1e-3 * margin;
  for (int depth = 0; depth < 16; ++depth) {
    // first whole skip zone strictly inside the bracket
    const Interval* zone = nullptr;
    for (const Interval& z : excl.intervals())
      if (a < z.lo && z.hi < b) {
        zone = &z;
        break;
      }
    if (!zone) break;
    const double za = std::max(a, zone->lo - off);
    const double zb = std::min(b, zone->hi + off);
    std::optional<double> fza = ev(za), fzb = ev(zb);
    if (!fza || !fzb) return secant(a, fa, b, fb);
    if (sgn_nonneg(fa) != sgn_nonneg(*fza)) {
      b = za;
      fb = *fza;
    } else if (sgn_nonneg(*fzb) != sgn_nonneg(fb)) {
      a = zb;
      fa = *fzb;
    } else {
      // the crossing sits inside the zone itself
      return secant(za, *fza, zb, *fzb);
    }
  }
  const double width = root_tol * (1.0 + std::abs(a) + std::abs(b));
  for (int it = 0; it < 200 && b - a > width; ++it) {
    const double mid = 0.5 * (a + b);
    if (!(a < mid && mid < b)) break;
    std::optional<double> fm = ev(mid);
    if (!fm) return secant(a, fa, b, fb);
    if (sgn_nonneg(*fm) == sgn_nonneg(fa)) {
      a = mid;
      fa = *fm;
    } else {
      b = mid;
      fb = *fm;
    }
  }
  return 0.5 * (a + b);
}

struct ScanResult {
  IntervalSet set;
  bool left_open_at_edge = false;   // set reaches the first evaluable point
  bool right_open_at_edge = false;  // set reaches the last evaluable point
  std::vector<double> excluded_overlaps;
};

ScanResult scan_discriminant(const CoefficientModel& m,
                             const SingularOptions& opt, const CasePieces& cp,
                             std::vector<std::string>* warnings) {
  ScanResult out;
  DisEval ev{m, opt, warnings};
  const int n = opt.grid;
  const double lo = cp.window_lo, hi = cp.window_hi;
  const double step = (hi - lo) / (n - 1);

  double px = 0.0, pd = 0.0;
  bool open = false;
  double start = 0.0;
  double first_x = kNaN, last_x = kNaN;
  bool first_nonneg = false, last_nonneg = false;

  for (int i = 0; i < n; ++i) {
    const double x = lo + step * i;
    if (cp.excl.contains(x)) continue;
    std::optional<double> d = ev(x);
    if (!d) continue;
    if (std::isnan(first_x)) {
      first_x = x;
      first_nonneg = *d >= 0.0;
      if (first_nonneg) {
        open = true;
        start = x;
      }
    } else if (sgn_nonneg(*d) != sgn_nonneg(pd)) {
      const double root = refine_root(ev, cp.excl, px, pd, x, *d,
                                      opt.root_tol, cp.margin);
      if (open) {
        out.set.insert(start, root);
        open = false;
      } else {
        open = true;
        start = root;
      }
    }
    last_x = x;
    last_nonneg = *d >= 0.0;
    px = x;
    pd = *d;
  }
  if (std::isnan(first_x)) {
    if (warnings)
      warnings->push_back(
          "no evaluable spectral parameters in the window; the singular "
          "component could not be scanned");
    return out;
  }
  if (open) out.set.insert(start, last_x);

  out.left_open_at_edge =
      first_nonneg && (first_x - lo) <= 2.0 * step + cp.margin;
  out.right_open_at_edge =
      last_nonneg && (hi - last_x) <= 2.0 * step + cp.margin;

  if (ev.failures > 1 && warnings)
    warnings->push_back("discriminant evaluation failed at " +
                        std::to_string(ev.failures) +
                        " grid points; they were skipped");

  // flag exclusion zones the emitted set runs through: across those the
  // intervals are interpolated, so the set is to be read modulo the regular
  // part and the boundary eigenvalue limits
  for (const Interval& z : cp.excl.intervals()) {
    if (!std::isfinite(z.lo) && !std::isfinite(z.hi)) continue;
    const double zc = std::isfinite(z.lo) && std::isfinite(z.hi)
                          ? 0.5 * (z.lo + z.hi)
                          : (std::isfinite(z.lo) ? z.lo : z.hi);
    for (const Interval& iv : out.set.intervals())
      if (iv.lo <= z.hi && z.lo <= iv.hi) {
        out.excluded_overlaps.push_back(zc);
        break;
      }
  }
  return out;
}

// Ray extension: replace the outermost interval's endpoint by infinity when
// the structure class admits a ray on that side and the scan reached the
// window edge in the nonnegative sign.  Disagreements are reported, never
// silently resolved.
void apply_rays(SingularSet& s, const ScanResult& scan,
                const StructureClass* cls) {
  if (!cls) {
    if (scan.left_open_at_edge || scan.right_open_at_edge)
      s.warnings.push_back(
          "singular set reaches the window edge but no structure "
          "classification is available; the set is truncated at the window");
    return;
  }
  auto rebuild = [&](bool left, bool right) {
    std::vector<Interval> ivs = s.set.intervals();
    if (ivs.empty()) return;
    if (left) ivs.front().lo = -kInf;
    if (right) ivs.back().hi = kInf;
    IntervalSet ns;
    for (const Interval& iv : ivs) ns.insert(iv);
    s.set = ns;
  };
  bool el = false, er = false;
  if (scan.left_open_at_edge) {
    if (cls->left_ray)
      el = true;
    else
      s.warnings.push_back(
          "window edge lies in the singular set on the left but the "
          "structure class admits no left ray; the set is truncated");
  } else if (cls->left_ray) {
    s.warnings.push_back(
        "structure class admits a left ray but the discriminant is negative "
        "at the left window edge; no extension applied");
  }
  if (scan.right_open_at_edge) {
    if (cls->right_ray)
      er = true;
    else
      s.warnings.push_back(
          "window edge lies in the singular set on the right but the "
          "structure class admits no right ray; the set is truncated");
  } else if (cls->right_ray) {
    s.warnings.push_back(
        "structure class admits a right ray but the discriminant is negative "
        "at the right window edge; no extension applied");
  }
  if (el || er) rebuild(el, er);
  s.left_ray = el;
  s.right_ray = er;
}

}  // namespace

// ---------------------------------------------------------------------------
// Structure coefficients
// ---------------------------------------------------------------------------

StructureCoeffs structure_coeffs(const CoefficientModel& m,
                                 const LambdaBetaD& lb,
                                 const SingularOptions& opt) {
  if (!m.beta_finite())
    throw NumericError(
        "structure coefficients are undefined at an infinite endpoint");

  StructureCoeffs s;
  // deduplicated pole locations; coincident branch limits pool their weights
  std::vector<double> poles = lb.finite_limits;
  std::sort(poles.begin(), poles.end());
  const int np = static_cast<int>(poles.size());
  double pscale = 1.0;
  double pcenter = 0.0;
  for (double L : poles) pscale = std::max(pscale, 1.0 + std::abs(L));
  if (np > 0) {
    for (double L : poles) pcenter += L;
    pcenter /= np;
  }

  // sample the limit functions at 4 + 2 np admissible spectral parameters,
  // sliding outward when a sample lands on a resolvent pole or the
  // extrapolation there fails to settle
  const int K = 4 + 2 * np;
  const double tol = opt.asym.limit_tol;
  std::vector<double> xs, y_pi2, y_kap, y_r1;
  for (int k = 0; k < K; ++k) {
    const double dir = (k % 2 == 0) ? 1.0 : -1.0;
    double x = pcenter + dir * pscale * (1.35 + 0.85 * (k / 2));
    bool ok = false;
    for (int tries = 0; tries < 40 && !ok; ++tries) {
      bool clear = true;
      for (double L : poles)
        if (std::abs(x - L) < 0.05 * pscale) clear = false;
      if (clear) {
        try {
          AsymCoeffs a = asym_coeffs(m, x, opt.asym);
          if (a.pi2.reliable(tol) && a.varkappa0.reliable(tol) &&
              a.r1.reliable(tol)) {
            xs.push_back(x);
            y_pi2.push_back(-a.pi2.value);
            y_kap.push_back(-a.varkappa0.value);
            y_r1.push_back(a.r1.value);
            ok = true;
          }
        } catch (const std::exception&) {
        }
      }
      if (!ok) x += dir * 0.37 * pscale;
    }
    if (!ok)
      throw NumericError(
          "could not place admissible sample points for the structure fit");
  }

  // least-squares fit of both limit functions against {1, lambda,
  // 1/(pole_j - lambda)}; one decomposition serves both right-hand sides
  const int cols = 2 + np;
  Eigen::MatrixXd A(K, cols);
  Eigen::MatrixXd B(K, 2);
  for (int i = 0; i < K; ++i) {
    A(i, 0) = 1.0;
    A(i, 1) = xs[i];
    for (int j = 0; j < np; ++j) A(i, 2 + j) = 1.0 / (poles[j] - xs[i]);
    B(i, 0) = y_pi2[i];
    B(i, 1) = y_kap[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  Eigen::MatrixXd X = qr.solve(B);
  double resid = 0.0;
  for (int c = 0; c < 2; ++c) {
    const double num = (A * X.col(c) - B.col(c)).norm();
    resid = std::max(resid, num / std::max(1.0, B.col(c).norm()));
  }
  s.fit_residual = resid;
  s.f_beta = X(0, 0);
  s.g_beta = X(1, 0);
  s.phi_beta = X(0, 1);
  s.psi_beta = X(1, 1);
  for (int j = 0; j < np; ++j) {
    s.sigma_beta.emplace_back(poles[j], X(2 + j, 0));
    s.mu_beta.emplace_back(poles[j], X(2 + j, 1));
  }

  // the fitted forms are limits of Nevanlinna functions: g and the sigma
  // weights are nonnegative up to fit noise
  bool nevanlinna_ok = true;
  {
    double mag = 1.0 + std::abs(s.f_beta) + std::abs(s.g_beta);
    for (const auto& [L, w] : s.sigma_beta) mag += std::abs(w);
    const double neg_tol = 1e-10 * mag;
    auto clamp_weight = [&](double& w, const char* name) {
      if (w >= 0.0) return;
      if (w >= -neg_tol) {
        w = 0.0;
      } else {
        s.warnings.push_back(std::string(name) + " = " + format_double(w) +
                             " violates nonnegativity beyond tolerance");
        nevanlinna_ok = false;
      }
    };
    clamp_weight(s.g_beta, "g_beta");
    for (auto& [L, w] : s.sigma_beta) clamp_weight(w, "sigma_beta weight");
  }

  // r1 is a constant in the spectral parameter; record its spread over the
  // first three samples as evidence
  {
    const int nh = std::min<std::size_t>(3, y_r1.size());
    double sum = 0.0;
    for (int i = 0; i < nh; ++i) sum += y_r1[i];
    s.h_beta = sum / nh;
    for (int i = 0; i < nh; ++i)
      s.h_spread = std::max(s.h_spread, std::abs(y_r1[i] - s.h_beta));
    if (s.h_spread > opt.fit_tol * (1.0 + std::abs(s.h_beta)))
      s.warnings.push_back(
          "r1 varies with the spectral parameter beyond tolerance "
          "(spread = " +
          format_double(s.h_spread) + "); h_beta is its mean");
  }

  // independent route: boundary limits of weighted eigenvector data of D.
  // sigma_j(t) = |v_j(t)* b(t)|^2 for the branch converging to pole_j, and
  // the branches growing without bound feed f and g.
  {
    const double beta = m.beta;
    auto weighted = [&](double t) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m.D_value(t));
      const Eigen::VectorXcd b = m.b_taylor(t)[0];
      struct Row {
        double eval;
        double sigma;
        int pole;  // -1: improper
      };
      std::vector<Row> rows(m.dim);
      for (int k = 0; k < m.dim; ++k) {
        rows[k].eval = es.eigenvalues()(k);
        const std::complex<double> vb = es.eigenvectors().col(k).dot(b);
        rows[k].sigma = std::norm(vb);
        rows[k].pole = -1;
        for (int j = 0; j < np; ++j)
          if (std::abs(rows[k].eval - poles[j]) <= 0.5 * (1.0 + std::abs(poles[j])) &&
              (rows[k].pole < 0 ||
               std::abs(rows[k].eval - poles[j]) <
                   std::abs(rows[k].eval - poles[rows[k].pole])))
            rows[k].pole = j;
      }
      return rows;
    };
    auto limit_of = [&](const std::function<double(double)>& f) {
      return limit_extrapolate(f, m.alpha, beta, opt.asym.limit);
    };
    double cross = 0.0;
    bool have_cross = false;
    auto compare = [&](double fitted, const LimitResult& lim,
                       const char* name) {
      if (lim.status != LimitStatus::ok) {
        s.warnings.push_back(std::string("direct-route limit for ") + name +
                             " did not settle; cross-check skipped");
        return;
      }
      const double rel = std::abs(fitted - lim.value) /
                         (1.0 + std::max(std::abs(fitted), std::abs(lim.value)));
      cross = std::max(cross, rel);
      have_cross = true;
      if (rel > 1e-3)
        s.warnings.push_back(std::string("fit and direct-limit routes "
                                         "disagree on ") +
                             name + ": " + format_double(fitted) + " vs " +
                             format_double(lim.value));
    };
    compare(s.f_beta, limit_of([&](double t) {
              const double h = beta - t;
              double acc = -m.p_jet(t).a[0];
              for (const auto& r : weighted(t))
                if (r.pole < 0) acc += r.sigma / r.eval;
              return acc / (h * h);
            }),
            "f_beta");
    compare(s.g_beta, limit_of([&](double t) {
              const double h = beta - t;
              double acc = 0.0;
              for (const auto& r : weighted(t))
                if (r.pole < 0) acc += r.sigma / (r.eval * r.eval);
              return acc / (h * h);
            }),
            "g_beta");
    for (int j = 0; j < np; ++j) {
      compare(s.sigma_beta[j].second, limit_of([&, j](double t) {
                const double h = beta - t;
                double acc = 0.0;
                for (const auto& r : weighted(t))
                  if (r.pole == j) acc += r.sigma;
                return acc / (h * h);
              }),
              ("sigma_beta[" + std::to_string(j) + "]").c_str());
    }
    if (have_cross) s.cross_err = cross;
  }

  s.reliable = nevanlinna_ok && s.fit_residual <= opt.fit_tol;
  if (!s.reliable && s.fit_residual > opt.fit_tol)
    s.warnings.push_back("structure fit residual " +
                         format_double(s.fit_residual) +
                         " exceeds the budget " + format_double(opt.fit_tol));
  return s;
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

const char* branch_name(StructureBranch b) {
  switch (b) {
    case StructureBranch::a1: return "a1";
    case StructureBranch::a2: return "a2";
    case StructureBranch::b1: return "b1";
    case StructureBranch::b2: return "b2";
    case StructureBranch::c1: return "c1";
    case StructureBranch::c2: return "c2";
    case StructureBranch::degenerate: return "degenerate";
  }
  return "degenerate";
}

StructureClass classify_structure(const StructureCoeffs& s, int j0,
                                  double tol) {
  StructureClass c;
  double S = 0.0;
  for (const auto& [L, w] : s.sigma_beta) S += w;
  c.g_beta = s.g_beta;
  c.g4psi = s.g_beta + 4.0 * s.psi_beta;
  c.f_psi = s.f_beta * s.psi_beta;
  c.hsum = s.h_beta * s.h_beta + s.psi_beta * S;

  const double scale = 1.0 + std::abs(s.f_beta) + s.g_beta +
                       std::abs(s.phi_beta) + std::abs(s.psi_beta) + S +
                       std::abs(s.h_beta);
  const double t1 = tol * scale;          // linear quantities
  const double t2 = tol * scale * scale;  // products

  auto degenerate = [&](const char* what) {
    c.branch = StructureBranch::degenerate;
    c.compact_bound = -1;
    c.note = std::string("degenerate: ") + what + " vanishes within tolerance";
    return c;
  };

  if (c.g_beta > t1) {
    if (c.g4psi > t1) {
      c.branch = StructureBranch::a1;
      c.compact_bound = j0 + 1;
    } else if (c.g4psi < -t1) {
      c.branch = StructureBranch::a2;
      c.compact_bound = j0;
      c.left_ray = c.right_ray = true;
    } else {
      return degenerate("g_beta + 4 psi_beta");
    }
  } else if (std::abs(s.f_beta) > t1) {
    if (c.f_psi > t2) {
      c.branch = StructureBranch::b1;
      c.compact_bound = j0;
      c.left_ray = true;
    } else if (c.f_psi < -t2) {
      c.branch = StructureBranch::b2;
      c.compact_bound = j0;
      c.right_ray = true;
    } else {
      return degenerate("f_beta * psi_beta");
    }
  } else {
    if (c.hsum < -t2) {
      c.branch = StructureBranch::c1;
      c.compact_bound = j0;
    } else if (c.hsum > t2) {
      c.branch = StructureBranch::c2;
      c.compact_bound = std::max(j0 - 1, 0);
      c.left_ray = c.right_ray = true;
    } else {
      return degenerate("h_beta^2 + psi_beta * sum sigma_beta");
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Essential spectral radius
// ---------------------------------------------------------------------------

double essential_radius(const IntervalSet& regular_set,
                        const IntervalSet& singular_set,
                        const StructureCoeffs* s, const StructureClass* cls,
                        double root_tol) {
  if (regular_set.unbounded() || singular_set.unbounded()) return kInf;
  const double base = std::max(regular_set.sup_abs(), singular_set.sup_abs());

  // closed-form cross-check: no poles and branch a1 pin the single compact
  // singular interval as the root interval of M x^2 + 2 N x + K
  if (s && cls && cls->branch == StructureBranch::a1 && s->sigma_beta.empty()) {
    const double g = s->g_beta, f = s->f_beta;
    const double phi = s->phi_beta, psi = s->psi_beta, h = s->h_beta;
    const double M = g * (g + 4.0 * psi);
    const double N = f * (g + 2.0 * psi) + 2.0 * g * phi;
    const double K = f * (f + 4.0 * phi) - 4.0 * h * h;
    if (M > 0.0) {
      double disc = N * N - M * K;
      if (disc < 0.0 && disc > -1e-12 * (N * N + std::abs(M * K))) disc = 0.0;
      double closed = regular_set.sup_abs();
      if (disc >= 0.0) {
        const double rt = std::sqrt(disc);
        closed = std::max({closed, std::abs((-N - rt) / M),
                           std::abs((-N + rt) / M)});
      }
      if (std::abs(base - closed) > 10.0 * root_tol * (1.0 + closed))
        throw NumericError(
            "essential radius cross-check failed: interval route " +
            format_double(base) + ", closed-form route " +
            format_double(closed));
    }
  }
  return base;
}

// ---------------------------------------------------------------------------
// Singular part and the full pipeline
// ---------------------------------------------------------------------------

namespace {

SingularSet assemble_singular(const CoefficientModel& m,
                              const SingularOptions& opt, const CasePieces& cp,
                              const StructureClass* cls_precomputed,
                              const LambdaBetaD* lb_for_structure) {
  SingularSet s;
  s.case_kind = cp.kind;
  if (cp.kind != CaseKind::III) return s;  // cases I and II contribute nothing

  ScanResult scan = scan_discriminant(m, opt, cp, &s.warnings);
  s.set = scan.set;
  s.excluded_overlaps = scan.excluded_overlaps;

  if (!opt.ray_extension) return s;
  if (!scan.left_open_at_edge && !scan.right_open_at_edge &&
      !(cls_precomputed && (cls_precomputed->left_ray ||
                            cls_precomputed->right_ray)))
    return s;

  const StructureClass* cls = cls_precomputed;
  StructureClass local;
  if (!cls && m.beta_finite() && lb_for_structure) {
    try {
      StructureCoeffs sc = structure_coeffs(m, *lb_for_structure, opt);
      local = classify_structure(
          sc, cp.j0, std::max(1e-9, 100.0 * sc.fit_residual));
      if (local.branch != StructureBranch::degenerate) cls = &local;
    } catch (const std::exception& e) {
      s.warnings.push_back(std::string("structure classification for the ray "
                                       "decision failed: ") +
                           e.what());
    }
  }
  apply_rays(s, scan, cls);
  return s;
}

}  // namespace

SingularSet singular_part(const CoefficientModel& m, double lambda_min,
                          double lambda_max, const SingularOptions& opt) {
  if (opt.grid < 16) throw ModelError("grid must be at least 16 points");
  CasePieces cp = analyze_case(m, opt, lambda_min, lambda_max);
  LambdaBetaD lb = cp.lb;
  lb.finite_limits = cp.lam_pts;
  lb.j0 = cp.j0;
  SingularSet s = assemble_singular(m, opt, cp, nullptr, &lb);
  for (const std::string& w : cp.warnings) s.warnings.push_back(w);
  return s;
}

SpectrumReport essential_spectrum(const CoefficientModel& m,
                                  const SingularOptions& opt) {
  if (opt.grid < 16) throw ModelError("grid must be at least 16 points");
  std::optional<double> wlo, whi;
  if (opt.window[0] != 0.0 || opt.window[1] != 0.0) {
    wlo = opt.window[0];
    whi = opt.window[1];
  }
  CasePieces cp = analyze_case(m, opt, wlo, whi);

  SpectrumReport rep;
  rep.model_name = m.name;
  rep.alpha = m.alpha;
  rep.beta = m.beta;
  rep.dim = m.dim;
  rep.case_kind = cp.kind;
  rep.probes = cp.probes;
  rep.window_lo = cp.window_lo;
  rep.window_hi = cp.window_hi;
  rep.regular = cp.reg;
  rep.lambda_beta = cp.lb;
  rep.lambda_beta.finite_limits = cp.lam_pts;
  rep.lambda_beta.j0 = cp.j0;
  rep.warnings = cp.warnings;

  const ClosedFormLimits* cf =
      (m.closed_form && opt.asym.use_closed_form) ? m.closed_form.get() : nullptr;

  // structure coefficients and class (case III at a finite endpoint)
  if (cp.kind == CaseKind::III) {
    if (!m.beta_finite()) {
      rep.structure_note = "unclassified (beta = infinity)";
    } else {
      try {
        StructureCoeffs sc = structure_coeffs(m, rep.lambda_beta, opt);
        StructureClass cls = classify_structure(
            sc, cp.j0, std::max(1e-9, 100.0 * sc.fit_residual));
        for (const std::string& w : sc.warnings) rep.warnings.push_back(w);
        rep.structure = std::move(sc);
        rep.structure_class = cls;
        if (cls.branch == StructureBranch::degenerate)
          rep.structure_note = cls.note;
      } catch (const std::exception& e) {
        rep.structure_note = std::string("structure fit failed: ") + e.what();
        rep.warnings.push_back(rep.structure_note);
      }
    }
  }

  rep.singular = assemble_singular(
      m, opt, cp,
      rep.structure_class ? &*rep.structure_class : nullptr, nullptr);
  for (const std::string& w : rep.singular.warnings)
    rep.warnings.push_back(w);

  // radius, with the closed-form interval cross-check and, when the family
  // supplies one, its own radius as a second witness
  try {
    rep.radius = essential_radius(
        rep.regular, rep.singular.set,
        rep.structure ? &*rep.structure : nullptr,
        rep.structure_class ? &*rep.structure_class : nullptr, opt.root_tol);
  } catch (const NumericError& e) {
    rep.warnings.push_back(e.what());
    rep.radius = essential_radius(rep.regular, rep.singular.set, nullptr,
                                  nullptr, opt.root_tol);
  }
  if (cf && cf->radius) {
    const double rcf = *cf->radius;
    const bool both_inf = std::isinf(rep.radius) && std::isinf(rcf);
    if (!both_inf &&
        std::abs(rep.radius - rcf) > 1e-6 * (1.0 + std::abs(rcf)))
      rep.warnings.push_back("family closed-form radius " +
                             format_double(rcf) +
                             " disagrees with the computed radius " +
                             format_double(rep.radius));
  }

  // membership status of the boundary eigenvalue limits: set membership
  // against the computed parts decides; the family's own analysis, when
  // present, is attached alongside
  for (double L : cp.lam_pts) {
    ExceptionalPoint p;
    p.lambda = L;
    const double tol_reg = 10.0 * opt.root_tol * (1.0 + std::abs(L));
    const double tol_sing = std::max(tol_reg, 1.001 * cp.margin);
    if (rep.regular.contains(L, tol_reg))
      p.status = "in-regular";
    else if (rep.singular.set.distance(L) <= tol_sing)
      p.status = "in-singular-closure";
    else
      p.status = "undetermined";
    if (cf)
      for (const auto& [x, st] : cf->exceptional_status)
        if (std::abs(x - L) <= 1e-6 * (1.0 + std::abs(L)))
          p.analytic_status = st;
    if (p.status == "undetermined" && !p.analytic_status.empty())
      p.status = p.analytic_status;
    rep.exceptional.push_back(std::move(p));
  }

  rep.essential = IntervalSet::merge(rep.regular, rep.singular.set);

  // assumption diagnostics at the first resolved probe
  for (const auto& [x, tag] : cp.probes) {
    if (tag.kind == CaseKind::unresolved) continue;
    try {
      rep.diagnostics = assumption_diagnostics(m, x, opt.asym);
    } catch (const std::exception& e) {
      rep.warnings.push_back(std::string("assumption diagnostics failed: ") +
                             e.what());
    }
    break;
  }
  return rep;
}

}  // namespace esspec
