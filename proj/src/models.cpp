#include "esspec/models.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "esspec/expr.hpp"

namespace esspec {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Expr parse_field(const std::string& text, const std::string& field) {
  try {
    return parse_expr(text);
  } catch (const ParseError& p) {
    throw ModelError("while parsing " + field + ": " + p.what());
  }
}

// Imaginary parts may be omitted entirely.
Expr parse_field_or_zero(const std::string& text, const std::string& field) {
  return text.empty() ? Expr::number(0.0) : parse_field(text, field);
}

// Profiles are functions of the boundary distance x = 1 - t (the expression
// grammar's variable stands for x here).  Evaluating a profile as a jet in
// the model variable t flips the sign of every odd coefficient.
template <int N>
Jet<double, N> reflect(Jet<double, N> j) {
  for (int k = 1; k <= N; k += 2) j.a[k] = -j.a[k];
  return j;
}

template <int N>
Jet<double, N> reflected(const Expr& e, double t) {
  return reflect(eval_jet<N>(e, 1.0 - t));
}

double profile_value(const Expr& e, double x, const char* nm) {
  try {
    return eval_value(e, x);
  } catch (const DomainError& d) {
    throw ModelError(std::string(nm) + " undefined at x = " + format_double(x) +
                     ": " + d.what());
  }
}

// Requires v > 0 at 257 samples of [0, 1]; the profiles are C^1, so this
// pins the sign for any realistic input.
void check_positive_profile(const Expr& e, const char* nm) {
  for (int i = 0; i <= 256; ++i) {
    double x = double(i) / 256.0;
    double v = profile_value(e, x, nm);
    if (!(v > 0.0))
      throw ModelError(std::string(nm) + " must stay positive on [0, 1]: " +
                       nm + "(" + format_double(x) + ") = " + format_double(v));
  }
}

CJet4 real_only(const Jet4& re) { return complex_jet(re, Jet4{}); }

// Relative tolerance against which analytically-vanishing boundary jets are
// recognised: combinations like rho*m - |psi|^2 are computed in floating
// point, so an identical cancellation leaves noise of this order relative to
// the terms that cancelled.
double zero_tol(double term_scale) { return 1e-12 * (1.0 + term_scale); }

// ---------------------------------------------------------------------------
// Scalar family
// ---------------------------------------------------------------------------

struct ParsedA {
  Expr rho, m, psi_re, psi_im, phi;
};

ParsedA parse_a(const ExampleAParams& pr) {
  ParsedA pa{parse_field(pr.rho, "rho"), parse_field(pr.m, "m"),
             parse_field(pr.psi_re, "psi_re"),
             parse_field_or_zero(pr.psi_im, "psi_im"),
             parse_field(pr.phi, "phi")};
  check_positive_profile(pa.rho, "rho");
  return pa;
}

// Largest |Delta| over (0, 1] for Delta(x) = F(x) / (x^2 rho(x)): a dense
// sweep plus a golden-section polish around the winning sample.  Only used
// in case III, where Delta extends continuously to x = 0.
double sup_abs_delta_a(const ParsedA& pa) {
  auto abs_delta = [&pa](double x) {
    double r = profile_value(pa.rho, x, "rho");
    double mm = profile_value(pa.m, x, "m");
    double re = profile_value(pa.psi_re, x, "psi_re");
    double im = profile_value(pa.psi_im, x, "psi_im");
    double F = r * mm - (re * re + im * im);
    return std::abs(F / (x * x * r));
  };
  const int kGrid = 8192;
  double best = 0.0;
  int best_i = kGrid;
  for (int i = 1; i <= kGrid; ++i) {
    double v = abs_delta(double(i) / kGrid);
    if (v > best) {
      best = v;
      best_i = i;
    }
  }
  double lo = std::max(double(best_i - 1) / kGrid, 1e-12);
  double hi = std::min(double(best_i + 1) / kGrid, 1.0);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
  double fc = abs_delta(c), fd = abs_delta(d);
  while (hi - lo > 1e-13) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - gr * (hi - lo);
      fc = abs_delta(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + gr * (hi - lo);
      fd = abs_delta(d);
    }
  }
  return std::max({best, fc, fd});
}

ExampleAAnalysis analyze_a(const ParsedA& pa) {
  // Jets at the boundary image x = 0.
  Jet4 rho = eval_jet<4>(pa.rho, 0.0);
  Jet4 m = eval_jet<4>(pa.m, 0.0);
  Jet4 pre = eval_jet<4>(pa.psi_re, 0.0);
  Jet4 pim = eval_jet<4>(pa.psi_im, 0.0);
  Jet4 phi = eval_jet<4>(pa.phi, 0.0);

  if (m.a[0] == 0.0)
    throw ModelError("m(0) must be nonzero: the branch of D has to leave "
                     "every bounded window at the boundary");

  // Everything hinges on F = rho*m - |psi|^2 near x = 0.
  Jet4 prod = rho * m;
  Jet4 sq = pre * pre + pim * pim;
  Jet4 F = prod - sq;

  ExampleAAnalysis an;
  an.rho0 = rho.a[0];
  an.m0 = m.a[0];
  an.phi0 = phi.a[0];
  an.F0 = F.a[0];
  an.F1 = F.a[1];
  an.F2 = 2.0 * F.a[2];

  const bool zero0 =
      std::abs(F.a[0]) <= zero_tol(std::abs(prod.a[0]) + std::abs(sq.a[0]));
  const bool zero1 =
      std::abs(F.a[1]) <= zero_tol(std::abs(prod.a[1]) + std::abs(sq.a[1]));

  if (!zero0) {
    an.kind = CaseKind::I;
    an.pi0 = F.a[0] / m.a[0];
    an.pi1 = (m.a[1] * F.a[0] / m.a[0] - F.a[1]) / m.a[0];
    an.radius = kInf;
  } else if (!zero1) {
    an.kind = CaseKind::II;
    an.pi0 = 0.0;
    an.pi1 = -F.a[1] / m.a[0];
    an.radius = kInf;
  } else {
    an.kind = CaseKind::III;
    an.pi0 = 0.0;
    an.pi1 = 0.0;
    // The regular branch Delta = F / (x^2 rho) now extends continuously to
    // the boundary; the singular interval is spanned by its limit and a
    // hull point weighted by m(0) and rho(0).  In this case m(0) =
    // |psi(0)|^2 / rho(0) > 0, so the hull denominator cannot vanish.
    an.delta0 = F.a[2] / rho.a[0];
    an.hull_point = (4.0 * m.a[0] * phi.a[0] + rho.a[0] * an.delta0) /
                    (4.0 * m.a[0] + rho.a[0]);
    an.singular = Interval{std::min(an.delta0, an.hull_point),
                           std::max(an.delta0, an.hull_point)};
    an.radius = std::max({sup_abs_delta_a(pa), std::abs(an.delta0),
                          std::abs(an.hull_point)});
  }
  return an;
}

// ---------------------------------------------------------------------------
// 2x2 family
// ---------------------------------------------------------------------------

struct ParsedB {
  Expr vartheta, delta11, delta22, delta12_re, delta12_im;
  Expr beta1, beta2, gamma_re, gamma_im, phi;
};

ParsedB parse_b(const ExampleBParams& pr) {
  ParsedB pb{parse_field(pr.vartheta, "vartheta"),
             parse_field(pr.delta11, "delta11"),
             parse_field(pr.delta22, "delta22"),
             parse_field(pr.delta12_re, "delta12_re"),
             parse_field_or_zero(pr.delta12_im, "delta12_im"),
             parse_field(pr.beta1, "beta1"),
             parse_field(pr.beta2, "beta2"),
             parse_field(pr.gamma_re, "gamma_re"),
             parse_field_or_zero(pr.gamma_im, "gamma_im"),
             parse_field(pr.phi, "phi")};
  check_positive_profile(pb.vartheta, "vartheta");
  return pb;
}

// Analysis output plus the capture scalars the model builder needs for the
// side-channel closures but which are not interesting enough to publish.
struct BData {
  ExampleBAnalysis pub;
  double Wt1 = 0.0;     // t-derivative at t = 1 of W = det of the scaled D
  double d11t1 = 0.0;   // t-derivative at t = 1 of delta11(1 - t)
};

BData analyze_b(const ParsedB& pb) {
  Jet4 th = eval_jet<4>(pb.vartheta, 0.0);
  Jet4 d11 = eval_jet<4>(pb.delta11, 0.0);
  Jet4 d22 = eval_jet<4>(pb.delta22, 0.0);
  Jet4 d12re = eval_jet<4>(pb.delta12_re, 0.0);
  Jet4 d12im = eval_jet<4>(pb.delta12_im, 0.0);
  Jet4 b1 = eval_jet<4>(pb.beta1, 0.0);
  Jet4 b2 = eval_jet<4>(pb.beta2, 0.0);
  Jet4 gre = eval_jet<4>(pb.gamma_re, 0.0);
  Jet4 phi = eval_jet<4>(pb.phi, 0.0);

  if (std::abs(d11.a[0]) <=
      zero_tol(std::abs(d22.a[0]) + std::abs(d12re.a[0]) + std::abs(d12im.a[0])))
    throw ModelError("delta11(0) must be nonzero: exactly one eigenvalue "
                     "branch of D may stay finite at the boundary");

  // The case split lives in A = vartheta*delta11 - beta1^2 and its friends.
  Jet4 prod1 = th * d11, sq1 = b1 * b1;
  Jet4 prod2 = th * d22, sq2 = b2 * b2;
  Jet4 cross = b1 * b2;
  Jet4 A = prod1 - sq1;
  Jet4 B = prod2 - sq2;
  Jet4 Cre = th * d12re - cross;
  Jet4 Cim = th * d12im;

  BData bd;
  ExampleBAnalysis& an = bd.pub;
  an.A0 = A.a[0];
  an.absC0 = std::hypot(Cre.a[0], Cim.a[0]);
  an.A1 = A.a[1];
  an.phi0 = phi.a[0];
  an.re_gamma0 = gre.a[0];
  an.lambda11 =
      d22.a[0] - (d12re.a[0] * d12re.a[0] + d12im.a[0] * d12im.a[0]) / d11.a[0];

  // Numerator weights of pi near the boundary and the t-derivative captures
  // for the first-order coefficient.
  Jet4 x2;
  x2.a[2] = 1.0;  // the jet of x^2 at x = 0
  Jet4 Psi = A + x2 * B;
  Jet4 Phi = (A * B - (Cre * Cre + Cim * Cim)) / th;
  Jet4 W = d11 * d22 - (d12re * d12re + d12im * d12im);
  an.Psi_beta = Psi.a[0];
  an.Phi_beta = Phi.a[0];
  an.Psi_d1_beta = -Psi.a[1];
  an.Phi_d1_beta = -Phi.a[1];
  an.delta11_0 = d11.a[0];
  bd.Wt1 = -W.a[1];
  bd.d11t1 = -d11.a[1];

  const bool zeroA0 =
      std::abs(A.a[0]) <= zero_tol(std::abs(prod1.a[0]) + std::abs(sq1.a[0]));
  const bool zeroC0 =
      an.absC0 <= zero_tol(std::abs((th * d12re).a[0]) + std::abs((th * d12im).a[0]) +
                           std::abs(cross.a[0]));
  const bool zeroA1 =
      std::abs(A.a[1]) <= zero_tol(std::abs(prod1.a[1]) + std::abs(sq1.a[1]));

  if (!zeroA0 || !zeroC0) {
    an.kind = CaseKind::I;
    return bd;
  }
  if (!zeroA1) {
    an.kind = CaseKind::II;
    return bd;
  }
  an.kind = CaseKind::III;

  // A(0) = 0 with vartheta(0) != 0 and delta11(0) != 0 forces beta1(0) != 0.
  const double th0 = th.a[0];
  an.g_beta = th0 * th0 / (b1.a[0] * b1.a[0]);
  an.K1 = (A.a[2] + B.a[0]) / th0;
  an.K2 =
      (A.a[2] * B.a[0] - (Cre.a[1] * Cre.a[1] + Cim.a[1] * Cim.a[1])) / (th0 * th0);
  an.r1 = -(b1.a[0] / d11.a[0]) * gre.a[0];

  // P(lambda) = (lambda - phi0)(lambda^2 - K1 lambda + K2)
  //             - re_gamma0^2 (lambda - lambda11), monic cubic.
  const double g2 = an.re_gamma0 * an.re_gamma0;
  an.P_coeff = {-an.phi0 * an.K2 + g2 * an.lambda11,
                an.K2 + an.phi0 * an.K1 - g2, -(an.K1 + an.phi0), 1.0};

  // Solution set of (lambda11 - lambda) P(lambda) >= 0: the real roots of P
  // together with lambda11 cut the line into sign-constant segments, and the
  // quartic tends to -infinity on both ends, so only bounded segments (and
  // the nodes themselves, where it vanishes) qualify.
  auto P = [&an](double la) {
    return ((la + an.P_coeff[2]) * la + an.P_coeff[1]) * la + an.P_coeff[0];
  };
  auto Q = [&](double la) { return (an.lambda11 - la) * P(la); };

  Eigen::Matrix3d companion = Eigen::Matrix3d::Zero();
  companion(1, 0) = 1.0;
  companion(2, 1) = 1.0;
  companion(0, 2) = -an.P_coeff[0];
  companion(1, 2) = -an.P_coeff[1];
  companion(2, 2) = -an.P_coeff[2];
  Eigen::EigenSolver<Eigen::Matrix3d> es(companion);

  std::vector<double> nodes{an.lambda11};
  for (int i = 0; i < 3; ++i) {
    std::complex<double> z = es.eigenvalues()(i);
    if (std::abs(z.imag()) <= 1e-9 * (1.0 + std::abs(z.real())))
      nodes.push_back(z.real());
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end(),
                          [](double a, double b) {
                            return std::abs(a - b) <=
                                   1e-10 * (1.0 + std::abs(a) + std::abs(b));
                          }),
              nodes.end());

  IntervalSet sing;
  for (double la : nodes) sing.insert_point(la);
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
    if (Q(0.5 * (nodes[i] + nodes[i + 1])) > 0.0)
      sing.insert(nodes[i], nodes[i + 1]);
  an.singular.assign(sing.intervals().begin(), sing.intervals().end());

  // Membership of lambda11 itself: when it is a root of the quadratic factor
  // (but not of the linear one), both eigenvalue branches of the regular
  // part have finite boundary limits and lambda11 is one of them; otherwise
  // it is a limit point of the singular set.
  const double quad11 = (an.lambda11 - an.K1) * an.lambda11 + an.K2;
  const double quad_scale =
      an.lambda11 * an.lambda11 + std::abs(an.K1 * an.lambda11) + std::abs(an.K2);
  const bool quad_zero = std::abs(quad11) <= zero_tol(quad_scale);
  const bool phi_hit =
      std::abs(an.lambda11 - an.phi0) <=
      zero_tol(std::abs(an.lambda11) + std::abs(an.phi0));
  an.lambda11_status =
      (!phi_hit && quad_zero) ? "in-regular" : "in-singular-closure";
  return bd;
}

// ---------------------------------------------------------------------------
// Lane-Emden internals
// ---------------------------------------------------------------------------

// Launch offset in units of the scaled radius: far enough from the removable
// singularity at 0 for the right-hand side to be tame, close enough that the
// truncated series is exact to ~1e-21.
constexpr double kSeriesXi = 1e-3;

struct LEState {
  double theta, v;
};

struct HermitePiece {
  double t0, h, y0, m0, y1, m1;

  double value(double t) const {
    double s = (t - t0) / h;
    return (2 * s * s * s - 3 * s * s + 1) * y0 +
           h * (s * s * s - 2 * s * s + s) * m0 +
           (-2 * s * s * s + 3 * s * s) * y1 + h * (s * s * s - s * s) * m1;
  }
  double d1(double t) const {
    double s = (t - t0) / h;
    return (6 * s * s - 6 * s) / h * y0 + (3 * s * s - 4 * s + 1) * m0 +
           (6 * s - 6 * s * s) / h * y1 + (3 * s * s - 2 * s) * m1;
  }
  double d2(double t) const {
    double s = (t - t0) / h;
    return (12 * s - 6) / (h * h) * y0 + (6 * s - 4) / h * m0 +
           (6 - 12 * s) / (h * h) * y1 + (6 * s - 2) / h * m1;
  }
};

}  // namespace

NoZeroError::NoZeroError(double n_poly_, double t_max_)
    : NumericError("theta stayed positive up to t = " + format_double(t_max_) +
                   " for polytropic index " + format_double(n_poly_) +
                   ": indices at or near 5 admit no surface"),
      n_poly(n_poly_),
      t_max(t_max_) {}

LaneEmdenSolution::LaneEmdenSolution(double n_poly, double alpha_n,
                                     double t_start, std::vector<Node> nodes)
    : n_poly_(n_poly), alpha_n_(alpha_n), t_start_(t_start),
      nodes_(std::move(nodes)) {
  if (nodes_.size() < 2)
    throw NumericError("Lane-Emden solution needs at least two nodes");
}

LaneEmdenSolution::Piece LaneEmdenSolution::eval(double t) const {
  if (t < 0.0)
    throw DomainError("Lane-Emden solution queried at negative radius");
  if (t < t_start_) {
    // Series about the centre; the next omitted term is O(xi^6).
    const double xi = t / alpha_n_;
    const double ia = 1.0 / alpha_n_;
    return {1.0 - xi * xi / 6.0 + n_poly_ * xi * xi * xi * xi / 120.0,
            ia * (-xi / 3.0 + n_poly_ * xi * xi * xi / 30.0),
            ia * ia * (-1.0 / 3.0 + n_poly_ * xi * xi / 10.0)};
  }
  const double R = nodes_.back().t;
  if (!(t <= R * (1.0 + 1e-12)))
    throw DomainError("Lane-Emden solution queried beyond the surface R = " +
                      format_double(R));
  auto it = std::upper_bound(
      nodes_.begin(), nodes_.end(), t,
      [](double v, const Node& n) { return v < n.t; });
  std::size_t hi = std::min<std::size_t>(
      std::max<std::ptrdiff_t>(it - nodes_.begin(), 1), nodes_.size() - 1);
  const Node& a = nodes_[hi - 1];
  const Node& b = nodes_[hi];
  HermitePiece pc{a.t, b.t - a.t, a.theta, a.theta_d1, b.theta, b.theta_d1};
  // The curvature channel gets its own interpolant: theta'' and theta''' at
  // the nodes are exact functions of the stored (theta, theta') through the
  // equation, and a Hermite cubic of theta'' sidesteps the eps/h^2 rounding
  // floor that differentiating the displacement cubic twice runs into.
  const double ia2 = 1.0 / (alpha_n_ * alpha_n_);
  auto curvature = [&](const Node& nd) -> std::array<double, 2> {
    const double th = nd.theta > 0.0 ? nd.theta : 0.0;
    const double k = -2.0 * nd.theta_d1 / nd.t - std::pow(th, n_poly_) * ia2;
    // d/dt of theta^n blows up at the surface for 0 < n < 1; the clamped
    // slope only degrades the final sub-step there.
    double pw = 0.0;
    if (n_poly_ > 0.0 && (th > 0.0 || n_poly_ >= 1.0))
      pw = n_poly_ * std::pow(th, n_poly_ - 1.0) * nd.theta_d1 * ia2;
    const double kd = -2.0 * k / nd.t + 2.0 * nd.theta_d1 / (nd.t * nd.t) - pw;
    return {k, kd};
  };
  const std::array<double, 2> c0 = curvature(a);
  const std::array<double, 2> c1 = curvature(b);
  HermitePiece kc{a.t, b.t - a.t, c0[0], c0[1], c1[0], c1[1]};
  return {pc.value(t), pc.d1(t), kc.value(t)};
}

double LaneEmdenSolution::theta(double t) const { return eval(t).value; }

double LaneEmdenSolution::theta_d1(double t) const { return eval(t).d1; }

double LaneEmdenSolution::ode_residual(double t) const {
  Piece p = eval(t);
  const double base = p.value > 0.0 ? p.value : 0.0;
  return std::abs(p.d2 + 2.0 * p.d1 / t +
                  std::pow(base, n_poly_) / (alpha_n_ * alpha_n_));
}

LaneEmdenSolution lane_emden(double n_poly, double alpha_n,
                             const LaneEmdenOptions& opt) {
  if (!(n_poly >= 0.0 && n_poly <= 5.0))
    throw ModelError("polytropic index must lie in [0, 5]");
  if (!(alpha_n > 0.0))
    throw ModelError("Lane-Emden unit length must be positive");
  if (!(opt.rtol > 0.0) || !(opt.atol > 0.0) || !(opt.h_max > 0.0))
    throw ModelError("Lane-Emden tolerances and step cap must be positive");
  const double t_max = opt.t_max > 0.0 ? opt.t_max : 50.0 * alpha_n;
  const double t0 = kSeriesXi * alpha_n;
  if (!(t_max > t0))
    throw ModelError("t_max must exceed the series launch point " +
                     format_double(t0));

  const double inv_a2 = 1.0 / (alpha_n * alpha_n);
  auto rhs = [n_poly, inv_a2](double t, LEState y) -> LEState {
    const double base = y.theta > 0.0 ? y.theta : 0.0;
    return {y.v, -2.0 * y.v / t - std::pow(base, n_poly) * inv_a2};
  };

  // Dormand-Prince 5(4) pair.
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                          a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695,
                          e4 = 393.0 / 640, e5 = -92097.0 / 339200,
                          e6 = 187.0 / 2100, e7 = 1.0 / 40;

  // The dense output interpolates each step with a cubic Hermite polynomial,
  // whose second-derivative error scales with (h / alpha_n)^2; capping h in
  // units of alpha_n keeps the interpolant's equation residual ~1e-9.
  const double h_cap = opt.h_max * alpha_n;

  double t = t0;
  LEState y{1.0 - kSeriesXi * kSeriesXi / 6.0 +
                n_poly * kSeriesXi * kSeriesXi * kSeriesXi * kSeriesXi / 120.0,
            (-kSeriesXi / 3.0 + n_poly * kSeriesXi * kSeriesXi * kSeriesXi / 30.0) /
                alpha_n};

  std::vector<LaneEmdenSolution::Node> nodes;
  nodes.reserve(std::size_t((t_max - t0) / h_cap) + 16);
  nodes.push_back({t, y.theta, y.v});

  double h = h_cap;
  while (t_max - t > 1e-12 * t_max) {
    const double hs = std::min(h, t_max - t);

    LEState k1 = rhs(t, y);
    LEState k2 = rhs(t + hs * a21, {y.theta + hs * a21 * k1.theta,
                                    y.v + hs * a21 * k1.v});
    LEState k3 = rhs(t + hs * 0.3, {y.theta + hs * (a31 * k1.theta + a32 * k2.theta),
                                    y.v + hs * (a31 * k1.v + a32 * k2.v)});
    LEState k4 = rhs(t + hs * 0.8,
                     {y.theta + hs * (a41 * k1.theta + a42 * k2.theta + a43 * k3.theta),
                      y.v + hs * (a41 * k1.v + a42 * k2.v + a43 * k3.v)});
    LEState k5 = rhs(t + hs * (8.0 / 9),
                     {y.theta + hs * (a51 * k1.theta + a52 * k2.theta +
                                      a53 * k3.theta + a54 * k4.theta),
                      y.v + hs * (a51 * k1.v + a52 * k2.v + a53 * k3.v + a54 * k4.v)});
    LEState k6 = rhs(t + hs,
                     {y.theta + hs * (a61 * k1.theta + a62 * k2.theta + a63 * k3.theta +
                                      a64 * k4.theta + a65 * k5.theta),
                      y.v + hs * (a61 * k1.v + a62 * k2.v + a63 * k3.v + a64 * k4.v +
                                  a65 * k5.v)});
    LEState y5{y.theta + hs * (b1 * k1.theta + b3 * k3.theta + b4 * k4.theta +
                               b5 * k5.theta + b6 * k6.theta),
               y.v + hs * (b1 * k1.v + b3 * k3.v + b4 * k4.v + b5 * k5.v + b6 * k6.v)};
    LEState k7 = rhs(t + hs, y5);
    const double err_th = y5.theta - (y.theta + hs * (e1 * k1.theta + e3 * k3.theta +
                                                      e4 * k4.theta + e5 * k5.theta +
                                                      e6 * k6.theta + e7 * k7.theta));
    const double err_v =
        y5.v - (y.v + hs * (e1 * k1.v + e3 * k3.v + e4 * k4.v + e5 * k5.v +
                            e6 * k6.v + e7 * k7.v));
    const double sc_th = opt.atol + opt.rtol * std::max(std::abs(y.theta),
                                                        std::abs(y5.theta));
    const double sc_v =
        opt.atol + opt.rtol * std::max(std::abs(y.v), std::abs(y5.v));
    const double err = std::sqrt(0.5 * ((err_th / sc_th) * (err_th / sc_th) +
                                        (err_v / sc_v) * (err_v / sc_v)));

    if (err <= 1.0) {
      const double tn = t + hs;
      if (y5.theta <= 0.0) {
        // Crossed the surface inside this step: bisect the dense-output
        // cubic, which is accurate to the integrator's own order here.
        HermitePiece pc{t, hs, y.theta, y.v, y5.theta, y5.v};
        double lo = t, hi = tn;
        for (;;) {
          const double mid = 0.5 * (lo + hi);
          if (!(lo < mid && mid < hi)) break;  // interval is one ulp wide
          (pc.value(mid) > 0.0 ? lo : hi) = mid;
        }
        nodes.push_back({hi, pc.value(hi), pc.d1(hi)});
        return LaneEmdenSolution(n_poly, alpha_n, t0, std::move(nodes));
      }
      nodes.push_back({tn, y5.theta, y5.v});
      t = tn;
      y = y5;
    } else if (hs <= 1e-14 * std::max(1.0, t)) {
      throw NumericError("Lane-Emden step size underflow at t = " +
                         format_double(t));
    }
    h = std::min(h_cap,
                 hs * std::clamp(0.9 * std::pow(std::max(err, 1e-30), -0.2),
                                 0.2, 5.0));
  }
  throw NoZeroError(n_poly, t_max);
}

// ---------------------------------------------------------------------------
// Public builders
// ---------------------------------------------------------------------------

ExampleAAnalysis analyze_example_a(const ExampleAParams& params) {
  return analyze_a(parse_a(params));
}

CoefficientModel example_a(const ExampleAParams& params) {
  ParsedA pa = parse_a(params);
  ExampleAAnalysis an = analyze_a(pa);

  CoefficientModel m;
  m.alpha = 0.0;
  m.beta = 1.0;
  m.dim = 1;
  m.name = "example-a";
  m.p = [e = pa.rho](double t) { return truncate<4>(reflected<5>(e, t)); };
  m.q = [e = pa.phi](double t) { return truncate<4>(reflected<5>(e, t)); };
  m.b = {[re = pa.psi_re, im = pa.psi_im](double t) {
    auto omt = 1.0 - Jet<double, 5>::variable(t);
    // conj(psi)(1-t) / (1-t)
    return complex_jet(truncate<4>(reflected<5>(re, t) / omt),
                       truncate<4>(-reflected<5>(im, t) / omt));
  }};
  m.c = {[](double) { return CJet4{}; }};
  m.D_low = {{[e = pa.m](double t) {
    auto omt = 1.0 - Jet<double, 5>::variable(t);
    return real_only(truncate<4>(reflected<5>(e, t) / (omt * omt)));
  }}};

  auto cf = std::make_shared<ClosedFormLimits>();
  cf->case_kind = an.kind;
  cf->pi0 = [v = an.pi0](double) { return v; };
  cf->pi1 = [v = an.pi1](double) { return v; };
  cf->lambda_beta_points = std::vector<double>{};
  cf->j0 = 0;
  cf->radius = an.radius;
  if (an.kind == CaseKind::III) {
    cf->pi2 = [c2 = 0.5 * an.F2, r0 = an.rho0, m0 = an.m0](double la) {
      return (c2 - la * r0) / m0;
    };
    cf->r1 = [](double) { return 0.0; };
    cf->kappa0 = [p0 = an.phi0](double la) { return p0 - la; };
    cf->case3_intervals = std::vector<Interval>{an.singular};
  }
  m.closed_form = cf;
  validate_model(m);
  return m;
}

ExampleBAnalysis analyze_example_b(const ExampleBParams& params) {
  return analyze_b(parse_b(params)).pub;
}

CoefficientModel example_b(const ExampleBParams& params) {
  ParsedB pb = parse_b(params);
  BData bd = analyze_b(pb);
  const ExampleBAnalysis& an = bd.pub;

  CoefficientModel m;
  m.alpha = 0.0;
  m.beta = 1.0;
  m.dim = 2;
  m.name = "example-b";
  m.p = [e = pb.vartheta](double t) { return truncate<4>(reflected<5>(e, t)); };
  // q carries the weight correction (1/2) d/dt [vartheta/(1-t)]
  //   + vartheta / (4 (1-t)^2) on top of the potential.
  m.q = [ph = pb.phi, th = pb.vartheta](double t) {
    auto omt = 1.0 - Jet<double, 5>::variable(t);
    auto thj = reflected<5>(th, t);
    return truncate<4>(reflected<5>(ph, t)) + 0.5 * derivative(thj / omt) +
           0.25 * truncate<4>(thj / (omt * omt));
  };
  m.b = {[e = pb.beta1](double t) {
           auto omt = 1.0 - Jet4::variable(t);
           return complex_jet(Jet4{}, -(reflected<4>(e, t) / omt));
         },
         [e = pb.beta2](double t) {
           return complex_jet(Jet4{}, -reflected<4>(e, t));
         }};
  m.c = {[b1 = pb.beta1, gr = pb.gamma_re, gi = pb.gamma_im](double t) {
           auto omt = 1.0 - Jet4::variable(t);
           // conj(gamma) + i beta1 / (2 (1-t)^2)
           return complex_jet(reflected<4>(gr, t),
                              reflected<4>(b1, t) / (2.0 * omt * omt) -
                                  reflected<4>(gi, t));
         },
         [b2 = pb.beta2](double t) {
           auto omt = 1.0 - Jet4::variable(t);
           return complex_jet(Jet4{}, reflected<4>(b2, t) / (2.0 * omt));
         }};
  m.D_low = {{[e = pb.delta11](double t) {
               auto omt = 1.0 - Jet4::variable(t);
               return real_only(reflected<4>(e, t) / (omt * omt));
             }},
             {[re = pb.delta12_re, im = pb.delta12_im](double t) {
                auto omt = 1.0 - Jet4::variable(t);
                // row 1, column 0 holds conj(delta12) / (1-t)
                return complex_jet(reflected<4>(re, t) / omt,
                                   -(reflected<4>(im, t) / omt));
              },
              [e = pb.delta22](double t) {
                return real_only(reflected<4>(e, t));
              }}};

  auto cf = std::make_shared<ClosedFormLimits>();
  cf->case_kind = an.kind;
  cf->lambda_beta_points = std::vector<double>{an.lambda11};
  cf->j0 = 1;
  // pi(., lambda) -> (Phi - Psi lambda) / Xi1 with Xi1 = delta11(0)
  // (lambda11 - lambda); the first-order coefficient follows by one more
  // term of the same expansion.  Off lambda11 only.
  cf->pi0 = [f0 = an.Phi_beta, s0 = an.Psi_beta, d0 = an.delta11_0,
             l11 = an.lambda11](double la) {
    return (f0 - s0 * la) / (d0 * (l11 - la));
  };
  cf->pi1 = [f0 = an.Phi_beta, s0 = an.Psi_beta, f1 = an.Phi_d1_beta,
             s1 = an.Psi_d1_beta, w1 = bd.Wt1, d1x = bd.d11t1,
             d0 = an.delta11_0, l11 = an.lambda11](double la) {
    const double xi1 = d0 * (l11 - la);
    const double pi0v = (f0 - s0 * la) / xi1;
    return (f1 - s1 * la - pi0v * (w1 - la * d1x)) / xi1;
  };
  if (an.kind == CaseKind::III) {
    cf->pi2 = [g = an.g_beta, k1 = an.K1, k2 = an.K2,
               l11 = an.lambda11](double la) {
      return g * ((la - k1) * la + k2) / (l11 - la);
    };
    cf->r1 = [v = an.r1](double) { return v; };
    cf->kappa0 = [p0 = an.phi0, g = an.g_beta, k1 = an.K1, k2 = an.K2,
                  l11 = an.lambda11](double la) {
      return p0 - la - 0.25 * g * ((la - k1) * la + k2) / (l11 - la);
    };
    cf->case3_intervals = an.singular;
    cf->exceptional_status = {{an.lambda11, an.lambda11_status}};
  } else {
    // Cases I and II: the singular part is empty while the branch of D that
    // escapes makes the regular part unbounded.
    cf->radius = kInf;
  }
  m.closed_form = cf;
  validate_model(m);
  return m;
}

CoefficientModel stellar_model(const StellarParams& params,
                               const LaneEmdenOptions& opt) {
  if (!(params.n_poly > 0.0 && params.n_poly < 5.0))
    throw ModelError("polytropic index must lie in (0, 5)");
  if (!(params.alpha_n > 0.0) || !(params.Gamma1 > 0.0) ||
      !(params.p_c > 0.0) || !(params.rho_c > 0.0))
    throw ModelError(
        "alpha_n, Gamma1, p_c and rho_c must all be positive");
  if (params.l < 1)
    throw ModelError("the harmonic degree l must be a positive integer");

  auto sol = std::make_shared<const LaneEmdenSolution>(
      lane_emden(params.n_poly, params.alpha_n, opt));
  if (!(sol->R() > 1.0))
    throw ModelError("the polytrope surface R = " + format_double(sol->R()) +
                     " must lie beyond the inner cutoff t = 1; enlarge "
                     "alpha_n");

  const double n = params.n_poly;
  const double g1 = params.Gamma1;
  const double K = params.Gamma1 * params.p_c / params.rho_c;
  const double cl = std::sqrt(double(params.l) * (params.l + 1));
  const double pc = params.p_c;
  const double rc = params.rho_c;

  CoefficientModel m;
  m.alpha = 1.0;
  m.beta = sol->R();
  m.dim = 1;
  m.name = "stellar";

  // Sound-speed weight Gamma1 p / rho = K theta.
  m.p = [sol, K](double t) { return K * sol->theta_jet<4>(t); };

  // Acoustic potential: (4 - 3 Gamma1) p' / (t rho)
  //   + (1 / (t^2 sqrt(rho))) (Gamma1 (p/rho) (t^2 sqrt(rho))')'.
  // Built from theta jets whose higher coefficients come from the equation
  // itself, so the nested derivatives are exact.
  m.q = [sol, n, g1, pc, rc](double t) {
    auto u = sol->theta_jet<6>(t);
    auto tj = Jet<double, 6>::variable(t);
    auto rho = rc * pow(u, n);
    auto pres = pc * pow(u, n + 1.0);
    auto term1 = ((4.0 - 3.0 * g1) * derivative(pres)) / truncate<5>(tj * rho);
    auto w = tj * tj * sqrt(rho);
    auto inner = (g1 * pc / rc) * (truncate<5>(u) * derivative(w));
    auto term2 = derivative(inner) / truncate<4>(w);
    return truncate<4>(term1) + term2;
  };

  // b = -c_l K theta / t.
  m.b = {[sol, K, cl](double t) {
    auto u = sol->theta_jet<4>(t);
    auto tj = Jet4::variable(t);
    return real_only(-cl * K * (u / tj));
  }};

  // c = (c_l K theta / t) (rho'/rho - p'/(Gamma1 p) - (t^2 rho)'/(2 t^2 rho))
  //   = (c_l K theta / t) ((n/2 - (n+1)/Gamma1) theta'/theta - 1/t),
  // collapsing the logarithmic derivatives through the equation of state.
  m.c = {[sol, n, g1, K, cl](double t) {
    auto u = sol->theta_jet<5>(t);
    auto tj = Jet<double, 5>::variable(t);
    auto p2 = cl * K * (u / tj);
    auto fac = (n / 2.0 - (n + 1.0) / g1) * (derivative(u) / truncate<4>(u)) -
               Jet4::constant(1.0) / truncate<4>(tj);
    return real_only(truncate<4>(p2) * fac);
  }};

  // D = c_l^2 K theta / t^2.
  m.D_low = {{[sol, K, cl](double t) {
    auto u = sol->theta_jet<4>(t);
    auto tj = Jet4::variable(t);
    return real_only(cl * cl * K * (u / (tj * tj)));
  }}};

  // The family is degenerate in the best way: D - b b^* / p vanishes
  // identically, so the regular part is {0}, and pi -> 0 with the constant
  // slope K theta'(R) < 0 at the surface (valid off the branch limit 0).
  auto cf = std::make_shared<ClosedFormLimits>();
  cf->case_kind = CaseKind::II;
  cf->pi0 = [](double) { return 0.0; };
  cf->pi1 = [v = K * sol->theta_d1(sol->R())](double) { return v; };
  cf->lambda_beta_points = std::vector<double>{0.0};
  cf->j0 = 1;
  cf->radius = 0.0;
  cf->exceptional_status = {{0.0, "in-regular"}};
  m.closed_form = cf;
  validate_model(m);
  return m;
}

}  // namespace esspec
