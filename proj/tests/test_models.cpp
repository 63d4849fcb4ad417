// Tests for the generating families: the scalar and 2x2 boundary-singular
// operators with closed-form boundary data, and the polytropic stellar
// oscillation operator driven by the Lane-Emden solver.
//
// The closed-form side channel of each family is an independent oracle for
// the numeric asymptotic pipeline, so most cases here check both routes
// against each other on top of pinned hand-computed values.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <esspec/asymptotics.hpp>
#include <esspec/errors.hpp>
#include <esspec/expr.hpp>
#include <esspec/models.hpp>
#include <esspec/regular.hpp>
#include <esspec/schur.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <string>

using namespace esspec;

namespace {

// Numeric literal spliced into a profile string; parenthesised so negative
// values survive adjacent operators.
std::string num(double v) { return "(" + format_double(v) + ")"; }

ExampleAParams unit_a() { return {"1", "1", "1", "", "5"}; }

ExampleBParams unit_b() {
  ExampleBParams pr;
  pr.vartheta = "1";
  pr.delta11 = "1";
  pr.delta22 = "1";
  pr.delta12_re = "1";
  pr.beta1 = "1";
  pr.beta2 = "1";
  pr.gamma_re = "1";
  pr.phi = "0";
  return pr;
}

AsymOptions no_closed_form() {
  AsymOptions opt;
  opt.use_closed_form = false;
  return opt;
}

// |a - b| <= tol * (1 + |b|): absolute near zero, relative for large values.
void check_close(double a, double b, double tol) {
  CHECK(std::abs(a - b) <= tol * (1.0 + std::abs(b)));
}

}  // namespace

TEST_CASE("Lane-Emden: closed-form surfaces and scaling") {
  // n = 1 has theta(xi) = sin(xi)/xi, so the first zero is pi; n = 0 gives
  // theta = 1 - xi^2/6 with zero at sqrt(6).  alpha rescales t linearly.
  LaneEmdenSolution s1 = lane_emden(1.0, 1.0);
  CHECK(std::abs(s1.R() - M_PI) <= 1e-8);

  LaneEmdenSolution s0 = lane_emden(0.0, 1.0);
  CHECK(std::abs(s0.R() - std::sqrt(6.0)) <= 1e-8);

  LaneEmdenSolution s2 = lane_emden(1.0, 2.0);
  CHECK(std::abs(s2.R() - 2.0 * M_PI) <= 2e-8);

  // Pointwise profile values for n = 1 against the analytic solution.
  CHECK(std::abs(s1.theta(1.0) - std::sin(1.0)) <= 1e-9);
  CHECK(std::abs(s1.theta_d1(1.0) - (std::cos(1.0) - std::sin(1.0))) <= 1e-9);
}

TEST_CASE("Lane-Emden: no surface at the critical index") {
  LaneEmdenOptions opt;
  opt.t_max = 30.0;
  try {
    (void)lane_emden(5.0, 1.0, opt);
    CHECK(false);
  } catch (const NoZeroError& e) {
    CHECK(e.n_poly == doctest::Approx(5.0));
    CHECK(e.t_max == doctest::Approx(30.0));
    CHECK(std::string(e.what()).find("no surface") != std::string::npos);
  }
}

TEST_CASE("Lane-Emden: argument validation") {
  CHECK_THROWS_AS((void)lane_emden(-0.1, 1.0), ModelError);
  CHECK_THROWS_AS((void)lane_emden(5.1, 1.0), ModelError);
  CHECK_THROWS_AS((void)lane_emden(1.0, 0.0), ModelError);
  LaneEmdenOptions bad;
  bad.rtol = 0.0;
  CHECK_THROWS_AS((void)lane_emden(1.0, 1.0, bad), ModelError);
}

TEST_CASE("Lane-Emden: dense output satisfies the equation") {
  LaneEmdenSolution s = lane_emden(3.0, 1.0);
  CHECK(s.R() > 6.0);  // known first zero near 6.897

  std::mt19937 rng(20240811u);
  std::uniform_real_distribution<double> u(s.t_start(), s.R() * (1.0 - 1e-9));
  for (int i = 0; i < 2000; ++i) {
    double t = u(rng);
    CHECK(s.ode_residual(t) <= 1e-8);
  }

  // The profile decreases strictly from the centre to the surface and stays
  // positive inside.
  double prev = s.theta(s.t_start());
  for (int i = 1; i <= 500; ++i) {
    double t = s.t_start() + (s.R() - s.t_start()) * double(i) / 500.0;
    double v = s.theta(t);
    CHECK(v < prev);
    if (i < 500) CHECK(v > 0.0);
    prev = v;
  }
  CHECK(std::abs(s.theta(s.R())) <= 1e-10);
  CHECK(s.theta_d1(s.R()) < 0.0);

  // Simple-zero boundary factor: (t - R) theta' / theta -> 1 at the surface.
  for (double frac : {1e-5, 1e-6}) {
    double t = s.R() * (1.0 - frac);
    double ratio = (t - s.R()) * s.theta_d1(t) / s.theta(t);
    CHECK(std::abs(ratio - 1.0) <= 1e-4);
  }

  CHECK_THROWS_AS((void)s.theta(s.R() * 1.01), DomainError);
  CHECK_THROWS_AS((void)s.theta(-1.0), DomainError);
}

TEST_CASE("Lane-Emden: jet evaluation matches analytic derivatives") {
  // For n = 1 compare the ODE-recursion jet with the jet of sin(t)/t.
  LaneEmdenSolution s = lane_emden(1.0, 1.0);
  Expr ref = parse_expr("sin(t)/t");
  for (double t : {0.7, 1.3, 2.2, 3.0}) {
    Jet<double, 6> got = s.theta_jet<6>(t);
    Jet<double, 6> want = eval_jet<6>(ref, t);
    for (int k = 0; k <= 6; ++k) {
      CHECK(std::abs(got.a[k] - want.a[k]) <= 1e-9 * (1.0 + std::abs(want.a[k])));
    }
  }

  // Fractional index exercises the non-integer power in the recursion; the
  // second jet coefficient must reproduce the equation itself.
  LaneEmdenSolution sf = lane_emden(1.5, 1.0);
  double t = 1.1;
  Jet<double, 4> j = sf.theta_jet<4>(t);
  double lhs = 2.0 * j.a[2];
  double rhs = -2.0 * j.a[1] / t - std::pow(j.a[0], 1.5);
  CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(rhs)));
}

TEST_CASE("scalar family: unit coefficients give the pinned case III data") {
  ExampleAAnalysis an = analyze_example_a(unit_a());
  CHECK(an.kind == CaseKind::III);
  CHECK(an.pi0 == 0.0);
  CHECK(an.pi1 == 0.0);
  CHECK(an.F0 == doctest::Approx(0.0));
  CHECK(an.delta0 == doctest::Approx(0.0));
  CHECK(an.hull_point == doctest::Approx(4.0));
  CHECK(an.singular.lo == doctest::Approx(0.0));
  CHECK(an.singular.hi == doctest::Approx(4.0));
  CHECK(an.radius == doctest::Approx(4.0));

  CoefficientModel m = example_a(unit_a());
  CHECK(m.dim == 1);
  CHECK(m.beta_finite());
  REQUIRE(m.closed_form != nullptr);
  const ClosedFormLimits& cf = *m.closed_form;
  REQUIRE(cf.case_kind.has_value());
  CHECK(*cf.case_kind == CaseKind::III);
  CHECK(cf.pi2(2.0) == doctest::Approx(-2.0));
  CHECK(cf.r1(2.0) == doctest::Approx(0.0));
  CHECK(cf.kappa0(2.0) == doctest::Approx(3.0));
  REQUIRE(cf.radius.has_value());
  CHECK(*cf.radius == doctest::Approx(4.0));
  REQUIRE(cf.case3_intervals.has_value());
  REQUIRE(cf.case3_intervals->size() == 1);
  CHECK((*cf.case3_intervals)[0].lo == doctest::Approx(0.0));
  CHECK((*cf.case3_intervals)[0].hi == doctest::Approx(4.0));

  // Coefficient spot values: p = 1, q = 5, b = 1/(1-t), D = 1/(1-t)^2.
  CHECK(m.p(0.5).a[0] == doctest::Approx(1.0));
  CHECK(m.q(0.5).a[0] == doctest::Approx(5.0));
  CHECK(m.b[0](0.5).a[0].real() == doctest::Approx(2.0));
  CHECK(m.b[0](0.5).a[0].imag() == doctest::Approx(0.0));
  CHECK(m.D_value(0.5)(0, 0).real() == doctest::Approx(4.0));

  // The numeric asymptotic route must agree with the closed form.
  AsymCoeffs a = asym_coeffs(m, 2.0, no_closed_form());
  CHECK(a.pi0.reliable(1e-5));
  check_close(a.pi0.value, 0.0, 1e-5);
  check_close(a.pi1.value, 0.0, 1e-5);
  check_close(a.pi2.value, -2.0, 1e-5);
  check_close(a.r1.value, 0.0, 1e-6);
  check_close(a.varkappa0.value, 3.0, 1e-5);
  CaseTag tag = classify_case(m, a, no_closed_form());
  CHECK(tag.kind == CaseKind::III);

  // With the side channel enabled the classification is pinned analytically.
  CaseTag fixed = classify_case(m, 2.0);
  CHECK(fixed.kind == CaseKind::III);
  CHECK(fixed.detail.find("analytically") != std::string::npos);
}

TEST_CASE("scalar family: case I and case II closed forms") {
  // rho = 2 keeps F(0) = rho*m - |psi|^2 = 1 away from zero: case I with
  // pi0 = 1 and an unbounded branch curve, so the regular part is a ray.
  ExampleAParams p1{"2", "1", "1", "", "5"};
  ExampleAAnalysis a1 = analyze_example_a(p1);
  CHECK(a1.kind == CaseKind::I);
  CHECK(a1.F0 == doctest::Approx(1.0));
  CHECK(a1.pi0 == doctest::Approx(1.0));
  CHECK(a1.pi1 == doctest::Approx(0.0));
  CHECK(std::isinf(a1.radius));

  CoefficientModel m1 = example_a(p1);
  IntervalSet reg = regular_part(m1);
  REQUIRE(reg.size() == 1);
  CHECK(reg[0].lo == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(reg.unbounded());

  // m = 1 + x vanishes nowhere but makes F(0) = 0 with F'(0) = 1: case II.
  ExampleAParams p2{"1", "1+t", "1", "", "5"};
  ExampleAAnalysis a2 = analyze_example_a(p2);
  CHECK(a2.kind == CaseKind::II);
  CHECK(a2.pi0 == 0.0);
  CHECK(a2.pi1 == doctest::Approx(-1.0));
  CHECK(std::isinf(a2.radius));

  CoefficientModel m2 = example_a(p2);
  AsymCoeffs a = asym_coeffs(m2, 2.0, no_closed_form());
  check_close(a.pi0.value, 0.0, 1e-6);
  check_close(a.pi1.value, -1.0, 1e-4);
  CHECK(classify_case(m2, a, no_closed_form()).kind == CaseKind::II);
}

TEST_CASE("scalar family: input validation") {
  try {
    (void)example_a({"t - 2", "1", "1", "", "0"});
    CHECK(false);
  } catch (const ModelError& e) {
    CHECK(std::string(e.what()).find("rho") != std::string::npos);
  }
  try {
    (void)example_a({"1", "t", "1", "", "0"});
    CHECK(false);
  } catch (const ModelError& e) {
    CHECK(std::string(e.what()).find("m(0)") != std::string::npos);
  }
  try {
    (void)example_a({"1 +", "1", "1", "", "0"});
    CHECK(false);
  } catch (const ModelError& e) {
    CHECK(std::string(e.what()).find("while parsing rho") != std::string::npos);
  }
  // A profile that dips to zero inside the interval is rejected even though
  // both endpoint values are positive.
  CHECK_THROWS_AS((void)example_a({"1 - 4*t*(1 - t)", "1", "1", "", "0"}),
                  ModelError);
}

TEST_CASE("scalar family: randomized agreement with the numeric classifier") {
  std::mt19937 rng(907151u);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  std::uniform_real_distribution<double> w(-0.4, 0.4);
  for (int i = 0; i < 20; ++i) {
    const int kind = i % 3;
    double r0 = u(rng), r1c = w(rng) * r0;       // rho = r0 + r1*x > 0
    double c0 = u(rng);                          // m(0) > 0
    double ph = u(rng) - 1.25;
    ExampleAParams pr;
    pr.rho = num(r0) + "+" + num(r1c) + "*t";
    pr.m = num(c0);
    pr.phi = num(ph);
    if (kind == 0) {
      // Generic constants; redraw psi until F(0) is safely nonzero.
      double ps = u(rng);
      while (std::abs(r0 * c0 - ps * ps) < 0.05) ps = u(rng);
      pr.psi_re = num(ps);
    } else if (kind == 1) {
      // |psi(0)|^2 = rho(0) m(0) kills F(0) but rho' m(0) keeps F'(0) alive.
      if (std::abs(r1c) < 0.1) r1c = 0.3, pr.rho = num(r0) + "+" + num(r1c) + "*t";
      pr.psi_re = num(std::sqrt(r0 * c0));
    } else {
      // |psi|^2 = rho m identically: F vanishes to all orders.
      pr.psi_re = "sqrt((" + pr.rho + ")*" + num(c0) + ")";
    }
    ExampleAAnalysis an = analyze_example_a(pr);
    CHECK(an.kind == (kind == 0 ? CaseKind::I
                                : (kind == 1 ? CaseKind::II : CaseKind::III)));

    CoefficientModel m = example_a(pr);
    double lambda = -1.0 - 0.5 * double(i % 4);
    CaseTag tag = classify_case(m, lambda, no_closed_form());
    CHECK(tag.kind == an.kind);
  }
}

TEST_CASE("2x2 family: boundary eigenvalue formula") {
  ExampleBParams pr = unit_b();
  pr.delta11 = "2";
  pr.delta22 = "3";
  ExampleBAnalysis an = analyze_example_b(pr);
  // delta22 - |delta12|^2 / delta11 = 3 - 1/2 at the boundary.
  CHECK(std::abs(an.lambda11 - 2.5) <= 1e-8);
  CHECK(an.kind == CaseKind::I);  // A(0) = theta*delta11 - beta1^2 = 1

  CoefficientModel m = example_b(pr);
  REQUIRE(m.closed_form != nullptr);
  REQUIRE(m.closed_form->lambda_beta_points.has_value());
  REQUIRE(m.closed_form->lambda_beta_points->size() == 1);
  CHECK((*m.closed_form->lambda_beta_points)[0] == doctest::Approx(2.5));
  REQUIRE(m.closed_form->j0.has_value());
  CHECK(*m.closed_form->j0 == 1);
}

TEST_CASE("2x2 family: unit coefficients give the pinned case III data") {
  ExampleBAnalysis an = analyze_example_b(unit_b());
  CHECK(an.kind == CaseKind::III);
  CHECK(std::abs(an.lambda11) <= 1e-8);
  CHECK(std::abs(an.K1) <= 1e-8);
  CHECK(std::abs(an.K2) <= 1e-8);
  CHECK(an.g_beta == doctest::Approx(1.0));
  CHECK(an.r1 == doctest::Approx(-1.0));
  // P(lambda) = lambda^3 - lambda, ascending coefficients {0, -1, 0, 1}.
  CHECK(an.P_coeff[0] == doctest::Approx(0.0));
  CHECK(an.P_coeff[1] == doctest::Approx(-1.0));
  CHECK(an.P_coeff[2] == doctest::Approx(0.0));
  CHECK(an.P_coeff[3] == doctest::Approx(1.0));
  // (lambda11 - lambda) P(lambda) = -lambda^2(lambda^2 - 1) >= 0 on [-1, 1].
  REQUIRE(an.singular.size() == 1);
  CHECK(std::abs(an.singular[0].lo - (-1.0)) <= 1e-6);
  CHECK(std::abs(an.singular[0].hi - 1.0) <= 1e-6);
  CHECK(an.lambda11_status == "in-singular-closure");

  CoefficientModel m = example_b(unit_b());
  const ClosedFormLimits& cf = *m.closed_form;
  REQUIRE(cf.exceptional_status.size() == 1);
  CHECK(cf.exceptional_status[0].first == doctest::Approx(0.0));
  CHECK(cf.exceptional_status[0].second == "in-singular-closure");
  CHECK(cf.pi2(-2.0) == doctest::Approx(2.0));
  CHECK(cf.r1(-2.0) == doctest::Approx(-1.0));
  CHECK(cf.kappa0(-2.0) == doctest::Approx(1.5));

  // Coefficient spot values at t = 1/2 from the defining formulas.
  CHECK(m.q(0.5).a[0] == doctest::Approx(3.0));
  CHECK(m.b[0](0.5).a[0] == std::complex<double>(0.0, -2.0));
  CHECK(m.b[1](0.5).a[0] == std::complex<double>(0.0, -1.0));
  CHECK(m.c[0](0.5).a[0] == std::complex<double>(1.0, 2.0));
  CHECK(m.c[1](0.5).a[0] == std::complex<double>(0.0, 1.0));
  CHECK(m.D_value(0.5)(0, 0) == std::complex<double>(4.0, 0.0));
  CHECK(m.D_value(0.5)(1, 0) == std::complex<double>(2.0, 0.0));
  CHECK(m.D_value(0.5)(0, 1) == std::complex<double>(2.0, 0.0));
  CHECK(m.D_value(0.5)(1, 1) == std::complex<double>(1.0, 0.0));

  // Numeric boundary limits agree with the closed form away from the
  // boundary eigenvalue branch (lambda = -2 avoids both D branches).
  AsymCoeffs a = asym_coeffs(m, -2.0, no_closed_form());
  check_close(a.pi2.value, 2.0, 1e-5);
  check_close(a.r1.value, -1.0, 1e-5);
  check_close(a.varkappa0.value, 1.5, 1e-4);
  CHECK(classify_case(m, a, no_closed_form()).kind == CaseKind::III);

  // The numeric branch-limit scan must find the finite limit lambda11 = 0
  // with one proper branch and one improper (divergent) branch.
  LambdaBetaD lb = lambda_beta(m);
  REQUIRE(lb.finite_limits.size() == 1);
  CHECK(std::abs(lb.finite_limits[0]) <= 1e-6);
  CHECK(lb.j0 == 1);
  CHECK(lb.improper == 1);
}

TEST_CASE("2x2 family: input validation") {
  ExampleBParams bad = unit_b();
  bad.vartheta = "t - 2";
  CHECK_THROWS_AS((void)example_b(bad), ModelError);
  bad = unit_b();
  bad.delta11 = "t";
  try {
    (void)example_b(bad);
    CHECK(false);
  } catch (const ModelError& e) {
    CHECK(std::string(e.what()).find("delta11") != std::string::npos);
  }
  bad = unit_b();
  bad.beta2 = "1 +";
  try {
    (void)example_b(bad);
    CHECK(false);
  } catch (const ModelError& e) {
    CHECK(std::string(e.what()).find("while parsing beta2") != std::string::npos);
  }
}

namespace {

// Case III construction: beta1^2 = vartheta * delta11 kills A identically,
// and delta12 is chosen so that C = vartheta*delta12 - beta1*beta2 = t*(..)
// starts with an exact zero.  All profile values stay positive near x = 0.
ExampleBParams random_b_case3(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.3, 1.7);
  double v0 = u(rng);
  double c0 = u(rng);
  double c1 = (u(rng) - 1.0) * 0.25 * c0;
  double b20 = u(rng);
  double d0 = u(rng) - 0.85;
  double e0 = u(rng) - 0.85;
  std::string d11 = num(c0) + "+" + num(c1) + "*t";
  std::string beta1 = "sqrt(" + num(v0) + "*(" + d11 + "))";
  ExampleBParams pr;
  pr.vartheta = num(v0);
  pr.delta11 = d11;
  pr.delta22 = num(u(rng));
  pr.delta12_re = "(" + beta1 + "*" + num(b20) + "+t*" + num(d0) + ")/" + num(v0);
  pr.delta12_im = "t*" + num(e0) + "/" + num(v0);
  pr.beta1 = beta1;
  pr.beta2 = num(b20);
  pr.gamma_re = num(u(rng) - 0.85);
  pr.gamma_im = num(u(rng) - 0.85);
  pr.phi = num(u(rng) - 0.85);
  return pr;
}

// Case II: A(0) = 0 via a constant beta1 matched to delta11(0), but
// delta11' != 0 keeps A'(0) alive; C vanishes identically.
ExampleBParams random_b_case2(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.3, 1.7);
  double v0 = u(rng);
  double c0 = u(rng);
  double c1 = (u(rng) < 1.0 ? -0.3 : 0.4) * c0;
  double b10 = std::sqrt(v0 * c0);
  double b20 = u(rng);
  ExampleBParams pr;
  pr.vartheta = num(v0);
  pr.delta11 = num(c0) + "+" + num(c1) + "*t";
  pr.delta22 = num(u(rng));
  pr.delta12_re = num(b10 * b20 / v0);
  pr.beta1 = num(b10);
  pr.beta2 = num(b20);
  pr.gamma_re = num(u(rng) - 0.85);
  pr.gamma_im = num(u(rng) - 0.85);
  pr.phi = num(u(rng) - 0.85);
  return pr;
}

ExampleBParams random_b_case1(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.3, 1.7);
  ExampleBParams pr;
  double v0 = u(rng);
  double c0 = u(rng);
  double b10 = u(rng);
  while (std::abs(v0 * c0 - b10 * b10) < 0.05) b10 = u(rng);
  pr.vartheta = num(v0);
  pr.delta11 = num(c0);
  pr.delta22 = num(u(rng));
  pr.delta12_re = num(u(rng) - 0.85);
  pr.delta12_im = num(u(rng) - 0.85);
  pr.beta1 = num(b10);
  pr.beta2 = num(u(rng));
  pr.gamma_re = num(u(rng) - 0.85);
  pr.gamma_im = num(u(rng) - 0.85);
  pr.phi = num(u(rng) - 0.85);
  return pr;
}

}  // namespace

TEST_CASE("2x2 family: Schur weight limits distinguish the cases") {
  std::mt19937 rng(48112u);

  for (int i = 0; i < 3; ++i) {
    ExampleBAnalysis a1 = analyze_example_b(random_b_case1(rng));
    CHECK(a1.kind == CaseKind::I);
    CHECK(std::abs(a1.Psi_beta) + std::abs(a1.Phi_beta) > 1e-3);

    ExampleBAnalysis a2 = analyze_example_b(random_b_case2(rng));
    CHECK(a2.kind == CaseKind::II);
    CHECK(std::abs(a2.Psi_beta) <= 1e-10);
    CHECK(std::abs(a2.Phi_beta) <= 1e-10);
    CHECK(std::abs(a2.Psi_d1_beta) > 1e-6);

    ExampleBAnalysis a3 = analyze_example_b(random_b_case3(rng));
    CHECK(a3.kind == CaseKind::III);
    CHECK(std::abs(a3.Psi_beta) <= 1e-10);
    CHECK(std::abs(a3.Phi_beta) <= 1e-10);
    CHECK(std::abs(a3.Psi_d1_beta) <= 1e-8);
    CHECK(std::abs(a3.Phi_d1_beta) <= 1e-8);

    // In case III the quadratic lambda^2 - K1 lambda + K2 is nonpositive at
    // the boundary eigenvalue (it equals -|C'(0)|^2 / vartheta(0)^2).
    double quad = (a3.lambda11 - a3.K1) * a3.lambda11 + a3.K2;
    CHECK(quad <= 1e-12);
  }

  // A(0) = 0 with C(0) != 0 is still case I (the determinant weight
  // Phi(beta) = -|C(0)|^2 / vartheta(0) survives).
  ExampleBParams pr = unit_b();
  pr.delta12_re = "2";  // C(0) = 1*2 - 1*1 = 1, A(0) = 0
  ExampleBAnalysis an = analyze_example_b(pr);
  CHECK(an.kind == CaseKind::I);
  CHECK(std::abs(an.Psi_beta) <= 1e-12);
  CHECK(an.Phi_beta == doctest::Approx(-1.0));
}

TEST_CASE("2x2 family: closed-form limits match the numeric route") {
  std::mt19937 rng(775201u);

  // Case I and II: compare pi0 / pi1 closures with raw extrapolation.
  for (int i = 0; i < 2; ++i) {
    CoefficientModel m1 = example_b(random_b_case1(rng));
    const ClosedFormLimits& cf1 = *m1.closed_form;
    double l1 = (*m1.closed_form->lambda_beta_points)[0] - 1.5 - 0.7 * i;
    AsymCoeffs a1 = asym_coeffs(m1, l1, no_closed_form());
    check_close(a1.pi0.value, cf1.pi0(l1), 1e-5);
    check_close(a1.pi1.value, cf1.pi1(l1), 1e-4);
    CHECK(classify_case(m1, a1, no_closed_form()).kind == CaseKind::I);

    CoefficientModel m2 = example_b(random_b_case2(rng));
    const ClosedFormLimits& cf2 = *m2.closed_form;
    double l2 = (*m2.closed_form->lambda_beta_points)[0] - 1.5 - 0.7 * i;
    AsymCoeffs a2 = asym_coeffs(m2, l2, no_closed_form());
    check_close(a2.pi0.value, 0.0, 1e-5);
    check_close(a2.pi1.value, cf2.pi1(l2), 1e-4);
    CHECK(classify_case(m2, a2, no_closed_form()).kind == CaseKind::II);
  }

  // Case III: the full coefficient set pi2, r1, kappa0.
  for (int i = 0; i < 2; ++i) {
    CoefficientModel m = example_b(random_b_case3(rng));
    const ClosedFormLimits& cf = *m.closed_form;
    for (int j = 0; j < 3; ++j) {
      double l = (*m.closed_form->lambda_beta_points)[0] - 1.5 - 0.7 * j;
      AsymCoeffs a = asym_coeffs(m, l, no_closed_form());
      check_close(a.pi2.value, cf.pi2(l), 1e-4);
      check_close(a.r1.value, cf.r1(l), 1e-4);
      check_close(a.varkappa0.value, cf.kappa0(l), 1e-4);
    }
  }
}

TEST_CASE("2x2 family: singular set matches a direct sign scan") {
  std::mt19937 rng(39977u);
  for (int rep = 0; rep < 3; ++rep) {
    ExampleBAnalysis an = analyze_example_b(random_b_case3(rng));
    REQUIRE(an.kind == CaseKind::III);

    auto P = [&](double l) {
      return ((an.P_coeff[3] * l + an.P_coeff[2]) * l + an.P_coeff[1]) * l +
             an.P_coeff[0];
    };
    auto inside = [&](double l) {
      for (const Interval& iv : an.singular) {
        if (l >= iv.lo - 1e-6 && l <= iv.hi + 1e-6) return true;
      }
      return false;
    };
    for (int i = 0; i <= 4000; ++i) {
      double l = an.lambda11 - 10.0 + 20.0 * double(i) / 4000.0;
      double q = (an.lambda11 - l) * P(l);
      double margin = 1e-7 * (1.0 + std::pow(std::abs(l - an.lambda11), 4));
      if (q > margin) CHECK(inside(l));
      if (q < -margin) CHECK(!inside(l));
    }

    // The boundary eigenvalue always belongs to the singular set closure or
    // is flagged as a regular-part point; either way it carries a status.
    CHECK((an.lambda11_status == "in-singular-closure" ||
           an.lambda11_status == "in-regular"));
    CHECK(inside(an.lambda11));
  }
}

TEST_CASE("stellar model: exact degeneracy of the coefficient block") {
  StellarParams sp;  // n = 3, Gamma1 = 5/3, l = 2, unit scales
  CoefficientModel m = stellar_model(sp);
  CHECK(m.alpha == doctest::Approx(1.0));
  CHECK(m.beta > 6.0);
  CHECK(m.dim == 1);

  // p p3 = |p2|^2 holds exactly, so Delta = D - b b*/p vanishes identically
  // and r = Im(b (D - lambda)^{-1} c) is exactly zero in floating point.
  for (double t : {1.3, 2.7, 4.1, 5.9}) {
    double scale = std::abs(m.D_value(t)(0, 0).real());
    Eigen::MatrixXcd d = delta_matrix(m, t);
    CHECK(std::abs(d(0, 0)) <= 1e-12 * (1.0 + scale));
    SchurPoint spt = schur_point(m, t, -1.0);
    CHECK(spt.r == 0.0);
    CHECK(spt.r_d1 == 0.0);
  }

  // The Schur complement limit: pi -> 0, pi' -> K theta'(R) < 0, case II.
  REQUIRE(m.closed_form != nullptr);
  const ClosedFormLimits& cf = *m.closed_form;
  REQUIRE(cf.case_kind.has_value());
  CHECK(*cf.case_kind == CaseKind::II);
  CHECK(cf.pi0(-1.0) == 0.0);
  CHECK(cf.pi1(-1.0) < 0.0);
  REQUIRE(cf.radius.has_value());
  CHECK(*cf.radius == 0.0);
  REQUIRE(cf.lambda_beta_points.has_value());
  CHECK((*cf.lambda_beta_points)[0] == 0.0);
  REQUIRE(cf.exceptional_status.size() == 1);
  CHECK(cf.exceptional_status[0].second == "in-regular");

  CaseTag tag = classify_case(m, -1.0);
  CHECK(tag.kind == CaseKind::II);

  AsymCoeffs a = asym_coeffs(m, -1.0, no_closed_form());
  check_close(a.pi0.value, 0.0, 1e-6);
  check_close(a.pi1.value, cf.pi1(-1.0), 1e-4);
  CHECK(classify_case(m, a, no_closed_form()).kind == CaseKind::II);

  // Branch curve is identically zero: the regular part is the origin.
  IntervalSet reg = regular_part(m);
  REQUIRE(reg.size() == 1);
  CHECK(std::abs(reg[0].lo) <= 1e-9);
  CHECK(std::abs(reg[0].hi) <= 1e-9);
}

TEST_CASE("stellar model: jet plumbing against finite differences") {
  StellarParams sp;
  CoefficientModel m = stellar_model(sp);
  const double h = 1e-5;
  for (double t : {1.7, 3.2, 5.5}) {
    // d1 of q and c against central differences of their values.
    Jet4 qm = m.q(t - h), q0 = m.q(t), qp = m.q(t + h);
    double fd1 = (qp.a[0] - qm.a[0]) / (2.0 * h);
    CHECK(std::abs(q0.a[1] - fd1) <= 1e-5 * (1.0 + std::abs(fd1)));
    // Difference the first-derivative channel for the curvature: a second
    // difference of values would amplify interpolation noise by 1/h^2.
    double fd2 = (qp.a[1] - qm.a[1]) / (2.0 * h);
    CHECK(std::abs(2.0 * q0.a[2] - fd2) <= 1e-5 * (1.0 + std::abs(fd2)));

    CJet4 cm = m.c[0](t - h), c0 = m.c[0](t), cp = m.c[0](t + h);
    std::complex<double> cg1 = (cp.a[0] - cm.a[0]) / (2.0 * h);
    CHECK(std::abs(c0.a[1] - cg1) <= 1e-5 * (1.0 + std::abs(cg1)));
  }
}

TEST_CASE("stellar model: parameter validation") {
  StellarParams sp;
  sp.alpha_n = 0.1;  // surface at ~0.69 < inner cutoff 1
  try {
    (void)stellar_model(sp);
    CHECK(false);
  } catch (const ModelError& e) {
    CHECK(std::string(e.what()).find("alpha_n") != std::string::npos);
  }
  sp = StellarParams{};
  sp.n_poly = 0.0;  // constant density is outside the singular setup
  CHECK_THROWS_AS((void)stellar_model(sp), ModelError);
  sp = StellarParams{};
  sp.n_poly = 5.0;
  CHECK_THROWS_AS((void)stellar_model(sp), ModelError);
  sp = StellarParams{};
  sp.l = 0;
  CHECK_THROWS_AS((void)stellar_model(sp), ModelError);
  sp = StellarParams{};
  sp.Gamma1 = 0.0;
  CHECK_THROWS_AS((void)stellar_model(sp), ModelError);
}
