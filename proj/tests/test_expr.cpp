#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "esspec/errors.hpp"
#include "esspec/expr.hpp"

using namespace esspec;

namespace {

Dual2 ev(const char* src, double t) { return eval2(parse_expr(src), t); }

// Centered finite differences used as an independent check on the duals.
double fd1(const Expr& e, double t, double h = 1e-5) {
  return (eval_value(e, t + h) - eval_value(e, t - h)) / (2 * h);
}
double fd2(const Expr& e, double t, double h = 1e-4) {
  return (eval_value(e, t + h) - 2 * eval_value(e, t) + eval_value(e, t - h)) /
         (h * h);
}

}  // namespace

TEST_CASE("derivative values at fixed probes") {
  auto d = ev("t^2", 3.0);
  CHECK(d.value == doctest::Approx(9.0).epsilon(1e-15));
  CHECK(d.d1 == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(d.d2 == doctest::Approx(2.0).epsilon(1e-15));

  d = ev("sin(t)", 0.0);
  CHECK(d.value == doctest::Approx(0.0));
  CHECK(d.d1 == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(d.d2 == doctest::Approx(0.0));

  d = ev("1/(1-t)", 0.5);
  CHECK(d.value == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(d.d1 == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(d.d2 == doctest::Approx(16.0).epsilon(1e-14));

  // integer powers must survive a zero base
  d = ev("t^2", 0.0);
  CHECK(d.value == 0.0);
  CHECK(d.d1 == 0.0);
  CHECK(d.d2 == 2.0);
}

TEST_CASE("constants and composite expressions") {
  CHECK(ev("pi", 0.0).value == doctest::Approx(M_PI).epsilon(1e-16));
  CHECK(ev("2*e", 0.0).value == doctest::Approx(2 * M_E).epsilon(1e-16));
  CHECK(ev("exp(log(t))", 2.5).value == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(ev("sqrt(t)^2", 7.0).value == doctest::Approx(7.0).epsilon(1e-15));
  CHECK(ev("t^-2", 2.0).value == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(ev("cos(t)^2 + sin(t)^2", 0.7).value ==
        doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("fourth-order jets are exact on closed forms") {
  // 1/(1-t): k-th Taylor coefficient at t is (1-t)^-(k+1)
  auto j = eval_jet<4>(parse_expr("1/(1-t)"), 0.5);
  for (int k = 0; k <= 4; ++k)
    CHECK(j.a[k] == doctest::Approx(std::pow(2.0, k + 1)).epsilon(1e-13));

  // sin: a3 = -cos(0)/6, a4 = sin(0)/24
  auto s = eval_jet<4>(parse_expr("sin(t)"), 0.0);
  CHECK(s.a[3] == doctest::Approx(-1.0 / 6).epsilon(1e-15));
  CHECK(s.a[4] == doctest::Approx(0.0));

  // derivative shift agrees with the hand derivative
  auto ds = derivative(eval_jet<4>(parse_expr("t^3"), 2.0));
  CHECK(ds.a[0] == doctest::Approx(12.0).epsilon(1e-15));  // 3 t^2
  CHECK(ds.a[1] == doctest::Approx(12.0).epsilon(1e-15));  // 6 t
  CHECK(2 * ds.a[2] == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("duals agree with centered differences on a probe set") {
  const std::vector<const char*> exprs = {
      "t^2 + sin(t)", "exp(-t^2)", "1/(1+t^2)", "log(1+t) * cos(t)",
      "sqrt(1+t^2)",  "t^0.5 + t", "sin(cos(t)) - t/3"};
  const std::vector<double> probes = {0.3, 0.9, 1.7};
  for (auto* src : exprs) {
    Expr e = parse_expr(src);
    for (double t : probes) {
      Dual2 d = eval2(e, t);
      CAPTURE(src);
      CAPTURE(t);
      CHECK(std::abs(d.d1 - fd1(e, t)) <= 1e-5 * (1 + std::abs(d.d1)));
      CHECK(std::abs(d.d2 - fd2(e, t)) <= 1e-4 * (1 + std::abs(d.d2)));
    }
  }
}

TEST_CASE("parse errors carry the failure offset") {
  auto offset_of = [](const char* src) -> std::size_t {
    try {
      parse_expr(src);
    } catch (const ParseError& p) {
      return p.offset;
    }
    return static_cast<std::size_t>(-1);
  };
  CHECK(offset_of("t +") == 3);          // operand missing at end of input
  CHECK(offset_of("") == 0);
  CHECK(offset_of("foo(t)") == 0);       // unknown identifier
  CHECK(offset_of("t & 2") == 2);        // stray character
  CHECK(offset_of("(t") == 2);           // unclosed paren
  CHECK(offset_of("1 2") == 2);          // trailing input
  CHECK(offset_of("sin t") == 4);        // function without '('
  CHECK(offset_of("t^t") == 2);          // non-constant exponent
  CHECK_THROWS_AS((void)parse_expr("t +"), ParseError);
}

TEST_CASE("domain violations raise errors") {
  CHECK_THROWS_AS((void)ev("log(0 - 1)", 0.0), DomainError);
  CHECK_THROWS_AS((void)ev("sqrt(t)", -1.0), DomainError);
  CHECK_THROWS_AS((void)ev("1/t", 0.0), DomainError);
  CHECK_THROWS_AS((void)ev("t^0.5", -2.0), DomainError);
  CHECK_THROWS_AS((void)ev("t^-1", 0.0), DomainError);
}

TEST_CASE("printer emits a canonical re-parseable form") {
  const std::vector<const char*> sources = {
      "t^2 + sin(t)",
      "1/(1-t)",
      "-(t + 1) * t",
      "t - (t - 1)",
      "2^3",
      "t^-2",
      "exp(log(t))",
      "--t",
      "t * -t",
      "1 - -t",
      "(t + 1)^2 / (2 - t)",
      "t / (t * t)",
      "-(t * t)",
      "sqrt(t + 1) * (t - 2) - 5/t",
  };
  for (auto* src : sources) {
    CAPTURE(src);
    Expr e = parse_expr(src);
    std::string canon = print_expr(e);
    CAPTURE(canon);
    Expr e2 = parse_expr(canon);
    CHECK(e == e2);                         // structural identity
    CHECK(print_expr(e2) == canon);         // printing is idempotent
  }
}

TEST_CASE("programmatic negative constants round-trip") {
  Expr e = Expr::number(-2.5);
  std::string s = print_expr(e);
  CHECK(parse_expr(s) == e);
}
