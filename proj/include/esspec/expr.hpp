#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "esspec/taylor.hpp"

namespace esspec {

// ---------------------------------------------------------------------------
// Coefficient expressions
// ---------------------------------------------------------------------------
//
// A tiny closed language for real-valued coefficient functions of the single
// variable t:
//
//   expr   := term {("+" | "-") term}
//   term   := factor {("*" | "/") factor}
//   factor := base ["^" ["-"] number]
//   base   := number | "t" | name "(" expr ")" | "(" expr ")" | "-" factor
//
// with functions sin, cos, exp, log, sqrt and the constants pi and e.
// Expression trees are immutable; Expr is a cheap shared handle, safe to
// copy across threads.

enum class ExprKind { num, var, neg, add, sub, mul, div, pow, fun };
enum class FunKind { sin, cos, exp, log, sqrt };

struct ExprNode {
  ExprKind kind;
  double num = 0.0;        // ExprKind::num
  double exponent = 0.0;   // ExprKind::pow
  FunKind fun = FunKind::sin;
  std::shared_ptr<const ExprNode> lhs, rhs;  // unary nodes use lhs only
};

class Expr {
 public:
  Expr() : Expr(number(0.0)) {}

  // Negative values canonicalize to neg(number(-v)) so that printing and
  // re-parsing reproduce the same tree.
  static Expr number(double v);
  static Expr variable();
  static Expr unary(ExprKind k, Expr x);  // neg
  static Expr binary(ExprKind k, Expr x, Expr y);
  static Expr pow(Expr base, double exponent);
  static Expr apply(FunKind f, Expr x);

  const ExprNode& node() const { return *node_; }
  friend bool operator==(const Expr& a, const Expr& b);  // structural

 private:
  explicit Expr(std::shared_ptr<const ExprNode> n) : node_(std::move(n)) {}
  std::shared_ptr<const ExprNode> node_;
};

// Throws ParseError (with 0-based offset) on malformed input.
Expr parse_expr(std::string_view text);

// Canonical form with minimal parentheses; parse_expr(print_expr(e)) == e.
std::string print_expr(const Expr& e);

// Evaluate with derivatives.  Throws DomainError when evaluation leaves a
// function's domain.
template <int N>
Jet<double, N> eval_jet(const Expr& e, double t);

Dual2 eval2(const Expr& e, double t);
double eval_value(const Expr& e, double t);

// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double v);

// --- implementation of the jet walk -----------------------------------------

namespace detail {

template <int N>
Jet<double, N> eval_node(const ExprNode& n, const Jet<double, N>& t) {
  using J = Jet<double, N>;
  switch (n.kind) {
    case ExprKind::num:
      return J::constant(n.num);
    case ExprKind::var:
      return t;
    case ExprKind::neg:
      return -eval_node(*n.lhs, t);
    case ExprKind::add:
      return eval_node(*n.lhs, t) + eval_node(*n.rhs, t);
    case ExprKind::sub:
      return eval_node(*n.lhs, t) - eval_node(*n.rhs, t);
    case ExprKind::mul:
      return eval_node(*n.lhs, t) * eval_node(*n.rhs, t);
    case ExprKind::div:
      return eval_node(*n.lhs, t) / eval_node(*n.rhs, t);
    case ExprKind::pow:
      return pow(eval_node(*n.lhs, t), n.exponent);
    case ExprKind::fun:
      switch (n.fun) {
        case FunKind::sin:
          return sin(eval_node(*n.lhs, t));
        case FunKind::cos:
          return cos(eval_node(*n.lhs, t));
        case FunKind::exp:
          return exp(eval_node(*n.lhs, t));
        case FunKind::log:
          return log(eval_node(*n.lhs, t));
        case FunKind::sqrt:
          return sqrt(eval_node(*n.lhs, t));
      }
  }
  throw DomainError("corrupt expression node");
}

}  // namespace detail

template <int N>
Jet<double, N> eval_jet(const Expr& e, double t) {
  return detail::eval_node(e.node(), Jet<double, N>::variable(t));
}

}  // namespace esspec
