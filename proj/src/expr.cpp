#include "esspec/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "esspec/errors.hpp"

namespace esspec {

// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double v) {
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// --- construction ------------------------------------------------------------

Expr Expr::number(double v) {
  if (std::signbit(v) && v != 0.0) return unary(ExprKind::neg, number(-v));
  ExprNode n;
  n.kind = ExprKind::num;
  n.num = v;
  return Expr(std::make_shared<const ExprNode>(n));
}

Expr Expr::variable() {
  ExprNode n;
  n.kind = ExprKind::var;
  return Expr(std::make_shared<const ExprNode>(n));
}

Expr Expr::unary(ExprKind k, Expr x) {
  ExprNode n;
  n.kind = k;
  n.lhs = x.node_;
  return Expr(std::make_shared<const ExprNode>(n));
}

Expr Expr::binary(ExprKind k, Expr x, Expr y) {
  ExprNode n;
  n.kind = k;
  n.lhs = x.node_;
  n.rhs = y.node_;
  return Expr(std::make_shared<const ExprNode>(n));
}

Expr Expr::pow(Expr base, double exponent) {
  ExprNode n;
  n.kind = ExprKind::pow;
  n.exponent = exponent;
  n.lhs = base.node_;
  return Expr(std::make_shared<const ExprNode>(n));
}

Expr Expr::apply(FunKind f, Expr x) {
  ExprNode n;
  n.kind = ExprKind::fun;
  n.fun = f;
  n.lhs = x.node_;
  return Expr(std::make_shared<const ExprNode>(n));
}

static bool node_equal(const ExprNode& a, const ExprNode& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case ExprKind::num:
      return a.num == b.num;
    case ExprKind::var:
      return true;
    case ExprKind::neg:
      return node_equal(*a.lhs, *b.lhs);
    case ExprKind::pow:
      return a.exponent == b.exponent && node_equal(*a.lhs, *b.lhs);
    case ExprKind::fun:
      return a.fun == b.fun && node_equal(*a.lhs, *b.lhs);
    default:
      return node_equal(*a.lhs, *b.lhs) && node_equal(*a.rhs, *b.rhs);
  }
}

bool operator==(const Expr& a, const Expr& b) {
  return node_equal(a.node(), b.node());
}

// --- lexer -------------------------------------------------------------------

namespace {

struct Token {
  enum Kind { num, ident, plus, minus, star, slash, caret, lparen, rparen, end };
  Kind kind;
  double value = 0.0;  // num
  std::string text;    // ident
  std::size_t pos = 0;
};

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(s.data() + i, s.data() + s.size(), v);
      if (ec != std::errc())
        throw ParseError("malformed number", i);
      out.push_back({Token::num, v, {}, i});
      i = static_cast<std::size_t>(ptr - s.data());
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i + 1;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) ||
                              s[j] == '_'))
        ++j;
      out.push_back({Token::ident, 0.0, std::string(s.substr(i, j - i)), i});
      i = j;
      continue;
    }
    Token::Kind k;
    switch (c) {
      case '+': k = Token::plus; break;
      case '-': k = Token::minus; break;
      case '*': k = Token::star; break;
      case '/': k = Token::slash; break;
      case '^': k = Token::caret; break;
      case '(': k = Token::lparen; break;
      case ')': k = Token::rparen; break;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", i);
    }
    out.push_back({k, 0.0, {}, i});
    ++i;
  }
  out.push_back({Token::end, 0.0, {}, s.size()});
  return out;
}

// --- recursive-descent parser --------------------------------------------------

class Parser {
 public:
  explicit Parser(std::string_view s) : toks_(lex(s)) {}

  Expr run() {
    Expr e = expr();
    if (cur().kind != Token::end)
      throw ParseError("unexpected trailing input", cur().pos);
    return e;
  }

 private:
  const Token& cur() const { return toks_[pos_]; }
  void advance() { ++pos_; }
  bool accept(Token::Kind k) {
    if (cur().kind != k) return false;
    advance();
    return true;
  }

  Expr expr() {
    Expr e = term();
    for (;;) {
      if (accept(Token::plus))
        e = Expr::binary(ExprKind::add, e, term());
      else if (accept(Token::minus))
        e = Expr::binary(ExprKind::sub, e, term());
      else
        return e;
    }
  }

  Expr term() {
    Expr e = factor();
    for (;;) {
      if (accept(Token::star))
        e = Expr::binary(ExprKind::mul, e, factor());
      else if (accept(Token::slash))
        e = Expr::binary(ExprKind::div, e, factor());
      else
        return e;
    }
  }

  Expr factor() {
    Expr e = base();
    if (accept(Token::caret)) {
      double sign = accept(Token::minus) ? -1.0 : 1.0;
      if (cur().kind != Token::num)
        throw ParseError("exponent must be a numeric constant", cur().pos);
      double expo = sign * cur().value;
      advance();
      return Expr::pow(e, expo);
    }
    return e;
  }

  Expr base() {
    const Token& t = cur();
    switch (t.kind) {
      case Token::num:
        advance();
        return Expr::number(t.value);
      case Token::minus:
        advance();
        return Expr::unary(ExprKind::neg, factor());
      case Token::lparen: {
        advance();
        Expr e = expr();
        if (!accept(Token::rparen))
          throw ParseError("expected ')'", cur().pos);
        return e;
      }
      case Token::ident: {
        advance();
        if (t.text == "t") return Expr::variable();
        if (t.text == "pi") return Expr::number(M_PI);
        if (t.text == "e") return Expr::number(M_E);
        FunKind f;
        if (t.text == "sin")
          f = FunKind::sin;
        else if (t.text == "cos")
          f = FunKind::cos;
        else if (t.text == "exp")
          f = FunKind::exp;
        else if (t.text == "log")
          f = FunKind::log;
        else if (t.text == "sqrt")
          f = FunKind::sqrt;
        else
          throw ParseError("unknown identifier '" + t.text + "'", t.pos);
        if (!accept(Token::lparen))
          throw ParseError("expected '(' after '" + t.text + "'", cur().pos);
        Expr arg = expr();
        if (!accept(Token::rparen))
          throw ParseError("expected ')'", cur().pos);
        return Expr::apply(f, arg);
      }
      default:
        throw ParseError("expected an operand", t.pos);
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse_expr(std::string_view text) { return Parser(text).run(); }

// --- canonical printer ---------------------------------------------------------

namespace {

const char* fun_name(FunKind f) {
  switch (f) {
    case FunKind::sin: return "sin";
    case FunKind::cos: return "cos";
    case FunKind::exp: return "exp";
    case FunKind::log: return "log";
    case FunKind::sqrt: return "sqrt";
  }
  return "?";
}

bool is_arith(ExprKind k) {
  return k == ExprKind::add || k == ExprKind::sub || k == ExprKind::mul ||
         k == ExprKind::div;
}
bool is_additive(ExprKind k) { return k == ExprKind::add || k == ExprKind::sub; }

std::string print_node(const ExprNode& n);

std::string wrap(const ExprNode& n, bool parens) {
  std::string s = print_node(n);
  return parens ? "(" + s + ")" : s;
}

std::string print_node(const ExprNode& n) {
  switch (n.kind) {
    case ExprKind::num:
      return format_double(n.num);
    case ExprKind::var:
      return "t";
    case ExprKind::neg:
      // "-a * b" would re-parse with the minus bound to a alone, so any
      // arithmetic child keeps its parentheses.
      return "-" + wrap(*n.lhs, is_arith(n.lhs->kind));
    case ExprKind::add:
      return wrap(*n.lhs, false) + " + " + wrap(*n.rhs, is_additive(n.rhs->kind));
    case ExprKind::sub:
      return wrap(*n.lhs, false) + " - " + wrap(*n.rhs, is_additive(n.rhs->kind));
    case ExprKind::mul:
      return wrap(*n.lhs, is_additive(n.lhs->kind)) + " * " +
             wrap(*n.rhs, is_arith(n.rhs->kind));
    case ExprKind::div:
      return wrap(*n.lhs, is_additive(n.lhs->kind)) + " / " +
             wrap(*n.rhs, is_arith(n.rhs->kind));
    case ExprKind::pow: {
      bool parens = n.lhs->kind != ExprKind::num &&
                    n.lhs->kind != ExprKind::var &&
                    n.lhs->kind != ExprKind::fun;
      return wrap(*n.lhs, parens) + "^" + format_double(n.exponent);
    }
    case ExprKind::fun:
      return std::string(fun_name(n.fun)) + "(" + print_node(*n.lhs) + ")";
  }
  return "?";
}

}  // namespace

std::string print_expr(const Expr& e) { return print_node(e.node()); }

Dual2 eval2(const Expr& e, double t) { return to_dual2(eval_jet<2>(e, t)); }

double eval_value(const Expr& e, double t) {
  return detail::eval_node(e.node(), Jet<double, 1>::variable(t)).a[0];
}

}  // namespace esspec
