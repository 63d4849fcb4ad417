#include "esspec/model.hpp"

#include <cmath>
#include <sstream>

#include "esspec/errors.hpp"

namespace esspec {

const char* case_name(CaseKind k) {
  switch (k) {
    case CaseKind::I: return "I";
    case CaseKind::II: return "II";
    case CaseKind::III: return "III";
    case CaseKind::unresolved: return "unresolved";
  }
  return "?";
}

std::array<Eigen::VectorXcd, 5> CoefficientModel::b_taylor(double t) const {
  std::array<Eigen::VectorXcd, 5> out;
  for (auto& v : out) v = Eigen::VectorXcd::Zero(dim);
  for (int i = 0; i < dim; ++i) {
    CJet4 j = b[i](t);
    for (int k = 0; k <= 4; ++k) out[k](i) = j.a[k];
  }
  return out;
}

std::array<Eigen::VectorXcd, 5> CoefficientModel::c_taylor(double t) const {
  std::array<Eigen::VectorXcd, 5> out;
  for (auto& v : out) v = Eigen::VectorXcd::Zero(dim);
  for (int i = 0; i < dim; ++i) {
    CJet4 j = c[i](t);
    for (int k = 0; k <= 4; ++k) out[k](i) = j.a[k];
  }
  return out;
}

std::array<Eigen::MatrixXcd, 5> CoefficientModel::D_taylor(double t) const {
  std::array<Eigen::MatrixXcd, 5> out;
  for (auto& m : out) m = Eigen::MatrixXcd::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j <= i; ++j) {
      CJet4 e = D_low[i][j](t);
      for (int k = 0; k <= 4; ++k) {
        if (i == j) {
          out[k](i, i) = e.a[k].real();  // diagonal is real by contract
        } else {
          out[k](i, j) = e.a[k];
          out[k](j, i) = std::conj(e.a[k]);
        }
      }
    }
  }
  return out;
}

CoefficientModel::RealFn real_fn(Expr e) {
  return [e](double t) { return eval_jet<4>(e, t); };
}

CoefficientModel::ComplexFn complex_fn(Expr re, Expr im) {
  return [re, im](double t) {
    return complex_jet(eval_jet<4>(re, t), eval_jet<4>(im, t));
  };
}

CoefficientModel::ComplexFn complex_fn(Expr re) {
  return complex_fn(std::move(re), Expr::number(0.0));
}

namespace {

std::string at_t(double t) {
  return " at t = " + format_double(t);
}

// Points where structural properties are checked.  For an unbounded
// interval the probe window covers [alpha, alpha + 64].
std::vector<double> validation_grid(double alpha, double beta) {
  const int kSamples = 33;
  double span = std::isfinite(beta) ? (beta - alpha) : 64.0;
  double margin = std::isfinite(beta) ? span / 512.0 : 0.0;
  std::vector<double> ts(kSamples);
  for (int i = 0; i < kSamples; ++i)
    ts[i] = alpha + (span - margin) * i / (kSamples - 1);
  return ts;
}

Expr parse_field(const std::string& text, const std::string& field) {
  try {
    return parse_expr(text);
  } catch (const ParseError& p) {
    throw ModelError("while parsing " + field + ": " + p.what());
  }
}

}  // namespace

void validate_model(const CoefficientModel& m) {
  if (!(m.dim >= 1)) throw ModelError("dimension must be at least 1");
  if (!(m.alpha < m.beta))
    throw ModelError("empty interval: alpha must be below beta");
  if (!std::isfinite(m.alpha)) throw ModelError("alpha must be finite");
  if (static_cast<int>(m.b.size()) != m.dim ||
      static_cast<int>(m.c.size()) != m.dim)
    throw ModelError("b and c must have exactly dim components");
  if (static_cast<int>(m.D_low.size()) != m.dim)
    throw ModelError("D must have dim rows");
  for (int i = 0; i < m.dim; ++i)
    if (static_cast<int>(m.D_low[i].size()) != i + 1)
      throw ModelError("lower triangle of D: row " + std::to_string(i) +
                       " must have " + std::to_string(i + 1) + " entries");

  for (double t : validation_grid(m.alpha, m.beta)) {
    double pv;
    try {
      pv = m.p(t).value();
      (void)m.q(t);
      (void)m.b_taylor(t);
      (void)m.c_taylor(t);
      (void)m.D_taylor(t);
    } catch (const DomainError& d) {
      throw ModelError(std::string("coefficient undefined") + at_t(t) + ": " +
                       d.what());
    }
    if (!(pv > 0.0))
      throw ModelError("p must be positive: p = " + format_double(pv) + at_t(t));
  }
}

CoefficientModel build_model(const ExprModel& spec) {
  CoefficientModel m;
  m.alpha = spec.alpha;
  m.beta = spec.beta;
  m.dim = spec.dim;
  m.p = real_fn(parse_field(spec.p, "p"));
  m.q = real_fn(parse_field(spec.q, "q"));

  auto component = [&](const std::vector<std::array<std::string, 2>>& src,
                       const char* nm) {
    if (static_cast<int>(src.size()) != spec.dim)
      throw ModelError(std::string(nm) + " must have exactly dim components");
    std::vector<CoefficientModel::ComplexFn> out;
    for (std::size_t i = 0; i < src.size(); ++i) {
      std::string tag = std::string(nm) + "[" + std::to_string(i) + "]";
      out.push_back(complex_fn(parse_field(src[i][0], tag + ".re"),
                               parse_field(src[i][1], tag + ".im")));
    }
    return out;
  };
  m.b = component(spec.b, "b");
  m.c = component(spec.c, "c");

  if (static_cast<int>(spec.D.size()) != spec.dim)
    throw ModelError("D must have dim rows");
  // The first row decides the shape: dim entries means the full matrix,
  // one entry the lower triangle.  (The last row has dim entries either
  // way, so it cannot tell the two forms apart.)
  const bool full =
      spec.dim > 1 && static_cast<int>(spec.D[0].size()) == spec.dim;
  for (int i = 0; i < spec.dim; ++i) {
    int want = full ? spec.dim : i + 1;
    if (static_cast<int>(spec.D[i].size()) != want)
      throw ModelError("D row " + std::to_string(i) + " must have " +
                       std::to_string(want) + " entries (" +
                       (full ? "full form" : "lower triangle") + ")");
  }

  // Parse everything first so errors name the entry.
  std::vector<std::vector<std::pair<Expr, Expr>>> D_parsed(spec.dim);
  for (int i = 0; i < spec.dim; ++i) {
    for (int j = 0; j < static_cast<int>(spec.D[i].size()); ++j) {
      std::string tag =
          "D[" + std::to_string(i) + "][" + std::to_string(j) + "]";
      D_parsed[i].emplace_back(parse_field(spec.D[i][j][0], tag + ".re"),
                               parse_field(spec.D[i][j][1], tag + ".im"));
    }
  }

  if (full) {
    // The stored representation keeps only the lower triangle, so a full
    // matrix must actually be Hermitian before the upper half is dropped.
    for (double t : validation_grid(spec.alpha, spec.beta)) {
      for (int i = 0; i < spec.dim; ++i) {
        for (int j = 0; j <= i; ++j) {
          std::complex<double> lo, up;
          try {
            lo = {eval_value(D_parsed[i][j].first, t),
                  eval_value(D_parsed[i][j].second, t)};
            up = {eval_value(D_parsed[j][i].first, t),
                  eval_value(D_parsed[j][i].second, t)};
          } catch (const DomainError& d) {
            throw ModelError(std::string("D undefined") + at_t(t) + ": " +
                             d.what());
          }
          double scale = 1.0 + std::abs(lo) + std::abs(up);
          if (std::abs(lo - std::conj(up)) > 1e-12 * scale)
            throw ModelError("D is not Hermitian: D[" + std::to_string(i) +
                             "][" + std::to_string(j) + "] != conj(D[" +
                             std::to_string(j) + "][" + std::to_string(i) +
                             "])" + at_t(t));
          if (i == j && std::abs(lo.imag()) > 1e-12 * scale)
            throw ModelError("diagonal of D must be real: D[" +
                             std::to_string(i) + "][" + std::to_string(i) +
                             "]" + at_t(t));
        }
      }
    }
  } else {
    // Lower-triangle input skips the symmetry check, but the diagonal must
    // still be genuinely real: its imaginary part would be dropped silently.
    for (double t : validation_grid(spec.alpha, spec.beta)) {
      for (int i = 0; i < spec.dim; ++i) {
        std::complex<double> v;
        try {
          v = {eval_value(D_parsed[i][i].first, t),
               eval_value(D_parsed[i][i].second, t)};
        } catch (const DomainError& d) {
          throw ModelError(std::string("D undefined") + at_t(t) + ": " +
                           d.what());
        }
        if (std::abs(v.imag()) > 1e-12 * (1.0 + std::abs(v)))
          throw ModelError("diagonal of D must be real: D[" +
                           std::to_string(i) + "][" + std::to_string(i) + "]" +
                           at_t(t));
      }
    }
  }

  m.D_low.resize(spec.dim);
  for (int i = 0; i < spec.dim; ++i)
    for (int j = 0; j <= i; ++j)
      m.D_low[i].push_back(complex_fn(D_parsed[i][j].first,
                                      D_parsed[i][j].second));

  validate_model(m);
  return m;
}

}  // namespace esspec
