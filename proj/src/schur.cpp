#include "esspec/schur.hpp"

#include <algorithm>
#include <cmath>

#include "esspec/errors.hpp"

namespace esspec {

namespace {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using std::complex;

// Truncate an imaginary residue on a theoretically real quantity; residues
// beyond tolerance mean the inputs violated the Hermitian structure.  The
// tolerance scales with the magnitude of the products that formed z, not
// with z itself: near the singular endpoint the result is a small
// difference of large resolvent terms, and their rounding noise is the
// honest floor.  A genuine symmetry violation shows up at the scale of the
// ingredients and still trips the check.
double enforce_real(complex<double> z, double ingredient_scale,
                    const char* what) {
  double scale = 1.0 + std::abs(z) + ingredient_scale;
  if (std::abs(z.imag()) > 1e-12 * scale)
    throw NumericError(std::string(what) +
                       " developed an imaginary part beyond tolerance: " +
                       format_double(z.imag()));
  return z.real();
}

// Derivative stacks (f, f', f'') of A^-1 v given those of A and v, all
// sharing one factorization of A:
//   x   = A^-1 v
//   x'  = A^-1 (v'  - A' x)
//   x'' = A^-1 (v'' - 2 A' x' - A'' x)
struct ResolventApply {
  VectorXcd x0, x1, x2;
};

ResolventApply resolve(const Eigen::PartialPivLU<MatrixXcd>& lu,
                       const MatrixXcd& A1, const MatrixXcd& A2,
                       const VectorXcd& v0, const VectorXcd& v1,
                       const VectorXcd& v2) {
  ResolventApply r;
  r.x0 = lu.solve(v0);
  r.x1 = lu.solve(v1 - A1 * r.x0);
  r.x2 = lu.solve(v2 - 2.0 * (A1 * r.x1) - A2 * r.x0);
  return r;
}

// (u* x), with derivatives, for derivative stacks of u and x; m0..m2 track
// the norms of the products forming each level, for rounding tolerances.
struct ScalarStack {
  complex<double> s0, s1, s2;
  double m0, m1, m2;
};

ScalarStack inner(const VectorXcd& u0, const VectorXcd& u1,
                  const VectorXcd& u2, const ResolventApply& x) {
  ScalarStack s;
  s.s0 = u0.dot(x.x0);  // Eigen's dot conjugates the left argument
  s.s1 = u1.dot(x.x0) + u0.dot(x.x1);
  s.s2 = u2.dot(x.x0) + 2.0 * u1.dot(x.x1) + u0.dot(x.x2);
  const double n_u0 = u0.norm(), n_u1 = u1.norm(), n_u2 = u2.norm();
  const double n_x0 = x.x0.norm(), n_x1 = x.x1.norm(), n_x2 = x.x2.norm();
  s.m0 = n_u0 * n_x0;
  s.m1 = n_u1 * n_x0 + n_u0 * n_x1;
  s.m2 = n_u2 * n_x0 + 2.0 * n_u1 * n_x1 + n_u0 * n_x2;
  return s;
}

}  // namespace

SchurPoint schur_point(const CoefficientModel& m, double t, double lambda) {
  auto Dt = m.D_taylor(t);
  auto bt = m.b_taylor(t);
  auto ct = m.c_taylor(t);
  Jet4 pj = m.p(t);
  Jet4 qj = m.q(t);

  // Taylor coefficients -> plain derivatives.
  MatrixXcd A0 = Dt[0];
  const MatrixXcd& A1 = Dt[1];
  MatrixXcd A2 = 2.0 * Dt[2];
  VectorXcd b0 = bt[0], b1 = bt[1], b2 = 2.0 * bt[2];
  VectorXcd c0 = ct[0], c1 = ct[1], c2 = 2.0 * ct[2];

  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(A0, Eigen::EigenvaluesOnly);
  double dist = (es.eigenvalues().array() - lambda).abs().minCoeff();
  if (dist < 1e-8 * (1.0 + std::abs(lambda)))
    throw PoleError("lambda is within " + format_double(dist) +
                        " of an eigenvalue of D(t) at t = " + format_double(t),
                    dist);

  A0.diagonal().array() -= lambda;
  Eigen::PartialPivLU<MatrixXcd> lu(A0);

  ResolventApply x = resolve(lu, A1, A2, b0, b1, b2);  // (D-lambda)^-1 b
  ResolventApply y = resolve(lu, A1, A2, c0, c1, c2);  // (D-lambda)^-1 c

  ScalarStack bb = inner(b0, b1, b2, x);  // b* (D-lambda)^-1 b
  ScalarStack bc = inner(b0, b1, b2, y);  // b* (D-lambda)^-1 c
  ScalarStack cc = inner(c0, c1, c2, y);  // c* (D-lambda)^-1 c

  SchurPoint out;
  out.pi = pj.value() - enforce_real(bb.s0, bb.m0, "pi");
  out.pi_d1 = pj.d1() - enforce_real(bb.s1, bb.m1, "pi'");
  out.pi_d2 = pj.d2() - enforce_real(bb.s2, bb.m2, "pi''");
  out.rho_im = out.pi_d1;
  out.r = bc.s0.imag();
  out.r_d1 = bc.s1.imag();
  out.varkappa = qj.value() - lambda -
                 enforce_real(cc.s0, cc.m0, "c*(D-lambda)^-1 c") +
                 bc.s1.real();
  return out;
}

std::complex<double> schur_pi(const CoefficientModel& m, double t,
                              std::complex<double> zeta) {
  MatrixXcd A = m.D_taylor(t)[0];
  A.diagonal().array() -= zeta;
  VectorXcd b0 = m.b_taylor(t)[0];
  VectorXcd x = Eigen::PartialPivLU<MatrixXcd>(A).solve(b0);
  return complex<double>(m.p(t).value(), 0.0) - b0.dot(x);
}

Eigen::MatrixXcd delta_matrix(const CoefficientModel& m, double t) {
  MatrixXcd D0 = m.D_taylor(t)[0];
  VectorXcd b0 = m.b_taylor(t)[0];
  double p0 = m.p(t).value();
  MatrixXcd delta = D0 - (b0 * b0.adjoint()) / p0;
  // Mirror the lower triangle so the result is Hermitian to the last bit.
  for (int i = 0; i < delta.rows(); ++i) {
    delta(i, i) = complex<double>(delta(i, i).real(), 0.0);
    for (int j = 0; j < i; ++j) delta(j, i) = std::conj(delta(i, j));
  }
  return delta;
}

double PartialFractions::eval_minus_pi(double lambda) const {
  double s = offset;
  for (std::size_t j = 0; j < poles.size(); ++j)
    s += weights[j] / (poles[j] - lambda);
  return s;
}

double PartialFractions::weight_sum() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

PartialFractions partial_fractions(const CoefficientModel& m, double t) {
  MatrixXcd D0 = m.D_taylor(t)[0];
  VectorXcd b0 = m.b_taylor(t)[0];
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(D0);
  if (es.info() != Eigen::Success)
    throw NumericError("eigendecomposition of D(t) failed");

  PartialFractions pf;
  pf.offset = -m.p(t).value();
  for (int j = 0; j < m.dim; ++j) {
    double pole = es.eigenvalues()(j);
    double w = std::norm(es.eigenvectors().col(j).dot(b0));
    if (w < -1e-12)
      throw NumericError("negative pole weight");  // |.|^2 cannot go there
    w = std::max(w, 0.0);
    if (!pf.poles.empty() &&
        pole - pf.poles.back() < 1e-10 * (1.0 + std::abs(pole))) {
      // Coinciding eigenvalues: one pole, summed weight, averaged location.
      double wsum = pf.weights.back() + w;
      pf.poles.back() = wsum > 0.0 ? (pf.poles.back() * pf.weights.back() +
                                      pole * w) / wsum
                                   : 0.5 * (pf.poles.back() + pole);
      pf.weights.back() = wsum;
    } else {
      pf.poles.push_back(pole);
      pf.weights.push_back(w);
    }
  }
  return pf;
}

}  // namespace esspec
