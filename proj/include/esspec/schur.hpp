#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "esspec/model.hpp"

namespace esspec {

// ---------------------------------------------------------------------------
// Schur complement functions of the pencil
// ---------------------------------------------------------------------------
//
// Eliminating the matrix block of the pencil at fixed (t, lambda) leaves
// three scalar functions that drive the whole analysis:
//
//   pi      = p - b* (D - lambda)^-1 b
//   r       = Im( b* (D - lambda)^-1 c )
//   varkappa= q - lambda - c* (D - lambda)^-1 c + d/dt Re( b* (D-lambda)^-1 c )
//
// together with first/second t-derivatives of pi and the first of r.

struct SchurPoint {
  double pi = 0.0;
  double r = 0.0;
  double varkappa = 0.0;
  double rho_im = 0.0;  // d pi / dt, the imaginary part of rho = 2 r + i pi'
  double pi_d1 = 0.0;
  double pi_d2 = 0.0;
  double r_d1 = 0.0;
};

// Evaluates the Schur functions at (t, lambda).  Throws PoleError when
// lambda is within 1e-8 * (1 + |lambda|) of an eigenvalue of D(t), and
// NumericError if a theoretically real quantity develops an imaginary part
// beyond 1e-12 * scale (smaller residues are truncated).
SchurPoint schur_point(const CoefficientModel& m, double t, double lambda);

// pi at a complex spectral parameter (no pole guard; used off the real
// axis, where -pi is a Nevanlinna function of zeta).
std::complex<double> schur_pi(const CoefficientModel& m, double t,
                              std::complex<double> zeta);

// The regular-part symbol Delta(t) = D(t) - b(t) b(t)* / p(t), exactly
// Hermitian by construction.
Eigen::MatrixXcd delta_matrix(const CoefficientModel& m, double t);

// Pole representation of -pi at fixed t:
//   -pi(t, lambda) = offset + sum_j weights[j] / (poles[j] - lambda)
// with offset = -p(t), poles the eigenvalues of D(t) (ascending, poles
// closer than 1e-10 * (1 + |pole|) merged with weights summed) and
// weights[j] = |u_j* b|^2 >= 0.  The weights sum to |b|^2.
struct PartialFractions {
  std::vector<double> poles;
  std::vector<double> weights;
  double offset = 0.0;

  double eval_minus_pi(double lambda) const;
  double weight_sum() const;
};

PartialFractions partial_fractions(const CoefficientModel& m, double t);

}  // namespace esspec
