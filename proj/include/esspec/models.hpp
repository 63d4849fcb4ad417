#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "esspec/errors.hpp"
#include "esspec/intervals.hpp"
#include "esspec/model.hpp"
#include "esspec/taylor.hpp"

namespace esspec {

// ---------------------------------------------------------------------------
// Generating families
// ---------------------------------------------------------------------------
//
// Three families of coefficient models whose boundary behaviour is known in
// closed form.  Each builder returns a CoefficientModel with the closed-form
// side channel attached, so the numerical limit machinery can be validated
// against exact answers.  The scalar family ("example-a") and the 2x2 family
// ("example-b") take their coefficient profiles as expression strings in the
// reflected variable x = 1 - t, so that the data is written near the regular
// endpoint and the singularity sits at t = 1.  The stellar family builds its
// coefficients from a polytrope computed by the Lane-Emden solver below.

// Scalar family on [0, 1): p = rho(1-t), q = phi(1-t), b = conj(psi)(1-t)/(1-t),
// c = 0, D = m(1-t)/(1-t)^2.  Profiles are expressions in x on [0, 1];
// psi may be complex via a separate imaginary part.  Requires rho > 0 on
// [0, 1] and m(0) != 0 (so the branch of D blows up at the boundary and the
// exceptional set of finite branch limits is empty).
struct ExampleAParams {
  std::string rho;           // rho(x) > 0
  std::string m;             // m(x), m(0) != 0
  std::string psi_re;        // Re psi(x)
  std::string psi_im;        // Im psi(x); empty means identically zero
  std::string phi;           // potential phi(x)
};

// Boundary data of the scalar family, decided analytically from the jets of
// the profiles at x = 0.  The decisive combination is F = rho*m - |psi|^2:
// F(0) != 0 gives case I, F(0) = 0 != F'(0) case II, F(0) = F'(0) = 0 case
// III.  Coefficients that vanish identically in the decided case are
// reported as exact zeros.
struct ExampleAAnalysis {
  CaseKind kind = CaseKind::unresolved;

  double rho0 = 0.0;         // rho(0)
  double m0 = 0.0;           // m(0)
  double phi0 = 0.0;         // phi(0)
  double F0 = 0.0;           // F(0)
  double F1 = 0.0;           // F'(0)
  double F2 = 0.0;           // F''(0)

  double pi0 = 0.0;          // boundary limit of the Schur function pi
  double pi1 = 0.0;          // boundary limit of d(pi)/dt

  // Case III only (untouched otherwise): the regular branch is
  // Delta(x) = F(x) / (x^2 rho(x)) and the singular part of the essential
  // spectrum is the segment between its boundary limit delta0 and the
  // weighted hull point (4 m(0) phi(0) + rho(0) delta0) / (4 m(0) + rho(0)).
  double delta0 = 0.0;
  double hull_point = 0.0;
  Interval singular{0.0, 0.0};

  // Essential spectral radius: +infinity in cases I/II (the branch of D is
  // unbounded), finite in case III where it is max(sup |Delta|, |hull|).
  double radius = 0.0;
};

// Decide the case and compute all boundary data without building a model.
// Throws ParseError for malformed profile expressions and ModelError when
// the family constraints (rho > 0 on [0, 1], m(0) != 0) fail.
ExampleAAnalysis analyze_example_a(const ExampleAParams& params);

// Build the coefficient model with the closed-form side channel attached.
CoefficientModel example_a(const ExampleAParams& params);

// 2x2 family on [0, 1) modelling cylindrical plasma oscillations.  Profiles
// are expressions in x = 1 - t on [0, 1]; delta12 and gamma are complex via
// split real/imaginary parts.  Requires vartheta > 0 on [0, 1] (the pencil
// weight p must stay positive) and delta11(0) != 0.  The assembled
// coefficients are
//   p = vartheta,  q = phi + (1/2) d/dt [vartheta/(1-t)] + vartheta/(4(1-t)^2),
//   b = -i (beta1/(1-t), beta2)^T,  c = -b/(2(1-t)) + (conj(gamma), 0)^T,
//   D = [[delta11/(1-t)^2, delta12/(1-t)], [conj(delta12)/(1-t), delta22]],
// i.e. the weighted transform of the physical model is baked in.
struct ExampleBParams {
  std::string vartheta;      // vartheta(x) > 0
  std::string delta11;       // delta11(x), delta11(0) != 0
  std::string delta22;       // delta22(x)
  std::string delta12_re;    // Re delta12(x)
  std::string delta12_im;    // Im delta12(x); empty means zero
  std::string beta1;         // beta1(x)
  std::string beta2;         // beta2(x)
  std::string gamma_re;      // Re gamma(x)
  std::string gamma_im;      // Im gamma(x); empty means zero
  std::string phi;           // potential phi(x)
};

// Boundary data of the 2x2 family at x = 0.  With
//   A = vartheta*delta11 - beta1^2,  B = vartheta*delta22 - beta2^2,
//   C = vartheta*delta12 - beta1*beta2,
// the case split is: I when A(0) != 0 or C(0) != 0, II when both vanish and
// A'(0) != 0, III when all three vanish.  One eigenvalue branch of D has the
// finite boundary limit lambda11 = delta22(0) - |delta12(0)|^2 / delta11(0);
// the other blows up, so j0 = 1.
struct ExampleBAnalysis {
  CaseKind kind = CaseKind::unresolved;

  double A0 = 0.0;           // A(0)
  double absC0 = 0.0;        // |C(0)|
  double A1 = 0.0;           // A'(0)
  double lambda11 = 0.0;     // finite eigenvalue limit of D at the boundary
  double delta11_0 = 0.0;    // delta11(0), the denominator of Xi1
  double phi0 = 0.0;         // phi(0)
  double re_gamma0 = 0.0;    // Re gamma(0)

  // Numerator weights of pi near the boundary: pi(t, lambda) approaches
  // (Phi - Psi*lambda) / Xi1 with Psi = (1-t)^2 vartheta tr(D - lambda) + ...
  // evaluated at t = 1, and Xi1(lambda) = delta11(0) (lambda11 - lambda).
  // The _d1 fields are t-derivatives at t = 1.
  double Psi_beta = 0.0;     // Psi(1)
  double Phi_beta = 0.0;     // Phi(1)
  double Psi_d1_beta = 0.0;  // Psi'(1)
  double Phi_d1_beta = 0.0;  // Phi'(1)

  // Case III only (untouched otherwise).  The scaled second-order
  // coefficient factors as pi2(lambda) = g_beta (lambda^2 - K1 lambda + K2)
  // / (lambda11 - lambda), r1 is constant, and the singular part is the
  // solution set of (lambda11 - lambda) P(lambda) >= 0 for the cubic
  // P(lambda) = sum_k P_coeff[k] lambda^k (monic, P_coeff[3] = 1).
  double K1 = 0.0;
  double K2 = 0.0;
  double g_beta = 0.0;       // vartheta(0)^2 / beta1(0)^2 > 0
  double r1 = 0.0;           // -(beta1(0)/delta11(0)) Re gamma(0)
  std::array<double, 4> P_coeff{0.0, 0.0, 0.0, 0.0};
  std::vector<Interval> singular;

  // Membership of lambda11 in case III: "in-regular" when it is a regular
  // endpoint value of the other branch, "in-singular-closure" otherwise.
  // Empty string outside case III.
  std::string lambda11_status;
};

// Decide the case and compute the boundary data without building a model.
ExampleBAnalysis analyze_example_b(const ExampleBParams& params);

// Build the 2x2 coefficient model with the closed-form side channel.
CoefficientModel example_b(const ExampleBParams& params);

// ---------------------------------------------------------------------------
// Lane-Emden solver
// ---------------------------------------------------------------------------

struct LaneEmdenOptions {
  // Stop searching for the surface beyond this radius; 0 means 50 * alpha_n.
  double t_max = 0.0;
  // Local error control of the embedded Runge-Kutta pair.
  double rtol = 1e-12;
  double atol = 1e-14;
  // Step cap, in units of alpha_n (the solution scales with it).  The dense
  // output interpolates each accepted step with cubic Hermite polynomials;
  // capping the step keeps their interpolation error well below the 1e-8
  // equation-residual budget everywhere.
  double h_max = 2e-4;
};

// The polytrope stayed positive out to t_max: either the index admits no
// surface (it does not for n = 5) or t_max was too small.
struct NoZeroError : NumericError {
  NoZeroError(double n_poly_, double t_max_);
  double n_poly;
  double t_max;
};

// Solution theta of theta'' + (2/t) theta' = -theta^n / alpha^2 with
// theta(0) = 1, theta'(0) = 0, integrated until the first zero R.  Queries
// are served from stored integration nodes by cubic Hermite interpolation
// (for t below the series launch point, from the Taylor expansion at the
// centre); the solution is never re-integrated.  Valid on [0, R].
class LaneEmdenSolution {
 public:
  struct Node {
    double t;
    double theta;
    double theta_d1;
  };

  LaneEmdenSolution(double n_poly, double alpha_n, double t_start,
                    std::vector<Node> nodes);

  double n_poly() const { return n_poly_; }
  double alpha_n() const { return alpha_n_; }
  // First zero of theta: the surface radius.
  double R() const { return nodes_.back().t; }
  // Below this point queries use the series expansion at the centre.
  double t_start() const { return t_start_; }
  const std::vector<Node>& nodes() const { return nodes_; }

  // theta and its first derivative at t in [0, R].  Throws DomainError
  // beyond the surface.
  double theta(double t) const;
  double theta_d1(double t) const;

  // |theta'' + (2/t) theta' + theta^n / alpha^2| of the interpolant at t; a
  // fidelity probe of the dense output, not of the integrator.
  double ode_residual(double t) const;

  // Jet of theta at t with ODE-exact higher coefficients: orders 0 and 1
  // come from the interpolant and every later coefficient is produced by
  // the differential equation itself, so coefficient models built on top
  // get exact derivatives.  Requires theta(t) > 0 when n_poly is not an
  // integer.
  template <int J>
  Jet<double, J> theta_jet(double t) const {
    static_assert(J >= 2, "the recursion needs room above theta'");
    Jet<double, J> u;
    u.a[0] = theta(t);
    u.a[1] = theta_d1(t);
    const double inv_a2 = 1.0 / (alpha_n_ * alpha_n_);
    // theta'' = -2 theta'/t - theta^n / alpha^2, differentiated k times:
    // each coefficient of the right-hand side at order k only involves
    // u.a[0..k+1], so the recursion closes order by order.
    for (int k = 0; k + 2 <= J; ++k) {
      Jet<double, J - 1> rhs =
          -2.0 * derivative(u) / Jet<double, J - 1>::variable(t) -
          inv_a2 * pow(truncate<J - 1>(u), n_poly_);
      u.a[k + 2] = rhs.a[k] / double((k + 1) * (k + 2));
    }
    return u;
  }

 private:
  struct Piece {
    double value;
    double d1;
    double d2;
  };
  Piece eval(double t) const;

  double n_poly_;
  double alpha_n_;
  double t_start_;
  std::vector<Node> nodes_;
};

// Integrate the Lane-Emden equation for index n_poly in [0, 5] and unit
// length alpha_n > 0.  Indices 0 and 5 lie outside the stellar family proper
// but are accepted for solver validation: n = 0 has the closed form
// 1 - t^2/(6 alpha^2), and n = 5 stays positive forever, so the solver
// reports NoZeroError for it.
LaneEmdenSolution lane_emden(double n_poly, double alpha_n,
                             const LaneEmdenOptions& opt = {});

// ---------------------------------------------------------------------------
// Stellar oscillation family
// ---------------------------------------------------------------------------

// Scalar model of adiabatic stellar oscillations on [1, R) built on the
// polytrope p = p_c theta^(n+1), rho = rho_c theta^n: with K = Gamma1 p_c /
// rho_c and c_l = sqrt(l (l+1)),
//   p = K theta,  b = -c_l K theta / t,  D = c_l^2 K theta / t^2,
// c is the first-order coupling q2 = -b * (rho'/rho - p'/(Gamma1 p)
// - (t^2 rho)'/(2 t^2 rho)) and q the acoustic potential; both are expanded
// through the equation of state so only theta and theta' enter.  The surface
// t = R is the singular endpoint; the inner cutoff at t = 1 keeps the centre
// regular.
struct StellarParams {
  double n_poly = 3.0;       // polytropic index, in (0, 5)
  double alpha_n = 1.0;      // unit length of the polytrope, > 0
  double Gamma1 = 5.0 / 3.0; // adiabatic exponent, constant, > 0
  double p_c = 1.0;          // central pressure, > 0
  double rho_c = 1.0;        // central density, > 0
  int l = 2;                 // spherical harmonic degree, >= 1
};

// Build the stellar model.  Runs the Lane-Emden solver (options forwarded),
// requires the surface radius R to exceed the inner cutoff 1, and attaches
// the closed-form side channel: case II with pi0 = 0, pi1 = K theta'(R) < 0,
// one finite branch limit {0}, sigma_ess = {0}, essential spectral radius 0.
CoefficientModel stellar_model(const StellarParams& params,
                               const LaneEmdenOptions& opt = {});

}  // namespace esspec
