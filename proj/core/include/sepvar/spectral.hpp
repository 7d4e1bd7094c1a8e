#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "sepvar/duality.hpp"
#include "sepvar/lattice.hpp"

// Fourier side of the coefficient calculus: exact transforms of free-lifted
// local functions, the symbol factorization of the nearest-neighbor drift
// actions with their boundary residuals, the quadratic-form minimizer field
// g_lambda, and midpoint-grid quadrature of the variance-bound integrals with
// uniform-in-lambda scans.

namespace sep {

using Complex = std::complex<double>;

// theta_d(u) = (2/2d) sum_{|z|=1} sin^2(pi u.z), the walk symbol
double theta_fn(int dim, Vec2 u);

// gamma(r) = e^{2 pi i r} - e^{-2 pi i r} = 2 i sin(2 pi r)
Complex gamma_fn(double r);

// Drift data entering every symbol: the nearest-neighbor coefficients a_l,
// the density and its fluctuation scale beta = sqrt(rho(1-rho)).
struct SymbolParams {
  int dim = 1;
  Vec2 a{0.0, 0.0};
  double rho = 0.5;
  double beta = 0.5;

  static SymbolParams from(const JumpRates& rates, double rho);
  bool drifted() const { return a[0] != 0.0 || a[1] != 0.0; }
};

// sum_l a_l gamma(v_l), purely imaginary
Complex drift_symbol(const SymbolParams& p, Vec2 v);

// alpha_d(v,w) = sum_l a_l [gamma(v_l) + gamma(w_l) - gamma(v_l + w_l)]
Complex alpha_fn(const SymbolParams& p, Vec2 v, Vec2 w);

// hat f(s_1,..,s_n) = (1/sqrt(n!)) sum_x e^{2 pi i sum_j x_j . s_j} f(x),
// an exact finite sum over the support tuples
Complex transform_free(const FreeFunction& f, const std::vector<Vec2>& freq);

// ---------------------------------------------------- symbol factorization

// The transforms of the extended drift actions factor into a symbol times
// hat g plus a residual that reads g only at the origin and unit sites.
struct BoundaryValues {
  double g0 = 0;
  Vec2 gplus{0.0, 0.0};   // g(+e_l)
  Vec2 gminus{0.0, 0.0};  // g(-e_l)

  static BoundaryValues from(const CoefficientFunction& g);
};

// residual of the degree-preserving action:
//   hat(Abar_11 g)(v) = rho [sum a_l gamma(v_l)] hat g(v) + residual_keep(v)
Complex residual_keep(const SymbolParams& p, const BoundaryValues& b, Vec2 v);

// residual of the degree-raising action:
//   sqrt(2) hat(Abar_12 g)(v,w) =
//       2 beta [sum a_l gamma(v_l+w_l) + alpha(v,w)] hat g(v+w)
//     +   beta [-sum a_l gamma(v_l)   + alpha(v,w)] hat g(v)
//     +   beta [-sum a_l gamma(w_l)   + alpha(w,v)] hat g(w) + residual_raise
Complex residual_raise(const SymbolParams& p, const BoundaryValues& b, Vec2 v,
                       Vec2 w);

// Numerical confirmation of the factorizations for one local g: the pipeline
// residual (transform of apply_extended minus the symbol terms) must equal
// the closed forms at random nodes, and the residuals must vanish
// quadratically into every corner of [0,1]^d.
struct ResidualCheck {
  double max_dev_keep = 0, max_dev_raise = 0;  // closed form vs pipeline
  double corner_keep = 0, corner_raise = 0;    // fitted decay constants C
  bool decay_keep = false, decay_raise = false;
  bool pass = false;
};
ResidualCheck verify_transform_residuals(const CoefficientFunction& g,
                                         const JumpRates& rates, double rho,
                                         int nodes, std::uint64_t seed,
                                         double tol);

// --------------------------------------------------------- minimizer field

// hat(g_lambda)(v) = beta rho sum a_l gamma(v_l)
//                    / (rho^2 |sum a_l gamma(v_l)|^2 + (lambda + theta_d)^2)
Complex minimizer_hat(const SymbolParams& p, double lambda, Vec2 v);

// Inverse transforms of the minimizer on a lattice box, by midpoint-grid
// quadrature with res nodes per axis. The field is real and odd; max_imag
// records the largest imaginary residue as a quadrature diagnostic.
struct MinimizerTable {
  int dim = 1, res = 0, radius = 0;
  double lambda = 0;
  std::vector<double> values;  // box |x|_inf <= radius, row-major
  double max_imag = 0;

  double value(Site x) const;
  double unit_ring_sum() const;  // sum_{|z|=1} g(z)
};
MinimizerTable minimizer_g_lambda(const JumpRates& rates, double rho,
                                  double lambda, int res, int radius);

// ------------------------------------------------------- bound integrals

// Quadrature of every integral in the variance-bound assembly at one lambda.
// step1 is the minimized quadratic; first..fourth are the Schwarz-split
// double integrals controlling the degree-raising terms (with b = -beta/rho
// added and subtracted); delta02 and delta1 are the boundary residual
// integrals for the tilt site j0; line1..line4 and total are the direct
// evaluation of the assembled per-unit-time bound at g = g_lambda, and
// zero_total is the same assembly at the plug-in g = 0 (the free -1-norm of
// the tilt drift, which the minimizer must beat at small lambda).
struct BoundIntegrals {
  double lambda = 0;
  double step1 = 0;
  double first = 0, second = 0, third = 0, fourth = 0;
  double delta02 = 0, delta1 = 0;
  double line1 = 0, line2 = 0, line3 = 0, line4 = 0;
  double total = 0, zero_total = 0;
};
BoundIntegrals eval_bound_integrals(const JumpRates& rates, double rho, Site j0,
                                    double lambda, int res_single,
                                    int res_double);

// total of the assembly at lambda = 1/t: the per-unit-time variance bound
// shape whose boundedness over t is the deliverable
double variance_bound_shape(const JumpRates& rates, double rho, Site j0,
                            double t, int res_single, int res_double);

// eval_bound_integrals over a lambda grid, one row per lambda
std::vector<BoundIntegrals> bound_scan(const JumpRates& rates, double rho,
                                       Site j0,
                                       const std::vector<double>& lambdas,
                                       int res_single, int res_double);

}  // namespace sep
