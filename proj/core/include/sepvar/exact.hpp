#pragma once

// Finite-state resolution of the reference process: the tagged particle is
// pinned at the origin of a discrete torus and the remaining n-1 particles
// occupy the other sites (canonical ensemble, uniform stationary weights).
// Everything here is exact up to linear algebra and quadrature tolerances,
// providing ground truth for the sampler and for the resolvent identities.

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstdint>
#include <vector>

#include "sepvar/lattice.hpp"

namespace sep {

struct StateSpace {
  int dim = 1;
  int side = 2;
  int particles = 1;
  std::vector<std::uint64_t> states;  // occupancy masks over sites, sorted; bit 0 = origin

  int site_count() const { return dim == 1 ? side : side * side; }
  int size() const { return static_cast<int>(states.size()); }
  int index(std::uint64_t mask) const;  // throws if the mask is not a state

  // site <-> bit translation; coordinates are reduced to (-side/2, side/2]
  int site_bit(Site z) const;
  Site bit_site(int bit) const;

  double density() const;           // n / side^d
  double adjusted_density() const;  // (n-1)/(side^d - 1) = E[zeta_j] for j != 0
};

// All states with `particles` occupied sites, origin included. Throws when the
// count exceeds `cap` or the torus does not fit in the 64-bit masks.
StateSpace enumerate_states(int dim, int side, int particles,
                            std::size_t cap = 200000);

using SpMat = Eigen::SparseMatrix<double>;

enum class GenPart { Both, Env, Tag };

// Markov generator with jump law q acting on functions of the state,
//   (G f)(m) = sum over moves m -> m' of rate(m -> m') [f(m') - f(m)],
// where environment particles exchange with empty non-origin sites and the
// tagged particle jumps to an empty site and recenters the frame.
SpMat generator_matrix(const StateSpace& sp, const JumpRates& q,
                       GenPart part = GenPart::Both);

// unit-rate exchange of the occupancies at -e1 and +e1 (d = 1)
SpMat bond_swap_matrix(const StateSpace& sp);

// full / adjoint-in-L2(uniform) / symmetric / antisymmetric parts
struct GeneratorSet {
  SpMat full, adjoint, sym, anti;
};
GeneratorSet build_generators(const StateSpace& sp, const JumpRates& rates,
                              GenPart part = GenPart::Both);

// ------------------------------------------------------------- observables

// component l of sum_j j_l q(j)(rho_adj - zeta_j), one value per state;
// the flavor picks q = p, s, or p(-.) as in drift_value
Eigen::VectorXd drift_vector(const StateSpace& sp, const JumpRates& rates,
                             DriftFlavor flavor, int component);

// component l of sum_j j_l p(j)(1 - zeta_j), the growth rate of E[x_l]
Eigen::VectorXd jump_bias_vector(const StateSpace& sp, const JumpRates& rates,
                                 int component);

// L2(uniform) inner product and the uniform mean
double canonical_inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v);
double canonical_mean(const Eigen::VectorXd& u);

// ---------------------------------------------------------- linear algebra

// (lambda - G)^{-1} f by sparse LU, refined until the residual drops below
// tol * |f|; throws if refinement stalls above that
Eigen::VectorXd resolvent_solve(const SpMat& G, double lambda,
                                const Eigen::VectorXd& f, double tol = 1e-12);

// e^{tG} v by uniformization (G must be a generator matrix); the Poisson
// truncation keeps the series remainder below tol * |v|
Eigen::VectorXd expm_apply(const SpMat& G, double t, const Eigen::VectorXd& v,
                           double tol = 1e-13);

// ------------------------------------------------------- identity checking

// Resolvent comparison at one lambda. With u = (lambda-L)^{-1} F and
// v = (lambda-S)^{-1} F_s, components summed:
//   lhs  = <F_s, v> - <F_rev, u>
//   rhs  = lambda |u-v|^2 + <u-v, (-S)(u-v)>    (>= 0)
//   asym = <u, A u>                             (= 0)
struct ComparisonIdentity {
  double lhs = 0, rhs = 0, asym = 0;
  double scale = 0;  // magnitude reference for relative deviations
};
ComparisonIdentity resolvent_comparison(const StateSpace& sp,
                                        const JumpRates& rates, double lambda);

// Laplace transform of the tagged variance, both ways:
//   resolvent_route = lambda^{-2}(1-rho_adj) sum |j|^2 p(j)
//                     - 2 lambda^{-2} sum_l <F_rev_l, (lambda-L)^{-1} F_l>
//   time_route      = same leading term - 2 lambda^{-2} int_0^inf e^{-lambda r} c(r) dr
// with c(r) = sum_l <F_rev_l, e^{rG} F_l> integrated by adaptive Simpson and
// cut once |c| has decayed below decay_cut * |c(0)| (analytic tail appended).
struct LaplaceVariance {
  double resolvent_route = 0;
  double time_route = 0;
  double cut_time = 0;
};
LaplaceVariance laplace_variance(const StateSpace& sp, const JumpRates& rates,
                                 double lambda, double rel_tol = 1e-10,
                                 double decay_cut = 1e-13);

// V(t) = (1-rho_adj) sum |j|^2 p(j) t - 2 int_0^t (t-r) c(r) dr on the given
// times, each integral refined to rel_tol
std::vector<double> variance_curve(const StateSpace& sp, const JumpRates& rates,
                                   const std::vector<double>& times,
                                   double rel_tol = 1e-10);

// Martingale decomposition of the variance against the occupation-biased
// means: rhs = (1-rho_adj) sum |j|^2 p(j) t
//              + 2 rho_adj sum_j sum_l j_l p(j) int_0^t (E - E_{-j})[x_l(s)] ds
struct DecompositionCheck {
  double lhs = 0;  // variance_curve value
  double rhs = 0;
  double scale = 0;
};
DecompositionCheck variance_decomposition(const StateSpace& sp,
                                         const JumpRates& rates, double t,
                                         double rel_tol = 1e-10);

// <f, (-S) f> in L2(uniform), for any symmetric generator flavor
double dirichlet_form(const SpMat& S, const Eigen::VectorXd& f);

// h1_sq  = <f,(lambda-S)f> + <Af,(lambda-S)^{-1}Af>
// hm1_sq = <f,(lambda-L)^{-1}f>, the dual norm pair
struct HNorms {
  double h1_sq = 0, hm1_sq = 0;
};
HNorms h_norms(const GeneratorSet& g, double lambda, const Eigen::VectorXd& f);

// Three equal evaluations of <f, (lambda-L)^{-1} f> in L2(uniform):
//   resolvent_form  directly from the resolvent solve
//   sup_form        2<f,g> - <g,(lambda-S)g> - <Ag,(lambda-S)^{-1}Ag> at the
//                   maximizer g of that functional
//   inf_form        <f-Ag,(lambda-S)^{-1}(f-Ag)> + lambda|g|^2 + <g,(-S)g>
//                   at its own minimizer
struct VariationalCheck {
  double resolvent_form = 0, sup_form = 0, inf_form = 0;
};
VariationalCheck variational_forms(const StateSpace& sp, const JumpRates& rates,
                                   double lambda, const Eigen::VectorXd& f);

// E_mu[x_l(t)] for the occupation-biased measure mu = zeta_k dUnif / rho_adj,
// by Simpson integration of <mu, e^{rG} phi_l>; used by decomposition tests
double biased_mean_displacement(const StateSpace& sp, const JumpRates& rates,
                                Site k, double t, int component,
                                int panels = 512);

}  // namespace sep
