// duality.hpp -- coefficient calculus for the product-basis expansion of local
// observables of the reference-frame exclusion process.
//
// Observables f with E[f^2] < inf expand over the basis Psi_B(zeta) =
// prod_{x in B} (zeta_x - rho)/beta, indexed by finite site sets B. Generator
// pieces act on the coefficient side through explicit finite formulas; this
// header exposes those actions, the origin extensions used for degree <= 2,
// the lift to functions of distinct site tuples, and an enumeration oracle
// that rebuilds each action from the function side.
#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sepvar/lattice.hpp"

namespace sep {

// sorted, distinct sites; the canonical key of a basis element
using SiteSet = std::vector<Site>;

SiteSet canonical_set(SiteSet s);               // sort + validate distinct
bool set_contains(const SiteSet& b, Site x);
SiteSet set_insert(const SiteSet& b, Site x);   // throws if already present
SiteSet set_erase(const SiteSet& b, Site x);    // throws if absent
SiteSet set_swap_move(const SiteSet& b, Site x, Site y);  // B_{x,y}
SiteSet set_tag_move(const SiteSet& b, Site x);           // tau_x B
SiteSet set_translate(const SiteSet& b, Site x);          // B + x

// ------------------------------------------------------ coefficient functions

enum class SetLattice { Punctured, Full };  // sets avoiding the origin, or not

struct CoefficientFunction {
  int dim = 1;
  SetLattice lattice = SetLattice::Punctured;
  std::map<SiteSet, double> values;

  CoefficientFunction() = default;
  CoefficientFunction(int d, SetLattice l) : dim(d), lattice(l) {}

  double value(const SiteSet& b) const {
    auto it = values.find(b);
    return it == values.end() ? 0.0 : it->second;
  }
  void add(const SiteSet& b, double v);  // canonicalizes, accumulates, validates
  void set(const SiteSet& b, double v);

  std::vector<int> degrees() const;               // sorted distinct key sizes
  CoefficientFunction slice(int degree) const;    // keep keys of one size
  void drop_zeros(double eps = 0.0);
};

double inner(const CoefficientFunction& f, const CoefficientFunction& g);
double max_abs_diff(const CoefficientFunction& f, const CoefficientFunction& g);

// -------------------------------------------------------- local observables

// Cylinder function: values on the occupancies of a finite support off the
// origin (the origin site is identically occupied in the reference frame).
struct LocalObservable {
  int dim = 1;
  std::vector<Site> support;  // sorted, distinct, origin excluded
  std::vector<double> table;  // size 2^support, bit k = occupancy of support[k]

  double eval_mask(std::uint32_t mask) const { return table[mask]; }
};

LocalObservable make_observable(int dim, std::vector<Site> support,
                                std::vector<double> table);

// exact basis coefficients under the product measure at density rho (0<rho<1)
CoefficientFunction psi_expand(const LocalObservable& f, double rho);
// rebuild an observable from finitely many coefficients
LocalObservable reconstruct(const CoefficientFunction& f, double rho);
// E[f g] under the product measure, by enumeration over the joint support
double observable_inner(const LocalObservable& f, const LocalObservable& g, double rho);

// --------------------------------------------------------- operator actions

enum class CoeffOperator {
  EnvSym,        // exchange part of the symmetrized generator
  TagSym,        // tagged-shift part of the symmetrized generator
  EnvAnti0,      // antisymmetric exchange part, degree-preserving
  EnvAntiRaise,  //                              degree-raising
  EnvAntiLower,  //                              degree-lowering
  TagAnti0,      // antisymmetric tagged part, degree-preserving
  TagAntiRaise,  //                            degree-raising
  TagAntiLower,  //                            degree-lowering
  BondSwap,      // unit-rate exchange across the origin bond (d=1 only)
};

// Apply one action to a finitely supported coefficient function (punctured
// keys). Rates supply s(.) and a(.); rho supplies the degree-mixing weights.
CoefficientFunction apply_coefficient_operator(CoeffOperator op,
                                               const CoefficientFunction& f,
                                               const JumpRates& rates, double rho);

// <f, (-op) f>, a finite sum for finitely supported f
double dirichlet_energy(CoeffOperator op, const CoefficientFunction& f,
                        const JumpRates& rates, double rho);

// ------------------------------------- nearest-neighbor degree-1 closed forms

enum class NNDegreeAction { OneToOne, OneToTwo };

// Closed-form action of the antisymmetric part of the nearest-neighbor
// surrogate on a degree-1 coefficient function, written out case by case
// (independent of the generic pipeline above, which it must match).
CoefficientFunction apply_A_nn_degree(const CoefficientFunction& g,
                                      NNDegreeAction action, const JumpRates& nn,
                                      double rho);

// -------------------------------------------------------- origin extensions

enum class ExtendMode { NeighborAverage, ZeroFill };

// Extend a pure-degree (<= 2) punctured coefficient function to all finite
// sets. NeighborAverage fills origin sets with the stated unit-neighbor
// averages; ZeroFill assigns 0.
CoefficientFunction extend(const CoefficientFunction& f, ExtendMode mode);
// Drop origin-containing keys.
CoefficientFunction restrict_to_punctured(const CoefficientFunction& f);

enum class ExtendedOperator {
  SExt,         // unit-bond exchange Laplacian over the full lattice, ordered pairs
  ABarOneOne,   // extended degree-preserving nn antisymmetric action
  ABarOneTwo,   // extended degree-raising   nn antisymmetric action
};

// SExt acts on full-lattice coefficient functions; the ABar actions apply the
// closed forms to the punctured restriction and vanish on origin sets.
CoefficientFunction apply_extended(ExtendedOperator op, const CoefficientFunction& g,
                                   const JumpRates& nn, double rho);

// --------------------------------------------------- functions of site tuples

// Finitely supported function on n-tuples of sites (unordered data symmetrized
// over orderings). Used as the bridge to Fourier transforms.
struct FreeFunction {
  int dim = 1;
  int degree = 1;
  std::map<std::vector<Site>, double> values;

  double value(const std::vector<Site>& x) const {
    auto it = values.find(x);
    return it == values.end() ? 0.0 : it->second;
  }
};

// f_free(x_1..x_n) = f({x_1..x_n}) on distinct tuples, 0 otherwise
FreeFunction lift_free(const CoefficientFunction& f, int degree);

enum class TildeMethod { FirstStepExact, MonteCarlo };

struct TildeResult {
  FreeFunction value;
  double mc_stderr = 0.0;  // 0 for the exact method
};

// Harmonic extension of f_free to coinciding tuples: the value at a tuple off
// the distinct-tuple set is the expected value at the first hit of that set
// under independent unit random walks. For n = 2 one jump always separates a
// doubled point, so the first-step average is exact.
TildeResult tilde_extend(const CoefficientFunction& f, int degree, TildeMethod method,
                         std::uint64_t seed = 0, int paths = 10000,
                         std::uint64_t step_cap = 10000000);

// ------------------------------------------------------------ duality oracle

// Expansion of (O Psi_B) computed on the function side: each generator term is
// a cylinder observable on its own small support, expanded exactly under the
// product measure. Independent of the coefficient formulas above.
CoefficientFunction oracle_apply(CoeffOperator op, const SiteSet& B,
                                 const JumpRates& rates, double rho);

struct OracleCheck {
  std::string name;
  double max_abs_dev = 0.0;
  int sets_checked = 0;
  bool pass = false;
};

struct OracleReport {
  std::vector<OracleCheck> checks;
  double tolerance = 1e-12;
  bool pass = false;
};

// Compare every operator action against the function-side expansion for all
// basis sets of degree 1..max_degree inside the centered box of the given
// radius, then compare the nearest-neighbor closed forms against the generic
// pipeline on the same inputs.
OracleReport run_duality_oracle(const JumpRates& rates, double rho, int box_radius,
                                int max_degree, double tolerance = 1e-12);

// --------------------------------------------------------------- shift bound

// max over degree-n indicator bases in the box of
//   sum_B (f(tau_{-z} B) - f(B))^2  /  sum_B sum_{unit bonds} (f(B_{i,j}) - f(B))^2
// the recorded constant of the coordinate-shift energy bound.
double shift_energy_ratio(Site z, int degree, int box_radius, int dim);

}  // namespace sep
