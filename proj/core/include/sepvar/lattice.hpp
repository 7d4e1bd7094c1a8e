// lattice.hpp -- jump-rate tables and exclusion configurations seen from a tagged particle.
//
// Conventions used throughout:
//   * dimension d is 1 or 2; sites are integer pairs, the second component is 0 when d=1
//   * torus coordinates live in (-L/2, L/2]^d with L even; reduction is always explicit
//   * the tagged particle sits at the origin of the reference frame and the origin
//     site is occupied in every valid configuration
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

namespace sep {

using Site = std::array<int, 2>;
using Vec2 = std::array<double, 2>;

constexpr Site origin{0, 0};

inline Site operator+(Site a, Site b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Site operator-(Site a, Site b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Site operator-(Site a) { return {-a[0], -a[1]}; }

inline double dot(Site a, Vec2 m) { return a[0] * m[0] + a[1] * m[1]; }
inline int norm2(Site a) { return a[0] * a[0] + a[1] * a[1]; }
inline int norm_inf(Site a) {
  int x = a[0] < 0 ? -a[0] : a[0];
  int y = a[1] < 0 ? -a[1] : a[1];
  return x > y ? x : y;
}

// ---------------------------------------------------------------- jump rates

// Translation-invariant single-particle rate table p(z), z != 0, finite support.
// Validation enforces: nonnegative entries, p(0) = 0, d=1 tables confined to the
// axis, and (unless explicitly waived) irreducibility of the symmetrization
// s(z) = (p(z) + p(-z))/2, checked by breadth-first search from the origin with
// steps in supp(s) inside a box of radius max(16, 2R(R+1)); the search must reach
// every unit vector.  That certifies supp(s) generates the whole lattice for any
// finite-range table of practical size.
struct JumpRates {
  int dim = 1;
  std::map<Site, double> table;  // strictly positive entries only

  static JumpRates make(int dim, const std::map<Site, double>& entries,
                        bool require_irreducible = true);

  double rate(Site z) const {
    auto it = table.find(z);
    return it == table.end() ? 0.0 : it->second;
  }
  double sym(Site z) const { return 0.5 * (rate(z) + rate(-z)); }   // s(z)
  double anti(Site z) const { return 0.5 * (rate(z) - rate(-z)); }  // a(z)

  int support_radius() const;       // max |z|_inf over the support
  double total_rate() const;        // sum_z p(z)
  double second_moment() const;     // sum_z |z|^2 p(z)
  Vec2 mean_drift() const;          // m = sum_z z p(z)

  std::vector<Site> support() const;      // keys of table, sorted
  std::vector<Site> sym_support() const;  // sites with s(z) > 0, sorted
};

// Nearest-neighbor surrogate with the same drift vector:
//   p_nn(+-e_l) = max(+-e_l.m, 0) when e_l.m != 0, and 1 when e_l.m = 0.
// Then s_nn(e_l) = |e_l.m|/2 or 1 and a_nn(e_l) = (e_l.m)/2 in every case.
JumpRates build_nn_rates(const JumpRates& rates);

// a_nn(e_l) components of the surrogate, usable without building it.
Vec2 nn_drift_coefficients(const JumpRates& rates);

// The reflected law z -> p(-z), generator of the time-reversed dynamics.
JumpRates reversed_rates(const JumpRates& rates);

// ------------------------------------------------------------ density params

struct DensityParams {
  double rho = 0.5;

  explicit DensityParams(double r) : rho(r) {
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("density must lie in [0,1]");
  }
  double beta() const;  // sqrt(rho (1-rho)), the basis normalizer
};

// ------------------------------------------------------- torus configurations

// Occupancy field on the L-torus as seen from the tagged particle. Storage is a
// flat bit array indexed by wrapped coordinates; the origin bit is always set.
struct ReferenceConfig {
  int dim = 1;
  int side = 0;                   // L, even
  std::vector<std::uint8_t> occ;  // size L^dim

  ReferenceConfig() = default;
  ReferenceConfig(int dim, int side);

  int site_count() const { return dim == 1 ? side : side * side; }
  int particle_count() const;

  // wrapped linear index; any integer site is accepted here
  int index_of(Site x) const;
  // canonical representative in (-L/2, L/2]^d
  Site reduce(Site x) const;
  bool in_canonical_range(Site x) const;

  bool occupied(Site x) const { return occ[index_of(x)] != 0; }
  void set(Site x, bool value) { occ[index_of(x)] = value ? 1 : 0; }

  // canonical coordinates of all occupied sites, sorted
  std::vector<Site> occupied_sites() const;

  bool operator==(const ReferenceConfig& o) const {
    return dim == o.dim && side == o.side && occ == o.occ;
  }
};

// Swap the occupancies of two distinct canonical sites. Throws invalid_argument
// when i = j or when the swap would empty the origin, out_of_range when a site
// is not in canonical coordinates.
ReferenceConfig exchange(const ReferenceConfig& cfg, Site i, Site j);

// Jump of the tagged particle by j followed by recentering: the result at site l
// equals the swapped field at j + l. Requires the origin occupied, site j empty,
// j != 0 and j canonical.
ReferenceConfig tagged_shift(const ReferenceConfig& cfg, Site j);

enum class DriftFlavor { Forward, Symmetric, Reversed };

// sum_j j q(j) (rho - zeta_j) with q = p, s or p(-.) by flavor.
Vec2 drift_value(const ReferenceConfig& cfg, const JumpRates& rates, double rho,
                 DriftFlavor flavor);

// torus usable with the given rates: L even and L > 4R
void check_torus_fits(const JumpRates& rates, int side);

}  // namespace sep
