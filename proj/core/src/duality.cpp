// duality.cpp -- coefficient-side generator actions and their enumeration oracle.

#include "sepvar/duality.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace sep {

// ------------------------------------------------------------------ set keys

SiteSet canonical_set(SiteSet s) {
  std::sort(s.begin(), s.end());
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s[i] == s[i - 1]) throw std::invalid_argument("set key has repeated sites");
  return s;
}

bool set_contains(const SiteSet& b, Site x) {
  return std::binary_search(b.begin(), b.end(), x);
}

SiteSet set_insert(const SiteSet& b, Site x) {
  if (set_contains(b, x)) throw std::invalid_argument("set_insert: site already present");
  SiteSet out = b;
  out.insert(std::upper_bound(out.begin(), out.end(), x), x);
  return out;
}

SiteSet set_erase(const SiteSet& b, Site x) {
  auto it = std::lower_bound(b.begin(), b.end(), x);
  if (it == b.end() || *it != x) throw std::invalid_argument("set_erase: site absent");
  SiteSet out = b;
  out.erase(out.begin() + (it - b.begin()));
  return out;
}

SiteSet set_swap_move(const SiteSet& b, Site x, Site y) {
  const bool ix = set_contains(b, x), iy = set_contains(b, y);
  if (ix && !iy) return set_insert(set_erase(b, x), y);
  if (!ix && iy) return set_insert(set_erase(b, y), x);
  return b;
}

SiteSet set_translate(const SiteSet& b, Site x) {
  SiteSet out;
  out.reserve(b.size());
  for (Site s : b) out.push_back(s + x);
  return canonical_set(out);
}

SiteSet set_tag_move(const SiteSet& b, Site x) {
  if (!set_contains(b, -x)) return set_translate(b, x);
  SiteSet shifted = set_translate(b, x);  // contains the origin
  return set_insert(set_erase(shifted, origin), x);
}

// ------------------------------------------------------ coefficient functions

namespace {

void validate_key(const CoefficientFunction& f, const SiteSet& b) {
  for (Site s : b) {
    if (f.lattice == SetLattice::Punctured && s == origin)
      throw std::invalid_argument("punctured coefficient key contains the origin");
    if (f.dim == 1 && s[1] != 0)
      throw std::invalid_argument("d=1 coefficient key leaves the axis");
  }
}

}  // namespace

void CoefficientFunction::add(const SiteSet& b, double v) {
  SiteSet key = canonical_set(b);
  validate_key(*this, key);
  values[key] += v;
}

void CoefficientFunction::set(const SiteSet& b, double v) {
  SiteSet key = canonical_set(b);
  validate_key(*this, key);
  values[key] = v;
}

std::vector<int> CoefficientFunction::degrees() const {
  std::set<int> d;
  for (const auto& [k, v] : values) {
    (void)v;
    d.insert(static_cast<int>(k.size()));
  }
  return {d.begin(), d.end()};
}

CoefficientFunction CoefficientFunction::slice(int degree) const {
  CoefficientFunction out(dim, lattice);
  for (const auto& [k, v] : values)
    if (static_cast<int>(k.size()) == degree) out.values[k] = v;
  return out;
}

void CoefficientFunction::drop_zeros(double eps) {
  for (auto it = values.begin(); it != values.end();)
    it = std::abs(it->second) <= eps ? values.erase(it) : std::next(it);
}

double inner(const CoefficientFunction& f, const CoefficientFunction& g) {
  double acc = 0;
  for (const auto& [k, v] : f.values) acc += v * g.value(k);
  return acc;
}

double max_abs_diff(const CoefficientFunction& f, const CoefficientFunction& g) {
  double m = 0;
  for (const auto& [k, v] : f.values) m = std::max(m, std::abs(v - g.value(k)));
  for (const auto& [k, v] : g.values) m = std::max(m, std::abs(v - f.value(k)));
  return m;
}

// -------------------------------------------------------- local observables

LocalObservable make_observable(int dim, std::vector<Site> support,
                                std::vector<double> table) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("dimension must be 1 or 2");
  std::vector<Site> s = support;
  std::sort(s.begin(), s.end());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == origin)
      throw std::invalid_argument("observable support must avoid the origin");
    if (dim == 1 && s[i][1] != 0)
      throw std::invalid_argument("d=1 observable support leaves the axis");
    if (i > 0 && s[i] == s[i - 1])
      throw std::invalid_argument("observable support has repeated sites");
  }
  if (s.size() > 24) throw std::invalid_argument("observable support too large");
  if (table.size() != (std::size_t{1} << s.size()))
    throw std::invalid_argument("observable table size is not 2^|support|");
  // reorder the table if the caller's support order differed from sorted order
  if (s != support) {
    std::vector<int> perm(s.size());
    for (std::size_t i = 0; i < s.size(); ++i)
      perm[i] = static_cast<int>(std::lower_bound(s.begin(), s.end(), support[i]) - s.begin());
    std::vector<double> t(table.size());
    for (std::uint32_t m = 0; m < table.size(); ++m) {
      std::uint32_t q = 0;
      for (std::size_t i = 0; i < s.size(); ++i)
        if (m >> i & 1u) q |= 1u << perm[i];
      t[q] = table[m];
    }
    table = std::move(t);
  }
  return LocalObservable{dim, std::move(s), std::move(table)};
}

CoefficientFunction psi_expand(const LocalObservable& f, double rho) {
  if (!(rho > 0.0 && rho < 1.0))
    throw std::invalid_argument("basis expansion needs 0 < rho < 1");
  const double beta = std::sqrt(rho * (1 - rho));
  const std::size_t k = f.support.size();
  const std::uint32_t n_masks = 1u << k;

  std::vector<double> prob(n_masks);
  for (std::uint32_t m = 0; m < n_masks; ++m) {
    double p = 1;
    for (std::size_t i = 0; i < k; ++i) p *= (m >> i & 1u) ? rho : 1 - rho;
    prob[m] = p;
  }

  CoefficientFunction out(f.dim, SetLattice::Punctured);
  for (std::uint32_t b = 0; b < n_masks; ++b) {
    double coeff = 0;
    for (std::uint32_t m = 0; m < n_masks; ++m) {
      double psi = 1;
      for (std::size_t i = 0; i < k; ++i)
        if (b >> i & 1u) psi *= (((m >> i & 1u) ? 1.0 : 0.0) - rho) / beta;
      coeff += prob[m] * f.table[m] * psi;
    }
    if (coeff == 0.0) continue;
    SiteSet key;
    for (std::size_t i = 0; i < k; ++i)
      if (b >> i & 1u) key.push_back(f.support[i]);
    out.values[key] = coeff;
  }
  return out;
}

LocalObservable reconstruct(const CoefficientFunction& f, double rho) {
  if (!(rho > 0.0 && rho < 1.0))
    throw std::invalid_argument("basis expansion needs 0 < rho < 1");
  const double beta = std::sqrt(rho * (1 - rho));
  std::set<Site> sites;
  for (const auto& [k, v] : f.values) {
    (void)v;
    for (Site s : k) sites.insert(s);
  }
  std::vector<Site> support(sites.begin(), sites.end());
  if (support.size() > 24) throw std::invalid_argument("coefficient support too large");
  std::vector<double> table(std::size_t{1} << support.size(), 0.0);
  auto pos = [&](Site s) {
    return static_cast<std::size_t>(
        std::lower_bound(support.begin(), support.end(), s) - support.begin());
  };
  for (std::uint32_t m = 0; m < table.size(); ++m) {
    double acc = 0;
    for (const auto& [k, v] : f.values) {
      double psi = 1;
      for (Site s : k) psi *= (((m >> pos(s) & 1u) ? 1.0 : 0.0) - rho) / beta;
      acc += v * psi;
    }
    table[m] = acc;
  }
  return LocalObservable{f.dim, std::move(support), std::move(table)};
}

double observable_inner(const LocalObservable& f, const LocalObservable& g, double rho) {
  std::set<Site> sites(f.support.begin(), f.support.end());
  sites.insert(g.support.begin(), g.support.end());
  std::vector<Site> u(sites.begin(), sites.end());
  if (u.size() > 24) throw std::invalid_argument("joint support too large");
  auto project = [&u](const LocalObservable& h, std::uint32_t mask) {
    std::uint32_t sub = 0;
    for (std::size_t i = 0; i < h.support.size(); ++i) {
      auto it = std::lower_bound(u.begin(), u.end(), h.support[i]);
      if (mask >> (it - u.begin()) & 1u) sub |= 1u << i;
    }
    return h.table[sub];
  };
  double acc = 0;
  for (std::uint32_t m = 0; m < (1u << u.size()); ++m) {
    double p = 1;
    for (std::size_t i = 0; i < u.size(); ++i) p *= (m >> i & 1u) ? rho : 1 - rho;
    acc += p * project(f, m) * project(g, m);
  }
  return acc;
}

// --------------------------------------------------------- operator actions

namespace {

std::vector<Site> sym_sites(const JumpRates& r) {
  std::vector<Site> out;
  for (Site z : r.sym_support())
    if (r.sym(z) != 0.0) out.push_back(z);
  return out;
}

std::vector<Site> anti_sites(const JumpRates& r) {
  std::vector<Site> out;
  for (Site z : r.sym_support())
    if (r.anti(z) != 0.0) out.push_back(z);
  return out;
}

using CF = CoefficientFunction;

double eval_env_sym(const SiteSet& b, const CF& f, const JumpRates& r,
                    const std::vector<Site>& zs) {
  const double fb = f.value(b);
  double acc = 0;
  for (Site x : b)
    for (Site z : zs) {
      const Site y = x + z;
      if (y == origin || set_contains(b, y)) continue;
      acc += r.sym(z) * (f.value(set_swap_move(b, x, y)) - fb);
    }
  return acc;
}

double eval_tag_sym(const SiteSet& b, const CF& f, const JumpRates& r, double rho,
                    const std::vector<Site>& zs) {
  const double beta = std::sqrt(rho * (1 - rho));
  const double fb = f.value(b);
  double acc = 0;
  for (Site z : zs) {
    const double sz = r.sym(z);
    if (!set_contains(b, z)) {
      acc += (1 - rho) * sz * (f.value(set_tag_move(b, -z)) - fb);
      const SiteSet up = set_insert(b, z);
      acc += beta * sz * (f.value(up) - f.value(set_tag_move(up, -z)));
    } else {
      acc += rho * sz * (f.value(set_tag_move(b, -z)) - fb);
      const SiteSet down = set_erase(b, z);
      acc += beta * sz * (f.value(down) - f.value(set_tag_move(down, -z)));
    }
  }
  return acc;
}

double eval_env_anti0(const SiteSet& b, const CF& f, const JumpRates& r, double rho,
                      const std::vector<Site>& zs) {
  const double fb = f.value(b);
  double acc = 0;
  for (Site x : b)
    for (Site z : zs) {
      const Site y = x + z;
      if (y == origin || set_contains(b, y)) continue;
      acc += r.anti(z) * (f.value(set_swap_move(b, x, y)) - fb);
    }
  return (1 - 2 * rho) * acc;
}

double eval_env_anti_raise(const SiteSet& b, const CF& f, const JumpRates& r, double rho) {
  const double beta = std::sqrt(rho * (1 - rho));
  double acc = 0;
  for (Site y : b) {
    double ay = 0;
    for (Site x : b) ay += r.anti(y - x);
    if (ay != 0.0) acc += ay * f.value(set_erase(b, y));
  }
  return 2 * beta * acc;
}

// The displayed sum over x,y outside B u {0} is reduced through
// sum_{all y} a(y-x) = 0 to a finite sum over y in B u {0}.
double eval_env_anti_lower(const SiteSet& b, const CF& f, const JumpRates& r, double rho,
                           const std::vector<Site>& zs) {
  const double beta = std::sqrt(rho * (1 - rho));
  std::set<Site> xs;
  for (Site z : zs) {
    xs.insert(origin - z);
    for (Site y : b) xs.insert(y - z);
  }
  double acc = 0;
  for (Site x : xs) {
    if (x == origin || set_contains(b, x)) continue;
    double inner_sum = r.anti(origin - x);
    for (Site y : b) inner_sum += r.anti(y - x);
    if (inner_sum != 0.0) acc += inner_sum * f.value(set_insert(b, x));
  }
  return 2 * beta * acc;
}

double eval_tag_anti0(const SiteSet& b, const CF& f, const JumpRates& r, double rho,
                      const std::vector<Site>& zs) {
  const double fb = f.value(b);
  double acc = 0;
  for (Site z : zs) {
    const double w = set_contains(b, z) ? rho : 1 - rho;
    acc += w * r.anti(z) * (f.value(set_tag_move(b, -z)) - fb);
  }
  return acc;
}

double eval_tag_anti_raise(const SiteSet& b, const CF& f, const JumpRates& r, double rho) {
  const double beta = std::sqrt(rho * (1 - rho));
  double acc = 0;
  for (Site z : b) {
    const double az = r.anti(z);
    if (az == 0.0) continue;
    const SiteSet down = set_erase(b, z);
    acc += az * (f.value(down) - f.value(set_tag_move(down, -z)));
  }
  return beta * acc;
}

double eval_tag_anti_lower(const SiteSet& b, const CF& f, const JumpRates& r, double rho,
                           const std::vector<Site>& zs) {
  const double beta = std::sqrt(rho * (1 - rho));
  double acc = 0;
  for (Site z : zs) {
    if (set_contains(b, z)) continue;
    const SiteSet up = set_insert(b, z);
    acc += r.anti(z) * (f.value(up) - f.value(set_tag_move(up, -z)));
  }
  return beta * acc;
}

double eval_bond_swap(const SiteSet& b, const CF& f) {
  return f.value(set_swap_move(b, Site{-1, 0}, Site{1, 0})) - f.value(b);
}

// output sets that can possibly receive a nonzero value
std::set<SiteSet> candidate_sets(CoeffOperator op, const CF& f, const JumpRates& r) {
  const std::vector<Site> zs =
      (op == CoeffOperator::EnvSym || op == CoeffOperator::TagSym) ? sym_sites(r)
                                                                   : anti_sites(r);
  std::set<SiteSet> cand;
  auto push = [&cand](SiteSet s) {
    if (!set_contains(s, origin)) cand.insert(std::move(s));
  };
  for (const auto& [a, v] : f.values) {
    (void)v;
    switch (op) {
      case CoeffOperator::EnvSym:
      case CoeffOperator::EnvAnti0:
        push(a);
        for (Site x : a)
          for (Site z : zs) {
            const Site y = x + z;
            if (y != origin && !set_contains(a, y)) push(set_swap_move(a, x, y));
          }
        break;
      case CoeffOperator::TagSym:
        push(a);
        for (Site z : zs) {
          const SiteSet t = set_tag_move(a, z);
          push(t);
          if (set_contains(a, z)) push(set_erase(a, z));
          if (z != origin && !set_contains(a, z)) push(set_insert(a, z));
          if (set_contains(t, z)) push(set_erase(t, z));
          if (!set_contains(t, z)) push(set_insert(t, z));
        }
        break;
      case CoeffOperator::TagAnti0:
        push(a);
        for (Site z : zs) push(set_tag_move(a, z));
        break;
      case CoeffOperator::EnvAntiRaise:
        for (Site x : a)
          for (Site z : zs) {
            const Site y = x + z;
            if (y != origin && !set_contains(a, y)) push(set_insert(a, y));
          }
        break;
      case CoeffOperator::EnvAntiLower:
        for (Site x : a) push(set_erase(a, x));
        break;
      case CoeffOperator::TagAntiRaise:
        for (Site z : zs) {
          if (!set_contains(a, z)) push(set_insert(a, z));
          const SiteSet t = set_tag_move(a, z);
          if (!set_contains(t, z)) push(set_insert(t, z));
        }
        break;
      case CoeffOperator::TagAntiLower:
        for (Site z : zs) {
          if (set_contains(a, z)) push(set_erase(a, z));
          const SiteSet t = set_tag_move(a, z);
          if (set_contains(t, z)) push(set_erase(t, z));
        }
        break;
      case CoeffOperator::BondSwap:
        push(a);
        push(set_swap_move(a, Site{-1, 0}, Site{1, 0}));
        break;
    }
  }
  return cand;
}

}  // namespace

CoefficientFunction apply_coefficient_operator(CoeffOperator op,
                                               const CoefficientFunction& f,
                                               const JumpRates& rates, double rho) {
  if (f.lattice != SetLattice::Punctured)
    throw std::invalid_argument("coefficient operators act on punctured keys");
  if (op == CoeffOperator::BondSwap && rates.dim != 1)
    throw std::invalid_argument("the origin-bond swap is defined for d=1 only");
  if (!(rho > 0.0 && rho < 1.0))
    throw std::invalid_argument("operators with degree mixing need 0 < rho < 1");

  const std::vector<Site> zs =
      (op == CoeffOperator::EnvSym || op == CoeffOperator::TagSym) ? sym_sites(rates)
                                                                   : anti_sites(rates);
  CoefficientFunction out(f.dim, SetLattice::Punctured);
  for (const SiteSet& b : candidate_sets(op, f, rates)) {
    double v = 0;
    switch (op) {
      case CoeffOperator::EnvSym: v = eval_env_sym(b, f, rates, zs); break;
      case CoeffOperator::TagSym: v = eval_tag_sym(b, f, rates, rho, zs); break;
      case CoeffOperator::EnvAnti0: v = eval_env_anti0(b, f, rates, rho, zs); break;
      case CoeffOperator::EnvAntiRaise: v = eval_env_anti_raise(b, f, rates, rho); break;
      case CoeffOperator::EnvAntiLower:
        v = eval_env_anti_lower(b, f, rates, rho, zs);
        break;
      case CoeffOperator::TagAnti0: v = eval_tag_anti0(b, f, rates, rho, zs); break;
      case CoeffOperator::TagAntiRaise: v = eval_tag_anti_raise(b, f, rates, rho); break;
      case CoeffOperator::TagAntiLower:
        v = eval_tag_anti_lower(b, f, rates, rho, zs);
        break;
      case CoeffOperator::BondSwap: v = eval_bond_swap(b, f); break;
    }
    if (v != 0.0) out.values[b] = v;
  }
  return out;
}

double dirichlet_energy(CoeffOperator op, const CoefficientFunction& f,
                        const JumpRates& rates, double rho) {
  return -inner(f, apply_coefficient_operator(op, f, rates, rho));
}

// ------------------------------------- nearest-neighbor degree-1 closed forms

namespace {

const std::array<Site, 4> kUnits{Site{1, 0}, Site{-1, 0}, Site{0, 1}, Site{0, -1}};

std::vector<Site> units_of(int dim) {
  std::vector<Site> u(kUnits.begin(), kUnits.begin() + 2 * dim);
  return u;
}

}  // namespace

CoefficientFunction apply_A_nn_degree(const CoefficientFunction& g,
                                      NNDegreeAction action, const JumpRates& nn,
                                      double rho) {
  if (g.lattice != SetLattice::Punctured)
    throw std::invalid_argument("closed forms act on punctured degree-1 input");
  for (const auto& [k, v] : g.values) {
    (void)v;
    if (k.size() != 1) throw std::invalid_argument("closed forms need degree-1 input");
  }
  const double beta = std::sqrt(rho * (1 - rho));
  const auto units = units_of(g.dim);
  auto a_nn = [&nn](Site z) { return nn.anti(z); };
  auto gv = [&g](Site x) { return g.value({x}); };

  CoefficientFunction out(g.dim, SetLattice::Punctured);
  if (action == NNDegreeAction::OneToOne) {
    std::set<Site> xs;
    for (const auto& [k, v] : g.values) {
      (void)v;
      xs.insert(k[0]);
      for (Site u : units) {
        if (k[0] + u != origin) xs.insert(k[0] + u);
        xs.insert(u);
      }
      xs.insert(-k[0]);
    }
    for (Site x : xs) {
      if (x == origin) continue;
      double v = 0;
      for (Site u : units) {
        const Site y = x + u;
        if (y == origin) continue;
        v += -rho * (gv(y) - gv(x)) * a_nn(u);
      }
      v += -rho * (gv(x) - gv(-x)) * a_nn(x);
      if (v != 0.0) out.values[{x}] = v;
    }
    return out;
  }

  // OneToTwo: exchange part 2 beta a(y-x)[g(x)-g(y)] on unit-separated pairs,
  // tagged part beta a(x)[g(y)-g(y-x)] + beta a(y)[g(x)-g(x-y)].
  std::set<SiteSet> pairs;
  auto push_pair = [&pairs](Site x, Site y) {
    if (x == y || x == origin || y == origin) return;
    pairs.insert(canonical_set({x, y}));
  };
  for (const auto& [k, v] : g.values) {
    (void)v;
    for (Site u : units) push_pair(k[0], k[0] + u);
    for (Site u : units) {
      push_pair(u, k[0]);
      push_pair(u, k[0] + u);
    }
  }
  for (const SiteSet& b : pairs) {
    const Site x = b[0], y = b[1];
    double v = 2 * beta * a_nn(y - x) * (gv(x) - gv(y));
    if (a_nn(x) != 0.0) v += beta * a_nn(x) * (gv(y) - gv(y - x));
    if (a_nn(y) != 0.0) v += beta * a_nn(y) * (gv(x) - gv(x - y));
    if (v != 0.0) out.values[b] = v;
  }
  return out;
}

// -------------------------------------------------------- origin extensions

CoefficientFunction extend(const CoefficientFunction& f, ExtendMode mode) {
  if (f.lattice != SetLattice::Punctured)
    throw std::invalid_argument("extend expects a punctured coefficient function");
  CoefficientFunction out(f.dim, SetLattice::Full);
  out.values = f.values;
  if (mode == ExtendMode::ZeroFill) return out;

  const auto deg = f.degrees();
  if (deg.empty()) return out;
  if (deg.size() != 1 || deg.back() > 2)
    throw std::invalid_argument("neighbor-average extension handles pure degree <= 2");
  const int n = deg[0];
  const auto units = units_of(f.dim);

  if (n == 1) {
    double avg = 0;
    for (Site u : units) avg += f.value({u});
    avg /= static_cast<double>(units.size());
    if (avg != 0.0) out.values[{origin}] = avg;
    return out;
  }

  // n = 2: candidates y are partners of unit sites inside existing keys
  std::set<Site> ys;
  for (const auto& [k, v] : f.values) {
    (void)v;
    const bool u0 = norm2(k[0]) == 1, u1 = norm2(k[1]) == 1;
    if (u0) ys.insert(k[1]);
    if (u1) ys.insert(k[0]);
  }
  for (Site y : ys) {
    double avg = 0;
    if (norm2(y) == 1) {
      for (Site z : units)
        if (z != y) avg += f.value(canonical_set({z, y}));
      avg /= static_cast<double>(units.size() - 1);
    } else {
      for (Site z : units) avg += f.value(canonical_set({z, y}));
      avg /= static_cast<double>(units.size());
    }
    if (avg != 0.0) out.values[canonical_set({origin, y})] = avg;
  }
  return out;
}

CoefficientFunction restrict_to_punctured(const CoefficientFunction& f) {
  CoefficientFunction out(f.dim, SetLattice::Punctured);
  for (const auto& [k, v] : f.values)
    if (!set_contains(k, origin)) out.values[k] = v;
  return out;
}

CoefficientFunction apply_extended(ExtendedOperator op, const CoefficientFunction& g,
                                   const JumpRates& nn, double rho) {
  if (op == ExtendedOperator::SExt) {
    if (g.lattice != SetLattice::Full)
      throw std::invalid_argument("the extended exchange Laplacian acts on full keys");
    const auto units = units_of(g.dim);
    std::set<SiteSet> cand;
    for (const auto& [a, v] : g.values) {
      (void)v;
      cand.insert(a);
      for (Site x : a)
        for (Site u : units)
          if (!set_contains(a, x + u)) cand.insert(set_swap_move(a, x, x + u));
    }
    CoefficientFunction out(g.dim, SetLattice::Full);
    for (const SiteSet& b : cand) {
      const double gb = g.value(b);
      double acc = 0;
      for (Site x : b)
        for (Site u : units) {
          const Site y = x + u;
          if (set_contains(b, y)) continue;
          acc += 2 * (g.value(set_swap_move(b, x, y)) - gb);  // ordered pairs (i,j),(j,i)
        }
      if (acc != 0.0) out.values[b] = acc;
    }
    return out;
  }

  CoefficientFunction inner_part = apply_A_nn_degree(
      restrict_to_punctured(g),
      op == ExtendedOperator::ABarOneOne ? NNDegreeAction::OneToOne
                                         : NNDegreeAction::OneToTwo,
      nn, rho);
  CoefficientFunction out(g.dim, SetLattice::Full);
  out.values = inner_part.values;  // zero on origin sets by omission
  return out;
}

// --------------------------------------------------- functions of site tuples

FreeFunction lift_free(const CoefficientFunction& f, int degree) {
  FreeFunction out;
  out.dim = f.dim;
  out.degree = degree;
  for (const auto& [k, v] : f.values) {
    if (static_cast<int>(k.size()) != degree)
      throw std::invalid_argument("lift_free needs a pure-degree input");
    if (degree == 1) {
      out.values[{k[0]}] = v;
    } else if (degree == 2) {
      out.values[{k[0], k[1]}] = v;
      out.values[{k[1], k[0]}] = v;
    } else {
      std::vector<Site> perm = k;
      std::sort(perm.begin(), perm.end());
      do out.values[perm] = v;
      while (std::next_permutation(perm.begin(), perm.end()));
    }
  }
  return out;
}

namespace {

bool all_distinct(const std::vector<Site>& x) {
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j)
      if (x[i] == x[j]) return false;
  return true;
}

}  // namespace

TildeResult tilde_extend(const CoefficientFunction& f, int degree, TildeMethod method,
                         std::uint64_t seed, int paths, std::uint64_t step_cap) {
  FreeFunction free = lift_free(f, degree);
  TildeResult res;
  res.value = free;
  if (degree == 1) return res;  // every 1-tuple is already distinct

  const auto units = units_of(f.dim);
  if (method == TildeMethod::FirstStepExact) {
    if (degree != 2)
      throw std::invalid_argument("first-step extension is exact only for degree 2");
    std::set<Site> zs;
    for (const auto& [k, v] : free.values) {
      (void)v;
      for (Site s : k) {
        zs.insert(s);
        for (Site u : units) zs.insert(s + u);
      }
    }
    for (Site z : zs) {
      // one jump of either walker always leaves the doubled point
      double avg = 0;
      for (Site u : units) {
        avg += free.value({z + u, z});
        avg += free.value({z, z + u});
      }
      avg /= static_cast<double>(2 * units.size());
      if (avg != 0.0) res.value.values[{z, z}] = avg;
    }
    return res;
  }

  // Monte Carlo fallback: independent unit walks until the tuple is distinct.
  // Candidate start tuples draw their entries from the support sites and their
  // unit neighbors; values further out decay geometrically and are left at 0.
  std::set<Site> relevant;
  for (const auto& [k, v] : free.values) {
    (void)v;
    for (Site s : k) {
      relevant.insert(s);
      for (Site u : units) relevant.insert(s + u);
    }
  }
  const std::vector<Site> pool(relevant.begin(), relevant.end());
  double tuple_count = 1;
  for (int i = 0; i < degree; ++i) tuple_count *= static_cast<double>(pool.size());
  if (tuple_count > 2e4)
    throw std::invalid_argument("support too large for the Monte Carlo extension");
  std::set<std::vector<Site>> starts;
  {
    std::vector<Site> t(degree, pool.empty() ? origin : pool[0]);
    std::vector<std::size_t> idx(degree, 0);
    const std::size_t n = pool.size();
    bool done = n == 0;
    while (!done) {
      for (int i = 0; i < degree; ++i) t[i] = pool[idx[i]];
      if (!all_distinct(t)) starts.insert(t);
      int k = degree - 1;
      while (k >= 0 && ++idx[k] == n) idx[k--] = 0;
      done = k < 0;
    }
  }
  double worst_se = 0;
  std::uint64_t start_index = 0;
  for (const auto& start : starts) {
    std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ULL * ++start_index);
    std::uniform_int_distribution<int> coord(0, degree - 1);
    std::uniform_int_distribution<int> dir(0, static_cast<int>(units.size()) - 1);
    double sum = 0, sumsq = 0;
    for (int p = 0; p < paths; ++p) {
      std::vector<Site> x = start;
      std::uint64_t steps = 0;
      while (!all_distinct(x)) {
        if (++steps > step_cap) throw std::runtime_error("tilde walk exceeded step cap");
        const int c = coord(rng);
        x[c] = x[c] + units[dir(rng)];
      }
      const double v = free.value(x);
      sum += v;
      sumsq += v * v;
    }
    const double mean = sum / paths;
    const double var = std::max(0.0, sumsq / paths - mean * mean);
    worst_se = std::max(worst_se, std::sqrt(var / paths));
    if (mean != 0.0) res.value.values[start] = mean;
  }
  res.mc_stderr = worst_se;
  return res;
}

// ------------------------------------------------------------ duality oracle

CoefficientFunction oracle_apply(CoeffOperator op, const SiteSet& B,
                                 const JumpRates& rates, double rho) {
  const double beta = std::sqrt(rho * (1 - rho));
  const int dim = rates.dim;
  const bool env = op == CoeffOperator::EnvSym || op == CoeffOperator::EnvAnti0 ||
                   op == CoeffOperator::EnvAntiRaise || op == CoeffOperator::EnvAntiLower;
  const bool sym = op == CoeffOperator::EnvSym || op == CoeffOperator::TagSym;
  auto q = [&rates, sym](Site z) { return sym ? rates.sym(z) : rates.anti(z); };
  std::vector<Site> qsupp;
  for (Site z : rates.sym_support())
    if (q(z) != 0.0) qsupp.push_back(z);

  CoefficientFunction total(dim, SetLattice::Punctured);
  auto accumulate_term = [&](const std::vector<Site>& support_in,
                             auto&& value_of_mask) {
    std::vector<Site> support = support_in;
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end()), support.end());
    std::vector<double> table(std::size_t{1} << support.size());
    auto bit = [&support](std::uint32_t m, Site s) -> double {
      const auto it = std::lower_bound(support.begin(), support.end(), s);
      return (m >> (it - support.begin())) & 1u ? 1.0 : 0.0;
    };
    for (std::uint32_t m = 0; m < table.size(); ++m) table[m] = value_of_mask(m, bit);
    const LocalObservable obs{dim, support, table};
    const CoefficientFunction part = psi_expand(obs, rho);
    for (const auto& [k, v] : part.values) total.values[k] += v;
  };

  if (op == CoeffOperator::BondSwap) {
    const Site l{-1, 0}, r{1, 0};
    std::vector<Site> supp = B;
    supp.push_back(l);
    supp.push_back(r);
    accumulate_term(supp, [&](std::uint32_t m, auto&& bit) {
      double swapped = 1, plain = 1;
      for (Site s : B) {
        double occ = bit(m, s);
        double occ_sw = s == l ? bit(m, r) : s == r ? bit(m, l) : occ;
        plain *= (occ - rho) / beta;
        swapped *= (occ_sw - rho) / beta;
      }
      return swapped - plain;
    });
    total.drop_zeros(0.0);
    return total;
  }

  if (env) {
    // ordered exchanges (i, j), i occupied, j empty, rate q(j - i)
    std::set<std::pair<Site, Site>> moves;
    for (Site x : B)
      for (Site z : qsupp) {
        if (x + z != origin && x + z != x) moves.insert({x, x + z});
        if (x - z != origin && x - z != x) moves.insert({x - z, x});
      }
    for (const auto& [i, j] : moves) {
      if (!set_contains(B, i) && !set_contains(B, j)) continue;
      std::vector<Site> supp = B;
      supp.push_back(i);
      supp.push_back(j);
      const double rate = q(j - i);
      if (rate == 0.0) continue;
      accumulate_term(supp, [&, i = i, j = j](std::uint32_t m, auto&& bit) {
        const double gate = bit(m, i) * (1 - bit(m, j));
        if (gate == 0.0) return 0.0;
        double plain = 1, swapped = 1;
        for (Site s : B) {
          const double occ = bit(m, s);
          const double occ_sw = s == i ? bit(m, j) : s == j ? bit(m, i) : occ;
          plain *= (occ - rho) / beta;
          swapped *= (occ_sw - rho) / beta;
        }
        return rate * gate * (swapped - plain);
      });
    }
  } else {
    // tagged shifts by j with rate q(j), gated on zeta_j = 0;
    // (tau_j zeta)_x = zeta_{j+x} except x = -j, which reads the (empty) target
    for (Site j : qsupp) {
      const double rate = q(j);
      std::vector<Site> supp = B;
      supp.push_back(j);
      for (Site x : B)
        if (x != -j && j + x != origin) supp.push_back(j + x);
      accumulate_term(supp, [&, j](std::uint32_t m, auto&& bit) {
        const double gate = 1 - bit(m, j);
        if (gate == 0.0) return 0.0;
        double plain = 1, shifted = 1;
        for (Site s : B) {
          plain *= (bit(m, s) - rho) / beta;
          const double occ = s == -j ? bit(m, j) : bit(m, j + s);
          shifted *= (occ - rho) / beta;
        }
        return rate * gate * (shifted - plain);
      });
    }
  }
  total.drop_zeros(1e-15);

  switch (op) {
    case CoeffOperator::EnvAnti0:
    case CoeffOperator::TagAnti0: return total.slice(static_cast<int>(B.size()));
    case CoeffOperator::EnvAntiRaise:
    case CoeffOperator::TagAntiRaise: return total.slice(static_cast<int>(B.size()) + 1);
    case CoeffOperator::EnvAntiLower:
    case CoeffOperator::TagAntiLower: return total.slice(static_cast<int>(B.size()) - 1);
    default: return total;
  }
}

namespace {

std::vector<Site> box_sites(int dim, int radius, bool punctured) {
  std::vector<Site> out;
  for (int x = -radius; x <= radius; ++x) {
    if (dim == 1) {
      const Site s{x, 0};
      if (!punctured || s != origin) out.push_back(s);
    } else {
      for (int y = -radius; y <= radius; ++y) {
        const Site s{x, y};
        if (!punctured || s != origin) out.push_back(s);
      }
    }
  }
  return out;
}

void enumerate_subsets(const std::vector<Site>& sites, int size,
                       std::vector<SiteSet>& out) {
  std::vector<int> idx(size);
  for (int i = 0; i < size; ++i) idx[i] = i;
  const int n = static_cast<int>(sites.size());
  if (size > n) return;
  while (true) {
    SiteSet s;
    for (int i : idx) s.push_back(sites[i]);
    out.push_back(canonical_set(std::move(s)));
    int k = size - 1;
    while (k >= 0 && idx[k] == n - size + k) --k;
    if (k < 0) break;
    ++idx[k];
    for (int i = k + 1; i < size; ++i) idx[i] = idx[i - 1] + 1;
  }
}

}  // namespace

OracleReport run_duality_oracle(const JumpRates& rates, double rho, int box_radius,
                                int max_degree, double tolerance) {
  OracleReport report;
  report.tolerance = tolerance;

  std::vector<SiteSet> bases;
  const auto sites = box_sites(rates.dim, box_radius, true);
  for (int n = 1; n <= max_degree; ++n) enumerate_subsets(sites, n, bases);

  std::vector<std::pair<std::string, CoeffOperator>> ops = {
      {"exchange-symmetric", CoeffOperator::EnvSym},
      {"tagged-symmetric", CoeffOperator::TagSym},
      {"exchange-anti-keep", CoeffOperator::EnvAnti0},
      {"exchange-anti-raise", CoeffOperator::EnvAntiRaise},
      {"exchange-anti-lower", CoeffOperator::EnvAntiLower},
      {"tagged-anti-keep", CoeffOperator::TagAnti0},
      {"tagged-anti-raise", CoeffOperator::TagAntiRaise},
      {"tagged-anti-lower", CoeffOperator::TagAntiLower},
  };
  if (rates.dim == 1) ops.push_back({"origin-bond-swap", CoeffOperator::BondSwap});

  for (const auto& [name, op] : ops) {
    OracleCheck check;
    check.name = name;
    for (const SiteSet& B : bases) {
      CoefficientFunction indicator(rates.dim, SetLattice::Punctured);
      indicator.set(B, 1.0);
      const CoefficientFunction lhs =
          apply_coefficient_operator(op, indicator, rates, rho);
      const CoefficientFunction rhs = oracle_apply(op, B, rates, rho);
      check.max_abs_dev = std::max(check.max_abs_dev, max_abs_diff(lhs, rhs));
      ++check.sets_checked;
    }
    check.pass = check.max_abs_dev <= tolerance;
    report.checks.push_back(check);
  }

  // nearest-neighbor closed forms against the generic pipeline
  {
    const JumpRates nn = build_nn_rates(rates);
    OracleCheck c11{"nn-closed-form-keep", 0.0, 0, false};
    OracleCheck c12{"nn-closed-form-raise", 0.0, 0, false};
    for (const Site x : sites) {
      CoefficientFunction g(rates.dim, SetLattice::Punctured);
      g.set({x}, 1.0);
      CoefficientFunction keep =
          apply_coefficient_operator(CoeffOperator::EnvAnti0, g, nn, rho);
      for (const auto& [k, v] : apply_coefficient_operator(CoeffOperator::TagAnti0, g,
                                                           nn, rho)
                                    .values)
        keep.values[k] += v;
      keep.drop_zeros(0.0);
      c11.max_abs_dev = std::max(
          c11.max_abs_dev,
          max_abs_diff(keep, apply_A_nn_degree(g, NNDegreeAction::OneToOne, nn, rho)));
      ++c11.sets_checked;

      CoefficientFunction raise =
          apply_coefficient_operator(CoeffOperator::EnvAntiRaise, g, nn, rho);
      for (const auto& [k, v] : apply_coefficient_operator(CoeffOperator::TagAntiRaise,
                                                           g, nn, rho)
                                    .values)
        raise.values[k] += v;
      raise.drop_zeros(0.0);
      c12.max_abs_dev = std::max(
          c12.max_abs_dev,
          max_abs_diff(raise, apply_A_nn_degree(g, NNDegreeAction::OneToTwo, nn, rho)));
      ++c12.sets_checked;
    }
    c11.pass = c11.max_abs_dev <= tolerance;
    c12.pass = c12.max_abs_dev <= tolerance;
    report.checks.push_back(c11);
    report.checks.push_back(c12);
  }

  report.pass = true;
  for (const auto& c : report.checks) report.pass = report.pass && c.pass;
  return report;
}

// --------------------------------------------------------------- shift bound

double shift_energy_ratio(Site z, int degree, int box_radius, int dim) {
  const auto sites = box_sites(dim, box_radius, true);
  std::vector<SiteSet> bases;
  enumerate_subsets(sites, degree, bases);
  const auto units = units_of(dim);

  double worst = 0;
  for (const SiteSet& B0 : bases) {
    CoefficientFunction f(dim, SetLattice::Punctured);
    f.set(B0, 1.0);
    // numerator: sum_B (f(tau_{-z} B) - f(B))^2 over the sets that can differ
    std::set<SiteSet> num_sets{B0, set_tag_move(B0, z)};
    double num = 0;
    for (const SiteSet& B : num_sets) {
      const double d = f.value(set_tag_move(B, -z)) - f.value(B);
      num += d * d;
    }
    // denominator: unordered unit bonds off the origin
    std::set<SiteSet> den_sets{B0};
    for (Site x : B0)
      for (Site u : units) {
        const Site y = x + u;
        if (y != origin && !set_contains(B0, y)) den_sets.insert(set_swap_move(B0, x, y));
      }
    // each unordered bond with one endpoint in B appears exactly once, seen
    // from its occupied side
    double den = 0;
    for (const SiteSet& B : den_sets)
      for (Site x : B)
        for (Site u : units) {
          const Site y = x + u;
          if (y == origin || set_contains(B, y)) continue;
          const double d = f.value(set_swap_move(B, x, y)) - f.value(B);
          den += d * d;
        }
    if (den > 0) worst = std::max(worst, num / den);
  }
  return worst;
}

}  // namespace sep
