// lattice.cpp -- rate-table validation and reference-frame configuration moves.

#include "sepvar/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <string>

namespace sep {

// ---------------------------------------------------------------- jump rates

JumpRates JumpRates::make(int dim, const std::map<Site, double>& entries,
                          bool require_irreducible) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("dimension must be 1 or 2");
  JumpRates r;
  r.dim = dim;
  for (const auto& [z, v] : entries) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument("jump rates must be finite and nonnegative");
    if (v == 0.0) continue;
    if (z == origin) throw std::invalid_argument("jump rate at the origin must vanish");
    if (dim == 1 && z[1] != 0)
      throw std::invalid_argument("d=1 rate table has off-axis entries");
    r.table[z] = v;
  }
  if (require_irreducible) {
    // BFS with symmetrized steps; must reach the unit vectors.
    std::vector<Site> steps;
    for (const auto& [z, v] : r.table) {
      (void)v;
      steps.push_back(z);
      steps.push_back(-z);
    }
    const int R = r.support_radius();
    const int box = std::max(16, 2 * R * (R + 1));
    std::set<Site> seen{origin};
    std::queue<Site> frontier;
    frontier.push(origin);
    while (!frontier.empty()) {
      Site x = frontier.front();
      frontier.pop();
      for (Site z : steps) {
        Site y = x + z;
        if (norm_inf(y) > box || seen.count(y)) continue;
        seen.insert(y);
        frontier.push(y);
      }
    }
    bool ok = seen.count(Site{1, 0}) > 0 && (dim == 1 || seen.count(Site{0, 1}) > 0);
    if (!ok)
      throw std::invalid_argument(
          "symmetrized rates do not generate the lattice (reducible table)");
  }
  return r;
}

int JumpRates::support_radius() const {
  int R = 0;
  for (const auto& [z, v] : table) {
    (void)v;
    R = std::max(R, norm_inf(z));
  }
  return R;
}

double JumpRates::total_rate() const {
  double t = 0;
  for (const auto& [z, v] : table) {
    (void)z;
    t += v;
  }
  return t;
}

double JumpRates::second_moment() const {
  double t = 0;
  for (const auto& [z, v] : table) t += norm2(z) * v;
  return t;
}

Vec2 JumpRates::mean_drift() const {
  Vec2 m{0, 0};
  for (const auto& [z, v] : table) {
    m[0] += z[0] * v;
    m[1] += z[1] * v;
  }
  return m;
}

std::vector<Site> JumpRates::support() const {
  std::vector<Site> s;
  for (const auto& [z, v] : table) {
    (void)v;
    s.push_back(z);
  }
  return s;
}

std::vector<Site> JumpRates::sym_support() const {
  std::set<Site> s;
  for (const auto& [z, v] : table) {
    (void)v;
    s.insert(z);
    s.insert(-z);
  }
  return {s.begin(), s.end()};
}

JumpRates build_nn_rates(const JumpRates& rates) {
  const Vec2 m = rates.mean_drift();
  std::map<Site, double> t;
  const std::array<Site, 2> units{Site{1, 0}, Site{0, 1}};
  for (int l = 0; l < rates.dim; ++l) {
    const double ml = m[l];
    if (ml != 0.0) {
      t[units[l]] = std::max(ml, 0.0);
      t[-units[l]] = std::max(-ml, 0.0);
    } else {
      t[units[l]] = 1.0;
      t[-units[l]] = 1.0;
    }
  }
  return JumpRates::make(rates.dim, t);
}

Vec2 nn_drift_coefficients(const JumpRates& rates) {
  const Vec2 m = rates.mean_drift();
  return {0.5 * m[0], 0.5 * m[1]};
}

JumpRates reversed_rates(const JumpRates& rates) {
  std::map<Site, double> t;
  for (const auto& [z, v] : rates.table) t[-z] = v;
  return JumpRates::make(rates.dim, t);
}

double DensityParams::beta() const { return std::sqrt(rho * (1.0 - rho)); }

// ------------------------------------------------------- torus configurations

ReferenceConfig::ReferenceConfig(int d, int L) : dim(d), side(L) {
  if (d != 1 && d != 2) throw std::invalid_argument("dimension must be 1 or 2");
  if (L < 2 || L % 2 != 0) throw std::invalid_argument("torus side must be even and >= 2");
  occ.assign(site_count(), 0);
  occ[0] = 1;  // tagged particle
}

int ReferenceConfig::particle_count() const {
  int n = 0;
  for (auto b : occ) n += b;
  return n;
}

int ReferenceConfig::index_of(Site x) const {
  int ix = ((x[0] % side) + side) % side;
  if (dim == 1) {
    if (x[1] != 0) throw std::out_of_range("d=1 site has nonzero second coordinate");
    return ix;
  }
  int iy = ((x[1] % side) + side) % side;
  return ix + side * iy;
}

Site ReferenceConfig::reduce(Site x) const {
  auto red = [this](int c) {
    int r = ((c % side) + side) % side;
    return r > side / 2 ? r - side : r;
  };
  return dim == 1 ? Site{red(x[0]), 0} : Site{red(x[0]), red(x[1])};
}

bool ReferenceConfig::in_canonical_range(Site x) const { return reduce(x) == x; }

std::vector<Site> ReferenceConfig::occupied_sites() const {
  std::vector<Site> out;
  const int L = side;
  if (dim == 1) {
    for (int i = 0; i < L; ++i)
      if (occ[i]) out.push_back(reduce(Site{i, 0}));
  } else {
    for (int iy = 0; iy < L; ++iy)
      for (int ix = 0; ix < L; ++ix)
        if (occ[ix + L * iy]) out.push_back(reduce(Site{ix, iy}));
  }
  std::sort(out.begin(), out.end());
  return out;
}

ReferenceConfig exchange(const ReferenceConfig& cfg, Site i, Site j) {
  if (!cfg.in_canonical_range(i) || !cfg.in_canonical_range(j))
    throw std::out_of_range("exchange: site outside (-L/2, L/2]^d");
  if (i == j) throw std::invalid_argument("exchange: sites coincide");
  ReferenceConfig out = cfg;
  const int a = cfg.index_of(i), b = cfg.index_of(j);
  std::swap(out.occ[a], out.occ[b]);
  if (!out.occ[cfg.index_of(origin)])
    throw std::invalid_argument("exchange: would empty the origin");
  return out;
}

ReferenceConfig tagged_shift(const ReferenceConfig& cfg, Site j) {
  if (!cfg.in_canonical_range(j)) throw std::out_of_range("tagged_shift: target off torus");
  if (j == origin) throw std::invalid_argument("tagged_shift: null jump");
  if (cfg.occupied(j)) throw std::invalid_argument("tagged_shift: target occupied");
  // swap origin <-> j, then recenter: out(l) = swapped(j + l)
  ReferenceConfig swapped = cfg;
  swapped.occ[cfg.index_of(origin)] = 0;
  swapped.occ[cfg.index_of(j)] = 1;
  ReferenceConfig out(cfg.dim, cfg.side);
  const int L = cfg.side;
  if (cfg.dim == 1) {
    for (int l = 0; l < L; ++l) out.occ[l] = swapped.occ[swapped.index_of(Site{j[0] + l, 0})];
  } else {
    for (int ly = 0; ly < L; ++ly)
      for (int lx = 0; lx < L; ++lx)
        out.occ[lx + L * ly] = swapped.occ[swapped.index_of(Site{j[0] + lx, j[1] + ly})];
  }
  return out;
}

Vec2 drift_value(const ReferenceConfig& cfg, const JumpRates& rates, double rho,
                 DriftFlavor flavor) {
  Vec2 v{0, 0};
  for (const auto& [z, p] : rates.table) {
    double q;
    switch (flavor) {
      case DriftFlavor::Forward: q = p; break;
      case DriftFlavor::Symmetric: q = rates.sym(z); break;
      default: q = rates.rate(-z); break;
    }
    // Symmetric flavor iterates supp(p) only; add the reflected half of supp(s).
    const double w = rho - (cfg.occupied(z) ? 1.0 : 0.0);
    v[0] += z[0] * q * w;
    v[1] += z[1] * q * w;
  }
  if (flavor == DriftFlavor::Symmetric) {
    for (const auto& [z, p] : rates.table) {
      (void)p;
      if (rates.rate(-z) > 0.0) continue;  // -z already visited above
      const Site y = -z;
      const double w = rho - (cfg.occupied(y) ? 1.0 : 0.0);
      v[0] += y[0] * rates.sym(y) * w;
      v[1] += y[1] * rates.sym(y) * w;
    }
  }
  if (flavor == DriftFlavor::Reversed) {
    for (const auto& [z, p] : rates.table) {
      (void)p;
      if (rates.rate(-z) > 0.0) continue;  // sites with p(-.) mass outside supp(p)
      const Site y = -z;
      const double w = rho - (cfg.occupied(y) ? 1.0 : 0.0);
      v[0] += y[0] * rates.rate(z) * w;
      v[1] += y[1] * rates.rate(z) * w;
    }
  }
  return v;
}

void check_torus_fits(const JumpRates& rates, int side) {
  if (side % 2 != 0) throw std::invalid_argument("torus side must be even");
  if (side <= 4 * rates.support_radius())
    throw std::invalid_argument("torus side must exceed four support radii, got L=" +
                                std::to_string(side));
}

}  // namespace sep
