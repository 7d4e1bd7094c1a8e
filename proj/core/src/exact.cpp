// exact.cpp -- canonical-ensemble ground truth on small tori.

#include "sepvar/exact.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace sep {

// ---------------------------------------------------------------- state space

int StateSpace::index(std::uint64_t mask) const {
  auto it = std::lower_bound(states.begin(), states.end(), mask);
  if (it == states.end() || *it != mask)
    throw std::logic_error("mask is not a canonical state");
  return static_cast<int>(it - states.begin());
}

int StateSpace::site_bit(Site z) const {
  if (dim == 1 && z[1] != 0) throw std::invalid_argument("d=1 site leaves the axis");
  const int x = ((z[0] % side) + side) % side;
  const int y = ((z[1] % side) + side) % side;
  return x + (dim == 2 ? side * y : 0);
}

Site StateSpace::bit_site(int bit) const {
  int x = bit % side;
  int y = dim == 2 ? bit / side : 0;
  if (x > side / 2) x -= side;
  if (y > side / 2) y -= side;
  return Site{x, y};
}

double StateSpace::density() const {
  return static_cast<double>(particles) / site_count();
}

double StateSpace::adjusted_density() const {
  return static_cast<double>(particles - 1) / (site_count() - 1);
}

StateSpace enumerate_states(int dim, int side, int particles, std::size_t cap) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("dimension must be 1 or 2");
  if (side < 2) throw std::invalid_argument("torus side must be at least 2");
  StateSpace sp;
  sp.dim = dim;
  sp.side = side;
  sp.particles = particles;
  const int sites = sp.site_count();
  if (sites > 64) throw std::invalid_argument("torus exceeds the 64-site mask limit");
  if (particles < 1 || particles > sites)
    throw std::invalid_argument("particle count out of range");

  const int env = particles - 1, env_sites = sites - 1;
  // count combinations first so the cap rejects before any allocation
  double count = 1;
  for (int i = 0; i < env; ++i) count = count * (env_sites - i) / (i + 1);
  if (count > static_cast<double>(cap))
    throw std::invalid_argument("state space exceeds the configured cap");

  if (env == 0) {
    sp.states = {1};
    return sp;
  }
  // enumerate env-subsets of the non-origin sites in increasing mask order
  std::uint64_t m = (std::uint64_t{1} << env) - 1;
  const std::uint64_t limit = std::uint64_t{1} << env_sites;
  while (m < limit) {
    sp.states.push_back((m << 1) | 1u);
    const std::uint64_t c = m & (~m + 1), r = m + c;
    m = (((r ^ m) >> 2) / c) | r;
    if (c == 0) break;
  }
  return sp;
}

// ----------------------------------------------------------------- generators

namespace {

void require_fit(const StateSpace& sp, const JumpRates& q) {
  if (sp.dim != q.dim) throw std::invalid_argument("rate and torus dimensions differ");
  if (sp.side < 2 * q.support_radius() + 2)
    throw std::invalid_argument("torus side too small for the jump range");
}

std::uint64_t recenter(const StateSpace& sp, std::uint64_t mask, Site z) {
  // mask with every occupancy read at site + z
  std::uint64_t out = 0;
  for (int b = 0; b < sp.site_count(); ++b)
    if (mask >> b & 1u) out |= std::uint64_t{1} << sp.site_bit(sp.bit_site(b) - z);
  return out;
}

}  // namespace

SpMat generator_matrix(const StateSpace& sp, const JumpRates& q, GenPart part) {
  require_fit(sp, q);
  const auto supp = q.support();
  const int n = sp.size(), sites = sp.site_count();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(n) * (supp.size() * sp.particles + 1));

  for (int i = 0; i < n; ++i) {
    const std::uint64_t m = sp.states[i];
    double out_rate = 0;
    if (part != GenPart::Tag) {
      for (int b = 1; b < sites; ++b) {
        if (!(m >> b & 1u)) continue;
        const Site x = sp.bit_site(b);
        for (Site z : supp) {
          const int tb = sp.site_bit(x + z);
          if (m >> tb & 1u) continue;  // occupied target (includes the origin)
          const double rate = q.rate(z);
          const std::uint64_t next =
              m ^ (std::uint64_t{1} << b) ^ (std::uint64_t{1} << tb);
          trip.emplace_back(i, sp.index(next), rate);
          out_rate += rate;
        }
      }
    }
    if (part != GenPart::Env) {
      for (Site z : supp) {
        const int tb = sp.site_bit(z);
        if (m >> tb & 1u) continue;
        const double rate = q.rate(z);
        const std::uint64_t hopped = (m ^ 0x1u) | (std::uint64_t{1} << tb);
        trip.emplace_back(i, sp.index(recenter(sp, hopped, z)), rate);
        out_rate += rate;
      }
    }
    trip.emplace_back(i, i, -out_rate);
  }
  SpMat G(n, n);
  G.setFromTriplets(trip.begin(), trip.end());
  return G;
}

SpMat bond_swap_matrix(const StateSpace& sp) {
  if (sp.dim != 1)
    throw std::invalid_argument("the origin-bond swap is defined for d=1 only");
  const int bl = sp.site_bit(Site{-1, 0}), br = sp.site_bit(Site{1, 0});
  std::vector<Eigen::Triplet<double>> trip;
  for (int i = 0; i < sp.size(); ++i) {
    const std::uint64_t m = sp.states[i];
    const bool ol = m >> bl & 1u, orr = m >> br & 1u;
    if (ol == orr) continue;
    const std::uint64_t next = m ^ (std::uint64_t{1} << bl) ^ (std::uint64_t{1} << br);
    trip.emplace_back(i, sp.index(next), 1.0);
    trip.emplace_back(i, i, -1.0);
  }
  SpMat N(sp.size(), sp.size());
  N.setFromTriplets(trip.begin(), trip.end());
  return N;
}

GeneratorSet build_generators(const StateSpace& sp, const JumpRates& rates,
                              GenPart part) {
  GeneratorSet g;
  g.full = generator_matrix(sp, rates, part);
  g.adjoint = generator_matrix(sp, reversed_rates(rates), part);
  g.sym = 0.5 * (g.full + g.adjoint);
  g.anti = 0.5 * (g.full - g.adjoint);
  return g;
}

// ---------------------------------------------------------------- observables

Eigen::VectorXd drift_vector(const StateSpace& sp, const JumpRates& rates,
                             DriftFlavor flavor, int component) {
  require_fit(sp, rates);
  const double rho = sp.adjusted_density();
  const auto sites =
      flavor == DriftFlavor::Forward ? rates.support() : rates.sym_support();
  auto q = [&rates, flavor](Site j) {
    switch (flavor) {
      case DriftFlavor::Forward: return rates.rate(j);
      case DriftFlavor::Symmetric: return rates.sym(j);
      default: return rates.rate(-j);
    }
  };
  Eigen::VectorXd v(sp.size());
  for (int i = 0; i < sp.size(); ++i) {
    const std::uint64_t m = sp.states[i];
    double acc = 0;
    for (Site j : sites) {
      const double zeta = (m >> sp.site_bit(j)) & 1u ? 1.0 : 0.0;
      acc += j[component] * q(j) * (rho - zeta);
    }
    v[i] = acc;
  }
  return v;
}

Eigen::VectorXd jump_bias_vector(const StateSpace& sp, const JumpRates& rates,
                                 int component) {
  require_fit(sp, rates);
  Eigen::VectorXd v(sp.size());
  for (int i = 0; i < sp.size(); ++i) {
    const std::uint64_t m = sp.states[i];
    double acc = 0;
    for (const auto& [j, pj] : rates.table) {
      const double zeta = (m >> sp.site_bit(j)) & 1u ? 1.0 : 0.0;
      acc += j[component] * pj * (1.0 - zeta);
    }
    v[i] = acc;
  }
  return v;
}

double canonical_inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  return u.dot(v) / static_cast<double>(u.size());
}

double canonical_mean(const Eigen::VectorXd& u) {
  return u.sum() / static_cast<double>(u.size());
}

// ------------------------------------------------------------- linear algebra

Eigen::VectorXd resolvent_solve(const SpMat& G, double lambda,
                                const Eigen::VectorXd& f, double tol) {
  SpMat A = -G;
  for (int i = 0; i < A.rows(); ++i) A.coeffRef(i, i) += lambda;
  A.makeCompressed();
  Eigen::SparseLU<SpMat> lu(A);
  if (lu.info() != Eigen::Success) throw std::runtime_error("resolvent factorization failed");
  Eigen::VectorXd x = lu.solve(f);
  const double fn = f.norm();
  for (int round = 0; round < 5; ++round) {
    const Eigen::VectorXd r = f - A * x;
    if (r.norm() <= tol * fn) return x;
    x += lu.solve(r);
  }
  if ((f - A * x).norm() > tol * fn)
    throw std::runtime_error("resolvent refinement did not reach tolerance");
  return x;
}

Eigen::VectorXd expm_apply(const SpMat& G, double t, const Eigen::VectorXd& v,
                           double tol) {
  if (t < 0) throw std::invalid_argument("expm_apply needs t >= 0");
  double lam = 0;
  for (int i = 0; i < G.rows(); ++i) lam = std::max(lam, -G.coeff(i, i));
  if (lam * t == 0.0) return v;

  const int chunks = static_cast<int>(std::ceil(lam * t / 256.0));
  const double dt = t / chunks;
  Eigen::VectorXd w = v;
  for (int c = 0; c < chunks; ++c) {
    const double a = lam * dt;
    double coeff = std::exp(-a), weight = coeff;
    Eigen::VectorXd term = w, acc = coeff * w;
    const int kmax = static_cast<int>(a + 12 * std::sqrt(a + 1) + 60);
    for (int k = 1; k <= kmax; ++k) {
      const Eigen::VectorXd gt = G * term;
      term += gt / lam;  // term <- P term with P = I + G/lam
      coeff *= a / k;
      acc += coeff * term;
      weight += coeff;
      if (1.0 - weight <= tol && k > a) break;
    }
    if (1.0 - weight > tol)
      throw std::runtime_error("uniformization series did not converge");
    w = std::move(acc);
  }
  return w;
}

// --------------------------------------------------------- identity checking

ComparisonIdentity resolvent_comparison(const StateSpace& sp,
                                        const JumpRates& rates, double lambda) {
  const GeneratorSet g = build_generators(sp, rates);
  ComparisonIdentity out;
  for (int l = 0; l < rates.dim; ++l) {
    const Eigen::VectorXd F = drift_vector(sp, rates, DriftFlavor::Forward, l);
    const Eigen::VectorXd Fs = drift_vector(sp, rates, DriftFlavor::Symmetric, l);
    const Eigen::VectorXd Fr = drift_vector(sp, rates, DriftFlavor::Reversed, l);
    const Eigen::VectorXd u = resolvent_solve(g.full, lambda, F);
    const Eigen::VectorXd v = resolvent_solve(g.sym, lambda, Fs);
    const double t1 = canonical_inner(Fs, v), t2 = canonical_inner(Fr, u);
    out.lhs += t1 - t2;
    const Eigen::VectorXd d = u - v;
    out.rhs += lambda * canonical_inner(d, d) - canonical_inner(d, g.sym * d);
    out.asym += canonical_inner(u, g.anti * u);
    out.scale = std::max({out.scale, std::abs(t1), std::abs(t2),
                          lambda * canonical_inner(u, u)});
  }
  return out;
}

double dirichlet_form(const SpMat& S, const Eigen::VectorXd& f) {
  return -canonical_inner(f, S * f);
}

HNorms h_norms(const GeneratorSet& g, double lambda, const Eigen::VectorXd& f) {
  HNorms out;
  out.h1_sq = lambda * canonical_inner(f, f) + dirichlet_form(g.sym, f);
  const Eigen::VectorXd af = g.anti * f;
  out.h1_sq += canonical_inner(af, resolvent_solve(g.sym, lambda, af));
  out.hm1_sq = canonical_inner(f, resolvent_solve(g.full, lambda, f));
  return out;
}

namespace {

// Simpson value of samples[0..2k] on a uniform grid of spacing h
double simpson(const std::vector<double>& samples, double h) {
  if (samples.size() % 2 == 0) throw std::logic_error("simpson needs an even panel count");
  double acc = samples.front() + samples.back();
  for (std::size_t i = 1; i + 1 < samples.size(); ++i)
    acc += samples[i] * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// c(r) = sum_l <F_rev_l, e^{rG} F_l> sampled on a uniform grid; the grid stops
// once |c| decays below decay_cut * |c(0)| (after an even panel count).
struct CovarianceGrid {
  double dt = 0;
  std::vector<double> c;
};

CovarianceGrid covariance_grid(const StateSpace& sp, const JumpRates& rates,
                               const SpMat& G, double dt, double t_min,
                               double decay_cut) {
  CovarianceGrid grid;
  grid.dt = dt;
  std::vector<Eigen::VectorXd> y, fr;
  for (int l = 0; l < rates.dim; ++l) {
    y.push_back(drift_vector(sp, rates, DriftFlavor::Forward, l));
    fr.push_back(drift_vector(sp, rates, DriftFlavor::Reversed, l));
  }
  auto c_now = [&] {
    double c = 0;
    for (int l = 0; l < rates.dim; ++l) c += canonical_inner(fr[l], y[l]);
    return c;
  };
  grid.c.push_back(c_now());
  const double c0 = std::max(std::abs(grid.c[0]), 1e-300);
  const std::size_t hard_cap = static_cast<std::size_t>(4e6);
  while (true) {
    for (int l = 0; l < rates.dim; ++l) y[l] = expm_apply(G, dt, y[l]);
    grid.c.push_back(c_now());
    const std::size_t k = grid.c.size() - 1;
    if (k * dt >= t_min && k % 2 == 0 && std::abs(grid.c.back()) <= decay_cut * c0)
      break;
    if (k > hard_cap) throw std::runtime_error("covariance grid failed to decay");
  }
  return grid;
}

}  // namespace

LaplaceVariance laplace_variance(const StateSpace& sp, const JumpRates& rates,
                                 double lambda, double rel_tol, double decay_cut) {
  const GeneratorSet g = build_generators(sp, rates);
  const double rho = sp.adjusted_density();
  const double lead = (1.0 - rho) * rates.second_moment() / (lambda * lambda);

  LaplaceVariance out;
  out.resolvent_route = lead;
  for (int l = 0; l < rates.dim; ++l) {
    const Eigen::VectorXd F = drift_vector(sp, rates, DriftFlavor::Forward, l);
    const Eigen::VectorXd Fr = drift_vector(sp, rates, DriftFlavor::Reversed, l);
    out.resolvent_route -=
        2.0 / (lambda * lambda) *
        canonical_inner(Fr, resolvent_solve(g.full, lambda, F));
  }

  double prev = 0;
  for (double dt = 1.0 / 64;; dt /= 2) {
    const CovarianceGrid grid =
        covariance_grid(sp, rates, g.full, dt, 1.0, decay_cut);
    std::vector<double> integrand(grid.c.size());
    for (std::size_t i = 0; i < grid.c.size(); ++i)
      integrand[i] = std::exp(-lambda * static_cast<double>(i) * dt) * grid.c[i];
    const double T = static_cast<double>(grid.c.size() - 1) * dt;
    // past T the covariance is below decay_cut * |c(0)|; close with a pure
    // exponential tail at the final decay rate
    double tail = 0;
    const double cT = grid.c.back(), cP = grid.c[grid.c.size() - 3];
    if (cT != 0.0 && cP / cT > 1.0) {
      const double gap = std::log(cP / cT) / (2 * dt);
      tail = std::exp(-lambda * T) * cT / (lambda + gap);
    }
    const double value = lead - 2.0 / (lambda * lambda) * (simpson(integrand, dt) + tail);
    out.cut_time = T;
    if (dt < 1.0 / 64 && std::abs(value - prev) <= rel_tol * std::abs(value)) {
      out.time_route = value;
      return out;
    }
    prev = value;
    if (dt < 1.0 / 4096) {
      out.time_route = value;  // quadrature refinement saturated
      return out;
    }
  }
}

std::vector<double> variance_curve(const StateSpace& sp, const JumpRates& rates,
                                   const std::vector<double>& times,
                                   double rel_tol) {
  const SpMat G = generator_matrix(sp, rates);
  const double rho = sp.adjusted_density();
  const double s2 = rates.second_moment();

  std::vector<double> out;
  for (double t : times) {
    if (t < 0) throw std::invalid_argument("variance_curve needs t >= 0");
    if (t == 0) {
      out.push_back(0);
      continue;
    }
    double prev = 0;
    for (int panels = 64;; panels *= 2) {
      const double dt = t / panels;
      std::vector<Eigen::VectorXd> y, fr;
      for (int l = 0; l < rates.dim; ++l) {
        y.push_back(drift_vector(sp, rates, DriftFlavor::Forward, l));
        fr.push_back(drift_vector(sp, rates, DriftFlavor::Reversed, l));
      }
      std::vector<double> integrand(panels + 1);
      for (int i = 0;; ++i) {
        double c = 0;
        for (int l = 0; l < rates.dim; ++l) c += canonical_inner(fr[l], y[l]);
        integrand[i] = (t - i * dt) * c;
        if (i == panels) break;
        for (int l = 0; l < rates.dim; ++l) y[l] = expm_apply(G, dt, y[l]);
      }
      const double value = (1.0 - rho) * s2 * t - 2.0 * simpson(integrand, dt);
      if (panels > 64 &&
          std::abs(value - prev) <= rel_tol * std::max(std::abs(value), 1e-12)) {
        out.push_back(value);
        break;
      }
      prev = value;
      if (panels >= 1 << 16) {
        out.push_back(value);
        break;
      }
    }
  }
  return out;
}

DecompositionCheck variance_decomposition(const StateSpace& sp,
                                         const JumpRates& rates, double t,
                                         double rel_tol) {
  DecompositionCheck out;
  out.lhs = variance_curve(sp, rates, {t}, rel_tol)[0];

  const SpMat G = generator_matrix(sp, rates);
  const double rho = sp.adjusted_density();
  const int n = sp.size();

  // indicator of zeta_{-j} = 1 per state, for the biased measures
  auto occupancy = [&](Site k) {
    Eigen::VectorXd ind(n);
    const int bit = sp.site_bit(k);
    for (int i = 0; i < n; ++i) ind[i] = (sp.states[i] >> bit) & 1u ? 1.0 : 0.0;
    return ind;
  };
  const auto supp = rates.support();
  std::vector<Eigen::VectorXd> indicators;
  for (Site j : supp) indicators.push_back(occupancy(-j));

  double prev = 0;
  for (int panels = 64;; panels *= 2) {
    const double dt = t / panels;
    std::vector<Eigen::VectorXd> phi;
    for (int l = 0; l < rates.dim; ++l)
      phi.push_back(jump_bias_vector(sp, rates, l));
    // samples[j][l][i] collapsed: accumulate Simpson weights on the fly
    double acc = 0;
    for (int i = 0;; ++i) {
      const double weight =
          (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      for (std::size_t jj = 0; jj < supp.size(); ++jj) {
        const Site j = supp[jj];
        const double pj = rates.rate(j);
        for (int l = 0; l < rates.dim; ++l) {
          // <w - mu_{-j}, e^{rG} phi_l> with mu = zeta_{-j} dUnif / rho
          const double mean = canonical_mean(phi[l]);
          const double biased = canonical_inner(indicators[jj], phi[l]) / rho;
          acc += weight * j[l] * pj * (t - i * dt) * (mean - biased);
        }
      }
      if (i == panels) break;
      for (int l = 0; l < rates.dim; ++l) phi[l] = expm_apply(G, dt, phi[l]);
    }
    const double integral = acc * dt / 3.0;
    const double value =
        (1.0 - rho) * rates.second_moment() * t + 2.0 * rho * integral;
    if (panels > 64 &&
        std::abs(value - prev) <= rel_tol * std::max(std::abs(value), 1e-12)) {
      out.rhs = value;
      break;
    }
    prev = value;
    if (panels >= 1 << 16) {
      out.rhs = value;
      break;
    }
  }
  out.scale = std::max(std::abs(out.lhs), std::abs(out.rhs));
  return out;
}

namespace {

Eigen::VectorXd conjugate_gradient(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
    const Eigen::VectorXd& b, double tol) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  Eigen::VectorXd r = b, p = b;
  double rs = r.dot(r);
  const double target = tol * b.norm();
  const int max_iter = 40 * static_cast<int>(b.size()) + 200;
  for (int it = 0; it < max_iter; ++it) {
    if (std::sqrt(rs) <= target) return x;
    const Eigen::VectorXd ap = apply(p);
    const double alpha = rs / p.dot(ap);
    x += alpha * p;
    r -= alpha * ap;
    const double rs2 = r.dot(r);
    p = r + (rs2 / rs) * p;
    rs = rs2;
  }
  if (std::sqrt(rs) > 10 * target)
    throw std::runtime_error("conjugate gradient did not converge");
  return x;
}

}  // namespace

VariationalCheck variational_forms(const StateSpace& sp, const JumpRates& rates,
                                   double lambda, const Eigen::VectorXd& f) {
  const GeneratorSet g = build_generators(sp, rates);
  const int n = sp.size();

  SpMat lam_s = -g.sym;
  for (int i = 0; i < n; ++i) lam_s.coeffRef(i, i) += lambda;
  lam_s.makeCompressed();
  Eigen::SimplicialLDLT<SpMat> chol(lam_s);
  if (chol.info() != Eigen::Success)
    throw std::runtime_error("symmetric-part factorization failed");
  auto R = [&chol](const Eigen::VectorXd& x) { return chol.solve(x).eval(); };
  auto M = [&](const Eigen::VectorXd& x) {
    return (lam_s * x - g.anti * R(g.anti * x)).eval();
  };

  VariationalCheck out;
  out.resolvent_form = canonical_inner(f, resolvent_solve(g.full, lambda, f));

  const Eigen::VectorXd gmax = conjugate_gradient(M, f, 1e-13);
  const Eigen::VectorXd agmax = g.anti * gmax;
  out.sup_form = 2 * canonical_inner(f, gmax) -
                 canonical_inner(gmax, lam_s * gmax) -
                 canonical_inner(agmax, R(agmax));

  const Eigen::VectorXd gmin = conjugate_gradient(M, (-g.anti * R(f)).eval(), 1e-13);
  const Eigen::VectorXd resid = f - g.anti * gmin;
  out.inf_form = canonical_inner(resid, R(resid)) +
                 lambda * canonical_inner(gmin, gmin) -
                 canonical_inner(gmin, g.sym * gmin);
  return out;
}

double biased_mean_displacement(const StateSpace& sp, const JumpRates& rates,
                                Site k, double t, int component, int panels) {
  if (panels % 2) ++panels;
  const SpMat G = generator_matrix(sp, rates);
  const double rho = sp.adjusted_density();
  const int n = sp.size();
  Eigen::VectorXd ind(n);
  const int bit = sp.site_bit(k);
  for (int i = 0; i < n; ++i) ind[i] = (sp.states[i] >> bit) & 1u ? 1.0 : 0.0;

  const double dt = t / panels;
  Eigen::VectorXd phi = jump_bias_vector(sp, rates, component);
  std::vector<double> samples(panels + 1);
  for (int i = 0;; ++i) {
    samples[i] = canonical_inner(ind, phi) / rho;
    if (i == panels) break;
    phi = expm_apply(G, dt, phi);
  }
  return simpson(samples, dt);
}

}  // namespace sep
