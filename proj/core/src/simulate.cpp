#include "sepvar/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>
#include <utility>

namespace sep {

namespace {

std::uint64_t splitmix64(std::uint64_t& s) {
  s += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Fenwick tree over per-site propensities; supports point assignment, prefix
// selection and an occasional full rebuild to shed floating-point drift.
class Fenwick {
 public:
  explicit Fenwick(int n) : n_(n), val_(n, 0.0), tree_(n + 1, 0.0) {
    hb_ = 1;
    while (hb_ * 2 <= n_) hb_ *= 2;
  }

  void set(int i, double v) {
    const double d = v - val_[i];
    if (d == 0.0) return;
    val_[i] = v;
    total_ += d;
    for (int j = i + 1; j <= n_; j += j & -j) tree_[j] += d;
  }

  double value(int i) const { return val_[i]; }
  double total() const { return total_; }

  // index whose cumulative bracket contains u, u in [0, total)
  int select(double u) const {
    int pos = 0;
    for (int pw = hb_; pw > 0; pw >>= 1) {
      const int nxt = pos + pw;
      if (nxt <= n_ && tree_[nxt] <= u) {
        pos = nxt;
        u -= tree_[nxt];
      }
    }
    if (pos >= n_) pos = n_ - 1;
    if (val_[pos] > 0.0) return pos;
    // rounding pushed the draw onto an idle site: take the nearest active one
    for (int s = 1; s < n_; ++s) {
      if (pos - s >= 0 && val_[pos - s] > 0.0) return pos - s;
      if (pos + s < n_ && val_[pos + s] > 0.0) return pos + s;
    }
    return pos;
  }

  void rebuild() {
    std::fill(tree_.begin(), tree_.end(), 0.0);
    total_ = 0.0;
    for (int i = 0; i < n_; ++i) {
      total_ += val_[i];
      for (int j = i + 1; j <= n_; j += j & -j) tree_[j] += val_[i];
    }
  }

 private:
  int n_, hb_;
  double total_ = 0.0;
  std::vector<double> val_, tree_;
};

// Precomputed torus tables: fwd[k][i] is the site reached from i by the k-th
// jump vector, back[k][i] the site that reaches i by it.
struct Torus {
  int dim = 1, L = 0, S = 0;
  std::vector<Site> supp;
  std::vector<double> prate;
  std::vector<std::vector<int>> fwd, back;
};

int wrap_coord(int c, int L) { return ((c % L) + L) % L; }

Torus make_torus(const JumpRates& rates, int side) {
  check_torus_fits(rates, side);
  Torus t;
  t.dim = rates.dim;
  t.L = side;
  t.S = t.dim == 1 ? side : side * side;
  t.supp = rates.support();
  t.prate.reserve(t.supp.size());
  for (Site z : t.supp) t.prate.push_back(rates.rate(z));
  t.fwd.assign(t.supp.size(), std::vector<int>(t.S));
  t.back.assign(t.supp.size(), std::vector<int>(t.S));
  for (int i = 0; i < t.S; ++i) {
    const int x = i % t.L, y = i / t.L;
    for (std::size_t k = 0; k < t.supp.size(); ++k) {
      const Site z = t.supp[k];
      const int zy = t.dim == 1 ? 0 : z[1];
      t.fwd[k][i] =
          wrap_coord(x + z[0], t.L) + t.L * wrap_coord(y + zy, t.L) * (t.dim - 1);
      t.back[k][i] =
          wrap_coord(x - z[0], t.L) + t.L * wrap_coord(y - zy, t.L) * (t.dim - 1);
    }
  }
  return t;
}

int lab_index(const Torus& t, int tag, Site k) {
  const int x = tag % t.L, y = tag / t.L;
  const int ky = t.dim == 1 ? 0 : k[1];
  return wrap_coord(x + k[0], t.L) +
         t.L * wrap_coord(y + ky, t.L) * (t.dim - 1);
}

std::vector<std::uint8_t> draw_initial(const Torus& t, const InitialMeasure& m,
                                       std::mt19937_64& rng) {
  std::vector<std::uint8_t> occ(t.S, 0);
  occ[0] = 1;  // tagged particle
  if (m.kind == InitialKind::Canonical) {
    std::vector<int> sites(t.S - 1);
    for (int i = 1; i < t.S; ++i) sites[i - 1] = i;
    for (int c = 0; c < m.particles - 1; ++c) {
      std::uniform_int_distribution<int> pick(c, t.S - 2);
      std::swap(sites[c], sites[pick(rng)]);
      occ[sites[c]] = 1;
    }
    return occ;
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 1; i < t.S; ++i) occ[i] = unif(rng) < m.rho ? 1 : 0;
  if (m.kind == InitialKind::Biased) occ[lab_index(t, 0, m.biased_site)] = 1;
  return occ;
}

// Output slices for one trial inside the batch arrays.
struct TrialOut {
  Vec2* x = nullptr;
  double* counts = nullptr;
  double* comps = nullptr;
  std::uint8_t* probes = nullptr;
};

void run_single(const Torus& T, std::vector<std::uint8_t> occ, int tag,
                const std::vector<double>& times, std::uint64_t event_seed,
                bool track, const std::vector<Site>& probe_sites,
                TrialOut out) {
  const std::size_t ns = T.supp.size();
  Fenwick fen(T.S);
  auto site_rate = [&](int i) {
    double r = 0;
    for (std::size_t k = 0; k < ns; ++k)
      if (!occ[T.fwd[k][i]]) r += T.prate[k];
    return r;
  };
  for (int i = 0; i < T.S; ++i)
    if (occ[i]) fen.set(i, site_rate(i));

  std::mt19937_64 rng(event_seed);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Vec2 disp{0.0, 0.0};
  std::vector<double> comp(ns, 0.0), gate(ns, 0.0), count(ns, 0.0);
  auto refresh_gates = [&] {
    for (std::size_t k = 0; k < ns; ++k)
      gate[k] = occ[T.fwd[k][tag]] ? 0.0 : T.prate[k];
  };
  if (track) refresh_gates();

  std::vector<int> open(ns);
  std::vector<double> wts(ns);
  double t = 0.0, t_int = 0.0;
  std::size_t next = 0;
  long events = 0;

  auto integrate_to = [&](double tt) {
    for (std::size_t k = 0; k < ns; ++k) comp[k] += gate[k] * (tt - t_int);
    t_int = tt;
  };

  while (true) {
    const double rate = fen.total();
    const double tnew =
        rate > 0.0 ? t + expo(rng) / rate
                   : times.back() + 1.0;  // frozen field, run out the clock
    while (next < times.size() && times[next] <= tnew) {
      if (track) integrate_to(times[next]);
      out.x[next] = disp;
      if (next + 1 == times.size() && out.probes)
        for (std::size_t k = 0; k < probe_sites.size(); ++k)
          out.probes[k] = occ[lab_index(T, tag, probe_sites[k])];
      ++next;
    }
    if (next == times.size()) break;
    if (track) integrate_to(tnew);
    t = tnew;

    const int a = fen.select(unif(rng) * rate);
    double ra = 0.0;
    int cnt = 0;
    for (std::size_t k = 0; k < ns; ++k) {
      if (occ[T.fwd[k][a]]) continue;
      open[cnt] = static_cast<int>(k);
      wts[cnt] = T.prate[k];
      ra += T.prate[k];
      ++cnt;
    }
    if (cnt == 0) {  // stale propensity on a blocked site; repair and go on
      fen.set(a, 0.0);
      continue;
    }
    const double w = unif(rng) * ra;
    int k = open[cnt - 1];
    double acc = 0.0;
    for (int c = 0; c < cnt; ++c) {
      acc += wts[c];
      if (w < acc) {
        k = open[c];
        break;
      }
    }

    const int b = T.fwd[k][a];
    occ[a] = 0;
    occ[b] = 1;
    if (a == tag) {
      disp[0] += T.supp[k][0];
      if (T.dim == 2) disp[1] += T.supp[k][1];
      if (track) count[k] += 1.0;
      tag = b;
    }
    fen.set(a, 0.0);
    fen.set(b, site_rate(b));
    for (std::size_t m = 0; m < ns; ++m) {
      const int u = T.back[m][a];
      if (occ[u]) fen.set(u, site_rate(u));
      const int v = T.back[m][b];
      if (occ[v]) fen.set(v, site_rate(v));
    }
    if (track) refresh_gates();
    if ((++events & ((1L << 20) - 1)) == 0) fen.rebuild();
  }

  if (track)
    for (std::size_t k = 0; k < ns; ++k) {
      out.counts[k] = count[k];
      out.comps[k] = comp[k];
    }
}

void validate_config(const SimConfig& cfg) {
  if (cfg.trials < 1) throw std::invalid_argument("trials must be positive");
  if (cfg.sample_times.empty())
    throw std::invalid_argument("sample_times must be nonempty");
  double prev = 0.0;
  for (double t : cfg.sample_times) {
    if (!(t > prev))
      throw std::invalid_argument("sample_times must be strictly increasing and positive");
    prev = t;
  }
}

void validate_measure(const InitialMeasure& m, const Torus& t) {
  switch (m.kind) {
    case InitialKind::Canonical:
      if (m.particles < 1 || m.particles > t.S)
        throw std::invalid_argument("particle number outside the torus");
      return;
    case InitialKind::Biased:
      if ((m.biased_site[0] == 0 && m.biased_site[1] == 0) ||
          lab_index(t, 0, m.biased_site) == 0)
        throw std::invalid_argument("biased site must differ from the origin");
      [[fallthrough]];
    case InitialKind::Bernoulli:
      if (!(m.rho > 0.0) || !(m.rho < 1.0))
        throw std::invalid_argument("density must lie in (0,1)");
  }
}

TrialBatch make_batch_shell(const Torus& T, const SimConfig& cfg) {
  TrialBatch out;
  out.times = cfg.sample_times;
  out.trials = cfg.trials;
  out.side = T.L;
  out.x.assign(static_cast<std::size_t>(cfg.trials) * out.times.size(),
               Vec2{0.0, 0.0});
  if (cfg.track_martingales) {
    out.support = T.supp;
    out.counts.assign(static_cast<std::size_t>(cfg.trials) * T.supp.size(), 0.0);
    out.compensators.assign(
        static_cast<std::size_t>(cfg.trials) * T.supp.size(), 0.0);
  }
  out.probe_sites = cfg.probe_sites;
  if (!cfg.probe_sites.empty())
    out.probes.assign(
        static_cast<std::size_t>(cfg.trials) * cfg.probe_sites.size(), 0);
  return out;
}

TrialOut slice(TrialBatch& b, long trial) {
  TrialOut s;
  s.x = b.x.data() + static_cast<std::size_t>(trial) * b.times.size();
  if (!b.support.empty()) {
    s.counts = b.counts.data() + static_cast<std::size_t>(trial) * b.support.size();
    s.comps =
        b.compensators.data() + static_cast<std::size_t>(trial) * b.support.size();
  }
  if (!b.probe_sites.empty())
    s.probes =
        b.probes.data() + static_cast<std::size_t>(trial) * b.probe_sites.size();
  return s;
}

// Deterministic trial partitioning: results depend on trial indices only, so
// any thread count reproduces the single-thread output byte for byte.
void dispatch_trials(long trials, int threads,
                     const std::function<void(long, long)>& work) {
  const int n = std::max(1, threads);
  if (n == 1 || trials < 2 * n) {
    work(0, trials);
    return;
  }
  std::vector<std::thread> pool;
  const long chunk = (trials + n - 1) / n;
  for (int i = 0; i < n; ++i) {
    const long lo = i * chunk, hi = std::min(trials, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(work, lo, hi);
  }
  for (auto& th : pool) th.join();
}

}  // namespace

InitialMeasure InitialMeasure::bernoulli(double rho) {
  InitialMeasure m;
  m.kind = InitialKind::Bernoulli;
  m.rho = rho;
  return m;
}

InitialMeasure InitialMeasure::biased(double rho, Site k) {
  InitialMeasure m;
  m.kind = InitialKind::Biased;
  m.rho = rho;
  m.biased_site = k;
  return m;
}

InitialMeasure InitialMeasure::canonical(int particles) {
  InitialMeasure m;
  m.kind = InitialKind::Canonical;
  m.particles = particles;
  return m;
}

int default_side(const JumpRates& rates, double t_end) {
  if (!(t_end > 0)) throw std::invalid_argument("t_end must be positive");
  const int r = rates.support_radius();
  const int bySqrt = 8 * r * static_cast<int>(std::ceil(std::sqrt(t_end)));
  return std::max(32, bySqrt);
}

TrialBatch run_batch(const JumpRates& rates, const InitialMeasure& init,
                     const SimConfig& cfg) {
  validate_config(cfg);
  const int side =
      cfg.side > 0 ? cfg.side : default_side(rates, cfg.sample_times.back());
  const Torus T = make_torus(rates, side);
  validate_measure(init, T);
  TrialBatch out = make_batch_shell(T, cfg);
  dispatch_trials(cfg.trials, cfg.threads, [&](long lo, long hi) {
    for (long i = lo; i < hi; ++i) {
      std::uint64_t s =
          cfg.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(i + 1);
      const std::uint64_t init_seed = splitmix64(s);
      const std::uint64_t event_seed = splitmix64(s);
      std::mt19937_64 ir(init_seed);
      run_single(T, draw_initial(T, init, ir), 0, out.times, event_seed,
                 cfg.track_martingales, out.probe_sites, slice(out, i));
    }
  });
  return out;
}

std::pair<TrialBatch, TrialBatch> run_coupled_batch(const JumpRates& rates,
                                                    double rho, Site k,
                                                    const SimConfig& cfg) {
  validate_config(cfg);
  const int side =
      cfg.side > 0 ? cfg.side : default_side(rates, cfg.sample_times.back());
  const Torus T = make_torus(rates, side);
  validate_measure(InitialMeasure::biased(rho, k), T);
  TrialBatch flat = make_batch_shell(T, cfg);
  TrialBatch tilted = make_batch_shell(T, cfg);
  const int forced = lab_index(T, 0, k);
  dispatch_trials(cfg.trials, cfg.threads, [&](long lo, long hi) {
    for (long i = lo; i < hi; ++i) {
      std::uint64_t s =
          cfg.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(i + 1);
      const std::uint64_t init_seed = splitmix64(s);
      const std::uint64_t event_seed = splitmix64(s);
      std::mt19937_64 ir(init_seed);
      std::vector<std::uint8_t> occ =
          draw_initial(T, InitialMeasure::bernoulli(rho), ir);
      std::vector<std::uint8_t> occ2 = occ;
      occ2[forced] = 1;
      run_single(T, std::move(occ), 0, flat.times, event_seed,
                 cfg.track_martingales, flat.probe_sites, slice(flat, i));
      run_single(T, std::move(occ2), 0, tilted.times, event_seed,
                 cfg.track_martingales, tilted.probe_sites, slice(tilted, i));
    }
  });
  return {std::move(flat), std::move(tilted)};
}

// ------------------------------------------------------------- estimators

ValueSE mean_se(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean_se needs data");
  ValueSE out;
  for (double v : xs) out.value += v;
  out.value /= static_cast<double>(xs.size());
  if (xs.size() < 2) return out;
  double ss = 0;
  for (double v : xs) ss += (v - out.value) * (v - out.value);
  const double n = static_cast<double>(xs.size());
  out.se = std::sqrt(ss / (n - 1) / n);
  return out;
}

std::vector<ValueSE> estimate_variance(const TrialBatch& batch,
                                       Centering centering, Vec2 mean_rate) {
  const long n = batch.trials;
  if (n < 2) throw std::invalid_argument("variance needs at least two trials");
  if (centering == Centering::Empirical && n < 3)
    throw std::invalid_argument("jackknife needs at least three trials");
  std::vector<ValueSE> out(batch.times.size());
  std::vector<double> ys(n);
  for (std::size_t k = 0; k < batch.times.size(); ++k) {
    const double t = batch.times[k];
    if (centering == Centering::Exact) {
      for (long i = 0; i < n; ++i) {
        const Vec2 xi = batch.displacement(i, k);
        const double d0 = xi[0] - mean_rate[0] * t;
        const double d1 = xi[1] - mean_rate[1] * t;
        ys[i] = d0 * d0 + d1 * d1;
      }
      out[k] = mean_se(ys);
      continue;
    }
    double s1[2] = {0, 0}, s2[2] = {0, 0};
    for (long i = 0; i < n; ++i) {
      const Vec2 xi = batch.displacement(i, k);
      for (int l = 0; l < 2; ++l) {
        s1[l] += xi[l];
        s2[l] += xi[l] * xi[l];
      }
    }
    const double nn = static_cast<double>(n);
    double vhat = 0;
    for (int l = 0; l < 2; ++l) vhat += (s2[l] - s1[l] * s1[l] / nn) / (nn - 1);
    // leave-one-out replicates from the running sums
    double jsum = 0, jsq = 0;
    for (long i = 0; i < n; ++i) {
      const Vec2 xi = batch.displacement(i, k);
      double vi = 0;
      for (int l = 0; l < 2; ++l) {
        const double r1 = s1[l] - xi[l], r2 = s2[l] - xi[l] * xi[l];
        vi += (r2 - r1 * r1 / (nn - 1)) / (nn - 2);
      }
      jsum += vi;
      jsq += vi * vi;
    }
    const double jbar = jsum / nn;
    out[k].value = vhat;
    out[k].se = std::sqrt(std::max(0.0, (nn - 1) / nn * (jsq - nn * jbar * jbar)));
  }
  return out;
}

std::vector<ValueSE> mean_displacement(const TrialBatch& batch, int component) {
  if (component < 0 || component > 1)
    throw std::invalid_argument("component must be 0 or 1");
  std::vector<ValueSE> out(batch.times.size());
  std::vector<double> ys(batch.trials);
  for (std::size_t k = 0; k < batch.times.size(); ++k) {
    for (long i = 0; i < batch.trials; ++i)
      ys[i] = batch.displacement(i, k)[component];
    out[k] = mean_se(ys);
  }
  return out;
}

std::vector<ValueSE> coupled_mean_difference(const TrialBatch& a,
                                             const TrialBatch& b,
                                             int component) {
  if (a.trials != b.trials || a.times != b.times)
    throw std::invalid_argument("coupled batches must match");
  if (component < 0 || component > 1)
    throw std::invalid_argument("component must be 0 or 1");
  std::vector<ValueSE> out(a.times.size());
  std::vector<double> ys(a.trials);
  for (std::size_t k = 0; k < a.times.size(); ++k) {
    for (long i = 0; i < a.trials; ++i)
      ys[i] = a.displacement(i, k)[component] - b.displacement(i, k)[component];
    out[k] = mean_se(ys);
  }
  return out;
}

// --------------------------------------------------------- identity checks

IdentityCheck check_variance_identity(const JumpRates& rates, double rho,
                                      double t, int grid_points,
                                      const SimConfig& cfg) {
  if (!(t > 0)) throw std::invalid_argument("t must be positive");
  if (grid_points < 1) throw std::invalid_argument("grid_points must be positive");
  SimConfig base = cfg;
  base.track_martingales = false;
  base.probe_sites.clear();
  base.sample_times.resize(grid_points);
  for (int g = 0; g < grid_points; ++g)
    base.sample_times[g] = t * (g + 1) / grid_points;
  base.side = cfg.side > 0 ? cfg.side : default_side(rates, t);

  IdentityCheck out;
  out.side = base.side;
  out.trials = base.trials;

  const TrialBatch flat = run_batch(rates, InitialMeasure::bernoulli(rho), base);
  const Vec2 m = rates.mean_drift();
  const Vec2 mu{m[0] * (1 - rho), m[1] * (1 - rho)};
  const std::vector<ValueSE> vh = estimate_variance(flat, Centering::Exact, mu);
  out.lhs = vh.back().value;
  out.lhs_se = vh.back().se;

  out.rhs = (1 - rho) * rates.second_moment() * t;
  double var_acc = 0;
  const double h = t / grid_points;
  std::vector<double> q(base.trials);
  int slot = 0;
  for (Site j : rates.support()) {
    SimConfig sub = base;
    std::uint64_t s = cfg.seed +
                      0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(++slot);
    sub.seed = splitmix64(s);
    const auto pair = run_coupled_batch(rates, rho, Site{-j[0], -j[1]}, sub);
    const double pj = rates.rate(j);
    for (long i = 0; i < base.trials; ++i) {
      double acc = 0;  // trapezoid over the grid; the s=0 node vanishes
      for (int g = 0; g < grid_points; ++g) {
        const Vec2 xa = pair.first.displacement(i, g);
        const Vec2 xb = pair.second.displacement(i, g);
        const double dot =
            j[0] * (xa[0] - xb[0]) + j[1] * (xa[1] - xb[1]);
        acc += (g + 1 == grid_points ? 0.5 * h : h) * dot;
      }
      q[i] = pj * acc;
    }
    const ValueSE mj = mean_se(q);
    out.rhs += 2 * rho * mj.value;
    var_acc += (2 * rho * mj.se) * (2 * rho * mj.se);
  }
  out.rhs_se = std::sqrt(var_acc);
  const double comb = std::sqrt(out.lhs_se * out.lhs_se + out.rhs_se * out.rhs_se);
  out.z = comb > 0 ? std::abs(out.lhs - out.rhs) / comb
                   : (out.lhs == out.rhs ? 0.0
                                         : std::numeric_limits<double>::infinity());
  return out;
}

MartingaleDiagnostics martingale_diagnostics(const TrialBatch& batch,
                                             const JumpRates& rates,
                                             double rho) {
  if (batch.support.empty())
    throw std::invalid_argument("batch was not recorded with track_martingales");
  MartingaleDiagnostics out;
  out.support = batch.support;
  const double t = batch.times.back();
  const std::size_t ns = batch.support.size();
  const long n = batch.trials;
  std::vector<std::vector<double>> res(ns, std::vector<double>(n));
  for (std::size_t k = 0; k < ns; ++k)
    for (long i = 0; i < n; ++i)
      res[k][i] = batch.count(i, k) - batch.compensator(i, k);

  std::vector<double> ys(n);
  for (std::size_t k = 0; k < ns; ++k) {
    for (long i = 0; i < n; ++i) ys[i] = res[k][i] * res[k][i];
    out.quadratic.push_back(mean_se(ys));
    out.quadratic_target.push_back((1 - rho) * rates.rate(batch.support[k]) * t);
  }
  for (std::size_t a = 0; a < ns; ++a)
    for (std::size_t b = a + 1; b < ns; ++b) {
      for (long i = 0; i < n; ++i) ys[i] = res[a][i] * res[b][i];
      out.cross.push_back(mean_se(ys));
    }
  const Vec2 m = rates.mean_drift();
  const std::size_t last = batch.times.size() - 1;
  for (int l = 0; l < 2; ++l) {
    for (long i = 0; i < n; ++i) ys[i] = batch.displacement(i, last)[l];
    out.drift[l] = mean_se(ys);
    out.drift_target[l] = m[l] * (1 - rho) * t;
  }
  return out;
}

}  // namespace sep
