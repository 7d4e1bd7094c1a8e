// Acceptance gate: twelve checks, one printed line each, nonzero exit when
// any of them fails. Monte Carlo entries run at fixed sizes and seeds so a
// single pass settles the verdict; the seeds were fixed before first use.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sepvar/duality.hpp"
#include "sepvar/exact.hpp"
#include "sepvar/lattice.hpp"
#include "sepvar/simulate.hpp"
#include "sepvar/spectral.hpp"

using namespace sep;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void verdict(int idx, const std::string& name, bool pass,
             const std::string& detail) {
  std::printf("%s  criterion %2d: %-38s %s\n", pass ? "PASS" : "FAIL", idx,
              name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void run(int idx, const std::string& name,
         const std::function<std::pair<bool, std::string>()>& body) {
  try {
    const auto [pass, detail] = body();
    verdict(idx, name, pass, detail);
  } catch (const std::exception& e) {
    verdict(idx, name, false, std::string("exception: ") + e.what());
  }
}

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

JumpRates tasep() { return JumpRates::make(1, {{{1, 0}, 1.0}}); }
JumpRates asym_chain() {
  return JumpRates::make(1, {{{1, 0}, 0.7}, {{-1, 0}, 0.3}});
}
JumpRates drifted_2d() {
  return JumpRates::make(2, {{{1, 0}, 1.0}, {{0, 1}, 0.5}, {{0, -1}, 0.5}});
}
JumpRates sym_2d() {
  return JumpRates::make(
      2, {{{1, 0}, 0.5}, {{-1, 0}, 0.5}, {{0, 1}, 0.5}, {{0, -1}, 0.5}});
}

std::vector<ValueSE> tasep_like_variance(const JumpRates& rates, int side,
                                         std::vector<double> times, int trials,
                                         std::uint64_t seed) {
  SimConfig cfg;
  cfg.side = side;
  cfg.sample_times = std::move(times);
  cfg.trials = trials;
  cfg.seed = seed;
  const TrialBatch batch = run_batch(rates, InitialMeasure::bernoulli(0.5), cfg);
  // exact centering at m (1 - rho) with rho = 1/2
  const Vec2 rate{rates.mean_drift()[0] * 0.5, rates.mean_drift()[1] * 0.5};
  return estimate_variance(batch, Centering::Exact, rate);
}

// profile checks shared by the bound scans: every reported piece is grid
// converged, eventually monotone, and flat over the last two decades
struct ScanOutcome {
  bool ok = true;
  double worst_disc = 0, worst_tail = 0;
  std::string why;
};

ScanOutcome judge_scan(const std::vector<BoundIntegrals>& coarse,
                       const std::vector<BoundIntegrals>& fine) {
  using Field = double BoundIntegrals::*;
  const std::vector<std::pair<std::string, Field>> fields{
      {"step1", &BoundIntegrals::step1},   {"first", &BoundIntegrals::first},
      {"second", &BoundIntegrals::second}, {"third", &BoundIntegrals::third},
      {"fourth", &BoundIntegrals::fourth}, {"delta02", &BoundIntegrals::delta02},
      {"delta1", &BoundIntegrals::delta1}, {"line3", &BoundIntegrals::line3},
      {"line4", &BoundIntegrals::line4},   {"total", &BoundIntegrals::total}};
  ScanOutcome out;
  for (const auto& [name, f] : fields) {
    std::vector<double> v;
    for (std::size_t i = 0; i < fine.size(); ++i) {
      const double rel = std::abs(coarse[i].*f - fine[i].*f) /
                         std::max(std::abs(fine[i].*f), 1e-300);
      out.worst_disc = std::max(out.worst_disc, rel);
      if (rel > 0.01 && out.ok) {
        out.ok = false;
        out.why = name + " not grid converged";
      }
      v.push_back(fine[i].*f);
    }
    const std::size_t arg = std::max_element(v.begin(), v.end()) - v.begin();
    for (std::size_t i = arg; i + 1 < v.size(); ++i)
      if (v[i + 1] > v[i] * (1 + 1e-3) + 1e-12 && out.ok) {
        out.ok = false;
        out.why = name + " grows after its maximum";
      }
    const double tail = std::abs(v.back() - v[v.size() - 2]) /
                        std::max(std::abs(v[v.size() - 2]), 1e-300);
    out.worst_tail = std::max(out.worst_tail, tail);
    if (tail >= 0.05 && out.ok) {
      out.ok = false;
      out.why = name + " still moving at the smallest lambda";
    }
  }
  if (fine.back().total >= fine.back().zero_total && out.ok) {
    out.ok = false;
    out.why = "minimizer does not beat the zero plug-in";
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main() {
  const std::vector<double> lambda_scan{1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};

  run(1, "stationary tasep diffusivity", [&] {
    const auto v = tasep_like_variance(tasep(), 2048, {20.0}, 10000, 2026);
    const double dev = std::abs(v[0].value / 20.0 - 0.5);
    const double limit = 3 * v[0].se / 20.0;
    return std::pair{dev <= limit,
                     "dev=" + num(dev) + " limit=" + num(limit)};
  });

  run(2, "drifted chain diffusivity approach", [&] {
    const auto v =
        tasep_like_variance(asym_chain(), 4096, {50.0, 100.0}, 10000, 2027);
    const double d50 = std::abs(v[0].value / 50.0 - 0.2);
    const double d100 = std::abs(v[1].value / 100.0 - 0.2);
    const bool ok = d50 <= 0.03 && d100 <= 0.03 && d100 < d50;
    return std::pair{ok, "dev50=" + num(d50) + " dev100=" + num(d100)};
  });

  run(3, "planar variance identity", [&] {
    SimConfig cfg;
    cfg.trials = 10000;
    cfg.seed = 2028;
    const IdentityCheck ic =
        check_variance_identity(drifted_2d(), 0.5, 10.0, 8, cfg);
    return std::pair{std::abs(ic.z) <= 3.0, "z=" + num(ic.z)};
  });

  run(4, "laplace routes and small-torus run", [&] {
    const StateSpace sp = enumerate_states(1, 6, 3);
    double worst = 0;
    for (double lam : {1.0, 0.1, 0.01}) {
      const LaplaceVariance lv = laplace_variance(sp, asym_chain(), lam);
      worst = std::max(worst, std::abs(lv.resolvent_route - lv.time_route) /
                                  std::abs(lv.resolvent_route));
    }
    if (worst > 1e-8) return std::pair{false, "route gap " + num(worst)};

    const StateSpace sp8 = enumerate_states(1, 8, 4);
    const std::vector<double> exact =
        variance_curve(sp8, asym_chain(), {2.0, 5.0});
    SimConfig cfg;
    cfg.side = 8;
    cfg.sample_times = {2.0, 5.0};
    cfg.trials = 40000;
    cfg.seed = 2029;
    const TrialBatch batch =
        run_batch(asym_chain(), InitialMeasure::canonical(4), cfg);
    const Vec2 rate{0.4 * (1 - 3.0 / 7.0), 0.0};
    const auto est = estimate_variance(batch, Centering::Exact, rate);
    double worst_z = 0;
    for (std::size_t k = 0; k < exact.size(); ++k)
      worst_z = std::max(worst_z, std::abs(est[k].value - exact[k]) / est[k].se);
    return std::pair{worst_z <= 3.0,
                     "route gap " + num(worst) + ", sim z=" + num(worst_z)};
  });

  run(5, "resolvent comparison identity", [&] {
    const std::vector<JumpRates> tables{
        asym_chain(), tasep(),
        JumpRates::make(1, {{{1, 0}, 0.9}, {{-1, 0}, 0.1}})};
    double worst = 0, worst_asym = 0, most_negative = 0;
    for (const auto& rates : tables)
      for (int particles : {2, 3}) {
        const StateSpace sp = enumerate_states(1, 6, particles);
        const ComparisonIdentity ci = resolvent_comparison(sp, rates, 0.5);
        const double scale = std::max(ci.scale, 1.0);
        worst = std::max(worst, std::abs(ci.lhs - ci.rhs) / scale);
        worst_asym = std::max(worst_asym, std::abs(ci.asym) / scale);
        most_negative = std::min(most_negative, ci.rhs / scale);
      }
    const bool ok = worst <= 1e-10 && worst_asym <= 1e-10 &&
                    most_negative >= -1e-12;
    return std::pair{ok, "gap=" + num(worst) + " asym=" + num(worst_asym) +
                             " min rhs=" + num(most_negative)};
  });

  run(6, "variational three-way agreement", [&] {
    const StateSpace sp = enumerate_states(1, 6, 3);
    std::vector<Eigen::VectorXd> fs{
        drift_vector(sp, asym_chain(), DriftFlavor::Forward, 0)};
    std::mt19937_64 rng(40);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 5; ++i) {
      Eigen::VectorXd f(sp.size());
      for (int s = 0; s < sp.size(); ++s) f[s] = u(rng);
      fs.push_back(f);
    }
    double worst = 0;
    for (double lam : {1.0, 0.1, 0.01})
      for (const auto& f : fs) {
        const VariationalCheck vc = variational_forms(sp, asym_chain(), lam, f);
        const double scale = std::max(std::abs(vc.resolvent_form), 1e-300);
        worst = std::max(worst,
                         std::max(std::abs(vc.sup_form - vc.resolvent_form),
                                  std::abs(vc.inf_form - vc.resolvent_form)) /
                             scale);
      }
    return std::pair{worst <= 1e-8, "worst rel gap " + num(worst)};
  });

  run(7, "coefficient operator oracle", [&] {
    const OracleReport r1 = run_duality_oracle(asym_chain(), 0.5, 2, 3, 1e-12);
    const OracleReport r2 = run_duality_oracle(drifted_2d(), 0.5, 2, 2, 1e-12);
    double worst = 0;
    for (const auto& rep : {r1, r2})
      for (const auto& c : rep.checks) worst = std::max(worst, c.max_abs_dev);
    return std::pair{r1.pass && r2.pass, "max dev " + num(worst)};
  });

  run(8, "transform residual closed forms", [&] {
    auto g1 = CoefficientFunction(1, SetLattice::Full);
    auto g2 = CoefficientFunction(2, SetLattice::Full);
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int x = -2; x <= 2; ++x) g1.set({Site{x, 0}}, u(rng));
    for (int x = -2; x <= 2; ++x)
      for (int y = -2; y <= 2; ++y) g2.set({Site{x, y}}, u(rng));
    const ResidualCheck r1 =
        verify_transform_residuals(g1, asym_chain(), 0.5, 1000, 41, 1e-12);
    const ResidualCheck r2 =
        verify_transform_residuals(g2, drifted_2d(), 0.5, 1000, 42, 1e-12);
    const double worst = std::max({r1.max_dev_keep, r1.max_dev_raise,
                                   r2.max_dev_keep, r2.max_dev_raise});
    const bool ok = r1.pass && r2.pass && worst <= 1e-12;
    return std::pair{ok, "max dev " + num(worst)};
  });

  run(9, "minimizer field diagnostics", [&] {
    for (int dim : {1, 2}) {
      const JumpRates rates = dim == 1 ? tasep() : drifted_2d();
      const int res = dim == 1 ? (1 << 14) : (1 << 8);
      double sup_lo = 0, sup_hi = 0;
      for (double lam : {1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
        const MinimizerTable lo = minimizer_g_lambda(rates, 0.5, lam, res, 3);
        const MinimizerTable hi =
            minimizer_g_lambda(rates, 0.5, lam, 2 * res, 3);
        if (lo.max_imag > 1e-6 || std::abs(lo.unit_ring_sum()) > 1e-12)
          return std::pair{false, "structure violated at lambda " + num(lam)};
        for (int x = -3; x <= 3; ++x)
          for (int y = -(dim == 2 ? 3 : 0); y <= (dim == 2 ? 3 : 0); ++y) {
            if (std::abs(lo.value({x, y}) + lo.value({-x, -y})) > 1e-12)
              return std::pair{false, std::string("oddness violated")};
            sup_lo = std::max(sup_lo, std::abs(lo.value({x, y})));
            sup_hi = std::max(sup_hi, std::abs(hi.value({x, y})));
          }
      }
      if (!(std::isfinite(sup_hi)) ||
          std::abs(sup_hi - sup_lo) > 0.01 * sup_hi)
        return std::pair{false, "sup not resolution stable, d=" +
                                    std::to_string(dim)};
    }
    return std::pair{true, std::string("both dimensions stable")};
  });

  run(10, "lambda-uniform bound scans", [&] {
    const auto d1c =
        bound_scan(tasep(), 0.5, {1, 0}, lambda_scan, 1 << 23, 1 << 11);
    const auto d1f =
        bound_scan(tasep(), 0.5, {1, 0}, lambda_scan, 1 << 24, 1 << 12);
    const ScanOutcome o1 = judge_scan(d1c, d1f);
    if (!o1.ok) return std::pair{false, "d=1: " + o1.why};

    const auto d2c =
        bound_scan(drifted_2d(), 0.5, {1, 0}, lambda_scan, 1 << 8, 1 << 6);
    const auto d2f =
        bound_scan(drifted_2d(), 0.5, {1, 0}, lambda_scan, 1 << 9, 1 << 7);
    const ScanOutcome o2 = judge_scan(d2c, d2f);
    if (!o2.ok) return std::pair{false, "d=2: " + o2.why};

    // zero-drift control must keep growing like log(1/lambda)
    const auto ctrl =
        bound_scan(sym_2d(), 0.5, {1, 0}, lambda_scan, 1 << 10, 1 << 5);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lambda_scan.size(); ++i) {
      const double x = std::log(1.0 / lambda_scan[i]);
      sx += x, sy += ctrl[i].step1, sxx += x * x, sxy += x * ctrl[i].step1;
    }
    const double n = static_cast<double>(lambda_scan.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    if (!(slope > 0)) return std::pair{false, "control slope " + num(slope)};
    return std::pair{true, "tails " + num(o1.worst_tail) + "/" +
                               num(o2.worst_tail) + ", control slope " +
                               num(slope)};
  });

  run(11, "symmetric chain subdiffusive trend", [&] {
    const JumpRates sym = JumpRates::make(1, {{{1, 0}, 0.5}, {{-1, 0}, 0.5}});
    const auto v =
        tasep_like_variance(sym, 0, {10.0, 40.0, 160.0}, 20000, 2030);
    double weakest = 1e300;
    for (std::size_t k = 0; k + 1 < v.size(); ++k) {
      const double t0 = std::vector<double>{10, 40, 160}[k];
      const double t1 = std::vector<double>{10, 40, 160}[k + 1];
      const double gap = v[k].value / t0 - v[k + 1].value / t1;
      const double se = std::hypot(v[k].se / t0, v[k + 1].se / t1);
      weakest = std::min(weakest, gap / se);
    }
    return std::pair{weakest > 2.0, "weakest drop z=" + num(weakest)};
  });

  run(12, "command-line determinism", [&] {
    const fs::path root = fs::temp_directory_path() / "sepvar-accept";
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path cfg = root / "run.cfg";
    {
      std::ofstream out(cfg);
      out << "dimension = 1\nrates = [[1,0,0.7],[-1,0,0.3]]\nrho = 0.5\n"
             "times = [3]\ntrials = 300\nside = 64\nseed = 77\n";
    }
    const std::string exe = SEPVAR_CLI_PATH;
    for (const char* sub : {"a", "b"}) {
      const std::string cmd = exe + " simulate --config " + cfg.string() +
                              " --out " + (root / sub).string() +
                              " > /dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0)
        return std::pair{false, std::string("driver run failed")};
    }
    for (const char* name : {"simulate_variance.csv", "simulate_martingale.csv"}) {
      const std::string a = slurp(root / "a" / name);
      const std::string b = slurp(root / "b" / name);
      if (a.empty() || a != b)
        return std::pair{false, std::string(name) + " bytes differ"};
    }
    return std::pair{true, std::string("artifacts byte-identical")};
  });

  std::printf("%s: %d of 12 criteria passed\n",
              g_failures == 0 ? "ACCEPTED" : "REJECTED", 12 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
