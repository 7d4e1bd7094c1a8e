// sepvar -- experiment driver for the exclusion-process variance laboratory.
//
// Subcommands wrap one module each: simulate (KMC batches + martingale
// diagnostics), identity (Monte Carlo variance decomposition), exact
// (finite-torus resolvent identities), duality-check (coefficient-operator
// oracle), spectral (transform residuals + minimizer field), bound-scan
// (lambda-uniform bound integrals). Every run reads one key = value config,
// applies flag overrides, writes CSV artifacts plus a summary.json with a
// pass/fail entry per check, and exits 0 only if all checks pass; usage and
// validation problems exit 2, failed checks exit 1.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sepvar/config.hpp"
#include "sepvar/duality.hpp"
#include "sepvar/exact.hpp"
#include "sepvar/lattice.hpp"
#include "sepvar/simulate.hpp"
#include "sepvar/spectral.hpp"

#ifndef SEPVAR_VERSION
#define SEPVAR_VERSION "0.0.0"
#endif

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace sep;

// 17 significant digits, '.' decimal (snprintf in the C locale), so doubles
// survive a round trip through the CSV
std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt_short(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

std::string site_name(Site z) {
  return "(" + std::to_string(z[0]) + "," + std::to_string(z[1]) + ")";
}

class Csv {
 public:
  Csv(const fs::path& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary), cols_(header.size()) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    if (cells.size() != cols_) throw std::logic_error("csv column mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i)
      out_ << cells[i] << (i + 1 < cells.size() ? "," : "\n");
  }

 private:
  std::ofstream out_;
  std::size_t cols_;
};

struct Runner {
  ConfigTable table;
  ExperimentConfig cfg;
  fs::path dir;
  json checks = json::array();
  bool all_pass = true;
  std::string fail_report;

  fs::path artifact(const std::string& name) const { return dir / name; }

  void check(const std::string& name, bool pass, double value, double bound,
             const std::string& report) {
    json c;
    c["name"] = name;
    c["pass"] = pass;
    c["value"] = value;
    c["threshold"] = bound;
    c["report"] = report;
    checks.push_back(c);
    std::printf("%s  %s  (%s vs %s)\n", pass ? "   ok" : "*FAIL", name.c_str(),
                fmt_short(value).c_str(), fmt_short(bound).c_str());
    if (!pass) {
      all_pass = false;
      if (fail_report.empty()) fail_report = (dir / report).string();
    }
  }

  int finish(const std::string& subcommand) {
    json s;
    s["subcommand"] = subcommand;
    s["pass"] = all_pass;
    s["seed"] = cfg.seed;
    json versions;
    versions["sepvar"] = SEPVAR_VERSION;
    versions["compiler"] = __VERSION__;
    versions["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                        std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION);
    s["versions"] = versions;
    json echo;
    for (const auto& k : table.keys()) echo[k] = table.raw(k);
    s["config"] = echo;
    s["checks"] = checks;
    std::ofstream out(dir / "summary.json", std::ios::binary);
    out << s.dump(2) << "\n";
    if (!all_pass)
      std::fprintf(stderr, "failing report: %s\n", fail_report.c_str());
    return all_pass ? 0 : 1;
  }
};

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
};

void add_common(CLI::App* sub, CommonOpts& c) {
  sub->add_option("--config", c.config_path, "key = value config file");
  sub->add_option("--set", c.sets,
                  "override KEY=VALUE (value is a JSON fragment); repeatable");
  auto alias = [sub, &c](const std::string& flag, const std::string& key,
                         bool quote, const std::string& help) {
    sub->add_option_function<std::string>(
        flag,
        [&c, key, quote](const std::string& v) {
          c.sets.push_back(key + "=" + (quote ? "\"" + v + "\"" : v));
        },
        help);
  };
  alias("--seed", "seed", false, "RNG seed");
  alias("--trials", "trials", false, "trial count");
  alias("--side", "side", false, "torus side (0 = derive)");
  alias("--threads", "threads", false, "worker threads");
  alias("--rho", "rho", false, "particle density");
  alias("--out", "output_dir", true, "output directory");
}

Runner make_runner(const CommonOpts& c) {
  ConfigTable t = c.config_path.empty() ? ConfigTable::parse_text("")
                                        : ConfigTable::parse_file(c.config_path);
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects KEY=VALUE, got: " + s);
    t.override_value(s.substr(0, eq), s.substr(eq + 1));
  }
  Runner r;
  r.cfg = ExperimentConfig::load(t);
  r.table = std::move(t);
  r.dir = fs::path(r.cfg.output_dir);
  fs::create_directories(r.dir);
  return r;
}

double effective_density(const Runner& r, const TrialBatch& batch) {
  if (r.cfg.particles <= 0) return r.cfg.rho;
  const long sites = r.cfg.dimension == 1
                         ? batch.side
                         : static_cast<long>(batch.side) * batch.side;
  return static_cast<double>(r.cfg.particles - 1) / (sites - 1);
}

// ----------------------------------------------------------------- simulate

int cmd_simulate(Runner& r) {
  const ExperimentConfig& cfg = r.cfg;
  if (cfg.times.empty())
    throw std::invalid_argument("simulate needs times = [t1, t2, ...]");
  const JumpRates rates = cfg.jump_rates();

  SimConfig sc;
  sc.side = cfg.side;
  sc.sample_times = cfg.times;
  sc.track_martingales = true;
  sc.seed = cfg.seed;
  sc.trials = cfg.trials;
  sc.threads = cfg.threads;
  const InitialMeasure init = cfg.particles > 0
                                  ? InitialMeasure::canonical(cfg.particles)
                                  : InitialMeasure::bernoulli(cfg.rho);
  const TrialBatch batch = run_batch(rates, init, sc);

  const double rho_eff = effective_density(r, batch);
  const Vec2 m = rates.mean_drift();
  const Vec2 mean_rate{m[0] * (1 - rho_eff), m[1] * (1 - rho_eff)};
  const auto var_exact = estimate_variance(batch, Centering::Exact, mean_rate);
  const auto var_emp = estimate_variance(batch, Centering::Empirical, mean_rate);
  const auto mean1 = mean_displacement(batch, 0);
  const auto mean2 = mean_displacement(batch, 1);

  Csv csv(r.artifact("simulate_variance.csv"),
          {"time", "mean_x1", "mean_x1_se", "mean_x2", "mean_x2_se",
           "var_exact", "var_exact_se", "var_exact_per_time", "var_empirical",
           "var_empirical_se"});
  for (std::size_t k = 0; k < batch.times.size(); ++k) {
    const double t = batch.times[k];
    csv.row({fmt(t), fmt(mean1[k].value), fmt(mean1[k].se), fmt(mean2[k].value),
             fmt(mean2[k].se), fmt(var_exact[k].value), fmt(var_exact[k].se),
             fmt(var_exact[k].value / t), fmt(var_emp[k].value),
             fmt(var_emp[k].se)});
  }

  const MartingaleDiagnostics md = martingale_diagnostics(batch, rates, rho_eff);
  const double z_max = r.table.get_double("z_max", 4.0);
  Csv mart(r.artifact("simulate_martingale.csv"),
           {"kind", "j1", "j2", "value", "se", "target", "z"});
  for (std::size_t j = 0; j < md.support.size(); ++j) {
    const double z =
        (md.quadratic[j].value - md.quadratic_target[j]) / md.quadratic[j].se;
    mart.row({"quadratic", site_name(md.support[j]), "", fmt(md.quadratic[j].value),
              fmt(md.quadratic[j].se), fmt(md.quadratic_target[j]), fmt(z)});
    r.check("quadratic_moment_" + site_name(md.support[j]), std::abs(z) <= z_max,
            z, z_max, "simulate_martingale.csv");
  }
  std::size_t slot = 0;
  for (std::size_t a = 0; a < md.support.size(); ++a)
    for (std::size_t b = a + 1; b < md.support.size(); ++b, ++slot) {
      const double z = md.cross[slot].value / md.cross[slot].se;
      mart.row({"cross", site_name(md.support[a]), site_name(md.support[b]),
                fmt(md.cross[slot].value), fmt(md.cross[slot].se), fmt(0.0),
                fmt(z)});
      r.check("cross_moment_" + site_name(md.support[a]) + site_name(md.support[b]),
              std::abs(z) <= z_max, z, z_max, "simulate_martingale.csv");
    }
  for (int l = 0; l < cfg.dimension; ++l) {
    const double z = (md.drift[l].value - md.drift_target[l]) / md.drift[l].se;
    mart.row({"drift", std::to_string(l + 1), "", fmt(md.drift[l].value),
              fmt(md.drift[l].se), fmt(md.drift_target[l]), fmt(z)});
    r.check("mean_displacement_" + std::to_string(l + 1), std::abs(z) <= z_max,
            z, z_max, "simulate_martingale.csv");
  }
  return r.finish("simulate");
}

// ----------------------------------------------------------------- identity

int cmd_identity(Runner& r) {
  const ExperimentConfig& cfg = r.cfg;
  const double t =
      r.table.get_double("time", cfg.times.empty() ? 10.0 : cfg.times.back());
  const int grid = r.table.get_int("grid_points", 8);
  const JumpRates rates = cfg.jump_rates();

  SimConfig sc;
  sc.side = cfg.side;
  sc.seed = cfg.seed;
  sc.trials = cfg.trials;
  sc.threads = cfg.threads;
  const IdentityCheck ic = check_variance_identity(rates, cfg.rho, t, grid, sc);

  const double walk = (1 - cfg.rho) * rates.second_moment() * t;
  Csv csv(r.artifact("identity.csv"),
          {"time", "lhs", "lhs_se", "rhs", "rhs_se", "walk_term",
           "transport_term", "transport_se", "z", "side", "trials"});
  csv.row({fmt(t), fmt(ic.lhs), fmt(ic.lhs_se), fmt(ic.rhs), fmt(ic.rhs_se),
           fmt(walk), fmt(ic.rhs - walk), fmt(ic.rhs_se), fmt(ic.z),
           std::to_string(ic.side), std::to_string(ic.trials)});

  const double z_max = r.table.get_double("z_max", 3.0);
  r.check("variance_identity_z", std::abs(ic.z) <= z_max, ic.z, z_max,
          "identity.csv");
  return r.finish("identity");
}

// -------------------------------------------------------------------- exact

int cmd_exact(Runner& r) {
  const ExperimentConfig& cfg = r.cfg;
  const int side = cfg.side > 0 ? cfg.side : 6;
  const int particles = cfg.particles > 0 ? cfg.particles : 3;
  const JumpRates rates = cfg.jump_rates();
  const StateSpace sp = enumerate_states(cfg.dimension, side, particles,
                                         static_cast<std::size_t>(cfg.state_cap));
  const std::vector<double> lambdas =
      cfg.lambdas.empty() ? std::vector<double>{1.0, 0.1, 0.01} : cfg.lambdas;

  Csv res(r.artifact("exact_resolvent.csv"),
          {"lambda", "comparison_lhs", "comparison_rhs", "comparison_asym",
           "laplace_resolvent", "laplace_time"});
  for (double lam : lambdas) {
    const ComparisonIdentity ci = resolvent_comparison(sp, rates, lam);
    const LaplaceVariance lv = laplace_variance(sp, rates, lam);
    res.row({fmt(lam), fmt(ci.lhs), fmt(ci.rhs), fmt(ci.asym),
             fmt(lv.resolvent_route), fmt(lv.time_route)});
    const std::string tag = " lam=" + fmt_short(lam);
    const double scale = std::max(ci.scale, 1.0);
    r.check("comparison_identity" + tag, std::abs(ci.lhs - ci.rhs) <= 1e-10 * scale,
            std::abs(ci.lhs - ci.rhs) / scale, 1e-10, "exact_resolvent.csv");
    r.check("comparison_asym_zero" + tag, std::abs(ci.asym) <= 1e-10 * scale,
            std::abs(ci.asym) / scale, 1e-10, "exact_resolvent.csv");
    r.check("comparison_rhs_nonneg" + tag, ci.rhs >= -1e-12 * scale, ci.rhs, 0,
            "exact_resolvent.csv");
    const double lrel = std::abs(lv.resolvent_route - lv.time_route) /
                        std::max(std::abs(lv.resolvent_route), 1e-300);
    r.check("laplace_routes" + tag, lrel <= 1e-8, lrel, 1e-8,
            "exact_resolvent.csv");
  }

  // variational three-way agreement for the drift components and random f
  std::vector<std::pair<std::string, Eigen::VectorXd>> functionals;
  for (int l = 0; l < cfg.dimension; ++l)
    functionals.push_back({"drift_" + std::to_string(l + 1),
                           drift_vector(sp, rates, DriftFlavor::Forward, l)});
  const int nrandom = r.table.get_int("random_f", 5);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int i = 0; i < nrandom; ++i) {
    Eigen::VectorXd f(sp.size());
    for (int s = 0; s < sp.size(); ++s) f[s] = unif(rng);
    functionals.push_back({"random_" + std::to_string(i + 1), f});
  }
  Csv var(r.artifact("exact_variational.csv"),
          {"lambda", "f", "resolvent_form", "sup_form", "inf_form"});
  for (double lam : lambdas)
    for (const auto& [name, f] : functionals) {
      const VariationalCheck vc = variational_forms(sp, rates, lam, f);
      var.row({fmt(lam), name, fmt(vc.resolvent_form), fmt(vc.sup_form),
               fmt(vc.inf_form)});
      const double scale = std::max(std::abs(vc.resolvent_form), 1e-300);
      const double dev = std::max(std::abs(vc.sup_form - vc.resolvent_form),
                                  std::abs(vc.inf_form - vc.resolvent_form)) /
                         scale;
      r.check("variational_threeway " + name + " lam=" + fmt_short(lam),
              dev <= 1e-8, dev, 1e-8, "exact_variational.csv");
    }

  // time-domain variance and its decomposition
  const std::vector<double> times =
      cfg.times.empty() ? std::vector<double>{2.0, 5.0} : cfg.times;
  const std::vector<double> vcurve = variance_curve(sp, rates, times);
  Csv curve(r.artifact("exact_variance.csv"),
            {"time", "variance", "decomposition_rhs"});
  for (std::size_t k = 0; k < times.size(); ++k) {
    const DecompositionCheck dc = variance_decomposition(sp, rates, times[k]);
    curve.row({fmt(times[k]), fmt(vcurve[k]), fmt(dc.rhs)});
    const double dev = std::abs(dc.lhs - dc.rhs) / std::max(dc.scale, 1e-300);
    r.check("variance_decomposition t=" + fmt_short(times[k]), dev <= 1e-8, dev,
            1e-8, "exact_variance.csv");
  }
  return r.finish("exact");
}

// ------------------------------------------------------------ duality-check

int cmd_duality(Runner& r) {
  const ExperimentConfig& cfg = r.cfg;
  const int radius = r.table.get_int("box_radius", 2);
  const int max_degree =
      r.table.get_int("max_degree", cfg.dimension == 1 ? 3 : 2);
  const double tol = r.table.get_double("tolerance", 1e-12);
  const OracleReport rep =
      run_duality_oracle(cfg.jump_rates(), cfg.rho, radius, max_degree, tol);

  Csv csv(r.artifact("duality_oracle.csv"),
          {"check", "max_abs_dev", "sets_checked", "pass"});
  for (const auto& c : rep.checks) {
    csv.row({c.name, fmt(c.max_abs_dev), std::to_string(c.sets_checked),
             c.pass ? "1" : "0"});
    r.check("oracle " + c.name, c.pass, c.max_abs_dev, rep.tolerance,
            "duality_oracle.csv");
  }
  return r.finish("duality-check");
}

// ----------------------------------------------------------------- spectral

int cmd_spectral(Runner& r) {
  const ExperimentConfig& cfg = r.cfg;
  const JumpRates rates = cfg.jump_rates();

  // transform residuals for a seeded random degree-1 function on a 2-box
  CoefficientFunction g(cfg.dimension, SetLattice::Full);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const int gbox = r.table.get_int("g_box", 2);
  for (int x = -gbox; x <= gbox; ++x) {
    if (cfg.dimension == 1) {
      g.set({Site{x, 0}}, unif(rng));
    } else {
      for (int y = -gbox; y <= gbox; ++y) g.set({Site{x, y}}, unif(rng));
    }
  }
  const int nodes = r.table.get_int("nodes", 1000);
  const double tol = r.table.get_double("tolerance", 1e-12);
  const ResidualCheck rc =
      verify_transform_residuals(g, rates, cfg.rho, nodes, cfg.seed, tol);
  Csv res(r.artifact("spectral_residuals.csv"),
          {"max_dev_keep", "max_dev_raise", "corner_keep", "corner_raise",
           "decay_keep", "decay_raise"});
  res.row({fmt(rc.max_dev_keep), fmt(rc.max_dev_raise), fmt(rc.corner_keep),
           fmt(rc.corner_raise), rc.decay_keep ? "1" : "0",
           rc.decay_raise ? "1" : "0"});
  r.check("residual_closed_form_keep", rc.max_dev_keep <= tol, rc.max_dev_keep,
          tol, "spectral_residuals.csv");
  r.check("residual_closed_form_raise", rc.max_dev_raise <= tol,
          rc.max_dev_raise, tol, "spectral_residuals.csv");
  r.check("residual_corner_decay_keep", rc.decay_keep, rc.corner_keep, 0,
          "spectral_residuals.csv");
  r.check("residual_corner_decay_raise", rc.decay_raise, rc.corner_raise, 0,
          "spectral_residuals.csv");

  // minimizer field diagnostics over the lambda scan
  const std::vector<double> lambdas =
      cfg.lambdas.empty()
          ? std::vector<double>{1, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6}
          : cfg.lambdas;
  const int res_n = cfg.resolved_res_single();
  const int radius = r.table.get_int("box_radius", 3);
  if (!SymbolParams::from(rates, cfg.rho).drifted()) {
    bool threw = false;
    try {
      minimizer_g_lambda(rates, cfg.rho, lambdas.front(), res_n, radius);
    } catch (const std::invalid_argument&) {
      threw = true;
    }
    r.check("minimizer_zero_drift_rejected", threw, threw ? 1 : 0, 1,
            "spectral_residuals.csv");
    return r.finish("spectral");
  }
  Csv mcsv(r.artifact("spectral_minimizer.csv"),
           {"lambda", "res", "g_e1", "sup_box", "max_imag", "ring_sum",
            "odd_dev", "origin"});
  double sup_scan = 0;
  for (double lam : lambdas) {
    const MinimizerTable t = minimizer_g_lambda(rates, cfg.rho, lam, res_n, radius);
    double sup = 0, odd = 0;
    for (int x = -radius; x <= radius; ++x) {
      const int ymax = cfg.dimension == 2 ? radius : 0;
      for (int y = -ymax; y <= ymax; ++y) {
        sup = std::max(sup, std::abs(t.value({x, y})));
        odd = std::max(odd, std::abs(t.value({x, y}) + t.value({-x, -y})));
      }
    }
    sup_scan = std::max(sup_scan, sup);
    mcsv.row({fmt(lam), std::to_string(res_n), fmt(t.value({1, 0})), fmt(sup),
              fmt(t.max_imag), fmt(t.unit_ring_sum()), fmt(odd),
              fmt(t.value({0, 0}))});
    const std::string tag = " lam=" + fmt_short(lam);
    r.check("minimizer_real" + tag, t.max_imag < 1e-6, t.max_imag, 1e-6,
            "spectral_minimizer.csv");
    r.check("minimizer_odd" + tag, odd <= 1e-12, odd, 1e-12,
            "spectral_minimizer.csv");
    r.check("minimizer_ring_sum" + tag, std::abs(t.unit_ring_sum()) <= 1e-12,
            t.unit_ring_sum(), 1e-12, "spectral_minimizer.csv");
  }
  r.check("minimizer_sup_finite", std::isfinite(sup_scan), sup_scan, 0,
          "spectral_minimizer.csv");
  return r.finish("spectral");
}

// --------------------------------------------------------------- bound-scan

int cmd_bound_scan(Runner& r) {
  const ExperimentConfig& cfg = r.cfg;
  const JumpRates rates = cfg.jump_rates();
  std::vector<double> lambdas =
      cfg.lambdas.empty()
          ? std::vector<double>{1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6}
          : cfg.lambdas;
  std::sort(lambdas.begin(), lambdas.end(), std::greater<>());
  const int n1 = cfg.resolved_res_single(), n2 = cfg.resolved_res_double();
  const bool drifted = SymbolParams::from(rates, cfg.rho).drifted();
  std::string expect = r.table.get_string("expect", drifted ? "bounded" : "divergent");
  if (expect != "bounded" && expect != "divergent" && expect != "none")
    throw std::invalid_argument("expect must be bounded, divergent or none");

  const auto coarse = bound_scan(rates, cfg.rho, cfg.tilt, lambdas, n1, n2);
  const auto fine = bound_scan(rates, cfg.rho, cfg.tilt, lambdas, 2 * n1, 2 * n2);

  using Field = double BoundIntegrals::*;
  const std::vector<std::pair<std::string, Field>> fields{
      {"step1", &BoundIntegrals::step1},     {"first", &BoundIntegrals::first},
      {"second", &BoundIntegrals::second},   {"third", &BoundIntegrals::third},
      {"fourth", &BoundIntegrals::fourth},   {"delta02", &BoundIntegrals::delta02},
      {"delta1", &BoundIntegrals::delta1},   {"line1", &BoundIntegrals::line1},
      {"line2", &BoundIntegrals::line2},     {"line3", &BoundIntegrals::line3},
      {"line4", &BoundIntegrals::line4},     {"total", &BoundIntegrals::total},
      {"zero_total", &BoundIntegrals::zero_total}};

  std::vector<std::string> header{"lambda"};
  for (const auto& [name, f] : fields) header.push_back(name);
  for (const auto& [name, f] : fields) header.push_back(name + "_disc");
  Csv csv(r.artifact("bound_scan.csv"), header);
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    std::vector<std::string> cells{fmt(lambdas[i])};
    for (const auto& [name, f] : fields) cells.push_back(fmt(fine[i].*f));
    for (const auto& [name, f] : fields) {
      const double a = coarse[i].*f, b = fine[i].*f;
      cells.push_back(fmt(std::abs(a - b) / std::max(std::abs(b), 1e-300)));
    }
    csv.row(cells);
  }

  if (expect == "bounded") {
    // quadrature self-consistency; the zero plug-in is excluded because it is
    // the one reported quantity that legitimately diverges as lambda -> 0
    for (const auto& [name, f] : fields) {
      if (name == "zero_total") continue;
      double worst = 0;
      for (std::size_t i = 0; i < lambdas.size(); ++i)
        worst = std::max(worst, std::abs(coarse[i].*f - fine[i].*f) /
                                    std::max(std::abs(fine[i].*f), 1e-300));
      r.check("quadrature_consistency " + name, worst <= 0.01, worst, 0.01,
              "bound_scan.csv");
    }
    // profile shape: monotone after the maximum, flat last two decades
    for (const auto& [name, f] : fields) {
      if (name == "zero_total") continue;
      std::vector<double> v;
      for (const auto& row : fine) v.push_back(row.*f);
      const std::size_t arg =
          std::max_element(v.begin(), v.end()) - v.begin();
      bool monotone = true;
      for (std::size_t i = arg; i + 1 < v.size(); ++i)
        if (v[i + 1] > v[i] * (1 + 1e-3) + 1e-12) monotone = false;
      const double tail = std::abs(v.back() - v[v.size() - 2]) /
                          std::max(std::abs(v[v.size() - 2]), 1e-300);
      r.check("bounded_profile " + name, monotone && tail < 0.05, tail, 0.05,
              "bound_scan.csv");
    }
    // the minimizer must do strictly better than the g = 0 plug-in by the end
    r.check("beats_zero_plugin", fine.back().total < fine.back().zero_total,
            fine.back().total, fine.back().zero_total, "bound_scan.csv");
  } else if (expect == "divergent") {
    // least-squares slope of step1 against log(1/lambda) must be positive
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(lambdas.size());
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
      const double x = std::log(1.0 / lambdas[i]), y = fine[i].step1;
      sx += x, sy += y, sxx += x * x, sxy += x * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    r.check("control_log_divergence_slope", slope > 0, slope, 0,
            "bound_scan.csv");
  }

  // per-unit-time bound shape on the t grid
  const std::vector<double> times =
      cfg.times.empty() ? std::vector<double>{1, 10, 100, 1000, 10000}
                        : cfg.times;
  Csv shape(r.artifact("bound_shape.csv"),
            {"t", "lambda", "total", "zero_total"});
  for (double t : times) {
    const BoundIntegrals row =
        eval_bound_integrals(rates, cfg.rho, cfg.tilt, 1.0 / t, 2 * n1, 2 * n2);
    shape.row({fmt(t), fmt(1.0 / t), fmt(row.total), fmt(row.zero_total)});
  }
  return r.finish("bound-scan");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exclusion-process variance laboratory"};
  app.require_subcommand(1);

  struct Entry {
    const char* name;
    const char* help;
    int (*run)(Runner&);
  };
  const std::vector<Entry> entries{
      {"simulate", "KMC trial batches with martingale diagnostics", cmd_simulate},
      {"identity", "Monte Carlo check of the variance decomposition", cmd_identity},
      {"exact", "finite-torus resolvent and variance identities", cmd_exact},
      {"duality-check", "coefficient operators vs the enumeration oracle", cmd_duality},
      {"spectral", "transform residuals and minimizer diagnostics", cmd_spectral},
      {"bound-scan", "lambda-uniform quadrature of the bound integrals", cmd_bound_scan},
  };
  std::vector<CommonOpts> opts(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i)
    add_common(app.add_subcommand(entries[i].name, entries[i].help), opts[i]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!app.got_subcommand(entries[i].name)) continue;
    try {
      Runner r = make_runner(opts[i]);
      return entries[i].run(r);
    } catch (const std::invalid_argument& e) {
      std::fprintf(stderr, "invalid configuration: %s\n", e.what());
      return 2;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 1;
    }
  }
  return 2;
}
