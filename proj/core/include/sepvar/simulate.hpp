#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "sepvar/lattice.hpp"

namespace sep {

// Initial laws for the occupancy field around the tagged particle. Bernoulli
// is the product measure at density rho conditioned on an occupied origin.
// Biased additionally forces one reference site occupied, which tilts the
// product law by zeta_k / rho. Canonical spreads a fixed particle number
// (tagged particle included) uniformly over the torus.
enum class InitialKind { Bernoulli, Biased, Canonical };

struct InitialMeasure {
  InitialKind kind = InitialKind::Bernoulli;
  double rho = 0.5;
  Site biased_site{0, 0};  // Biased only; reference coordinates, k != 0
  int particles = 0;       // Canonical only

  static InitialMeasure bernoulli(double rho);
  static InitialMeasure biased(double rho, Site k);
  static InitialMeasure canonical(int particles);
};

struct SimConfig {
  int side = 0;                      // torus side, 0 picks default_side(...)
  std::vector<double> sample_times;  // strictly increasing, all > 0
  bool track_martingales = false;    // record N_j and its compensator
  std::vector<Site> probe_sites;     // occupancy recorded at the final time
  std::uint64_t seed = 1;
  long trials = 2;
  int threads = 1;
};

// max(32, 8 R ceil(sqrt(t_end))), the rule used when SimConfig::side is 0.
int default_side(const JumpRates& rates, double t_end);

// Observations from a batch of independent trials, trial-major: trial i,
// sample k sits at [i * times.size() + k]. Martingale totals and occupancy
// probes refer to the final sample time.
struct TrialBatch {
  std::vector<double> times;
  long trials = 0;
  int side = 0;
  std::vector<Vec2> x;  // tagged displacement, unwrapped

  std::vector<Site> support;         // jump vectors, order of the two arrays
  std::vector<double> counts;        // N_j, jumps of the tagged particle by j
  std::vector<double> compensators;  // int_0^t p(j)(1 - zeta_j(s)) ds

  std::vector<Site> probe_sites;
  std::vector<std::uint8_t> probes;  // occupancy at the probe sites

  Vec2 displacement(long trial, std::size_t sample) const {
    return x[static_cast<std::size_t>(trial) * times.size() + sample];
  }
  double count(long trial, std::size_t j) const {
    return counts[static_cast<std::size_t>(trial) * support.size() + j];
  }
  double compensator(long trial, std::size_t j) const {
    return compensators[static_cast<std::size_t>(trial) * support.size() + j];
  }
  std::uint8_t probe(long trial, std::size_t k) const {
    return probes[static_cast<std::size_t>(trial) * probe_sites.size() + k];
  }
};

// Kinetic Monte Carlo of the exclusion process on the torus; continuous-time,
// rejection-free, one exponential clock per event. Results depend only on
// (rates, init, cfg) including cfg.seed, never on cfg.threads.
TrialBatch run_batch(const JumpRates& rates, const InitialMeasure& init,
                     const SimConfig& cfg);

// Common-random-number pair: trial i of the two batches shares the Bernoulli
// field draw (site k forced occupied in the second member) and the event
// random stream, so their difference estimates the effect of the tilt with
// far less noise than independent runs would.
std::pair<TrialBatch, TrialBatch> run_coupled_batch(const JumpRates& rates,
                                                    double rho, Site k,
                                                    const SimConfig& cfg);

// ------------------------------------------------------------- estimators

struct ValueSE {
  double value = 0, se = 0;
};

// sample mean with its standard error
ValueSE mean_se(const std::vector<double>& xs);

enum class Centering { Exact, Empirical };

// Vhat(t_k) = sum over components of the displacement variance. Exact
// centering subtracts mean_rate * t_k and reports the plain standard error of
// |x - mu|^2; Empirical centers at the sample mean per component and uses a
// leave-one-out jackknife for the standard error.
std::vector<ValueSE> estimate_variance(const TrialBatch& batch,
                                       Centering centering, Vec2 mean_rate);

// mean of x_l(t_k) across trials, one entry per sample time
std::vector<ValueSE> mean_displacement(const TrialBatch& batch, int component);

// mean of the per-trial difference a.x_l - b.x_l between coupled batches
std::vector<ValueSE> coupled_mean_difference(const TrialBatch& a,
                                             const TrialBatch& b,
                                             int component);

// --------------------------------------------------------- identity checks

struct IdentityCheck {
  double lhs = 0, lhs_se = 0;  // Vhat(t), exact centering
  double rhs = 0, rhs_se = 0;  // walk term plus coupled transport integral
  double z = 0;                // |lhs - rhs| / combined standard error
  int side = 0;
  long trials = 0;
};

// Monte Carlo test of the displacement-variance decomposition at time t:
//   Vhat(t) =? (1-rho) sum_j |j|^2 p(j) t
//             + 2 rho sum_j int_0^t j . p(j) { E[x(s)] - E_-j[x(s)] } ds
// where E_-j is the start biased at site -j. Each integrand difference comes
// from one coupled pair batch, integrated per trial on a trapezoid grid of
// grid_points intervals, so the quoted rhs error reflects the pairing.
IdentityCheck check_variance_identity(const JumpRates& rates, double rho,
                                      double t, int grid_points,
                                      const SimConfig& cfg);

struct MartingaleDiagnostics {
  std::vector<Site> support;
  std::vector<ValueSE> quadratic;        // E[(N_j - A_j)^2]
  std::vector<double> quadratic_target;  // (1 - rho) p(j) t
  std::vector<ValueSE> cross;            // E[(N_j - A_j)(N_k - A_k)], j < k
  std::array<ValueSE, 2> drift;          // mean displacement per component
  Vec2 drift_target;                     // m (1 - rho) t
};

// Compensated-count moments at the final sample time of a batch recorded with
// track_martingales. rho is the stationary density the targets refer to; for
// canonical starts pass the torus-adjusted value.
MartingaleDiagnostics martingale_diagnostics(const TrialBatch& batch,
                                             const JumpRates& rates,
                                             double rho);

}  // namespace sep
