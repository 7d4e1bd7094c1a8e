#include <cmath>

#include "doctest.h"
#include "sepvar/exact.hpp"
#include "sepvar/simulate.hpp"

using namespace sep;

namespace {
JumpRates asym_chain() {
  return JumpRates::make(1, {{{1, 0}, 0.7}, {{-1, 0}, 0.3}});
}

SimConfig quick_cfg(std::vector<double> times, int trials, std::uint64_t seed) {
  SimConfig c;
  c.sample_times = std::move(times);
  c.trials = trials;
  c.seed = seed;
  c.track_martingales = true;
  return c;
}
}  // namespace

TEST_CASE("default side grows with the time horizon") {
  CHECK(default_side(asym_chain(), 1.0) == 32);
  CHECK(default_side(asym_chain(), 160.0) == 104);
  const JumpRates spread = JumpRates::make(1, {{{2, 0}, 1.0}, {{-1, 0}, 0.5}});
  CHECK(default_side(spread, 160.0) == 208);
}

TEST_CASE("batches are reproducible and thread-count invariant") {
  const SimConfig base = quick_cfg({2.0, 4.0}, 500, 99);
  const InitialMeasure init = InitialMeasure::bernoulli(0.5);
  const TrialBatch a = run_batch(asym_chain(), init, base);
  const TrialBatch b = run_batch(asym_chain(), init, base);
  REQUIRE(a.trials == b.trials);
  CHECK(a.x == b.x);
  CHECK(a.counts == b.counts);
  CHECK(a.compensators == b.compensators);

  SimConfig threaded = base;
  threaded.threads = 3;
  const TrialBatch c = run_batch(asym_chain(), init, threaded);
  CHECK(a.x == c.x);
  CHECK(a.compensators == c.compensators);
}

TEST_CASE("martingale diagnostics sit inside the normal band") {
  const SimConfig cfg = quick_cfg({6.0}, 4000, 12);
  const TrialBatch batch =
      run_batch(asym_chain(), InitialMeasure::bernoulli(0.5), cfg);
  const MartingaleDiagnostics md = martingale_diagnostics(batch, asym_chain(), 0.5);
  REQUIRE(md.support.size() == 2);
  for (std::size_t j = 0; j < md.support.size(); ++j) {
    const double z =
        (md.quadratic[j].value - md.quadratic_target[j]) / md.quadratic[j].se;
    CAPTURE(j);
    CHECK(std::abs(z) <= 4.5);
  }
  const double zd = (md.drift[0].value - md.drift_target[0]) / md.drift[0].se;
  CHECK(std::abs(zd) <= 4.5);
  // the two jump-count martingales are driven by disjoint clocks
  CHECK(std::abs(md.cross[0].value) <= 4.5 * md.cross[0].se);
}

TEST_CASE("canonical start on a small torus reproduces the exact curve") {
  SimConfig cfg = quick_cfg({2.0, 5.0}, 8000, 31);
  cfg.side = 8;
  const TrialBatch batch =
      run_batch(asym_chain(), InitialMeasure::canonical(4), cfg);
  const double rho_adj = 3.0 / 7.0;
  const Vec2 rate{asym_chain().mean_drift()[0] * (1 - rho_adj), 0.0};
  const auto est = estimate_variance(batch, Centering::Exact, rate);

  const StateSpace sp = enumerate_states(1, 8, 4);
  const std::vector<double> exact = variance_curve(sp, asym_chain(), {2.0, 5.0});
  for (std::size_t k = 0; k < exact.size(); ++k) {
    CAPTURE(k);
    CHECK(std::abs(est[k].value - exact[k]) <= 4 * est[k].se);
  }
}

TEST_CASE("empirical centering only differs by the mean shift") {
  const SimConfig cfg = quick_cfg({3.0}, 3000, 7);
  const TrialBatch batch =
      run_batch(asym_chain(), InitialMeasure::bernoulli(0.5), cfg);
  const Vec2 rate{0.4 * 0.5, 0.0};
  const auto exact = estimate_variance(batch, Centering::Exact, rate);
  const auto emp = estimate_variance(batch, Centering::Empirical, rate);
  const auto mean = mean_displacement(batch, 0);
  const double shift = mean[0].value - rate[0] * 3.0;
  // allow for either plain or Bessel normalization of the empirical estimate
  CHECK(std::abs(exact[0].value - emp[0].value - shift * shift) <=
        2.0 * exact[0].value / 3000);
}

TEST_CASE("coupled batches share their noise") {
  SimConfig cfg = quick_cfg({3.0}, 800, 17);
  cfg.side = 32;
  const auto [plain, biased] = run_coupled_batch(asym_chain(), 0.5, {2, 0}, cfg);
  REQUIRE(plain.trials == biased.trials);
  REQUIRE(plain.times == biased.times);
  const auto diff = coupled_mean_difference(biased, plain, 0);
  const auto mp = mean_displacement(plain, 0);
  const auto mb = mean_displacement(biased, 0);
  // common random numbers push the difference noise far below the raw noise
  CHECK(diff[0].se < 0.5 * std::sqrt(mp[0].se * mp[0].se + mb[0].se * mb[0].se));
}

TEST_CASE("variance identity holds on the torus") {
  SimConfig cfg;
  cfg.trials = 3000;
  cfg.seed = 23;
  const IdentityCheck ic = check_variance_identity(asym_chain(), 0.5, 5.0, 6, cfg);
  CHECK(ic.trials == 3000);
  CHECK(std::abs(ic.z) <= 4.0);
  CHECK(ic.lhs_se > 0.0);
  CHECK(ic.rhs_se > 0.0);
}
