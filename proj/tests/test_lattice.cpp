#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "sepvar/lattice.hpp"

using namespace sep;

namespace {
JumpRates asym_chain() {
  return JumpRates::make(1, {{{1, 0}, 0.7}, {{-1, 0}, 0.3}});
}
}  // namespace

TEST_CASE("rate table moments and decomposition") {
  const JumpRates r = asym_chain();
  CHECK(r.total_rate() == doctest::Approx(1.0));
  CHECK(r.second_moment() == doctest::Approx(1.0));
  CHECK(r.mean_drift()[0] == doctest::Approx(0.4));
  CHECK(r.sym({1, 0}) == doctest::Approx(0.5));
  CHECK(r.anti({1, 0}) == doctest::Approx(0.2));
  CHECK(r.anti({-1, 0}) == doctest::Approx(-0.2));
  CHECK(r.support_radius() == 1);

  const JumpRates rev = reversed_rates(r);
  CHECK(rev.rate({1, 0}) == doctest::Approx(0.3));
  CHECK(rev.mean_drift()[0] == doctest::Approx(-0.4));
}

TEST_CASE("rate table construction rejects bad input") {
  CHECK_THROWS_AS(JumpRates::make(1, {}), std::invalid_argument);
  CHECK_THROWS_AS(JumpRates::make(1, {{{1, 0}, -0.5}}), std::invalid_argument);
  CHECK_THROWS_AS(JumpRates::make(1, {{{0, 0}, 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(JumpRates::make(1, {{{0, 1}, 1.0}}), std::invalid_argument);
  // mean-zero yet drifted tables are what the surrogate machinery cannot see
  const JumpRates r2 = JumpRates::make(2, {{{1, 0}, 1.0}, {{0, 1}, 0.5},
                                           {{0, -1}, 0.5}});
  CHECK(r2.dim == 2);
  CHECK(r2.mean_drift()[1] == doctest::Approx(0.0));
}

TEST_CASE("nearest-neighbor surrogate keeps the mean drift") {
  const JumpRates spread =
      JumpRates::make(1, {{{2, 0}, 0.3}, {{1, 0}, 0.2}, {{-1, 0}, 0.4}});
  const JumpRates nn = build_nn_rates(spread);
  CHECK(nn.support_radius() == 1);
  CHECK(nn.mean_drift()[0] == doctest::Approx(spread.mean_drift()[0]));
  // half the mean drift, the amplitude in front of each odd symbol factor
  const Vec2 a = nn_drift_coefficients(asym_chain());
  CHECK(a[0] == doctest::Approx(0.2));
  CHECK(a[1] == 0.0);
}

TEST_CASE("reference configuration indexing and moves") {
  ReferenceConfig cfg(1, 8);
  CHECK(cfg.occupied(origin));  // tagged particle is pinned there
  cfg.set({1, 0}, true);
  cfg.set({3, 0}, true);
  CHECK(cfg.reduce({9, 0}) == Site{1, 0});
  CHECK(cfg.occupied({-7, 0}));  // wraps to site 1

  const ReferenceConfig sw = exchange(cfg, {1, 0}, {2, 0});
  CHECK_FALSE(sw.occupied({1, 0}));
  CHECK(sw.occupied({2, 0}));
  CHECK(sw.occupied({3, 0}));

  // tagged jump to an empty site recenters every environment particle
  const ReferenceConfig sh = tagged_shift(cfg, {2, 0});
  CHECK(sh.occupied(origin));
  CHECK(sh.occupied({-1, 0}));
  CHECK(sh.occupied({1, 0}));
  CHECK_FALSE(sh.occupied({3, 0}));
}

TEST_CASE("drift flavors agree with the hand sum") {
  ReferenceConfig cfg(1, 8);
  cfg.set({1, 0}, true);
  const JumpRates r = asym_chain();
  const double rho = 0.5;
  // forward: sum_j j p(j)(rho - zeta_j) = 1*0.7*(rho-1) + (-1)*0.3*rho
  CHECK(drift_value(cfg, r, rho, DriftFlavor::Forward)[0] ==
        doctest::Approx(0.7 * (rho - 1) - 0.3 * rho));
  CHECK(drift_value(cfg, r, rho, DriftFlavor::Reversed)[0] ==
        doctest::Approx(0.3 * (rho - 1) - 0.7 * rho));
  CHECK(drift_value(cfg, r, rho, DriftFlavor::Symmetric)[0] ==
        doctest::Approx(0.5 * (rho - 1) - 0.5 * rho));
}

TEST_CASE("torus size guard") {
  const JumpRates r = asym_chain();
  CHECK_NOTHROW(check_torus_fits(r, 32));
  CHECK_THROWS_AS(check_torus_fits(r, 31), std::invalid_argument);
  CHECK_THROWS_AS(check_torus_fits(r, 4), std::invalid_argument);
  const JumpRates spread = JumpRates::make(1, {{{2, 0}, 1.0}, {{-1, 0}, 0.5}});
  CHECK_THROWS_AS(check_torus_fits(spread, 8), std::invalid_argument);
  CHECK_NOTHROW(check_torus_fits(spread, 10));
}

TEST_CASE("density parameter bounds") {
  // the closed endpoints are legal here; the run configuration is what
  // insists on a strictly interior density
  CHECK_NOTHROW(DensityParams(0.0));
  CHECK_NOTHROW(DensityParams(1.0));
  CHECK_THROWS_AS(DensityParams(-0.1), std::invalid_argument);
  CHECK_THROWS_AS(DensityParams(1.1), std::invalid_argument);
  CHECK(DensityParams(0.25).rho == 0.25);
  CHECK(DensityParams(0.25).beta() ==
        doctest::Approx(std::sqrt(0.25 * 0.75)).epsilon(1e-15));
}
