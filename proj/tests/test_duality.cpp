#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "sepvar/duality.hpp"

using namespace sep;

namespace {
JumpRates asym_chain() {
  return JumpRates::make(1, {{{1, 0}, 0.7}, {{-1, 0}, 0.3}});
}

CoefficientFunction random_coeff(int dim, int degree, int radius,
                                 std::uint64_t seed) {
  CoefficientFunction f(dim, SetLattice::Punctured);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Site> box;
  for (int x = -radius; x <= radius; ++x)
    for (int y = -(dim == 2 ? radius : 0); y <= (dim == 2 ? radius : 0); ++y)
      if (!(x == 0 && y == 0)) box.push_back({x, y});
  std::vector<int> pick(degree);
  for (int n = 0; n < 40; ++n) {
    SiteSet b;
    for (auto& site : box) {
      (void)site;
      if (b.size() < static_cast<std::size_t>(degree) && u(rng) > 0.4)
        b.push_back(site);
    }
    if (b.size() == static_cast<std::size_t>(degree)) f.set(b, u(rng));
  }
  return f;
}
}  // namespace

TEST_CASE("coefficient keys are canonicalized") {
  CoefficientFunction f(1, SetLattice::Punctured);
  f.set({{2, 0}, {1, 0}}, 0.5);
  CHECK(f.value({{1, 0}, {2, 0}}) == 0.5);
  f.add({{1, 0}, {2, 0}}, 0.25);
  CHECK(f.value({{1, 0}, {2, 0}}) == 0.75);
  CHECK(f.values.size() == 1);  // both spellings landed on one key
  CHECK_THROWS_AS(f.set({{0, 0}}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(f.set({{1, 0}, {1, 0}}, 1.0), std::invalid_argument);

  CoefficientFunction g(1, SetLattice::Full);
  CHECK_NOTHROW(g.set({{0, 0}}, 1.0));
  CHECK(f.degrees() == std::vector<int>{2});
}

TEST_CASE("observable expansion round trip and inner products") {
  const double rho = 0.35;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> ta(8), tb(8);
  for (auto& v : ta) v = u(rng);
  for (auto& v : tb) v = u(rng);
  const LocalObservable fa =
      make_observable(1, {{-1, 0}, {1, 0}, {2, 0}}, ta);
  const LocalObservable fb =
      make_observable(1, {{-1, 0}, {1, 0}, {2, 0}}, tb);

  const CoefficientFunction ca = psi_expand(fa, rho);
  const CoefficientFunction cb = psi_expand(fb, rho);
  const LocalObservable back = reconstruct(ca, rho);
  for (std::uint32_t m = 0; m < 8; ++m)
    CHECK(back.eval_mask(m) == doctest::Approx(fa.eval_mask(m)).epsilon(1e-13));

  // the basis is orthonormal, so set-space and configuration-space pairings match
  CHECK(inner(ca, cb) == doctest::Approx(observable_inner(fa, fb, rho)).epsilon(1e-13));
}

TEST_CASE("operator actions move degrees the advertised way") {
  const JumpRates r = asym_chain();
  const double rho = 0.5;
  const CoefficientFunction f = random_coeff(1, 2, 3, 21);

  CHECK(apply_coefficient_operator(CoeffOperator::EnvSym, f, r, rho).degrees() ==
        std::vector<int>{2});
  // the exchange action with the odd half of the rates moves degree strictly;
  // its degree-preserving block vanishes identically
  auto kept = apply_coefficient_operator(CoeffOperator::EnvAnti0, f, r, rho);
  kept.drop_zeros(1e-15);
  CHECK(kept.values.empty());
  auto tag_kept = apply_coefficient_operator(CoeffOperator::TagAnti0, f, r, rho);
  tag_kept.drop_zeros(1e-15);
  CHECK(tag_kept.degrees() == std::vector<int>{2});
  auto raised = apply_coefficient_operator(CoeffOperator::EnvAntiRaise, f, r, rho);
  raised.drop_zeros(1e-15);
  CHECK(raised.degrees() == std::vector<int>{3});
  auto lowered = apply_coefficient_operator(CoeffOperator::EnvAntiLower, f, r, rho);
  lowered.drop_zeros(1e-15);
  CHECK(lowered.degrees() == std::vector<int>{1});
}

namespace {
// all eight blocks summed: the coefficient-space matrix of the whole generator
CoefficientFunction apply_full_generator(const CoefficientFunction& f,
                                         const JumpRates& r, double rho) {
  CoefficientFunction out(f.dim, SetLattice::Punctured);
  for (CoeffOperator op :
       {CoeffOperator::EnvSym, CoeffOperator::TagSym, CoeffOperator::EnvAnti0,
        CoeffOperator::EnvAntiRaise, CoeffOperator::EnvAntiLower,
        CoeffOperator::TagAnti0, CoeffOperator::TagAntiRaise,
        CoeffOperator::TagAntiLower}) {
    const CoefficientFunction g = apply_coefficient_operator(op, f, r, rho);
    for (const auto& [k, v] : g.values) out.add(k, v);
  }
  return out;
}
}  // namespace

TEST_CASE("reversing the rates transposes the generator matrix") {
  const JumpRates r = asym_chain();
  const JumpRates rv = JumpRates::make(1, {{{1, 0}, 0.3}, {{-1, 0}, 0.7}});
  const double rho = 0.4;

  std::vector<SiteSet> bases;
  std::vector<Site> sites;
  for (int x = -2; x <= 2; ++x)
    if (x != 0) sites.push_back({x, 0});
  for (Site s : sites) bases.push_back({s});
  for (std::size_t i = 0; i < sites.size(); ++i)
    for (std::size_t j = i + 1; j < sites.size(); ++j)
      bases.push_back({sites[i], sites[j]});

  std::vector<CoefficientFunction> forward, reversed;
  for (const SiteSet& b : bases) {
    CoefficientFunction ind(1, SetLattice::Punctured);
    ind.set(b, 1.0);
    forward.push_back(apply_full_generator(ind, r, rho));
    reversed.push_back(apply_full_generator(ind, rv, rho));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < bases.size(); ++i)
    for (std::size_t j = 0; j < bases.size(); ++j)
      worst = std::max(worst, std::abs(forward[i].value(bases[j]) -
                                       reversed[j].value(bases[i])));
  CHECK(worst <= 1e-13);
}

TEST_CASE("the odd blocks flip sign under rate reversal") {
  const JumpRates r = asym_chain();
  const JumpRates rv = JumpRates::make(1, {{{1, 0}, 0.3}, {{-1, 0}, 0.7}});
  const CoefficientFunction f = random_coeff(1, 2, 3, 33);
  for (CoeffOperator op :
       {CoeffOperator::EnvAntiRaise, CoeffOperator::EnvAntiLower,
        CoeffOperator::TagAnti0, CoeffOperator::TagAntiRaise,
        CoeffOperator::TagAntiLower}) {
    const CoefficientFunction a = apply_coefficient_operator(op, f, r, 0.4);
    const CoefficientFunction b = apply_coefficient_operator(op, f, rv, 0.4);
    CoefficientFunction sum = a;
    for (const auto& [k, v] : b.values) sum.add(k, v);
    sum.drop_zeros(1e-13);
    CHECK(sum.values.empty());
  }
}

TEST_CASE("symmetric parts dissipate") {
  const JumpRates r = asym_chain();
  const CoefficientFunction f = random_coeff(1, 2, 3, 41);
  CHECK(dirichlet_energy(CoeffOperator::EnvSym, f, r, 0.5) >= 0.0);
  CHECK(dirichlet_energy(CoeffOperator::TagSym, f, r, 0.5) >= 0.0);
}

TEST_CASE("enumeration oracle confirms every action") {
  const OracleReport r1 = run_duality_oracle(asym_chain(), 0.5, 2, 3);
  CHECK(r1.pass);
  for (const auto& c : r1.checks) {
    CAPTURE(c.name);
    CHECK(c.pass);
    CHECK(c.max_abs_dev <= 1e-12);
    CHECK(c.sets_checked > 0);
  }

  const JumpRates r2d = JumpRates::make(
      2, {{{1, 0}, 1.0}, {{0, 1}, 0.5}, {{0, -1}, 0.5}});
  const OracleReport r2 = run_duality_oracle(r2d, 0.3, 2, 2);
  CHECK(r2.pass);

  // a spread-out asymmetric table exercises the non-nearest-neighbor branches
  const JumpRates spread =
      JumpRates::make(1, {{{2, 0}, 0.25}, {{1, 0}, 0.5}, {{-1, 0}, 0.25}});
  CHECK(run_duality_oracle(spread, 0.6, 2, 2).pass);
}

TEST_CASE("harmonic tuple extension, exact and sampled") {
  const CoefficientFunction f = random_coeff(1, 2, 2, 51);
  const TildeResult exact = tilde_extend(f, 2, TildeMethod::FirstStepExact);
  CHECK(exact.mc_stderr == 0.0);

  const TildeResult mc = tilde_extend(f, 2, TildeMethod::MonteCarlo, 7, 20000);
  CHECK(mc.mc_stderr > 0.0);
  double dev = 0.0;
  for (const auto& [tuple, v] : exact.value.values)
    dev = std::max(dev, std::abs(v - mc.value.value(tuple)));
  CHECK(dev <= 5 * mc.mc_stderr + 1e-12);

  // sampling is reproducible under the same seed
  const TildeResult mc2 = tilde_extend(f, 2, TildeMethod::MonteCarlo, 7, 20000);
  for (const auto& [tuple, v] : mc.value.values)
    CHECK(mc2.value.value(tuple) == v);
}

TEST_CASE("coordinate shift energy stays controlled") {
  const double r1 = shift_energy_ratio({1, 0}, 1, 4, 1);
  const double r2 = shift_energy_ratio({2, 0}, 1, 4, 1);
  CHECK(r1 > 0.0);
  CHECK(std::isfinite(r2));
  // telescoping a |z|-step shift through unit bonds costs at most |z|^2 energy
  CHECK(r1 <= 1.0 + 1e-12);
  CHECK(r2 <= 4.0 + 1e-12);
}
