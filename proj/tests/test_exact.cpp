#include <cmath>
#include <random>

#include "doctest.h"
#include "sepvar/exact.hpp"

using namespace sep;

namespace {
JumpRates asym_chain() {
  return JumpRates::make(1, {{{1, 0}, 0.7}, {{-1, 0}, 0.3}});
}

Eigen::VectorXd random_vec(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd f(n);
  for (int i = 0; i < n; ++i) f[i] = u(rng);
  return f;
}
}  // namespace

TEST_CASE("state enumeration counts configurations") {
  const StateSpace s1 = enumerate_states(1, 6, 3);
  CHECK(s1.size() == 10);  // 2 environment particles on 5 free sites
  CHECK(s1.site_count() == 6);
  CHECK(s1.adjusted_density() == doctest::Approx(2.0 / 5.0));

  const StateSpace s2 = enumerate_states(2, 4, 3);
  CHECK(s2.size() == 105);  // choose 2 of 15

  CHECK_THROWS_AS(enumerate_states(1, 12, 6, 10), std::invalid_argument);
}

TEST_CASE("generator rows and stationary columns vanish") {
  const StateSpace sp = enumerate_states(1, 6, 3);
  const GeneratorSet g = build_generators(sp, asym_chain());
  const Eigen::MatrixXd full(g.full);
  CHECK(full.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-13);
  // uniform measure is stationary on the torus, so column sums vanish too
  CHECK(full.colwise().sum().cwiseAbs().maxCoeff() <= 1e-13);
  // sym/anti really are the transpose-symmetric pieces in L2(uniform)
  const Eigen::MatrixXd s(g.sym), a(g.anti);
  CHECK((s - s.transpose()).cwiseAbs().maxCoeff() <= 1e-13);
  CHECK((a + a.transpose()).cwiseAbs().maxCoeff() <= 1e-13);
  CHECK((s + a - full).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("resolvent comparison identity across tables and fillings") {
  const std::vector<JumpRates> tables{
      asym_chain(),
      JumpRates::make(1, {{{1, 0}, 1.0}}),
      JumpRates::make(1, {{{1, 0}, 0.9}, {{-1, 0}, 0.1}}),
  };
  for (const auto& rates : tables)
    for (int particles : {2, 3})
      for (double lambda : {1.0, 0.1}) {
        const StateSpace sp = enumerate_states(1, 6, particles);
        const ComparisonIdentity ci = resolvent_comparison(sp, rates, lambda);
        CAPTURE(particles);
        CAPTURE(lambda);
        CHECK(std::abs(ci.lhs - ci.rhs) <= 1e-10 * std::max(ci.scale, 1.0));
        CHECK(ci.rhs >= -1e-12 * std::max(ci.scale, 1.0));
        CHECK(std::abs(ci.asym) <= 1e-10 * std::max(ci.scale, 1.0));
      }
}

TEST_CASE("laplace transform agrees between resolvent and time routes") {
  const StateSpace sp = enumerate_states(1, 6, 3);
  for (double lambda : {1.0, 0.1, 0.01}) {
    const LaplaceVariance lv = laplace_variance(sp, asym_chain(), lambda);
    CAPTURE(lambda);
    CHECK(std::abs(lv.resolvent_route - lv.time_route) <=
          1e-8 * std::abs(lv.resolvent_route));
  }
}

TEST_CASE("variance curve matches the frozen master-equation values") {
  // pinned from an independent moment-ODE integration of the hand-built
  // reference-frame generator (L=6, 3 particles, p=0.7/0.3)
  const StateSpace sp = enumerate_states(1, 6, 3);
  const std::vector<double> v = variance_curve(sp, asym_chain(), {2.0, 5.0});
  CHECK(v[0] == doctest::Approx(0.86934902930001901).epsilon(1e-9));
  CHECK(v[1] == doctest::Approx(1.6686842385178717).epsilon(1e-9));
}

TEST_CASE("time-domain decomposition closes") {
  const StateSpace sp = enumerate_states(1, 6, 3);
  for (double t : {2.0, 5.0}) {
    const DecompositionCheck dc = variance_decomposition(sp, asym_chain(), t);
    CHECK(std::abs(dc.lhs - dc.rhs) <= 1e-8 * std::max(dc.scale, 1e-300));
  }
}

TEST_CASE("resolvent solve and matrix exponential are consistent") {
  const StateSpace sp = enumerate_states(1, 6, 3);
  const GeneratorSet g = build_generators(sp, asym_chain());
  const Eigen::VectorXd f = random_vec(sp.size(), 5);

  const Eigen::VectorXd u = resolvent_solve(g.full, 0.5, f);
  const Eigen::VectorXd residual =
      0.5 * u - Eigen::MatrixXd(g.full) * u - f;
  CHECK(residual.cwiseAbs().maxCoeff() <= 1e-10);

  // quadrature of e^{tL} f against e^{-lambda t} reproduces the resolvent
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(sp.size());
  const double h = 0.05;
  for (int k = 0; k < 2400; ++k) {
    const double t = (k + 0.5) * h;
    acc += h * std::exp(-0.5 * t) * expm_apply(g.full, t, f);
  }
  CHECK((acc - u).cwiseAbs().maxCoeff() <= 1e-3);
}

TEST_CASE("variational forms bracket the resolvent form") {
  const StateSpace sp = enumerate_states(1, 6, 3);
  const Eigen::VectorXd fd = drift_vector(sp, asym_chain(), DriftFlavor::Forward, 0);
  const Eigen::VectorXd fr = random_vec(sp.size(), 77);
  for (const Eigen::VectorXd& f : {fd, fr})
    for (double lambda : {1.0, 0.1}) {
      const VariationalCheck vc = variational_forms(sp, asym_chain(), lambda, f);
      const double scale = std::max(std::abs(vc.resolvent_form), 1e-300);
      CHECK(std::abs(vc.sup_form - vc.resolvent_form) <= 1e-8 * scale);
      CHECK(std::abs(vc.inf_form - vc.resolvent_form) <= 1e-8 * scale);
    }
}

TEST_CASE("h-norm pair is dual through the resolvent") {
  const StateSpace sp = enumerate_states(1, 6, 3);
  const GeneratorSet g = build_generators(sp, asym_chain());
  const Eigen::VectorXd f = random_vec(sp.size(), 13);
  const double lambda = 0.3;
  const HNorms n = h_norms(g, lambda, f);
  const VariationalCheck vc = variational_forms(sp, asym_chain(), lambda, f);
  CHECK(n.hm1_sq == doctest::Approx(vc.resolvent_form).epsilon(1e-10));
  CHECK(n.h1_sq >= 0.0);
  CHECK(n.hm1_sq >= 0.0);
}

TEST_CASE("biased displacement integration is panel-stable") {
  const StateSpace sp = enumerate_states(1, 6, 3);
  const double a = biased_mean_displacement(sp, asym_chain(), {1, 0}, 2.0, 0, 256);
  const double b = biased_mean_displacement(sp, asym_chain(), {1, 0}, 2.0, 0, 512);
  CHECK(a == doctest::Approx(b).epsilon(1e-9));
  CHECK(std::abs(a) <= 0.7 * 2.0);  // bounded by the raw jump rate budget
}
