#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "loschmidt/hamiltonians.hpp"
#include "loschmidt/phasespace.hpp"
#include "oracles.hpp"

using namespace loschmidt;

namespace {
PhaseVec point(double p, double q) {
  PhaseVec x(2);
  x << p, q;
  return x;
}
}  // namespace

TEST_CASE("quadratic hamiltonian value and gradient") {
  SymmetricMatrix hess(2);
  hess.set(0, 0, 2.0);
  hess.set(0, 1, 0.5);
  hess.set(1, 1, -1.0);
  PhaseVec a(2);
  a << 0.3, -0.7;
  const Hamiltonian h = Hamiltonian::quadratic(hess, a);
  const PhaseVec x = point(1.0, 2.0);

  // H = x.hess.x/2 + a^x.
  const double expected =
      0.5 * (2.0 * 1.0 + 2.0 * 0.5 * 1.0 * 2.0 + (-1.0) * 4.0) + skew_product(a, x);
  CHECK(h.value(x) == doctest::Approx(expected));

  // grad = hess x - J a.
  const PhaseVec g_expected = hess.mat() * x - symplectic_j(1) * a;
  CHECK((h.gradient(x) - g_expected).norm() <= 1e-14);
  CHECK((h.hessian(x) - hess.mat()).norm() == 0.0);
  CHECK(h.is_quadratic());
  CHECK(h.dof() == 1);
}

TEST_CASE("linear hamiltonian generates a drift") {
  PhaseVec a(2);
  a << -0.1, 0.25;
  const Hamiltonian h = preset_linear(a);
  const PhaseVec x = point(0.4, -1.1);
  // dH = a ^ x with gradient -J a, so the field J grad H equals a itself.
  CHECK((h.gradient(x) + symplectic_j(1) * a).norm() <= 1e-15);
  CHECK((hamiltonian_field(h, x) - a).norm() <= 1e-15);
  // a = (-eps, 0) represents dH = eps q.
  PhaseVec aq(2);
  aq << -0.2, 0.0;
  CHECK(preset_linear(aq).value(point(3.0, 1.5)) == doctest::Approx(0.2 * 1.5));
}

TEST_CASE("presets evaluate to their defining formulas") {
  const PhaseVec x = point(1.2, -0.8);
  CHECK(preset_free().value(x) == doctest::Approx(0.5 * 1.2 * 1.2));
  CHECK(preset_harmonic(2.0).value(x) == doctest::Approx(1.0 * (1.44 + 0.64)));
  CHECK(preset_inverted(2.0).value(x) == doctest::Approx(1.0 * (1.44 - 0.64)));
  CHECK(preset_quartic(0.4).value(x) ==
        doctest::Approx(0.5 * 1.44 + 0.1 * std::pow(0.8, 4)));
  CHECK(preset_harmonic(1.0).is_quadratic());
  CHECK_FALSE(preset_quartic(0.1).is_quadratic());
}

TEST_CASE("combine is linear in values and preserves quadratic kind") {
  const Hamiltonian h1 = preset_harmonic(1.0);
  const Hamiltonian h2 = preset_inverted(0.5);
  const Hamiltonian mix = Hamiltonian::combine(h1, 2.0, h2, -3.0);
  const PhaseVec x = point(0.3, 0.9);
  CHECK(mix.value(x) == doctest::Approx(2.0 * h1.value(x) - 3.0 * h2.value(x)));
  CHECK(mix.is_quadratic());

  const Hamiltonian gen_mix = Hamiltonian::combine(h1, 1.0, preset_quartic(0.1), 1.0);
  CHECK_FALSE(gen_mix.is_quadratic());
  CHECK(gen_mix.value(x) ==
        doctest::Approx(h1.value(x) + preset_quartic(0.1).value(x)));
  CHECK((gen_mix.gradient(x) - h1.gradient(x) - preset_quartic(0.1).gradient(x)).norm() <=
        1e-9);
}

TEST_CASE("perturbation pair branch arithmetic") {
  PerturbationPair pair;
  pair.mean = preset_harmonic(1.0);
  SymmetricMatrix dh(2);
  dh.set(0, 0, 0.2);
  dh.set(1, 1, -0.2);
  pair.delta = Hamiltonian::quadratic(dh, PhaseVec::Zero(2));
  const PhaseVec x = point(0.7, 1.3);
  CHECK(pair.plus().value(x) ==
        doctest::Approx(pair.mean.value(x) + 0.5 * pair.delta.value(x)));
  CHECK(pair.minus().value(x) ==
        doctest::Approx(pair.mean.value(x) - 0.5 * pair.delta.value(x)));
  CHECK(pair.dof() == 1);
  CHECK(pair.quadratic());

  const PerturbationPair sw = pair.swapped();
  CHECK(sw.mean.value(x) == doctest::Approx(pair.mean.value(x)));
  CHECK(sw.delta.value(x) == doctest::Approx(-pair.delta.value(x)));

  // make_pair reconstructs mean and delta from the two branches.
  const PerturbationPair built = make_pair(pair.minus(), pair.plus());
  CHECK(built.mean.value(x) == doctest::Approx(pair.mean.value(x)));
  CHECK(built.delta.value(x) == doctest::Approx(pair.delta.value(x)));
}

TEST_CASE("separable polynomial extraction") {
  const auto ho = preset_harmonic(2.0).separable();
  REQUIRE(ho.has_value());
  CHECK(ho->kin[2] == doctest::Approx(1.0));
  CHECK(ho->pot[2] == doctest::Approx(1.0));
  CHECK(ho->value(1.5, -0.5) == doctest::Approx(preset_harmonic(2.0).value(point(1.5, -0.5))));

  const auto quartic = preset_quartic(0.4).separable();
  REQUIRE(quartic.has_value());
  CHECK(quartic->kin[2] == doctest::Approx(0.5));
  CHECK(quartic->pot[4] == doctest::Approx(0.1));
  CHECK(quartic->dpot(2.0) == doctest::Approx(0.4 * 8.0));
  CHECK(quartic->d2kin(1.0) == doctest::Approx(1.0));

  // A p-q cross term has no separable form.
  SymmetricMatrix cross(2);
  cross.set(0, 1, 1.0);
  CHECK_FALSE(Hamiltonian::quadratic(cross, PhaseVec::Zero(2)).separable().has_value());

  SeparablePoly sum = SeparablePoly::sum(*ho, 2.0, *quartic, -1.0);
  CHECK(sum.value(1.0, 1.0) == doctest::Approx(2.0 * ho->value(1.0, 1.0) - quartic->value(1.0, 1.0)));
  SeparablePoly sc = quartic->scaled(3.0);
  CHECK(sc.pot[4] == doctest::Approx(0.3));
}

TEST_CASE("general hamiltonian with finite-difference fallbacks") {
  GeneralHamiltonian g;
  g.dof = 1;
  g.value = [](const PhaseVec& x) { return 0.5 * x[0] * x[0] + 0.25 * std::pow(x[1], 4); };
  const Hamiltonian h = Hamiltonian::general(g);
  const PhaseVec x = point(0.9, 1.1);
  PhaseVec grad_exact(2);
  grad_exact << 0.9, std::pow(1.1, 3);
  CHECK((h.gradient(x) - grad_exact).norm() <= 1e-7);
  Mat hess_exact = Mat::Zero(2, 2);
  hess_exact(0, 0) = 1.0;
  hess_exact(1, 1) = 3.0 * 1.1 * 1.1;
  CHECK((h.hessian(x) - hess_exact).norm() <= 1e-5);
}

TEST_CASE("finite difference helpers against analytic derivatives") {
  auto f = [](const PhaseVec& x) {
    return std::sin(x[0]) * x[1] + 0.5 * x[1] * x[1] * x[0];
  };
  const PhaseVec x = point(0.6, -0.9);
  PhaseVec grad_exact(2);
  grad_exact << std::cos(0.6) * (-0.9) + 0.5 * 0.81, std::sin(0.6) + (-0.9) * 0.6;
  CHECK((fd_gradient(f, x) - grad_exact).norm() <= 1e-8);
  Mat hess_exact(2, 2);
  hess_exact << -std::sin(0.6) * (-0.9), std::cos(0.6) + (-0.9),
      std::cos(0.6) + (-0.9), 0.6;
  CHECK((fd_hessian(f, x) - hess_exact).norm() <= 1e-5);
}

TEST_CASE("dimension validation") {
  SymmetricMatrix hess(2);
  PhaseVec a3(3);
  CHECK_THROWS_AS(Hamiltonian::quadratic(hess, a3), std::invalid_argument);
  const Hamiltonian h = preset_harmonic(1.0);
  PhaseVec x4(4);
  x4.setZero();
  CHECK_THROWS_AS(h.value(x4), std::invalid_argument);
}
