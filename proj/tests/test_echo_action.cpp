#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "loschmidt/dynamics.hpp"
#include "loschmidt/echo_action.hpp"
#include "loschmidt/quadratic_exact.hpp"
#include "oracles.hpp"

using namespace loschmidt;

namespace {

PhaseVec point(double p, double q) {
  PhaseVec x(2);
  x << p, q;
  return x;
}

PerturbationPair squeeze_pair(double omega, double eps) {
  PerturbationPair pair;
  pair.mean = preset_harmonic(omega);
  SymmetricMatrix hess(2);
  hess.set(0, 0, 2.0 * eps * omega);
  hess.set(1, 1, -2.0 * eps * omega);
  pair.delta = Hamiltonian::quadratic(hess, PhaseVec::Zero(2));
  return pair;
}

PerturbationPair inverted_pair(double omega, double eps) {
  PerturbationPair pair;
  pair.mean = preset_inverted(omega);
  SymmetricMatrix hess(2);
  hess.set(0, 0, 2.0 * eps * omega);
  hess.set(1, 1, 2.0 * eps * omega);
  pair.delta = Hamiltonian::quadratic(hess, PhaseVec::Zero(2));
  return pair;
}

// H_- = 0, H_+ = eps q: mean is the pure drift (eps/2) q, delta is eps q.
PerturbationPair drift_pair(double eps) {
  PhaseVec half(2), full(2);
  half << -eps / 2.0, 0.0;
  full << -eps, 0.0;
  PerturbationPair pair;
  pair.mean = preset_linear(half);
  pair.delta = preset_linear(full);
  return pair;
}

}  // namespace

TEST_CASE("squeezing action matches its closed form") {
  const double omega = 1.0;
  for (double eps : {0.01, 0.1}) {
    const PerturbationPair pair = squeeze_pair(omega, eps);
    for (double t : {0.3, 1.0, M_PI / 2.0}) {
      for (double p : {-2.0, 0.0, 1.0}) {
        for (double q : {-1.0, 0.5, 2.0}) {
          const double expected = test_oracles::squeeze_action(omega, eps, p, q, t);
          const double exact =
              delta_action(pair, point(p, q), t, ActionScheme::exact_flow);
          CHECK(std::abs(exact - expected) <= 1e-10);
          IntegratorOptions opt;
          opt.dt = 1e-3;
          const double mid =
              delta_action(pair, point(p, q), t, ActionScheme::midpoint, opt);
          CHECK(std::abs(mid - expected) <= 1e-6);
        }
      }
    }
  }
  // Spot value: eps = 0.1, wt = pi/2 leaves only the 2 eps p q term.
  CHECK(delta_action(squeeze_pair(1.0, 0.1), point(1.0, 2.0), M_PI / 2.0) ==
        doctest::Approx(0.4).epsilon(1e-9));
}

TEST_CASE("inverted oscillator action matches its closed form") {
  const PerturbationPair pair = inverted_pair(1.0, 0.1);
  const double expected = test_oracles::inverted_action(1.0, 0.1, 0.0, 1.0, 1.0);
  CHECK(expected == doctest::Approx(-0.05 * std::sinh(2.0)));
  CHECK(delta_action(pair, point(0.0, 1.0), 1.0) == doctest::Approx(expected).epsilon(1e-10));
  CHECK(delta_action(pair, point(0.7, -0.4), 1.4) ==
        doctest::Approx(test_oracles::inverted_action(1.0, 0.1, 0.7, -0.4, 1.4))
            .epsilon(1e-10));
}

TEST_CASE("pure drift action") {
  // deltaH = eps q along the mean drift (which moves only p): -eps q t.
  const PerturbationPair pair = drift_pair(0.2);
  CHECK(delta_action(pair, point(1.0, 1.5), 1.0) == doctest::Approx(-0.3).epsilon(1e-12));
  // Independent closed form for linear perturbations on a quadratic mean.
  PhaseVec da(2);
  da << -0.2, 0.0;
  CHECK(delta_action_linear(pair.mean.quad(), da, point(1.0, 1.5), 1.0) ==
        doctest::Approx(-0.3).epsilon(1e-12));
}

TEST_CASE("gradient and chord conventions") {
  const PerturbationPair pair = squeeze_pair(1.0, 0.1);
  const double t = M_PI / 2.0;
  // deltaS = 2 eps p q at wt = pi/2: grad = (0.2 q, 0.2 p).
  const PhaseVec g = delta_action_gradient(pair, point(1.0, 2.0), t);
  CHECK(g[0] == doctest::Approx(0.4).epsilon(1e-8));
  CHECK(g[1] == doctest::Approx(0.2).epsilon(1e-8));
  // Chord xi = J grad deltaS = (-0.2, 0.4).
  const PhaseVec xi = chord(pair, point(1.0, 2.0), t);
  CHECK(xi[0] == doctest::Approx(-0.2).epsilon(1e-8));
  CHECK(xi[1] == doctest::Approx(0.4).epsilon(1e-8));
}

TEST_CASE("chord calibration against the exact echo map") {
  // Small-perturbation regime: the first-order chord must match the exact
  // echo-map chord, and the sign-flipped candidate must not.
  const PerturbationPair pair = squeeze_pair(1.0, 1e-3);
  const PhaseVec x = point(0.7, -0.4);
  const double t = 1.1;
  const PhaseVec xi = chord(pair, x, t);
  const PhaseVec exact = exact_echo_chord(pair, x, t);
  CHECK((xi - exact).norm() <= 5e-6);
  CHECK((-xi - exact).norm() > 1e-4);
  const PhaseVec twice = 2.0 * xi;
  CHECK((twice - exact).norm() > 1e-4);  // -2 J grad and 2 J grad both fail
}

TEST_CASE("swapping the branches negates the action") {
  const PerturbationPair pair = squeeze_pair(1.0, 0.07);
  const PhaseVec x = point(0.9, -1.2);
  CHECK(delta_action(pair.swapped(), x, 1.3) ==
        doctest::Approx(-delta_action(pair, x, 1.3)).epsilon(1e-12));
}

TEST_CASE("naive chord equals the tangent chord only for drift means") {
  IntegratorOptions opt;
  opt.dt = 1e-3;
  {
    const PerturbationPair pair = drift_pair(0.2);
    const PhaseVec x = point(0.3, 0.8);
    CHECK((naive_chord(pair, x, 1.0, opt) - chord(pair, x, 1.0, opt)).norm() <= 1e-10);
  }
  {
    const PerturbationPair pair = squeeze_pair(1.0, 0.1);
    const PhaseVec x = point(0.3, 0.8);
    CHECK((naive_chord(pair, x, 1.5, opt) - chord(pair, x, 1.5, opt)).norm() > 1e-3);
  }
}

TEST_CASE("quadratic action form matches pointwise evaluation") {
  const PerturbationPair pair = squeeze_pair(1.0, 0.1);
  const double t = 1.2;
  const QuadActionForm form = quad_action_form(pair, t);
  for (double p : {-1.5, 0.2}) {
    for (double q : {-0.3, 1.7}) {
      const PhaseVec x = point(p, q);
      CHECK(form.eval(x) == doctest::Approx(delta_action(pair, x, t)).epsilon(1e-12));
      CHECK((form.grad(x) - delta_action_gradient(pair, x, t)).norm() <= 1e-9);
    }
  }
  CHECK(form.c == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("minus-branch action form matches direct quadrature") {
  const PerturbationPair pair = squeeze_pair(1.0, 0.1);
  const double t = 1.1;
  const QuadActionForm form = quad_action_form_minus(pair, t);
  const QuadraticHamiltonian h_minus = pair.minus().quad();
  for (double p : {-0.8, 0.5}) {
    for (double q : {0.4, 1.3}) {
      const PhaseVec x = point(p, q);
      const double expected = -test_oracles::simpson(
          [&](double tau) { return pair.delta.value(quad_flow(h_minus, x, tau)); }, t,
          2048);
      CHECK(form.eval(x) == doctest::Approx(expected).epsilon(1e-9));
    }
  }
}

TEST_CASE("hessian of the action via tangent and finite differences") {
  {
    const PerturbationPair pair = squeeze_pair(1.0, 0.1);
    const PhaseVec x = point(0.5, -0.3);
    const SymmetricMatrix tangent = hessian_delta_action(pair, x, 1.3, HessianMethod::tangent);
    const SymmetricMatrix fd = hessian_delta_action(pair, x, 1.3, HessianMethod::fd);
    CHECK((tangent.mat() - fd.mat()).norm() <= 1e-6);
    // Quadratic pair: the Hessian is x-independent and equals the form matrix.
    const QuadActionForm form = quad_action_form(pair, 1.3);
    CHECK((tangent.mat() - form.b.mat()).norm() <= 1e-10);
  }
  {
    // General mean: finite differences against the default (automatic) path.
    PerturbationPair pair;
    pair.mean = preset_quartic(0.1);
    SymmetricMatrix dh(2);
    dh.set(1, 1, 0.02);
    pair.delta = Hamiltonian::quadratic(dh, PhaseVec::Zero(2));
    const SymmetricMatrix b = hessian_delta_action(pair, point(0.2, 0.9), 1.5);
    const SymmetricMatrix b_fd =
        hessian_delta_action(pair, point(0.2, 0.9), 1.5, HessianMethod::fd);
    CHECK((b.mat() - b_fd.mat()).norm() <= 1e-9);
  }
}

TEST_CASE("amplitude weight closed forms and caustics") {
  {
    const double omega = 1.0, eps = 0.3;
    for (double t : {0.4, 1.0, 2.2}) {
      const double w = amplitude_weight(quad_action_form(squeeze_pair(omega, eps), t).b);
      CHECK(w == doctest::Approx(test_oracles::squeeze_weight(omega, eps, t)).epsilon(1e-10));
      const double wi =
          amplitude_weight(quad_action_form(inverted_pair(omega, eps), t).b);
      CHECK(wi == doctest::Approx(test_oracles::inverted_weight(omega, eps, t)).epsilon(1e-10));
    }
  }
  {
    SymmetricMatrix b(2);
    b.set(0, 0, 2.0);
    b.set(1, 1, -0.5);  // det(I + JB) = 1 + det B = 0
    CHECK_THROWS_AS(amplitude_weight(b), CausticEncountered);
    CHECK(amplitude_weight(SymmetricMatrix(2)) == doctest::Approx(1.0));
  }
}

TEST_CASE("first-order error estimate of the original estimator") {
  // err = -(1/8) xi . K xi with K = t * hess(deltaH) for quadratic deltaH.
  const PerturbationPair pair = squeeze_pair(1.0, 0.1);
  const PhaseVec x = point(1.0, 2.0);
  const double t = M_PI / 2.0;
  const PhaseVec xi = chord(pair, x, t);
  const Mat k = t * pair.delta.quad().hess.mat();
  const double expected = -0.125 * xi.dot(k * xi);
  CHECK(dr_action_error(pair, x, t) == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("echo local bundle is consistent with the individual pieces") {
  const PerturbationPair pair = squeeze_pair(1.0, 0.1);
  const PhaseVec x = point(0.6, 1.1);
  const double t = 1.4;
  const EchoLocalData local = echo_local(pair, x, t);
  CHECK(local.delta_action == doctest::Approx(delta_action(pair, x, t)).epsilon(1e-10));
  CHECK((local.chord - chord(pair, x, t)).norm() <= 1e-9);
  CHECK(local.weight ==
        doctest::Approx(amplitude_weight(hessian_delta_action(pair, x, t))).epsilon(1e-10));
  CHECK(local.err13 == doctest::Approx(dr_action_error(pair, x, t)).epsilon(1e-8));
  CHECK(local.has_neglected);
  // The neglected term is third order in the perturbation.
  const EchoLocalData local2 = echo_local(squeeze_pair(1.0, 0.2), x, t);
  const double ratio = local2.neglected / local.neglected;
  CHECK(ratio == doctest::Approx(8.0).epsilon(0.15));
}

TEST_CASE("zero perturbation gives identically zero action data") {
  PerturbationPair pair;
  pair.mean = preset_harmonic(1.0);
  pair.delta = Hamiltonian::quadratic(SymmetricMatrix(2), PhaseVec::Zero(2));
  const PhaseVec x = point(0.4, -0.9);
  CHECK(delta_action(pair, x, 1.7) == 0.0);
  CHECK(chord(pair, x, 1.7).norm() == 0.0);
  CHECK(amplitude_weight(hessian_delta_action(pair, x, 1.7)) == doctest::Approx(1.0));
}
