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

}  // namespace

TEST_CASE("center generating function of the harmonic flow") {
  const QuadraticHamiltonian ho = preset_harmonic(1.0).quad();
  for (double t : {0.4, 1.0, 2.0}) {
    const CenterGenerating gen = center_generating(ho, t);
    const double expected = -std::tan(t / 2.0);
    CHECK(gen.b(0, 0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(gen.b(1, 1) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(gen.b(0, 1)) <= 1e-13);
    CHECK(gen.alpha.norm() <= 1e-13);
    // Round trip back to the map.
    const Mat m = cayley_b_to_m(gen.b).m;
    CHECK((m - mat_exp(symplectic_j(1) * ho.hess.mat(), t)).norm() <= 1e-12);
  }
  CHECK_THROWS_AS(center_generating(ho, M_PI), CausticEncountered);
}

TEST_CASE("center generating function of drifts and affine flows") {
  {
    PhaseVec a(2);
    a << 0.3, -0.8;
    const CenterGenerating gen = center_generating(preset_linear(a).quad(), 1.7);
    CHECK(gen.b.mat().norm() <= 1e-14);
    CHECK((gen.alpha + 1.7 * a).norm() <= 1e-13);
  }
  {
    // Affine: alpha = -2 (I + M)^{-1} d reproduces the flow's shift.
    SymmetricMatrix hess(2);
    hess.set(0, 0, 1.0);
    hess.set(1, 1, 1.0);
    PhaseVec a(2);
    a << 0.4, 0.9;
    QuadraticHamiltonian h;
    h.hess = hess;
    h.a = a;
    const double t = 1.3;
    const CenterGenerating gen = center_generating(h, t);
    const LinearSympMap flow = quad_flow_map(h, t);
    const Vec d_back = -0.5 * ((Mat::Identity(2, 2) + flow.m) * gen.alpha);
    CHECK((d_back - flow.shift).norm() <= 1e-12);
  }
}

TEST_CASE("stationary phase value equals the perturbation action") {
  // S^q(x) = deltaS(x) for both oscillator pairs, pointwise to 1e-9.
  for (double eps : {0.01, 0.1}) {
    const PerturbationPair ho = squeeze_pair(1.0, eps);
    const PerturbationPair inv = inverted_pair(1.0, eps);
    for (double t : {0.3, 1.0, M_PI / 2.0}) {
      for (double p : {-2.0, 0.0, 1.5}) {
        for (double q : {-1.0, 2.0}) {
          const PhaseVec x = point(p, q);
          CHECK(std::abs(sp_reduce(ho, x, t).s_q -
                         test_oracles::squeeze_action(1.0, eps, p, q, t)) <= 1e-9);
          CHECK(std::abs(sp_reduce(inv, x, t).s_q -
                         test_oracles::inverted_action(1.0, eps, p, q, t)) <= 1e-9);
        }
      }
    }
  }
}

TEST_CASE("stationary phase bundle internals") {
  const PerturbationPair pair = squeeze_pair(1.0, 0.05);
  const PhaseVec x = point(0.8, -0.6);
  const double t = 1.2;
  const SpData data = sp_reduce(pair, x, t);

  // Weight equals the amplitude computed from the action Hessian.
  CHECK(data.weight ==
        doctest::Approx(amplitude_weight(quad_action_form(pair, t).b)).epsilon(1e-12));

  // The mean point is the center of the mean-flow chord through x:
  // x_bar = (x + flow(x))/2 ... verified against the exact mean flow.
  const PhaseVec x_t = quad_flow(pair.mean.quad(), x, t);
  CHECK((data.x_bar - 0.5 * (x + x_t)).norm() <= 1e-10);

  // eta is first order and the neglected term is third order in eps.
  const SpData data2 = sp_reduce(squeeze_pair(1.0, 0.1), x, t);
  CHECK(data2.eta.norm() / data.eta.norm() == doctest::Approx(2.0).epsilon(0.02));
  CHECK(data2.neglected / data.neglected == doctest::Approx(8.0).epsilon(0.05));
  CHECK(data.neglected == doctest::Approx(neglected_term(data.eta,
        sp_perturbation_params(pair, t).d_b)).epsilon(1e-12));
}

TEST_CASE("linear perturbation action closed form") {
  PhaseVec da(2);
  da << -0.2, 0.1;
  {
    // Drift mean.
    PhaseVec a(2);
    a << 0.05, -0.02;
    const QuadraticHamiltonian mean = preset_linear(a).quad();
    const PhaseVec x = point(0.7, 1.1);
    const double t = 1.6;
    PerturbationPair pair;
    pair.mean = preset_linear(a);
    pair.delta = preset_linear(da);
    CHECK(delta_action_linear(mean, da, x, t) ==
          doctest::Approx(delta_action(pair, x, t)).epsilon(1e-11));
  }
  {
    // Invertible harmonic mean.
    const QuadraticHamiltonian mean = preset_harmonic(1.3).quad();
    PerturbationPair pair;
    pair.mean = preset_harmonic(1.3);
    pair.delta = preset_linear(da);
    const PhaseVec x = point(-0.4, 0.9);
    const double t = 1.1;
    CHECK(delta_action_linear(mean, da, x, t) ==
          doctest::Approx(delta_action(pair, x, t)).epsilon(1e-11));
  }
}

TEST_CASE("reference formulas agree with the exact machinery") {
  for (double eps : {0.05, 0.2}) {
    for (double t : {0.5, 1.3}) {
      {
        const PerturbationPair pair = squeeze_pair(1.0, eps);
        const PhaseVec x = point(1.1, -0.7);
        CHECK(reference_action(RefPreset::ho, 1.0, eps, x, t) ==
              doctest::Approx(delta_action(pair, x, t)).epsilon(1e-11));
        CHECK((reference_b_l(RefPreset::ho, 1.0, eps, t).mat() -
               quad_action_form(pair, t).b.mat())
                  .norm() <= 1e-10);
        CHECK((reference_b_plus(RefPreset::ho, 1.0, eps, t).mat() -
               center_generating(pair.plus().quad(), t).b.mat())
                  .norm() <= 1e-10);
        CHECK((reference_b_minus(RefPreset::ho, 1.0, eps, t).mat() -
               center_generating(pair.minus().quad(), t).b.mat())
                  .norm() <= 1e-10);
      }
      {
        const PerturbationPair pair = inverted_pair(1.0, eps);
        const PhaseVec x = point(0.4, 1.2);
        CHECK(reference_action(RefPreset::inverted, 1.0, eps, x, t) ==
              doctest::Approx(delta_action(pair, x, t)).epsilon(1e-11));
        CHECK((reference_b_l(RefPreset::inverted, 1.0, eps, t).mat() -
               quad_action_form(pair, t).b.mat())
                  .norm() <= 1e-10);
      }
    }
  }
}

TEST_CASE("exact echo map properties") {
  const double t = 1.4;
  {
    // Zero perturbation: the echo map is the identity and chords vanish.
    PerturbationPair pair;
    pair.mean = preset_harmonic(1.0);
    pair.delta = Hamiltonian::quadratic(SymmetricMatrix(2), PhaseVec::Zero(2));
    const LinearSympMap map = exact_echo_map(pair, t);
    CHECK((map.m - Mat::Identity(2, 2)).norm() <= 1e-12);
    CHECK(exact_echo_chord(pair, point(0.8, -0.3), t).norm() <= 1e-12);
  }
  {
    const PerturbationPair pair = squeeze_pair(1.0, 0.2);
    const LinearSympMap map = exact_echo_map(pair, t);
    CHECK(symplectic_defect(map.m) <= 1e-12);
    // Composition identity: map = Phi_+^{-t} o Phi_-^{t}.
    const PhaseVec x = point(0.5, 0.9);
    const PhaseVec via_flows =
        quad_flow(pair.plus().quad(), quad_flow(pair.minus().quad(), x, t), -t);
    CHECK((map.apply(x) - via_flows).norm() <= 1e-11);
    // The chord through the midpoint: y + E(y) = 2c at the returned chord.
    const PhaseVec c = point(-0.2, 0.6);
    const PhaseVec xi = exact_echo_chord(pair, c, t);
    // Reconstruct the endpoint pair from (c, xi): y = c - xi/2, E(y) = c + xi/2.
    CHECK((map.apply(c - 0.5 * xi) - (c + 0.5 * xi)).norm() <= 1e-10);
  }
}

TEST_CASE("perturbation parameter derivatives are first order") {
  // d_b is exactly linear in the perturbation strength.
  const double t = 1.1;
  const SpParams p1 = sp_perturbation_params(squeeze_pair(1.0, 0.01), t);
  const SpParams p2 = sp_perturbation_params(squeeze_pair(1.0, 0.02), t);
  CHECK((p2.d_b.mat() - 2.0 * p1.d_b.mat()).norm() <= 1e-12);
  // And it matches the actual branch difference to second order.
  const SymmetricMatrix bp = center_generating(squeeze_pair(1.0, 0.01).plus().quad(), t).b;
  const SymmetricMatrix bm = center_generating(squeeze_pair(1.0, 0.01).minus().quad(), t).b;
  CHECK((p1.d_b.mat() - (bp.mat() - bm.mat())).norm() <= 1e-5);
}
