#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "loschmidt/engine.hpp"
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

PerturbationPair drift_pair(double eps) {
  PhaseVec half(2), full(2);
  half << -eps / 2.0, 0.0;
  full << -eps, 0.0;
  PerturbationPair pair;
  pair.mean = preset_linear(half);
  pair.delta = preset_linear(full);
  return pair;
}

// The same squeeze pair but presented through the general (callable)
// interface, forcing the trajectory/stencil code path.
PerturbationPair squeeze_pair_general(double omega, double eps) {
  const PerturbationPair quad = squeeze_pair(omega, eps);
  auto wrap = [](const Hamiltonian& h) {
    GeneralHamiltonian g;
    g.dof = 1;
    g.value = [h](const PhaseVec& x) { return h.value(x); };
    g.gradient = [h](const PhaseVec& x) { return h.gradient(x); };
    g.hessian = [h](const PhaseVec& x) { return h.hessian(x); };
    g.separable = h.separable();
    return Hamiltonian::general(g);
  };
  PerturbationPair pair;
  pair.mean = wrap(quad.mean);
  pair.delta = wrap(quad.delta);
  return pair;
}

}  // namespace

TEST_CASE("method names round trip") {
  for (Method m : {Method::dr_minus, Method::dr_mean, Method::idr, Method::quad_closed,
                   Method::grid}) {
    const auto back = method_from_name(method_name(m));
    REQUIRE(back.has_value());
    CHECK(*back == m);
  }
  CHECK_FALSE(method_from_name("nonsense").has_value());
}

TEST_CASE("zero perturbation gives exactly one for every estimator") {
  PerturbationPair pair;
  pair.mean = preset_harmonic(1.0);
  pair.delta = Hamiltonian::quadratic(SymmetricMatrix(2), PhaseVec::Zero(2));
  const GaussianState state = coherent_state(point(0.3, -0.2));
  EngineOptions opts;
  opts.sampler.n = 300;
  const EchoSeries r = run_methods(state, pair, {0.0, 0.8, 1.6},
                                   {Method::dr_minus, Method::dr_mean, Method::idr,
                                    Method::quad_closed},
                                   opts);
  for (const MethodSeries& ms : r.series) {
    for (std::size_t j = 0; j < r.times.size(); ++j) {
      CHECK(ms.values[j].real() == 1.0);
      CHECK(ms.values[j].imag() == 0.0);
      CHECK(ms.se_re[j] == 0.0);
    }
  }
}

TEST_CASE("time zero gives exactly one") {
  const PerturbationPair pair = squeeze_pair(1.0, 0.1);
  const GaussianState state = coherent_state(point(0.0, 1.0));
  EngineOptions opts;
  opts.sampler.n = 200;
  const EchoSeries r =
      run_methods(state, pair, {0.0}, {Method::dr_mean, Method::idr, Method::quad_closed},
                  opts);
  for (const MethodSeries& ms : r.series) {
    CHECK(ms.values[0] == cplx(1.0, 0.0));
  }
}

TEST_CASE("pure drift pair: every estimator matches the analytic result") {
  const double eps = 0.2, hbar = 1.0;
  const PerturbationPair pair = drift_pair(eps);
  const GaussianState state = coherent_state(point(0.0, 0.0), hbar);
  EngineOptions opts;
  opts.sampler.n = 50000;
  opts.sampler.seed = 11;
  const std::vector<double> times{0.5, 1.5, 3.0};
  const EchoSeries r = run_methods(state, pair, times,
                                   {Method::dr_minus, Method::dr_mean, Method::idr,
                                    Method::quad_closed},
                                   opts);
  for (const MethodSeries& ms : r.series) {
    for (std::size_t j = 0; j < times.size(); ++j) {
      const double expected = test_oracles::linear_echo_modulus(times[j], eps, hbar);
      const double tol =
          ms.method == Method::quad_closed
              ? 1e-12
              : std::max(3.0 * std::hypot(ms.se_re[j], ms.se_im[j]), 1e-6);
      CHECK(std::abs(std::abs(ms.values[j]) - expected) <= tol);
    }
  }
}

TEST_CASE("gauss-hermite quadrature reproduces the closed form") {
  const PerturbationPair pair = squeeze_pair(1.0, 0.1);
  const GaussianState state = coherent_state(point(0.4, 0.9));
  EngineOptions gh;
  gh.sampler.kind = SamplerOptions::Kind::gauss_hermite;
  gh.sampler.gh_order = 64;
  const std::vector<double> times{0.5, 1.0, 2.0};
  const EchoSeries r = run_methods(state, pair, times, {Method::idr, Method::quad_closed}, gh);
  for (std::size_t j = 0; j < times.size(); ++j) {
    CHECK(std::abs(r.series[0].values[j] - r.series[1].values[j]) <= 1e-9);
    CHECK(r.series[0].se_re[j] == 0.0);  // quadrature carries no sampling error
  }
}

TEST_CASE("quadratic and general code paths agree on the same pair") {
  const GaussianState state = coherent_state(point(0.2, 1.1));
  EngineOptions opts;
  opts.sampler.n = 400;
  opts.sampler.seed = 5;
  opts.integrator.dt = 1e-3;
  const std::vector<double> times{0.6, 1.2};
  const EchoSeries quad = run_methods(state, squeeze_pair(1.0, 0.1), times,
                                      {Method::dr_minus, Method::dr_mean, Method::idr}, opts);
  const EchoSeries gen = run_methods(state, squeeze_pair_general(1.0, 0.1), times,
                                     {Method::dr_minus, Method::dr_mean, Method::idr}, opts);
  for (std::size_t s = 0; s < quad.series.size(); ++s) {
    for (std::size_t j = 0; j < times.size(); ++j) {
      // Same samples by construction: differences only from the midpoint
      // discretization of trajectories and finite-difference Hessians.
      CHECK(std::abs(quad.series[s].values[j] - gen.series[s].values[j]) <= 2e-5);
      CHECK(std::abs(quad.series[s].diag[j].w_mean - gen.series[s].diag[j].w_mean) <= 1e-4);
    }
  }
}

TEST_CASE("results are independent of the worker count") {
  const PerturbationPair pair = squeeze_pair(1.0, 0.1);
  const GaussianState state = coherent_state(point(0.0, 1.0));
  EngineOptions one, many;
  one.sampler.n = 3000;
  one.sampler.seed = 777;
  one.workers = 1;
  many = one;
  many.workers = 7;
  const std::vector<double> times{0.0, 0.9, 1.8};
  const EchoSeries a = run_methods(state, pair, times, {Method::dr_mean, Method::idr}, one);
  const EchoSeries b = run_methods(state, pair, times, {Method::dr_mean, Method::idr}, many);
  for (std::size_t s = 0; s < a.series.size(); ++s) {
    for (std::size_t j = 0; j < times.size(); ++j) {
      CHECK(a.series[s].values[j] == b.series[s].values[j]);
      CHECK(a.series[s].se_re[j] == b.series[s].se_re[j]);
      CHECK(a.series[s].se_im[j] == b.series[s].se_im[j]);
      CHECK(a.series[s].diag[j].w_mean == b.series[s].diag[j].w_mean);
    }
  }
}

TEST_CASE("standard errors shrink like one over sqrt n") {
  const PerturbationPair pair = squeeze_pair(1.0, 0.1);
  const GaussianState state = coherent_state(point(0.0, 1.0));
  EngineOptions small, large;
  small.sampler.n = 2000;
  large.sampler.n = 32000;
  const std::vector<double> times{1.0};
  const MethodSeries a = estimate_dr(state, pair, times, small);
  const MethodSeries b = estimate_dr(state, pair, times, large);
  const double ratio = a.se_re[0] / b.se_re[0];
  CHECK(ratio == doctest::Approx(4.0).epsilon(0.25));
}

TEST_CASE("caustic time points are flagged and skipped, not fatal") {
  // At eps = 1 the amplitude determinant 1 - eps^2 sin^2(wt) hits zero at
  // wt = pi/2; the estimator must flag that point and keep the others.
  const PerturbationPair pair = squeeze_pair(1.0, 1.0);
  const GaussianState state = coherent_state(point(0.0, 0.5));
  EngineOptions opts;
  opts.sampler.n = 200;
  const std::vector<double> times{0.3, M_PI / 2.0, 2.5};
  const EchoSeries r = run_methods(state, pair, times, {Method::idr, Method::dr_mean}, opts);
  const MethodSeries& idr = r.series[0];
  CHECK_FALSE(idr.diag[0].caustic);
  CHECK(idr.diag[1].caustic);
  CHECK(std::isnan(idr.values[1].real()));
  CHECK_FALSE(idr.diag[2].caustic);
  CHECK(std::isfinite(idr.values[2].real()));
  // The phase-only estimator is unaffected.
  const MethodSeries& dr = r.series[1];
  for (int j = 0; j < 3; ++j) CHECK_FALSE(dr.diag[j].caustic);
}

TEST_CASE("diagnostics populate per method") {
  const PerturbationPair pair = squeeze_pair(1.0, 0.1);
  const GaussianState state = coherent_state(point(0.0, 1.0));
  EngineOptions opts;
  opts.sampler.n = 500;
  const std::vector<double> times{1.0};
  const EchoSeries r = run_methods(state, pair, times,
                                   {Method::dr_mean, Method::idr, Method::quad_closed}, opts);
  const TimePointDiag& d_dr = r.series[0].diag[0];
  const TimePointDiag& d_idr = r.series[1].diag[0];
  const TimePointDiag& d_qc = r.series[2].diag[0];
  CHECK(d_dr.w_mean == 1.0);
  CHECK(d_idr.w_mean == doctest::Approx(test_oracles::squeeze_weight(1.0, 0.1, 1.0))
                            .epsilon(1e-9));
  CHECK(d_qc.w_mean == doctest::Approx(d_idr.w_mean).epsilon(1e-9));
  CHECK(std::isfinite(d_idr.err13_mean));
  CHECK(std::isfinite(d_idr.eta_db_eta));
  // For a nonquadratic mean the stationary-phase remainder is unavailable.
  PerturbationPair quartic;
  quartic.mean = preset_quartic(0.1);
  SymmetricMatrix dh(2);
  dh.set(1, 1, 0.02);
  quartic.delta = Hamiltonian::quadratic(dh, PhaseVec::Zero(2));
  EngineOptions small;
  small.sampler.n = 20;
  const EchoSeries rq = run_methods(state, quartic, times, {Method::idr}, small);
  CHECK(std::isnan(rq.series[0].diag[0].eta_db_eta));
  CHECK(std::isfinite(rq.series[0].diag[0].err13_mean));
}

TEST_CASE("closed-form diagnostics match monte carlo estimates") {
  const PerturbationPair pair = squeeze_pair(1.0, 0.15);
  const GaussianState state = coherent_state(point(0.3, 0.9));
  EngineOptions opts;
  opts.sampler.n = 200000;
  const std::vector<double> times{1.2};
  const EchoSeries r =
      run_methods(state, pair, times, {Method::dr_mean, Method::quad_closed}, opts);
  // Floors sit several standard errors above the n = 2e5 sampling noise.
  const double mc = r.series[0].diag[0].err13_mean;
  const double closed = r.series[1].diag[0].err13_mean;
  CHECK(std::abs(mc - closed) <= std::max(0.05 * std::abs(closed), 5e-5));
  const double mc_eta = r.series[0].diag[0].eta_db_eta;
  const double closed_eta = r.series[1].diag[0].eta_db_eta;
  CHECK(std::abs(mc_eta - closed_eta) <= std::max(0.05 * std::abs(closed_eta), 5e-5));
}

TEST_CASE("two degrees of freedom with a drift pair") {
  // Pure drift in 2 dof: closed form still exact, sampling still unbiased.
  PhaseVec half(4), full(4);
  full << -0.1, 0.05, 0.0, -0.2;
  half = 0.5 * full;
  PerturbationPair pair;
  pair.mean = preset_linear(half);
  pair.delta = preset_linear(full);
  PhaseVec center(4);
  center << 0.1, -0.3, 0.6, 0.2;
  const GaussianState state = coherent_state(center);
  EngineOptions opts;
  opts.sampler.n = 40000;
  opts.sampler.seed = 3;
  const std::vector<double> times{1.0, 2.0};
  const EchoSeries r =
      run_methods(state, pair, times, {Method::dr_mean, Method::idr, Method::quad_closed},
                  opts);
  const double da = full.norm();
  for (std::size_t j = 0; j < times.size(); ++j) {
    const double expected = test_oracles::linear_echo_modulus(times[j], da, 1.0);
    CHECK(std::abs(std::abs(r.series[2].values[j]) - expected) <= 1e-12);
    CHECK(std::abs(r.series[0].values[j] - r.series[2].values[j]) <=
          3.0 * std::hypot(r.series[0].se_re[j], r.series[0].se_im[j]));
    CHECK(std::abs(r.series[1].values[j] - r.series[2].values[j]) <=
          3.0 * std::hypot(r.series[1].se_re[j], r.series[1].se_im[j]));
  }
}

TEST_CASE("input validation") {
  const PerturbationPair pair = squeeze_pair(1.0, 0.1);
  const GaussianState state = coherent_state(point(0.0, 1.0));
  EngineOptions opts;
  opts.sampler.n = 10;
  CHECK_THROWS_AS(run_methods(state, pair, {1.0, 0.5}, {Method::dr_mean}, opts),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_methods(state, pair, {-1.0}, {Method::dr_mean}, opts),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      run_methods(state, pair, {1.0}, {Method::dr_mean, Method::dr_mean}, opts),
      std::invalid_argument);
  CHECK_THROWS_AS(run_methods(state, pair, {1.0}, {}, opts), std::invalid_argument);
  // Dimension mismatch between the state and the pair.
  PhaseVec c4(4);
  c4.setZero();
  CHECK_THROWS_AS(run_methods(coherent_state(c4), pair, {1.0}, {Method::dr_mean}, opts),
                  std::invalid_argument);
  // Gauss-Hermite requires one degree of freedom.
  PerturbationPair drift4;
  PhaseVec a4(4);
  a4 << -0.1, 0.0, 0.0, 0.0;
  drift4.mean = preset_linear(PhaseVec(0.5 * a4));
  drift4.delta = preset_linear(a4);
  EngineOptions gh;
  gh.sampler.kind = SamplerOptions::Kind::gauss_hermite;
  CHECK_THROWS_AS(run_methods(coherent_state(c4), drift4, {1.0}, {Method::dr_mean}, gh),
                  std::invalid_argument);
  // The closed form rejects nonquadratic pairs.
  PerturbationPair quartic;
  quartic.mean = preset_quartic(0.1);
  quartic.delta = Hamiltonian::quadratic(SymmetricMatrix(2), PhaseVec::Zero(2));
  CHECK_THROWS_AS(estimate_quadratic_closed(state, quartic, {1.0}),
                  std::invalid_argument);
}

TEST_CASE("propagation failure reports the failing sample") {
  PerturbationPair pair;
  pair.mean = preset_quartic(1.0);
  SymmetricMatrix dh(2);
  dh.set(1, 1, 0.02);
  pair.delta = Hamiltonian::quadratic(dh, PhaseVec::Zero(2));
  const GaussianState state = coherent_state(point(0.0, 2.0));
  EngineOptions opts;
  opts.sampler.n = 8;
  opts.integrator.dt = 20.0;  // guaranteed fixed-point failure
  try {
    run_methods(state, pair, {40.0}, {Method::dr_mean}, opts);
    FAIL("expected IntegrationError");
  } catch (const IntegrationError& e) {
    CHECK(std::string(e.what()).find("sample") != std::string::npos);
  }
}

TEST_CASE("estimator wrappers match run_methods") {
  const PerturbationPair pair = squeeze_pair(1.0, 0.1);
  const GaussianState state = coherent_state(point(0.0, 1.0));
  EngineOptions opts;
  opts.sampler.n = 500;
  const std::vector<double> times{0.7};
  const MethodSeries dm = estimate_dr(state, pair, times, opts, /*minus_trajectories=*/true);
  const EchoSeries r = run_methods(state, pair, times, {Method::dr_minus}, opts);
  CHECK(dm.values[0] == r.series[0].values[0]);
  const MethodSeries idr = estimate_idr(state, pair, times, opts);
  const EchoSeries r2 = run_methods(state, pair, times, {Method::idr}, opts);
  CHECK(idr.values[0] == r2.series[0].values[0]);
}

TEST_CASE("comparison report") {
  const PerturbationPair pair = squeeze_pair(1.0, 0.1);
  const GaussianState state = coherent_state(point(0.0, 0.5));
  EngineOptions opts;
  opts.sampler.n = 20000;
  const ComparisonReport rep =
      compare(state, pair, {0.5, 1.0}, {Method::dr_mean, Method::idr, Method::quad_closed},
              opts);
  CHECK(rep.pairs.size() == 3);
  for (const MethodComparison& c : rep.pairs) {
    CHECK(c.points == 2);
    CHECK(c.max_abs_diff >= c.mean_abs_diff);
    CHECK(c.max_abs_diff < 0.05);
  }
}
