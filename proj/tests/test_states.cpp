#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "loschmidt/states.hpp"
#include "oracles.hpp"

using namespace loschmidt;

namespace {
PhaseVec point(double p, double q) {
  PhaseVec x(2);
  x << p, q;
  return x;
}
}  // namespace

TEST_CASE("state constructors and validation") {
  const GaussianState c = coherent_state(point(0.3, -0.7), 0.5);
  CHECK(c.dof() == 1);
  CHECK(c.hbar == 0.5);
  CHECK((c.g.mat() - Mat::Identity(2, 2)).norm() == 0.0);

  const GaussianState s = squeezed_state(point(0.0, 0.0), 0.4);
  CHECK(s.g(0, 0) == doctest::Approx(std::exp(-0.8)));
  CHECK(s.g(1, 1) == doctest::Approx(std::exp(0.8)));
  CHECK(s.g.mat().determinant() == doctest::Approx(1.0));

  SymmetricMatrix bad_det(2);
  bad_det.set(0, 0, 2.0);
  bad_det.set(1, 1, 2.0);
  CHECK_THROWS_AS(make_state(point(0, 0), bad_det), std::invalid_argument);

  SymmetricMatrix indef(2);
  indef.set(0, 0, 2.0);
  indef.set(1, 1, -0.5);
  CHECK_THROWS_AS(make_state(point(0, 0), indef), std::invalid_argument);

  CHECK_THROWS_AS(coherent_state(point(0, 0), -1.0), std::invalid_argument);
  PhaseVec odd(3);
  odd.setZero();
  CHECK_THROWS_AS(coherent_state(odd), std::invalid_argument);
}

TEST_CASE("phase-space density normalization and peak") {
  const double hbar = 0.7;
  const GaussianState s = squeezed_state(point(0.4, -0.2), 0.3, hbar);
  CHECK(wigner_eval(s, s.center) == doctest::Approx(1.0 / (M_PI * hbar)));
  // Riemann sum over a wide box integrates to 1.
  const int n = 400;
  const double half = 6.0, h = 2.0 * half / n;
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      total += wigner_eval(s, point(-half + (i + 0.5) * h + 0.4,
                                    -half + (j + 0.5) * h - 0.2)) *
               h * h;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("sample moments match the covariance (hbar/2) G^{-1}") {
  const double hbar = 0.8;
  const GaussianState s = squeezed_state(point(1.0, -2.0), 0.5, hbar);
  const long n = 200000;
  const std::vector<PhaseVec> xs = sample(s, n, 424242);
  PhaseVec mean = PhaseVec::Zero(2);
  for (const PhaseVec& x : xs) mean += x;
  mean /= double(n);
  Mat cov = Mat::Zero(2, 2);
  for (const PhaseVec& x : xs) cov += (x - mean) * (x - mean).transpose();
  cov /= double(n - 1);
  const Mat cov_exact = (hbar / 2.0) * s.g.mat().inverse();
  CHECK((mean - s.center).norm() <= 4.0 * std::sqrt(cov_exact.trace() / n));
  CHECK((cov - cov_exact).norm() <= 0.02 * cov_exact.norm());
}

TEST_CASE("sampling is per-index deterministic") {
  const GaussianState s = coherent_state(point(0.0, 0.0));
  const std::vector<PhaseVec> xs = sample(s, 100, 99);
  for (std::uint64_t i : {0ull, 17ull, 99ull}) {
    CHECK((xs[i] - sample_point(s, 99, i)).norm() == 0.0);
  }
  // Different seeds decorrelate.
  CHECK((sample_point(s, 99, 0) - sample_point(s, 100, 0)).norm() > 0.0);
}

TEST_CASE("grid wavefunction normalization and too-narrow detection") {
  const GaussianState s = squeezed_state(point(0.7, 0.3), -0.2, 0.9);
  GridSpec grid;
  grid.n = 1024;
  grid.q_min = -12.0;
  grid.q_max = 12.0;
  GridWavefunction wf = wavefunction_on_grid(s, grid);
  CHECK(wf.norm_sq() == doctest::Approx(1.0).epsilon(1e-12));

  GridSpec narrow;
  narrow.n = 64;
  narrow.q_min = 0.0;
  narrow.q_max = 1.0;
  CHECK_THROWS_AS(wavefunction_on_grid(s, narrow), ValidationError);
}

TEST_CASE("wavefunction is the square root of the phase-space density") {
  // Discrete Wigner transform of psi:
  //   W(p, q_j) = (1/pi hbar) sum_k conj(psi(q_j + y_k)) psi(q_j - y_k)
  //               e^{2 i p y_k / hbar} dq
  // must reproduce wigner_eval wherever the tails fit in the box.
  const double hbar = 1.0;
  for (double r : {0.0, 0.35}) {
    const GaussianState s = make_state(point(0.6, -0.4),
                                       squeezed_state(point(0, 0), r).g, hbar);
    GridSpec grid;
    grid.n = 2048;
    grid.q_min = -14.0;
    grid.q_max = 14.0;
    const GridWavefunction wf = wavefunction_on_grid(s, grid);
    const double dq = grid.dq();
    auto wigner_from_psi = [&](double p, double q) {
      const int j = static_cast<int>(std::lround((q - grid.q_min) / dq));
      const int kmax = std::min(j, grid.n - 1 - j);
      std::complex<double> acc = 0.0;
      for (int k = -kmax; k <= kmax; ++k) {
        acc += std::conj(wf.psi[j + k]) * wf.psi[j - k] *
               std::exp(std::complex<double>(0.0, 2.0 * p * k * dq / hbar));
      }
      return (acc * dq / (M_PI * hbar)).real();
    };
    for (double p : {-0.5, 0.6, 1.4}) {
      for (double qi : {-1.0, 0.25, 1.5}) {
        const double q = grid.q_min + std::lround((qi - grid.q_min) / dq) * dq;
        const double expected = wigner_eval(s, point(p, q));
        CHECK(std::abs(wigner_from_psi(p, q) - expected) <= 1e-8);
      }
    }
  }
}

TEST_CASE("grid inner product basics") {
  GridSpec grid;
  grid.n = 256;
  grid.q_min = -8.0;
  grid.q_max = 8.0;
  const GaussianState s = coherent_state(point(0.0, 0.0));
  GridWavefunction a = wavefunction_on_grid(s, grid);
  CHECK(std::abs(grid_inner_product(a, a) - cplx(1.0, 0.0)) <= 1e-12);
  // Orthogonality decays with displacement: |<a|b>| = exp(-d^2/(4 hbar)).
  GridWavefunction b = wavefunction_on_grid(coherent_state(point(0.0, 2.0)), grid);
  CHECK(std::abs(grid_inner_product(a, b)) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-10));
}
