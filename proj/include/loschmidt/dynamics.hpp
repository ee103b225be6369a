#pragma once

#include <vector>

#include "loschmidt/common.hpp"
#include "loschmidt/hamiltonians.hpp"
#include "loschmidt/phasespace.hpp"

namespace loschmidt {

/// e^{A t} by scaling-and-squaring with a diagonal rational (Pade) approximant.
/// Throws IntegrationError if the result overflows to non-finite values.
Mat mat_exp(const Mat& a, double t = 1.0);

/// P(t) = integral_0^t e^{A s} ds, exact for any A (including singular A),
/// computed from one block matrix exponential.
Mat integral_exp(const Mat& a, double t);

/// V(t) = integral_0^t e^{A^T s} Q e^{A s} ds via a block exponential.
Mat integral_congruence(const Mat& a, const Mat& q, double t);

/// D(t) = integral_0^t e^{A (t-s)} E e^{A s} ds via a block exponential
/// (first-order change of e^{(A + c E) t} in c).
Mat integral_conjugation(const Mat& a, const Mat& e, double t);

/**
 * Exact affine flow of a quadratic Hamiltonian over time t:
 *   x(t) = e^{J hess t} x0 + P(t) a,  P(t) = integral_0^t e^{J hess s} ds,
 * reducing to the pure drift x0 + t a when hess = 0.
 *
 * Throws UnsupportedDegenerate when hess is singular but nonzero and the
 * drift vector is not in the range of J*hess (a genuinely degenerate case
 * the closed-form machinery downstream does not support).
 */
LinearSympMap quad_flow_map(const QuadraticHamiltonian& h, double t);
PhaseVec quad_flow(const QuadraticHamiltonian& h, const PhaseVec& x0, double t);

struct IntegratorOptions {
  double dt = 1e-3;
  double fp_tol = 1e-13;   // fixed-point iteration tolerance (relative)
  int max_fp_iters = 50;
};

struct Trajectory {
  std::vector<double> times;     // uniform grid, step dt (last step may be partial)
  std::vector<PhaseVec> points;  // one phase point per time
  Hamiltonian hamiltonian;       // generator
  double dt = 0.0;
  bool partial_final_step = false;

  int size() const { return static_cast<int>(times.size()); }
};

struct TangentFlow {
  std::vector<double> times;
  std::vector<Mat> m;  // monodromy matrices, m[0] = I
};

/**
 * One implicit-midpoint step x -> x + dt * f(m), f = J grad H, where m solves
 * m = x + (dt/2) f(m) by fixed-point iteration (tolerance opt.fp_tol, at most
 * opt.max_fp_iters sweeps). The converged midpoint is written to midpoint_out
 * when non-null. Symplectic at fixed dt. Throws IntegrationError carrying
 * step_index when the iteration does not converge.
 */
PhaseVec midpoint_step(const Hamiltonian& h, const PhaseVec& x, double dt,
                       const IntegratorOptions& opt, long step_index,
                       PhaseVec* midpoint_out = nullptr);

/// Fixed-step implicit-midpoint trajectory over [0, t]; a final partial step
/// is taken (and flagged) when t is not an integer multiple of dt.
Trajectory integrate_trajectory(const Hamiltonian& h, const PhaseVec& x0, double t,
                                const IntegratorOptions& opt = {});

/**
 * Monodromy along a recorded trajectory: dM/dtau = J hess(x(tau)) M, M(0) = I,
 * advanced with the Cayley form of the same midpoint scheme,
 *   M_{k+1} = (I - dt/2 A)^{-1} (I + dt/2 A) M_k,  A = J hess(midpoint),
 * which keeps every M exactly symplectic up to roundoff.
 */
TangentFlow integrate_tangent(const Hamiltonian& h, const Trajectory& traj);

}  // namespace loschmidt
