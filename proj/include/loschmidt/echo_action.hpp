#pragma once

#include "loschmidt/common.hpp"
#include "loschmidt/dynamics.hpp"
#include "loschmidt/hamiltonians.hpp"
#include "loschmidt/phasespace.hpp"

namespace loschmidt {

/**
 * Perturbation action along mean-Hamiltonian trajectories.
 *
 * For a forward/backward pair (H_-, H_+), the central object is
 *
 *     deltaS(x, t) = - integral_0^t deltaH( xbar(tau; x) ) dtau,
 *
 * where xbar is the trajectory of the mean Hamiltonian (H_+ + H_-)/2 started
 * at x. Its gradient gives the echo chord, its half Hessian B the amplitude
 * weight w = |det(I + J B)|^{1/2}, and its evaluation along the H_- flow
 * instead of the mean flow reproduces the original dephasing estimator.
 */

/// Quadrature scheme for the action accumulation.
enum class ActionScheme {
  automatic,   // exact_flow for quadratic pairs, midpoint otherwise
  exact_flow,  // exact quadratic flow sampling + composite Simpson
  midpoint     // implicit-midpoint augmented ODE (any pair)
};

enum class HessianMethod {
  automatic,  // tangent when the mean Hamiltonian is quadratic, fd otherwise
  tangent,    // -1/2 integral M^T (hess deltaH)(xbar) M dtau (quadratic mean only)
  fd          // central second differences of delta_action
};

/**
 * Chord convention: the chord of the echo map through x equals
 * +J grad deltaS(x) (not -2 J grad deltaS). Frozen by the calibration test
 * against the exact quadratic echo map at epsilon = 1e-3.
 */
inline constexpr double kChordFromGradientSign = +1.0;

/// Exact polynomial form of deltaS at fixed t for quadratic pairs:
/// deltaS(x) = x . b x + g . x + c. Coefficients from one block exponential.
struct QuadActionForm {
  SymmetricMatrix b;
  Vec g;
  double c = 0.0;

  double eval(const PhaseVec& x) const { return x.dot(b.mat() * x) + g.dot(x) + c; }
  PhaseVec grad(const PhaseVec& x) const { return 2.0 * (b.mat() * x) + g; }
};

/// Coefficients along the mean flow (the improved estimator's phase).
QuadActionForm quad_action_form(const PerturbationPair& pair, double t);
/// Coefficients along the H_- flow (the original estimator's phase).
QuadActionForm quad_action_form_minus(const PerturbationPair& pair, double t);

double delta_action(const PerturbationPair& pair, const PhaseVec& x, double t,
                    ActionScheme scheme = ActionScheme::automatic,
                    const IntegratorOptions& opt = {});

/// grad deltaS by tangent accumulation - integral M^T grad deltaH(xbar) dtau.
PhaseVec delta_action_gradient(const PerturbationPair& pair, const PhaseVec& x, double t,
                               const IntegratorOptions& opt = {});

/// Echo chord xi(x) = kChordFromGradientSign * J grad deltaS(x).
PhaseVec chord(const PerturbationPair& pair, const PhaseVec& x, double t,
               const IntegratorOptions& opt = {});

/// Literal displacement integral -integral J grad deltaH(xbar(tau)) dtau
/// (no tangent pullback). Coincides with the chord when the mean flow is a
/// pure drift; exposed as a diagnostic for the general case.
PhaseVec naive_chord(const PerturbationPair& pair, const PhaseVec& x, double t,
                     const IntegratorOptions& opt = {});

/// B = (1/2) hess_x deltaS(x, t).
SymmetricMatrix hessian_delta_action(const PerturbationPair& pair, const PhaseVec& x,
                                     double t,
                                     HessianMethod method = HessianMethod::automatic,
                                     const IntegratorOptions& opt = {});

/// w = |det(I + J B)|^{1/2}; throws CausticEncountered when the determinant
/// magnitude is below the relative singularity threshold.
double amplitude_weight(const SymmetricMatrix& b);

/// Estimated action error of the original estimator (trajectories of H_-
/// instead of the mean): -(1/8) xi . [ integral hess deltaH(xbar) dtau ] . xi.
double dr_action_error(const PerturbationPair& pair, const PhaseVec& x, double t,
                       const IntegratorOptions& opt = {});

/// All local quantities at one (x, t), sharing trajectory work where possible.
struct EchoLocalData {
  PhaseVec x;
  double delta_action = 0.0;
  PhaseVec chord;
  SymmetricMatrix b_matrix;
  double weight = 1.0;
  double err13 = 0.0;
  double neglected = 0.0;     // eta . dB eta, quadratic pairs only
  bool has_neglected = false;
};
EchoLocalData echo_local(const PerturbationPair& pair, const PhaseVec& x, double t,
                         HessianMethod method = HessianMethod::automatic,
                         const IntegratorOptions& opt = {});

}  // namespace loschmidt
