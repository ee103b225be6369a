#pragma once

#include "loschmidt/common.hpp"
#include "loschmidt/dynamics.hpp"
#include "loschmidt/hamiltonians.hpp"
#include "loschmidt/phasespace.hpp"

namespace loschmidt {

/**
 * Center (Weyl) generating function of the time-t flow of a quadratic
 * Hamiltonian, S^t(x) = x.B x + alpha ^ x, in the convention where the map
 * chord through center c is xi = -J grad S(c). The matrix satisfies
 * J B = (I - M)(I + M)^{-1} with M = e^{J hess t}; the shift term is
 * alpha = -2 (I + M)^{-1} d for an affine map x -> M x + d, which reduces to
 * alpha = -t a for a pure drift (hess = 0) and equals 2 J B (J hess)^{-1} a
 * when hess is invertible.
 */
struct CenterGenerating {
  SymmetricMatrix b;
  Vec alpha;
  double t = 0.0;
};

/// Throws CausticEncountered when det(I + e^{J hess t}) = 0 (e.g. harmonic
/// oscillator at wt = pi mod 2pi); UnsupportedDegenerate for singular nonzero
/// hess combined with a nonzero drift vector.
CenterGenerating center_generating(const QuadraticHamiltonian& h, double t);

/// Stationary-phase center: x_bar = (I + J B_mean)^{-1} (x + alpha_mean / 2).
PhaseVec sp_mean_point(const PhaseVec& x, const CenterGenerating& mean_gen);

/// Stationary-phase displacement eta = (J - B_mean)^{-1} (2 dB x_bar + J dAlpha) / 4.
/// O(epsilon) by construction; diagnostic only (never fed back into phases).
PhaseVec sp_eta(const PhaseVec& x_bar, const CenterGenerating& mean_gen,
                const SymmetricMatrix& d_b, const Vec& d_alpha);

/// Stationary-phase value S_q(x_bar) = x_bar . dB x_bar + dAlpha ^ x_bar.
double sp_phase(const PhaseVec& x_bar, const SymmetricMatrix& d_b, const Vec& d_alpha);

/// Third-order remainder eta . dB eta of the stationary-phase reduction.
double neglected_term(const PhaseVec& eta, const SymmetricMatrix& d_b);

/**
 * First-order (in the perturbation) difference of the center generating
 * functions of the two branches H +/- delta/2, plus the mean generating
 * function itself:
 *   d_b     = B_+ - B_-   (first derivative along delta hess, via a block
 *                          exponential; exactly linear in the perturbation)
 *   d_alpha = alpha_+ - alpha_-  (product rule; requires invertible mean hess
 *                                 unless both hessians vanish)
 */
struct SpParams {
  CenterGenerating mean_gen;
  SymmetricMatrix d_b;
  Vec d_alpha;
};
SpParams sp_perturbation_params(const PerturbationPair& pair, double t);

/// Bundle of all stationary-phase quantities at one phase-space point.
struct SpData {
  PhaseVec x_bar;
  PhaseVec eta;
  double s_q = 0.0;
  double weight = 1.0;
  double neglected = 0.0;
};
SpData sp_reduce(const PerturbationPair& pair, const PhaseVec& x, double t);

/**
 * Exact perturbation action for a linear perturbation dH = dA ^ x on top of a
 * quadratic mean Hamiltonian:
 *   hess = 0:        -t dA ^ (x + t a / 2)
 *   hess invertible: dA ^ A^{-1} [ (I - e^{At})(x + A^{-1} a) + t a ],  A = J hess.
 * Throws UnsupportedDegenerate for singular nonzero hess.
 */
double delta_action_linear(const QuadraticHamiltonian& mean, const Vec& delta_a,
                           const PhaseVec& x, double t);

/// Closed-form reference actions for the two oscillator presets (1 dof).
enum class RefPreset { ho, inverted };
double reference_action(RefPreset preset, double omega, double eps, const PhaseVec& x,
                        double t);
/// First-order branch matrices: B_+/- = -(tan(wt/2)/w) hess_+/- (harmonic) and
/// -(tanh(wt/2)/w) hess_+/- (inverted).
SymmetricMatrix reference_b_plus(RefPreset preset, double omega, double eps, double t);
SymmetricMatrix reference_b_minus(RefPreset preset, double omega, double eps, double t);
/// Half Hessian of the closed-form action (the exact amplitude matrix).
SymmetricMatrix reference_b_l(RefPreset preset, double omega, double eps, double t);

/**
 * Exact echo map of a quadratic pair: backward flow of H_+ composed with the
 * forward flow of H_-, E = Phi_+^{-t} o Phi_-^t, as an affine symplectic map.
 */
LinearSympMap exact_echo_map(const PerturbationPair& pair, double t);

/// Chord of the exact echo map through center c: solves (y + E(y))/2 = c and
/// returns E(y) - y. This is the calibration target for the chord formula.
PhaseVec exact_echo_chord(const PerturbationPair& pair, const PhaseVec& center, double t);

}  // namespace loschmidt
