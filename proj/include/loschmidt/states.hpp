#pragma once

#include <cstdint>
#include <vector>

#include "loschmidt/common.hpp"
#include "loschmidt/grid_wavefunction.hpp"
#include "loschmidt/phasespace.hpp"

namespace loschmidt {

/// Gaussian phase-space density
///   W(x) = (pi*hbar)^{-L} exp(-(x - center) . G (x - center) / hbar)
/// with G symmetric positive definite and det(G) = 1 (pure minimum-uncertainty
/// state; position/momentum covariance is (hbar/2) G^{-1}).
struct GaussianState {
  PhaseVec center;
  SymmetricMatrix g;
  double hbar = 1.0;

  int dof() const { return static_cast<int>(center.size()) / 2; }
};

/// Isotropic state, G = identity.
GaussianState coherent_state(const PhaseVec& center, double hbar = 1.0);

/// One-dof squeezed state: G = diag(e^{-2r}, e^{2r}) in (p, q) order, i.e.
/// r > 0 narrows the position spread and widens the momentum spread.
GaussianState squeezed_state(const PhaseVec& center, double r, double hbar = 1.0);

/// Validates shape, positive definiteness, and |det(G) - 1| <= 1e-10.
GaussianState make_state(const PhaseVec& center, const SymmetricMatrix& g, double hbar = 1.0);

double wigner_eval(const GaussianState& s, const PhaseVec& x);

/// Draw the sample with the given index from the Gaussian density. Counter
/// based: the result depends only on (state, seed, index), never on how many
/// samples were drawn before or on worker scheduling.
PhaseVec sample_point(const GaussianState& s, std::uint64_t seed, std::uint64_t index);

std::vector<PhaseVec> sample(const GaussianState& s, long n, std::uint64_t seed);

/// One-dof position-space wavefunction on a grid:
///   psi(q) = (a_r/(pi hbar))^{1/4}
///            exp(-(a_r + i a_i)(q-q0)^2/(2 hbar) + i p0 (q-q0)/hbar)
/// with a_r = 1/G_pp and a_i = G_pq/G_pp, whose Wigner transform is W above
/// (this uses det G = 1). Throws if the grid is too narrow: the density at
/// either edge must not exceed 1e-12 of the peak density.
GridWavefunction wavefunction_on_grid(const GaussianState& s, const GridSpec& grid);

}  // namespace loschmidt
