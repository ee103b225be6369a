#pragma once

#include <vector>

#include "loschmidt/common.hpp"
#include "loschmidt/grid_wavefunction.hpp"
#include "loschmidt/hamiltonians.hpp"
#include "loschmidt/states.hpp"

namespace loschmidt {

struct OracleOptions {
  int n = 2048;              // initial grid size (power of two)
  double span_factor = 4.0;  // grid halfwidth multiplier on the classical excursion
  double dt_factor = 0.05;   // step bound: max(|T|, |V|) * dt / hbar <= dt_factor
  int max_n = 1 << 16;       // refinement cap when aliasing is detected
};

struct OracleReport {
  GridSpec grid;
  int n_used = 0;           // final grid size after any refinement
  long steps = 0;           // split-operator steps per branch
  double dt = 0.0;          // step actually used
  double norm_drift = 0.0;  // max |norm^2 - 1| observed at snapshots
};

/// Extract the separable polynomial form T(p) + V(q) of a one-dof
/// Hamiltonian, throwing std::invalid_argument when unavailable.
SeparablePoly separable_form(const Hamiltonian& h);

/// Propagate psi <- exp(-i H t / hbar) psi with Strang splitting
/// (half-potential / kinetic / half-potential) using `steps` equal steps.
void propagate_grid(GridWavefunction& wf, const SeparablePoly& h, double t, long steps);

/// Numerically exact overlap series
///   L(t_k) = <psi | exp(+i t_k H_plus / hbar) exp(-i t_k H_minus / hbar) | psi>
/// computed as the grid inner product of the two forward-propagated branches.
/// Both branches share one grid sized from a classical excursion bound; the
/// grid is doubled (up to max_n) if the momentum spectrum touches the grid
/// edge. times must be nondecreasing and start at >= 0.
std::vector<cplx> loschmidt_exact_series(const GaussianState& state,
                                         const PerturbationPair& pair,
                                         const std::vector<double>& times,
                                         const OracleOptions& opt = {},
                                         OracleReport* report = nullptr);

cplx loschmidt_exact(const GaussianState& state, const PerturbationPair& pair, double t,
                     const OracleOptions& opt = {});

}  // namespace loschmidt
