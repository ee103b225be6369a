#pragma once

#include <vector>

#include "loschmidt/common.hpp"

namespace loschmidt {

/// Uniform periodic position grid q_j = q_min + j * dq, j = 0..n-1, with box
/// length q_max - q_min (the point q_max itself is the periodic image of
/// q_min). n must be a power of two.
struct GridSpec {
  int n = 2048;
  double q_min = -10.0;
  double q_max = 10.0;

  double length() const { return q_max - q_min; }
  double dq() const { return length() / n; }
  double q(int j) const { return q_min + j * dq(); }
};

struct GridWavefunction {
  GridSpec grid;
  double hbar = 1.0;
  std::vector<cplx> psi;  // length grid.n

  double norm_sq() const;  // sum |psi_j|^2 dq
  void normalize();        // rescale so norm_sq() == 1
};

/// Grid inner product <a|b> = sum conj(a_j) b_j dq (grids must match).
cplx grid_inner_product(const GridWavefunction& a, const GridWavefunction& b);

}  // namespace loschmidt
