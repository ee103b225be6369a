#include "loschmidt/states.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <complex>

#include "loschmidt/rng.hpp"

namespace loschmidt {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

void validate_state(const GaussianState& s) {
  require(s.center.size() > 0 && s.center.size() % 2 == 0,
          "state center must have even, positive dimension");
  require(s.g.size() == static_cast<int>(s.center.size()),
          "state matrix G must match the phase-space dimension");
  require(s.hbar > 0.0, "hbar must be positive");
  Eigen::SelfAdjointEigenSolver<Mat> es(s.g.mat());
  require(es.info() == Eigen::Success, "eigendecomposition of G failed");
  require(es.eigenvalues().minCoeff() > 0.0, "state matrix G must be positive definite");
  const double det = s.g.mat().determinant();
  require(std::abs(det - 1.0) <= 1e-10, "state matrix G must have unit determinant (pure state)");
}

/// Symmetric positive-definite square root of (hbar/2) G^{-1}, the sampling
/// covariance, computed from the eigendecomposition of G.
Mat covariance_factor(const GaussianState& s) {
  Eigen::SelfAdjointEigenSolver<Mat> es(s.g.mat());
  const Vec inv_sqrt = es.eigenvalues().cwiseSqrt().cwiseInverse();
  return std::sqrt(s.hbar / 2.0) *
         (es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose());
}

}  // namespace

GaussianState coherent_state(const PhaseVec& center, double hbar) {
  GaussianState s;
  s.center = center;
  s.g = SymmetricMatrix(static_cast<int>(center.size()));
  for (int i = 0; i < s.g.size(); ++i) s.g.set(i, i, 1.0);
  s.hbar = hbar;
  validate_state(s);
  return s;
}

GaussianState squeezed_state(const PhaseVec& center, double r, double hbar) {
  require(center.size() == 2, "squeezed_state is defined for one degree of freedom");
  GaussianState s;
  s.center = center;
  s.g = SymmetricMatrix(2);
  s.g.set(0, 0, std::exp(-2.0 * r));
  s.g.set(1, 1, std::exp(2.0 * r));
  s.hbar = hbar;
  validate_state(s);
  return s;
}

GaussianState make_state(const PhaseVec& center, const SymmetricMatrix& g, double hbar) {
  GaussianState s;
  s.center = center;
  s.g = g;
  s.hbar = hbar;
  validate_state(s);
  return s;
}

double wigner_eval(const GaussianState& s, const PhaseVec& x) {
  require(x.size() == s.center.size(), "point dimension mismatch");
  const Vec dx = x - s.center;
  const double quad = dx.dot(s.g.mat() * dx);
  return std::pow(kPi * s.hbar, -s.dof()) * std::exp(-quad / s.hbar);
}

PhaseVec sample_point(const GaussianState& s, std::uint64_t seed, std::uint64_t index) {
  validate_state(s);
  const int n = static_cast<int>(s.center.size());
  const Mat c = covariance_factor(s);
  CounterRng rng(seed, /*stream=*/0);
  Vec zv(n);
  rng.gaussians(index, zv.data(), n);
  return s.center + c * zv;
}

std::vector<PhaseVec> sample(const GaussianState& s, long n, std::uint64_t seed) {
  require(n >= 0, "sample count must be nonnegative");
  validate_state(s);
  const int dim = static_cast<int>(s.center.size());
  const Mat c = covariance_factor(s);
  CounterRng rng(seed, /*stream=*/0);
  std::vector<PhaseVec> out;
  out.reserve(static_cast<std::size_t>(n));
  Vec zv(dim);
  for (long k = 0; k < n; ++k) {
    rng.gaussians(static_cast<std::uint64_t>(k), zv.data(), dim);
    out.push_back(s.center + c * zv);
  }
  return out;
}

double GridWavefunction::norm_sq() const {
  double s = 0.0;
  for (const cplx& v : psi) s += std::norm(v);
  return s * grid.dq();
}

void GridWavefunction::normalize() {
  const double n = norm_sq();
  require(n > 0.0, "cannot normalize a zero wavefunction");
  const double scale = 1.0 / std::sqrt(n);
  for (cplx& v : psi) v *= scale;
}

cplx grid_inner_product(const GridWavefunction& a, const GridWavefunction& b) {
  require(a.grid.n == b.grid.n && a.grid.q_min == b.grid.q_min && a.grid.q_max == b.grid.q_max,
          "grid mismatch in inner product");
  cplx s(0.0, 0.0);
  for (int j = 0; j < a.grid.n; ++j) {
    s += std::conj(a.psi[static_cast<std::size_t>(j)]) * b.psi[static_cast<std::size_t>(j)];
  }
  return s * a.grid.dq();
}

GridWavefunction wavefunction_on_grid(const GaussianState& s, const GridSpec& grid) {
  validate_state(s);
  require(s.dof() == 1, "position-grid wavefunction is defined for one degree of freedom");
  require(grid.n >= 8 && (grid.n & (grid.n - 1)) == 0, "grid size must be a power of two >= 8");
  require(grid.q_max > grid.q_min, "grid must have positive length");

  const double p0 = s.center[0];
  const double q0 = s.center[1];
  const double g_pp = s.g(0, 0);
  const double g_pq = s.g(0, 1);
  const double a_r = 1.0 / g_pp;
  const double a_i = g_pq / g_pp;

  GridWavefunction wf;
  wf.grid = grid;
  wf.hbar = s.hbar;
  wf.psi.resize(static_cast<std::size_t>(grid.n));
  const double amp = std::pow(a_r / (kPi * s.hbar), 0.25);
  for (int j = 0; j < grid.n; ++j) {
    const double dq = grid.q(j) - q0;
    const cplx expo(-a_r * dq * dq / (2.0 * s.hbar),
                    -a_i * dq * dq / (2.0 * s.hbar) + p0 * dq / s.hbar);
    wf.psi[static_cast<std::size_t>(j)] = amp * std::exp(expo);
  }

  double peak = 0.0;
  for (const cplx& v : wf.psi) peak = std::max(peak, std::norm(v));
  const double edge = std::max(std::norm(wf.psi.front()), std::norm(wf.psi.back()));
  if (!(edge <= 1e-12 * peak)) {
    throw ValidationError("position grid too narrow for the requested state: edge density exceeds 1e-12 of the peak");
  }
  wf.normalize();
  return wf;
}

}  // namespace loschmidt
