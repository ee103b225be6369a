#include "loschmidt/quantum_oracle.hpp"

#include <fftw3.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>

#include "loschmidt/dynamics.hpp"
#include "loschmidt/phasespace.hpp"

namespace loschmidt {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

// FFTW plan creation/destruction is not thread safe; executing plans is.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

/// RAII pair of in-place forward/backward plans over one complex buffer.
class FftPair {
 public:
  FftPair(std::vector<cplx>& buf) {
    fftw_complex* p = reinterpret_cast<fftw_complex*>(buf.data());
    std::lock_guard<std::mutex> lock(plan_mutex());
    fwd_ = fftw_plan_dft_1d(static_cast<int>(buf.size()), p, p, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_1d(static_cast<int>(buf.size()), p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~FftPair() {
    std::lock_guard<std::mutex> lock(plan_mutex());
    if (fwd_) fftw_destroy_plan(fwd_);
    if (bwd_) fftw_destroy_plan(bwd_);
  }
  FftPair(const FftPair&) = delete;
  FftPair& operator=(const FftPair&) = delete;

  void forward() { fftw_execute(fwd_); }
  void backward() { fftw_execute(bwd_); }

 private:
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
};

double eval_poly(const std::array<double, 5>& c, double x) {
  double v = 0.0;
  for (int k = 4; k >= 0; --k) v = v * x + c[static_cast<std::size_t>(k)];
  return v;
}

/// Momentum of FFT bin j for a box of length `length`: p = hbar * 2*pi*m/length
/// with m = j for j < n/2 and m = j - n for j >= n/2.
double bin_momentum(int j, int n, double length, double hbar) {
  const int m = (j < n / 2) ? j : j - n;
  return hbar * 2.0 * kPi * m / length;
}

struct BranchState {
  SeparablePoly h;
  std::vector<cplx> psi;
  std::vector<cplx> half_pot;  // exp(-i V dq dt / 2 hbar)
  std::vector<cplx> kin;       // exp(-i T(p) dt / hbar) / n  (inverse FFT scale folded in)
  double cached_dt = -1.0;
};

void build_phases(BranchState& b, const GridSpec& grid, double hbar, double dt) {
  if (b.cached_dt >= 0.0 && std::abs(dt - b.cached_dt) <= 1e-15 * std::max(1.0, b.cached_dt)) return;
  const int n = grid.n;
  b.half_pot.resize(static_cast<std::size_t>(n));
  b.kin.resize(static_cast<std::size_t>(n));
  const double inv_n = 1.0 / n;
  for (int j = 0; j < n; ++j) {
    const double v = eval_poly(b.h.pot, grid.q(j));
    b.half_pot[static_cast<std::size_t>(j)] = std::polar(1.0, -v * dt / (2.0 * hbar));
    const double t_kin = eval_poly(b.h.kin, bin_momentum(j, n, grid.length(), hbar));
    b.kin[static_cast<std::size_t>(j)] = std::polar(inv_n, -t_kin * dt / hbar);
  }
  b.cached_dt = dt;
}

void split_step(BranchState& b, FftPair& fft) {
  const std::size_t n = b.psi.size();
  for (std::size_t j = 0; j < n; ++j) b.psi[j] *= b.half_pot[j];
  fft.forward();
  for (std::size_t j = 0; j < n; ++j) b.psi[j] *= b.kin[j];
  fft.backward();
  for (std::size_t j = 0; j < n; ++j) b.psi[j] *= b.half_pot[j];
}

struct Excursion {
  double q_span = 0.0;  // max |q(t) - q0|
  double p_span = 0.0;  // max |p(t) - p0|
};

/// Classical excursion bound: propagate the state center and eight points on
/// its 4-sigma covariance ellipse under both branch Hamiltonians up to t_max,
/// recording the largest departure from the state center.
Excursion classical_excursion(const GaussianState& state, const PerturbationPair& pair,
                              double t_max) {
  Excursion exc;
  if (t_max <= 0.0) return exc;

  Eigen::SelfAdjointEigenSolver<Mat> es(state.g.mat());
  require(es.eigenvalues().minCoeff() > 0.0, "state matrix G must be positive definite");
  const Mat g_inv_sqrt =
      es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
      es.eigenvectors().transpose();
  const double radius = 4.0 * std::sqrt(state.hbar / 2.0);

  std::vector<PhaseVec> seeds;
  seeds.push_back(state.center);
  for (int k = 0; k < 8; ++k) {
    const double th = kPi * k / 4.0;
    Vec dir(2);
    dir << std::cos(th), std::sin(th);
    const Vec dx = radius * (g_inv_sqrt * dir);
    PhaseVec pt(2);
    pt << state.center[0] + dx[0], state.center[1] + dx[1];
    seeds.push_back(pt);
  }

  IntegratorOptions opt;
  opt.dt = std::min(1e-2, t_max / 100.0);
  const Hamiltonian branches[2] = {pair.plus(), pair.minus()};
  for (const Hamiltonian& h : branches) {
    for (const PhaseVec& x0 : seeds) {
      PhaseVec x = x0;
      const long steps = static_cast<long>(std::ceil(t_max / opt.dt - 1e-12));
      const double dt = t_max / steps;
      for (long s = 0; s < steps; ++s) {
        x = midpoint_step(h, x, dt, opt, s);
        exc.q_span = std::max(exc.q_span, std::abs(x[1] - state.center[1]));
        exc.p_span = std::max(exc.p_span, std::abs(x[0] - state.center[0]));
      }
    }
  }
  return exc;
}

struct RetrySignal {
  bool widen_box = false;
};

struct AttemptResult {
  std::vector<cplx> values;
  OracleReport report;
};

AttemptResult run_attempt(const GaussianState& state, const SeparablePoly& h_plus,
                          const SeparablePoly& h_minus, const std::vector<double>& times,
                          const OracleOptions& opt, const GridSpec& grid, double p_need) {
  AttemptResult out;
  out.report.grid = grid;
  out.report.n_used = grid.n;

  const double hbar = state.hbar;
  GridWavefunction psi0 = wavefunction_on_grid(state, grid);

  BranchState plus{h_plus, psi0.psi, {}, {}, -1.0};
  BranchState minus{h_minus, psi0.psi, {}, {}, -1.0};
  FftPair fft_plus(plus.psi);
  FftPair fft_minus(minus.psi);

  // Step bound from the largest Hamiltonian magnitude over the occupied
  // region: V over the full position box, T over the classically reachable
  // momentum range (the grid's own momentum edge is far beyond occupancy).
  double h_mag = 0.0;
  for (int j = 0; j < grid.n; ++j) {
    const double q = grid.q(j);
    h_mag = std::max(h_mag, std::abs(eval_poly(h_plus.pot, q)));
    h_mag = std::max(h_mag, std::abs(eval_poly(h_minus.pot, q)));
  }
  for (int j = 0; j <= 256; ++j) {
    const double p = -p_need + 2.0 * p_need * j / 256.0;
    h_mag = std::max(h_mag, std::abs(eval_poly(h_plus.kin, p)));
    h_mag = std::max(h_mag, std::abs(eval_poly(h_minus.kin, p)));
  }
  const double dt_bound = (h_mag > 0.0) ? opt.dt_factor * hbar / h_mag
                                        : std::numeric_limits<double>::infinity();

  std::vector<cplx> mom(static_cast<std::size_t>(grid.n));
  FftPair fft_mom(mom);

  auto check_health = [&](const BranchState& b) {
    // Position edge occupancy: the box must stay wide enough.
    double peak = 0.0;
    for (const cplx& v : b.psi) peak = std::max(peak, std::norm(v));
    const double edge_q = std::max(std::norm(b.psi.front()), std::norm(b.psi.back()));
    if (edge_q > 1e-10 * peak) throw RetrySignal{/*widen_box=*/true};
    // Momentum edge occupancy: refine the grid if the spectrum reaches the
    // highest representable momenta.
    std::copy(b.psi.begin(), b.psi.end(), mom.begin());
    fft_mom.forward();
    double mom_peak = 0.0;
    for (const cplx& v : mom) mom_peak = std::max(mom_peak, std::norm(v));
    const int half = grid.n / 2;
    double edge_p = 0.0;
    for (int j = half - 1; j <= half + 1; ++j)
      edge_p = std::max(edge_p, std::norm(mom[static_cast<std::size_t>(j)]));
    if (edge_p > 1e-10 * mom_peak) throw RetrySignal{/*widen_box=*/false};
    // Norm drift bookkeeping (split steps are exactly unitary up to rounding).
    double norm_sq = 0.0;
    for (const cplx& v : b.psi) norm_sq += std::norm(v);
    out.report.norm_drift = std::max(out.report.norm_drift, std::abs(norm_sq * grid.dq() - 1.0));
  };

  double t_prev = 0.0;
  for (double t_k : times) {
    const double delta = t_k - t_prev;
    if (delta > 0.0) {
      const long steps = std::isfinite(dt_bound)
                             ? std::max<long>(1, static_cast<long>(std::ceil(delta / dt_bound - 1e-12)))
                             : 1;
      const double dt = delta / steps;
      build_phases(plus, grid, hbar, dt);
      build_phases(minus, grid, hbar, dt);
      for (long s = 0; s < steps; ++s) {
        split_step(plus, fft_plus);
        split_step(minus, fft_minus);
      }
      out.report.steps += steps;
      out.report.dt = dt;
      t_prev = t_k;
    }
    check_health(plus);
    check_health(minus);
    cplx overlap(0.0, 0.0);
    for (std::size_t j = 0; j < plus.psi.size(); ++j) overlap += std::conj(plus.psi[j]) * minus.psi[j];
    out.values.push_back(overlap * grid.dq());
  }
  return out;
}

}  // namespace

SeparablePoly separable_form(const Hamiltonian& h) {
  require(h.dof() == 1, "grid propagation supports one degree of freedom");
  const auto& sep = h.separable();
  if (!sep.has_value()) {
    throw std::invalid_argument(
        "Hamiltonian has no separable T(p) + V(q) polynomial form; the grid method requires one");
  }
  return *sep;
}

void propagate_grid(GridWavefunction& wf, const SeparablePoly& h, double t, long steps) {
  require(steps > 0, "propagation needs at least one step");
  require(static_cast<int>(wf.psi.size()) == wf.grid.n, "wavefunction size mismatch");
  BranchState b{h, wf.psi, {}, {}, -1.0};
  FftPair fft(b.psi);
  build_phases(b, wf.grid, wf.hbar, t / steps);
  for (long s = 0; s < steps; ++s) split_step(b, fft);
  wf.psi = b.psi;
}

std::vector<cplx> loschmidt_exact_series(const GaussianState& state, const PerturbationPair& pair,
                                         const std::vector<double>& times, const OracleOptions& opt,
                                         OracleReport* report) {
  require(!times.empty(), "time list must not be empty");
  require(times.front() >= 0.0, "times must be nonnegative");
  for (std::size_t i = 1; i < times.size(); ++i)
    require(times[i] >= times[i - 1], "times must be nondecreasing");
  require(state.dof() == 1 && pair.dof() == 1, "grid oracle supports one degree of freedom");
  require(opt.n >= 64 && (opt.n & (opt.n - 1)) == 0, "oracle grid size must be a power of two >= 64");

  const SeparablePoly h_plus = separable_form(pair.plus());
  const SeparablePoly h_minus = separable_form(pair.minus());

  const double hbar = state.hbar;
  const double t_max = times.back();
  const Excursion exc = classical_excursion(state, pair, t_max);

  const double base_span = 10.0 * std::sqrt(hbar);
  double half_q = std::max(base_span, opt.span_factor * exc.q_span);
  const double p_need = std::abs(state.center[0]) + std::max(base_span, opt.span_factor * exc.p_span);
  int n = opt.n;

  for (int attempt = 0; attempt < 8; ++attempt) {
    // Momentum capacity: the grid's maximum momentum pi*hbar/dq must clear
    // the occupied range with margin; double n until it does.
    while (kPi * hbar * n / (2.0 * half_q) < 1.5 * p_need && n < opt.max_n) n *= 2;
    GridSpec grid{n, state.center[1] - half_q, state.center[1] + half_q};
    try {
      AttemptResult res = run_attempt(state, h_plus, h_minus, times, opt, grid, p_need);
      if (report) *report = res.report;
      return res.values;
    } catch (const RetrySignal& sig) {
      if (sig.widen_box) {
        half_q *= 2.0;
        n *= 2;  // keep dq (momentum capacity) while widening
      } else {
        n *= 2;
      }
      if (n > opt.max_n) {
        throw IntegrationError(
            "grid propagation exceeded the maximum grid size while chasing edge occupancy");
      }
    } catch (const ValidationError&) {
      // Initial state did not fit the box (possible for very wide squeezed
      // states): widen and retry.
      half_q *= 2.0;
      n *= 2;
      if (n > opt.max_n) {
        throw IntegrationError("grid sizing failed: state does not fit below the maximum grid size");
      }
    }
  }
  throw IntegrationError("grid propagation failed to stabilize after repeated refinement");
}

cplx loschmidt_exact(const GaussianState& state, const PerturbationPair& pair, double t,
                     const OracleOptions& opt) {
  std::vector<double> times{t};
  return loschmidt_exact_series(state, pair, times, opt).front();
}

}  // namespace loschmidt
