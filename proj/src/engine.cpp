#include "loschmidt/engine.hpp"

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <mutex>
#include <thread>

#include "loschmidt/echo_action.hpp"
#include "loschmidt/phasespace.hpp"
#include "loschmidt/quadratic_exact.hpp"

namespace loschmidt {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kPi = 3.14159265358979323846264338327950288;

bool is_sample_method(Method m) {
  return m == Method::dr_minus || m == Method::dr_mean || m == Method::idr;
}

void validate_times(const std::vector<double>& times) {
  require(!times.empty(), "time list must not be empty");
  require(times.front() >= 0.0, "times must be nonnegative");
  for (std::size_t i = 1; i < times.size(); ++i)
    require(times[i] >= times[i - 1], "times must be nondecreasing");
}

// ---------------------------------------------------------------------------
// Sample sources
// ---------------------------------------------------------------------------

struct SampleSet {
  std::vector<PhaseVec> points;
  std::vector<double> weights;  // empty => plain Monte Carlo (uniform 1/n)
  bool weighted() const { return !weights.empty(); }
  long size() const { return static_cast<long>(points.size()); }
};

/// Gauss-Hermite nodes/weights for integral f(z) exp(-z^2) dz via the
/// symmetric tridiagonal Jacobi matrix (eigenvalues = nodes, weights from the
/// first eigenvector components).
void hermite_rule(int order, std::vector<double>& nodes, std::vector<double>& weights) {
  require(order >= 2 && order <= 512, "Gauss-Hermite order must be in [2, 512]");
  Mat jac = Mat::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    const double b = std::sqrt(k / 2.0);
    jac(k - 1, k) = b;
    jac(k, k - 1) = b;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(jac);
  require(es.info() == Eigen::Success, "Gauss-Hermite eigendecomposition failed");
  nodes.resize(static_cast<std::size_t>(order));
  weights.resize(static_cast<std::size_t>(order));
  const double sqrt_pi = std::sqrt(kPi);
  for (int k = 0; k < order; ++k) {
    nodes[static_cast<std::size_t>(k)] = es.eigenvalues()[k];
    const double v0 = es.eigenvectors()(0, k);
    weights[static_cast<std::size_t>(k)] = sqrt_pi * v0 * v0;
  }
}

SampleSet build_samples(const GaussianState& state, const SamplerOptions& s) {
  SampleSet set;
  if (s.kind == SamplerOptions::Kind::mc) {
    require(s.n >= 1, "Monte Carlo sample count must be positive");
    require(s.n <= 50'000'000, "Monte Carlo sample count too large");
    set.points = sample(state, s.n, s.seed);
    return set;
  }
  // Tensor Gauss-Hermite over the Wigner Gaussian: x = x0 + sqrt(hbar) C z
  // with C = G^{-1/2} turns the average into pi^{-L} integral e^{-|z|^2} f.
  require(state.dof() == 1, "Gauss-Hermite sampling supports one degree of freedom");
  std::vector<double> nodes, weights;
  hermite_rule(s.gh_order, nodes, weights);
  Eigen::SelfAdjointEigenSolver<Mat> es(state.g.mat());
  require(es.eigenvalues().minCoeff() > 0.0, "state matrix G must be positive definite");
  const Mat c = es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                es.eigenvectors().transpose();
  const double scale = std::sqrt(state.hbar);
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    for (std::size_t b = 0; b < nodes.size(); ++b) {
      Vec z(2);
      z << nodes[a], nodes[b];
      set.points.push_back(state.center + scale * (c * z));
      set.weights.push_back(weights[a] * weights[b] / kPi);
    }
  }
  return set;
}

// ---------------------------------------------------------------------------
// Per-time precomputation for quadratic pairs
// ---------------------------------------------------------------------------

struct QuadTime {
  QuadActionForm mean_form;
  QuadActionForm minus_form;
  bool have_minus = false;
  double weight = kNan;
  bool caustic = false;
  Mat k_int;  // integral of hess dH along the flow = t * delta hess
  bool eta_ok = false;
  Mat eta_a;  // eta(x) = eta_a x + eta_b (stationary-phase displacement)
  Vec eta_b;
  Mat d_b;    // first-order branch difference of the B matrices
};

std::vector<QuadTime> prepare_quad_times(const PerturbationPair& pair,
                                         const std::vector<double>& times, bool want_minus) {
  const int n = 2 * pair.dof();
  const Mat jmat = symplectic_j(pair.dof());
  const Mat eye = Mat::Identity(n, n);
  std::vector<QuadTime> out(times.size());
  for (std::size_t j = 0; j < times.size(); ++j) {
    QuadTime& qt = out[j];
    const double t = times[j];
    qt.mean_form = quad_action_form(pair, t);
    if (want_minus) {
      qt.minus_form = quad_action_form_minus(pair, t);
      qt.have_minus = true;
    }
    try {
      qt.weight = amplitude_weight(qt.mean_form.b);
    } catch (const CausticEncountered&) {
      qt.caustic = true;
    }
    qt.k_int = t * pair.delta.quad().hess.mat();
    try {
      const SpParams sp = sp_perturbation_params(pair, t);
      const Mat i_plus_jb = eye + jmat * sp.mean_gen.b.mat();
      const Mat j_minus_b = jmat - sp.mean_gen.b.mat();
      double det = 0.0;
      if (near_singular(i_plus_jb, &det) || near_singular(j_minus_b, &det)) {
        qt.eta_ok = false;
      } else {
        const Mat p = i_plus_jb.partialPivLu().solve(eye);
        const Mat r = j_minus_b.partialPivLu().solve(eye);
        qt.d_b = sp.d_b.mat();
        qt.eta_a = 0.5 * r * qt.d_b * p;
        qt.eta_b = qt.eta_a * (0.5 * sp.mean_gen.alpha) + 0.25 * r * (jmat * sp.d_alpha);
        qt.eta_ok = true;
      }
    } catch (const CausticEncountered&) {
      qt.eta_ok = false;
    } catch (const UnsupportedDegenerate&) {
      qt.eta_ok = false;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweep accumulation
// ---------------------------------------------------------------------------

struct BlockAccum {
  // Indexed [method_slot * n_times + j].
  std::vector<cplx> val;
  std::vector<double> re2, im2;
  // Indexed [j]; shared across sample methods.
  std::vector<double> w_sum;      // amplitude weights (idr), caustic samples excluded
  std::vector<double> w_den;      // weight-denominator (count or quadrature mass)
  std::vector<double> err13_sum;
  std::vector<double> eta_sum;
  std::vector<double> den;        // count or quadrature mass of all samples
  std::vector<long> caustic;

  void init(std::size_t slots, std::size_t n_times) {
    val.assign(slots * n_times, cplx(0.0, 0.0));
    re2.assign(slots * n_times, 0.0);
    im2.assign(slots * n_times, 0.0);
    w_sum.assign(n_times, 0.0);
    w_den.assign(n_times, 0.0);
    err13_sum.assign(n_times, 0.0);
    eta_sum.assign(n_times, 0.0);
    den.assign(n_times, 0.0);
    caustic.assign(n_times, 0);
  }
};

struct SweepPlan {
  std::vector<Method> methods;  // sample-based methods, request order
  int slot(Method m) const {
    for (std::size_t i = 0; i < methods.size(); ++i)
      if (methods[i] == m) return static_cast<int>(i);
    return -1;
  }
  bool want(Method m) const { return slot(m) >= 0; }
};

/// One trajectory advanced in lockstep with the snapshot grid, with optional
/// accumulators. Mirrors the single-shot streaming action pass: an exact
/// number of full dt steps per segment plus one partial step to land on each
/// snapshot time.
struct Channel {
  PhaseVec x;
  double action = 0.0;
  bool with_tangent = false;
  Mat m;         // tangent of the mean flow
  PhaseVec grad;  // action gradient (pullback through the tangent)
  Mat k_int;     // integral of hess dH along the trajectory
};

void channel_step(const Hamiltonian& flow, const Hamiltonian& delta, Channel& ch, double dt,
                  const IntegratorOptions& opt, long step_index, const Mat& jmat) {
  PhaseVec mid(ch.x.size());
  const PhaseVec x_next = midpoint_step(flow, ch.x, dt, opt, step_index, &mid);
  ch.action -= dt * delta.value(mid);
  if (ch.with_tangent) {
    const int n = static_cast<int>(ch.x.size());
    const Mat eye = Mat::Identity(n, n);
    const Mat a = jmat * flow.hessian(mid);
    const Mat m_next = (eye - 0.5 * dt * a).partialPivLu().solve((eye + 0.5 * dt * a) * ch.m);
    ch.grad -= dt * (0.5 * (ch.m + m_next)).transpose() * delta.gradient(mid);
    ch.m = m_next;
    ch.k_int += dt * delta.hessian(mid);
  }
  ch.x = x_next;
}

/// Central-difference stencil offsets for the half Hessian of the action:
/// 2n axis points then 4 points per (i < j) pair, matching the standalone
/// finite-difference Hessian.
struct Stencil {
  std::vector<PhaseVec> offsets;
  std::vector<double> steps;
  int n = 0;

  explicit Stencil(const PhaseVec& x) {
    n = static_cast<int>(x.size());
    const double base = std::pow(std::numeric_limits<double>::epsilon(), 0.25);
    steps.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) steps[static_cast<std::size_t>(i)] = base * std::max(1.0, std::abs(x[i]));
    for (int i = 0; i < n; ++i) {
      for (int sgn : {+1, -1}) {
        PhaseVec d = PhaseVec::Zero(n);
        d[i] = sgn * steps[static_cast<std::size_t>(i)];
        offsets.push_back(d);
      }
    }
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        for (int si : {+1, -1}) {
          for (int sj : {+1, -1}) {
            PhaseVec d = PhaseVec::Zero(n);
            d[i] = si * steps[static_cast<std::size_t>(i)];
            d[j] = sj * steps[static_cast<std::size_t>(j)];
            offsets.push_back(d);
          }
        }
      }
    }
  }

  /// Assemble B = (1/2) hess(action) from the channel actions (center first).
  SymmetricMatrix assemble(double f0, const std::vector<double>& f) const {
    SymmetricMatrix b(n);
    std::size_t idx = 0;
    for (int i = 0; i < n; ++i) {
      const double hi = steps[static_cast<std::size_t>(i)];
      const double fp = f[idx++];
      const double fm = f[idx++];
      b.set(i, i, 0.5 * (fp - 2.0 * f0 + fm) / (hi * hi));
    }
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double hi = steps[static_cast<std::size_t>(i)];
        const double hj = steps[static_cast<std::size_t>(j)];
        const double fpp = f[idx++];
        const double fpm = f[idx++];
        const double fmp = f[idx++];
        const double fmm = f[idx++];
        b.set(i, j, 0.5 * (fpp - fpm - fmp + fmm) / (4.0 * hi * hj));
      }
    }
    return b;
  }
};

struct SweepContext {
  const GaussianState* state = nullptr;
  const PerturbationPair* pair = nullptr;
  const std::vector<double>* times = nullptr;
  const SampleSet* samples = nullptr;
  SweepPlan plan;
  IntegratorOptions integrator;
  bool quadratic = false;
  std::vector<QuadTime> quad_times;
  Hamiltonian h_minus;  // materialized once for the sweep
  Mat jmat;
};

void process_sample_quadratic(const SweepContext& ctx, long i, double wt, BlockAccum& acc) {
  const PhaseVec& x = ctx.samples->points[static_cast<std::size_t>(i)];
  const double hbar = ctx.state->hbar;
  const std::size_t n_times = ctx.times->size();
  const int slot_minus = ctx.plan.slot(Method::dr_minus);
  const int slot_mean = ctx.plan.slot(Method::dr_mean);
  const int slot_idr = ctx.plan.slot(Method::idr);
  const bool mc = !ctx.samples->weighted();

  for (std::size_t j = 0; j < n_times; ++j) {
    const QuadTime& qt = ctx.quad_times[j];
    const double s_mean = qt.mean_form.eval(x);
    const cplx phase_mean = std::polar(1.0, -s_mean / hbar);
    auto put = [&](int slot, const cplx& v) {
      if (slot < 0) return;
      const std::size_t k = static_cast<std::size_t>(slot) * n_times + j;
      const cplx wv = (mc ? v : wt * v);
      acc.val[k] += wv;
      if (mc) {
        acc.re2[k] += v.real() * v.real();
        acc.im2[k] += v.imag() * v.imag();
      }
    };
    put(slot_mean, phase_mean);
    if (slot_minus >= 0 && qt.have_minus)
      put(slot_minus, std::polar(1.0, -qt.minus_form.eval(x) / hbar));
    if (slot_idr >= 0 && !qt.caustic) {
      put(slot_idr, qt.weight * phase_mean);
      acc.w_sum[j] += (mc ? qt.weight : wt * qt.weight);
      acc.w_den[j] += (mc ? 1.0 : wt);
    } else if (slot_idr >= 0) {
      acc.caustic[j] += 1;
    }
    const PhaseVec xi = kChordFromGradientSign * (ctx.jmat * qt.mean_form.grad(x));
    acc.err13_sum[j] += (mc ? 1.0 : wt) * (-0.125 * xi.dot(qt.k_int * xi));
    if (qt.eta_ok) {
      const PhaseVec eta = qt.eta_a * x + qt.eta_b;
      acc.eta_sum[j] += (mc ? 1.0 : wt) * eta.dot(qt.d_b * eta);
    }
    acc.den[j] += (mc ? 1.0 : wt);
  }
}

void process_sample_general(const SweepContext& ctx, long i, double wt, BlockAccum& acc) {
  const PhaseVec& x = ctx.samples->points[static_cast<std::size_t>(i)];
  const double hbar = ctx.state->hbar;
  const std::vector<double>& times = *ctx.times;
  const std::size_t n_times = times.size();
  const int dim = static_cast<int>(x.size());
  const int slot_minus = ctx.plan.slot(Method::dr_minus);
  const int slot_mean = ctx.plan.slot(Method::dr_mean);
  const int slot_idr = ctx.plan.slot(Method::idr);
  const bool mc = !ctx.samples->weighted();
  const PerturbationPair& pair = *ctx.pair;

  Channel center;
  center.x = x;
  center.with_tangent = true;
  center.m = Mat::Identity(dim, dim);
  center.grad = PhaseVec::Zero(dim);
  center.k_int = Mat::Zero(dim, dim);

  Channel minus_ch;
  if (slot_minus >= 0) minus_ch.x = x;

  std::vector<Channel> stencil_ch;
  Stencil stencil(x);
  if (slot_idr >= 0) {
    stencil_ch.resize(stencil.offsets.size());
    for (std::size_t s = 0; s < stencil.offsets.size(); ++s) stencil_ch[s].x = x + stencil.offsets[s];
  }

  long step_counter = 0;
  double t_prev = 0.0;
  for (std::size_t j = 0; j < n_times; ++j) {
    const double delta_t = times[j] - t_prev;
    if (delta_t > 0.0) {
      const long n_full = static_cast<long>(std::floor(delta_t / ctx.integrator.dt + 1e-9));
      const double remainder = delta_t - static_cast<double>(n_full) * ctx.integrator.dt;
      const bool partial = remainder > 1e-12 * std::max(ctx.integrator.dt, delta_t);
      const long total = n_full + (partial ? 1 : 0);
      for (long k = 0; k < total; ++k) {
        const double dt = (k < n_full) ? ctx.integrator.dt : remainder;
        channel_step(pair.mean, pair.delta, center, dt, ctx.integrator, step_counter, ctx.jmat);
        if (slot_minus >= 0)
          channel_step(ctx.h_minus, pair.delta, minus_ch, dt, ctx.integrator, step_counter, ctx.jmat);
        for (Channel& ch : stencil_ch)
          channel_step(pair.mean, pair.delta, ch, dt, ctx.integrator, step_counter, ctx.jmat);
        ++step_counter;
      }
      t_prev = times[j];
    }

    const cplx phase_mean = std::polar(1.0, -center.action / hbar);
    auto put = [&](int slot, const cplx& v) {
      if (slot < 0) return;
      const std::size_t k = static_cast<std::size_t>(slot) * n_times + j;
      acc.val[k] += (mc ? v : wt * v);
      if (mc) {
        acc.re2[k] += v.real() * v.real();
        acc.im2[k] += v.imag() * v.imag();
      }
    };
    put(slot_mean, phase_mean);
    if (slot_minus >= 0) put(slot_minus, std::polar(1.0, -minus_ch.action / hbar));
    if (slot_idr >= 0) {
      std::vector<double> f(stencil_ch.size());
      for (std::size_t s = 0; s < stencil_ch.size(); ++s) f[s] = stencil_ch[s].action;
      const SymmetricMatrix b = stencil.assemble(center.action, f);
      try {
        const double w = amplitude_weight(b);
        put(slot_idr, w * phase_mean);
        acc.w_sum[j] += (mc ? w : wt * w);
        acc.w_den[j] += (mc ? 1.0 : wt);
      } catch (const CausticEncountered&) {
        acc.caustic[j] += 1;
      }
    }
    const PhaseVec xi = kChordFromGradientSign * (ctx.jmat * center.grad);
    acc.err13_sum[j] += (mc ? 1.0 : wt) * (-0.125 * xi.dot(center.k_int * xi));
    acc.den[j] += (mc ? 1.0 : wt);
  }
}

std::vector<MethodSeries> run_sample_sweep(const GaussianState& state, const PerturbationPair& pair,
                                           const std::vector<double>& times,
                                           const SweepPlan& plan, const EngineOptions& opts) {
  SweepContext ctx;
  ctx.state = &state;
  ctx.pair = &pair;
  ctx.times = &times;
  ctx.plan = plan;
  ctx.integrator = opts.integrator;
  ctx.quadratic = pair.quadratic();
  ctx.jmat = symplectic_j(pair.dof());
  if (ctx.quadratic) {
    ctx.quad_times = prepare_quad_times(pair, times, plan.want(Method::dr_minus));
  } else if (plan.want(Method::dr_minus)) {
    ctx.h_minus = pair.minus();
  }

  const SampleSet samples = build_samples(state, opts.sampler);
  ctx.samples = &samples;
  const long n = samples.size();
  const std::size_t n_times = times.size();
  const std::size_t slots = plan.methods.size();

  const long block_size = 64;
  const long n_blocks = (n + block_size - 1) / block_size;
  std::vector<BlockAccum> blocks(static_cast<std::size_t>(n_blocks));

  int workers = opts.workers > 0 ? opts.workers
                                 : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = static_cast<int>(std::min<long>(workers, n_blocks));

  std::atomic<long> next_block(0);
  std::atomic<bool> failed(false);
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker_fn = [&]() {
    while (!failed.load(std::memory_order_relaxed)) {
      const long bi = next_block.fetch_add(1);
      if (bi >= n_blocks) break;
      BlockAccum& acc = blocks[static_cast<std::size_t>(bi)];
      acc.init(slots, n_times);
      const long lo = bi * block_size;
      const long hi = std::min(n, lo + block_size);
      for (long i = lo; i < hi; ++i) {
        const double wt = samples.weighted() ? samples.weights[static_cast<std::size_t>(i)] : 0.0;
        try {
          if (ctx.quadratic) {
            process_sample_quadratic(ctx, i, wt, acc);
          } else {
            process_sample_general(ctx, i, wt, acc);
          }
        } catch (const IntegrationError& e) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) {
            first_error = std::make_exception_ptr(
                IntegrationError("sample " + std::to_string(i) + ": " + e.what(), e.failed_step));
          }
          failed.store(true, std::memory_order_relaxed);
          return;
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          failed.store(true, std::memory_order_relaxed);
          return;
        }
      }
    }
  };

  if (workers <= 1) {
    worker_fn();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker_fn);
    for (std::thread& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  // Deterministic reduction: fixed block order regardless of scheduling.
  BlockAccum total;
  total.init(slots, n_times);
  for (const BlockAccum& b : blocks) {
    for (std::size_t k = 0; k < total.val.size(); ++k) {
      total.val[k] += b.val[k];
      total.re2[k] += b.re2[k];
      total.im2[k] += b.im2[k];
    }
    for (std::size_t j = 0; j < n_times; ++j) {
      total.w_sum[j] += b.w_sum[j];
      total.w_den[j] += b.w_den[j];
      total.err13_sum[j] += b.err13_sum[j];
      total.eta_sum[j] += b.eta_sum[j];
      total.den[j] += b.den[j];
      total.caustic[j] += b.caustic[j];
    }
  }

  const bool mc = !samples.weighted();
  std::vector<MethodSeries> out(slots);
  for (std::size_t s = 0; s < slots; ++s) {
    MethodSeries& ms = out[s];
    ms.method = plan.methods[s];
    ms.values.resize(n_times);
    ms.se_re.assign(n_times, 0.0);
    ms.se_im.assign(n_times, 0.0);
    ms.diag.resize(n_times);
    for (std::size_t j = 0; j < n_times; ++j) {
      const std::size_t k = s * n_times + j;
      cplx value;
      if (mc) {
        value = total.val[k] / static_cast<double>(n);
        if (n >= 2) {
          const double mr = value.real();
          const double mi = value.imag();
          const double var_r =
              std::max(0.0, (total.re2[k] - n * mr * mr) / static_cast<double>(n - 1));
          const double var_i =
              std::max(0.0, (total.im2[k] - n * mi * mi) / static_cast<double>(n - 1));
          ms.se_re[j] = std::sqrt(var_r / static_cast<double>(n));
          ms.se_im[j] = std::sqrt(var_i / static_cast<double>(n));
        }
      } else {
        value = total.val[k];
      }

      TimePointDiag& d = ms.diag[j];
      const double den = total.den[j];
      d.err13_mean = den > 0.0 ? total.err13_sum[j] / den : kNan;
      bool eta_known = ctx.quadratic && ctx.quad_times[j].eta_ok;
      d.eta_db_eta = (eta_known && den > 0.0) ? total.eta_sum[j] / den : kNan;

      if (ms.method == Method::idr) {
        d.caustic_samples = total.caustic[j];
        const bool caustic_here = ctx.quadratic ? ctx.quad_times[j].caustic : total.caustic[j] > 0;
        d.caustic = caustic_here;
        d.w_mean = total.w_den[j] > 0.0 ? total.w_sum[j] / total.w_den[j] : kNan;
        if (caustic_here) {
          value = cplx(kNan, kNan);
          ms.se_re[j] = kNan;
          ms.se_im[j] = kNan;
        }
      } else {
        d.w_mean = 1.0;
      }
      ms.values[j] = value;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Closed Gaussian integral for quadratic pairs
// ---------------------------------------------------------------------------

MethodSeries quad_closed_series(const GaussianState& state, const PerturbationPair& pair,
                                const std::vector<double>& times, bool include_amplitude) {
  require(pair.quadratic(),
          "the closed-form estimator requires a quadratic forward/backward pair");
  require(state.dof() == pair.dof(), "state and Hamiltonian dimensions must match");

  const int n = 2 * pair.dof();
  const double hbar = state.hbar;
  const Mat g = state.g.mat();
  const Mat jmat = symplectic_j(pair.dof());
  Eigen::SelfAdjointEigenSolver<Mat> es_g(g);
  require(es_g.eigenvalues().minCoeff() > 0.0, "state matrix G must be positive definite");
  const Mat g_inv_sqrt = es_g.eigenvectors() *
                         es_g.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                         es_g.eigenvectors().transpose();
  const double det_g = es_g.eigenvalues().prod();
  const Mat sigma = (hbar / 2.0) * g.partialPivLu().solve(Mat::Identity(n, n));

  const std::vector<QuadTime> qts = prepare_quad_times(pair, times, /*want_minus=*/false);

  MethodSeries ms;
  ms.method = Method::quad_closed;
  ms.values.resize(times.size());
  ms.se_re.assign(times.size(), 0.0);
  ms.se_im.assign(times.size(), 0.0);
  ms.diag.resize(times.size());

  for (std::size_t j = 0; j < times.size(); ++j) {
    const QuadTime& qt = qts[j];
    TimePointDiag& d = ms.diag[j];
    const Mat b = qt.mean_form.b.mat();
    const Vec u = qt.mean_form.grad(state.center);

    // Average over the Wigner Gaussian of w exp(-i dS/hbar):
    //   L = w det(G)^{-1/2} prod_k (1 + i mu_k)^{-1/2}
    //       exp(-u^T (G + iB)^{-1} u / (4 hbar)) exp(-i dS(x0)/hbar)
    // with mu_k the eigenvalues of G^{-1/2} B G^{-1/2}; per-factor principal
    // square roots keep the branch continuous in t.
    Eigen::SelfAdjointEigenSolver<Mat> es_c(g_inv_sqrt * b * g_inv_sqrt);
    cplx pref = std::pow(det_g, -0.5);
    for (int k = 0; k < n; ++k) pref /= std::sqrt(cplx(1.0, es_c.eigenvalues()[k]));

    Eigen::MatrixXcd lambda = g.cast<cplx>();
    lambda += cplx(0.0, 1.0) * b.cast<cplx>();
    const Eigen::VectorXcd z = lambda.partialPivLu().solve(u.cast<cplx>());
    const cplx uz = u.cast<cplx>().dot(z);  // real u: plain bilinear form
    const cplx gauss = std::exp(-uz / (4.0 * hbar));
    const cplx phase = std::exp(cplx(0.0, -qt.mean_form.eval(state.center) / hbar));

    double w = 1.0;
    bool caustic = false;
    if (include_amplitude) {
      if (qt.caustic) {
        caustic = true;
      } else {
        w = qt.weight;
      }
    }
    ms.values[j] = caustic ? cplx(kNan, kNan) : w * pref * gauss * phase;
    d.caustic = caustic;
    d.w_mean = include_amplitude ? (caustic ? kNan : qt.weight) : 1.0;

    // Diagnostics in closed form: Gaussian means of the quadratic forms.
    const PhaseVec xi_bar = kChordFromGradientSign * (jmat * u);
    const Mat a_xi = kChordFromGradientSign * (2.0 * jmat * b);
    d.err13_mean = -0.125 * (xi_bar.dot(qt.k_int * xi_bar) +
                             (qt.k_int * (a_xi * sigma * a_xi.transpose())).trace());
    if (qt.eta_ok) {
      const PhaseVec eta_bar = qt.eta_a * state.center + qt.eta_b;
      d.eta_db_eta = eta_bar.dot(qt.d_b * eta_bar) +
                     (qt.d_b * (qt.eta_a * sigma * qt.eta_a.transpose())).trace();
    } else {
      d.eta_db_eta = kNan;
    }
  }
  return ms;
}

MethodSeries grid_series(const GaussianState& state, const PerturbationPair& pair,
                         const std::vector<double>& times, const EngineOptions& opts) {
  MethodSeries ms;
  ms.method = Method::grid;
  ms.values = loschmidt_exact_series(state, pair, times, opts.oracle);
  ms.se_re.assign(times.size(), 0.0);
  ms.se_im.assign(times.size(), 0.0);
  ms.diag.assign(times.size(), TimePointDiag{kNan, kNan, kNan, false, 0});
  return ms;
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::dr_minus: return "dr_minus";
    case Method::dr_mean: return "dr_mean";
    case Method::idr: return "idr";
    case Method::quad_closed: return "quad_closed";
    case Method::grid: return "grid";
  }
  return "unknown";
}

std::optional<Method> method_from_name(const std::string& name) {
  for (Method m : {Method::dr_minus, Method::dr_mean, Method::idr, Method::quad_closed,
                   Method::grid}) {
    if (name == method_name(m)) return m;
  }
  return std::nullopt;
}

EchoSeries run_methods(const GaussianState& state, const PerturbationPair& pair,
                       const std::vector<double>& times, const std::vector<Method>& methods,
                       const EngineOptions& opts) {
  validate_times(times);
  require(!methods.empty(), "at least one method must be requested");
  require(state.dof() == pair.dof(), "state and Hamiltonian dimensions must match");
  for (std::size_t i = 0; i < methods.size(); ++i)
    for (std::size_t j = i + 1; j < methods.size(); ++j)
      require(methods[i] != methods[j], "duplicate method requested");

  SweepPlan plan;
  for (Method m : methods)
    if (is_sample_method(m)) plan.methods.push_back(m);

  std::vector<MethodSeries> sampled;
  if (!plan.methods.empty()) sampled = run_sample_sweep(state, pair, times, plan, opts);

  EchoSeries out;
  out.times = times;
  for (Method m : methods) {
    if (is_sample_method(m)) {
      out.series.push_back(std::move(sampled[static_cast<std::size_t>(plan.slot(m))]));
    } else if (m == Method::quad_closed) {
      out.series.push_back(quad_closed_series(state, pair, times, /*include_amplitude=*/true));
    } else {
      out.series.push_back(grid_series(state, pair, times, opts));
    }
  }
  return out;
}

MethodSeries estimate_dr(const GaussianState& state, const PerturbationPair& pair,
                         const std::vector<double>& times, const EngineOptions& opts,
                         bool minus_trajectories) {
  const Method m = minus_trajectories ? Method::dr_minus : Method::dr_mean;
  return std::move(run_methods(state, pair, times, {m}, opts).series.front());
}

MethodSeries estimate_idr(const GaussianState& state, const PerturbationPair& pair,
                          const std::vector<double>& times, const EngineOptions& opts) {
  return std::move(run_methods(state, pair, times, {Method::idr}, opts).series.front());
}

MethodSeries estimate_quadratic_closed(const GaussianState& state, const PerturbationPair& pair,
                                       const std::vector<double>& times, const EngineOptions&,
                                       bool include_amplitude) {
  validate_times(times);
  return quad_closed_series(state, pair, times, include_amplitude);
}

MethodSeries oracle_series(const GaussianState& state, const PerturbationPair& pair,
                           const std::vector<double>& times, const EngineOptions& opts) {
  validate_times(times);
  return grid_series(state, pair, times, opts);
}

ComparisonReport compare(const GaussianState& state, const PerturbationPair& pair,
                         const std::vector<double>& times, const std::vector<Method>& methods,
                         const EngineOptions& opts) {
  ComparisonReport report;
  report.series = run_methods(state, pair, times, methods, opts);
  const std::vector<MethodSeries>& all = report.series.series;
  for (std::size_t a = 0; a < all.size(); ++a) {
    for (std::size_t b = a + 1; b < all.size(); ++b) {
      MethodComparison cmp;
      cmp.a = all[a].method;
      cmp.b = all[b].method;
      double sum = 0.0;
      for (std::size_t j = 0; j < times.size(); ++j) {
        const cplx va = all[a].values[j];
        const cplx vb = all[b].values[j];
        if (std::isnan(va.real()) || std::isnan(vb.real())) {
          ++cmp.skipped;
          continue;
        }
        const double diff = std::abs(va - vb);
        cmp.max_abs_diff = std::max(cmp.max_abs_diff, diff);
        sum += diff;
        ++cmp.points;
      }
      cmp.mean_abs_diff = cmp.points > 0 ? sum / static_cast<double>(cmp.points) : 0.0;
      report.pairs.push_back(cmp);
    }
  }
  return report;
}

}  // namespace loschmidt
