#include "loschmidt/echo_action.hpp"

#include <cmath>
#include <limits>

#include "loschmidt/quadratic_exact.hpp"

namespace loschmidt {

namespace {

constexpr int kSimpsonIntervals = 1024;  // even; composite Simpson error O(h^4)

bool delta_identically_zero(const PerturbationPair& pair) {
  if (!pair.delta.is_quadratic()) return false;
  const QuadraticHamiltonian& d = pair.delta.quad();
  return d.hess.mat().isZero(0.0) && d.a.isZero(0.0);
}

/// Exact closed coefficients of deltaS along the affine flow generated by
/// `gen`, for quadratic deltaH. Uses the homogeneous-coordinate trick: the
/// affine flow is linear on (x, 1), so the time integral of the transported
/// quadratic form is a single block-exponential integral.
QuadActionForm action_form_along(const QuadraticHamiltonian& gen,
                                 const QuadraticHamiltonian& delta, double t) {
  const int n = gen.hess.size();
  const Mat jmat = symplectic_j(n / 2);

  Mat gen_aug = Mat::Zero(n + 1, n + 1);
  gen_aug.topLeftCorner(n, n) = jmat * gen.hess.mat();
  gen_aug.topRightCorner(n, 1) = gen.a;  // field: xdot = J hess x + a

  // deltaH(y) = 1/2 y.dHess y + da ^ y as a quadratic form on (y, 1):
  // the linear part enters through u = -J da, since u.y = da ^ y.
  Mat q_aug = Mat::Zero(n + 1, n + 1);
  q_aug.topLeftCorner(n, n) = delta.hess.mat();
  const Vec u = -(jmat * delta.a);
  q_aug.topRightCorner(n, 1) = u;
  q_aug.bottomLeftCorner(1, n) = u.transpose();

  const Mat v = integral_congruence(gen_aug, q_aug, t);
  QuadActionForm form;
  form.b = SymmetricMatrix::from_dense(-0.5 * v.topLeftCorner(n, n), 1e-6);
  form.g = -v.topRightCorner(n, 1);
  form.c = -0.5 * v(n, n);
  return form;
}

/// Streamed midpoint pass over the mean flow. Any of the outputs may be null;
/// only the requested accumulations are carried. Gradient accumulation uses
/// the exact tangent of the discrete map (Cayley factors at the converged
/// step midpoints), so the result is the exact derivative of the discrete
/// action up to the fixed-point tolerance.
void accumulate_mean_flow(const PerturbationPair& pair, const PhaseVec& x, double t,
                          const IntegratorOptions& opt, double* action_out,
                          PhaseVec* grad_out, Mat* delta_hess_integral_out,
                          PhaseVec* naive_out) {
  const int n = static_cast<int>(x.size());
  const Mat jmat = symplectic_j(n / 2);
  require(opt.dt > 0.0, "accumulate_mean_flow: dt must be positive");
  require(t >= 0.0 && std::isfinite(t), "accumulate_mean_flow: bad time");

  const long n_full = static_cast<long>(std::floor(t / opt.dt + 1e-9));
  const double remainder = t - static_cast<double>(n_full) * opt.dt;
  const bool partial = remainder > 1e-12 * std::max(opt.dt, t);

  double action = 0.0;
  PhaseVec grad = PhaseVec::Zero(n);
  Mat dh_int = Mat::Zero(n, n);
  PhaseVec naive = PhaseVec::Zero(n);
  Mat m_cur = Mat::Identity(n, n);
  const Mat eye = Mat::Identity(n, n);

  PhaseVec x_cur = x;
  PhaseVec mid(n);
  const long total = n_full + (partial ? 1 : 0);
  for (long k = 0; k < total; ++k) {
    const double dt = (k < n_full) ? opt.dt : remainder;
    const PhaseVec x_next = midpoint_step(pair.mean, x_cur, dt, opt, k, &mid);
    if (action_out != nullptr) action -= dt * pair.delta.value(mid);
    if (grad_out != nullptr) {
      const Mat a = jmat * pair.mean.hessian(mid);
      const Mat m_next = (eye - 0.5 * dt * a).partialPivLu().solve((eye + 0.5 * dt * a) * m_cur);
      grad -= dt * (0.5 * (m_cur + m_next)).transpose() * pair.delta.gradient(mid);
      m_cur = m_next;
    }
    if (delta_hess_integral_out != nullptr) dh_int += dt * pair.delta.hessian(mid);
    if (naive_out != nullptr) naive -= dt * (jmat * pair.delta.gradient(mid));
    x_cur = x_next;
  }
  if (action_out != nullptr) *action_out = action;
  if (grad_out != nullptr) *grad_out = grad;
  if (delta_hess_integral_out != nullptr) *delta_hess_integral_out = dh_int;
  if (naive_out != nullptr) *naive_out = naive;
}

/// Composite-Simpson pass over exactly sampled quadratic mean flow.
/// The callback receives (node point, monodromy at node, Simpson weight * h/3).
template <typename Fn>
void simpson_over_quad_flow(const QuadraticHamiltonian& mean, const PhaseVec& x, double t,
                            Fn&& visit) {
  const int n = mean.hess.size();
  if (t == 0.0) return;
  const int intervals = kSimpsonIntervals;
  const double h = t / intervals;
  const LinearSympMap step = quad_flow_map(mean, h);
  PhaseVec node = x;
  Mat m = Mat::Identity(n, n);
  for (int k = 0; k <= intervals; ++k) {
    const double weight = (k == 0 || k == intervals) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    visit(node, m, weight * h / 3.0);
    if (k < intervals) {
      node = step.apply(node);
      m = step.m * m;
    }
  }
}

}  // namespace

QuadActionForm quad_action_form(const PerturbationPair& pair, double t) {
  require(pair.quadratic(), "quad_action_form: quadratic pair required");
  return action_form_along(pair.mean.quad(), pair.delta.quad(), t);
}

QuadActionForm quad_action_form_minus(const PerturbationPair& pair, double t) {
  require(pair.quadratic(), "quad_action_form_minus: quadratic pair required");
  return action_form_along(pair.minus().quad(), pair.delta.quad(), t);
}

double delta_action(const PerturbationPair& pair, const PhaseVec& x, double t,
                    ActionScheme scheme, const IntegratorOptions& opt) {
  require(x.size() == 2 * pair.dof(), "delta_action: dimension mismatch");
  if (scheme == ActionScheme::automatic) {
    scheme = pair.quadratic() ? ActionScheme::exact_flow : ActionScheme::midpoint;
  }
  if (scheme == ActionScheme::exact_flow) {
    require(pair.quadratic(), "delta_action: exact_flow scheme needs a quadratic pair");
    double action = 0.0;
    simpson_over_quad_flow(pair.mean.quad(), x, t,
                           [&](const PhaseVec& node, const Mat&, double w) {
                             action -= w * pair.delta.value(node);
                           });
    return action;
  }
  double action = 0.0;
  accumulate_mean_flow(pair, x, t, opt, &action, nullptr, nullptr, nullptr);
  return action;
}

PhaseVec delta_action_gradient(const PerturbationPair& pair, const PhaseVec& x, double t,
                               const IntegratorOptions& opt) {
  require(x.size() == 2 * pair.dof(), "delta_action_gradient: dimension mismatch");
  const int n = static_cast<int>(x.size());
  if (pair.quadratic()) {
    PhaseVec grad = PhaseVec::Zero(n);
    simpson_over_quad_flow(pair.mean.quad(), x, t,
                           [&](const PhaseVec& node, const Mat& m, double w) {
                             grad -= w * (m.transpose() * pair.delta.gradient(node));
                           });
    return grad;
  }
  PhaseVec grad(n);
  accumulate_mean_flow(pair, x, t, opt, nullptr, &grad, nullptr, nullptr);
  return grad;
}

PhaseVec chord(const PerturbationPair& pair, const PhaseVec& x, double t,
               const IntegratorOptions& opt) {
  const int n = static_cast<int>(x.size());
  return kChordFromGradientSign *
         (symplectic_j(n / 2) * delta_action_gradient(pair, x, t, opt));
}

PhaseVec naive_chord(const PerturbationPair& pair, const PhaseVec& x, double t,
                     const IntegratorOptions& opt) {
  require(x.size() == 2 * pair.dof(), "naive_chord: dimension mismatch");
  const int n = static_cast<int>(x.size());
  if (pair.quadratic()) {
    PhaseVec disp = PhaseVec::Zero(n);
    const Mat jmat = symplectic_j(n / 2);
    simpson_over_quad_flow(pair.mean.quad(), x, t,
                           [&](const PhaseVec& node, const Mat&, double w) {
                             disp -= w * (jmat * pair.delta.gradient(node));
                           });
    return disp;
  }
  PhaseVec disp(n);
  accumulate_mean_flow(pair, x, t, opt, nullptr, nullptr, nullptr, &disp);
  return disp;
}

SymmetricMatrix hessian_delta_action(const PerturbationPair& pair, const PhaseVec& x,
                                     double t, HessianMethod method,
                                     const IntegratorOptions& opt) {
  const int n = static_cast<int>(x.size());
  require(n == 2 * pair.dof(), "hessian_delta_action: dimension mismatch");
  if (method == HessianMethod::automatic) {
    method = pair.mean.is_quadratic() ? HessianMethod::tangent : HessianMethod::fd;
  }
  if (method == HessianMethod::tangent) {
    require(pair.mean.is_quadratic(),
            "hessian_delta_action: tangent method requires a quadratic mean Hamiltonian");
    if (pair.delta.is_quadratic()) {
      const Mat a_field = symplectic_j(n / 2) * pair.mean.quad().hess.mat();
      const Mat v = integral_congruence(a_field, pair.delta.quad().hess.mat(), t);
      return SymmetricMatrix::from_dense(-0.5 * v, 1e-6);
    }
    Mat acc = Mat::Zero(n, n);
    simpson_over_quad_flow(pair.mean.quad(), x, t,
                           [&](const PhaseVec& node, const Mat& m, double w) {
                             acc -= 0.5 * w * (m.transpose() * pair.delta.hessian(node) * m);
                           });
    return SymmetricMatrix::from_dense(acc, 1e-6);
  }
  // Central second differences of the action.
  const double base = std::pow(std::numeric_limits<double>::epsilon(), 0.25);
  auto f = [&](const PhaseVec& y) {
    return delta_action(pair, y, t, ActionScheme::automatic, opt);
  };
  std::vector<double> steps(n);
  for (int i = 0; i < n; ++i) steps[i] = base * std::max(1.0, std::abs(x[i]));
  const double f0 = f(x);
  SymmetricMatrix b(n);
  for (int i = 0; i < n; ++i) {
    const double hi = steps[i];
    PhaseVec xp = x, xm = x;
    xp[i] += hi;
    xm[i] -= hi;
    b.set(i, i, 0.5 * (f(xp) - 2.0 * f0 + f(xm)) / (hi * hi));
    for (int j = i + 1; j < n; ++j) {
      const double hj = steps[j];
      PhaseVec xpp = x, xpm = x, xmp = x, xmm = x;
      xpp[i] += hi; xpp[j] += hj;
      xpm[i] += hi; xpm[j] -= hj;
      xmp[i] -= hi; xmp[j] += hj;
      xmm[i] -= hi; xmm[j] -= hj;
      b.set(i, j, 0.5 * (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * hi * hj));
    }
  }
  return b;
}

double amplitude_weight(const SymmetricMatrix& b) {
  const int n = b.size();
  const Mat m = Mat::Identity(n, n) + symplectic_j(n / 2) * b.mat();
  double det = 0.0;
  if (near_singular(m, &det)) {
    throw CausticEncountered("amplitude_weight: det(I + J B) vanished (caustic)");
  }
  return std::sqrt(std::abs(det));
}

double dr_action_error(const PerturbationPair& pair, const PhaseVec& x, double t,
                       const IntegratorOptions& opt) {
  const int n = static_cast<int>(x.size());
  require(n == 2 * pair.dof(), "dr_action_error: dimension mismatch");
  Mat k_int(n, n);
  PhaseVec xi(n);
  if (pair.quadratic()) {
    k_int = t * pair.delta.quad().hess.mat();
    xi = chord(pair, x, t, opt);
  } else {
    PhaseVec grad(n);
    accumulate_mean_flow(pair, x, t, opt, nullptr, &grad, &k_int, nullptr);
    xi = kChordFromGradientSign * (symplectic_j(n / 2) * grad);
  }
  return -0.125 * xi.dot(k_int * xi);
}

EchoLocalData echo_local(const PerturbationPair& pair, const PhaseVec& x, double t,
                         HessianMethod method, const IntegratorOptions& opt) {
  const int n = static_cast<int>(x.size());
  require(n == 2 * pair.dof(), "echo_local: dimension mismatch");
  EchoLocalData data;
  data.x = x;

  if (delta_identically_zero(pair)) {
    data.chord = PhaseVec::Zero(n);
    data.b_matrix = SymmetricMatrix::zero(n);
    data.weight = 1.0;
    data.has_neglected = true;
    return data;
  }

  if (pair.quadratic()) {
    const QuadActionForm form = quad_action_form(pair, t);
    data.delta_action = form.eval(x);
    const PhaseVec grad = form.grad(x);
    data.chord = kChordFromGradientSign * (symplectic_j(n / 2) * grad);
    data.b_matrix = form.b;
    data.weight = amplitude_weight(form.b);
    const Mat k_int = t * pair.delta.quad().hess.mat();
    data.err13 = -0.125 * data.chord.dot(k_int * data.chord);
    try {
      data.neglected = sp_reduce(pair, x, t).neglected;
      data.has_neglected = true;
    } catch (const CausticEncountered&) {
    } catch (const UnsupportedDegenerate&) {
    }
    return data;
  }

  double action = 0.0;
  PhaseVec grad(n);
  Mat k_int(n, n);
  accumulate_mean_flow(pair, x, t, opt, &action, &grad, &k_int, nullptr);
  data.delta_action = action;
  data.chord = kChordFromGradientSign * (symplectic_j(n / 2) * grad);
  data.b_matrix = hessian_delta_action(pair, x, t, method, opt);
  data.weight = amplitude_weight(data.b_matrix);
  data.err13 = -0.125 * data.chord.dot(k_int * data.chord);
  return data;
}

}  // namespace loschmidt
