#include "loschmidt/dynamics.hpp"

#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

namespace loschmidt {

namespace {

constexpr long kMaxSteps = 50000000L;

Mat checked_exp(const Mat& m, const char* what) {
  Mat r = m.exp();
  if (!r.allFinite()) {
    throw IntegrationError(std::string("matrix exponential overflow in ") + what);
  }
  return r;
}

}  // namespace

Mat mat_exp(const Mat& a, double t) {
  require(a.rows() == a.cols(), "mat_exp: matrix must be square");
  require(a.allFinite() && std::isfinite(t), "mat_exp: non-finite input");
  return checked_exp(Mat(a * t), "mat_exp");
}

Mat integral_exp(const Mat& a, double t) {
  require(a.rows() == a.cols(), "integral_exp: matrix must be square");
  const int n = static_cast<int>(a.rows());
  // exp([[A, I], [0, 0]] t) = [[e^{At}, integral_0^t e^{As} ds], [0, I]].
  Mat block = Mat::Zero(2 * n, 2 * n);
  block.topLeftCorner(n, n) = a;
  block.topRightCorner(n, n) = Mat::Identity(n, n);
  const Mat e = checked_exp(Mat(block * t), "integral_exp");
  return e.topRightCorner(n, n);
}

Mat integral_congruence(const Mat& a, const Mat& q, double t) {
  require(a.rows() == a.cols() && q.rows() == q.cols() && a.rows() == q.rows(),
          "integral_congruence: dimension mismatch");
  const int n = static_cast<int>(a.rows());
  // exp([[-A^T, Q], [0, A]] t) = [[F1, G1], [0, F2]] with
  // G1 = integral e^{-A^T (t-s)} Q e^{A s} ds, so F2^T G1 = integral e^{A^T s} Q e^{A s} ds.
  Mat block = Mat::Zero(2 * n, 2 * n);
  block.topLeftCorner(n, n) = -a.transpose();
  block.topRightCorner(n, n) = q;
  block.bottomRightCorner(n, n) = a;
  const Mat e = checked_exp(Mat(block * t), "integral_congruence");
  return e.bottomRightCorner(n, n).transpose() * e.topRightCorner(n, n);
}

Mat integral_conjugation(const Mat& a, const Mat& eps, double t) {
  require(a.rows() == a.cols() && eps.rows() == eps.cols() && a.rows() == eps.rows(),
          "integral_conjugation: dimension mismatch");
  const int n = static_cast<int>(a.rows());
  // exp([[A, E], [0, A]] t) = [[e^{At}, integral e^{A(t-s)} E e^{As} ds], [0, e^{At}]].
  Mat block = Mat::Zero(2 * n, 2 * n);
  block.topLeftCorner(n, n) = a;
  block.topRightCorner(n, n) = eps;
  block.bottomRightCorner(n, n) = a;
  const Mat e = checked_exp(Mat(block * t), "integral_conjugation");
  return e.topRightCorner(n, n);
}

LinearSympMap quad_flow_map(const QuadraticHamiltonian& h, double t) {
  const int n = h.hess.size();
  const Mat hess = h.hess.mat();
  LinearSympMap map;
  if (hess.isZero(0.0)) {
    // Pure drift: grad H = -J a, field = J grad H = a.
    map.m = Mat::Identity(n, n);
    map.shift = t * h.a;
    return map;
  }
  const Mat a_field = symplectic_j(n / 2) * hess;  // field matrix: xdot = A x + a
  map.m = mat_exp(a_field, t);
  if (h.a.isZero(0.0)) {
    map.shift = Vec::Zero(n);
    return map;
  }
  if (near_singular(a_field)) {
    // P(t) a is still well defined, but the closed-form center machinery
    // downstream needs a in range(J hess); reject the truly degenerate case.
    const Eigen::FullPivLU<Mat> lu(a_field);
    const Vec sol = lu.solve(h.a);
    const double resid = (a_field * sol - h.a).norm();
    if (resid > 1e-9 * std::max(1.0, h.a.norm())) {
      throw UnsupportedDegenerate(
          "quad_flow: singular nonzero curvature with drift outside range(J hess)");
    }
  }
  map.shift = integral_exp(a_field, t) * h.a;
  return map;
}

PhaseVec quad_flow(const QuadraticHamiltonian& h, const PhaseVec& x0, double t) {
  require(x0.size() == h.a.size(), "quad_flow: dimension mismatch");
  return quad_flow_map(h, t).apply(x0);
}

PhaseVec midpoint_step(const Hamiltonian& h, const PhaseVec& x, double dt,
                       const IntegratorOptions& opt, long step_index,
                       PhaseVec* midpoint_out) {
  PhaseVec m = x + 0.5 * dt * hamiltonian_field(h, x);  // explicit Euler predictor
  bool converged = false;
  PhaseVec field = hamiltonian_field(h, m);
  for (int it = 0; it < opt.max_fp_iters; ++it) {
    const PhaseVec m_next = x + 0.5 * dt * field;
    const double delta = (m_next - m).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, m_next.cwiseAbs().maxCoeff());
    m = m_next;
    field = hamiltonian_field(h, m);
    if (delta <= opt.fp_tol * scale) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw IntegrationError("implicit midpoint fixed-point iteration did not converge",
                           step_index);
  }
  if (midpoint_out != nullptr) *midpoint_out = m;
  return x + dt * field;
}

Trajectory integrate_trajectory(const Hamiltonian& h, const PhaseVec& x0, double t,
                                const IntegratorOptions& opt) {
  require(opt.dt > 0.0 && std::isfinite(opt.dt), "integrate_trajectory: dt must be positive");
  require(t >= 0.0 && std::isfinite(t), "integrate_trajectory: t must be finite and >= 0");
  require(x0.size() == 2 * h.dof(), "integrate_trajectory: dimension mismatch");
  require(x0.allFinite(), "integrate_trajectory: non-finite initial condition");

  Trajectory traj;
  traj.hamiltonian = h;
  traj.dt = opt.dt;

  const long n_full = static_cast<long>(std::floor(t / opt.dt + 1e-9));
  require(n_full <= kMaxSteps, "integrate_trajectory: step count exceeds limit");
  const double remainder = t - static_cast<double>(n_full) * opt.dt;
  const bool partial = remainder > 1e-12 * std::max(opt.dt, t);

  traj.times.reserve(n_full + 2);
  traj.points.reserve(n_full + 2);
  traj.times.push_back(0.0);
  traj.points.push_back(x0);

  PhaseVec x = x0;
  for (long k = 0; k < n_full; ++k) {
    x = midpoint_step(h, x, opt.dt, opt, k);
    traj.times.push_back(static_cast<double>(k + 1) * opt.dt);
    traj.points.push_back(x);
  }
  if (partial) {
    x = midpoint_step(h, x, remainder, opt, n_full);
    traj.times.push_back(t);
    traj.points.push_back(x);
    traj.partial_final_step = true;
  }
  return traj;
}

TangentFlow integrate_tangent(const Hamiltonian& h, const Trajectory& traj) {
  require(!traj.times.empty(), "integrate_tangent: empty trajectory");
  const int n = static_cast<int>(traj.points.front().size());
  const Mat jmat = symplectic_j(n / 2);
  TangentFlow flow;
  flow.times = traj.times;
  flow.m.reserve(traj.times.size());
  flow.m.push_back(Mat::Identity(n, n));
  Mat m = Mat::Identity(n, n);
  for (std::size_t k = 0; k + 1 < traj.points.size(); ++k) {
    const double dt = traj.times[k + 1] - traj.times[k];
    // The converged midpoint of the step equals the endpoint average (to the
    // fixed-point tolerance), so it need not be stored separately.
    const PhaseVec mid = 0.5 * (traj.points[k] + traj.points[k + 1]);
    const Mat a = jmat * h.hessian(mid);
    const Mat lhs = Mat::Identity(n, n) - 0.5 * dt * a;
    const Mat rhs = Mat::Identity(n, n) + 0.5 * dt * a;
    m = lhs.partialPivLu().solve(rhs * m);
    flow.m.push_back(m);
  }
  return flow;
}

}  // namespace loschmidt
