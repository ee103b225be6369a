#include "loschmidt/quadratic_exact.hpp"

#include <cmath>

namespace loschmidt {

namespace {

Mat solve_with_caustic_check(const Mat& lhs, const Mat& rhs, const char* what) {
  if (near_singular(lhs)) {
    throw CausticEncountered(std::string(what) + ": singular linear system");
  }
  return lhs.partialPivLu().solve(rhs);
}

}  // namespace

CenterGenerating center_generating(const QuadraticHamiltonian& h, double t) {
  const int n = h.hess.size();
  CenterGenerating gen;
  gen.t = t;
  const Mat hess = h.hess.mat();
  if (hess.isZero(0.0)) {
    gen.b = SymmetricMatrix::zero(n);
    gen.alpha = -t * h.a;
    return gen;
  }
  const Mat a_field = symplectic_j(n / 2) * hess;
  const Mat m = mat_exp(a_field, t);
  gen.b = cayley_m_to_b(m);  // throws CausticEncountered at det(I + M) = 0
  if (h.a.isZero(0.0)) {
    gen.alpha = Vec::Zero(n);
    return gen;
  }
  if (near_singular(a_field)) {
    throw UnsupportedDegenerate(
        "center_generating: singular nonzero curvature with a nonzero drift term");
  }
  // alpha = 2 J B (J hess)^{-1} a  (equals -2 (I+M)^{-1} P(t) a; both forms
  // commute because M = e^{J hess t} commutes with J hess).
  const Vec y = a_field.partialPivLu().solve(h.a);
  gen.alpha = 2.0 * symplectic_j(n / 2) * (gen.b.mat() * y);
  return gen;
}

PhaseVec sp_mean_point(const PhaseVec& x, const CenterGenerating& mean_gen) {
  const int n = static_cast<int>(x.size());
  require(mean_gen.b.size() == n, "sp_mean_point: dimension mismatch");
  const Mat lhs = Mat::Identity(n, n) + symplectic_j(n / 2) * mean_gen.b.mat();
  const Vec rhs = x + 0.5 * mean_gen.alpha;
  if (near_singular(lhs)) {
    throw CausticEncountered("sp_mean_point: det(I + J B_mean) vanished");
  }
  return lhs.partialPivLu().solve(rhs);
}

PhaseVec sp_eta(const PhaseVec& x_bar, const CenterGenerating& mean_gen,
                const SymmetricMatrix& d_b, const Vec& d_alpha) {
  const int n = static_cast<int>(x_bar.size());
  require(d_b.size() == n && d_alpha.size() == n, "sp_eta: dimension mismatch");
  const Mat jmat = symplectic_j(n / 2);
  const Mat lhs = jmat - mean_gen.b.mat();
  const Vec rhs = 0.25 * (2.0 * d_b.mat() * x_bar + jmat * d_alpha);
  if (near_singular(lhs)) {
    throw CausticEncountered("sp_eta: (J - B_mean) is singular");
  }
  return lhs.partialPivLu().solve(rhs);
}

double sp_phase(const PhaseVec& x_bar, const SymmetricMatrix& d_b, const Vec& d_alpha) {
  return x_bar.dot(d_b.mat() * x_bar) + skew_product(d_alpha, x_bar);
}

double neglected_term(const PhaseVec& eta, const SymmetricMatrix& d_b) {
  return eta.dot(d_b.mat() * eta);
}

SpParams sp_perturbation_params(const PerturbationPair& pair, double t) {
  require(pair.quadratic(), "sp_perturbation_params: quadratic pair required");
  const QuadraticHamiltonian& mean = pair.mean.quad();
  const QuadraticHamiltonian& delta = pair.delta.quad();
  const int n = mean.hess.size();
  const Mat jmat = symplectic_j(n / 2);

  SpParams params;
  params.mean_gen = center_generating(mean, t);

  const Mat a_field = jmat * mean.hess.mat();
  const Mat m = mat_exp(a_field, t);
  // dB = 2 J (I+M)^{-1} dM (I+M)^{-1}, the exact first derivative of the
  // Cayley-form generating matrix along the perturbation direction.
  const Mat eye = Mat::Identity(n, n);
  const Mat k = solve_with_caustic_check(eye + m, eye, "sp_perturbation_params");
  const Mat dm = integral_conjugation(a_field, jmat * delta.hess.mat(), t);
  params.d_b = SymmetricMatrix::from_dense(2.0 * jmat * k * dm * k, 1e-6);

  const bool mean_drift_zero = mean.a.isZero(0.0);
  const bool delta_drift_zero = delta.a.isZero(0.0);
  if (mean_drift_zero && delta_drift_zero) {
    params.d_alpha = Vec::Zero(n);
    return params;
  }
  if (mean.hess.mat().isZero(0.0) && delta.hess.mat().isZero(0.0)) {
    params.d_alpha = -t * delta.a;
    return params;
  }
  if (near_singular(a_field)) {
    throw UnsupportedDegenerate(
        "sp_perturbation_params: drift terms with singular mean curvature");
  }
  // Product rule on alpha(s) = 2 J B(s) [J hess(s)]^{-1} a(s) along the
  // perturbation direction (hess + s*dhess, a + s*da) at s = 0.
  const auto lu = a_field.partialPivLu();
  const Vec y = lu.solve(mean.a);                              // (J hess)^{-1} a
  const Vec dinv_a = -lu.solve(jmat * delta.hess.mat() * y);   // d[(J hess)^{-1}] a
  const Vec da_term = lu.solve(delta.a);                       // (J hess)^{-1} da
  params.d_alpha = 2.0 * jmat *
                   (params.d_b.mat() * y + params.mean_gen.b.mat() * (dinv_a + da_term));
  return params;
}

SpData sp_reduce(const PerturbationPair& pair, const PhaseVec& x, double t) {
  const SpParams params = sp_perturbation_params(pair, t);
  SpData data;
  data.x_bar = sp_mean_point(x, params.mean_gen);
  data.eta = sp_eta(data.x_bar, params.mean_gen, params.d_b, params.d_alpha);
  data.s_q = sp_phase(data.x_bar, params.d_b, params.d_alpha);
  data.neglected = neglected_term(data.eta, params.d_b);

  // Weight from the quadratic form S_q(x_bar(x)) expressed in x: its half
  // Hessian is K^T dB K with K = (I + J B_mean)^{-1}.
  const int n = static_cast<int>(x.size());
  const Mat eye = Mat::Identity(n, n);
  const Mat jmat = symplectic_j(n / 2);
  const Mat k = solve_with_caustic_check(eye + jmat * params.mean_gen.b.mat(), eye,
                                         "sp_reduce");
  const Mat b_sp = k.transpose() * params.d_b.mat() * k;
  double det = 0.0;
  if (near_singular(eye + jmat * b_sp, &det)) {
    throw CausticEncountered("sp_reduce: amplitude determinant vanished");
  }
  data.weight = std::sqrt(std::abs(det));
  return data;
}

double delta_action_linear(const QuadraticHamiltonian& mean, const Vec& delta_a,
                           const PhaseVec& x, double t) {
  const int n = static_cast<int>(x.size());
  require(delta_a.size() == n && mean.hess.size() == n,
          "delta_action_linear: dimension mismatch");
  const Mat hess = mean.hess.mat();
  if (hess.isZero(0.0)) {
    return -t * skew_product(delta_a, x + (0.5 * t) * mean.a);
  }
  const Mat a_field = symplectic_j(n / 2) * hess;
  if (near_singular(a_field)) {
    throw UnsupportedDegenerate("delta_action_linear: singular nonzero mean curvature");
  }
  const auto lu = a_field.partialPivLu();
  const Mat m = mat_exp(a_field, t);
  const Vec inner = (Mat::Identity(n, n) - m) * (x + lu.solve(mean.a)) + t * mean.a;
  return skew_product(delta_a, lu.solve(inner));
}

double reference_action(RefPreset preset, double omega, double eps, const PhaseVec& x,
                        double t) {
  require(x.size() == 2, "reference_action: one degree of freedom only");
  const double p = x[0], q = x[1];
  const double wt = omega * t;
  if (preset == RefPreset::ho) {
    const double s = std::sin(wt);
    return 0.5 * eps * (q * q - p * p) * std::sin(2.0 * wt) + 2.0 * eps * p * q * s * s;
  }
  const double sh = std::sinh(wt);
  return -0.5 * eps * (q * q + p * p) * std::sinh(2.0 * wt) - 2.0 * eps * p * q * sh * sh;
}

namespace {

SymmetricMatrix reference_b_branch(RefPreset preset, double omega, double eps, double t,
                                   double sign) {
  require(std::abs(eps) < 1.0, "reference branch generating functions need |eps| < 1");
  SymmetricMatrix b(2);
  // The branch Hessians are diag(omega(1 + s*eps), +-omega(1 - s*eps)). A
  // diagonal quadratic flow has the exact generating function
  //     B = -tan(W t / 2) hess / W,   W^2 = +det hess  (trigonometric)
  //     B = -tanh(W t / 2) hess / W,  W^2 = -det hess  (hyperbolic)
  // and both branches of either oscillator pair share W = omega sqrt(1-eps^2).
  const double cap_w = omega * std::sqrt(1.0 - eps * eps);
  const double ratio = std::sqrt((1.0 + sign * eps) / (1.0 - sign * eps));
  if (preset == RefPreset::ho) {
    const double f = -std::tan(0.5 * cap_w * t);
    b.set(0, 0, f * ratio);
    b.set(1, 1, f / ratio);
  } else {
    const double g = std::tanh(0.5 * cap_w * t);
    b.set(0, 0, -g * ratio);
    b.set(1, 1, g / ratio);
  }
  return b;
}

}  // namespace

SymmetricMatrix reference_b_plus(RefPreset preset, double omega, double eps, double t) {
  return reference_b_branch(preset, omega, eps, t, +1.0);
}

SymmetricMatrix reference_b_minus(RefPreset preset, double omega, double eps, double t) {
  return reference_b_branch(preset, omega, eps, t, -1.0);
}

SymmetricMatrix reference_b_l(RefPreset preset, double omega, double eps, double t) {
  SymmetricMatrix b(2);
  const double wt = omega * t;
  if (preset == RefPreset::ho) {
    const double s = std::sin(wt);
    b.set(0, 0, -0.5 * eps * std::sin(2.0 * wt));
    b.set(1, 1, 0.5 * eps * std::sin(2.0 * wt));
    b.set(0, 1, eps * s * s);
  } else {
    const double sh = std::sinh(wt);
    b.set(0, 0, -0.5 * eps * std::sinh(2.0 * wt));
    b.set(1, 1, -0.5 * eps * std::sinh(2.0 * wt));
    b.set(0, 1, -eps * sh * sh);
  }
  return b;
}

LinearSympMap exact_echo_map(const PerturbationPair& pair, double t) {
  require(pair.quadratic(), "exact_echo_map: quadratic pair required");
  const LinearSympMap fwd = quad_flow_map(pair.minus().quad(), t);
  const LinearSympMap bwd = quad_flow_map(pair.plus().quad(), t);
  const int n = static_cast<int>(fwd.m.rows());
  const auto lu = bwd.m.partialPivLu();  // flow maps are invertible (det = 1)
  LinearSympMap echo;
  echo.m = lu.solve(fwd.m);
  Vec d_fwd = fwd.has_shift() ? fwd.shift : Vec(Vec::Zero(n));
  Vec d_bwd = bwd.has_shift() ? bwd.shift : Vec(Vec::Zero(n));
  echo.shift = lu.solve(Vec(d_fwd - d_bwd));
  return echo;
}

PhaseVec exact_echo_chord(const PerturbationPair& pair, const PhaseVec& center, double t) {
  const LinearSympMap echo = exact_echo_map(pair, t);
  const int n = static_cast<int>(center.size());
  const Mat lhs = Mat::Identity(n, n) + echo.m;
  if (near_singular(lhs)) {
    throw CausticEncountered("exact_echo_chord: center equation is singular");
  }
  const Vec y = lhs.partialPivLu().solve(Vec(2.0 * center - echo.shift));
  return echo.apply(y) - y;
}

}  // namespace loschmidt
