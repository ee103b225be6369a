#include "loschmidt/hamiltonians.hpp"

#include <cmath>
#include <limits>

namespace loschmidt {

namespace {

double poly_eval(const std::array<double, 5>& c, double u) {
  // Horner, degree 4.
  return ((((c[4] * u) + c[3]) * u + c[2]) * u + c[1]) * u + c[0];
}

double poly_d1(const std::array<double, 5>& c, double u) {
  return ((4.0 * c[4] * u + 3.0 * c[3]) * u + 2.0 * c[2]) * u + c[1];
}

double poly_d2(const std::array<double, 5>& c, double u) {
  return (12.0 * c[4] * u + 6.0 * c[3]) * u + 2.0 * c[2];
}

}  // namespace

double QuadraticHamiltonian::value(const PhaseVec& x) const {
  return 0.5 * x.dot(hess.mat() * x) + skew_product(a, x);
}

PhaseVec QuadraticHamiltonian::gradient(const PhaseVec& x) const {
  // grad (a ^ x) = -J a.
  const int n = static_cast<int>(x.size());
  PhaseVec g = hess.mat() * x;
  const int dof = n / 2;
  for (int i = 0; i < dof; ++i) {
    // -J a with J = [[0, -I], [I, 0]] in (p, q) ordering: (-J a)_p = a_q, (-J a)_q = -a_p.
    g[i] += a[dof + i];
    g[dof + i] -= a[i];
  }
  return g;
}

double SeparablePoly::value(double p, double q) const {
  return poly_eval(kin, p) + poly_eval(pot, q);
}
double SeparablePoly::dkin(double p) const { return poly_d1(kin, p); }
double SeparablePoly::dpot(double q) const { return poly_d1(pot, q); }
double SeparablePoly::d2kin(double p) const { return poly_d2(kin, p); }
double SeparablePoly::d2pot(double q) const { return poly_d2(pot, q); }

SeparablePoly SeparablePoly::scaled(double s) const {
  SeparablePoly r;
  for (int k = 0; k < 5; ++k) {
    r.kin[k] = s * kin[k];
    r.pot[k] = s * pot[k];
  }
  return r;
}

SeparablePoly SeparablePoly::sum(const SeparablePoly& x, double cx, const SeparablePoly& y,
                                 double cy) {
  SeparablePoly r;
  for (int k = 0; k < 5; ++k) {
    r.kin[k] = cx * x.kin[k] + cy * y.kin[k];
    r.pot[k] = cx * x.pot[k] + cy * y.pot[k];
  }
  return r;
}

Hamiltonian Hamiltonian::quadratic(SymmetricMatrix hess, PhaseVec a) {
  require(hess.size() == a.size(), "quadratic Hamiltonian: hess and a dimensions differ");
  require(a.size() % 2 == 0, "phase-space dimension must be even");
  require(a.size() >= 2, "phase-space dimension must be at least 2");
  Hamiltonian h;
  h.kind_ = Kind::quadratic;
  h.quad_ = QuadraticHamiltonian{std::move(hess), std::move(a)};
  return h;
}

Hamiltonian Hamiltonian::general(GeneralHamiltonian g) {
  require(g.dof >= 1, "general Hamiltonian: dof must be >= 1");
  require(static_cast<bool>(g.value), "general Hamiltonian: value callable is required");
  Hamiltonian h;
  h.kind_ = Kind::general;
  h.gen_ = std::make_shared<const GeneralHamiltonian>(std::move(g));
  return h;
}

int Hamiltonian::dof() const {
  return kind_ == Kind::quadratic ? quad_.dof() : gen_->dof;
}

double Hamiltonian::value(const PhaseVec& x) const {
  require(x.size() == 2 * dof(), "Hamiltonian::value: wrong phase-space dimension");
  return kind_ == Kind::quadratic ? quad_.value(x) : gen_->value(x);
}

PhaseVec Hamiltonian::gradient(const PhaseVec& x) const {
  require(x.size() == 2 * dof(), "Hamiltonian::gradient: wrong phase-space dimension");
  if (kind_ == Kind::quadratic) return quad_.gradient(x);
  if (gen_->gradient) return gen_->gradient(x);
  return fd_gradient(gen_->value, x);
}

Mat Hamiltonian::hessian(const PhaseVec& x) const {
  require(x.size() == 2 * dof(), "Hamiltonian::hessian: wrong phase-space dimension");
  if (kind_ == Kind::quadratic) return quad_.hess.mat();
  if (gen_->hessian) return gen_->hessian(x);
  return fd_hessian(gen_->value, x);
}

const QuadraticHamiltonian& Hamiltonian::quad() const {
  require(kind_ == Kind::quadratic, "Hamiltonian is not quadratic");
  return quad_;
}

const GeneralHamiltonian& Hamiltonian::gen() const {
  require(kind_ == Kind::general, "Hamiltonian is not general");
  return *gen_;
}

std::optional<SeparablePoly> Hamiltonian::separable() const {
  if (kind_ == Kind::general) return gen_->separable;
  if (dof() != 1) return std::nullopt;
  const Mat h = quad_.hess.mat();
  if (std::abs(h(0, 1)) > 0.0) return std::nullopt;  // p-q coupling is not separable
  SeparablePoly s;
  s.kin[2] = 0.5 * h(0, 0);
  s.pot[2] = 0.5 * h(1, 1);
  // a ^ x = a_p q - a_q p.
  s.kin[1] = -quad_.a[1];
  s.pot[1] = quad_.a[0];
  return s;
}

Hamiltonian Hamiltonian::combine(const Hamiltonian& x, double cx, const Hamiltonian& y,
                                 double cy) {
  require(x.dof() == y.dof(), "combine: dof mismatch");
  if (x.is_quadratic() && y.is_quadratic()) {
    SymmetricMatrix hess = x.quad_.hess.scaled(cx) + y.quad_.hess.scaled(cy);
    PhaseVec a = cx * x.quad_.a + cy * y.quad_.a;
    return quadratic(std::move(hess), std::move(a));
  }
  GeneralHamiltonian g;
  g.dof = x.dof();
  // Capture copies; Hamiltonian is cheap to copy (shared_ptr for general parts).
  Hamiltonian xc = x, yc = y;
  g.value = [xc, cx, yc, cy](const PhaseVec& z) {
    return cx * xc.value(z) + cy * yc.value(z);
  };
  g.gradient = [xc, cx, yc, cy](const PhaseVec& z) -> PhaseVec {
    return cx * xc.gradient(z) + cy * yc.gradient(z);
  };
  g.hessian = [xc, cx, yc, cy](const PhaseVec& z) -> Mat {
    return cx * xc.hessian(z) + cy * yc.hessian(z);
  };
  const auto sx = x.separable();
  const auto sy = y.separable();
  if (sx && sy) g.separable = SeparablePoly::sum(*sx, cx, *sy, cy);
  return general(std::move(g));
}

PhaseVec hamiltonian_field(const Hamiltonian& h, const PhaseVec& x) {
  const PhaseVec g = h.gradient(x);
  const int dof = h.dof();
  PhaseVec f(2 * dof);
  // J grad H with J = [[0, -I], [I, 0]]: dp/dt = -dH/dq, dq/dt = dH/dp.
  for (int i = 0; i < dof; ++i) {
    f[i] = -g[dof + i];
    f[dof + i] = g[i];
  }
  return f;
}

PerturbationPair PerturbationPair::swapped() const {
  return PerturbationPair{mean, Hamiltonian::combine(delta, -1.0, delta, 0.0)};
}

PerturbationPair make_pair(const Hamiltonian& h_minus, const Hamiltonian& h_plus) {
  require(h_minus.dof() == h_plus.dof(), "make_pair: dof mismatch");
  PerturbationPair pair{Hamiltonian::combine(h_plus, 0.5, h_minus, 0.5),
                        Hamiltonian::combine(h_plus, 1.0, h_minus, -1.0)};
  return pair;
}

Hamiltonian preset_free() {
  SymmetricMatrix h = SymmetricMatrix::zero(2);
  h.set(0, 0, 1.0);
  return Hamiltonian::quadratic(h, PhaseVec::Zero(2));
}

Hamiltonian preset_harmonic(double omega) {
  require(omega > 0.0, "harmonic preset: omega must be positive");
  SymmetricMatrix h = SymmetricMatrix::zero(2);
  h.set(0, 0, omega);
  h.set(1, 1, omega);
  return Hamiltonian::quadratic(h, PhaseVec::Zero(2));
}

Hamiltonian preset_inverted(double omega) {
  require(omega > 0.0, "inverted preset: omega must be positive");
  SymmetricMatrix h = SymmetricMatrix::zero(2);
  h.set(0, 0, omega);
  h.set(1, 1, -omega);
  return Hamiltonian::quadratic(h, PhaseVec::Zero(2));
}

Hamiltonian preset_quartic(double lambda) {
  GeneralHamiltonian g;
  g.dof = 1;
  g.value = [lambda](const PhaseVec& x) {
    const double p = x[0], q = x[1];
    return 0.5 * p * p + 0.25 * lambda * q * q * q * q;
  };
  g.gradient = [lambda](const PhaseVec& x) -> PhaseVec {
    PhaseVec grad(2);
    grad[0] = x[0];
    grad[1] = lambda * x[1] * x[1] * x[1];
    return grad;
  };
  g.hessian = [lambda](const PhaseVec& x) -> Mat {
    Mat h = Mat::Zero(2, 2);
    h(0, 0) = 1.0;
    h(1, 1) = 3.0 * lambda * x[1] * x[1];
    return h;
  };
  SeparablePoly s;
  s.kin[2] = 0.5;
  s.pot[4] = 0.25 * lambda;
  g.separable = s;
  return Hamiltonian::general(std::move(g));
}

Hamiltonian preset_linear(const PhaseVec& a) {
  require(a.size() % 2 == 0 && a.size() >= 2, "linear preset: even dimension >= 2 required");
  return Hamiltonian::quadratic(SymmetricMatrix::zero(static_cast<int>(a.size())), a);
}

PhaseVec fd_gradient(const std::function<double(const PhaseVec&)>& f, const PhaseVec& x) {
  const int n = static_cast<int>(x.size());
  PhaseVec g(n);
  const double base = std::cbrt(std::numeric_limits<double>::epsilon());
  for (int i = 0; i < n; ++i) {
    const double h = base * std::max(1.0, std::abs(x[i]));
    PhaseVec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

Mat fd_hessian(const std::function<double(const PhaseVec&)>& f, const PhaseVec& x) {
  const int n = static_cast<int>(x.size());
  Mat hess(n, n);
  const double base = std::pow(std::numeric_limits<double>::epsilon(), 0.25);
  const double f0 = f(x);
  std::vector<double> steps(n);
  for (int i = 0; i < n; ++i) steps[i] = base * std::max(1.0, std::abs(x[i]));
  for (int i = 0; i < n; ++i) {
    const double hi = steps[i];
    PhaseVec xp = x, xm = x;
    xp[i] += hi;
    xm[i] -= hi;
    hess(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (hi * hi);
    for (int j = i + 1; j < n; ++j) {
      const double hj = steps[j];
      PhaseVec xpp = x, xpm = x, xmp = x, xmm = x;
      xpp[i] += hi; xpp[j] += hj;
      xpm[i] += hi; xpm[j] -= hj;
      xmp[i] -= hi; xmp[j] += hj;
      xmm[i] -= hi; xmm[j] -= hj;
      const double v = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * hi * hj);
      hess(i, j) = v;
      hess(j, i) = v;
    }
  }
  return hess;
}

}  // namespace loschmidt
