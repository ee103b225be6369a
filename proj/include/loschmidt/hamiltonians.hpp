#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "loschmidt/common.hpp"
#include "loschmidt/phasespace.hpp"

namespace loschmidt {

/**
 * H(x) = x.hess.x / 2 + skew_product(a, x).
 *
 * The linear term is written through the skew product so that `a` is itself a
 * phase-space *drift velocity*: the flow it generates is x(t) = x + t a when
 * hess = 0 (gradient of a^x is -J a, and J(-J a) = a).
 */
struct QuadraticHamiltonian {
  SymmetricMatrix hess;
  PhaseVec a;

  int dof() const { return static_cast<int>(a.size()) / 2; }
  double value(const PhaseVec& x) const;
  PhaseVec gradient(const PhaseVec& x) const;
};

/**
 * Separable 1-dof polynomial form H(p, q) = sum_k kin[k] p^k + pot[k] q^k,
 * degree <= 4. This is the class of Hamiltonians the exact grid propagator
 * accepts (kinetic diagonal in p, potential diagonal in q).
 */
struct SeparablePoly {
  std::array<double, 5> kin{};
  std::array<double, 5> pot{};

  double value(double p, double q) const;
  double dkin(double p) const;  // dT/dp
  double dpot(double q) const;  // dV/dq
  double d2kin(double p) const;
  double d2pot(double q) const;
  SeparablePoly scaled(double s) const;
  static SeparablePoly sum(const SeparablePoly& x, double cx, const SeparablePoly& y, double cy);
};

/** Callable Hamiltonian with optional analytic derivatives. */
struct GeneralHamiltonian {
  int dof = 1;
  std::function<double(const PhaseVec&)> value;
  std::function<PhaseVec(const PhaseVec&)> gradient;  // empty -> finite differences
  std::function<Mat(const PhaseVec&)> hessian;        // empty -> finite differences
  std::optional<SeparablePoly> separable;             // set when the grid form is known
};

/**
 * Tagged union over the two Hamiltonian classes. Quadratic ones keep their
 * exact-coefficient identity (exact flows, exact action coefficients);
 * everything else goes through the general callable interface.
 */
class Hamiltonian {
 public:
  /// Empty placeholder (zero-dimensional quadratic) so that containers and
  /// record types can default-construct; every operation validates dimensions.
  Hamiltonian() = default;

  enum class Kind { quadratic, general };

  static Hamiltonian quadratic(SymmetricMatrix hess, PhaseVec a);
  static Hamiltonian general(GeneralHamiltonian g);

  Kind kind() const { return kind_; }
  bool is_quadratic() const { return kind_ == Kind::quadratic; }
  int dof() const;

  double value(const PhaseVec& x) const;
  PhaseVec gradient(const PhaseVec& x) const;
  Mat hessian(const PhaseVec& x) const;

  const QuadraticHamiltonian& quad() const;
  const GeneralHamiltonian& gen() const;

  /// Separable polynomial form if one is known (always derivable for
  /// 1-dof quadratics with no p-q cross term).
  std::optional<SeparablePoly> separable() const;

  /// cx * x + cy * y. Quadratic when both inputs are quadratic.
  static Hamiltonian combine(const Hamiltonian& x, double cx, const Hamiltonian& y, double cy);

 private:
  Kind kind_ = Kind::quadratic;
  QuadraticHamiltonian quad_;
  std::shared_ptr<const GeneralHamiltonian> gen_;
};

/// Hamiltonian vector field J grad H.
PhaseVec hamiltonian_field(const Hamiltonian& h, const PhaseVec& x);

/**
 * Forward/backward pair: mean = (H+ + H-)/2 drives the reference dynamics,
 * delta = H+ - H- is the perturbation whose time integral is the phase.
 */
struct PerturbationPair {
  Hamiltonian mean;
  Hamiltonian delta;

  int dof() const { return mean.dof(); }
  bool quadratic() const { return mean.is_quadratic() && delta.is_quadratic(); }
  Hamiltonian plus() const { return Hamiltonian::combine(mean, 1.0, delta, 0.5); }
  Hamiltonian minus() const { return Hamiltonian::combine(mean, 1.0, delta, -0.5); }
  PerturbationPair swapped() const;  // exchanges the forward/backward branches
};

PerturbationPair make_pair(const Hamiltonian& h_minus, const Hamiltonian& h_plus);

// Model presets (1 dof). omega > 0 throughout.
Hamiltonian preset_free();                     // H = p^2 / 2
Hamiltonian preset_harmonic(double omega);     // H = omega (p^2 + q^2) / 2
Hamiltonian preset_inverted(double omega);     // H = omega (p^2 - q^2) / 2
Hamiltonian preset_quartic(double lambda);     // H = p^2 / 2 + lambda q^4 / 4
Hamiltonian preset_linear(const PhaseVec& a);  // H = a ^ x (pure drift)

// Finite-difference fallbacks (central differences, per-component scaled steps).
PhaseVec fd_gradient(const std::function<double(const PhaseVec&)>& f, const PhaseVec& x);
Mat fd_hessian(const std::function<double(const PhaseVec&)>& f, const PhaseVec& x);

}  // namespace loschmidt
