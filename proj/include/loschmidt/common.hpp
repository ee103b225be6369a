#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace loschmidt {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using cplx = std::complex<double>;

/// Phase-space points and vectors are ordered (p_1..p_L, q_1..q_L).
using PhaseVec = Eigen::VectorXd;

/// Thrown when a determinant required by a Cayley map or an amplitude
/// prefactor vanishes (focal point of the underlying linearized map).
class CausticEncountered : public std::runtime_error {
 public:
  explicit CausticEncountered(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown for structurally unsupported inputs (e.g. a singular quadratic
/// form combined with a shift that has no consistent affine flow).
class UnsupportedDegenerate : public std::runtime_error {
 public:
  explicit UnsupportedDegenerate(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown when a time integration fails to converge or leaves the domain
/// where the problem is well posed. Carries the failing step when known.
class IntegrationError : public std::runtime_error {
 public:
  explicit IntegrationError(const std::string& what, long step = -1)
      : std::runtime_error(what), failed_step(step) {}
  long failed_step;
};

/// Thrown by configuration parsing/validation (maps to CLI exit code 2).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace loschmidt
