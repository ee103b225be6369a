#pragma once

#include "loschmidt/common.hpp"

namespace loschmidt {

/**
 * Phase-space conventions used throughout the library.
 *
 * A point in 2L-dimensional phase space is stored as x = (p_1..p_L, q_1..q_L).
 * The symplectic form is represented by the matrix
 *
 *     J = [ 0  -I ]
 *         [ I   0 ]
 *
 * in (p,q) block order, so that Hamilton's equations read xdot = J grad H,
 * i.e. pdot = -dH/dq and qdot = +dH/dp. J satisfies J^2 = -I, J^T = -J,
 * det J = 1.
 */
Mat symplectic_j(int dof);

/// Skew product a ^ x  =  a . (J x)  (antisymmetric, translation covariant).
double skew_product(const PhaseVec& a, const PhaseVec& b);

/// Symplectic area of the triangle with vertices x1, x2, x3:
/// half the skew product of two edge vectors. Sign encodes orientation.
double triangle_area(const PhaseVec& x1, const PhaseVec& x2, const PhaseVec& x3);

/**
 * Symmetric matrix with exactly mirrored storage: construction guarantees
 * m(i,j) and m(j,i) are the same double, so ||A - A^T|| is identically zero.
 */
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(int n) : m_(Mat::Zero(n, n)) {}

  /// Build from a dense matrix; off-diagonal pairs are averaged and mirrored.
  /// Throws if the asymmetry exceeds `tol` (relative to the matrix scale).
  static SymmetricMatrix from_dense(const Mat& m, double tol = 1e-12);

  /// Zero matrix of size n x n.
  static SymmetricMatrix zero(int n) { return SymmetricMatrix(n); }

  int size() const { return static_cast<int>(m_.rows()); }
  double operator()(int i, int j) const { return m_(i, j); }
  void set(int i, int j, double v) { m_(i, j) = v; m_(j, i) = v; }

  const Mat& mat() const { return m_; }

  SymmetricMatrix operator+(const SymmetricMatrix& o) const;
  SymmetricMatrix operator-(const SymmetricMatrix& o) const;
  SymmetricMatrix scaled(double s) const;

 private:
  Mat m_;
};

/// Linear symplectic map x -> M x (+ optional shift d for affine maps).
struct LinearSympMap {
  Mat m;
  Vec shift;  // zero-sized when the map is purely linear

  bool has_shift() const { return shift.size() > 0; }
  PhaseVec apply(const PhaseVec& x) const {
    return has_shift() ? PhaseVec(m * x + shift) : PhaseVec(m * x);
  }
};

/// Relative singularity test: |det X| < 1e-12 * ||X||^n with n = dim(X),
/// using the Frobenius-based scale ||X||_F / sqrt(n). Survives overall scaling.
bool near_singular(const Mat& x, double* det_out = nullptr);

/**
 * Cayley map from a symmetric center matrix B to the linear symplectic map
 *
 *     M = (I - JB)(I + JB)^{-1}.
 *
 * The sign convention is fixed by calibration against the harmonic
 * oscillator: for B = -tan(wt/2) I this yields M = exp(J w t) = cos(wt) I +
 * sin(wt) J (see the phase-space calibration tests). Throws
 * CausticEncountered when det(I + JB) vanishes; for symmetric B this equals
 * det(I - JB) identically.
 *
 * `flip_convention` inverts the map direction; it exists solely as a
 * negative-control hook for the self-test and must stay false in production.
 */
LinearSympMap cayley_b_to_m(const SymmetricMatrix& b, bool flip_convention = false);

/// Inverse Cayley map: JB = (I - M)(I + M)^{-1}, B = -J (I - M)(I + M)^{-1}.
/// Throws CausticEncountered when det(I + M) vanishes.
SymmetricMatrix cayley_m_to_b(const Mat& m);

/// Max-norm check of the symplectic condition M^T J M = J.
double symplectic_defect(const Mat& m);

}  // namespace loschmidt
