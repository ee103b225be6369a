#include "loschmidt/phasespace.hpp"

#include <cmath>

namespace loschmidt {

Mat symplectic_j(int dof) {
  require(dof >= 1, "symplectic_j: dof must be >= 1");
  const int n = 2 * dof;
  Mat j = Mat::Zero(n, n);
  for (int i = 0; i < dof; ++i) {
    j(i, dof + i) = -1.0;  // p-row picks -q component
    j(dof + i, i) = 1.0;   // q-row picks +p component
  }
  return j;
}

double skew_product(const PhaseVec& a, const PhaseVec& b) {
  require(a.size() == b.size() && a.size() % 2 == 0 && a.size() >= 2,
          "skew_product: arguments must share an even dimension");
  const int dof = static_cast<int>(a.size()) / 2;
  // a . (J b) with J in (p,q) block order, written out to avoid the matmul.
  double s = 0.0;
  for (int i = 0; i < dof; ++i) {
    s += a[dof + i] * b[i] - a[i] * b[dof + i];
  }
  return s;
}

double triangle_area(const PhaseVec& x1, const PhaseVec& x2, const PhaseVec& x3) {
  return 0.5 * skew_product(x2 - x1, x3 - x1);
}

SymmetricMatrix SymmetricMatrix::from_dense(const Mat& m, double tol) {
  require(m.rows() == m.cols(), "SymmetricMatrix: matrix must be square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > tol * scale) {
    throw std::invalid_argument("SymmetricMatrix: input asymmetry " +
                                std::to_string(asym) + " exceeds tolerance");
  }
  SymmetricMatrix out(static_cast<int>(m.rows()));
  for (int i = 0; i < m.rows(); ++i) {
    out.m_(i, i) = m(i, i);
    for (int j = 0; j < i; ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      out.m_(i, j) = v;
      out.m_(j, i) = v;
    }
  }
  return out;
}

SymmetricMatrix SymmetricMatrix::operator+(const SymmetricMatrix& o) const {
  SymmetricMatrix out(size());
  out.m_ = m_ + o.m_;
  return out;
}

SymmetricMatrix SymmetricMatrix::operator-(const SymmetricMatrix& o) const {
  SymmetricMatrix out(size());
  out.m_ = m_ - o.m_;
  return out;
}

SymmetricMatrix SymmetricMatrix::scaled(double s) const {
  SymmetricMatrix out(size());
  out.m_ = s * m_;
  return out;
}

bool near_singular(const Mat& x, double* det_out) {
  const int n = static_cast<int>(x.rows());
  const double det = x.determinant();
  if (det_out) *det_out = det;
  // An exactly vanishing determinant is singular at any scale; the relative
  // threshold below would underflow to zero for tiny (or zero) matrices.
  if (det == 0.0) return true;
  const double scale = x.norm() / std::sqrt(static_cast<double>(n));
  const double floor_scale = std::max(scale, 1e-300);
  return std::abs(det) < 1e-12 * std::pow(floor_scale, n);
}

namespace {

// Singularity test for a sum I + A against the scale of its operands. When A
// approaches -I the sum's own norm collapses, and a test relative to that
// collapsed norm misreads catastrophic cancellation as a healthy tiny matrix;
// the identity operand pins the relevant scale at >= 1.
bool identity_sum_singular(const Mat& a, const Mat& sum, double* det_out) {
  const int n = static_cast<int>(a.rows());
  const double det = sum.determinant();
  if (det_out) *det_out = det;
  if (det == 0.0) return true;
  const double scale = std::max(1.0, a.norm() / std::sqrt(static_cast<double>(n)));
  return std::abs(det) < 1e-12 * std::pow(scale, n);
}

}  // namespace

LinearSympMap cayley_b_to_m(const SymmetricMatrix& b, bool flip_convention) {
  const int n = b.size();
  require(n % 2 == 0 && n >= 2, "cayley_b_to_m: B must be 2L x 2L");
  const Mat j = symplectic_j(n / 2);
  const Mat jb = j * b.mat();
  const Mat plus = Mat::Identity(n, n) + jb;
  const Mat minus = Mat::Identity(n, n) - jb;
  double det = 0.0;
  if (identity_sum_singular(jb, plus, &det)) {
    throw CausticEncountered("cayley_b_to_m: det(I + JB) = " + std::to_string(det) +
                             " is singular (caustic)");
  }
  LinearSympMap map;
  // Production convention: M = (I - JB)(I + JB)^{-1}. The flipped variant is
  // the self-test negative control and deliberately disagrees with the
  // harmonic-oscillator exponential.
  if (!flip_convention) {
    map.m = minus * plus.partialPivLu().solve(Mat::Identity(n, n));
  } else {
    map.m = plus * minus.partialPivLu().solve(Mat::Identity(n, n));
  }
  return map;
}

SymmetricMatrix cayley_m_to_b(const Mat& m) {
  const int n = static_cast<int>(m.rows());
  require(m.cols() == n && n % 2 == 0 && n >= 2, "cayley_m_to_b: M must be 2L x 2L");
  const Mat plus = Mat::Identity(n, n) + m;
  double det = 0.0;
  if (identity_sum_singular(m, plus, &det)) {
    throw CausticEncountered("cayley_m_to_b: det(I + M) = " + std::to_string(det) +
                             " is singular (caustic)");
  }
  const Mat j = symplectic_j(n / 2);
  const Mat jb = (Mat::Identity(n, n) - m) * plus.partialPivLu().solve(Mat::Identity(n, n));
  // B = J^{-1} (JB) = -J (JB); symmetry holds exactly for symplectic M and is
  // enforced (with a tolerance for roundoff) by from_dense.
  return SymmetricMatrix::from_dense(-j * jb, 1e-9);
}

double symplectic_defect(const Mat& m) {
  const int n = static_cast<int>(m.rows());
  const Mat j = symplectic_j(n / 2);
  return (m.transpose() * j * m - j).cwiseAbs().maxCoeff();
}

}  // namespace loschmidt
