#pragma once

// Fixed-size complex linear algebra for three-state problems.

#include <array>
#include <complex>
#include <cstddef>
#include <vector>

namespace exnexus {

using Complex = std::complex<double>;
using Vec3 = std::array<Complex, 3>;

inline constexpr Complex kI{0.0, 1.0};

class Matrix3 {
 public:
  Matrix3() = default;

  static Matrix3 identity();
  static Matrix3 diagonal(Complex d0, Complex d1, Complex d2);
  // |row><col| with unit weight.
  static Matrix3 outer(std::size_t row, std::size_t col);

  Complex& operator()(std::size_t r, std::size_t c) { return m_[3 * r + c]; }
  const Complex& operator()(std::size_t r, std::size_t c) const { return m_[3 * r + c]; }

  Vec3 column(std::size_t c) const;
  Vec3 row(std::size_t r) const;

  Complex trace() const;
  Complex determinant() const;
  Matrix3 adjugate() const;
  Matrix3 adjoint() const;
  double frobenius_norm() const;
  bool is_finite() const;

  Matrix3& operator+=(const Matrix3& o);
  Matrix3& operator-=(const Matrix3& o);
  Matrix3& operator*=(Complex s);

  friend Matrix3 operator+(Matrix3 a, const Matrix3& b) { return a += b; }
  friend Matrix3 operator-(Matrix3 a, const Matrix3& b) { return a -= b; }
  friend Matrix3 operator*(Matrix3 a, Complex s) { return a *= s; }
  friend Matrix3 operator*(Complex s, Matrix3 a) { return a *= s; }
  friend Matrix3 operator*(const Matrix3& a, const Matrix3& b);
  friend Vec3 operator*(const Matrix3& a, const Vec3& v);
  friend bool operator==(const Matrix3&, const Matrix3&) = default;

 private:
  std::array<Complex, 9> m_{};
};

// <a|b>, conjugate-linear in the first argument.
Complex vdot(const Vec3& a, const Vec3& b);
double norm(const Vec3& v);
Vec3 normalized(const Vec3& v);
Vec3 operator*(Complex s, const Vec3& v);
Vec3 operator+(const Vec3& a, const Vec3& b);
Vec3 operator-(const Vec3& a, const Vec3& b);

// Solves a x = b by Gaussian elimination with partial pivoting.
Vec3 solve(const Matrix3& a, const Vec3& b);
Matrix3 inverse(const Matrix3& a);

// Orthonormal basis of the numerical null space of a, found by Gaussian
// elimination with full pivoting. Pivots below tol * max(1, |a|_F) count as zero.
std::vector<Vec3> null_space(const Matrix3& a, double tol = 1e-12);

// Roots of x^3 + a x^2 + b x + c, Cardano with one Newton polish per root,
// sorted by (imag, real). Repeated roots are returned with multiplicity.
std::array<Complex, 3> solve_cubic(Complex a, Complex b, Complex c);

// Coefficients (a, b, c) of det(x I - m) = x^3 + a x^2 + b x + c.
std::array<Complex, 3> characteristic_coefficients(const Matrix3& m);

inline constexpr double kIllConditionedResidual = 1e-6;

struct EigenSystem {
  std::array<Complex, 3> values{};
  // Right eigenvectors, unit Euclidean norm.
  std::array<Vec3, 3> vectors{};
  // Left eigenvectors u with u^H m = lambda u^H, unit norm.
  std::array<Vec3, 3> left{};
  // max_k |m v_k - lambda_k v_k|
  double residual = 0.0;
  // Some pair coalesced (values and vectors both merged).
  bool coalesced = false;

  bool ill_conditioned() const { return residual > kIllConditionedResidual; }
  double min_gap() const;
};

// Eigenpairs of a 3x3 complex matrix. Eigenvalues come from solve_cubic on
// the characteristic polynomial; vectors from the largest column (row) of
// adj(m - lambda I), with a pivoted null-space fallback when the adjugate
// vanishes (diagonalizable degeneracy).
EigenSystem eigensystem(const Matrix3& m);

// Throws IllConditioned when es.residual exceeds kIllConditionedResidual.
void require_well_conditioned(const EigenSystem& es);

// Branch matching between consecutive eigensystems: perm[j] is the index in
// `next` continuing branch j of `prev`. Maximizes sum_j |<prev_j|next_perm(j)>|
// over all 3! assignments, ties (within 1e-12) broken by summed eigenvalue
// distance.
struct BranchMatch {
  std::array<int, 3> perm{0, 1, 2};
  std::array<double, 3> overlaps{};
  double min_overlap() const;
};
BranchMatch match_branches(const std::array<Vec3, 3>& prev_vectors,
                           const std::array<Complex, 3>& prev_values,
                           const EigenSystem& next);

// Reorders an eigensystem in place by a permutation from match_branches.
EigenSystem permuted(const EigenSystem& es, const std::array<int, 3>& perm);

}  // namespace exnexus
