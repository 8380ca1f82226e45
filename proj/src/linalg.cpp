#include "exnexus/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "exnexus/errors.hpp"

namespace exnexus {

Matrix3 Matrix3::identity() { return diagonal(1.0, 1.0, 1.0); }

Matrix3 Matrix3::diagonal(Complex d0, Complex d1, Complex d2) {
  Matrix3 m;
  m(0, 0) = d0;
  m(1, 1) = d1;
  m(2, 2) = d2;
  return m;
}

Matrix3 Matrix3::outer(std::size_t row, std::size_t col) {
  Matrix3 m;
  m(row, col) = 1.0;
  return m;
}

Vec3 Matrix3::column(std::size_t c) const { return {(*this)(0, c), (*this)(1, c), (*this)(2, c)}; }
Vec3 Matrix3::row(std::size_t r) const { return {(*this)(r, 0), (*this)(r, 1), (*this)(r, 2)}; }

Complex Matrix3::trace() const { return m_[0] + m_[4] + m_[8]; }

Complex Matrix3::determinant() const {
  const auto& a = *this;
  return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
         a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
         a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

Matrix3 Matrix3::adjugate() const {
  const auto& a = *this;
  Matrix3 r;
  r(0, 0) = a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1);
  r(0, 1) = a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2);
  r(0, 2) = a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1);
  r(1, 0) = a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2);
  r(1, 1) = a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0);
  r(1, 2) = a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2);
  r(2, 0) = a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0);
  r(2, 1) = a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1);
  r(2, 2) = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  return r;
}

Matrix3 Matrix3::adjoint() const {
  Matrix3 r;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) r(i, j) = std::conj((*this)(j, i));
  return r;
}

double Matrix3::frobenius_norm() const {
  double s = 0.0;
  for (const auto& z : m_) s += std::norm(z);
  return std::sqrt(s);
}

bool Matrix3::is_finite() const {
  return std::all_of(m_.begin(), m_.end(),
                     [](Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

Matrix3& Matrix3::operator+=(const Matrix3& o) {
  for (std::size_t i = 0; i < 9; ++i) m_[i] += o.m_[i];
  return *this;
}

Matrix3& Matrix3::operator-=(const Matrix3& o) {
  for (std::size_t i = 0; i < 9; ++i) m_[i] -= o.m_[i];
  return *this;
}

Matrix3& Matrix3::operator*=(Complex s) {
  for (auto& z : m_) z *= s;
  return *this;
}

Matrix3 operator*(const Matrix3& a, const Matrix3& b) {
  Matrix3 r;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      r(i, j) = a(i, 0) * b(0, j) + a(i, 1) * b(1, j) + a(i, 2) * b(2, j);
  return r;
}

Vec3 operator*(const Matrix3& a, const Vec3& v) {
  return {a(0, 0) * v[0] + a(0, 1) * v[1] + a(0, 2) * v[2],
          a(1, 0) * v[0] + a(1, 1) * v[1] + a(1, 2) * v[2],
          a(2, 0) * v[0] + a(2, 1) * v[1] + a(2, 2) * v[2]};
}

Complex vdot(const Vec3& a, const Vec3& b) {
  return std::conj(a[0]) * b[0] + std::conj(a[1]) * b[1] + std::conj(a[2]) * b[2];
}

double norm(const Vec3& v) { return std::sqrt(std::norm(v[0]) + std::norm(v[1]) + std::norm(v[2])); }

Vec3 normalized(const Vec3& v) {
  const double n = norm(v);
  if (n == 0.0) throw std::domain_error("normalized: zero vector");
  return (1.0 / n) * v;
}

Vec3 operator*(Complex s, const Vec3& v) { return {s * v[0], s * v[1], s * v[2]}; }
Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

Vec3 solve(const Matrix3& a_in, const Vec3& b_in) {
  Matrix3 a = a_in;
  Vec3 b = b_in;
  for (std::size_t k = 0; k < 3; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < 3; ++i)
      if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
    if (a(piv, k) == Complex{}) throw std::domain_error("solve: singular matrix");
    if (piv != k) {
      for (std::size_t j = 0; j < 3; ++j) std::swap(a(k, j), a(piv, j));
      std::swap(b[k], b[piv]);
    }
    for (std::size_t i = k + 1; i < 3; ++i) {
      const Complex f = a(i, k) / a(k, k);
      for (std::size_t j = k; j < 3; ++j) a(i, j) -= f * a(k, j);
      b[i] -= f * b[k];
    }
  }
  Vec3 x{};
  for (int k = 2; k >= 0; --k) {
    Complex s = b[k];
    for (std::size_t j = k + 1; j < 3; ++j) s -= a(k, j) * x[j];
    x[k] = s / a(k, k);
  }
  return x;
}

Matrix3 inverse(const Matrix3& a) {
  Matrix3 r;
  for (std::size_t c = 0; c < 3; ++c) {
    Vec3 e{};
    e[c] = 1.0;
    const Vec3 x = solve(a, e);
    for (std::size_t i = 0; i < 3; ++i) r(i, c) = x[i];
  }
  return r;
}

std::vector<Vec3> null_space(const Matrix3& a_in, double tol) {
  Matrix3 a = a_in;
  const double thresh = tol * std::max(1.0, a_in.frobenius_norm());
  std::array<std::size_t, 3> cols{0, 1, 2};
  std::size_t rank = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    std::size_t pr = k, pc = k;
    double best = -1.0;
    for (std::size_t i = k; i < 3; ++i)
      for (std::size_t j = k; j < 3; ++j)
        if (std::abs(a(i, j)) > best) {
          best = std::abs(a(i, j));
          pr = i;
          pc = j;
        }
    if (best <= thresh) break;
    for (std::size_t j = 0; j < 3; ++j) std::swap(a(k, j), a(pr, j));
    for (std::size_t i = 0; i < 3; ++i) std::swap(a(i, k), a(i, pc));
    std::swap(cols[k], cols[pc]);
    for (std::size_t i = k + 1; i < 3; ++i) {
      const Complex f = a(i, k) / a(k, k);
      for (std::size_t j = k; j < 3; ++j) a(i, j) -= f * a(k, j);
    }
    ++rank;
  }

  std::vector<Vec3> basis;
  for (std::size_t free = rank; free < 3; ++free) {
    Vec3 y{};
    y[free] = 1.0;
    for (int k = static_cast<int>(rank) - 1; k >= 0; --k) {
      Complex s{};
      for (std::size_t j = k + 1; j < 3; ++j) s += a(k, j) * y[j];
      y[k] = -s / a(k, k);
    }
    Vec3 x{};
    for (std::size_t j = 0; j < 3; ++j) x[cols[j]] = y[j];
    // Gram-Schmidt against the vectors already collected.
    for (const auto& b : basis) x = x - vdot(b, x) * b;
    if (norm(x) > 0.0) basis.push_back(normalized(x));
  }
  return basis;
}

namespace {

Complex cubic_value(Complex x, Complex a, Complex b, Complex c) { return ((x + a) * x + b) * x + c; }

// Principal cube root via polar form.
Complex cube_root(Complex z) {
  if (z == Complex{}) return {};
  return std::polar(std::cbrt(std::abs(z)), std::arg(z) / 3.0);
}

bool by_imag_then_real(Complex l, Complex r) {
  if (l.imag() != r.imag()) return l.imag() < r.imag();
  return l.real() < r.real();
}

}  // namespace

std::array<Complex, 3> solve_cubic(Complex a, Complex b, Complex c) {
  const Complex d0 = a * a - 3.0 * b;
  const Complex d1 = 2.0 * a * a * a - 9.0 * a * b + 27.0 * c;
  const Complex disc = std::sqrt(d1 * d1 - 4.0 * d0 * d0 * d0);
  // Take the sign that avoids cancellation.
  const Complex plus = 0.5 * (d1 + disc);
  const Complex minus = 0.5 * (d1 - disc);
  const Complex cc = cube_root(std::abs(plus) >= std::abs(minus) ? plus : minus);

  std::array<Complex, 3> roots;
  if (cc == Complex{}) {
    roots.fill(-a / 3.0);
  } else {
    const Complex xi = std::polar(1.0, 2.0 * std::numbers::pi / 3.0);
    Complex rot = 1.0;
    for (auto& r : roots) {
      const Complex ck = rot * cc;
      r = -(a + ck + d0 / ck) / 3.0;
      rot *= xi;
    }
  }

  for (auto& r : roots) {
    const Complex f = cubic_value(r, a, b, c);
    const Complex fp = (3.0 * r + 2.0 * a) * r + b;
    if (fp == Complex{}) continue;
    const Complex cand = r - f / fp;
    if (std::abs(cubic_value(cand, a, b, c)) < std::abs(f)) r = cand;
  }
  // Rounding-level components would otherwise decide the sort order.
  double scale = 0.0;
  for (const auto& r : roots) scale = std::max(scale, std::abs(r));
  const double snap = 16.0 * std::numeric_limits<double>::epsilon() * scale;
  for (auto& r : roots)
    r = Complex(std::abs(r.real()) <= snap ? 0.0 : r.real(), std::abs(r.imag()) <= snap ? 0.0 : r.imag());
  std::sort(roots.begin(), roots.end(), by_imag_then_real);
  return roots;
}

std::array<Complex, 3> characteristic_coefficients(const Matrix3& m) {
  const Complex minors = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0) + m(0, 0) * m(2, 2) -
                         m(0, 2) * m(2, 0) + m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
  return {-m.trace(), minors, -m.determinant()};
}

double EigenSystem::min_gap() const {
  return std::min({std::abs(values[0] - values[1]), std::abs(values[0] - values[2]),
                   std::abs(values[1] - values[2])});
}

namespace {

// Largest-modulus component real and positive.
Vec3 fix_phase(const Vec3& v) {
  std::size_t k = 0;
  for (std::size_t i = 1; i < 3; ++i)
    if (std::abs(v[i]) > std::abs(v[k]) * (1.0 + 1e-12)) k = i;
  const Complex ph = std::abs(v[k]) > 0.0 ? std::conj(v[k]) / std::abs(v[k]) : Complex{1.0};
  return ph * v;
}

// k-th null vector candidate for (m - lambda I): largest adjugate column,
// otherwise the pivoted null space.
Vec3 null_vector(const Matrix3& shifted, std::size_t copy_index, bool from_rows) {
  const Matrix3 adj = shifted.adjugate();
  Vec3 best{};
  double best_norm = -1.0;
  for (std::size_t k = 0; k < 3; ++k) {
    const Vec3 cand = from_rows ? Vec3{std::conj(adj(k, 0)), std::conj(adj(k, 1)), std::conj(adj(k, 2))}
                                : adj.column(k);
    const double n = norm(cand);
    if (n > best_norm) {
      best_norm = n;
      best = cand;
    }
  }
  const double scale = std::max(1.0, shifted.frobenius_norm());
  if (best_norm >= 1e-14 * scale * scale) return fix_phase(normalized(best));

  const auto basis = null_space(from_rows ? shifted.adjoint() : shifted);
  if (!basis.empty()) return fix_phase(basis[copy_index % basis.size()]);
  if (best_norm > 0.0) return fix_phase(normalized(best));
  Vec3 e{};
  e[copy_index % 3] = 1.0;
  return e;
}

}  // namespace

EigenSystem eigensystem(const Matrix3& m) {
  if (!m.is_finite()) throw std::invalid_argument("eigensystem: non-finite matrix entry");
  EigenSystem es;
  const auto coeffs = characteristic_coefficients(m);
  es.values = solve_cubic(coeffs[0], coeffs[1], coeffs[2]);

  for (std::size_t k = 0; k < 3; ++k) {
    // Copies of a numerically repeated value draw different null-space vectors.
    std::size_t copy = 0;
    for (std::size_t j = 0; j < k; ++j)
      if (std::abs(es.values[j] - es.values[k]) <= 1e-10 * std::max(1.0, std::abs(es.values[k]))) ++copy;
    const Matrix3 shifted = m - es.values[k] * Matrix3::identity();
    es.vectors[k] = null_vector(shifted, copy, false);
    es.left[k] = null_vector(shifted, copy, true);
    const Vec3 r = m * es.vectors[k] - es.values[k] * es.vectors[k];
    es.residual = std::max(es.residual, norm(r));
  }

  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = i + 1; j < 3; ++j) {
      const double gap = std::abs(es.values[i] - es.values[j]);
      const double ov = std::abs(vdot(es.vectors[i], es.vectors[j]));
      if (gap < 1e-6 * std::max(1.0, std::abs(es.values[i])) && ov > 1.0 - 1e-6) es.coalesced = true;
    }
  return es;
}

void require_well_conditioned(const EigenSystem& es) {
  if (es.ill_conditioned())
    throw IllConditioned("eigensystem residual " + std::to_string(es.residual) + " exceeds bound");
}

double BranchMatch::min_overlap() const { return *std::min_element(overlaps.begin(), overlaps.end()); }

BranchMatch match_branches(const std::array<Vec3, 3>& prev_vectors,
                           const std::array<Complex, 3>& prev_values, const EigenSystem& next) {
  std::array<std::array<double, 3>, 3> ov{};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) ov[i][j] = std::abs(vdot(prev_vectors[i], next.vectors[j]));

  std::array<int, 3> p{0, 1, 2};
  BranchMatch best;
  double best_score = -1.0;
  double best_dist = 0.0;
  do {
    double score = 0.0, dist = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      score += ov[j][p[j]];
      dist += std::abs(prev_values[j] - next.values[p[j]]);
    }
    const bool better = score > best_score + 1e-12 ||
                        (std::abs(score - best_score) <= 1e-12 && dist < best_dist);
    if (better) {
      best_score = score;
      best_dist = dist;
      best.perm = p;
    }
  } while (std::next_permutation(p.begin(), p.end()));
  for (std::size_t j = 0; j < 3; ++j) best.overlaps[j] = ov[j][best.perm[j]];
  return best;
}

EigenSystem permuted(const EigenSystem& es, const std::array<int, 3>& perm) {
  EigenSystem out = es;
  for (std::size_t j = 0; j < 3; ++j) {
    out.values[j] = es.values[perm[j]];
    out.vectors[j] = es.vectors[perm[j]];
    out.left[j] = es.left[perm[j]];
  }
  return out;
}

}  // namespace exnexus
