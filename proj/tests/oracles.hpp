#pragma once

// Independent reference computations for the tests. Nothing here calls the
// library's eigen or root machinery: Eigen's iterative QR, RK4 stepping and
// brute-force scans stand in for the closed forms.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

namespace oracle {

using cd = std::complex<double>;

inline Eigen::Matrix3cd hamiltonian(double w, double g) {
  Eigen::Matrix3cd h = Eigen::Matrix3cd::Zero();
  h(0, 1) = h(1, 0) = 1.0;
  h(1, 2) = h(2, 1) = w;
  h(2, 2) = cd(0.0, -g);
  return h;
}

inline std::array<cd, 3> eigenvalues(const Eigen::Matrix3cd& m) {
  Eigen::ComplexEigenSolver<Eigen::Matrix3cd> es(m, false);
  const auto v = es.eigenvalues();
  return {v(0), v(1), v(2)};
}

// Roots of x^3 + a x^2 + b x + c from the companion matrix.
inline std::array<cd, 3> cubic_roots(cd a, cd b, cd c) {
  Eigen::Matrix3cd comp = Eigen::Matrix3cd::Zero();
  comp(0, 0) = -a;
  comp(0, 1) = -b;
  comp(0, 2) = -c;
  comp(1, 0) = 1.0;
  comp(2, 1) = 1.0;
  return eigenvalues(comp);
}

// Largest distance under the best matching of two 3-element multisets.
inline double multiset_distance(std::array<cd, 3> x, std::array<cd, 3> y) {
  std::array<int, 3> p{0, 1, 2};
  double best = std::numeric_limits<double>::infinity();
  do {
    double d = 0.0;
    for (int i = 0; i < 3; ++i) d = std::max(d, std::abs(x[i] - y[p[i]]));
    best = std::min(best, d);
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

// Largest |Re| over the spectrum: zero between the arcs (three imaginary
// eigenvalues), positive outside.
inline double max_real(double w, double g) {
  double m = 0.0;
  for (auto z : eigenvalues(hamiltonian(w, g))) m = std::max(m, std::abs(z.real()));
  return m;
}

inline double min_gap(double w, double g) {
  const auto v = eigenvalues(hamiltonian(w, g));
  return std::min({std::abs(v[0] - v[1]), std::abs(v[0] - v[2]), std::abs(v[1] - v[2])});
}

// EP2 gammas at fixed w by scanning the real-part indicator and bisecting
// each change between a complex pair and an imaginary triple.
inline std::vector<double> ep_gammas(double w, double g_max, int scan = 4000, double thresh = 1e-5) {
  auto complex_pair = [&](double g) { return max_real(w, g) > thresh; };
  std::vector<double> out;
  double prev = 1e-9;
  bool prev_state = complex_pair(prev);
  for (int i = 1; i <= scan; ++i) {
    const double g = g_max * i / scan;
    const bool s = complex_pair(g);
    if (s != prev_state) {
      double lo = prev, hi = g;
      for (int k = 0; k < 200 && hi - lo > 1e-15 * hi; ++k) {
        const double mid = 0.5 * (lo + hi);
        (complex_pair(mid) == prev_state ? lo : hi) = mid;
      }
      out.push_back(0.5 * (lo + hi));
    }
    prev = g;
    prev_state = s;
  }
  return out;
}

// Fixed-step classical RK4 for psi' = -i H psi.
inline std::vector<Eigen::Vector3cd> rk4(const Eigen::Matrix3cd& h, Eigen::Vector3cd psi, double t_max,
                                         int steps_per_unit, const std::vector<double>& sample_times) {
  const Eigen::Matrix3cd a = cd(0.0, -1.0) * h;
  std::vector<Eigen::Vector3cd> out;
  double t = 0.0;
  const double dt = 1.0 / steps_per_unit;
  for (double ts : sample_times) {
    while (t + dt <= ts + 1e-15) {
      const Eigen::Vector3cd k1 = a * psi;
      const Eigen::Vector3cd k2 = a * (psi + 0.5 * dt * k1);
      const Eigen::Vector3cd k3 = a * (psi + 0.5 * dt * k2);
      const Eigen::Vector3cd k4 = a * (psi + dt * k3);
      psi += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t += dt;
    }
    const double rest = ts - t;
    Eigen::Vector3cd p = psi;
    if (rest > 0.0) {
      const Eigen::Vector3cd k1 = a * p;
      const Eigen::Vector3cd k2 = a * (p + 0.5 * rest * k1);
      const Eigen::Vector3cd k3 = a * (p + 0.5 * rest * k2);
      const Eigen::Vector3cd k4 = a * (p + rest * k3);
      p += rest / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    out.push_back(p);
  }
  (void)t_max;
  return out;
}

// det(H - x I) sampled at four points and solved for the monic cubic's
// coefficients (a, b, c).
inline std::array<cd, 3> interpolated_char_poly(const Eigen::Matrix3cd& h) {
  const std::array<cd, 4> xs{cd(0.3, 0.1), cd(-1.2, 0.7), cd(2.1, -0.4), cd(0.5, 1.9)};
  Eigen::Matrix4cd v;
  Eigen::Vector4cd rhs;
  for (int i = 0; i < 4; ++i) {
    const cd x = xs[i];
    // det(H - xI) = -(x^3 + a x^2 + b x + c)
    rhs(i) = -(h - x * Eigen::Matrix3cd::Identity()).determinant();
    v(i, 0) = x * x * x;
    v(i, 1) = x * x;
    v(i, 2) = x;
    v(i, 3) = 1.0;
  }
  const Eigen::Vector4cd coef = v.fullPivLu().solve(rhs);
  return {coef(1) / coef(0), coef(2) / coef(0), coef(3) / coef(0)};
}

}  // namespace oracle
