#include "exnexus/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "exnexus/errors.hpp"

namespace exnexus {

ParamPoint::ParamPoint(double w_, double gamma_) : w(w_), gamma(gamma_) {
  if (!std::isfinite(w) || !std::isfinite(gamma))
    throw std::invalid_argument("ParamPoint: non-finite coordinate");
  if (w < 0.0 || gamma < 0.0)
    throw std::invalid_argument("ParamPoint: w and gamma must be non-negative (got w=" +
                                std::to_string(w) + ", gamma=" + std::to_string(gamma) + ")");
}

const char* to_string(Regime r) { return r == Regime::strong_coupling ? "strong-coupling" : "zeno"; }

std::array<Complex, 2> EffectiveTwoLevel::eigenvalues() const {
  const Complex a = entries[0][0], b = entries[0][1], c = entries[1][0], d = entries[1][1];
  const Complex mean = 0.5 * (a + d);
  const Complex root = std::sqrt(0.25 * (a - d) * (a - d) + b * c);
  std::array<Complex, 2> ev{mean - root, mean + root};
  std::sort(ev.begin(), ev.end(), [](Complex l, Complex r) {
    return l.imag() != r.imag() ? l.imag() < r.imag() : l.real() < r.real();
  });
  return ev;
}

Matrix3 build_hamiltonian(const ParamPoint& p) {
  Matrix3 h;
  h(0, 1) = 1.0;
  h(1, 0) = 1.0;
  h(1, 2) = p.w;
  h(2, 1) = p.w;
  h(2, 2) = Complex{0.0, -p.gamma};
  return h;
}

EffectiveTwoLevel effective_hamiltonian(const ParamPoint& p, Regime regime) {
  // Both forms are -i k I + [x sigma_x + i k sigma_z].
  double x = 0.0, k = 0.0;
  if (regime == Regime::strong_coupling) {
    x = p.w;
    k = 0.5 * p.gamma;
  } else {
    if (p.gamma == 0.0) throw DivisionByZero("effective_hamiltonian: Zeno form needs gamma > 0");
    x = 1.0;
    k = p.w * p.w / (2.0 * p.gamma);
  }
  EffectiveTwoLevel e;
  e.regime = regime;
  e.entries[0][0] = Complex{0.0, -k} + Complex{0.0, k};
  e.entries[0][1] = x;
  e.entries[1][0] = x;
  e.entries[1][1] = Complex{0.0, -k} - Complex{0.0, k};
  return e;
}

double ep2_condition(double w, Regime regime) {
  if (!(w > 0.0)) throw std::invalid_argument("ep2_condition: w must be positive");
  return regime == Regime::strong_coupling ? 2.0 * w : 0.5 * w * w;
}

CubicCoeffs char_poly_coeffs(const ParamPoint& p) {
  const double q = p.w * p.w + 1.0;
  CubicCoeffs cc;
  cc.a = Complex{0.0, p.gamma};
  cc.b = -q;
  cc.c = Complex{0.0, -p.gamma};
  cc.p = -p.gamma;
  cc.q = q;
  cc.r = -p.gamma;
  return cc;
}

Vec3 model_eigenvector(double w, Complex lambda) {
  if (!(w > 0.0)) throw std::invalid_argument("model_eigenvector: w must be positive");
  return normalized(Vec3{1.0, lambda, (lambda * lambda - 1.0) / w});
}

}  // namespace exnexus
