#pragma once

// Three-state dissipative Hamiltonian and its closed-form reductions.
// Energies are in units of the 1<->2 coupling; times are dimensionless.

#include <array>

#include "exnexus/linalg.hpp"

namespace exnexus {

// Point in the (w, gamma) plane: w is the 2<->3 coupling ratio, gamma the
// loss rate of state 3. Both must be finite and non-negative.
struct ParamPoint {
  double w = 0.0;
  double gamma = 0.0;

  ParamPoint() = default;
  ParamPoint(double w_, double gamma_);
};

enum class Regime { strong_coupling, zeno };

const char* to_string(Regime r);

struct EffectiveTwoLevel {
  std::array<std::array<Complex, 2>, 2> entries{};
  Regime regime = Regime::strong_coupling;

  // Sorted by (imag, real).
  std::array<Complex, 2> eigenvalues() const;
};

// Characteristic polynomial lambda^3 + a lambda^2 + b lambda + c, and the
// real cubic mu^3 + p mu^2 + q mu + r obtained with lambda = -i mu.
struct CubicCoeffs {
  Complex a, b, c;
  double p = 0.0, q = 0.0, r = 0.0;
};

// Rows/cols 0,1,2 are states |1>,|2>,|3>.
Matrix3 build_hamiltonian(const ParamPoint& p);

// Strong coupling: the {|2>,|3>} block with |1> dropped.
// Zeno: the {|1>,|2>} block after adiabatic elimination of |3>; requires gamma > 0.
EffectiveTwoLevel effective_hamiltonian(const ParamPoint& p, Regime regime);

// EP2 line of the effective model: 2w (strong coupling) or w^2/2 (Zeno).
double ep2_condition(double w, Regime regime);

CubicCoeffs char_poly_coeffs(const ParamPoint& p);

// Unit right eigenvector of build_hamiltonian for eigenvalue lambda:
// proportional to (1, lambda, (lambda^2 - 1) / w). Requires w > 0.
Vec3 model_eigenvector(double w, Complex lambda);

}  // namespace exnexus
