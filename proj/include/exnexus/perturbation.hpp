#pragma once

// Perturbations of the nexus Hamiltonian H' = H_EX + z H1, z = eps e^{i theta}:
// splitting exponents and Berry phases around circles in the z plane.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "exnexus/linalg.hpp"

namespace exnexus {

enum class PerturbationKind { diagonal, mixed };

const char* to_string(PerturbationKind k);

struct PerturbationCase {
  PerturbationKind kind = PerturbationKind::diagonal;
  Matrix3 h1;

  // H1 = |3><3|
  static PerturbationCase diagonal();
  // H1 = i|1><3| - i|3><1| + (sqrt3/3)|2><1| + (sqrt6/6)|2><3|
  static PerturbationCase mixed();
  static PerturbationCase of(PerturbationKind k);
};

// build_hamiltonian at the nexus location.
Matrix3 nexus_hamiltonian();

EigenSystem perturbed_spectrum(const PerturbationCase& pc, double eps, double theta);

struct ScalingFit {
  int branch_id = 0;
  double exponent = 0.0;
  // Coefficient of determination of the log-log line.
  double fit_quality = 0.0;
  double eps_min = 0.0;
  double eps_max = 0.0;
};

// Slope of log|E'_j - E_EX| against log eps for each tracked branch.
// eps_grid: strictly monotone, >= 8 points inside [1e-5, 1e-2].
std::array<ScalingFit, 3> scaling_exponents(const PerturbationCase& pc, double theta,
                                            std::span<const double> eps_grid);

struct TransportPhase {
  // -Im sum_k ln(<L_k|R_{k+1}>/<L_k|R_k>) in a smooth gauge (radians).
  double phase = 0.0;
  // phase wrapped to (-pi, pi]; the gauge-invariant content.
  double holonomy = 0.0;
  // Re of the same sum: the non-unitary part of the complex phase.
  double loss = 0.0;
  // Largest |per-step phase| seen.
  double max_step = 0.0;
};

// Discrete biorthogonal transport phase of a closed path of right/left
// eigenvectors; the last step closes back onto right[0]. Invariant under
// per-sample phase changes of either input.
TransportPhase transport_phase(std::span<const Vec3> right, std::span<const Vec3> left);

struct BerryResult {
  int branch_id = 0;
  // Branch reached after a single theta cycle.
  int image_after_one_cycle = 0;
  int cycles_to_closure = 1;
  double phase = 0.0;
  double holonomy = 0.0;
  double loss = 0.0;
  double loop_radius = 0.0;
  std::size_t n_samples = 0;
  Complex start_value;
  // |E(after cycles_to_closure loops) - E(start)|
  double closure_error = 0.0;
};

// Follows the three branches around |z| = eps (n_samples per loop, starting at
// theta = 0) until each returns to itself. Throws TrackingLost when consecutive
// overlaps drop below 0.5 or a step phase exceeds pi/4.
std::vector<BerryResult> berry_phase(const PerturbationCase& pc, double eps, std::size_t n_samples);

}  // namespace exnexus
