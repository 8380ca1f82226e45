#pragma once

// Spectra over parameter sweeps, EP2 location from the cubic discriminant,
// the two exceptional arcs and the nexus where they meet.

#include <array>
#include <span>
#include <vector>

#include "exnexus/linalg.hpp"
#include "exnexus/model.hpp"

namespace exnexus {

// Arcs are labeled by gamma ordering; asymptotically the lower arc follows
// the strong-coupling line gamma = 2w and the upper arc the Zeno parabola
// gamma = w^2 / 2.
enum class Arc { lower, upper, nexus };

const char* to_string(Arc a);

struct EPRecord {
  int order = 2;
  ParamPoint location;
  Complex value;
  Arc arc = Arc::lower;
  // |discriminant| / q^3 at the returned location.
  double locator_residual = 0.0;
};

struct SpectralBranchSet {
  std::vector<double> grid;
  std::array<std::vector<Complex>, 3> branches;
  std::array<std::vector<Vec3>, 3> vectors;
  // overlaps[k][j]: |<v_j(grid k)|v_j(grid k+1)>| along branch j.
  std::vector<std::array<double, 3>> overlaps;
  // Grid points where some pair coalesced (gap and vector overlap tests).
  std::vector<bool> degenerate;
};

// Spectrum at fixed w for an increasing gamma grid, branches followed by
// maximal eigenvector overlap.
SpectralBranchSet sweep_spectrum(double w, std::span<const double> gamma_grid);

// Discriminant of the real reduced cubic:
//   -4 g^4 + g^2 (q^2 + 18 q - 27) - 4 q^3,  q = w^2 + 1.
// Positive: three purely imaginary eigenvalues. Negative: one imaginary value
// plus a pair mirrored about the imaginary axis. Zero: degeneracy.
double discriminant(const ParamPoint& p);

// EP2s at fixed w, ordered by gamma. Empty below the nexus coupling, a single
// order-3 record at it.
std::vector<EPRecord> locate_ep2(double w);

// The exceptional nexus, from the triple-root conditions of the real cubic.
EPRecord locate_ex();

struct ArcSet {
  std::vector<EPRecord> lower;
  std::vector<EPRecord> upper;
};

// Samples both arcs at n uniformly spaced w in [w_min, w_max], w_min >= 2 sqrt 2.
ArcSet trace_arcs(double w_min, double w_max, std::size_t n);

}  // namespace exnexus
