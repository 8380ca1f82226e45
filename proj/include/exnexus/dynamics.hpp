#pragma once

// Non-Hermitian Schrodinger evolution psi(t) = exp(-i H t) psi0, population
// observables, and synthetic measurement sets for the two-rate loss model.

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "exnexus/linalg.hpp"
#include "exnexus/model.hpp"

namespace exnexus {

using Rng = std::mt19937_64;

// exp(a) by scaling and squaring around a [6/6] Pade approximant.
Matrix3 matrix_exponential(const Matrix3& a);

enum class Propagation { automatic, eigen, exponential };

// Applies exp(-i H t). Automatic uses the eigendecomposition when the minimum
// eigenvalue gap exceeds 1e-6 and the eigenvector basis has Frobenius
// condition number <= 1e3, and the matrix exponential otherwise (near or at
// exceptional points).
class Propagator {
 public:
  explicit Propagator(const Matrix3& h, Propagation method = Propagation::automatic);

  Vec3 apply(double t, const Vec3& psi) const;
  bool uses_eigenbasis() const { return eigen_; }

 private:
  Matrix3 h_;
  bool eigen_ = false;
  std::array<Complex, 3> values_{};
  Matrix3 vectors_;
  Matrix3 inverse_;
};

struct DynamicsTrace {
  std::vector<double> times;
  std::vector<Vec3> states;
  // N1, N2, N3 = |psi_i|^2
  std::vector<std::array<double, 3>> populations;
  std::vector<double> total;
};

Vec3 basis_state(int level);  // level in {1, 2, 3}

// t_grid non-decreasing with t_grid[0] >= 0; |psi0| = 1.
DynamicsTrace evolve(const ParamPoint& p, const Vec3& psi0, std::span<const double> t_grid,
                     Propagation method = Propagation::automatic);

// H(gamma1) for t < t_m, H(gamma2) afterwards, continuous at t_m.
DynamicsTrace evolve_piecewise(double w, double gamma1, double gamma2, double t_m, const Vec3& psi0,
                               std::span<const double> t_grid);

struct SnapshotPoint {
  double gamma = 0.0;
  double population = 0.0;
};

// Total population at t0 starting from |2>, per gamma.
std::vector<SnapshotPoint> decay_snapshot(double w, std::span<const double> gamma_grid, double t0);

enum class Observable { total, n1, n2, n3 };

const char* to_string(Observable o);  // "N", "N1", "N2", "N3"
Observable observable_from_string(const std::string& s);
double observe(const DynamicsTrace& tr, std::size_t k, Observable o);

struct MeasurementRecord {
  double t = 0.0;
  Observable label = Observable::total;
  double mean = 0.0;
  double sd = 0.0;
  int repetitions = 1;
};

// Generator truth for synthetic sets.
struct Provenance {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double t_m = 0.0;
  double noise_sigma = 0.0;
  int repetitions = 1;
  std::optional<std::uint64_t> seed;
  int initial_level = 2;
};

struct MeasurementSet {
  double w = 0.0;
  double nominal_gamma = 0.0;
  std::vector<MeasurementRecord> records;
  std::optional<Provenance> provenance;

  MeasurementSet restricted_to(Observable o) const;
};

// Uniform grid of n points over [0, t_max].
std::vector<double> uniform_grid(double t_max, std::size_t n);

// Repeated Gaussian draws (clipped at 0) around the noiseless two-rate model
// for N, N2 and N3 at every time, summarized as mean and sample sd.
// noise_sigma == 0 reproduces the model exactly.
MeasurementSet synth_dataset(double w, double gamma1, double gamma2, double t_m, double noise_sigma,
                             int repetitions, std::span<const double> t_grid, Rng& rng,
                             int initial_level = 2);

// Pure-decay calibration data: state |3> with no coupling, N3 only.
MeasurementSet synth_calibration(double gamma, double noise_sigma, int repetitions,
                                 std::span<const double> t_grid, Rng& rng);

}  // namespace exnexus
