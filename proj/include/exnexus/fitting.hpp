#pragma once

// Analysis chain for population data: single-rate calibration, the piecewise
// two-rate fit, the alpha exponent of the snapshot loss rate, and EP
// location from sampled eigenvalue curves.

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "exnexus/dynamics.hpp"
#include "exnexus/linalg.hpp"
#include "exnexus/spectral_atlas.hpp"

namespace exnexus {

// Least-squares gamma for N3(t) = exp(-2 gamma t) on the log scale, using the
// N3 records of `data`, each weighted by N3^2 (inverse variance of ln N3 under
// additive noise). Throws Degenerate when the records carry no decay
// information (constant values away from 1, or a single distinct time).
double fit_single_rate(const MeasurementSet& data);

struct SimplexOptions {
  int max_iterations = 500;
  // Stop when (f_worst - f_best) <= tolerance * |f_best|.
  double tolerance = 1e-8;
};

struct SimplexResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  // Best value of the initial simplex, then after each iteration; never increases.
  std::vector<double> history;
};

// Nelder-Mead with reflection 1, expansion 2, contraction 1/2, shrink 1/2.
SimplexResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                          std::vector<double> x0, std::vector<double> step,
                          const SimplexOptions& opt = {});

// pooled: one sigma per observable, sqrt(mean sd^2) over its records.
// per_record: each record's own sd (noisy when repetitions are few).
enum class Weighting { pooled, per_record };

struct FitOptions {
  // Observables entering the objective (any labeled subset of the data).
  std::vector<Observable> observables{Observable::total, Observable::n2};
  int initial_level = 2;
  Weighting weighting = Weighting::pooled;
  SimplexOptions simplex{};
};

struct FitResult {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double t_m = 0.0;
  double rss = 0.0;
  int iterations = 0;
  bool converged = false;
  // False when gamma1 and gamma2 agree within 2%: t_m then carries no information.
  bool t_m_identifiable = true;
  std::vector<Observable> observables;
  std::array<double, 3> initial{};
  std::vector<double> rss_history;
};

// Weighted (1/sigma^2, unit when sigma = 0) squared residuals of the two-rate model.
double two_rate_objective(const MeasurementSet& data, double w, double gamma1, double gamma2,
                          double t_m, const FitOptions& opt = {});

// Two-rate fit started from gamma1 = nominal, gamma2 = nominal / 2 and t_m at
// the first time the single-rate model H(nominal) misses the data by more than
// 3 sigma (midpoint of the time span when it never does).
FitResult fit_two_rate(const MeasurementSet& data, double w, double nominal_gamma,
                       const FitOptions& opt = {});

// Best single-rate H(gamma) fit with the same objective (gamma1 = gamma2).
FitResult fit_one_rate(const MeasurementSet& data, double w, double nominal_gamma,
                       const FitOptions& opt = {});

struct AlphaSample {
  double gamma = 0.0;
  double alpha = 0.0;
};

struct AlphaCurve {
  std::vector<AlphaSample> samples;
  double t0 = 0.0;
  double w = 0.0;
  // Gammas whose N(t0) was outside (0, 1) and were left out.
  std::vector<double> dropped;
  // Smoothing weight picked by leave-one-out cross-validation.
  double smoothing = 0.0;
};

// gamma_eff = -ln N(t0) / t0, alpha = d ln gamma_eff / d ln gamma on a
// natural smoothing spline through (ln gamma, ln gamma_eff).
AlphaCurve extract_alpha(std::span<const SnapshotPoint> snapshot, double t0, double w = 0.0);

struct EigenCurves {
  std::vector<double> gamma;
  std::vector<Complex> first;
  std::vector<Complex> second;
};

struct EPEstimate {
  double gamma_ep = 0.0;
  // Standard error of gamma_ep from the fit covariance.
  double std_error = 0.0;
  Complex lambda0;
  Complex coefficient;
  double rss = 0.0;
  std::size_t n_points = 0;
};

// Fits lambda_pm = lambda0 +- C sqrt(gamma - gamma_ep) to two sampled
// branches. Throws NoBracket when the samples do not straddle a degeneracy.
EPEstimate ep_from_eigencurves(const EigenCurves& curves);

// The pair of branches with the smallest gap inside [lo, hi], restricted to
// grid points in that window.
EigenCurves closest_pair(const SpectralBranchSet& set, double lo, double hi);

// Closest-pair curves around every interior local minimum of the smallest
// branch gap, half_width grid points to either side.
std::vector<EigenCurves> ep_windows(const SpectralBranchSet& set, std::size_t half_width);

}  // namespace exnexus
