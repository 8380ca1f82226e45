#include "exnexus/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "exnexus/errors.hpp"
#include "exnexus/model.hpp"
#include "exnexus/parallel.hpp"
#include "exnexus/spectral_atlas.hpp"

namespace exnexus {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMinOverlap = 0.5;

double wrap_pi(double x) {
  double r = std::remainder(x, kTwoPi);
  if (r <= -std::numbers::pi) r += kTwoPi;
  return r;
}

}  // namespace

const char* to_string(PerturbationKind k) { return k == PerturbationKind::diagonal ? "diag" : "mixed"; }

PerturbationCase PerturbationCase::diagonal() { return {PerturbationKind::diagonal, Matrix3::outer(2, 2)}; }

PerturbationCase PerturbationCase::mixed() {
  Matrix3 h;
  h(0, 2) = kI;
  h(2, 0) = -kI;
  h(1, 0) = std::numbers::sqrt3 / 3.0;
  h(1, 2) = std::sqrt(6.0) / 6.0;
  return {PerturbationKind::mixed, h};
}

PerturbationCase PerturbationCase::of(PerturbationKind k) {
  return k == PerturbationKind::diagonal ? diagonal() : mixed();
}

Matrix3 nexus_hamiltonian() { return build_hamiltonian(locate_ex().location); }

EigenSystem perturbed_spectrum(const PerturbationCase& pc, double eps, double theta) {
  if (!(eps >= 0.0)) throw std::invalid_argument("perturbed_spectrum: eps must be >= 0");
  const Complex z = std::polar(eps, theta);
  return eigensystem(nexus_hamiltonian() + z * pc.h1);
}

std::array<ScalingFit, 3> scaling_exponents(const PerturbationCase& pc, double theta,
                                            std::span<const double> eps_grid) {
  if (eps_grid.size() < 8) throw std::invalid_argument("scaling_exponents: need >= 8 eps values");
  const bool up = eps_grid[1] > eps_grid[0];
  for (std::size_t k = 0; k < eps_grid.size(); ++k) {
    if (eps_grid[k] < 1e-5 * (1 - 1e-12) || eps_grid[k] > 1e-2 * (1 + 1e-12))
      throw std::invalid_argument("scaling_exponents: eps outside [1e-5, 1e-2]");
    if (k > 0 && ((eps_grid[k] > eps_grid[k - 1]) != up || eps_grid[k] == eps_grid[k - 1]))
      throw std::invalid_argument("scaling_exponents: eps grid must be strictly monotone");
  }

  const Complex e_ex = locate_ex().value;
  const std::size_t n = eps_grid.size();
  std::array<std::vector<double>, 3> logdev;
  std::vector<double> logeps(n);
  EigenSystem cur = perturbed_spectrum(pc, eps_grid[0], theta);
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) {
      const auto next = perturbed_spectrum(pc, eps_grid[k], theta);
      const auto m = match_branches(cur.vectors, cur.values, next);
      if (m.min_overlap() < kMinOverlap)
        throw TrackingLost("scaling_exponents: overlap " + std::to_string(m.min_overlap()) +
                           " at eps=" + std::to_string(eps_grid[k]));
      cur = permuted(next, m.perm);
    }
    logeps[k] = std::log(eps_grid[k]);
    for (std::size_t j = 0; j < 3; ++j) logdev[j].push_back(std::log(std::abs(cur.values[j] - e_ex)));
  }

  double mx = 0.0;
  for (double x : logeps) mx += x;
  mx /= n;
  double sxx = 0.0;
  for (double x : logeps) sxx += (x - mx) * (x - mx);

  std::array<ScalingFit, 3> fits;
  for (std::size_t j = 0; j < 3; ++j) {
    double my = 0.0;
    for (double y : logdev[j]) my += y;
    my /= n;
    double sxy = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      sxy += (logeps[k] - mx) * (logdev[j][k] - my);
      syy += (logdev[j][k] - my) * (logdev[j][k] - my);
    }
    fits[j].branch_id = static_cast<int>(j);
    fits[j].exponent = sxy / sxx;
    fits[j].fit_quality = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    fits[j].eps_min = std::min(eps_grid.front(), eps_grid.back());
    fits[j].eps_max = std::max(eps_grid.front(), eps_grid.back());
  }
  return fits;
}

TransportPhase transport_phase(std::span<const Vec3> right, std::span<const Vec3> left) {
  if (right.size() != left.size() || right.size() < 3)
    throw std::invalid_argument("transport_phase: need matching right/left paths of length >= 3");
  // Gauge: the component that is largest at the start is kept real-positive.
  std::size_t ref = 0;
  for (std::size_t i = 1; i < 3; ++i)
    if (std::abs(right[0][i]) > std::abs(right[0][ref])) ref = i;
  auto gauged = [&](std::size_t k) {
    const Vec3& v = right[k % right.size()];
    const double a = std::abs(v[ref]);
    if (a == 0.0) throw TrackingLost("transport_phase: gauge component vanished");
    return (std::conj(v[ref]) / a) * v;
  };

  Complex sum{};
  TransportPhase out;
  Vec3 r_k = gauged(0);
  for (std::size_t k = 0; k < right.size(); ++k) {
    const Vec3 r_next = gauged(k + 1);
    const Complex step = std::log(vdot(left[k], r_next) / vdot(left[k], r_k));
    out.max_step = std::max(out.max_step, std::abs(step.imag()));
    sum += step;
    r_k = r_next;
  }
  out.phase = -sum.imag();
  out.holonomy = wrap_pi(out.phase);
  out.loss = sum.real();
  return out;
}

std::vector<BerryResult> berry_phase(const PerturbationCase& pc, double eps, std::size_t n_samples) {
  if (!(eps > 0.0)) throw std::invalid_argument("berry_phase: eps must be > 0");
  if (n_samples < 256) throw std::invalid_argument("berry_phase: n_samples must be >= 256");

  constexpr std::size_t kMaxCycles = 3;
  const std::size_t steps = kMaxCycles * n_samples;
  const auto systems = parallel_map(steps + 1, [&](std::size_t k) {
    const double theta = kTwoPi * static_cast<double>(k) / static_cast<double>(n_samples);
    auto es = perturbed_spectrum(pc, eps, theta);
    require_well_conditioned(es);
    return es;
  });

  // index[k][j]: eigen index in systems[k] carried by branch j.
  std::vector<std::array<int, 3>> index(steps + 1);
  index[0] = {0, 1, 2};
  EigenSystem cur = systems[0];
  for (std::size_t k = 1; k <= steps; ++k) {
    const auto m = match_branches(cur.vectors, cur.values, systems[k]);
    if (m.min_overlap() < kMinOverlap)
      throw TrackingLost("berry_phase: overlap " + std::to_string(m.min_overlap()) + " at step " +
                         std::to_string(k));
    cur = permuted(systems[k], m.perm);
    index[k] = m.perm;
  }

  // After one loop branch j sits on the eigenpair that started as branch sigma[j].
  std::array<int, 3> sigma{};
  const auto& e0 = systems[0].values;
  for (std::size_t j = 0; j < 3; ++j) {
    const Complex v = systems[n_samples].values[index[n_samples][j]];
    std::size_t best = 0;
    for (std::size_t i = 1; i < 3; ++i)
      if (std::abs(e0[i] - v) < std::abs(e0[best] - v)) best = i;
    sigma[j] = static_cast<int>(best);
  }

  std::vector<BerryResult> results;
  for (std::size_t j = 0; j < 3; ++j) {
    int cycles = 1;
    for (int b = sigma[j]; b != static_cast<int>(j) && cycles <= 3; b = sigma[b]) ++cycles;
    if (cycles > 3) throw TrackingLost("berry_phase: branch permutation is inconsistent");

    const std::size_t len = static_cast<std::size_t>(cycles) * n_samples;
    std::vector<Vec3> right(len), left(len);
    for (std::size_t k = 0; k < len; ++k) {
      right[k] = systems[k].vectors[index[k][j]];
      left[k] = systems[k].left[index[k][j]];
    }
    const auto tp = transport_phase(right, left);
    if (tp.max_step > std::numbers::pi / 4.0)
      throw TrackingLost("berry_phase: per-step phase exceeds pi/4; increase n_samples");

    BerryResult r;
    r.branch_id = static_cast<int>(j);
    r.image_after_one_cycle = sigma[j];
    r.cycles_to_closure = cycles;
    r.phase = tp.phase;
    r.holonomy = tp.holonomy;
    r.loss = tp.loss;
    r.loop_radius = eps;
    r.n_samples = n_samples;
    r.start_value = systems[0].values[j];
    r.closure_error = std::abs(systems[len].values[index[len][j]] - r.start_value);
    results.push_back(r);
  }
  return results;
}

}  // namespace exnexus
