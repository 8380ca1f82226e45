#include "exnexus/spectral_atlas.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "exnexus/parallel.hpp"

namespace exnexus {

namespace {

constexpr double kNexusW = 2.0 * std::numbers::sqrt2;

double reduced_cubic(double mu, double gamma, double q) {
  return ((mu - gamma) * mu + q) * mu - gamma;
}

double locator_residual(const ParamPoint& p) {
  const double q = p.w * p.w + 1.0;
  return std::abs(discriminant(p)) / (q * q * q);
}

// mu of the repeated root at an EP: a stationary point of the reduced cubic.
Complex degenerate_value(double w, double gamma) {
  const double q = w * w + 1.0;
  const double s = std::sqrt(std::max(0.0, gamma * gamma - 3.0 * q));
  const double m1 = (gamma + s) / 3.0;
  const double m2 = (gamma - s) / 3.0;
  const double mu =
      std::abs(reduced_cubic(m1, gamma, q)) <= std::abs(reduced_cubic(m2, gamma, q)) ? m1 : m2;
  return {0.0, -mu};
}

double bisect_root(double w, double lo, double hi) {
  double flo = discriminant({w, lo});
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = discriminant({w, mid});
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

const char* to_string(Arc a) {
  switch (a) {
    case Arc::lower: return "lower";
    case Arc::upper: return "upper";
    case Arc::nexus: return "nexus";
  }
  return "?";
}

double discriminant(const ParamPoint& p) {
  const double q = p.w * p.w + 1.0;
  const double g2 = p.gamma * p.gamma;
  return -4.0 * g2 * g2 + g2 * (q * q + 18.0 * q - 27.0) - 4.0 * q * q * q;
}

SpectralBranchSet sweep_spectrum(double w, std::span<const double> gamma_grid) {
  if (gamma_grid.size() < 2) throw std::invalid_argument("sweep_spectrum: need at least 2 grid points");
  for (std::size_t k = 1; k < gamma_grid.size(); ++k)
    if (!(gamma_grid[k] > gamma_grid[k - 1]))
      throw std::invalid_argument("sweep_spectrum: grid must be strictly increasing");

  const auto systems = parallel_map(gamma_grid.size(), [&](std::size_t k) {
    auto es = eigensystem(build_hamiltonian({w, gamma_grid[k]}));
    require_well_conditioned(es);
    return es;
  });

  SpectralBranchSet set;
  set.grid.assign(gamma_grid.begin(), gamma_grid.end());
  for (auto& b : set.branches) b.reserve(gamma_grid.size());
  EigenSystem cur = systems.front();
  for (std::size_t k = 0; k < systems.size(); ++k) {
    if (k > 0) {
      const auto m = match_branches(cur.vectors, cur.values, systems[k]);
      cur = permuted(systems[k], m.perm);
      set.overlaps.push_back(m.overlaps);
    }
    for (std::size_t j = 0; j < 3; ++j) {
      set.branches[j].push_back(cur.values[j]);
      set.vectors[j].push_back(cur.vectors[j]);
    }
    set.degenerate.push_back(cur.coalesced);
  }
  return set;
}

std::vector<EPRecord> locate_ep2(double w) {
  if (!(w > 0.0)) throw std::invalid_argument("locate_ep2: w must be positive");
  const double q = w * w + 1.0;
  const double b = q * q + 18.0 * q - 27.0;
  const double disc = b * b - 64.0 * q * q * q;
  const double tol = 1e-12 * b * b;
  if (disc < -tol || b <= 0.0) return {};

  if (disc <= tol) {
    const double gamma = std::sqrt(b / 8.0);
    EPRecord rec{3, {w, gamma}, {0.0, -gamma / 3.0}, Arc::nexus, 0.0};
    rec.locator_residual = locator_residual(rec.location);
    return {rec};
  }

  // Roots of 4 x^2 - b x + 4 q^3 = 0 in x = gamma^2; the product is q^3.
  const double x_hi = (b + std::sqrt(disc)) / 8.0;
  const double x_lo = q * q * q / x_hi;
  const double g_lo = std::sqrt(x_lo);
  const double g_hi = std::sqrt(x_hi);
  const double half = std::min(0.01 * g_lo, 0.45 * (g_hi - g_lo));

  std::vector<EPRecord> out;
  for (auto [g, arc] : {std::pair{g_lo, Arc::lower}, std::pair{g_hi, Arc::upper}}) {
    double refined = g;
    const double lo = g - half, hi = g + half;
    if (discriminant({w, lo}) * discriminant({w, hi}) < 0.0) refined = bisect_root(w, lo, hi);
    EPRecord rec{2, {w, refined}, degenerate_value(w, refined), arc, 0.0};
    rec.locator_residual = locator_residual(rec.location);
    out.push_back(rec);
  }
  return out;
}

EPRecord locate_ex() {
  // (mu - m)^3 = mu^3 - gamma mu^2 + q mu - gamma gives 3m = gamma,
  // 3m^2 = q, m^3 = gamma, hence m^2 = 3.
  const double m = std::numbers::sqrt3;
  const double gamma = 3.0 * m;
  const double w = std::sqrt(3.0 * m * m - 1.0);
  EPRecord rec{3, {w, gamma}, {0.0, -m}, Arc::nexus, 0.0};
  rec.locator_residual = locator_residual(rec.location);
  return rec;
}

ArcSet trace_arcs(double w_min, double w_max, std::size_t n) {
  if (n < 2) throw std::invalid_argument("trace_arcs: need at least 2 samples");
  if (w_min < kNexusW * (1.0 - 1e-12) || !(w_max > w_min))
    throw std::invalid_argument("trace_arcs: w range must lie in [2 sqrt 2, inf) and be non-empty");
  const auto per_w = parallel_map(n, [&](std::size_t k) {
    const double w = k + 1 == n ? w_max : w_min + (w_max - w_min) * static_cast<double>(k) / (n - 1);
    return locate_ep2(std::max(w, kNexusW));
  });
  ArcSet arcs;
  for (const auto& recs : per_w) {
    if (recs.size() == 1) {
      arcs.lower.push_back(recs[0]);
      arcs.upper.push_back(recs[0]);
    } else if (recs.size() == 2) {
      arcs.lower.push_back(recs[0]);
      arcs.upper.push_back(recs[1]);
    }
  }
  return arcs;
}

}  // namespace exnexus
