#include "exnexus/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "exnexus/parallel.hpp"

namespace exnexus {

namespace {

double one_norm(const Matrix3& a) {
  double best = 0.0;
  for (std::size_t c = 0; c < 3; ++c)
    best = std::max(best, std::abs(a(0, c)) + std::abs(a(1, c)) + std::abs(a(2, c)));
  return best;
}

void check_state(const Vec3& psi0) {
  if (std::abs(norm(psi0) - 1.0) > 1e-9) throw std::invalid_argument("initial state must have unit norm");
}

void check_grid(std::span<const double> t) {
  if (t.empty()) throw std::invalid_argument("time grid is empty");
  if (!(t[0] >= 0.0)) throw std::invalid_argument("time grid must start at t >= 0");
  for (std::size_t k = 1; k < t.size(); ++k)
    if (!(t[k] >= t[k - 1])) throw std::invalid_argument("time grid must be non-decreasing");
}

void push_state(DynamicsTrace& tr, double t, const Vec3& psi) {
  tr.times.push_back(t);
  tr.states.push_back(psi);
  const std::array<double, 3> pop{std::norm(psi[0]), std::norm(psi[1]), std::norm(psi[2])};
  tr.populations.push_back(pop);
  tr.total.push_back(pop[0] + pop[1] + pop[2]);
}

}  // namespace

Matrix3 matrix_exponential(const Matrix3& a) {
  // theta_6 ~ 0.5 keeps the [6/6] truncation error below double rounding.
  const double nrm = one_norm(a);
  int squarings = 0;
  if (nrm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(nrm / 0.5)));
  const Matrix3 x = a * Complex{std::ldexp(1.0, -squarings)};

  // c_k = (2m-k)! m! / ((2m)! k! (m-k)!), m = 6
  static constexpr std::array<double, 7> c{1.0,
                                           1.0 / 2.0,
                                           5.0 / 44.0,
                                           1.0 / 66.0,
                                           1.0 / 792.0,
                                           1.0 / 15840.0,
                                           1.0 / 665280.0};
  Matrix3 num = Matrix3::identity() * Complex{c[0]};
  Matrix3 den = num;
  Matrix3 power = Matrix3::identity();
  for (std::size_t k = 1; k < c.size(); ++k) {
    power = power * x;
    num += power * Complex{c[k]};
    den += power * Complex{(k % 2 ? -1.0 : 1.0) * c[k]};
  }
  Matrix3 r = inverse(den) * num;
  for (int s = 0; s < squarings; ++s) r = r * r;
  return r;
}

namespace {
constexpr double kMaxBasisCondition = 1e3;
}

Propagator::Propagator(const Matrix3& h, Propagation method) : h_(h) {
  if (method != Propagation::exponential) {
    const auto es = eigensystem(h);
    Matrix3 v;
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 3; ++c) v(r, c) = es.vectors[c][r];
    bool usable = es.min_gap() > 1e-6 && !es.ill_conditioned();
    Matrix3 vinv;
    if (usable || method == Propagation::eigen) {
      vinv = inverse(v);
      // rounding grows like cond(V)^2; near an EP the basis is nearly parallel
      usable = usable && v.frobenius_norm() * vinv.frobenius_norm() <= kMaxBasisCondition;
    }
    if (method == Propagation::eigen || usable) {
      eigen_ = true;
      values_ = es.values;
      vectors_ = v;
      inverse_ = vinv;
    }
  }
}

Vec3 Propagator::apply(double t, const Vec3& psi) const {
  if (t == 0.0) return psi;
  if (!eigen_) return matrix_exponential(h_ * Complex{0.0, -t}) * psi;
  Vec3 c = inverse_ * psi;
  for (std::size_t k = 0; k < 3; ++k) c[k] *= std::exp(Complex{0.0, -t} * values_[k]);
  return vectors_ * c;
}

Vec3 basis_state(int level) {
  if (level < 1 || level > 3) throw std::invalid_argument("basis_state: level must be 1, 2 or 3");
  Vec3 v{};
  v[level - 1] = 1.0;
  return v;
}

DynamicsTrace evolve(const ParamPoint& p, const Vec3& psi0, std::span<const double> t_grid,
                     Propagation method) {
  check_state(psi0);
  check_grid(t_grid);
  const Propagator prop(build_hamiltonian(p), method);
  DynamicsTrace tr;
  for (double t : t_grid) push_state(tr, t, prop.apply(t, psi0));
  return tr;
}

DynamicsTrace evolve_piecewise(double w, double gamma1, double gamma2, double t_m, const Vec3& psi0,
                               std::span<const double> t_grid) {
  if (!(t_m >= 0.0)) throw std::invalid_argument("evolve_piecewise: t_m must be >= 0");
  const ParamPoint p1{w, gamma1};
  const ParamPoint p2{w, gamma2};
  if (t_m == 0.0) return evolve(p2, psi0, t_grid);
  if (gamma1 == gamma2) return evolve(p1, psi0, t_grid);

  check_state(psi0);
  check_grid(t_grid);
  const Propagator first(build_hamiltonian(p1));
  const Propagator second(build_hamiltonian(p2));
  const Vec3 at_switch = first.apply(t_m, psi0);
  DynamicsTrace tr;
  for (double t : t_grid)
    push_state(tr, t, t < t_m ? first.apply(t, psi0) : second.apply(t - t_m, at_switch));
  return tr;
}

std::vector<SnapshotPoint> decay_snapshot(double w, std::span<const double> gamma_grid, double t0) {
  if (!(t0 > 0.0)) throw std::invalid_argument("decay_snapshot: t0 must be > 0");
  const std::array<double, 1> t{t0};
  return parallel_map(gamma_grid.size(), [&](std::size_t k) {
    const auto tr = evolve({w, gamma_grid[k]}, basis_state(2), t);
    return SnapshotPoint{gamma_grid[k], tr.total[0]};
  });
}

const char* to_string(Observable o) {
  switch (o) {
    case Observable::total: return "N";
    case Observable::n1: return "N1";
    case Observable::n2: return "N2";
    case Observable::n3: return "N3";
  }
  return "?";
}

Observable observable_from_string(const std::string& s) {
  if (s == "N") return Observable::total;
  if (s == "N1") return Observable::n1;
  if (s == "N2") return Observable::n2;
  if (s == "N3") return Observable::n3;
  throw std::invalid_argument("unknown observable label '" + s + "'");
}

double observe(const DynamicsTrace& tr, std::size_t k, Observable o) {
  switch (o) {
    case Observable::total: return tr.total[k];
    case Observable::n1: return tr.populations[k][0];
    case Observable::n2: return tr.populations[k][1];
    case Observable::n3: return tr.populations[k][2];
  }
  return 0.0;
}

MeasurementSet MeasurementSet::restricted_to(Observable o) const {
  MeasurementSet out = *this;
  out.records.clear();
  for (const auto& r : records)
    if (r.label == o) out.records.push_back(r);
  return out;
}

std::vector<double> uniform_grid(double t_max, std::size_t n) {
  if (n < 2) throw std::invalid_argument("uniform_grid: need n >= 2");
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k) g[k] = t_max * static_cast<double>(k) / static_cast<double>(n - 1);
  return g;
}

namespace {

void add_records(MeasurementSet& set, const DynamicsTrace& tr, std::span<const Observable> labels,
                 double sigma, int reps, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> draws;
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    for (Observable o : labels) {
      const double truth = observe(tr, k, o);
      MeasurementRecord rec{tr.times[k], o, truth, 0.0, reps};
      if (sigma > 0.0) {
        draws.resize(reps);
        double sum = 0.0;
        for (auto& x : draws) {
          x = std::max(0.0, truth + sigma * gauss(rng));
          sum += x;
        }
        rec.mean = sum / reps;
        double ss = 0.0;
        for (double x : draws) ss += (x - rec.mean) * (x - rec.mean);
        rec.sd = reps > 1 ? std::sqrt(ss / (reps - 1)) : 0.0;
      }
      set.records.push_back(rec);
    }
  }
}

void check_noise(double sigma, int reps) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be >= 0");
  if (reps < 1) throw std::invalid_argument("repetitions must be >= 1");
}

}  // namespace

MeasurementSet synth_dataset(double w, double gamma1, double gamma2, double t_m, double noise_sigma,
                             int repetitions, std::span<const double> t_grid, Rng& rng,
                             int initial_level) {
  check_noise(noise_sigma, repetitions);
  const auto tr = evolve_piecewise(w, gamma1, gamma2, t_m, basis_state(initial_level), t_grid);
  MeasurementSet set;
  set.w = w;
  set.nominal_gamma = gamma1;
  set.provenance = Provenance{gamma1, gamma2, t_m, noise_sigma, repetitions, std::nullopt, initial_level};
  constexpr std::array labels{Observable::total, Observable::n2, Observable::n3};
  add_records(set, tr, labels, noise_sigma, repetitions, rng);
  return set;
}

MeasurementSet synth_calibration(double gamma, double noise_sigma, int repetitions,
                                 std::span<const double> t_grid, Rng& rng) {
  check_noise(noise_sigma, repetitions);
  const auto tr = evolve({0.0, gamma}, basis_state(3), t_grid);
  MeasurementSet set;
  set.w = 0.0;
  set.nominal_gamma = gamma;
  set.provenance = Provenance{gamma, gamma, 0.0, noise_sigma, repetitions, std::nullopt, 3};
  constexpr std::array labels{Observable::n3};
  add_records(set, tr, labels, noise_sigma, repetitions, rng);
  return set;
}

}  // namespace exnexus
