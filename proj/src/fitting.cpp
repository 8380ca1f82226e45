#include "exnexus/fitting.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "exnexus/errors.hpp"

namespace exnexus {

double fit_single_rate(const MeasurementSet& data) {
  const auto n3 = data.restricted_to(Observable::n3);
  if (n3.records.size() < 3) throw std::invalid_argument("fit_single_rate: need >= 3 N3 records");

  double stt = 0.0, sty = 0.0;
  double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin;
  std::vector<double> times;
  for (const auto& r : n3.records) {
    vmin = std::min(vmin, r.mean);
    vmax = std::max(vmax, r.mean);
    if (!(r.mean > 0.0)) continue;
    // var(ln N) ~ sigma^2 / N^2 for additive noise
    const double wt = r.mean * r.mean;
    stt += wt * r.t * r.t;
    sty += wt * r.t * std::log(r.mean);
    times.push_back(r.t);
  }
  std::sort(times.begin(), times.end());
  const auto distinct = std::unique(times.begin(), times.end()) - times.begin();
  if (distinct < 2 || stt == 0.0) throw Degenerate("fit_single_rate: no time spread in N3 data");
  if (vmax - vmin == 0.0 && std::abs(vmax - 1.0) > 1e-12)
    throw Degenerate("fit_single_rate: constant N3 away from N0 carries no decay information");
  // Weighted ln N3 = -2 gamma t through the origin, constrained to gamma >= 0.
  return std::max(0.0, -sty / (2.0 * stt));
}

SimplexResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                          std::vector<double> x0, std::vector<double> step, const SimplexOptions& opt) {
  const std::size_t n = x0.size();
  if (n == 0 || step.size() != n) throw std::invalid_argument("nelder_mead: bad dimensions");

  std::vector<std::vector<double>> pts(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step[i];
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fv[i] = f(pts[i]);

  auto order = [&] {
    std::vector<std::size_t> idx(n + 1);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    std::vector<std::vector<double>> p2;
    std::vector<double> f2;
    for (auto i : idx) {
      p2.push_back(pts[i]);
      f2.push_back(fv[i]);
    }
    pts.swap(p2);
    fv.swap(f2);
  };
  auto affine = [&](const std::vector<double>& a, const std::vector<double>& b, double t) {
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = a[i] + t * (b[i] - a[i]);
    return r;
  };

  SimplexResult res;
  order();
  while (true) {
    res.history.push_back(fv[0]);
    const double spread = fv[n] - fv[0];
    double diameter = 0.0, scale = 0.0;
    for (std::size_t i = 1; i <= n; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        diameter = std::max(diameter, std::abs(pts[i][k] - pts[0][k]));
        scale = std::max(scale, std::abs(pts[0][k]));
      }
    if (spread <= opt.tolerance * std::abs(fv[0]) || diameter <= 1e-13 * std::max(1.0, scale)) {
      res.converged = true;
      break;
    }
    if (res.iterations >= opt.max_iterations) break;
    ++res.iterations;

    std::vector<double> c(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) c[k] += pts[i][k] / static_cast<double>(n);

    const auto xr = affine(c, pts[n], -1.0);
    const double fr = f(xr);
    bool shrink = false;
    if (fr < fv[0]) {
      const auto xe = affine(c, pts[n], -2.0);
      const double fe = f(xe);
      if (fe < fr) {
        pts[n] = xe;
        fv[n] = fe;
      } else {
        pts[n] = xr;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      pts[n] = xr;
      fv[n] = fr;
    } else if (fr < fv[n]) {
      const auto xc = affine(c, xr, 0.5);
      const double fc = f(xc);
      if (fc <= fr) {
        pts[n] = xc;
        fv[n] = fc;
      } else {
        shrink = true;
      }
    } else {
      const auto xc = affine(c, pts[n], 0.5);
      const double fc = f(xc);
      if (fc < fv[n]) {
        pts[n] = xc;
        fv[n] = fc;
      } else {
        shrink = true;
      }
    }
    if (shrink)
      for (std::size_t i = 1; i <= n; ++i) {
        pts[i] = affine(pts[0], pts[i], 0.5);
        fv[i] = f(pts[i]);
      }
    order();
  }
  res.x = pts[0];
  res.value = fv[0];
  return res;
}

namespace {

struct Objective {
  std::vector<double> times;  // unique, sorted
  struct Term {
    std::size_t time_index;
    Observable label;
    double mean;
    double weight;
  };
  std::vector<Term> terms;
  std::vector<Observable> used;
  double w = 0.0;
  Vec3 psi0;

  Objective(const MeasurementSet& data, double w_, const FitOptions& opt) : w(w_) {
    psi0 = basis_state(opt.initial_level);
    for (const auto& r : data.records)
      if (std::find(opt.observables.begin(), opt.observables.end(), r.label) != opt.observables.end())
        times.push_back(r.t);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    std::array<double, 4> var_sum{}, count{};
    for (const auto& r : data.records) {
      var_sum[static_cast<int>(r.label)] += r.sd * r.sd;
      count[static_cast<int>(r.label)] += 1.0;
    }
    for (int o = 0; o < 4; ++o) pooled[o] = count[o] > 0.0 ? std::sqrt(var_sum[o] / count[o]) : 0.0;
    for (const auto& r : data.records) {
      if (std::find(opt.observables.begin(), opt.observables.end(), r.label) == opt.observables.end())
        continue;
      const auto idx = static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), r.t) - times.begin());
      const double s = sigma(r, opt.weighting);
      terms.push_back({idx, r.label, r.mean, s > 0.0 ? 1.0 / (s * s) : 1.0});
      if (std::find(used.begin(), used.end(), r.label) == used.end()) used.push_back(r.label);
    }
  }

  std::array<double, 4> pooled{};

  double sigma(const MeasurementRecord& r, Weighting wt) const {
    return wt == Weighting::pooled ? pooled[static_cast<int>(r.label)] : r.sd;
  }

  double operator()(double g1, double g2, double tm) const {
    const auto tr = evolve_piecewise(w, g1, g2, tm, psi0, times);
    double s = 0.0;
    for (const auto& t : terms) {
      const double r = t.mean - observe(tr, t.time_index, t.label);
      s += t.weight * r * r;
    }
    return s;
  }

  double t_lo() const { return times.front(); }
  double t_hi() const { return times.back(); }
};

constexpr double kPenalty = 1e300;

}  // namespace

double two_rate_objective(const MeasurementSet& data, double w, double gamma1, double gamma2, double t_m,
                          const FitOptions& opt) {
  const Objective obj(data, w, opt);
  if (obj.terms.empty()) throw std::invalid_argument("two_rate_objective: no records for selected observables");
  return obj(gamma1, gamma2, t_m);
}

FitResult fit_one_rate(const MeasurementSet& data, double w, double nominal_gamma, const FitOptions& opt) {
  const Objective obj(data, w, opt);
  if (obj.terms.empty()) throw std::invalid_argument("fit_one_rate: no records for selected observables");
  auto f = [&](std::span<const double> x) { return x[0] < 0.0 ? kPenalty : obj(x[0], x[0], 0.0); };
  const auto r = nelder_mead(f, {nominal_gamma}, {0.1 * std::max(nominal_gamma, 1e-2)}, opt.simplex);
  FitResult out;
  out.gamma1 = out.gamma2 = r.x[0];
  out.t_m = obj.t_lo();
  out.rss = r.value;
  out.iterations = r.iterations;
  out.converged = r.converged;
  out.t_m_identifiable = false;
  out.observables = obj.used;
  out.initial = {nominal_gamma, nominal_gamma, obj.t_lo()};
  out.rss_history = r.history;
  return out;
}

FitResult fit_two_rate(const MeasurementSet& data, double w, double nominal_gamma, const FitOptions& opt) {
  if (!(nominal_gamma >= 0.0)) throw std::invalid_argument("fit_two_rate: nominal gamma must be >= 0");
  const Objective obj(data, w, opt);
  if (obj.terms.empty()) throw std::invalid_argument("fit_two_rate: no records for selected observables");
  if (obj.times.size() < 6) throw std::invalid_argument("fit_two_rate: need >= 6 distinct time points");
  const double lo = obj.t_lo(), hi = obj.t_hi();

  // t_m seed: first notable miss of the single-rate model on the primary observable.
  Observable primary = obj.used.front();
  for (Observable o : opt.observables)
    if (std::find(obj.used.begin(), obj.used.end(), o) != obj.used.end()) {
      primary = o;
      break;
    }
  const auto nominal_trace = evolve({w, nominal_gamma}, basis_state(opt.initial_level), obj.times);
  std::vector<MeasurementRecord> prim;
  for (const auto& r : data.records)
    if (r.label == primary) prim.push_back(r);
  std::stable_sort(prim.begin(), prim.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  double tm0 = 0.5 * (lo + hi);
  for (const auto& r : prim) {
    const auto idx = static_cast<std::size_t>(std::lower_bound(obj.times.begin(), obj.times.end(), r.t) - obj.times.begin());
    const double miss = std::abs(r.mean - observe(nominal_trace, idx, primary));
    // The residual of an averaged point scatters with the standard error of the mean.
    const double sem = obj.sigma(r, opt.weighting) / std::sqrt(static_cast<double>(std::max(1, r.repetitions)));
    if (miss > 3.0 * sem && miss > 1e-12) {
      tm0 = r.t;
      break;
    }
  }

  auto f = [&](std::span<const double> x) {
    if (x[0] < 0.0 || x[1] < 0.0 || x[2] < lo || x[2] > hi) return kPenalty;
    return obj(x[0], x[1], x[2]);
  };
  const std::array<double, 3> init{nominal_gamma, 0.5 * nominal_gamma, tm0};
  auto steps = [&](std::span<const double> x) {
    return std::vector<double>{0.1 * std::max(x[0], 1e-2), 0.1 * std::max(x[1], 1e-2), 0.1 * (hi - lo)};
  };

  FitResult out;
  out.initial = init;
  out.observables = obj.used;
  int budget = opt.simplex.max_iterations;
  auto run = [&](std::vector<double> x0) {
    SimplexOptions so = opt.simplex;
    so.max_iterations = budget;
    auto r = nelder_mead(f, x0, steps(x0), so);
    budget -= r.iterations;
    out.iterations += r.iterations;
    for (double v : r.history)
      out.rss_history.push_back(out.rss_history.empty() ? v : std::min(v, out.rss_history.back()));
    return r;
  };

  auto best = run({init.begin(), init.end()});
  // One restart from the optimum guards against a collapsed simplex.
  if (best.converged && budget > 0) {
    auto again = run(best.x);
    if (again.value <= best.value) best = again;
  }
  bool converged = best.converged;

  // The single-rate model is nested in the two-rate one.
  const auto one = fit_one_rate(data, w, nominal_gamma, opt);
  if (one.rss < best.value && budget > 0) {
    auto nested = run({one.gamma1, one.gamma1, best.x[2]});
    if (nested.value < best.value) {
      best = nested;
      converged = nested.converged;
    }
  }

  out.gamma1 = best.x[0];
  out.gamma2 = best.x[1];
  out.t_m = best.x[2];
  out.rss = best.value;
  out.converged = converged && out.iterations < opt.simplex.max_iterations;
  out.t_m_identifiable = std::abs(out.gamma1 - out.gamma2) > 0.02 * std::max(out.gamma1, out.gamma2);
  return out;
}

namespace {

// Natural cubic smoothing spline (Reinsch form) with the penalty weight chosen
// by exact leave-one-out cross-validation.
class SmoothingSpline {
 public:
  SmoothingSpline(std::vector<double> x, const std::vector<double>& y) : x_(std::move(x)) {
    const auto n = static_cast<Eigen::Index>(x_.size());
    std::vector<double> h(x_.size() - 1);
    for (std::size_t i = 0; i + 1 < x_.size(); ++i) h[i] = x_[i + 1] - x_[i];

    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n - 2);
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n - 2, n - 2);
    for (Eigen::Index j = 0; j < n - 2; ++j) {
      q(j, j) = 1.0 / h[j];
      q(j + 1, j) = -1.0 / h[j] - 1.0 / h[j + 1];
      q(j + 2, j) = 1.0 / h[j + 1];
      r(j, j) = (h[j] + h[j + 1]) / 3.0;
      if (j + 1 < n - 2) r(j, j + 1) = r(j + 1, j) = h[j + 1] / 6.0;
    }
    const Eigen::LLT<Eigen::MatrixXd> rl(r);
    const Eigen::MatrixXd rinv_qt = rl.solve(q.transpose());
    const Eigen::MatrixXd k = q * rinv_qt;
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);

    const double hbar = (x_.back() - x_.front()) / static_cast<double>(n - 1);
    double best_cv = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_f = yv;
    for (int e = -32; e <= 16; ++e) {
      const double lam = std::pow(10.0, e / 4.0) * hbar * hbar * hbar;
      const Eigen::MatrixXd a =
          (Eigen::MatrixXd::Identity(n, n) + lam * k).ldlt().solve(Eigen::MatrixXd::Identity(n, n));
      const Eigen::VectorXd f = a * yv;
      double cv = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double denom = 1.0 - a(i, i);
        const double res = denom > 1e-12 ? (yv(i) - f(i)) / denom : 0.0;
        cv += res * res;
      }
      if (cv < best_cv * (1.0 - 1e-12)) {
        best_cv = cv;
        best_f = f;
        lambda_ = lam;
      }
    }
    f_.assign(best_f.data(), best_f.data() + n);
    const Eigen::VectorXd sig = rl.solve(q.transpose() * best_f);
    sigma_.assign(x_.size(), 0.0);
    for (Eigen::Index j = 0; j < n - 2; ++j) sigma_[j + 1] = sig(j);
  }

  double operator()(double x) const {
    const std::size_t n = x_.size();
    if (x <= x_.front()) return f_[0] + end_slope(false) * (x - x_.front());
    if (x >= x_.back()) return f_[n - 1] + end_slope(true) * (x - x_.back());
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - x) / h;
    const double b = 1.0 - a;
    return a * f_[i] + b * f_[i + 1] + ((a * a * a - a) * sigma_[i] + (b * b * b - b) * sigma_[i + 1]) * h * h / 6.0;
  }

  double lambda() const { return lambda_; }

 private:
  double end_slope(bool right) const {
    const std::size_t n = x_.size();
    if (!right) {
      const double h = x_[1] - x_[0];
      return (f_[1] - f_[0]) / h - h * (2.0 * sigma_[0] + sigma_[1]) / 6.0;
    }
    const double h = x_[n - 1] - x_[n - 2];
    return (f_[n - 1] - f_[n - 2]) / h + h * (sigma_[n - 2] + 2.0 * sigma_[n - 1]) / 6.0;
  }

  std::vector<double> x_;
  std::vector<double> f_;
  std::vector<double> sigma_;
  double lambda_ = 0.0;
};

}  // namespace

AlphaCurve extract_alpha(std::span<const SnapshotPoint> snapshot, double t0, double w) {
  if (!(t0 > 0.0)) throw std::invalid_argument("extract_alpha: t0 must be > 0");
  AlphaCurve curve;
  curve.t0 = t0;
  curve.w = w;
  std::vector<double> x, y, gammas;
  for (std::size_t k = 0; k < snapshot.size(); ++k) {
    const auto& s = snapshot[k];
    if (k > 0 && !(s.gamma > snapshot[k - 1].gamma))
      throw std::invalid_argument("extract_alpha: snapshot must be sorted by increasing gamma");
    if (!(s.population > 0.0 && s.population < 1.0) || !(s.gamma > 0.0)) {
      curve.dropped.push_back(s.gamma);
      continue;
    }
    gammas.push_back(s.gamma);
    x.push_back(std::log(s.gamma));
    y.push_back(std::log(-std::log(s.population) / t0));
  }
  if (x.size() < 4) throw Degenerate("extract_alpha: fewer than 4 points with 0 < N(t0) < 1");

  const SmoothingSpline spline(x, y);
  curve.smoothing = spline.lambda();
  double hmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < x.size(); ++i) hmin = std::min(hmin, x[i + 1] - x[i]);
  const double dx = 1e-3 * hmin;
  for (std::size_t i = 0; i < x.size(); ++i)
    curve.samples.push_back({gammas[i], (spline(x[i] + dx) - spline(x[i] - dx)) / (2.0 * dx)});
  return curve;
}

EPEstimate ep_from_eigencurves(const EigenCurves& c) {
  const std::size_t n = c.gamma.size();
  if (n < 8 || c.first.size() != n || c.second.size() != n)
    throw std::invalid_argument("ep_from_eigencurves: need >= 8 samples on both branches");

  std::vector<double> gap(n);
  std::vector<Complex> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Complex diff = c.first[i] - c.second[i];
    gap[i] = std::abs(diff);
    d[i] = diff * diff;
  }
  bool inc = true, dec = true;
  for (std::size_t i = 1; i < n; ++i) {
    inc = inc && gap[i] > gap[i - 1];
    dec = dec && gap[i] < gap[i - 1];
  }
  if (inc || dec) throw NoBracket("ep_from_eigencurves: branch gap is monotone over the window");

  // (first - second)^2 = 4 C^2 (gamma - gamma_ep): profile the complex slope
  // out and maximize |sum u d|^2 / sum u^2 over real gamma_ep (u = x - gamma_ep).
  double sx = 0.0, sxx = 0.0;
  Complex sd{}, sxd{};
  for (std::size_t i = 0; i < n; ++i) {
    const double x = c.gamma[i];
    sx += x;
    sxx += x * x;
    sd += d[i];
    sxd += x * d[i];
  }
  const double A = std::norm(sxd), B = std::real(sxd * std::conj(sd)), C = std::norm(sd);
  const double E = sxx, F = sx, G = static_cast<double>(n);
  auto ratio = [&](double g) { return (A - 2.0 * B * g + C * g * g) / (E - 2.0 * F * g + G * g * g); };
  const double qa = B * G - C * F, qb = C * E - A * G, qc = A * F - B * E;
  std::vector<double> cands;
  if (std::abs(qa) > 1e-300) {
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc >= 0.0) {
      const double s = std::sqrt(disc);
      const double r1 = (-qb - std::copysign(s, qb)) / (2.0 * qa);
      cands.push_back(r1);
      if (r1 != 0.0) cands.push_back(qc / (qa * r1));
    }
  } else if (qb != 0.0) {
    cands.push_back(-qc / qb);
  }
  if (cands.empty()) throw NoBracket("ep_from_eigencurves: no stationary point of the profile");
  double g = cands[0];
  for (double cand : cands)
    if (ratio(cand) > ratio(g)) g = cand;

  double suu = 0.0;
  Complex sud{};
  for (std::size_t i = 0; i < n; ++i) {
    const double u = c.gamma[i] - g;
    suu += u * u;
    sud += u * d[i];
  }
  const Complex beta = sud / suu;
  const auto [xmin, xmax] = std::minmax_element(c.gamma.begin(), c.gamma.end());
  if (g < *xmin || g > *xmax) throw NoBracket("ep_from_eigencurves: fitted degeneracy outside the window");
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = std::real(d[i] * std::conj(beta));
    pos = pos || s > 0.0;
    neg = neg || s < 0.0;
  }
  if (!(pos && neg)) throw NoBracket("ep_from_eigencurves: squared gap does not change sign");

  // A free complex line d = b x + k must vanish at a real x: an avoided
  // crossing leaves its zero off the real axis by many standard errors.
  {
    const double xbar = sx / G;
    const double sxxc = sxx - G * xbar * xbar;
    const Complex b = (sxd - xbar * sd) / sxxc;
    const Complex k = sd / G - b * xbar;
    const Complex xz = -k / b;
    double rss_free = 0.0;
    for (std::size_t i = 0; i < n; ++i) rss_free += std::norm(d[i] - b * c.gamma[i] - k);
    const double s2 = rss_free / static_cast<double>(2 * n - 4);
    const double dx = xz.real() - xbar;
    const double se_im = std::sqrt(s2 / std::norm(b) * (1.0 / G + dx * dx / sxxc));
    if (std::abs(xz.imag()) > 3.0 * se_im + 1e-6 * (*xmax - *xmin))
      throw NoBracket("ep_from_eigencurves: the fitted zero of the squared gap is not real");
  }

  EPEstimate est;
  est.gamma_ep = g;
  est.coefficient = 0.5 * std::sqrt(beta);
  est.n_points = n;
  Complex mean{};
  for (std::size_t i = 0; i < n; ++i) mean += 0.5 * (c.first[i] + c.second[i]);
  est.lambda0 = mean / static_cast<double>(n);

  // Real-stacked Jacobian in (Re beta, Im beta, gamma_ep).
  Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = c.gamma[i] - g;
    rss += std::norm(d[i] - beta * u);
    const Eigen::Vector3d jr(u, 0.0, -beta.real());
    const Eigen::Vector3d ji(0.0, u, -beta.imag());
    jtj += jr * jr.transpose() + ji * ji.transpose();
  }
  est.rss = rss;
  const double s2 = rss / static_cast<double>(2 * n - 3);
  const Eigen::Matrix3d cov = s2 * jtj.inverse();
  est.std_error = std::sqrt(std::max(0.0, cov(2, 2)));
  return est;
}

EigenCurves closest_pair(const SpectralBranchSet& set, double lo, double hi) {
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < set.grid.size(); ++k)
    if (set.grid[k] >= lo && set.grid[k] <= hi) idx.push_back(k);
  if (idx.empty()) throw std::invalid_argument("closest_pair: no grid points inside the window");
  std::pair<int, int> best{0, 1};
  double best_gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      for (auto k : idx) {
        const double g = std::abs(set.branches[i][k] - set.branches[j][k]);
        if (g < best_gap) {
          best_gap = g;
          best = {i, j};
        }
      }
  EigenCurves out;
  for (auto k : idx) {
    out.gamma.push_back(set.grid[k]);
    out.first.push_back(set.branches[best.first][k]);
    out.second.push_back(set.branches[best.second][k]);
  }
  return out;
}

std::vector<EigenCurves> ep_windows(const SpectralBranchSet& set, std::size_t half_width) {
  const std::size_t n = set.grid.size();
  std::vector<double> gap(n);
  std::vector<std::pair<int, int>> pair(n);
  for (std::size_t k = 0; k < n; ++k) {
    gap[k] = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j) {
        const double g = std::abs(set.branches[i][k] - set.branches[j][k]);
        if (g < gap[k]) {
          gap[k] = g;
          pair[k] = {i, j};
        }
      }
  }
  std::vector<EigenCurves> out;
  for (std::size_t k = 1; k + 1 < n; ++k) {
    if (!(gap[k] <= gap[k - 1] && gap[k] < gap[k + 1])) continue;
    const std::size_t lo = k > half_width ? k - half_width : 0;
    const std::size_t hi = std::min(n - 1, k + half_width);
    EigenCurves c;
    for (std::size_t m = lo; m <= hi; ++m) {
      c.gamma.push_back(set.grid[m]);
      c.first.push_back(set.branches[pair[k].first][m]);
      c.second.push_back(set.branches[pair[k].second][m]);
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace exnexus
