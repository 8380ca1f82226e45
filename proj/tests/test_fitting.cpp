#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "exnexus/errors.hpp"
#include "exnexus/fitting.hpp"

using namespace exnexus;

namespace {

MeasurementSet n3_set(double gamma, const std::vector<double>& ts) {
  MeasurementSet m;
  for (double t : ts) m.records.push_back({t, Observable::n3, std::exp(-2.0 * gamma * t), 0.0, 1});
  return m;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  return v;
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
  return g;
}

}  // namespace

TEST_SUITE("fitting") {
  TEST_CASE("single-rate calibration") {
    const auto ts = linspace(0.0, 0.5, 11);
    CHECK(fit_single_rate(n3_set(5.0, ts)) == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(fit_single_rate(n3_set(0.0, ts)) == 0.0);

    auto flat = n3_set(0.0, ts);
    for (auto& r : flat.records) r.mean = 0.7;
    CHECK_THROWS_AS(fit_single_rate(flat), Degenerate);
    CHECK_THROWS_AS(fit_single_rate(n3_set(5.0, {0.1, 0.1, 0.1})), Degenerate);
    CHECK_THROWS_AS(fit_single_rate(n3_set(5.0, {0.1, 0.2})), std::invalid_argument);

    const auto grid = linspace(0.0, 0.2, 10);
    int good = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      const auto data = synth_calibration(8.0, 0.02, 3, grid, rng);
      good += std::abs(fit_single_rate(data) - 8.0) < 0.05 * 8.0;
    }
    CHECK(good == 20);
  }

  TEST_CASE("simplex minimizes and never increases the best value") {
    auto rosen = [](std::span<const double> x) {
      return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
    };
    SimplexOptions opt;
    opt.max_iterations = 5000;
    opt.tolerance = 1e-14;
    const auto r = nelder_mead(rosen, {-1.2, 1.0}, {0.5, 0.5}, opt);
    CHECK(r.converged);
    CHECK(std::abs(r.x[0] - 1.0) < 1e-4);
    CHECK(std::abs(r.x[1] - 1.0) < 1e-4);
    for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i] <= r.history[i - 1]);
    CHECK(r.history.size() == static_cast<std::size_t>(r.iterations) + 1);

    SimplexOptions tight;
    tight.max_iterations = 3;
    CHECK_FALSE(nelder_mead(rosen, {-1.2, 1.0}, {0.5, 0.5}, tight).converged);
  }

  TEST_CASE("two-rate fit round trip") {
    const auto grid = uniform_grid(3.0, 200);
    Rng rng(20240501);
    const auto data = synth_dataset(4.5, 17.0, 8.0, 0.5, 0.02, 3, grid, rng);
    const auto f = fit_two_rate(data, 4.5, 17.0);
    CHECK(std::abs(f.gamma1 - 17.0) <= 1.7);
    CHECK(std::abs(f.gamma2 - 8.0) <= 0.8);
    CHECK(std::abs(f.t_m - 0.5) <= 0.05);
    CHECK(f.converged);
    CHECK(f.t_m_identifiable);
    CHECK(f.rss >= 0.0);
    CHECK(f.t_m >= 0.0);
    CHECK(f.t_m <= 3.0);
    CHECK(f.initial[0] == 17.0);
    CHECK(f.initial[1] == 8.5);
    for (std::size_t i = 1; i < f.rss_history.size(); ++i) REQUIRE(f.rss_history[i] <= f.rss_history[i - 1]);
    CHECK(f.rss == doctest::Approx(two_rate_objective(data, 4.5, f.gamma1, f.gamma2, f.t_m)));

    const auto one = fit_one_rate(data, 4.5, 17.0);
    CHECK(f.rss <= one.rss);
    CHECK(one.gamma1 == one.gamma2);
  }

  TEST_CASE("nesting holds across datasets and weightings") {
    const auto grid = uniform_grid(3.0, 60);
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      Rng rng(seed);
      const auto data = synth_dataset(3.0 + seed, 4.0 + 2.0 * seed, 2.0 + seed, 0.3 + 0.2 * seed, 0.03, 2, grid, rng);
      for (auto wt : {Weighting::pooled, Weighting::per_record}) {
        FitOptions opt;
        opt.weighting = wt;
        const auto two = fit_two_rate(data, data.w, data.nominal_gamma, opt);
        const auto one = fit_one_rate(data, data.w, data.nominal_gamma, opt);
        CHECK(two.rss <= one.rss * (1.0 + 1e-12));
        CHECK(two.gamma1 >= 0.0);
        CHECK(two.gamma2 >= 0.0);
      }
    }
  }

  TEST_CASE("equal rates: recovered, t_m flagged as unidentifiable") {
    const auto grid = uniform_grid(3.0, 200);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      Rng rng(seed);
      const auto data = synth_dataset(4.5, 10.0, 10.0, 0.5, 0.005, 3, grid, rng);
      const auto f = fit_two_rate(data, 4.5, 12.0);
      CHECK(std::abs(f.gamma1 - 10.0) < 0.2);
      CHECK(std::abs(f.gamma2 - 10.0) < 0.2);
      CHECK_FALSE(f.t_m_identifiable);
    }
  }

  TEST_CASE("fits on any observable subset") {
    const auto grid = uniform_grid(3.0, 200);
    Rng rng(44);
    const auto data = synth_dataset(4.5, 17.0, 8.0, 0.5, 0.0, 1, grid, rng);
    for (auto obs : {std::vector<Observable>{Observable::total}, std::vector<Observable>{Observable::n2},
                     std::vector<Observable>{Observable::n3}}) {
      FitOptions opt;
      opt.observables = obs;
      const auto f = fit_two_rate(data, 4.5, 17.0, opt);
      CHECK(f.observables == obs);
      CHECK(std::abs(f.gamma1 - 17.0) < 0.17);
      CHECK(std::abs(f.gamma2 - 8.0) < 0.08);
      CHECK(std::abs(f.t_m - 0.5) < 0.005);
    }
    FitOptions none;
    none.observables = {Observable::n1};
    CHECK_THROWS_AS(fit_two_rate(data, 4.5, 17.0, none), std::invalid_argument);
  }

  TEST_CASE("fit exposes the iteration cap") {
    const auto grid = uniform_grid(3.0, 100);
    Rng rng(5);
    const auto data = synth_dataset(4.5, 17.0, 8.0, 0.5, 0.02, 3, grid, rng);
    FitOptions opt;
    opt.simplex.max_iterations = 5;
    const auto f = fit_two_rate(data, 4.5, 17.0, opt);
    CHECK_FALSE(f.converged);
    CHECK(f.iterations <= 5);
  }

  TEST_CASE("alpha of a constructed power law") {
    const double t0 = 0.8, c = 0.3;
    for (double k : {0.5, 1.0, -0.7}) {
      std::vector<SnapshotPoint> s;
      for (double g : log_grid(0.1, 100.0, 61)) s.push_back({g, std::exp(-c * std::pow(g, k) * t0)});
      const auto a = extract_alpha(s, t0);
      // keep only points with 0 < N < 1, which is all of them here
      CHECK(a.dropped.empty());
      for (const auto& p : a.samples) CHECK(std::abs(p.alpha - k) < 1e-3);
    }
  }

  TEST_CASE("alpha of the model snapshots") {
    for (double w : {2.8, 3.8, 4.5}) {
      const auto grid = log_grid(1e-3 * w, 50.0 * w, 121);
      const auto a = extract_alpha(decay_snapshot(w, grid, 0.8), 0.8, w);
      CHECK(std::abs(a.samples.front().alpha - 1.0) < 0.05);
      CHECK(a.samples.back().alpha >= -1.05);
      CHECK(a.samples.back().alpha <= -0.8);
      for (const auto& p : a.samples) CHECK(std::isfinite(p.alpha));
      CHECK(a.w == w);
      CHECK(a.t0 == 0.8);
    }
  }

  TEST_CASE("alpha drops points with no decay") {
    std::vector<SnapshotPoint> s;
    s.push_back({0.0, 1.0});
    for (double g : log_grid(0.1, 10.0, 20)) s.push_back({g, std::exp(-g * 0.8)});
    s.push_back({20.0, 0.0});
    const auto a = extract_alpha(s, 0.8);
    CHECK(a.dropped == std::vector<double>{0.0, 20.0});
    CHECK(a.samples.size() == 20);
    std::vector<SnapshotPoint> few{{1.0, 0.5}, {2.0, 0.4}, {3.0, 1.0}, {4.0, 1.2}};
    CHECK_THROWS_AS(extract_alpha(few, 0.8), Degenerate);
    std::vector<SnapshotPoint> unsorted{{2.0, 0.5}, {1.0, 0.4}, {3.0, 0.3}, {4.0, 0.2}};
    CHECK_THROWS_AS(extract_alpha(unsorted, 0.8), std::invalid_argument);
  }

  TEST_CASE("EPs from noiseless curves at w=3") {
    const auto grid = linspace(5.4, 5.9, 1001);
    const auto set = sweep_spectrum(3.0, grid);
    std::vector<double> found;
    for (const auto& c : ep_windows(set, 7)) found.push_back(ep_from_eigencurves(c).gamma_ep);
    std::sort(found.begin(), found.end());
    REQUIRE(found.size() == 2);
    CHECK(std::abs(found[0] - 2.5 * std::sqrt(5.0)) < 1e-4);
    CHECK(std::abs(found[1] - 4.0 * std::sqrt(2.0)) < 1e-4);
  }

  TEST_CASE("no EP below the nexus coupling") {
    const auto grid = linspace(0.0, 16.0, 321);
    const auto set = sweep_spectrum(2.0, grid);
    for (const auto& c : ep_windows(set, 7)) CHECK_THROWS_AS(ep_from_eigencurves(c), NoBracket);
    // windows centred on the avoided crossing near gamma = 3.25
    for (double half : {0.1, 0.3, 0.6, 1.0}) {
      const auto win = linspace(3.25 - half, 3.25 + half, 41);
      const auto c = closest_pair(sweep_spectrum(2.0, win), win.front(), win.back());
      CHECK_THROWS_AS(ep_from_eigencurves(c), NoBracket);
    }
  }

  TEST_CASE("EPs with 1% noise at w=4.5") {
    const double lo = locate_ep2(4.5)[0].location.gamma, hi = 5.0 * std::sqrt(5.0);
    for (int seed = 0; seed < 10; ++seed) {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> nd(0.0, 1.0);
      for (auto [a, b, exact] : {std::tuple{7.6, 9.9, lo}, std::tuple{10.0, 12.4, hi}}) {
        const auto win = linspace(a, b, 24);
        auto c = closest_pair(sweep_spectrum(4.5, win), a, b);
        for (auto* br : {&c.first, &c.second})
          for (auto& z : *br) z += 0.01 * std::abs(z) * Complex(nd(rng), nd(rng));
        const auto e = ep_from_eigencurves(c);
        CHECK(std::abs(e.gamma_ep - exact) < 0.03 * exact);
        CHECK(e.std_error > 0.0);
      }
    }
  }

  TEST_CASE("square-root residual shrinks with the window") {
    const double ep = 2.5 * std::sqrt(5.0);
    double prev = INFINITY;
    for (double half : {0.03, 0.01, 0.003}) {
      const auto grid = linspace(ep - half, ep + half, 21);
      const auto e = ep_from_eigencurves(closest_pair(sweep_spectrum(3.0, grid), grid.front(), grid.back()));
      CHECK(e.rss < prev);
      prev = e.rss;
      CHECK(e.n_points == 21);
    }
  }

  TEST_CASE("ep_from_eigencurves input checks") {
    EigenCurves c;
    c.gamma = {1, 2, 3};
    c.first = c.second = {1, 2, 3};
    CHECK_THROWS_AS(ep_from_eigencurves(c), std::invalid_argument);
  }
}
