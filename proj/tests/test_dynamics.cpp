#include <doctest.h>

#include <cmath>
#include <random>

#include "exnexus/dynamics.hpp"
#include "oracles.hpp"

using namespace exnexus;

namespace {

Eigen::Vector3cd to_eigen(const Vec3& v) { return {v[0], v[1], v[2]}; }

Eigen::Matrix3cd to_eigen(const Matrix3& m) {
  Eigen::Matrix3cd e;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) e(r, c) = m(r, c);
  return e;
}

double dist(const Vec3& a, const Vec3& b) { return norm(a - b); }

}  // namespace

TEST_SUITE("dynamics") {
  TEST_CASE("matrix exponential") {
    CHECK((matrix_exponential(Matrix3{}) - Matrix3::identity()).frobenius_norm() == 0.0);
    const auto d = matrix_exponential(Matrix3::diagonal(1.0, Complex(0, 2), -30.0));
    CHECK(std::abs(d(0, 0) - std::exp(1.0)) < 1e-13);
    CHECK(std::abs(d(1, 1) - std::exp(Complex(0, 2))) < 1e-14);
    CHECK(std::abs(d(2, 2) - std::exp(-30.0)) < 1e-26);
    // nilpotent Jordan block: exp(N) = I + N + N^2/2
    Matrix3 n = Matrix3::outer(0, 1) + Matrix3::outer(1, 2);
    const auto e = matrix_exponential(n * Complex(5.0));
    CHECK(std::abs(e(0, 1) - 5.0) < 1e-12);
    CHECK(std::abs(e(0, 2) - 12.5) < 1e-12);
    CHECK(std::abs(e(1, 0)) < 1e-14);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    Matrix3 a;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) a(r, c) = Complex(u(rng), u(rng));
    const Eigen::Matrix3cd ea = to_eigen(a);
    Eigen::ComplexEigenSolver<Eigen::Matrix3cd> es(ea);
    const Eigen::Matrix3cd ref =
        es.eigenvectors() * es.eigenvalues().array().exp().matrix().asDiagonal() * es.eigenvectors().inverse();
    const auto got = to_eigen(matrix_exponential(a));
    CHECK((got - ref).norm() < 1e-10 * ref.norm());
  }

  TEST_CASE("Rabi oscillation with the lossy level detached") {
    const auto grid = uniform_grid(10.0, 101);
    const auto tr = evolve({0.0, 0.0}, basis_state(2), grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      CHECK(std::abs(tr.populations[k][1] - std::pow(std::cos(grid[k]), 2)) < 1e-12);
      CHECK(std::abs(tr.populations[k][0] - std::pow(std::sin(grid[k]), 2)) < 1e-12);
      CHECK(tr.populations[k][2] == 0.0);
    }
  }

  TEST_CASE("pure decay law") {
    const auto grid = uniform_grid(3.0, 61);
    const auto tr = evolve({0.0, 2.5}, basis_state(3), grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double want = std::exp(-5.0 * grid[k]);
      CHECK(std::abs(tr.populations[k][2] - want) <= 1e-13 * want);
    }
  }

  TEST_CASE("RK4 oracle at w=2.8, gamma=1") {
    const ParamPoint p{2.8, 1.0};
    const auto grid = uniform_grid(3.0, 31);
    const auto tr = evolve(p, basis_state(2), grid);
    const auto ref = oracle::rk4(oracle::hamiltonian(p.w, p.gamma), to_eigen(basis_state(2)), 3.0, 4000, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) CHECK(std::abs(tr.total[k] - ref[k].squaredNorm()) < 1e-6);
  }

  TEST_CASE("propagation paths agree with each other and with RK4") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> uw(0.0, 6.0), ug(0.0, 12.0);
    const auto grid = uniform_grid(10.0, 11);
    for (int i = 0; i < 100; ++i) {
      const ParamPoint p{uw(rng), ug(rng)};
      const int lvl = 1 + i % 3;
      const auto a = evolve(p, basis_state(lvl), grid, Propagation::eigen);
      const auto b = evolve(p, basis_state(lvl), grid, Propagation::exponential);
      const auto ref = oracle::rk4(oracle::hamiltonian(p.w, p.gamma), to_eigen(basis_state(lvl)), 10.0, 2000, grid);
      for (std::size_t k = 0; k < grid.size(); ++k) {
        REQUIRE(dist(a.states[k], b.states[k]) < 1e-6);
        REQUIRE((to_eigen(b.states[k]) - ref[k]).norm() < 1e-6);
      }
    }
  }

  TEST_CASE("at the nexus the exponential path is used and stays accurate") {
    const ParamPoint p{2.0 * std::sqrt(2.0), 3.0 * std::sqrt(3.0)};
    const Propagator prop(build_hamiltonian(p));
    CHECK_FALSE(prop.uses_eigenbasis());
    const auto grid = uniform_grid(4.0, 9);
    const auto tr = evolve(p, basis_state(2), grid);
    const auto ref = oracle::rk4(oracle::hamiltonian(p.w, p.gamma), to_eigen(basis_state(2)), 4.0, 4000, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) CHECK((to_eigen(tr.states[k]) - ref[k]).norm() < 1e-9);
  }

  TEST_CASE("norm laws") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> uw(0.0, 6.0), ug(0.0, 20.0);
    const auto grid = uniform_grid(10.0, 401);
    for (int i = 0; i < 40; ++i) {
      const ParamPoint p{uw(rng), i % 4 == 0 ? 0.0 : ug(rng)};
      const auto tr = evolve(p, basis_state(1 + i % 3), grid);
      CHECK(tr.total[0] == doctest::Approx(1.0).epsilon(1e-15));
      for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        REQUIRE(tr.total[k + 1] <= tr.total[k] + 1e-9);
        if (p.gamma == 0.0) REQUIRE(std::abs(tr.total[k] - 1.0) < 1e-9);
        const auto& n = tr.populations[k];
        REQUIRE(std::abs(n[0] + n[1] + n[2] - tr.total[k]) < 1e-15);
      }
    }
  }

  TEST_CASE("loss-rate identity") {
    const ParamPoint p{3.3, 4.2};
    const double h = 1e-5;
    for (double t : {0.2, 0.9, 1.7, 3.1}) {
      const std::vector<double> ts{t - h, t, t + h};
      const auto tr = evolve(p, basis_state(2), ts);
      const double fd = (tr.total[2] - tr.total[0]) / (2 * h);
      CHECK(std::abs(fd + 2.0 * p.gamma * tr.populations[1][2]) < 1e-6);
    }
  }

  TEST_CASE("Zeno asymptotics") {
    const auto grid = uniform_grid(200.0, 2001);
    const auto tr = evolve({3.0, 100.0}, basis_state(2), grid);
    const double rate = -std::log(tr.total[2000] / tr.total[1800]) / (grid[2000] - grid[1800]);
    CHECK(std::abs(rate - 0.09) < 0.05 * 0.09);
  }

  TEST_CASE("piecewise evolution") {
    const auto grid = uniform_grid(3.0, 61);
    const auto same = evolve_piecewise(4.5, 8.0, 8.0, 1.1, basis_state(2), grid);
    const auto plain = evolve({4.5, 8.0}, basis_state(2), grid);
    const auto zero = evolve_piecewise(4.5, 17.0, 8.0, 0.0, basis_state(2), grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      CHECK(dist(same.states[k], plain.states[k]) < 1e-12);
      CHECK(dist(zero.states[k], plain.states[k]) < 1e-12);
    }
    // continuity at t_m
    const double tm = 0.5;
    const std::vector<double> ts{tm - 1e-9, tm, tm + 1e-9};
    const auto pw = evolve_piecewise(4.5, 17.0, 8.0, tm, basis_state(2), ts);
    CHECK(dist(pw.states[0], pw.states[1]) < 1e-7);
    CHECK(dist(pw.states[1], pw.states[2]) < 1e-7);
    // before t_m it is the gamma1 dynamics
    const auto early = evolve({4.5, 17.0}, basis_state(2), ts);
    CHECK(dist(pw.states[0], early.states[0]) < 1e-12);
    CHECK_THROWS_AS(evolve_piecewise(4.5, 17.0, 8.0, -0.1, basis_state(2), grid), std::invalid_argument);
  }

  TEST_CASE("decay snapshots") {
    const std::vector<double> tiny{1e-9};
    CHECK(decay_snapshot(3.8, tiny, 0.8)[0].population == doctest::Approx(1.0).epsilon(1e-8));
    for (double w : {2.8, 3.8, 4.5}) {
      std::vector<double> g;
      for (double r = 10.0; r <= 50.0; r += 5.0) g.push_back(r * w);
      const auto s = decay_snapshot(w, g, 0.8);
      for (std::size_t k = 1; k < s.size(); ++k) CHECK(s[k].population > s[k - 1].population);
    }
    // the curves for different w agree at small gamma / w
    for (double ratio : {0.005, 0.01, 0.02, 0.03}) {
      double lo = 1.0, hi = 0.0;
      for (double w : {2.8, 3.8, 4.5}) {
        const std::vector<double> g{ratio * w};
        const double n = decay_snapshot(w, g, 0.8)[0].population;
        lo = std::min(lo, n);
        hi = std::max(hi, n);
      }
      CHECK(hi - lo < 0.02);
    }
    CHECK_THROWS_AS(decay_snapshot(3.0, tiny, 0.0), std::invalid_argument);
  }

  TEST_CASE("synthetic datasets") {
    const auto grid = uniform_grid(3.0, 200);
    Rng r0(1);
    const auto exact = synth_dataset(4.5, 17.0, 8.0, 0.5, 0.0, 3, grid, r0);
    const auto tr = evolve_piecewise(4.5, 17.0, 8.0, 0.5, basis_state(2), grid);
    REQUIRE(exact.records.size() == 3 * grid.size());
    for (const auto& rec : exact.records) {
      const auto k = static_cast<std::size_t>(std::lround(rec.t / grid[1]));
      CHECK(rec.mean == observe(tr, k, rec.label));
      CHECK(rec.sd == 0.0);
    }
    REQUIRE(exact.provenance.has_value());
    CHECK(exact.provenance->gamma1 == 17.0);
    CHECK(exact.provenance->t_m == 0.5);

    Rng a(7), b(7);
    const auto da = synth_dataset(4.5, 17.0, 8.0, 0.5, 0.02, 3, grid, a);
    const auto db = synth_dataset(4.5, 17.0, 8.0, 0.5, 0.02, 3, grid, b);
    REQUIRE(da.records.size() == db.records.size());
    for (std::size_t i = 0; i < da.records.size(); ++i) {
      CHECK(da.records[i].mean == db.records[i].mean);
      CHECK(da.records[i].sd == db.records[i].sd);
      CHECK(da.records[i].mean >= 0.0);
      CHECK(da.records[i].mean <= 1.0 + 3 * 0.02);
      CHECK(da.records[i].repetitions == 3);
    }
    const auto n2 = da.restricted_to(Observable::n2);
    CHECK(n2.records.size() == grid.size());
    for (const auto& rec : n2.records) CHECK(rec.label == Observable::n2);

    Rng c(9);
    const auto cal = synth_calibration(4.0, 0.0, 1, grid, c);
    for (const auto& rec : cal.records) {
      CHECK(rec.label == Observable::n3);
      CHECK(rec.mean == doctest::Approx(std::exp(-8.0 * rec.t)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(synth_dataset(4.5, 17.0, 8.0, 0.5, -1.0, 3, grid, c), std::invalid_argument);
    CHECK_THROWS_AS(synth_dataset(4.5, 17.0, 8.0, 0.5, 0.1, 0, grid, c), std::invalid_argument);
  }

  TEST_CASE("observable labels") {
    for (auto o : {Observable::total, Observable::n1, Observable::n2, Observable::n3})
      CHECK(observable_from_string(to_string(o)) == o);
    CHECK_THROWS_AS(observable_from_string("N4"), std::invalid_argument);
  }

  TEST_CASE("input validation") {
    const auto grid = uniform_grid(1.0, 5);
    CHECK_THROWS_AS(evolve({1.0, 1.0}, Vec3{1.0, 1.0, 0.0}, grid), std::invalid_argument);
    CHECK_THROWS_AS(evolve({1.0, 1.0}, basis_state(1), std::vector<double>{0.5, 0.2}), std::invalid_argument);
    CHECK_THROWS_AS(basis_state(4), std::invalid_argument);
  }
}
