#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/stl.h>
#include <pybind11/pybind11.h>

#include <sstream>

#include "exnexus/cli.hpp"
#include "exnexus/dynamics.hpp"
#include "exnexus/errors.hpp"
#include "exnexus/fitting.hpp"
#include "exnexus/io.hpp"
#include "exnexus/model.hpp"
#include "exnexus/perturbation.hpp"
#include "exnexus/spectral_atlas.hpp"

namespace py = pybind11;
using namespace exnexus;

namespace {

using Rows = std::vector<std::vector<Complex>>;

Matrix3 to_matrix(const Rows& rows) {
  if (rows.size() != 3) throw std::invalid_argument("expected a 3x3 matrix");
  Matrix3 m;
  for (std::size_t r = 0; r < 3; ++r) {
    if (rows[r].size() != 3) throw std::invalid_argument("expected a 3x3 matrix");
    for (std::size_t c = 0; c < 3; ++c) m(r, c) = rows[r][c];
  }
  return m;
}

Rows from_matrix(const Matrix3& m) {
  Rows rows(3, std::vector<Complex>(3));
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) rows[r][c] = m(r, c);
  return rows;
}

py::dict ep_dict(const EPRecord& r) {
  py::dict d;
  d["order"] = r.order;
  d["w"] = r.location.w;
  d["gamma"] = r.location.gamma;
  d["value"] = r.value;
  d["arc"] = to_string(r.arc);
  d["locator_residual"] = r.locator_residual;
  return d;
}

PerturbationCase case_of(const std::string& kind) {
  if (kind == "diag") return PerturbationCase::diagonal();
  if (kind == "mixed") return PerturbationCase::mixed();
  throw std::invalid_argument("case must be 'diag' or 'mixed'");
}

MeasurementSet to_set(const py::dict& d) {
  MeasurementSet m;
  m.w = d["w"].cast<double>();
  m.nominal_gamma = d.contains("nominal_gamma") ? d["nominal_gamma"].cast<double>() : 0.0;
  for (auto item : d["records"]) {
    auto rec = item.cast<py::dict>();
    m.records.push_back({rec["t"].cast<double>(), observable_from_string(rec["observable"].cast<std::string>()),
                         rec["mean"].cast<double>(), rec["sd"].cast<double>(), rec["repetitions"].cast<int>()});
  }
  return m;
}

py::dict from_set(const MeasurementSet& m) {
  py::list recs;
  for (const auto& r : m.records) {
    py::dict d;
    d["t"] = r.t;
    d["observable"] = to_string(r.label);
    d["mean"] = r.mean;
    d["sd"] = r.sd;
    d["repetitions"] = r.repetitions;
    recs.append(d);
  }
  py::dict out;
  out["w"] = m.w;
  out["nominal_gamma"] = m.nominal_gamma;
  out["records"] = recs;
  return out;
}

std::vector<Observable> observables_of(const std::vector<std::string>& names) {
  std::vector<Observable> out;
  for (const auto& n : names) out.push_back(observable_from_string(n));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Three-state lossy Hamiltonian: spectra, exceptional points, transport phases, dynamics, fits";

  py::register_exception<IllConditioned>(m, "IllConditioned");
  py::register_exception<TrackingLost>(m, "TrackingLost");
  py::register_exception<Degenerate>(m, "Degenerate");
  py::register_exception<NoBracket>(m, "NoBracket");

  m.def("hamiltonian", [](double w, double gamma) { return from_matrix(build_hamiltonian({w, gamma})); },
        py::arg("w"), py::arg("gamma"));

  m.def(
      "eigensystem",
      [](const Rows& rows) {
        const auto es = eigensystem(to_matrix(rows));
        py::dict d;
        d["values"] = std::vector<Complex>(es.values.begin(), es.values.end());
        d["vectors"] = std::vector<Vec3>(es.vectors.begin(), es.vectors.end());
        d["left"] = std::vector<Vec3>(es.left.begin(), es.left.end());
        d["residual"] = es.residual;
        d["coalesced"] = es.coalesced;
        return d;
      },
      py::arg("matrix"));

  m.def("solve_cubic", &solve_cubic, py::arg("a"), py::arg("b"), py::arg("c"));
  m.def("discriminant", [](double w, double gamma) { return discriminant({w, gamma}); }, py::arg("w"),
        py::arg("gamma"));

  m.def(
      "locate_ep2",
      [](double w) {
        py::list out;
        for (const auto& r : locate_ep2(w)) out.append(ep_dict(r));
        return out;
      },
      py::arg("w"));
  m.def("locate_ex", [] { return ep_dict(locate_ex()); });

  m.def(
      "sweep_spectrum",
      [](double w, const std::vector<double>& grid) {
        const auto s = sweep_spectrum(w, grid);
        py::dict d;
        d["gamma"] = s.grid;
        d["branches"] = std::vector<std::vector<Complex>>(s.branches.begin(), s.branches.end());
        d["degenerate"] = s.degenerate;
        return d;
      },
      py::arg("w"), py::arg("gamma_grid"));

  m.def(
      "scaling_exponents",
      [](const std::string& kind, double theta, const std::vector<double>& eps) {
        std::vector<double> out;
        for (const auto& f : scaling_exponents(case_of(kind), theta, eps)) out.push_back(f.exponent);
        return out;
      },
      py::arg("case"), py::arg("theta"), py::arg("eps_grid"));

  m.def(
      "berry_phase",
      [](const std::string& kind, double eps, std::size_t n) {
        py::list out;
        for (const auto& r : berry_phase(case_of(kind), eps, n)) {
          py::dict d;
          d["branch"] = r.branch_id;
          d["cycles"] = r.cycles_to_closure;
          d["phase"] = r.phase;
          d["holonomy"] = r.holonomy;
          d["closure_error"] = r.closure_error;
          out.append(d);
        }
        return out;
      },
      py::arg("case"), py::arg("eps") = 0.1, py::arg("n_samples") = 2048);

  m.def(
      "evolve",
      [](double w, double gamma, int level, const std::vector<double>& times) {
        const auto tr = evolve({w, gamma}, basis_state(level), times);
        py::dict d;
        d["t"] = tr.times;
        d["populations"] = tr.populations;
        d["total"] = tr.total;
        return d;
      },
      py::arg("w"), py::arg("gamma"), py::arg("level"), py::arg("times"));

  m.def(
      "synth_dataset",
      [](double w, double g1, double g2, double tm, double sigma, int reps, const std::vector<double>& times,
         std::uint64_t seed) {
        Rng rng(seed);
        return from_set(synth_dataset(w, g1, g2, tm, sigma, reps, times, rng));
      },
      py::arg("w"), py::arg("gamma1"), py::arg("gamma2"), py::arg("t_m"), py::arg("sigma"), py::arg("reps"),
      py::arg("times"), py::arg("seed"));

  m.def(
      "fit_two_rate",
      [](const py::dict& data, double w, double nominal, const std::vector<std::string>& obs) {
        FitOptions opt;
        opt.observables = observables_of(obs);
        const auto f = fit_two_rate(to_set(data), w, nominal, opt);
        py::dict d;
        d["gamma1"] = f.gamma1;
        d["gamma2"] = f.gamma2;
        d["t_m"] = f.t_m;
        d["rss"] = f.rss;
        d["converged"] = f.converged;
        d["iterations"] = f.iterations;
        return d;
      },
      py::arg("data"), py::arg("w"), py::arg("nominal_gamma"),
      py::arg("observables") = std::vector<std::string>{"N", "N2"});

  m.def(
      "extract_alpha",
      [](double w, const std::vector<double>& gammas, double t0) {
        const auto curve = extract_alpha(decay_snapshot(w, gammas, t0), t0, w);
        std::vector<double> g, a;
        for (const auto& s : curve.samples) {
          g.push_back(s.gamma);
          a.push_back(s.alpha);
        }
        return py::make_tuple(g, a);
      },
      py::arg("w"), py::arg("gammas"), py::arg("t0") = 0.8);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));

  m.def("schema", [] { return cli::schema_document().dump(); });

  m.attr("__version__") = io::kVersion;
}
