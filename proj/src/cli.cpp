#include "exnexus/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <deque>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "exnexus/dynamics.hpp"
#include "exnexus/errors.hpp"
#include "exnexus/fitting.hpp"
#include "exnexus/io.hpp"
#include "exnexus/model.hpp"
#include "exnexus/perturbation.hpp"
#include "exnexus/schema_data.hpp"  // generated
#include "exnexus/spectral_atlas.hpp"

namespace exnexus::cli {

namespace fs = std::filesystem;
using io::CsvTable;
using io::format_number;
using io::json;

namespace {

struct Column {
  const char* name;
  const char* doc;
};

// Every table layout the CLI writes; headers come from here and nowhere else.
const std::map<std::string, std::vector<Column>>& table_layouts() {
  static const std::map<std::string, std::vector<Column>> layouts = {
      {"spectrum",
       {{"gamma", "dissipation rate"},
        {"re_0", "Re E of tracked branch 0"}, {"im_0", "Im E of tracked branch 0"},
        {"re_1", "Re E of tracked branch 1"}, {"im_1", "Im E of tracked branch 1"},
        {"re_2", "Re E of tracked branch 2"}, {"im_2", "Im E of tracked branch 2"},
        {"min_overlap", "smallest eigenvector overlap with the previous grid point (1 at the first)"},
        {"degenerate", "1 where a pair coalesced (gap and vector tests), else 0"}}},
      {"arcs",
       {{"arc", "lower or upper (nexus rows appear in both)"},
        {"order", "2 for EP2, 3 at the nexus"},
        {"w", "coupling"}, {"gamma", "EP dissipation rate"},
        {"re", "Re of the degenerate eigenvalue"}, {"im", "Im of the degenerate eigenvalue"},
        {"locator_residual", "|discriminant| / q^3"},
        {"gamma_effective", "effective-model arc: 2w (lower) or w^2/2 (upper)"}}},
      {"nexus",
       {{"w", "coupling"}, {"gamma", "dissipation rate"},
        {"re", "Re of the triple eigenvalue"}, {"im", "Im of the triple eigenvalue"},
        {"v1_re", "coalesced state component 1, real"}, {"v1_im", "component 1, imaginary"},
        {"v2_re", "component 2, real"}, {"v2_im", "component 2, imaginary"},
        {"v3_re", "component 3, real"}, {"v3_im", "component 3, imaginary"},
        {"overlap", "|<reference|v>| against (i/sqrt6, 1/sqrt2, -i/sqrt3)"}}},
      {"loop",
       {{"theta", "loop angle, z = eps exp(i theta)"},
        {"re_0", "Re E' of tracked branch 0"}, {"im_0", "Im E' of tracked branch 0"},
        {"re_1", "Re E' of tracked branch 1"}, {"im_1", "Im E' of tracked branch 1"},
        {"re_2", "Re E' of tracked branch 2"}, {"im_2", "Im E' of tracked branch 2"}}},
      {"scaling",
       {{"branch", "tracked branch id"}, {"exponent", "log-log slope of |E' - E_EX| against eps"},
        {"r2", "coefficient of determination"}, {"eps_min", "window start"}, {"eps_max", "window end"}}},
      {"berry",
       {{"branch", "starting branch"}, {"image", "branch reached after one loop"},
        {"cycles", "loops until the branch returns to itself"},
        {"phase", "transport phase in radians, smooth gauge"},
        {"phase_over_pi", "phase / pi"}, {"holonomy_over_pi", "phase wrapped to (-pi, pi], over pi"},
        {"loss", "real part of the accumulated complex phase"},
        {"closure_error", "|E after the closing loops - E at start|"},
        {"start_re", "Re E' at theta = 0"}, {"start_im", "Im E' at theta = 0"}}},
      {"evolve",
       {{"t", "time Omega_1 t"}, {"N", "total population"}, {"N1", "|psi_1|^2"}, {"N2", "|psi_2|^2"},
        {"N3", "|psi_3|^2"}}},
      {"snapshot", {{"gamma", "dissipation rate"}, {"N", "total population at t0"}}},
      {"measurements",
       {{"t", "time Omega_1 t"}, {"observable", "N, N1, N2 or N3"}, {"mean", "mean over repetitions"},
        {"sd", "sample standard deviation (0 for one repetition or noiseless data)"},
        {"repetitions", "number of draws"}}},
      {"fit_curves",
       {{"t", "time Omega_1 t"},
        {"N_two_rate", "N under the fitted two-rate model"}, {"N2_two_rate", "N2 under the two-rate model"},
        {"N3_two_rate", "N3 under the two-rate model"},
        {"N_one_rate", "N under the best single-rate model"}, {"N2_one_rate", "N2 under the single-rate model"},
        {"N3_one_rate", "N3 under the single-rate model"}}},
      {"fit_history", {{"step", "simplex iteration (restarts appended)"}, {"rss", "best rss so far"}}},
      {"alpha",
       {{"gamma", "dissipation rate"}, {"N", "total population at t0"},
        {"gamma_eff", "-ln N(t0) / t0"}, {"alpha", "d ln gamma_eff / d ln gamma on the smoothing spline"}}},
      {"ep_estimates",
       {{"w", "coupling"}, {"gamma_ep", "fitted degeneracy"}, {"std_error", "fit-covariance standard error"},
        {"gamma_exact", "nearest discriminant root"}, {"lambda0_re", "Re of the fitted center"},
        {"lambda0_im", "Im of the fitted center"}, {"n_points", "samples in the fitting window"}}},
  };
  return layouts;
}

CsvTable make_table(const std::string& layout) {
  std::vector<std::string> header;
  for (const auto& c : table_layouts().at(layout)) header.emplace_back(c.name);
  return CsvTable(std::move(header));
}

struct Table {
  std::string name;
  std::string layout;
  CsvTable csv;
};

// One command's worth of files: tables share a base path, metadata sits next to them.
struct Output {
  json meta;
  std::deque<Table> tables;
  int code = kExitOk;

  explicit Output(std::string_view command) : meta(io::base_metadata(command)) {}

  CsvTable& add(std::string name, const std::string& layout) {
    tables.push_back({std::move(name), layout, make_table(layout)});
    return tables.back().csv;
  }

  void flag(const std::string& status, const std::string& what, int exit_code) {
    meta["status"] = status;
    meta["flags"].push_back(what);
    code = exit_code;
  }
};

// Tables go to <dir>/<stem>.csv for the first and <dir>/<stem>_<name>.csv for
// the rest; metadata to <dir>/<stem>.json.
void emit(Output& o, const fs::path& dir, const std::string& stem, bool name_all) {
  json tables = json::array();
  for (std::size_t i = 0; i < o.tables.size(); ++i) {
    const auto& t = o.tables[i];
    const std::string file = (i == 0 && !name_all) ? stem + ".csv" : stem + "_" + t.name + ".csv";
    io::write_atomic(dir / file, t.csv.str());
    tables.push_back({{"name", t.name}, {"file", file}, {"columns", t.csv.header()}, {"rows", t.csv.rows()}});
  }
  o.meta["tables"] = tables;
  io::write_atomic(dir / (stem + ".json"), o.meta.dump(2) + "\n");
}

void emit_at(Output& o, const fs::path& csv_path) {
  const auto dir = csv_path.has_parent_path() ? csv_path.parent_path() : fs::path(".");
  emit(o, dir, csv_path.stem().string(), false);
}

// Shortest round-trip form, for summaries and file stems.
std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0)) throw std::invalid_argument("logarithmic grids need a positive lower end");
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = i + 1 == n ? hi : lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
  return g;
}

std::vector<double> grid_from(const std::string& spec, bool logarithmic) {
  const auto r = io::parse_range(spec);
  return logarithmic && r.n > 1 ? log_grid(r.min, r.max, r.n) : r.values();
}

void require_nonnegative(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be finite and >= 0");
}

// ---- tables shared by commands and figures --------------------------------

std::size_t fill_spectrum(CsvTable& t, double w, const std::vector<double>& grid) {
  const auto set = sweep_spectrum(w, grid);
  std::size_t degenerate = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    double ov = 1.0;
    if (k > 0) ov = std::min({set.overlaps[k - 1][0], set.overlaps[k - 1][1], set.overlaps[k - 1][2]});
    degenerate += set.degenerate[k] ? 1 : 0;
    t.add_numbers({grid[k], set.branches[0][k].real(), set.branches[0][k].imag(), set.branches[1][k].real(),
                   set.branches[1][k].imag(), set.branches[2][k].real(), set.branches[2][k].imag(), ov,
                   set.degenerate[k] ? 1.0 : 0.0});
  }
  return degenerate;
}

json ep_json(const EPRecord& r) {
  return {{"order", r.order},
          {"arc", to_string(r.arc)},
          {"location", json::array({r.location.w, r.location.gamma})},
          {"value", io::complex_json(r.value)},
          {"locator_residual", r.locator_residual}};
}

void fill_arcs(CsvTable& t, const ArcSet& arcs) {
  auto rows = [&](const std::vector<EPRecord>& list, const char* label, Regime regime) {
    for (const auto& r : list)
      t.add_row({label, std::to_string(r.order), format_number(r.location.w), format_number(r.location.gamma),
                 format_number(r.value.real()), format_number(r.value.imag()), format_number(r.locator_residual),
                 format_number(ep2_condition(r.location.w, regime))});
  };
  rows(arcs.lower, "lower", Regime::strong_coupling);
  rows(arcs.upper, "upper", Regime::zeno);
}

// Tracked eigenvalues around |z| = eps; TrackingLost when overlaps drop below 0.5.
void fill_loop(CsvTable& t, const PerturbationCase& pc, double eps, std::size_t n) {
  std::optional<EigenSystem> prev;
  for (std::size_t k = 0; k <= n; ++k) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    auto es = perturbed_spectrum(pc, eps, theta);
    if (prev) {
      const auto m = match_branches(prev->vectors, prev->values, es);
      if (m.min_overlap() < 0.5) throw TrackingLost("eigenvector overlap below 0.5 along the loop");
      es = permuted(es, m.perm);
    }
    t.add_numbers({theta, es.values[0].real(), es.values[0].imag(), es.values[1].real(), es.values[1].imag(),
                   es.values[2].real(), es.values[2].imag()});
    prev = es;
  }
}

void fill_trace(CsvTable& t, const DynamicsTrace& tr) {
  for (std::size_t k = 0; k < tr.times.size(); ++k)
    t.add_numbers({tr.times[k], tr.total[k], tr.populations[k][0], tr.populations[k][1], tr.populations[k][2]});
}

void fill_alpha(CsvTable& t, const std::vector<SnapshotPoint>& snap, const AlphaCurve& curve) {
  for (const auto& s : curve.samples) {
    const auto it = std::find_if(snap.begin(), snap.end(), [&](const SnapshotPoint& p) { return p.gamma == s.gamma; });
    const double n = it->population;
    t.add_numbers({s.gamma, n, -std::log(n) / curve.t0, s.alpha});
  }
}

std::string w_tag(double w) {
  std::string s = fmt(w);
  std::replace(s.begin(), s.end(), '.', 'p');
  return "w" + s;
}

// ---- subcommands ------------------------------------------------------------

std::string cmd_spectrum(double w, const std::string& range, bool logarithmic, const fs::path& out) {
  require_nonnegative(w, "--w");
  const auto grid = grid_from(range, logarithmic);
  Output o("spectrum");
  o.meta["parameters"] = {{"w", w}, {"gamma", range}, {"log", logarithmic}};
  auto& t = o.add("spectrum", "spectrum");
  const auto degenerate = fill_spectrum(t, w, grid);
  json eps = json::array();
  std::size_t inside = 0;
  if (w > 0.0)
    for (const auto& r : locate_ep2(w)) {
      eps.push_back(ep_json(r));
      if (r.location.gamma >= grid.front() && r.location.gamma <= grid.back()) ++inside;
    }
  o.meta["results"] = {{"ep_records", eps}, {"degenerate_grid_points", degenerate}};
  emit_at(o, out);
  std::ostringstream s;
  s << "spectrum: w=" << fmt(w) << ", " << grid.size() << " gamma points, " << inside << " EP(s) in range -> "
    << out.string();
  return s.str();
}

std::string cmd_arcs(const std::string& range, const fs::path& out) {
  const auto r = io::parse_range(range);
  if (r.n < 2) throw std::invalid_argument("--w needs min:max:n");
  if (r.min < 2.0 * std::numbers::sqrt2 * (1.0 - 1e-12))
    throw std::invalid_argument("--w range must start at or above 2*sqrt(2)");
  Output o("arcs");
  o.meta["parameters"] = {{"w", range}};
  const auto arcs = trace_arcs(r.min, r.max, r.n);
  fill_arcs(o.add("arcs", "arcs"), arcs);
  o.meta["results"] = {{"nexus", ep_json(locate_ex())},
                       {"lower_count", arcs.lower.size()},
                       {"upper_count", arcs.upper.size()}};
  emit_at(o, out);
  return "arcs: " + std::to_string(r.n) + " w samples in [" + fmt(r.min) + ", " + fmt(r.max) + "] -> " +
         out.string();
}

std::string cmd_nexus(const fs::path& out) {
  const auto ex = locate_ex();
  const auto es = eigensystem(build_hamiltonian(ex.location));
  const Vec3 v = model_eigenvector(ex.location.w, ex.value);
  const Vec3 ref{Complex(0.0, 1.0 / std::sqrt(6.0)), Complex(1.0 / std::sqrt(2.0), 0.0),
                 Complex(0.0, -1.0 / std::sqrt(3.0))};
  const double overlap = std::abs(vdot(ref, v));
  const double numeric_overlap = std::abs(vdot(ref, es.vectors[0]));
  // Express the state in the reference phase for readability.
  const Complex ph = vdot(v, ref) / std::abs(vdot(v, ref));
  const Vec3 shown = ph * v;

  Output o("nexus");
  o.meta["results"] = {{"location", json::array({ex.location.w, ex.location.gamma})},
                       {"value", io::complex_json(ex.value)},
                       {"order", ex.order},
                       {"locator_residual", ex.locator_residual},
                       {"eigenvector", io::vec_json(shown)},
                       {"reference_overlap", overlap},
                       {"numeric_overlap", numeric_overlap},
                       {"numeric_coalesced", es.coalesced},
                       {"numeric_values", json::array({io::complex_json(es.values[0]), io::complex_json(es.values[1]),
                                                       io::complex_json(es.values[2])})}};
  o.add("nexus", "nexus")
      .add_numbers({ex.location.w, ex.location.gamma, ex.value.real(), ex.value.imag(), shown[0].real(),
                    shown[0].imag(), shown[1].real(), shown[1].imag(), shown[2].real(), shown[2].imag(), overlap});
  emit_at(o, out);
  std::ostringstream s;
  s.precision(10);
  s << "nexus: w=" << ex.location.w << " gamma=" << ex.location.gamma << " E=" << ex.value.real()
    << (ex.value.imag() < 0 ? "" : "+") << ex.value.imag() << "i, state overlap " << overlap << " -> " << out.string();
  return s.str();
}

std::string cmd_perturb(const std::string& kind, double eps, std::size_t samples, const fs::path& out, int& code) {
  const auto pc = PerturbationCase::of(kind == "diag" ? PerturbationKind::diagonal : PerturbationKind::mixed);
  if (!(eps > 0.0)) throw std::invalid_argument("--eps must be > 0");
  if (samples < 8) throw std::invalid_argument("--samples must be >= 8");
  Output o("perturb");
  o.meta["parameters"] = {{"case", kind}, {"eps", eps}, {"samples", samples}};
  auto& loop = o.add("loop", "loop");
  auto& scaling = o.add("scaling", "scaling");
  std::string tail;
  try {
    fill_loop(loop, pc, eps, samples);
    const auto grid = log_grid(1e-4, 1e-2, 17);
    const auto fits = scaling_exponents(pc, 0.0, grid);
    json ex = json::array();
    for (const auto& f : fits) {
      scaling.add_numbers({static_cast<double>(f.branch_id), f.exponent, f.fit_quality, f.eps_min, f.eps_max});
      ex.push_back(f.exponent);
      tail += " " + fmt(std::round(f.exponent * 1000.0) / 1000.0);
    }
    o.meta["results"] = {{"exponents", ex}, {"scaling_theta", 0.0}};
  } catch (const TrackingLost& e) {
    o.flag("tracking_lost", e.what(), kExitNumeric);
    o.meta["error"] = e.what();
  }
  emit_at(o, out);
  code = o.code;
  return "perturb: case=" + kind + " eps=" + fmt(eps) + ", exponents" + (tail.empty() ? " n/a" : tail) + " -> " +
         out.string();
}

std::string cmd_berry(const std::string& kind, double eps, std::size_t samples, const fs::path& out, int& code) {
  const auto pc = PerturbationCase::of(kind == "diag" ? PerturbationKind::diagonal : PerturbationKind::mixed);
  if (!(eps > 0.0)) throw std::invalid_argument("--eps must be > 0");
  if (samples < 256) throw std::invalid_argument("--samples must be >= 256");
  Output o("berry");
  o.meta["parameters"] = {{"case", kind}, {"eps", eps}, {"samples", samples}};
  auto& t = o.add("berry", "berry");
  std::string tail;
  try {
    const auto res = berry_phase(pc, eps, samples);
    json rs = json::array();
    for (const auto& r : res) {
      t.add_numbers({static_cast<double>(r.branch_id), static_cast<double>(r.image_after_one_cycle),
                     static_cast<double>(r.cycles_to_closure), r.phase, r.phase / std::numbers::pi,
                     r.holonomy / std::numbers::pi, r.loss, r.closure_error, r.start_value.real(),
                     r.start_value.imag()});
      rs.push_back({{"branch", r.branch_id},
                    {"image_after_one_cycle", r.image_after_one_cycle},
                    {"cycles_to_closure", r.cycles_to_closure},
                    {"phase", r.phase},
                    {"phase_over_pi", r.phase / std::numbers::pi},
                    {"holonomy_over_pi", r.holonomy / std::numbers::pi},
                    {"loss", r.loss},
                    {"closure_error", r.closure_error},
                    {"start_value", io::complex_json(r.start_value)}});
      std::ostringstream s;
      s.precision(4);
      s << " [" << r.cycles_to_closure << " cycle(s), " << r.phase / std::numbers::pi << " pi]";
      tail += s.str();
    }
    o.meta["results"] = {{"branches", rs},
                         {"transport", "biorthogonal: -Im sum ln(<L_k|R_k+1>/<L_k|R_k>)"}};
  } catch (const TrackingLost& e) {
    o.flag("tracking_lost", e.what(), kExitNumeric);
    o.meta["error"] = e.what();
  }
  emit_at(o, out);
  code = o.code;
  return "berry: case=" + kind + " eps=" + fmt(eps) + (tail.empty() ? " tracking lost" : tail) + " -> " + out.string();
}

std::string cmd_evolve(double w, double gamma, std::optional<double> gamma2, std::optional<double> tm, double tmax,
                       std::size_t steps, int init, const fs::path& out) {
  require_nonnegative(w, "--w");
  require_nonnegative(gamma, "--gamma");
  if (gamma2.has_value() != tm.has_value()) throw std::invalid_argument("--gamma2 and --tm go together");
  if (!(tmax > 0.0)) throw std::invalid_argument("--tmax must be > 0");
  if (steps < 1) throw std::invalid_argument("--steps must be >= 1");
  const auto grid = uniform_grid(tmax, steps + 1);
  const auto psi0 = basis_state(init);
  Output o("evolve");
  o.meta["parameters"] = {{"w", w}, {"gamma", gamma}, {"tmax", tmax}, {"steps", steps}, {"init", init}};
  DynamicsTrace tr;
  if (gamma2) {
    require_nonnegative(*gamma2, "--gamma2");
    require_nonnegative(*tm, "--tm");
    o.meta["parameters"]["gamma2"] = *gamma2;
    o.meta["parameters"]["tm"] = *tm;
    tr = evolve_piecewise(w, gamma, *gamma2, *tm, psi0, grid);
  } else {
    tr = evolve({w, gamma}, psi0, grid);
  }
  fill_trace(o.add("evolve", "evolve"), tr);
  o.meta["results"] = {{"final_total", tr.total.back()}};
  emit_at(o, out);
  return "evolve: w=" + fmt(w) + " gamma=" + fmt(gamma) + (gamma2 ? " -> " + fmt(*gamma2) + " at " + fmt(*tm) : "") +
         ", N(" + fmt(tmax) + ")=" + fmt(tr.total.back()) + " -> " + out.string();
}

std::string cmd_snapshot(double w, double t0, const std::string& range, bool logarithmic, const fs::path& out) {
  require_nonnegative(w, "--w");
  if (!(t0 > 0.0)) throw std::invalid_argument("--t0 must be > 0");
  const auto grid = grid_from(range, logarithmic);
  for (double g : grid) require_nonnegative(g, "--gamma");
  const auto snap = decay_snapshot(w, grid, t0);
  Output o("snapshot");
  o.meta["parameters"] = {{"w", w}, {"t0", t0}, {"gamma", range}, {"log", logarithmic}};
  auto& t = o.add("snapshot", "snapshot");
  for (const auto& s : snap) t.add_numbers({s.gamma, s.population});
  const auto mn = std::min_element(snap.begin(), snap.end(),
                                   [](const auto& a, const auto& b) { return a.population < b.population; });
  o.meta["results"] = {{"min_population", mn->population}, {"gamma_at_min", mn->gamma}};
  emit_at(o, out);
  return "snapshot: w=" + fmt(w) + " t0=" + fmt(t0) + ", min N=" + fmt(mn->population) + " at gamma=" +
         fmt(mn->gamma) + " -> " + out.string();
}

std::string cmd_synth(double w, double g1, double g2, double tm, double sigma, int reps, std::uint64_t seed,
                      double tmax, std::size_t points, int init, const fs::path& out) {
  require_nonnegative(w, "--w");
  require_nonnegative(g1, "--gamma1");
  require_nonnegative(g2, "--gamma2");
  require_nonnegative(tm, "--tm");
  require_nonnegative(sigma, "--sigma");
  if (reps < 1) throw std::invalid_argument("--reps must be >= 1");
  if (points < 2 || !(tmax > 0.0)) throw std::invalid_argument("--points >= 2 and --tmax > 0 required");
  Rng rng(seed);
  const auto grid = uniform_grid(tmax, points);
  auto data = synth_dataset(w, g1, g2, tm, sigma, reps, grid, rng, init);
  data.provenance->seed = seed;
  auto meta = io::base_metadata("synth");
  meta["seed"] = seed;
  meta["parameters"] = {{"w", w},     {"gamma1", g1},       {"gamma2", g2},         {"tm", tm},     {"sigma", sigma},
                        {"reps", reps}, {"seed", seed},     {"tmax", tmax},         {"points", points}, {"init", init}};
  meta["results"] = {{"records", data.records.size()}};
  meta["tables"] = json::array({{{"name", "measurements"},
                                 {"file", out.filename().string()},
                                 {"columns", io::measurements_table(data).header()},
                                 {"rows", data.records.size()}}});
  io::write_measurements(data, out, meta);
  return "synth: " + std::to_string(data.records.size()) + " records (w=" + fmt(w) + ", seed " + std::to_string(seed) +
         ") -> " + out.string();
}

std::string cmd_fit(const fs::path& data_path, double w, double nominal, const std::string& observables, int init,
                    int max_iterations, const fs::path& out, int& code) {
  require_nonnegative(w, "--w");
  require_nonnegative(nominal, "--nominal-gamma");
  auto data = io::read_measurements(data_path);
  if (max_iterations < 1) throw std::invalid_argument("--max-iterations must be >= 1");
  FitOptions opt;
  opt.initial_level = init;
  opt.simplex.max_iterations = max_iterations;
  opt.observables.clear();
  std::stringstream ss(observables);
  for (std::string item; std::getline(ss, item, ',');) opt.observables.push_back(observable_from_string(item));
  if (opt.observables.empty()) throw std::invalid_argument("--observables is empty");

  const auto two = fit_two_rate(data, w, nominal, opt);
  const auto one = fit_one_rate(data, w, nominal, opt);

  Output o("fit");
  o.meta["parameters"] = {{"data", data_path.string()}, {"w", w}, {"nominal_gamma", nominal},
                          {"observables", observables}, {"init", init},
                          {"max_iterations", max_iterations}};
  json used = json::array();
  for (auto ob : two.observables) used.push_back(to_string(ob));
  o.meta["results"] = {{"gamma1", two.gamma1},
                       {"gamma2", two.gamma2},
                       {"t_m", two.t_m},
                       {"rss", two.rss},
                       {"iterations", two.iterations},
                       {"converged", two.converged},
                       {"t_m_identifiable", two.t_m_identifiable},
                       {"observables_used", used},
                       {"initial", json::array({two.initial[0], two.initial[1], two.initial[2]})},
                       {"one_rate", {{"gamma", one.gamma1}, {"rss", one.rss}, {"converged", one.converged}}}};
  o.meta["dataset"] = io::measurements_json(data);
  if (data.provenance) {
    const auto& p = *data.provenance;
    o.meta["results"]["truth_error"] = {{"gamma1_rel", std::abs(two.gamma1 - p.gamma1) / std::max(p.gamma1, 1e-300)},
                                        {"gamma2_rel", std::abs(two.gamma2 - p.gamma2) / std::max(p.gamma2, 1e-300)},
                                        {"t_m_abs", std::abs(two.t_m - p.t_m)}};
  }
  if (!two.converged) o.flag("not_converged", "two-rate simplex hit the iteration cap", kExitNumeric);

  std::vector<double> times;
  for (const auto& r : data.records) times.push_back(r.t);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  const auto psi0 = basis_state(init);
  const auto tr2 = evolve_piecewise(w, two.gamma1, two.gamma2, two.t_m, psi0, times);
  const auto tr1 = evolve({w, one.gamma1}, psi0, times);
  auto& curves = o.add("curves", "fit_curves");
  for (std::size_t k = 0; k < times.size(); ++k)
    curves.add_numbers({times[k], tr2.total[k], tr2.populations[k][1], tr2.populations[k][2], tr1.total[k],
                        tr1.populations[k][1], tr1.populations[k][2]});
  auto& hist = o.add("history", "fit_history");
  for (std::size_t k = 0; k < two.rss_history.size(); ++k)
    hist.add_numbers({static_cast<double>(k), two.rss_history[k]});
  emit_at(o, out);
  code = o.code;
  return "fit: gamma1=" + fmt(two.gamma1) + " gamma2=" + fmt(two.gamma2) + " t_m=" + fmt(two.t_m) + " rss=" +
         fmt(two.rss) + (two.converged ? "" : " (not converged)") + " -> " + out.string();
}

std::string cmd_alpha(double w, double t0, const std::string& range, bool logarithmic, const fs::path& out) {
  require_nonnegative(w, "--w");
  if (!(t0 > 0.0)) throw std::invalid_argument("--t0 must be > 0");
  const auto grid = grid_from(range, logarithmic);
  for (double g : grid) require_nonnegative(g, "--gamma");
  const auto snap = decay_snapshot(w, grid, t0);
  const auto curve = extract_alpha(snap, t0, w);
  Output o("alpha");
  o.meta["parameters"] = {{"w", w}, {"t0", t0}, {"gamma", range}, {"log", logarithmic}};
  fill_alpha(o.add("alpha", "alpha"), snap, curve);
  o.meta["results"] = {{"dropped_gammas", curve.dropped},
                       {"smoothing", curve.smoothing},
                       {"alpha_first", curve.samples.front().alpha},
                       {"alpha_last", curve.samples.back().alpha}};
  if (!curve.dropped.empty()) o.meta["flags"].push_back("points with N(t0) outside (0, 1) dropped");
  emit_at(o, out);
  return "alpha: w=" + fmt(w) + " t0=" + fmt(t0) + ", alpha from " + fmt(curve.samples.front().alpha) + " to " +
         fmt(curve.samples.back().alpha) + " -> " + out.string();
}

// ---- figures ------------------------------------------------------------------

const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids = {"fig1a", "fig1b",  "fig1c-left", "fig1c-right",
                                               "fig2d-model", "fig3a", "fig3b", "fig3d-h"};
  return ids;
}

std::string figure(const std::string& id, const fs::path& dir, int& code) {
  Output o("figure");
  o.meta["figure"] = id;
  std::string stem = id;
  std::replace(stem.begin(), stem.end(), '-', '_');
  std::string summary;
  const double wex = 2.0 * std::numbers::sqrt2;

  if (id == "fig1a") {
    const auto grid = io::Range{0.0, 15.0, 601}.values();
    json ws = json::array();
    for (double w : {6.0, 4.5, wex}) {
      fill_spectrum(o.add(w == wex ? "w2sqrt2" : w_tag(w), "spectrum"), w, grid);
      ws.push_back(w);
    }
    o.meta["parameters"] = {{"w", ws}, {"gamma", "0:15:601"}};
    summary = "3 spectra (w = 6, 4.5, 2 sqrt 2)";
  } else if (id == "fig1b") {
    const auto arcs = trace_arcs(wex, 6.0, 50);
    fill_arcs(o.add("arcs", "arcs"), arcs);
    o.meta["parameters"] = {{"w", json::array({wex, 6.0})}, {"samples", 50}};
    o.meta["results"] = {{"nexus", ep_json(locate_ex())}};
    summary = "2 arcs over w in [2 sqrt 2, 6]";
  } else if (id == "fig1c-left" || id == "fig1c-right") {
    const auto pc = id == "fig1c-left" ? PerturbationCase::diagonal() : PerturbationCase::mixed();
    o.meta["parameters"] = {{"case", to_string(pc.kind)}, {"eps", 0.1}, {"samples", 720}};
    try {
      fill_loop(o.add("loop", "loop"), pc, 0.1, 720);
      summary = "loop at eps = 0.1, case " + std::string(to_string(pc.kind));
    } catch (const TrackingLost& e) {
      o.flag("tracking_lost", e.what(), kExitNumeric);
      summary = "tracking lost";
    }
  } else if (id == "fig2d-model") {
    const auto grid = uniform_grid(3.0, 200);
    const std::vector<std::pair<double, double>> curves = {{2.8, 1.0}, {3.8, 2.0}, {4.5, 8.0}, {4.5, 17.0}};
    json ps = json::array();
    for (auto [w, g] : curves) {
      fill_trace(o.add(w_tag(w) + "_g" + fmt(g), "evolve"), evolve({w, g}, basis_state(2), grid));
      ps.push_back(json::array({w, g}));
    }
    fill_trace(o.add("two_rate", "evolve"), evolve_piecewise(4.5, 17.0, 8.0, 0.5, basis_state(2), grid));
    o.meta["parameters"] = {{"single_rate", ps},
                            {"two_rate", {{"w", 4.5}, {"gamma1", 17.0}, {"gamma2", 8.0}, {"t_m", 0.5}}},
                            {"t", "0:3:200"},
                            {"init", 2}};
    summary = "4 single-rate curves and one two-rate curve";
  } else if (id == "fig3a" || id == "fig3b") {
    const auto grid = log_grid(0.01, 250.0, 161);
    for (double w : {2.8, 3.8, 4.5}) {
      const auto snap = decay_snapshot(w, grid, 0.8);
      if (id == "fig3a") {
        auto& t = o.add(w_tag(w), "snapshot");
        for (const auto& s : snap) t.add_numbers({s.gamma, s.population});
      } else {
        const auto curve = extract_alpha(snap, 0.8, w);
        fill_alpha(o.add(w_tag(w), "alpha"), snap, curve);
        o.meta["results"][w_tag(w)] = {{"smoothing", curve.smoothing}, {"dropped_gammas", curve.dropped}};
      }
    }
    o.meta["parameters"] = {{"w", json::array({2.8, 3.8, 4.5})}, {"t0", 0.8}, {"gamma", "log 0.01:250:161"}};
    summary = id == "fig3a" ? "N(t0) snapshots for w = 2.8, 3.8, 4.5" : "alpha curves for w = 2.8, 3.8, 4.5";
  } else if (id == "fig3d-h") {
    auto& est = o.add("ep_estimates", "ep_estimates");
    json no_bracket = json::array();
    for (double w : {4.5, 3.8, 3.0, 2.8}) {
      const auto coarse = io::Range{0.0, 16.0, 321}.values();
      fill_spectrum(o.add(w_tag(w), "spectrum"), w, coarse);
      // Fine sweep around the closest approach of any two branches.
      const auto cset = sweep_spectrum(w, coarse);
      double best = 1e300, at = 0.0;
      for (std::size_t k = 0; k < coarse.size(); ++k)
        for (int i = 0; i < 3; ++i)
          for (int j = i + 1; j < 3; ++j) {
            const double g = std::abs(cset.branches[i][k] - cset.branches[j][k]);
            if (g < best) {
              best = g;
              at = coarse[k];
            }
          }
      const double lo = std::max(1e-6, at - 3.0), hi = at + 3.0;
      const auto fine = io::Range{lo, hi, 12001}.values();
      const auto fset = sweep_spectrum(w, fine);
      const auto exact = w > wex ? locate_ep2(w) : std::vector<EPRecord>{};
      std::size_t found = 0;
      for (const auto& c : ep_windows(fset, 7)) {
        try {
          const auto e = ep_from_eigencurves(c);
          double nearest = std::numeric_limits<double>::quiet_NaN();
          for (const auto& r : exact)
            if (std::isnan(nearest) || std::abs(r.location.gamma - e.gamma_ep) < std::abs(nearest - e.gamma_ep))
              nearest = r.location.gamma;
          est.add_numbers({w, e.gamma_ep, e.std_error, nearest, e.lambda0.real(), e.lambda0.imag(),
                           static_cast<double>(e.n_points)});
          ++found;
        } catch (const NoBracket&) {
        }
      }
      if (found == 0) no_bracket.push_back(w);
    }
    fill_arcs(o.add("arcs", "arcs"), trace_arcs(wex, 6.0, 50));
    o.meta["parameters"] = {{"w", json::array({4.5, 3.8, 3.0, 2.8})}, {"gamma", "0:16:321"}};
    o.meta["results"] = {{"no_bracket_w", no_bracket}, {"estimates", est.rows()}};
    summary = std::to_string(est.rows()) + " EP estimates, no bracket at " + std::to_string(no_bracket.size()) + " w";
  } else {
    throw std::invalid_argument("unknown figure id '" + id + "'");
  }
  emit(o, dir, stem, true);
  code = o.code;
  return "figure " + id + ": " + summary + " -> " + (dir / (stem + ".json")).string();
}

}  // namespace

json schema_document() {
  json tables = json::object();
  for (const auto& [name, cols] : table_layouts()) {
    json cs = json::array();
    for (const auto& c : cols) cs.push_back({{"name", c.name}, {"description", c.doc}});
    tables[name] = cs;
  }
  return {{"toolkit", "exnexus"},
          {"version", io::kVersion},
          {"units", io::kUnits},
          {"csv", {{"number_format", "17 significant digits, '.' decimal separator, locale independent"},
                   {"header", "first row"}}},
          {"complex_numbers", "JSON arrays [re, im]"},
          {"figures", figure_ids()},
          {"exit_codes", {{"0", "ok"}, {"1", "other numerical failure"}, {"2", "argument error"}, {"3", "file I/O error"},
                          {"4", "not converged or tracking lost (partial output written and flagged)"}}},
          {"tables", tables},
          {"metadata_schema", json::parse(kResultSchemaJson)}};
}

int run(const std::vector<std::string>& args, std::ostream& sout, std::ostream& serr) {
  CLI::App app{"Spectra, exceptional points, transport phases, dynamics and fits for the three-state lossy model", "exnexus"};
  bool schema = false;
  app.add_flag("--schema", schema, "Print table columns and the metadata JSON schema");
  app.require_subcommand(0, 1);

  const std::vector<std::string> cases{"diag", "mixed"};

  double w = 0.0, gamma_v = 0.0, eps = 0.1, t0 = 0.8, tmax = 3.0, g1 = 0.0, g2 = 0.0, tm = 0.0, sigma = 0.0,
         nominal = 0.0;
  std::optional<double> opt_g2, opt_tm;
  std::string range, kind = "diag", observables = "N,N2", fig;
  std::size_t samples = 2048, steps = 300, points = 200;
  int init = 2, reps = 3, max_iterations = 500;
  std::uint64_t seed = 0;
  bool logarithmic = false;
  fs::path out, data;

  auto* spectrum = app.add_subcommand("spectrum", "Tracked spectrum against gamma at fixed w");
  spectrum->add_option("--w", w, "Coupling w")->required();
  spectrum->add_option("--gamma", range, "Gamma grid min:max:n")->required();
  spectrum->add_flag("--log", logarithmic, "Logarithmic spacing");
  spectrum->add_option("--out", out, "CSV path (metadata next to it)")->default_str("spectrum.csv");

  auto* arcs = app.add_subcommand("arcs", "Both exceptional arcs over a w range");
  arcs->add_option("--w", range, "w grid min:max:n, min >= 2 sqrt 2")->required();
  arcs->add_option("--out", out, "CSV path")->default_str("arcs.csv");

  auto* nexus = app.add_subcommand("nexus", "Locate the exceptional nexus");
  nexus->add_option("--out", out, "CSV path")->default_str("nexus.csv");

  auto* perturb = app.add_subcommand("perturb", "Perturbed spectrum around the loop and splitting exponents");
  perturb->add_option("--case", kind, "diag or mixed")->required()->check(CLI::IsMember(cases));
  perturb->add_option("--eps", eps, "Loop radius")->required();
  perturb->add_option("--samples", samples, "Loop samples")->required();
  perturb->add_option("--out", out, "CSV path")->default_str("perturb.csv");

  auto* berry = app.add_subcommand("berry", "Transport phases around |z| = eps");
  berry->add_option("--case", kind, "diag or mixed")->required()->check(CLI::IsMember(cases));
  berry->add_option("--eps", eps, "Loop radius")->required();
  berry->add_option("--samples", samples, "Samples per loop (>= 256)")->required();
  berry->add_option("--out", out, "CSV path")->default_str("berry.csv");

  auto* evolve_cmd = app.add_subcommand("evolve", "Population dynamics from a basis state");
  evolve_cmd->add_option("--w", w, "Coupling w")->required();
  evolve_cmd->add_option("--gamma", gamma_v, "Gamma (gamma1 when --gamma2 is given)")->required();
  evolve_cmd->add_option("--gamma2", opt_g2, "Gamma after t_m");
  evolve_cmd->add_option("--tm", opt_tm, "Switch time");
  evolve_cmd->add_option("--tmax", tmax, "End time")->required();
  evolve_cmd->add_option("--steps", steps, "Number of intervals")->required();
  evolve_cmd->add_option("--init", init, "Initial level")->required()->check(CLI::Range(1, 3));
  evolve_cmd->add_option("--out", out, "CSV path")->default_str("evolve.csv");

  auto* snapshot = app.add_subcommand("snapshot", "N(t0) against gamma starting from |2>");
  snapshot->add_option("--w", w, "Coupling w")->required();
  snapshot->add_option("--t0", t0, "Snapshot time")->required();
  snapshot->add_option("--gamma", range, "Gamma grid min:max:n")->required();
  snapshot->add_flag("--log", logarithmic, "Logarithmic spacing");
  snapshot->add_option("--out", out, "CSV path")->default_str("snapshot.csv");

  auto* synth = app.add_subcommand("synth", "Synthetic two-rate measurement set");
  synth->add_option("--w", w, "Coupling w")->required();
  synth->add_option("--gamma1", g1, "Gamma before t_m")->required();
  synth->add_option("--gamma2", g2, "Gamma after t_m")->required();
  synth->add_option("--tm", tm, "Switch time")->required();
  synth->add_option("--sigma", sigma, "Gaussian noise sd per draw")->required();
  synth->add_option("--reps", reps, "Draws per time point")->required();
  synth->add_option("--seed", seed, "Random seed")->required();
  synth->add_option("--out", out, "CSV path (JSON sidecar next to it)")->required();
  synth->add_option("--tmax", tmax, "End time")->default_val(3.0);
  synth->add_option("--points", points, "Time points")->default_val(200);
  synth->add_option("--init", init, "Initial level")->default_val(2)->check(CLI::Range(1, 3));

  auto* fit_cmd = app.add_subcommand("fit", "Two-rate fit of a measurement set");
  fit_cmd->add_option("--data", data, "Measurement CSV")->required();
  fit_cmd->add_option("--w", w, "Coupling w")->required();
  fit_cmd->add_option("--nominal-gamma", nominal, "Nominal gamma for the initialization")->required();
  fit_cmd->add_option("--observables", observables, "Comma-separated subset of N,N1,N2,N3")->default_str("N,N2");
  fit_cmd->add_option("--init", init, "Initial level of the model")->default_val(2)->check(CLI::Range(1, 3));
  fit_cmd->add_option("--max-iterations", max_iterations, "Simplex iteration budget")->default_val(500);
  fit_cmd->add_option("--out", out, "CSV path")->default_str("fit.csv");

  auto* alpha = app.add_subcommand("alpha", "Exponent alpha of the snapshot loss rate");
  alpha->add_option("--w", w, "Coupling w")->required();
  alpha->add_option("--t0", t0, "Snapshot time")->required();
  alpha->add_option("--gamma", range, "Gamma grid min:max:n")->required();
  alpha->add_flag("--log", logarithmic, "Logarithmic spacing");
  alpha->add_option("--out", out, "CSV path")->default_str("alpha.csv");

  auto* figure_cmd = app.add_subcommand("figure", "Data bundle for one figure panel");
  figure_cmd->add_option("figure_id", fig, "Figure id")->required()->check(CLI::IsMember(figure_ids()));
  figure_cmd->add_option("--out", out, "Output directory")->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    sout << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    sout << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    serr << "exnexus: " << e.what() << "\n";
    return kExitUsage;
  }

  if (schema) {
    sout << schema_document().dump(2) << "\n";
    return kExitOk;
  }
  if (app.get_subcommands().empty()) {
    serr << "exnexus: a subcommand is required (see --help)\n";
    return kExitUsage;
  }
  auto path_or = [&](const char* def) { return out.empty() ? fs::path(def) : out; };

  int code = kExitOk;
  try {
    std::string line;
    if (spectrum->parsed()) {
      line = cmd_spectrum(w, range, logarithmic, path_or("spectrum.csv"));
    } else if (arcs->parsed()) {
      line = cmd_arcs(range, path_or("arcs.csv"));
    } else if (nexus->parsed()) {
      line = cmd_nexus(path_or("nexus.csv"));
    } else if (perturb->parsed()) {
      line = cmd_perturb(kind, eps, samples, path_or("perturb.csv"), code);
    } else if (berry->parsed()) {
      line = cmd_berry(kind, eps, samples, path_or("berry.csv"), code);
    } else if (evolve_cmd->parsed()) {
      line = cmd_evolve(w, gamma_v, opt_g2, opt_tm, tmax, steps, init, path_or("evolve.csv"));
    } else if (snapshot->parsed()) {
      line = cmd_snapshot(w, t0, range, logarithmic, path_or("snapshot.csv"));
    } else if (synth->parsed()) {
      line = cmd_synth(w, g1, g2, tm, sigma, reps, seed, tmax, points, init, out);
    } else if (fit_cmd->parsed()) {
      line = cmd_fit(data, w, nominal, observables, init, max_iterations, path_or("fit.csv"), code);
    } else if (alpha->parsed()) {
      line = cmd_alpha(w, t0, range, logarithmic, path_or("alpha.csv"));
    } else if (figure_cmd->parsed()) {
      line = figure(fig, out, code);
    }
    sout << line << "\n";
    return code;
  } catch (const io::IoError& e) {
    serr << "exnexus: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    serr << "exnexus: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    serr << "exnexus: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DivisionByZero& e) {
    serr << "exnexus: " << e.what() << "\n";
    return kExitUsage;
  } catch (const TrackingLost& e) {
    serr << "exnexus: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    serr << "exnexus: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace exnexus::cli
