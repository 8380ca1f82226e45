#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <unistd.h>

#include "exnexus/cli.hpp"
#include "exnexus/io.hpp"

using namespace exnexus;
namespace fs = std::filesystem;
using io::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("exnexus_cli_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream o, e;
  const int c = cli::run(args, o, e);
  return {c, o.str(), e.str()};
}

int shell(const std::string& env, const std::string& args) {
  const std::string cmd = env + " '" + std::string(EXNEXUS_CLI_PATH) + "' " + args + " > /dev/null 2>&1";
  const int s = std::system(cmd.c_str());
  return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
}

json read_json(const fs::path& p) { return json::parse(io::read_file(p)); }

void check_tables(const fs::path& dir, const json& meta) {
  REQUIRE(meta["tables"].is_array());
  for (const auto& t : meta["tables"]) {
    const auto csv = io::parse_csv(io::read_file(dir / t["file"].get<std::string>()));
    CHECK(csv.header == t["columns"].get<std::vector<std::string>>());
    CHECK(csv.rows.size() == t["rows"].get<std::size_t>());
    for (const auto& row : csv.rows)
      for (const auto& cell : row) {
        REQUIRE_FALSE(cell.empty());
        REQUIRE(cell.find("nan") == std::string::npos);
        REQUIRE(cell.find("inf") == std::string::npos);
      }
  }
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("nexus") {
    TempDir tmp("nexus");
    const auto r = run({"nexus", "--out", (tmp.path / "n.csv").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("nexus:") == 0);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 1);
    const auto j = read_json(tmp.path / "n.json");
    CHECK(std::abs(j["results"]["location"][0].get<double>() - 2.8284271247461903) < 1e-9);
    CHECK(std::abs(j["results"]["location"][1].get<double>() - 5.196152422706632) < 1e-9);
    CHECK(std::abs(j["results"]["value"][0].get<double>()) < 1e-9);
    CHECK(std::abs(j["results"]["value"][1].get<double>() + 1.7320508075688772) < 1e-9);
    CHECK(j["units"].get<std::string>().find("dimensionless") != std::string::npos);
    check_tables(tmp.path, j);
  }

  TEST_CASE("subcommands write csv and json") {
    TempDir tmp("all");
    const auto p = [&](const char* f) { return (tmp.path / f).string(); };
    const std::vector<std::vector<std::string>> cmds = {
        {"spectrum", "--w", "3", "--gamma", "0:12:121", "--out", p("spectrum.csv")},
        {"spectrum", "--w", "3", "--gamma", "0.01:100:50", "--log", "--out", p("spectrum_log.csv")},
        {"arcs", "--w", "2.8284271247461903:6:20", "--out", p("arcs.csv")},
        {"perturb", "--case", "mixed", "--eps", "0.1", "--samples", "64", "--out", p("perturb.csv")},
        {"berry", "--case", "diag", "--eps", "0.1", "--samples", "512", "--out", p("berry.csv")},
        {"evolve", "--w", "4.5", "--gamma", "17", "--gamma2", "8", "--tm", "0.5", "--tmax", "3", "--steps", "30",
         "--init", "2", "--out", p("evolve.csv")},
        {"snapshot", "--w", "3.8", "--t0", "0.8", "--gamma", "0.1:100:40", "--log", "--out", p("snapshot.csv")},
        {"alpha", "--w", "3.8", "--t0", "0.8", "--gamma", "0.01:190:60", "--log", "--out", p("alpha.csv")},
    };
    for (const auto& c : cmds) {
      const auto r = run(c);
      INFO(c[0]);
      REQUIRE(r.code == 0);
      const fs::path csv = c.back();
      const auto j = read_json(csv.parent_path() / (csv.stem().string() + ".json"));
      CHECK(j["command"] == c[0]);
      CHECK(j["status"] == "ok");
      check_tables(tmp.path, j);
    }
    const auto ev = io::parse_csv(io::read_file(tmp.path / "evolve.csv"));
    CHECK(ev.rows.size() == 31);
  }

  TEST_CASE("figures") {
    TempDir tmp("fig");
    for (const char* id : {"fig1a", "fig1b", "fig1c-left", "fig1c-right", "fig2d-model", "fig3a", "fig3b", "fig3d-h"}) {
      const auto r = run({"figure", id, "--out", tmp.path.string()});
      INFO(id);
      REQUIRE(r.code == 0);
      std::string stem = id;
      std::replace(stem.begin(), stem.end(), '-', '_');
      const auto j = read_json(tmp.path / (stem + ".json"));
      CHECK(j["figure"] == id);
      check_tables(tmp.path, j);
    }
    CHECK(fs::exists(tmp.path / "fig1a_w6.csv"));
    CHECK(fs::exists(tmp.path / "fig1a_w4p5.csv"));
    CHECK(fs::exists(tmp.path / "fig1a_w2sqrt2.csv"));
    CHECK(run({"figure", "fig9", "--out", tmp.path.string()}).code == cli::kExitUsage);
  }

  TEST_CASE("synth then fit reproduces the round trip") {
    TempDir tmp("rt");
    const auto data = (tmp.path / "d.csv").string();
    REQUIRE(run({"synth", "--w", "4.5", "--gamma1", "17", "--gamma2", "8", "--tm", "0.5", "--sigma", "0.02", "--reps",
                 "3", "--seed", "20240501", "--out", data})
                .code == 0);
    const auto r = run({"fit", "--data", data, "--w", "4.5", "--nominal-gamma", "17", "--out",
                        (tmp.path / "f.csv").string()});
    REQUIRE(r.code == 0);
    const auto j = read_json(tmp.path / "f.json");
    CHECK(std::abs(j["results"]["gamma1"].get<double>() - 17.0) <= 1.7);
    CHECK(std::abs(j["results"]["gamma2"].get<double>() - 8.0) <= 0.8);
    CHECK(std::abs(j["results"]["t_m"].get<double>() - 0.5) <= 0.05);
    CHECK(j["results"]["observables_used"] == json::array({"N", "N2"}));
    check_tables(tmp.path, j);
  }

  TEST_CASE("synth is deterministic for a fixed seed") {
    TempDir tmp("det");
    const std::string args = "synth --w 4.5 --gamma1 17 --gamma2 8 --tm 0.5 --sigma 0.02 --reps 3 --seed 7 --out ";
    REQUIRE(shell("", args + (tmp.path / "a.csv").string()) == 0);
    REQUIRE(shell("", args + (tmp.path / "b.csv").string()) == 0);
    CHECK(io::read_file(tmp.path / "a.csv") == io::read_file(tmp.path / "b.csv"));
    auto ja = read_json(tmp.path / "a.json"), jb = read_json(tmp.path / "b.json");
    CHECK(ja["seed"] == 7);
    ja["tables"][0].erase("file");
    jb["tables"][0].erase("file");
    CHECK(ja == jb);
  }

  TEST_CASE("thread count never changes output") {
    TempDir tmp("thr");
    const auto a = tmp.path / "a", b = tmp.path / "b";
    REQUIRE(shell("EXNEXUS_THREADS=1", "figure fig3d-h --out " + a.string()) == 0);
    REQUIRE(shell("EXNEXUS_THREADS=8", "figure fig3d-h --out " + b.string()) == 0);
    REQUIRE(shell("EXNEXUS_THREADS=1", "spectrum --w 4.5 --gamma 0:16:400 --out " + (a / "s.csv").string()) == 0);
    REQUIRE(shell("EXNEXUS_THREADS=5", "spectrum --w 4.5 --gamma 0:16:400 --out " + (b / "s.csv").string()) == 0);
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(a)) {
      CHECK(io::read_file(e.path()) == io::read_file(b / e.path().filename()));
      ++n;
    }
    CHECK(n > 5);
  }

  TEST_CASE("argument errors exit with 2") {
    CHECK(run({}).code == cli::kExitUsage);
    CHECK(run({"bogus"}).code == cli::kExitUsage);
    CHECK(run({"spectrum", "--w", "3"}).code == cli::kExitUsage);
    CHECK(run({"spectrum", "--w", "3", "--gamma", "5:1:10", "--out", "/tmp/x.csv"}).code == cli::kExitUsage);
    CHECK(run({"spectrum", "--w", "-1", "--gamma", "0:1:10", "--out", "/tmp/x.csv"}).code == cli::kExitUsage);
    CHECK(run({"berry", "--case", "other", "--eps", "0.1", "--samples", "512"}).code == cli::kExitUsage);
    CHECK(run({"berry", "--case", "diag", "--eps", "0.1", "--samples", "64"}).code == cli::kExitUsage);
    CHECK(run({"evolve", "--w", "1", "--gamma", "1", "--tmax", "1", "--steps", "10", "--init", "4"}).code ==
          cli::kExitUsage);
    CHECK(run({"arcs", "--w", "1:6:10"}).code == cli::kExitUsage);
    CHECK(shell("", "nexus --no-such-flag") == cli::kExitUsage);
  }

  TEST_CASE("I/O errors exit with 3") {
    TempDir tmp("io");
    CHECK(run({"fit", "--data", (tmp.path / "missing.csv").string(), "--w", "4.5", "--nominal-gamma", "17"}).code ==
          cli::kExitIo);
    io::write_atomic(tmp.path / "blocker", "x");
    CHECK(run({"nexus", "--out", (tmp.path / "blocker" / "n.csv").string()}).code == cli::kExitIo);
    io::write_atomic(tmp.path / "junk.csv", "not,a\nmeasurement,set\n");
    CHECK(run({"fit", "--data", (tmp.path / "junk.csv").string(), "--w", "4.5", "--nominal-gamma", "17"}).code ==
          cli::kExitIo);
  }

  TEST_CASE("iteration cap exits with 4 and flags the partial result") {
    TempDir tmp("nc");
    const auto data = (tmp.path / "d.csv").string();
    REQUIRE(run({"synth", "--w", "4.5", "--gamma1", "17", "--gamma2", "8", "--tm", "0.5", "--sigma", "0.02", "--reps",
                 "3", "--seed", "1", "--out", data})
                .code == 0);
    const auto r = run({"fit", "--data", data, "--w", "4.5", "--nominal-gamma", "17", "--max-iterations", "4",
                        "--out", (tmp.path / "f.csv").string()});
    CHECK(r.code == cli::kExitNumeric);
    const auto j = read_json(tmp.path / "f.json");
    CHECK(j["status"] != "ok");
    CHECK(j["results"]["converged"] == false);
    CHECK_FALSE(j["flags"].empty());
    CHECK(fs::exists(tmp.path / "f.csv"));
  }

  TEST_CASE("schema dump") {
    const auto r = run({"--schema"});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j["tables"].contains("spectrum"));
    CHECK(j["tables"].contains("measurements"));
    CHECK(j["metadata_schema"]["required"].size() >= 9);
    CHECK(j["figures"].size() == 8);
    for (auto& [name, cols] : j["tables"].items())
      for (const auto& c : cols) CHECK_FALSE(c["description"].get<std::string>().empty());
  }

  TEST_CASE("help exits cleanly") {
    const auto r = run({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("figure") != std::string::npos);
  }
}
