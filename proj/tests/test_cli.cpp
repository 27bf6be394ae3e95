#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "chainlab/cli/commands.hpp"

using namespace chainlab;
using namespace chainlab::cli;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per call, removed when the guard goes out of scope.
struct ScratchDir {
  fs::path path;
  explicit ScratchDir(const std::string& name) : path(fs::temp_directory_path() / ("chainlab_test_" + name)) {
    fs::remove_all(path);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

KeyValueFile parse_text(const std::string& text) {
  std::istringstream in(text);
  return KeyValueFile::parse(in, "test.ini");
}

RunConfig zero_field(const std::string& command, int n, Boundary b) {
  RunConfig cfg;
  cfg.command = command;
  cfg.model.n = n;
  cfg.model.boundary = b;
  cfg.model.A = 0.0;
  cfg.model.B = 0.0;
  cfg.model.C = 0.0;
  return cfg;
}

int run(const RunConfig& cfg, const fs::path& dir, std::string* errors = nullptr) {
  OutputSink sink(dir);
  std::ostringstream log, err;
  const int code = dispatch(cfg, sink, log, err);
  if (errors) *errors = err.str();
  return code;
}

}  // namespace

TEST_CASE("key=value files keep sections, skip comments and let later lines win") {
  const auto f = parse_text(
      "# leading comment\n"
      "top = 1\n"
      "[model]\n"
      "  n = 5   \n"
      "; another comment\n"
      "n = 7\n"
      "[ output ]\n"
      "format=json\n");
  CHECK(f.get("top") == "1");
  CHECK(f.get("model.n") == "7");
  CHECK(f.get("output.format") == "json");
  CHECK_FALSE(f.get("model.A"));

  CHECK_THROWS_AS(parse_text("[model\nn = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_text("[model]\njust a line\n"), ConfigError);
  CHECK_THROWS_AS(parse_text("= 4\n"), ConfigError);
}

TEST_CASE("ranges parse lo:hi:steps and include both ends") {
  const Range r = Range::parse("0:1:21");
  CHECK(r.steps == 21);
  CHECK(r.at(0) == 0.0);
  CHECK(r.at(20) == 1.0);
  CHECK(r.at(10) == Approx(0.5));
  CHECK(Range::parse("2.5:2.5:1").at(0) == 2.5);

  CHECK_THROWS_AS(Range::parse("1:0:3"), ConfigError);
  CHECK_THROWS_AS(Range::parse("0:1"), ConfigError);
  CHECK_THROWS_AS(Range::parse("0:1:0"), ConfigError);
  CHECK_THROWS_AS(Range::parse("0:x:3"), ConfigError);

  const SweepGrid def;
  CHECK(def.a.lo == 0.0);
  CHECK(def.a.hi == 1.0);
  CHECK(def.b.hi == 100.0);
  CHECK(def.cells() == 441);
}

TEST_CASE("config files fill every section and reject unknown keys") {
  RunConfig cfg;
  cfg.command = "orbit";
  apply_file(cfg, parse_text("[model]\nn = 4\nboundary = ring\nA = 0.1\nB = 40\nC = 0\n"
                             "[output]\nformat = json\nprecision = 12\n"
                             "[command]\nseed = k2\nstep_limit = 7\ngrid_a = 0:0.5:3\n"),
             "test.ini");
  CHECK(cfg.model.n == 4);
  CHECK(cfg.model.boundary == Boundary::Periodic);
  CHECK(*cfg.model.B == 40.0);
  CHECK(cfg.output.format == Format::Json);
  CHECK(cfg.output.precision == 12);
  CHECK(cfg.orbit.seed == "k2");
  CHECK(cfg.orbit.limits.step_limit == 7);
  CHECK(cfg.grid.a.steps == 3);
  CHECK_NOTHROW(cfg.validate());

  RunConfig bad;
  CHECK_THROWS_AS(apply_file(bad, parse_text("[model]\nradius = 3\n"), "test.ini"), ConfigError);
  CHECK_THROWS_AS(apply_file(bad, parse_text("[model]\nn = six\n"), "test.ini"), ConfigError);
  CHECK_THROWS_AS(parse_boundary("spiral"), ConfigError);
  CHECK_THROWS_AS(parse_format("xml"), ConfigError);
}

TEST_CASE("a force field given both ways is a configuration error naming the conflict") {
  RunConfig cfg;
  cfg.command = "equilibrium";
  apply_file(cfg, parse_text("[model]\nA = 0.1\n[physical]\nepsilon = 0.3\nsigma = 0.35\nb = 0.13\n"
                             "k = 255224\nq = 0\nm = 1\n"),
             "test.ini");
  ScratchDir dir("conflict");
  std::string err;
  CHECK(run(cfg, dir.path, &err) == kExitConfig);
  CHECK(err.find("conflicting force field") != std::string::npos);
  CHECK_FALSE(fs::exists(dir.path / "equilibrium.csv"));

  RunConfig none;
  none.command = "equilibrium";
  CHECK(run(none, dir.path) == kExitConfig);
}

TEST_CASE("precision outside 6..17 is refused for every command") {
  ScratchDir dir("precision");
  for (const std::string command : {"equilibrium", "sweep", "table1"}) {
    for (int p : {5, 18}) {
      RunConfig cfg = zero_field(command, 3, Boundary::Periodic);
      cfg.output.precision = p;
      CHECK(run(cfg, dir.path) == kExitConfig);
    }
  }
  RunConfig ok = zero_field("equilibrium", 3, Boundary::Periodic);
  ok.output.precision = 6;
  CHECK(run(ok, dir.path) == kExitOk);
  ok.output.precision = 17;
  CHECK(run(ok, dir.path) == kExitOk);
}

TEST_CASE("exit codes separate success, numerical failure and bad input") {
  ScratchDir dir("exit");
  CHECK(run(zero_field("equilibrium", 6, Boundary::Periodic), dir.path) == kExitOk);

  // a carbon chain cannot settle in two Newton steps
  RunConfig starved = zero_field("equilibrium", 6, Boundary::Neumann);
  starved.model.A = 0.1;
  starved.model.B = 40.0;
  starved.max_iter = 2;
  std::string err;
  CHECK(run(starved, dir.path, &err) == kExitNumerical);
  CHECK(err.find("numerical failure") != std::string::npos);

  CHECK(run(zero_field("frobnicate", 6, Boundary::Periodic), dir.path) == kExitConfig);
  CHECK(run(zero_field("equilibrium", 2, Boundary::Periodic), dir.path) == kExitConfig);

  RunConfig missing = zero_field("table1", 6, Boundary::Periodic);
  missing.reference = (dir.path / "nowhere.json").string();
  CHECK(run(missing, dir.path) == kExitConfig);
}

TEST_CASE("numbers and CSV fields are written in a fixed, locale-free form") {
  CHECK(format_number(0.1, 10) == "0.1");
  CHECK(format_number(2.5, 17) == "2.5");
  CHECK(format_number(1.0 / 3.0, 6) == "0.333333");
  CHECK(format_number(std::nan(""), 8) == "NaN");
  CHECK(format_number(-HUGE_VAL, 8) == "-inf");
  CHECK(json_number(std::nan(""), 8).is_null());
  CHECK(json_number(1.0 / 3.0, 6).get<double>() == 0.333333);

  CHECK(CsvWriter::quote("plain") == "plain");
  CHECK(CsvWriter::quote("a,b") == "\"a,b\"");
  CHECK(CsvWriter::quote("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(CsvWriter::quote("two\nlines") == "\"two\nlines\"");

  CsvWriter w(8);
  w.header({"x", "note"});
  w.row({w.num(1.5), "a,b"});
  CHECK(w.str() == "x,note\n1.5,\"a,b\"\n");
}

TEST_CASE("zero-coupling equilibria land on the closed forms") {
  ScratchDir dir("equilibrium");
  RunConfig ring = zero_field("equilibrium", 6, Boundary::Periodic);
  ring.output.format = Format::Json;
  REQUIRE(run(ring, dir.path) == kExitOk);
  const auto doc = json::parse(slurp(dir.path / "equilibrium.json"));
  CHECK(doc["radius"].get<double>() == Approx(1.0).margin(1e-10));
  CHECK(doc["positions"].size() == 6);

  RunConfig chain = zero_field("equilibrium", 6, Boundary::Neumann);
  REQUIRE(run(chain, dir.path) == kExitOk);
  const auto summary = slurp(dir.path / "equilibrium_summary.csv");
  CHECK(summary.find("half_length,2.5\n") != std::string::npos);
}

TEST_CASE("sweep rows are complete, row-major and repeatable") {
  ScratchDir dir("sweep");
  RunConfig cfg = zero_field("sweep", 4, Boundary::Neumann);
  cfg.model.A.reset();
  cfg.model.B.reset();
  cfg.grid.a = Range::parse("0:0.2:3");
  cfg.grid.b = Range::parse("0:60:4");
  REQUIRE(run(cfg, dir.path) == kExitOk);
  const std::string first = slurp(dir.path / "sweep.csv");
  const auto rows = lines(first);
  REQUIRE(rows.size() == 1 + 3 * 4);
  CHECK(rows[0] == "A,B,size_metric,negative_count,status");
  CHECK(rows[1].rfind("0,0,1.5,0,ok", 0) == 0);
  CHECK(rows[2].rfind("0,20,", 0) == 0);
  CHECK(rows[5].rfind("0.1,0,NaN,,", 0) == 0);  // attraction with nothing to stop it
  CHECK(rows[12].rfind("0.2,60,", 0) == 0);

  REQUIRE(run(cfg, dir.path) == kExitOk);
  CHECK(slurp(dir.path / "sweep.csv") == first);

  const SweepResult res = compute_sweep(4, Boundary::Neumann, cfg.grid);
  CHECK(res.failures() == 2);
  CHECK(res.at(2, 3).A == Approx(0.2));
  CHECK(res.at(2, 3).B == Approx(60.0));
  CHECK(res.at(0, 0).ok());
}

TEST_CASE("seed selectors pick modes by number or block") {
  const ChainModel m(6, Boundary::Periodic, rescale_physical(PhysicalParams::carbon()).params);
  const auto eq = solve_equilibrium(m);
  const auto rep = full_spectrum(m, eq.configuration);
  const auto modes = bifurcation_modes(m, eq.configuration, rep);
  REQUIRE(modes.size() == 6);

  CHECK(select_modes("all", modes).size() == 6);
  CHECK(select_modes("1", modes) == std::vector<int>{0});
  for (int i : select_modes("k3", modes)) CHECK(modes[i].symmetry.k == 3);
  CHECK_THROWS_AS(select_modes("7", modes), ConfigError);
  CHECK_THROWS_AS(select_modes("0", modes), ConfigError);
  CHECK_THROWS_AS(select_modes("k", modes), ConfigError);
  CHECK_THROWS_AS(select_modes("k9", modes), ConfigError);
  CHECK(seed_tag(3) == "03");
}

TEST_CASE("orbit command writes the bond-pair branch starting on the linear period") {
  ScratchDir dir("orbit");
  RunConfig cfg = zero_field("orbit", 2, Boundary::Neumann);
  cfg.orbit.trajectory = true;
  REQUIRE(run(cfg, dir.path) == kExitOk);
  const auto rows = lines(slurp(dir.path / "branch_01.csv"));
  REQUIRE(rows.size() >= 3);
  CHECK(rows[0] == "step,amplitude,half_period,energy,termination");
  std::vector<std::string> cells;
  std::stringstream ss(rows[1]);
  for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
  REQUIRE(cells.size() >= 3);
  CHECK(std::abs(std::stod(cells[2]) - M_PI / 2) <= 1e-4);
  CHECK(rows.back().find("Collision") != std::string::npos);
  CHECK(fs::exists(dir.path / "orbits_01.csv"));
  CHECK(fs::exists(dir.path / "trajectory_01.csv"));
  CHECK(fs::exists(dir.path / "orbit_summary.csv"));
}
