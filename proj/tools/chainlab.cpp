// chainlab: command-line front end for equilibria, spectra, stability sweeps,
// the six-atom reference table and brake-orbit branches of planar chains.

#include <chrono>
#include <ctime>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "chainlab/cli/commands.hpp"

namespace {

using namespace chainlab;
using namespace chainlab::cli;

// Flags as given; unset ones leave the config-file value in place.
struct Flags {
  std::optional<std::string> config, physical, out, format, seed, grid_a, grid_b, boundary, reference;
  std::optional<int> n, precision, max_iter, step_limit;
  std::optional<double> A, B, C, tol, shoot_tol, amplitude, max_amplitude, max_period;
  bool trajectory = false;
};

RunConfig build_config(const std::string& command, const Flags& f) {
  RunConfig cfg;
  cfg.command = command;
  if (f.config) apply_file(cfg, KeyValueFile::load(*f.config), *f.config);
  if (f.n) cfg.model.n = *f.n;
  if (f.boundary) cfg.model.boundary = parse_boundary(*f.boundary);
  if (f.A) cfg.model.A = f.A;
  if (f.B) cfg.model.B = f.B;
  if (f.C) cfg.model.C = f.C;
  if (f.physical) {
    if (cfg.model.physical && cfg.model.physical_source != *f.physical)
      throw ConfigError("physical parameters given both in " + cfg.model.physical_source + " and --physical");
    cfg.model.physical = load_physical(*f.physical);
    cfg.model.physical_source = "--physical " + *f.physical;
  }
  if (f.out) cfg.output.dir = *f.out;
  if (f.format) cfg.output.format = parse_format(*f.format);
  if (f.precision) cfg.output.precision = *f.precision;
  if (f.seed) cfg.orbit.seed = *f.seed;
  if (f.grid_a) cfg.grid.a = Range::parse(*f.grid_a, "--grid-a");
  if (f.grid_b) cfg.grid.b = Range::parse(*f.grid_b, "--grid-b");
  if (f.tol) cfg.tol = *f.tol;
  if (f.max_iter) cfg.max_iter = *f.max_iter;
  if (f.shoot_tol) cfg.orbit.shoot_tol = *f.shoot_tol;
  if (f.amplitude) cfg.orbit.amplitude = *f.amplitude;
  if (f.step_limit) cfg.orbit.limits.step_limit = *f.step_limit;
  if (f.max_amplitude) cfg.orbit.limits.max_amplitude = *f.max_amplitude;
  if (f.max_period) cfg.orbit.limits.max_period = *f.max_period;
  if (f.trajectory) cfg.orbit.trajectory = true;
  if (f.reference) cfg.reference = *f.reference;
  return cfg;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

// Run metadata lives apart from the data files so those stay reproducible.
void write_metadata(OutputSink& sink, const RunConfig& cfg, int code, int argc, char** argv) {
  json meta;
  meta["schema"] = 1;
  meta["command"] = cfg.command;
  meta["exit_code"] = code;
  meta["created"] = utc_now();
  meta["threads"] = thread_count();
  json args = json::array();
  for (int i = 0; i < argc; ++i) args.push_back(argv[i]);
  meta["argv"] = args;
  json files = json::array();
  for (const auto& f : sink.written()) files.push_back(f);
  meta["files"] = files;
  sink.write_json("metadata.json", meta);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chainlab - equilibria, spectra and brake orbits of planar particle chains"};
  app.require_subcommand(1);
  app.fallthrough();

  Flags f;
  app.add_option("--config", f.config, "key=value config file with [model] [physical] [command] [output] sections");
  app.add_option("--n", f.n, "number of particles");
  app.add_option("--boundary", f.boundary, "neumann (open chain) or periodic (ring)");
  app.add_option("--A", f.A, "dimensionless attraction");
  app.add_option("--B", f.B, "dimensionless repulsion");
  app.add_option("--C", f.C, "dimensionless Coulomb coefficient");
  app.add_option("--physical", f.physical, "physical constants file (epsilon sigma b k q m) or 'carbon'");
  app.add_option("--out", f.out, "output directory");
  app.add_option("--format", f.format, "csv or json");
  app.add_option("--precision", f.precision, "significant digits in data files (6..17)");
  app.add_option("--tol", f.tol, "equilibrium tolerance");
  app.add_option("--max-iter", f.max_iter, "equilibrium Newton iteration cap");

  auto* equilibrium = app.add_subcommand("equilibrium", "solve the collinear or ring equilibrium");
  auto* spectrum = app.add_subcommand("spectrum", "Hessian spectrum with block labels and bifurcation candidates");
  auto* sweep = app.add_subcommand("sweep", "negative-eigenvalue counts over an (A, B) grid");
  sweep->add_option("--grid-a", f.grid_a, "A range lo:hi:steps (default 0:1:21)");
  sweep->add_option("--grid-b", f.grid_b, "B range lo:hi:steps (default 0:100:21)");
  auto* table1 = app.add_subcommand("table1", "six-atom spectra and negative counts against the reference data");
  table1->add_option("--reference", f.reference, "reference JSON (default: bundled data file)");
  auto* orbit = app.add_subcommand("orbit", "shoot and continue brake-orbit branches");
  orbit->add_option("--seed", f.seed, "all, a mode number (1 = fastest) or k<block>");
  orbit->add_option("--amplitude", f.amplitude, "amplitude pin of the seed orbit (default 1e-3)");
  orbit->add_option("--shoot-tol", f.shoot_tol, "brake residual tolerance (default 1e-9)");
  orbit->add_option("--step-limit", f.step_limit, "continuation steps per branch (default 500)");
  orbit->add_option("--max-amplitude", f.max_amplitude, "amplitude bound (default 10)");
  orbit->add_option("--max-period", f.max_period, "period bound (default 1000)");
  orbit->add_flag("--trajectory", f.trajectory, "dump one period of the last orbit of each branch");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  std::string command;
  for (auto* sub : {equilibrium, spectrum, sweep, table1, orbit})
    if (sub->parsed()) command = sub->get_name();

  RunConfig cfg;
  try {
    cfg = build_config(command, f);
  } catch (const UsageError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  }

  OutputSink sink(cfg.output.dir);
  const int code = dispatch(cfg, sink, std::cout, std::cerr);
  if (code != kExitConfig) {
    try {
      write_metadata(sink, cfg, code, argc, argv);
    } catch (const std::exception& e) {
      std::cerr << "warning: " << e.what() << "\n";
    }
  }
  return code;
}
