#pragma once
/**
 * The chainlab subcommands. Each run_* function computes its result, writes
 * the data files through an OutputSink and prints a short summary to `log`.
 * Results are also returned so callers can inspect them without parsing
 * files. Data files never carry timestamps: identical configurations give
 * byte-identical outputs.
 */

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <limits>
#include <cmath>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "chainlab/cli/config.hpp"
#include "chainlab/cli/output.hpp"
#include "chainlab/equilibria.hpp"
#include "chainlab/errors.hpp"
#include "chainlab/integrator.hpp"
#include "chainlab/orbits.hpp"
#include "chainlab/parallel.hpp"
#include "chainlab/potential.hpp"
#include "chainlab/spectra.hpp"

#ifndef CHAINLAB_DATA_DIR
#define CHAINLAB_DATA_DIR "data"
#endif

namespace chainlab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNumerical = 1;
inline constexpr int kExitConfig = 2;

// ---------------------------------------------------------------------------
// Shared pieces
// ---------------------------------------------------------------------------

inline ChainModel make_model(const RunConfig& cfg) {
  return ChainModel(cfg.model.n, cfg.model.boundary, cfg.model.params());
}

inline json model_json(const RunConfig& cfg) {
  const int d = cfg.output.precision;
  const ForceFieldParams p = cfg.model.params();
  json j;
  j["n"] = cfg.model.n;
  j["boundary"] = to_string(cfg.model.boundary);
  j["A"] = json_number(p.A, d);
  j["B"] = json_number(p.B, d);
  j["C"] = json_number(p.C, d);
  if (cfg.model.physical) {
    const auto& ph = *cfg.model.physical;
    j["physical"] = {{"epsilon", ph.epsilon}, {"sigma", ph.sigma}, {"b", ph.b},
                     {"k", ph.k},             {"q", ph.q},         {"m", ph.m}};
  }
  return j;
}

inline json document(const RunConfig& cfg, const std::string& command) {
  json doc;
  doc["schema"] = 1;
  doc["command"] = command;
  if (command != "table1") doc["model"] = model_json(cfg);
  return doc;
}

struct EquilibriumResult {
  explicit EquilibriumResult(Configuration c) : configuration(std::move(c)) {}

  Configuration configuration;
  std::string size_name;  // "radius" or "half_length"
  double size_metric = 0.0;
  double energy = 0.0;
  double residual = 0.0;  // gradient sup-norm of the returned configuration
  std::vector<CircularEquilibrium> roots;
  int iterations = 0;
};

/**
 * Ring: every root of S(a) = 1 on the default scan, keeping the one with
 * the lowest energy. Open chain: the symmetric collinear minimiser.
 */
inline EquilibriumResult solve_equilibrium(const ChainModel& m, double tol = 1e-10,
                                           int max_iter = 200) {
  if (m.periodic()) {
    auto roots = circular_radius(m, {}, tol);
    const auto best = *std::min_element(roots.begin(), roots.end(),
                                        [](const auto& a, const auto& b) { return a.energy < b.energy; });
    EquilibriumResult r(best.configuration());
    r.roots = std::move(roots);
    r.size_name = "radius";
    r.size_metric = best.radius;
    r.energy = best.energy;
    r.residual = verify_equilibrium(m, r.configuration, tol).residual;
    return r;
  }
  const CollinearEquilibrium c = collinear_equilibrium(m, {tol, max_iter});
  EquilibriumResult r(c.configuration());
  r.size_name = "half_length";
  r.size_metric = c.half_length();
  r.energy = c.energy;
  r.iterations = c.iterations;
  r.residual = verify_equilibrium(m, r.configuration, tol).residual;
  return r;
}

// ---------------------------------------------------------------------------
// equilibrium
// ---------------------------------------------------------------------------

inline EquilibriumResult run_equilibrium(const RunConfig& cfg, OutputSink& sink, std::ostream& log) {
  const ChainModel m = make_model(cfg);
  const EquilibriumResult r = solve_equilibrium(m, cfg.tol, cfg.max_iter);
  const int d = cfg.output.precision;
  const Positions q = r.configuration.positions();

  if (cfg.output.format == Format::Csv) {
    CsvWriter pos(d);
    pos.header({"particle", "x", "y"});
    for (int j = 0; j < m.n(); ++j)
      pos.row({std::to_string(j + 1), pos.num(q[2 * j]), pos.num(q[2 * j + 1])});
    sink.write("equilibrium.csv", pos.str());

    CsvWriter sum(d);
    sum.header({"quantity", "value"});
    sum.row({r.size_name, sum.num(r.size_metric)});
    sum.row({"energy", sum.num(r.energy)});
    sum.row({"residual", sum.num(r.residual)});
    if (m.periodic()) sum.row({"root_choice", "lowest_energy"});
    sink.write("equilibrium_summary.csv", sum.str());

    if (m.periodic()) {
      CsvWriter roots(d);
      roots.header({"radius", "energy", "S_residual", "selected"});
      for (const auto& root : r.roots)
        roots.row({roots.num(root.radius), roots.num(root.energy), roots.num(root.residual),
                   root.radius == r.size_metric ? "yes" : "no"});
      sink.write("ring_roots.csv", roots.str());
    }
  } else {
    json doc = document(cfg, "equilibrium");
    doc[r.size_name] = json_number(r.size_metric, d);
    doc["energy"] = json_number(r.energy, d);
    doc["residual"] = json_number(r.residual, d);
    json pts = json::array();
    for (int j = 0; j < m.n(); ++j) pts.push_back(json_numbers({q[2 * j], q[2 * j + 1]}, d));
    doc["positions"] = pts;
    if (m.periodic()) {
      json roots = json::array();
      for (const auto& root : r.roots)
        roots.push_back({{"radius", json_number(root.radius, d)},
                         {"energy", json_number(root.energy, d)},
                         {"S_residual", json_number(root.residual, d)},
                         {"selected", root.radius == r.size_metric}});
      doc["root_choice"] = "lowest_energy";
      doc["roots"] = roots;
    }
    sink.write_json("equilibrium.json", doc);
  }

  log << r.size_name << " = " << format_number(r.size_metric, d) << "\n"
      << "energy = " << format_number(r.energy, d) << "\n"
      << "residual = " << format_number(r.residual, 3) << "\n";
  if (m.periodic() && r.roots.size() > 1) log << "ring roots: " << r.roots.size() << "\n";
  return r;
}

// ---------------------------------------------------------------------------
// spectrum
// ---------------------------------------------------------------------------

inline SpectralReport run_spectrum(const RunConfig& cfg, OutputSink& sink, std::ostream& log) {
  const ChainModel m = make_model(cfg);
  const EquilibriumResult eq = solve_equilibrium(m, cfg.tol, cfg.max_iter);
  const SpectralReport rep = full_spectrum(m, eq.configuration);
  const int d = cfg.output.precision;

  if (cfg.output.format == Format::Csv) {
    CsvWriter sp(d);
    sp.header({"index", "value", "sign", "block", "block_index", "symmetry_zero", "kernel_residual"});
    for (std::size_t i = 0; i < rep.entries.size(); ++i) {
      const auto& e = rep.entries[i];
      sp.row({std::to_string(i + 1), sp.num(e.value), to_string(e.sign), e.block,
              std::to_string(e.block_index), e.symmetry_zero ? "true" : "false",
              sp.num(e.kernel_residual)});
    }
    sink.write("spectrum.csv", sp.str());

    CsvWriter cand(d);
    cand.header({"rank", "lambda", "nu", "block", "block_index", "multiplicity", "nonresonant", "resonant_l"});
    for (std::size_t i = 0; i < rep.candidates.size(); ++i) {
      const auto& c = rep.candidates[i];
      cand.row({std::to_string(i + 1), cand.num(c.lambda), cand.num(c.nu), c.block,
                std::to_string(c.block_index), std::to_string(c.multiplicity),
                c.nonresonant ? "true" : "false", std::to_string(c.resonant_l)});
    }
    sink.write("candidates.csv", cand.str());

    CsvWriter sum(d);
    sum.header({"quantity", "value"});
    sum.row({"kind", to_string(rep.kind)});
    sum.row({eq.size_name, sum.num(eq.size_metric)});
    sum.row({"negative_count", std::to_string(rep.negative_count)});
    sum.row({"zero_count", std::to_string(rep.zero_count)});
    sum.row({"positive_count", std::to_string(rep.positive_count)});
    sum.row({"hessian_norm", sum.num(rep.hessian_norm)});
    sum.row({"block_mismatch", sum.num(rep.block_mismatch)});
    sink.write("spectrum_summary.csv", sum.str());
  } else {
    json doc = document(cfg, "spectrum");
    doc["kind"] = to_string(rep.kind);
    doc[eq.size_name] = json_number(eq.size_metric, d);
    doc["negative_count"] = rep.negative_count;
    doc["zero_count"] = rep.zero_count;
    doc["positive_count"] = rep.positive_count;
    doc["hessian_norm"] = json_number(rep.hessian_norm, d);
    doc["block_mismatch"] = json_number(rep.block_mismatch, d);
    json entries = json::array();
    for (const auto& e : rep.entries)
      entries.push_back({{"value", json_number(e.value, d)},
                         {"sign", to_string(e.sign)},
                         {"block", e.block},
                         {"block_index", e.block_index},
                         {"symmetry_zero", e.symmetry_zero},
                         {"kernel_residual", json_number(e.kernel_residual, d)}});
    doc["eigenvalues"] = entries;
    json cands = json::array();
    for (const auto& c : rep.candidates)
      cands.push_back({{"lambda", json_number(c.lambda, d)},
                       {"nu", json_number(c.nu, d)},
                       {"block", c.block},
                       {"block_index", c.block_index},
                       {"multiplicity", c.multiplicity},
                       {"nonresonant", c.nonresonant},
                       {"resonant_l", c.resonant_l}});
    doc["candidates"] = cands;
    sink.write_json("spectrum.json", doc);
  }

  log << rep.entries.size() << " eigenvalues: " << rep.negative_count << " negative, "
      << rep.zero_count << " zero, " << rep.positive_count << " positive\n";
  for (const auto& c : rep.candidates)
    log << "  candidate lambda = " << format_number(c.lambda, d) << " (x" << c.multiplicity << ", "
        << c.block << (c.nonresonant ? "" : ", resonant") << ")\n";
  return rep;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepCell {
  double A = 0.0;
  double B = 0.0;
  double size_metric = std::numeric_limits<double>::quiet_NaN();
  std::optional<int> negative_count;
  std::string status = "ok";  // "ok" or "failed: <reason>"

  bool ok() const { return negative_count.has_value(); }
};

struct SweepResult {
  SweepGrid grid;
  std::vector<SweepCell> cells;  // row-major: A outer, B inner
  int failures() const {
    return static_cast<int>(std::count_if(cells.begin(), cells.end(), [](const auto& c) { return !c.ok(); }));
  }
  const SweepCell& at(int ia, int ib) const { return cells[static_cast<std::size_t>(ia) * grid.b.steps + ib]; }
};

inline SweepCell sweep_cell(int n, Boundary boundary, double A, double B, double C, double tol,
                            int max_iter) {
  SweepCell cell;
  cell.A = A;
  cell.B = B;
  try {
    const ChainModel m(n, boundary, {A, B, C});
    const EquilibriumResult eq = solve_equilibrium(m, tol, max_iter);
    const SpectralReport rep = full_spectrum(m, eq.configuration);
    cell.size_metric = eq.size_metric;
    cell.negative_count = rep.negative_count;
  } catch (const Error& e) {
    cell.size_metric = std::numeric_limits<double>::quiet_NaN();
    cell.status = std::string("failed: ") + e.what();
  }
  return cell;
}

inline SweepResult compute_sweep(int n, Boundary boundary, const SweepGrid& grid, double C = 0.0,
                                 double tol = 1e-10, int max_iter = 200) {
  SweepResult res;
  res.grid = grid;
  res.cells.resize(grid.cells());
  parallel_for(res.cells.size(), [&](std::size_t i) {
    const int ia = static_cast<int>(i / grid.b.steps);
    const int ib = static_cast<int>(i % grid.b.steps);
    res.cells[i] = sweep_cell(n, boundary, grid.a.at(ia), grid.b.at(ib), C, tol, max_iter);
  });
  return res;
}

inline SweepResult run_sweep(const RunConfig& cfg, OutputSink& sink, std::ostream& log) {
  const SweepResult res = compute_sweep(cfg.model.n, cfg.model.boundary, cfg.grid, cfg.model.params().C,
                                        cfg.tol, cfg.max_iter);
  const int d = cfg.output.precision;
  const std::string metric = cfg.model.boundary == Boundary::Periodic ? "radius" : "half_length";

  if (cfg.output.format == Format::Csv) {
    CsvWriter w(d);
    w.header({"A", "B", "size_metric", "negative_count", "status"});
    for (const auto& c : res.cells)
      w.row({w.num(c.A), w.num(c.B), w.num(c.size_metric),
             c.negative_count ? std::to_string(*c.negative_count) : "", c.status});
    sink.write("sweep.csv", w.str());
  } else {
    json doc = document(cfg, "sweep");
    doc["model"].erase("A");
    doc["model"].erase("B");
    doc["size_metric"] = metric;
    doc["grid"] = {{"A", {cfg.grid.a.lo, cfg.grid.a.hi, cfg.grid.a.steps}},
                   {"B", {cfg.grid.b.lo, cfg.grid.b.hi, cfg.grid.b.steps}}};
    json rows = json::array();
    for (const auto& c : res.cells)
      rows.push_back({{"A", json_number(c.A, d)},
                      {"B", json_number(c.B, d)},
                      {"size_metric", json_number(c.size_metric, d)},
                      {"negative_count", c.negative_count ? json(*c.negative_count) : json(nullptr)},
                      {"status", c.status}});
    doc["cells"] = rows;
    sink.write_json("sweep.json", doc);
  }
  log << "sweep " << cfg.grid.a.steps << " x " << cfg.grid.b.steps << " (" << metric << "): "
      << res.cells.size() << " cells, " << res.failures() << " failed\n";
  return res;
}

// ---------------------------------------------------------------------------
// table1
// ---------------------------------------------------------------------------

struct TableReference {
  double tolerance = 0.05;
  std::vector<double> collinear, ring;  // n = 6 eigenvalues, symmetry zeros omitted
  std::vector<NegativeCountRow> counts;
};

inline TableReference load_reference(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open reference file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError("reference file '" + path + "' is not valid JSON: " + e.what());
  }
  if (doc.value("schema", 0) != 1) throw ConfigError("reference file '" + path + "' has an unknown schema");
  TableReference ref;
  try {
    ref.tolerance = doc.at("eigenvalue_tolerance").get<double>();
    ref.collinear = doc.at("n6_eigenvalues").at("collinear").get<std::vector<double>>();
    ref.ring = doc.at("n6_eigenvalues").at("ring").get<std::vector<double>>();
    for (const auto& row : doc.at("negative_counts"))
      ref.counts.push_back({row.at("n").get<int>(), row.at("collinear").get<int>(), row.at("ring").get<int>()});
  } catch (const json::exception& e) {
    throw ConfigError("reference file '" + path + "' is missing fields: " + e.what());
  }
  return ref;
}

inline std::string default_reference_path() { return std::string(CHAINLAB_DATA_DIR) + "/table1_reference.json"; }

/**
 * Eigenvalue agreement: relative error within tol for |ref| >= 1e-2; below
 * that, only sign and order of magnitude (ratio within a factor of 10).
 */
inline bool eigenvalue_matches(double got, double ref, double tol) {
  if (std::abs(ref) >= 1e-2) return std::abs(got - ref) <= tol * std::abs(ref);
  if (got == 0.0 || (got > 0) != (ref > 0)) return false;
  return std::abs(std::log10(got / ref)) <= 1.0;
}

struct EigenvalueCell {
  std::string boundary;
  int index = 0;
  double reference = 0.0;
  double rounded = 0.0, exact = 0.0;
  bool rounded_pass = false, exact_pass = false;
};

struct CountCell {
  int n = 0;
  std::string boundary;
  int reference = 0, rounded = 0, exact = 0;
  bool rounded_pass() const { return rounded == reference; }
  bool exact_pass() const { return exact == reference; }
};

struct Table1Result {
  ForceFieldParams rounded_params{0.1, 40.0, 0.0};
  ForceFieldParams exact_params;
  std::vector<EigenvalueCell> eigenvalues;
  std::vector<CountCell> counts;

  bool eigenvalues_pass(bool exact) const {
    return std::all_of(eigenvalues.begin(), eigenvalues.end(),
                       [&](const auto& c) { return exact ? c.exact_pass : c.rounded_pass; });
  }
  bool counts_pass(bool exact) const {
    return std::all_of(counts.begin(), counts.end(),
                       [&](const auto& c) { return exact ? c.exact_pass() : c.rounded_pass(); });
  }
};

// Non-kernel eigenvalues of the n = 6 equilibrium, largest magnitude first,
// which is the order the reference table lists them in.
inline std::vector<double> six_atom_spectrum(const ForceFieldParams& p, Boundary b) {
  const ChainModel m(6, b, p);
  const EquilibriumResult eq = solve_equilibrium(m);
  const SpectralReport rep = full_spectrum(m, eq.configuration);
  std::vector<double> v;
  for (const auto& e : rep.entries)
    if (e.sign != EigenSign::Zero) v.push_back(e.value);
  std::stable_sort(v.begin(), v.end(), [](double x, double y) { return std::abs(x) > std::abs(y); });
  return v;
}

inline Table1Result compute_table1(const TableReference& ref) {
  Table1Result t;
  t.exact_params = rescale_physical(PhysicalParams::carbon()).params;
  for (const auto b : {Boundary::Neumann, Boundary::Periodic}) {
    const auto& refs = b == Boundary::Neumann ? ref.collinear : ref.ring;
    const auto r = six_atom_spectrum(t.rounded_params, b);
    const auto e = six_atom_spectrum(t.exact_params, b);
    // a count mismatch shows up as NaN entries and failed cells
    for (std::size_t i = 0; i < refs.size(); ++i) {
      EigenvalueCell c;
      c.boundary = b == Boundary::Neumann ? "collinear" : "ring";
      c.index = static_cast<int>(i + 1);
      c.reference = refs[i];
      c.rounded = i < r.size() ? r[i] : std::numeric_limits<double>::quiet_NaN();
      c.exact = i < e.size() ? e[i] : std::numeric_limits<double>::quiet_NaN();
      c.rounded_pass = r.size() == refs.size() && eigenvalue_matches(c.rounded, c.reference, ref.tolerance);
      c.exact_pass = e.size() == refs.size() && eigenvalue_matches(c.exact, c.reference, ref.tolerance);
      t.eigenvalues.push_back(c);
    }
  }
  if (ref.counts.empty()) return t;
  int lo = ref.counts.front().n, hi = lo;
  for (const auto& row : ref.counts) lo = std::min(lo, row.n), hi = std::max(hi, row.n);
  const auto rounded = negative_count_table(t.rounded_params, lo, hi);
  const auto exact = negative_count_table(t.exact_params, lo, hi);
  for (const auto& row : ref.counts) {
    const auto& r = rounded[row.n - lo];
    const auto& e = exact[row.n - lo];
    t.counts.push_back({row.n, "collinear", row.collinear, r.collinear, e.collinear});
    t.counts.push_back({row.n, "ring", row.ring, r.ring, e.ring});
  }
  return t;
}

inline Table1Result run_table1(const RunConfig& cfg, OutputSink& sink, std::ostream& log) {
  const TableReference ref = load_reference(cfg.reference.empty() ? default_reference_path() : cfg.reference);
  const Table1Result t = compute_table1(ref);
  const int d = cfg.output.precision;
  auto pf = [](bool ok) { return std::string(ok ? "pass" : "fail"); };

  if (cfg.output.format == Format::Csv) {
    CsvWriter ev(d);
    ev.header({"boundary", "index", "reference", "rounded", "rounded_pass", "exact", "exact_pass"});
    for (const auto& c : t.eigenvalues)
      ev.row({c.boundary, std::to_string(c.index), ev.num(c.reference), ev.num(c.rounded),
              pf(c.rounded_pass), ev.num(c.exact), pf(c.exact_pass)});
    sink.write("table1_eigenvalues.csv", ev.str());

    CsvWriter cn(d);
    cn.header({"n", "boundary", "reference", "rounded", "rounded_pass", "exact", "exact_pass"});
    for (const auto& c : t.counts)
      cn.row({std::to_string(c.n), c.boundary, std::to_string(c.reference), std::to_string(c.rounded),
              pf(c.rounded_pass()), std::to_string(c.exact), pf(c.exact_pass())});
    sink.write("table1_counts.csv", cn.str());
  } else {
    json doc = document(cfg, "table1");
    doc["parameters"] = {{"rounded", {{"A", t.rounded_params.A}, {"B", t.rounded_params.B}, {"C", 0.0}}},
                         {"exact",
                          {{"A", json_number(t.exact_params.A, d)},
                           {"B", json_number(t.exact_params.B, d)},
                           {"C", json_number(t.exact_params.C, d)}}}};
    doc["eigenvalue_tolerance"] = ref.tolerance;
    json ev = json::array();
    for (const auto& c : t.eigenvalues)
      ev.push_back({{"boundary", c.boundary}, {"index", c.index}, {"reference", c.reference},
                    {"rounded", json_number(c.rounded, d)}, {"rounded_pass", c.rounded_pass},
                    {"exact", json_number(c.exact, d)}, {"exact_pass", c.exact_pass}});
    doc["eigenvalues"] = ev;
    json cn = json::array();
    for (const auto& c : t.counts)
      cn.push_back({{"n", c.n}, {"boundary", c.boundary}, {"reference", c.reference},
                    {"rounded", c.rounded}, {"rounded_pass", c.rounded_pass()},
                    {"exact", c.exact}, {"exact_pass", c.exact_pass()}});
    doc["negative_counts"] = cn;
    sink.write_json("table1.json", doc);
  }

  log << "eigenvalues (n = 6): rounded " << pf(t.eigenvalues_pass(false)) << ", exact "
      << pf(t.eigenvalues_pass(true)) << "\n"
      << "negative counts (n = " << (ref.counts.empty() ? 0 : ref.counts.front().n) << ".."
      << (ref.counts.empty() ? 0 : ref.counts.back().n) << "): rounded " << pf(t.counts_pass(false))
      << ", exact " << pf(t.counts_pass(true)) << "\n";
  return t;
}

// ---------------------------------------------------------------------------
// orbit
// ---------------------------------------------------------------------------

struct SeedRun {
  int mode = 0;  // 1-based position in the candidate list
  BifurcationMode info;
  std::string status = "ok";  // ok, skipped: ..., failed: ...
  std::optional<Branch> branch;
};

struct OrbitResult {
  std::vector<SeedRun> seeds;
};

/**
 * Modes picked by a seed selector: "all", a 1-based mode number, or "k<K>"
 * for every mode whose block index is K (k0/k1 are the axial and transverse
 * collinear families).
 */
inline std::vector<int> select_modes(const std::string& seed, const std::vector<BifurcationMode>& modes) {
  std::vector<int> out;
  const int count = static_cast<int>(modes.size());
  if (seed == "all") {
    for (int i = 0; i < count; ++i) out.push_back(i);
    return out;
  }
  const bool by_block = !seed.empty() && (seed[0] == 'k' || seed[0] == 'K');
  const std::string digits = by_block ? seed.substr(1) : seed;
  if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); }))
    throw ConfigError("seed must be 'all', a mode number or k<block>, got '" + seed + "'");
  const int v = std::stoi(digits);
  if (by_block) {
    for (int i = 0; i < count; ++i)
      if (modes[i].symmetry.k == v) out.push_back(i);
    if (out.empty()) throw ConfigError("no bifurcation mode has block index " + digits);
  } else {
    if (v < 1 || v > count)
      throw ConfigError("mode " + digits + " out of range 1.." + std::to_string(count));
    out.push_back(v - 1);
  }
  return out;
}

inline std::string seed_tag(int mode) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", mode);
  return buf;
}

// One full period of the orbit, about 500 rows.
inline std::vector<PhaseState> orbit_trajectory(const ChainModel& m, const BrakeOrbit& o) {
  const long long steps = std::max<long long>(2 * o.steps, 64);
  TrajectoryRecorder rec(static_cast<int>(std::max<long long>(1, steps / 500)));
  integrate(PhaseState::at_rest(o.initial_positions), o.period() / static_cast<double>(steps), o.period(), m,
            {std::ref(rec)}, Scheme::Yoshida6);
  return rec.samples();
}

inline void write_branch_files(const RunConfig& cfg, const ChainModel& m, const SeedRun& run, OutputSink& sink) {
  const int d = cfg.output.precision;
  const Branch& br = *run.branch;
  const std::string tag = seed_tag(run.mode);

  CsvWriter b(d);
  b.header({"step", "amplitude", "half_period", "energy", "termination"});
  for (std::size_t i = 0; i < br.orbits.size(); ++i) {
    const auto& o = br.orbits[i];
    b.row({std::to_string(i), b.num(o.amplitude), b.num(o.half_period), b.num(o.energy),
           i + 1 == br.orbits.size() ? to_string(br.termination) : ""});
  }
  sink.write("branch_" + tag + ".csv", b.str());

  CsvWriter ic(d);
  std::vector<std::string> head{"step", "half_period", "pin"};
  for (int j = 1; j <= m.n(); ++j) {
    head.push_back("x" + std::to_string(j));
    head.push_back("y" + std::to_string(j));
  }
  ic.row(head);
  for (std::size_t i = 0; i < br.orbits.size(); ++i) {
    const auto& o = br.orbits[i];
    std::vector<std::string> row{std::to_string(i), ic.num(o.half_period), ic.num(o.pin)};
    for (Eigen::Index k = 0; k < o.initial_positions.size(); ++k) row.push_back(ic.num(o.initial_positions[k]));
    ic.row(row);
  }
  sink.write("orbits_" + tag + ".csv", ic.str());

  if (cfg.orbit.trajectory) {
    std::ostringstream os;
    write_trajectory_csv(os, m, orbit_trajectory(m, br.orbits.back()), d);
    sink.write("trajectory_" + tag + ".csv", os.str());
  }
}

inline json branch_json(const RunConfig& cfg, const ChainModel& m, const SeedRun& run) {
  const int d = cfg.output.precision;
  json j;
  j["mode"] = run.mode;
  j["lambda"] = json_number(run.info.lambda, d);
  j["nu"] = json_number(run.info.nu, d);
  j["family"] = to_string(run.info.symmetry.family);
  j["k"] = run.info.symmetry.k;
  j["multiplicity"] = run.info.multiplicity;
  j["note"] = run.info.symmetry.note();
  j["status"] = run.status;
  if (!run.branch) return j;
  const Branch& br = *run.branch;
  j["termination"] = to_string(br.termination);
  j["detail"] = br.detail;
  json orbits = json::array();
  for (const auto& o : br.orbits)
    orbits.push_back({{"amplitude", json_number(o.amplitude, d)},
                      {"half_period", json_number(o.half_period, d)},
                      {"energy", json_number(o.energy, d)},
                      {"pin", json_number(o.pin, d)},
                      {"initial_positions",
                       json_numbers(std::vector<double>(o.initial_positions.data(),
                                                        o.initial_positions.data() + o.initial_positions.size()),
                                    d)}});
  j["orbits"] = orbits;
  if (cfg.orbit.trajectory) {
    json traj = json::array();
    for (const auto& s : orbit_trajectory(m, br.orbits.back())) {
      std::vector<double> row{s.t};
      row.insert(row.end(), s.q.data(), s.q.data() + s.q.size());
      traj.push_back(json_numbers(row, d));
    }
    j["trajectory"] = traj;
  }
  return j;
}

inline OrbitResult run_orbit(const RunConfig& cfg, OutputSink& sink, std::ostream& log) {
  const ChainModel m = make_model(cfg);
  const EquilibriumResult eq = solve_equilibrium(m, cfg.tol, cfg.max_iter);
  const SpectralReport rep = full_spectrum(m, eq.configuration);
  const auto modes = bifurcation_modes(m, eq.configuration, rep);
  if (modes.empty()) throw Error("the equilibrium has no positive eigenvalue to seed a branch");
  const auto picked = select_modes(cfg.orbit.seed, modes);
  const bool single = cfg.orbit.seed != "all" && picked.size() == 1;

  std::vector<double> nus;
  for (const auto& c : rep.candidates) nus.push_back(c.nu);

  OrbitResult res;
  res.seeds.resize(picked.size());
  parallel_for(picked.size(), [&](std::size_t i) {
    SeedRun& run = res.seeds[i];
    run.mode = picked[i] + 1;
    run.info = modes[picked[i]];
    const auto& mode = run.info;
    if (!mode.nonresonant) {
      if (single) throw ResonanceError(mode.lambda, mode.resonant_l);
      run.status = "skipped: resonant (l = " + std::to_string(mode.resonant_l) + ")";
      return;
    }
    if (!mode.supported) {
      if (single) throw UsageError("mode cannot seed a branch: " + mode.unsupported_reason);
      run.status = "skipped: " + mode.unsupported_reason;
      return;
    }
    try {
      ShootOptions opt;
      opt.tol = cfg.orbit.shoot_tol;
      const Shooter sh(m, mode, opt);
      const BrakeOrbit seed = shoot(sh, seed_from_mode(mode, m, cfg.orbit.amplitude));
      run.branch = continue_branch(sh, seed, nus, {}, cfg.orbit.limits);
    } catch (const Error& e) {
      if (single) throw;
      run.status = std::string("failed: ") + e.what();
      return;
    }
    if (cfg.output.format == Format::Csv) write_branch_files(cfg, m, run, sink);
  });

  const int d = cfg.output.precision;
  if (cfg.output.format == Format::Csv) {
    CsvWriter s(d);
    s.header({"mode", "lambda", "nu", "family", "k", "multiplicity", "note", "status", "orbits",
              "termination", "final_amplitude", "final_half_period", "detail"});
    for (const auto& run : res.seeds) {
      const auto& b = run.branch;
      s.row({std::to_string(run.mode), s.num(run.info.lambda), s.num(run.info.nu),
             to_string(run.info.symmetry.family), std::to_string(run.info.symmetry.k),
             std::to_string(run.info.multiplicity), run.info.symmetry.note(), run.status,
             b ? std::to_string(b->orbits.size()) : "0", b ? to_string(b->termination) : "",
             b ? s.num(b->orbits.back().amplitude) : "", b ? s.num(b->orbits.back().half_period) : "",
             b ? b->detail : ""});
    }
    sink.write("orbit_summary.csv", s.str());
  } else {
    json doc = document(cfg, "orbit");
    doc["seed"] = cfg.orbit.seed;
    doc["amplitude"] = cfg.orbit.amplitude;
    json arr = json::array();
    for (const auto& run : res.seeds) arr.push_back(branch_json(cfg, m, run));
    doc["branches"] = arr;
    sink.write_json("orbit.json", doc);
  }

  for (const auto& run : res.seeds) {
    log << "mode " << run.mode << ": lambda = " << format_number(run.info.lambda, d) << ", "
        << to_string(run.info.symmetry.family);
    if (!run.info.symmetry.note().empty()) log << " (" << run.info.symmetry.note() << ")";
    if (run.branch)
      log << ", " << run.branch->orbits.size() << " orbits, " << to_string(run.branch->termination) << "\n";
    else
      log << ", " << run.status << "\n";
  }
  return res;
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"equilibrium", "spectrum", "sweep", "table1", "orbit"};
  return names;
}

/**
 * Validates cfg, runs the command and maps failures to the exit-code
 * contract: 0 success, 1 numerical failure, 2 configuration error.
 */
inline int dispatch(const RunConfig& cfg, OutputSink& sink, std::ostream& log, std::ostream& err) {
  try {
    if (cfg.command == "table1") {
      if (cfg.output.precision < 6 || cfg.output.precision > 17)
        throw ConfigError("precision must lie in [6, 17], got " + std::to_string(cfg.output.precision));
    } else {
      cfg.validate(cfg.command != "sweep");
    }
    if (cfg.command == "equilibrium") run_equilibrium(cfg, sink, log);
    else if (cfg.command == "spectrum") run_spectrum(cfg, sink, log);
    else if (cfg.command == "sweep") run_sweep(cfg, sink, log);
    else if (cfg.command == "table1") run_table1(cfg, sink, log);
    else if (cfg.command == "orbit") run_orbit(cfg, sink, log);
    else throw ConfigError("unknown command '" + cfg.command + "'");
    return kExitOk;
  } catch (const UsageError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace chainlab::cli
