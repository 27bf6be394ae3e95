#pragma once
// Run configuration for the chainlab tool: flat key=value files with
// [section] headers, merged with command-line flags (flags win).

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "chainlab/errors.hpp"
#include "chainlab/orbits.hpp"
#include "chainlab/potential.hpp"

namespace chainlab::cli {

// Anything wrong with the user's configuration; maps to exit code 2.
class ConfigError : public UsageError {
 public:
  using UsageError::UsageError;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": '" + text + "' is not a number");
  }
}

inline int to_int(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const long v = std::stol(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw ConfigError(key + ": '" + text + "' is not an integer");
  }
}

inline bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError(key + ": '" + text + "' is not a boolean");
}

}  // namespace detail

/**
 * key=value text. Lines starting with # or ; are comments, [name] opens a
 * section and keys are stored as "section.key" (bare "key" before any
 * header). Later assignments override earlier ones.
 */
class KeyValueFile {
 public:
  static KeyValueFile parse(std::istream& in, const std::string& origin = "<input>") {
    KeyValueFile f;
    std::string line, section;
    int number = 0;
    while (std::getline(in, line)) {
      ++number;
      const std::string t = detail::trim(line);
      if (t.empty() || t[0] == '#' || t[0] == ';') continue;
      if (t.front() == '[') {
        if (t.back() != ']') throw ConfigError(origin + ":" + std::to_string(number) + ": unterminated section header");
        section = detail::trim(t.substr(1, t.size() - 2));
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(number) + ": expected key = value");
      const std::string key = detail::trim(t.substr(0, eq));
      if (key.empty()) throw ConfigError(origin + ":" + std::to_string(number) + ": empty key");
      f.values_[section.empty() ? key : section + "." + key] = detail::trim(t.substr(eq + 1));
    }
    return f;
  }

  static KeyValueFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse(in, path);
  }

  const std::map<std::string, std::string>& values() const { return values_; }
  std::optional<std::string> get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::map<std::string, std::string> values_;
};

// Inclusive range lo:hi split into `steps` points (one point means lo).
struct Range {
  double lo = 0.0;
  double hi = 1.0;
  int steps = 21;

  static Range parse(const std::string& text, const std::string& what = "range") {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(detail::trim(p));
    if (parts.size() != 3) throw ConfigError(what + ": expected lo:hi:steps, got '" + text + "'");
    Range r{detail::to_double(what, parts[0]), detail::to_double(what, parts[1]),
            detail::to_int(what, parts[2])};
    r.validate(what);
    return r;
  }

  void validate(const std::string& what) const {
    if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi)
      throw ConfigError(what + ": need finite lo <= hi");
    if (steps < 1) throw ConfigError(what + ": need steps >= 1");
  }

  double at(int i) const { return steps == 1 ? lo : lo + (hi - lo) * i / (steps - 1); }
};

struct SweepGrid {
  Range a{0.0, 1.0, 21};
  Range b{0.0, 100.0, 21};
  std::size_t cells() const { return static_cast<std::size_t>(a.steps) * b.steps; }
};

enum class Format { Csv, Json };

struct OutputSection {
  std::string dir = ".";
  Format format = Format::Csv;
  int precision = 10;  // significant digits
};

struct ModelSection {
  int n = 6;
  Boundary boundary = Boundary::Neumann;
  std::optional<double> A, B, C;
  std::optional<PhysicalParams> physical;
  std::string physical_source;  // where the physical set came from, for messages
  bool rescale = true;

  bool dimensionless_given() const { return A || B || C; }

  ForceFieldParams params() const {
    if (physical) return rescale_physical(*physical).params;
    return {A.value_or(0.0), B.value_or(0.0), C.value_or(0.0)};
  }
};

struct OrbitSection {
  std::string seed = "all";  // "all", a 1-based mode number, or "k<block>"
  double amplitude = 1e-3;   // pin of the seed orbit
  double shoot_tol = 1e-9;
  ContinuationLimits limits;
  bool trajectory = false;
};

struct RunConfig {
  std::string command;
  ModelSection model;
  OutputSection output;
  OrbitSection orbit;
  SweepGrid grid;
  double tol = 1e-10;
  int max_iter = 200;
  std::string reference;  // table reference file; empty means the bundled one

  // The sweep takes A and B from its grid, so a force field is optional there.
  void validate(bool require_force_field = true) const {
    if (model.n < 2) throw ConfigError("n must be >= 2");
    if (model.boundary == Boundary::Periodic && model.n < 3)
      throw ConfigError("a periodic chain needs n >= 3");
    if (model.physical && model.dimensionless_given())
      throw ConfigError("conflicting force field: dimensionless A/B/C and physical parameters (epsilon, sigma, ...) from " +
                        model.physical_source + " were both given; use exactly one");
    if (require_force_field && !model.physical && !model.dimensionless_given())
      throw ConfigError("no force field given: set A, B, C or --physical");
    if (model.physical && !model.rescale)
      throw ConfigError("physical parameters are only supported with rescale = true");
    if (model.physical) model.physical->validate();
    model.params().validate();
    if (output.precision < 6 || output.precision > 17)
      throw ConfigError("precision must lie in [6, 17], got " + std::to_string(output.precision));
    if (!(tol > 0.0)) throw ConfigError("tol must be positive");
    if (max_iter < 1) throw ConfigError("max-iter must be >= 1");
    grid.a.validate("grid-a");
    grid.b.validate("grid-b");
    if (!(orbit.amplitude >= 0.0)) throw ConfigError("amplitude must be >= 0");
    if (!(orbit.shoot_tol > 0.0)) throw ConfigError("shoot-tol must be positive");
    if (orbit.limits.step_limit < 1) throw ConfigError("step-limit must be >= 1");
    if (!(orbit.limits.max_amplitude > 0.0) || !(orbit.limits.max_period > 0.0))
      throw ConfigError("max-amplitude and max-period must be positive");
  }
};

inline Boundary parse_boundary(const std::string& text) {
  if (text == "neumann" || text == "collinear" || text == "open") return Boundary::Neumann;
  if (text == "periodic" || text == "ring" || text == "closed") return Boundary::Periodic;
  throw ConfigError("boundary must be neumann or periodic, got '" + text + "'");
}

inline Format parse_format(const std::string& text) {
  if (text == "csv") return Format::Csv;
  if (text == "json") return Format::Json;
  throw ConfigError("format must be csv or json, got '" + text + "'");
}

/**
 * Physical constants from a key=value file (keys epsilon, sigma, b, k, q, m,
 * optionally under [physical]). The word "carbon" selects the built-in
 * carbon set instead of a file.
 */
inline PhysicalParams load_physical(const std::string& source) {
  if (source == "carbon") return PhysicalParams::carbon();
  const KeyValueFile f = KeyValueFile::load(source);
  PhysicalParams p;
  p.m = 1.0;
  bool any = false;
  for (const auto& [full, value] : f.values()) {
    const std::string key = full.rfind("physical.", 0) == 0 ? full.substr(9) : full;
    double* slot = key == "epsilon" ? &p.epsilon
                   : key == "sigma" ? &p.sigma
                   : key == "b"     ? &p.b
                   : key == "k"     ? &p.k
                   : key == "q"     ? &p.q
                   : key == "m"     ? &p.m
                                    : nullptr;
    if (!slot) throw ConfigError(source + ": unknown physical key '" + full + "'");
    *slot = detail::to_double(full, value);
    any = true;
  }
  if (!any) throw ConfigError(source + ": no physical parameters found");
  return p;
}

/**
 * Applies a config file on top of cfg. Unknown keys are errors so typos do
 * not silently fall back to defaults.
 */
inline void apply_file(RunConfig& cfg, const KeyValueFile& f, const std::string& origin) {
  PhysicalParams phys = PhysicalParams::carbon();
  bool phys_seen = false;
  for (const auto& [key, v] : f.values()) {
    if (key == "model.n") cfg.model.n = detail::to_int(key, v);
    else if (key == "model.boundary") cfg.model.boundary = parse_boundary(v);
    else if (key == "model.A") cfg.model.A = detail::to_double(key, v);
    else if (key == "model.B") cfg.model.B = detail::to_double(key, v);
    else if (key == "model.C") cfg.model.C = detail::to_double(key, v);
    else if (key == "model.rescale") cfg.model.rescale = detail::to_bool(key, v);
    else if (key == "model.physical") {
      cfg.model.physical = load_physical(v);
      cfg.model.physical_source = v;
    } else if (key.rfind("physical.", 0) == 0) {
      const std::string k = key.substr(9);
      double* slot = k == "epsilon" ? &phys.epsilon
                     : k == "sigma" ? &phys.sigma
                     : k == "b"     ? &phys.b
                     : k == "k"     ? &phys.k
                     : k == "q"     ? &phys.q
                     : k == "m"     ? &phys.m
                                    : nullptr;
      if (!slot) throw ConfigError(origin + ": unknown key '" + key + "'");
      if (!phys_seen) phys = PhysicalParams{0, 0, 0, 0, 0, 1.0};
      *slot = detail::to_double(key, v);
      phys_seen = true;
    } else if (key == "output.dir") cfg.output.dir = v;
    else if (key == "output.format") cfg.output.format = parse_format(v);
    else if (key == "output.precision") cfg.output.precision = detail::to_int(key, v);
    else if (key == "command.seed") cfg.orbit.seed = v;
    else if (key == "command.amplitude") cfg.orbit.amplitude = detail::to_double(key, v);
    else if (key == "command.shoot_tol") cfg.orbit.shoot_tol = detail::to_double(key, v);
    else if (key == "command.step_limit") cfg.orbit.limits.step_limit = detail::to_int(key, v);
    else if (key == "command.max_amplitude") cfg.orbit.limits.max_amplitude = detail::to_double(key, v);
    else if (key == "command.max_period") cfg.orbit.limits.max_period = detail::to_double(key, v);
    else if (key == "command.trajectory") cfg.orbit.trajectory = detail::to_bool(key, v);
    else if (key == "command.grid_a") cfg.grid.a = Range::parse(v, "grid_a");
    else if (key == "command.grid_b") cfg.grid.b = Range::parse(v, "grid_b");
    else if (key == "command.tol") cfg.tol = detail::to_double(key, v);
    else if (key == "command.max_iter") cfg.max_iter = detail::to_int(key, v);
    else if (key == "command.reference") cfg.reference = v;
    else throw ConfigError(origin + ": unknown key '" + key + "'");
  }
  if (phys_seen) {
    if (cfg.model.physical) throw ConfigError(origin + ": physical parameters given twice");
    cfg.model.physical = phys;
    cfg.model.physical_source = origin + " [physical]";
  }
}

}  // namespace chainlab::cli
