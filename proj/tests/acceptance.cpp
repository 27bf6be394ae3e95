// Acceptance suite: one PASS/FAIL line per criterion. With no argument every
// criterion runs; "acceptance 4" runs only the fourth. The exit status is
// nonzero when any selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "chainlab/chainlab.hpp"
#include "chainlab/cli/commands.hpp"
#include "support.hpp"

using namespace chainlab;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  std::vector<std::string> failures;

  std::string text() const {
    std::string s = detail.str();
    for (const auto& f : failures) s += " [failed: " + f + "]";
    return s;
  }

  // Records a failed sub-check; passing ones stay silent unless noted.
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      failures.push_back(what);
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string g(double x, int digits = 4) { return cli::format_number(x, digits); }

const ForceFieldParams kRounded{0.1, 40.0, 0.0};
ForceFieldParams carbon() { return rescale_physical(PhysicalParams::carbon()).params; }

// Frozen from the 50-digit evaluation in tests/oracles/frozen_values.py.
constexpr double kCarbonA = 0.1059549333973291774250756;
constexpr double kCarbonB = 40.35239676222421348556417;

void zero_coupling(Outcome& out) {
  const auto t0 = Clock::now();
  const ChainModel line(6, Boundary::Neumann, {});
  const auto ceq = collinear_equilibrium(line);
  const auto xs = ceq.coordinates();
  const double half = 0.5 * (xs.back() - xs.front());
  const ChainModel ring(6, Boundary::Periodic, {});
  const double radius = lowest_energy_ring(ring).radius;
  const double dt = seconds_since(t0);
  out.detail << "half length " << g(half, 15) << ", radius " << g(radius, 15) << ", " << g(dt, 2) << " s";
  out.require(std::abs(half - 2.5) <= 1e-10, "half length");
  out.require(std::abs(radius - 1.0) <= 1e-10, "radius");
  out.require(dt < 1.0, "runtime");
}

void carbon_rescaling(Outcome& out) {
  const auto p = carbon();
  out.detail << "A = " << g(p.A, 12) << ", B = " << g(p.B, 12) << ", C = " << g(p.C);
  out.require(p.A >= 0.10 && p.A <= 0.11, "A range");
  out.require(p.B >= 40.0 && p.B <= 41.0, "B range");
  out.require(p.C == 0.0, "C");
  out.require(std::abs(p.A - kCarbonA) <= 1e-14 * kCarbonA, "A against the high-precision value");
  out.require(std::abs(p.B - kCarbonB) <= 1e-14 * kCarbonB, "B against the high-precision value");
}

void table_counts(Outcome& out) {
  const auto t0 = Clock::now();
  const std::vector<int> line_ref{1, 2, 3, 4, 5, 6, 7, 8, 9};
  const std::vector<int> ring_ref{0, 0, 0, 0, 0, 0, 2, 2, 4};
  for (const auto& [name, p] : {std::pair{"rounded", kRounded}, std::pair{"exact", carbon()}}) {
    const auto rows = negative_count_table(p, 3, 11);
    std::string line_got, ring_got;
    bool ok = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      line_got += (i ? "," : "") + std::to_string(rows[i].collinear);
      ring_got += (i ? "," : "") + std::to_string(rows[i].ring);
      ok = ok && rows[i].collinear == line_ref[i] && rows[i].ring == ring_ref[i];
    }
    out.detail << name << ": collinear " << line_got << " ring " << ring_got << "; ";
    out.require(ok, std::string(name) + " counts");
  }
  const double dt = seconds_since(t0);
  out.detail << g(dt, 2) << " s";
  out.require(dt < 30.0, "runtime");
}

void table_eigenvalues(Outcome& out) {
  const auto t = cli::compute_table1(cli::load_reference(cli::default_reference_path()));
  const bool rounded = t.eigenvalues_pass(false);
  const bool exact = t.eigenvalues_pass(true);
  double worst_r = 0.0, worst_e = 0.0;
  for (const auto& c : t.eigenvalues)
    if (std::abs(c.reference) >= 1e-2) {
      worst_r = std::max(worst_r, std::abs(c.rounded - c.reference) / std::abs(c.reference));
      worst_e = std::max(worst_e, std::abs(c.exact - c.reference) / std::abs(c.reference));
    }
  out.detail << t.eigenvalues.size() << " cells; rounded " << (rounded ? "pass" : "fail")
             << " (worst " << g(100 * worst_r, 2) << "%), exact " << (exact ? "pass" : "fail")
             << " (worst " << g(100 * worst_e, 2) << "%)";
  if (rounded != exact) out.detail << "; agreement depends on the parameter choice";
  out.require(rounded || exact, "no parameter choice reproduces the table");
}

double max_sorted_mismatch(std::vector<double> a, Eigen::VectorXd b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (static_cast<Eigen::Index>(a.size()) != b.size()) return HUGE_VAL;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[static_cast<Eigen::Index>(i)]));
  return m;
}

void block_equivalence(Outcome& out) {
  std::mt19937_64 rng(5150);
  std::uniform_real_distribution<double> ua(0.0, 1.0), ub(0.0, 100.0);
  int points = 0, bad = 0, skipped = 0;
  double worst = 0.0;
  while (points < 50) {
    const ForceFieldParams p{ua(rng), ub(rng), 0.0};
    const int n = 3 + points % 8;
    try {
      const ChainModel line(n, Boundary::Neumann, p);
      const auto ceq = collinear_equilibrium(line);
      const Eigen::MatrixXd H = hessian(line, ceq.configuration());
      const Eigen::VectorXd dense = symmetric_eigen(H).values;
      const double hn = dense.cwiseAbs().maxCoeff();
      const auto cb = collinear_blocks(ceq, line);
      std::vector<double> blocks;
      for (const auto* M : {&cb.M0, &cb.M1}) {
        const Eigen::VectorXd v = symmetric_eigen(*M).values;
        blocks.insert(blocks.end(), v.data(), v.data() + v.size());
      }
      const double rl = max_sorted_mismatch(blocks, dense) / hn;

      const ChainModel ring(n, Boundary::Periodic, p);
      const auto req = lowest_energy_ring(ring);
      const Eigen::VectorXd rdense = symmetric_eigen(hessian(ring, req.configuration())).values;
      std::vector<double> rb;
      for (const auto& b : ring_coefficients(req, ring).blocks) {
        rb.push_back(b.lambda_plus);
        rb.push_back(b.lambda_minus);
      }
      const double rr = max_sorted_mismatch(rb, rdense) / rdense.cwiseAbs().maxCoeff();
      worst = std::max({worst, rl, rr});
      if (rl > 1e-8 || rr > 1e-8) ++bad;
      ++points;
    } catch (const Error&) {
      ++skipped;  // no equilibrium at this draw; the point is redrawn
    }
  }
  out.detail << points << " points x 2 boundaries, n = 3..10, worst mismatch " << g(worst, 3)
             << " ||H||, redrawn " << skipped;
  out.require(bad == 0, std::to_string(bad) + " points above 1e-8 ||H||");
}

void derivatives(Outcome& out) {
  std::mt19937_64 rng(90210);
  double worst_g = 0.0, worst_h = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + trial % 6;
    const ChainModel m(n, trial % 2 ? Boundary::Periodic : Boundary::Neumann, testsupport::random_params(rng));
    const Positions q = testsupport::random_configuration(n, rng);
    worst_g = std::max(worst_g, testsupport::rel_error(gradient(m, q), testsupport::fd_gradient(m, q)));
    worst_h = std::max(worst_h, testsupport::rel_error(hessian(m, q), testsupport::fd_hessian(m, q)));
  }
  out.detail << "20 configurations, gradient " << g(worst_g, 3) << ", Hessian " << g(worst_h, 3) << " relative";
  out.require(worst_g <= 1e-6, "gradient");
  out.require(worst_h <= 1e-5, "Hessian");
}

void zero_modes(Outcome& out) {
  double worst = 0.0;
  int equilibria = 0;
  for (int n = 3; n <= 11; ++n)
    for (const ForceFieldParams& p : {ForceFieldParams{}, kRounded, carbon()}) {
      const ChainModel line(n, Boundary::Neumann, p);
      const auto c = collinear_equilibrium(line).configuration();
      const Eigen::MatrixXd H = hessian(line, c);
      const double hn = symmetric_eigen(H).values.cwiseAbs().maxCoeff();
      for (int axis : {0, 1})
        worst = std::max(worst, (H * testsupport::translation(n, axis)).norm() / hn);

      const ChainModel ring(n, Boundary::Periodic, p);
      const auto rc = lowest_energy_ring(ring).configuration();
      const Eigen::MatrixXd Hr = hessian(ring, rc);
      const double hrn = symmetric_eigen(Hr).values.cwiseAbs().maxCoeff();
      const Eigen::MatrixXd Z = symmetry_kernel(rc.positions());
      out.require(Z.cols() == 3, "ring kernel dimension at n = " + std::to_string(n));
      for (Eigen::Index col = 0; col < Z.cols(); ++col)
        worst = std::max(worst, (Hr * Z.col(col)).norm() / hrn);
      equilibria += 2;
    }
  out.detail << equilibria << " equilibria, worst kernel residual " << g(worst, 3) << " ||H||";
  out.require(worst <= 1e-8, "kernel residual");
}

struct Seeded {
  ChainModel model;
  std::vector<BifurcationMode> modes;
  std::vector<double> nus;
};

Seeded seeded(const ChainModel& m) {
  const auto eq = cli::solve_equilibrium(m);
  const auto rep = full_spectrum(m, eq.configuration);
  Seeded s{m, bifurcation_modes(m, eq.configuration, rep), {}};
  for (const auto& c : rep.candidates) s.nus.push_back(c.nu);
  return s;
}

void brake_orbits(Outcome& out) {
  const auto t0 = Clock::now();
  const std::vector<std::pair<std::string, Seeded>> systems{
      {"n=2", seeded(ChainModel(2, Boundary::Neumann, {}))},
      {"ring", seeded(ChainModel(6, Boundary::Periodic, carbon()))}};

  double min_order = HUGE_VAL, worst_brake = 0.0, worst_energy = 0.0;
  int laws = 0;
  std::vector<std::string> endings;
  int bad_endings = 0, truncated = 0, returns = 0, bad_returns = 0;
  for (const auto& [name, sys] : systems)
    for (std::size_t i = 0; i < sys.modes.size(); ++i) {
      const auto& mode = sys.modes[i];
      const std::string tag = name + " mode " + std::to_string(i + 1);
      if (!mode.nonresonant || !mode.supported) {
        out.require(false, tag + " cannot be seeded");
        continue;
      }
      try {
        const PeriodLaw law = period_law(sys.model, mode);
        ++laws;
        if (!law.isochronous) min_order = std::min(min_order, law.order);
        out.require(law.isochronous || law.order >= 1.8, tag + " order " + g(law.order, 3));
        for (const auto& p : law.points) {
          worst_brake = std::max({worst_brake, p.check.brake_start, p.check.brake_end});
          worst_energy = std::max(worst_energy, p.check.energy_drift);
        }

        const Shooter sh(sys.model, mode);
        const BrakeOrbit seed = shoot(sh, seed_from_mode(mode, sys.model, 1e-3));
        const Branch br = continue_branch(sh, seed, sys.nus);
        endings.push_back(to_string(br.termination));
        if (br.termination == Termination::StepLimit) {
          ++truncated;
        } else if (!is_global_outcome(br.termination)) {
          ++bad_endings;
          out.require(false, tag + " ended " + to_string(br.termination) + " (" + br.detail + ")");
        }
        if (br.termination == Termination::ReturnedToBifurcationPoint) {
          ++returns;
          bool near_other = false;
          for (double nu : sys.nus)
            if (std::abs(nu - br.seed_frequency) > 1e-12 * nu &&
                std::abs(br.returned_frequency - nu) <= 1e-3 * nu)
              near_other = true;
          if (!near_other) ++bad_returns;
        }
      } catch (const Error& e) {
        out.require(false, tag + ": " + e.what());
      }
    }
  const double dt = seconds_since(t0);
  out.detail << laws << " period laws, min order " << g(min_order, 3) << ", brake residual "
             << g(worst_brake, 2) << ", energy drift " << g(worst_energy, 2) << "; branches:";
  for (const auto& e : endings) out.detail << " " << e;
  out.detail << " (" << truncated << " truncated by the step limit, " << returns << " returns); "
             << g(dt, 3) << " s";
  out.require(worst_brake <= 1e-9, "brake residual");
  out.require(worst_energy <= 1e-8, "energy drift");
  out.require(bad_returns == 0, "return away from every other frequency");
  out.require(dt < 300.0, "runtime");
}

// Number of 8-connected components among the successful cells with the given count.
// Thin diagonal bands are sampled as cells that touch only at corners.
int components(const cli::SweepResult& res, int count) {
  const int na = res.grid.a.steps, nb = res.grid.b.steps;
  std::vector<char> seen(static_cast<std::size_t>(na) * nb, 0);
  auto member = [&](int ia, int ib) {
    const auto& c = res.at(ia, ib);
    return c.negative_count && *c.negative_count == count;
  };
  int regions = 0;
  for (int ia = 0; ia < na; ++ia)
    for (int ib = 0; ib < nb; ++ib) {
      if (!member(ia, ib) || seen[ia * nb + ib]) continue;
      ++regions;
      std::queue<std::pair<int, int>> frontier;
      frontier.push({ia, ib});
      seen[ia * nb + ib] = 1;
      while (!frontier.empty()) {
        const auto [a, b] = frontier.front();
        frontier.pop();
        for (int da = -1; da <= 1; ++da)
          for (int db = -1; db <= 1; ++db) {
            const int x = a + da, y = b + db;
            if (x < 0 || y < 0 || x >= na || y >= nb || seen[x * nb + y] || !member(x, y)) continue;
            seen[x * nb + y] = 1;
            frontier.push({x, y});
          }
      }
    }
  return regions;
}

void sweep_regression(Outcome& out) {
  const auto t0 = Clock::now();
  const cli::SweepGrid grid;
  for (const auto b : {Boundary::Neumann, Boundary::Periodic}) {
    const std::string name = b == Boundary::Neumann ? "collinear" : "ring";
    const auto res = cli::compute_sweep(6, b, grid);
    std::set<int> levels;
    for (const auto& c : res.cells)
      if (c.negative_count) levels.insert(*c.negative_count);
    std::string split;
    for (int level : levels)
      if (const int parts = components(res, level); parts > 1)
        split += " " + std::to_string(level) + " (" + std::to_string(parts) + " parts)";
    out.detail << name << ": " << res.failures() << " failed cells, levels {";
    for (int level : levels) out.detail << (level == *levels.begin() ? "" : ",") << level;
    out.detail << "}; ";
    out.require(res.failures() == 0, name + " has " + std::to_string(res.failures()) + " failed cells");
    out.require(res.at(0, 0).negative_count == 0, name + " count at (0,0)");
    out.require(split.empty(), name + " levels split at this resolution:" + split);

    if (b == Boundary::Neumann) {
      const int ib = 8;  // B = 40 on the default grid
      bool monotone = true;
      std::optional<int> prev;
      for (int ia = 0; ia < grid.a.steps; ++ia) {
        const auto& c = res.at(ia, ib);
        if (!c.negative_count) continue;
        if (prev && *c.negative_count < *prev) monotone = false;
        prev = c.negative_count;
      }
      out.require(std::abs(grid.b.at(ib) - 40.0) < 1e-12 && monotone, "collinear count decreases along A at B = 40");
    }
  }
  const double dt = seconds_since(t0);
  out.detail << g(dt, 3) << " s";
  out.require(dt < 600.0, "runtime");
}

struct Criterion {
  const char* title;
  std::function<void(Outcome&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {"zero-coupling closed forms", zero_coupling},
      {"carbon rescaling", carbon_rescaling},
      {"negative counts n = 3..11", table_counts},
      {"six-atom eigenvalues", table_eigenvalues},
      {"block and dense spectra agree", block_equivalence},
      {"derivatives match finite differences", derivatives},
      {"symmetry zero modes", zero_modes},
      {"brake-orbit bifurcation limit", brake_orbits},
      {"sweep regression", sweep_regression},
  };

  std::vector<int> selected;
  if (argc > 1) {
    const int k = std::atoi(argv[1]);
    if (k < 1 || k > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "usage: %s [criterion 1..%zu]\n", argv[0], criteria.size());
      return 2;
    }
    selected.push_back(k);
  } else {
    for (std::size_t k = 1; k <= criteria.size(); ++k) selected.push_back(static_cast<int>(k));
  }

  int failed = 0;
  for (int k : selected) {
    Outcome out;
    try {
      criteria[k - 1].run(out);
    } catch (const std::exception& e) {
      out.pass = false;
      out.failures.push_back(std::string("exception: ") + e.what());
    }
    if (!out.pass) ++failed;
    std::printf("%s  %d  %s: %s\n", out.pass ? "PASS" : "FAIL", k, criteria[k - 1].title, out.text().c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
