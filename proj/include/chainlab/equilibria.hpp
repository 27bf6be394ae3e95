#pragma once
/**
 * equilibria.hpp - symmetric critical points of the chain energy.
 *
 * Two families are computed constructively:
 *  - the collinear chain (Neumann boundary), minimised over the symmetric
 *    subspace a_{n+1-j} = -a_j on the x-axis by damped Newton;
 *  - the regular n-gon (periodic boundary) a_j = a (cos j zeta, sin j zeta),
 *    zeta = 2 pi / n, whose radius solves S(a) = 1.
 */

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "chainlab/errors.hpp"
#include "chainlab/potential.hpp"

namespace chainlab {

namespace detail {

// cos/sin of 2 pi p / n with exact values on quarter turns.
inline double cos_turn(long long p, long long n) {
  long long r = ((p % n) + n) % n;
  if (r == 0) return 1.0;
  if (2 * r == n) return -1.0;
  if (4 * r == n || 4 * r == 3 * n) return 0.0;
  return std::cos(2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(n));
}

inline double sin_turn(long long p, long long n) {
  long long r = ((p % n) + n) % n;
  if (r == 0 || 2 * r == n) return 0.0;
  if (4 * r == n) return 1.0;
  if (4 * r == 3 * n) return -1.0;
  return std::sin(2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(n));
}

}  // namespace detail

// s_k = 2 sin(k pi / n): chord of the unit n-gon between vertices k apart.
inline double chord_factor(int n, int k) {
  if (n < 2) throw UsageError("chord_factor needs n >= 2");
  // sin(k pi / n) = sin(2 pi k / (2n))
  return 2.0 * detail::sin_turn(k, 2LL * n);
}

/**
 * S(a) - 1 for the ring ansatz, where
 *   S(a) = 1/(a s_1) - 1/(2 s_1^2) sum_{k=1}^{n-1} W'(a^2 s_k^2) s_k^2.
 * Roots are exactly the radii at which the regular polygon is critical.
 */
inline double ring_residual(double a, const ChainModel& m) {
  if (!m.periodic()) throw UsageError("ring_residual needs a periodic chain");
  if (!(a > 0.0)) throw DomainError("ring radius must be positive");
  const int n = m.n();
  const double s1 = chord_factor(n, 1);
  double sum = 0.0;
  for (int k = 1; k < n; ++k) {
    const double sk2 = std::pow(chord_factor(n, k), 2);
    sum += nonbond_potential(a * a * sk2, m.params()).d1 * sk2;
  }
  return 1.0 / (a * s1) - sum / (2.0 * s1 * s1) - 1.0;
}

// Regular n-gon of radius a, particle j at angle j zeta (j = 1..n).
inline Positions ring_positions(int n, double a) {
  Positions p(2 * n);
  for (int j = 1; j <= n; ++j) {
    p[2 * (j - 1)] = a * detail::cos_turn(j, n);
    p[2 * (j - 1) + 1] = a * detail::sin_turn(j, n);
  }
  return p;
}

struct CircularEquilibrium {
  int n = 0;
  double radius = 0.0;
  double residual = 0.0;  // |S(radius) - 1|
  double energy = 0.0;

  Configuration configuration() const {
    return Configuration::from_positions(ring_positions(n, radius));
  }
};

struct RadiusScan {
  double a_min = 0.05;
  double a_max = 50.0;
  int grid_points = 400;
};

/**
 * All radii in [a_min, a_max] with S(a) = 1, ascending. Sign changes are
 * located on a log-spaced grid and each bracket is bisected down to
 * floating-point resolution; a root is accepted when |S(a) - 1| <= tol.
 */
inline std::vector<CircularEquilibrium> circular_radius(const ChainModel& m,
                                                        RadiusScan scan = {},
                                                        double tol = 1e-10) {
  if (!m.periodic()) throw UsageError("circular_radius needs a periodic chain");
  if (!(scan.a_min > 0.0) || !(scan.a_max > scan.a_min) || scan.grid_points < 2)
    throw UsageError("radius scan needs 0 < a_min < a_max and >= 2 grid points");

  const int g = scan.grid_points;
  const double log_lo = std::log(scan.a_min);
  const double log_hi = std::log(scan.a_max);
  std::vector<double> grid(g), res(g);
  for (int i = 0; i < g; ++i) {
    grid[i] = i == 0       ? scan.a_min
              : i == g - 1 ? scan.a_max
                           : std::exp(log_lo + (log_hi - log_lo) * i / (g - 1));
    res[i] = ring_residual(grid[i], m);
  }

  std::vector<double> roots;
  for (int i = 0; i + 1 < g; ++i) {
    if (res[i] == 0.0) {
      roots.push_back(grid[i]);
      continue;
    }
    if (res[i] * res[i + 1] >= 0.0) continue;
    double lo = grid[i], hi = grid[i + 1], f_lo = res[i];
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      const double f_mid = ring_residual(mid, m);
      if (f_mid == 0.0) {
        lo = hi = mid;
        break;
      }
      if ((f_mid < 0.0) == (f_lo < 0.0)) {
        lo = mid;
        f_lo = f_mid;
      } else {
        hi = mid;
      }
    }
    const double r_lo = std::abs(ring_residual(lo, m));
    const double r_hi = std::abs(ring_residual(hi, m));
    roots.push_back(r_lo <= r_hi ? lo : hi);
  }
  if (res[g - 1] == 0.0) roots.push_back(grid[g - 1]);

  if (roots.empty()) throw NoBracketError(scan.a_min, scan.a_max, res.front(), res.back());

  std::vector<CircularEquilibrium> out;
  for (double a : roots) {
    CircularEquilibrium eq;
    eq.n = m.n();
    eq.radius = a;
    eq.residual = std::abs(ring_residual(a, m));
    if (eq.residual > tol)
      throw ConvergenceError("ring radius bisection", Eigen::VectorXd::Constant(1, a),
                             eq.residual, 200);
    eq.energy = total_energy(m, ring_positions(m.n(), a));
    out.push_back(eq);
  }
  return out;
}

// Root of S(a) = 1 with the lowest energy.
inline CircularEquilibrium lowest_energy_ring(const ChainModel& m, RadiusScan scan = {},
                                              double tol = 1e-10) {
  auto roots = circular_radius(m, scan, tol);
  return *std::min_element(roots.begin(), roots.end(),
                           [](const auto& a, const auto& b) { return a.energy < b.energy; });
}

/**
 * Symmetric collinear equilibrium. Only the non-negative coordinates are
 * stored: n/2 of them for even n, (n+1)/2 for odd n with the middle
 * particle pinned at 0. The full chain is a_{n+1-j} = -a_j on the x-axis.
 */
struct CollinearEquilibrium {
  int n = 0;
  std::vector<double> half_positions;
  double residual = 0.0;  // reduced-gradient sup-norm at convergence
  double energy = 0.0;
  int iterations = 0;
  std::vector<double> energy_trace;  // energy at every accepted iterate

  double half_length() const { return half_positions.back(); }

  std::vector<double> coordinates() const {
    std::vector<double> x(n);
    const int h = static_cast<int>(half_positions.size());
    for (int i = 0; i < h; ++i) {
      x[n - h + i] = half_positions[i];
      x[h - 1 - i] = -half_positions[i];
    }
    return x;
  }

  Configuration configuration() const {
    Positions p = Positions::Zero(2 * n);
    const auto x = coordinates();
    for (int j = 0; j < n; ++j) p[2 * j] = x[j];
    return Configuration::from_positions(std::move(p));
  }
};

struct CollinearOptions {
  double tol = 1e-10;
  int max_iter = 200;
  // Run the collinear solver on a periodic model (experimental; the
  // bond between particles 1 and n then stretches across the chain).
  bool allow_periodic = false;
};

namespace detail {

// Map between the free coordinates h (positive side, middle excluded) and
// the x-coordinates of the full chain.
struct CollinearReduction {
  int n;
  int free;    // number of free coordinates
  int offset;  // index of the first particle carrying +h_0

  explicit CollinearReduction(int n_) : n(n_), free(n_ / 2), offset((n_ + 1) / 2) {}

  int plus(int i) const { return offset + i; }
  int minus(int i) const { return n - 1 - offset - i; }

  Positions expand(const Eigen::VectorXd& h) const {
    Positions p = Positions::Zero(2 * n);
    for (int i = 0; i < free; ++i) {
      p[2 * plus(i)] = h[i];
      p[2 * minus(i)] = -h[i];
    }
    return p;
  }

  Eigen::VectorXd reduce_gradient(const Eigen::VectorXd& g) const {
    Eigen::VectorXd r(free);
    for (int i = 0; i < free; ++i) r[i] = g[2 * plus(i)] - g[2 * minus(i)];
    return r;
  }

  Eigen::MatrixXd reduce_hessian(const Eigen::MatrixXd& h) const {
    Eigen::MatrixXd r(free, free);
    for (int a = 0; a < free; ++a)
      for (int b = 0; b < free; ++b) {
        const int pa = 2 * plus(a), ma = 2 * minus(a);
        const int pb = 2 * plus(b), mb = 2 * minus(b);
        r(a, b) = h(pa, pb) - h(pa, mb) - h(ma, pb) + h(ma, mb);
      }
    return r;
  }

  // Strictly increasing chain with gaps above the collision guard.
  bool admissible(const Eigen::VectorXd& h) const {
    const bool odd = n % 2 == 1;
    // first gap: between -h_0 and h_0 (even) or 0 and h_0 (odd)
    const double first_gap = odd ? h[0] : 2.0 * h[0];
    if (!(first_gap > kCollisionGuard)) return false;
    for (int i = 1; i < free; ++i)
      if (!(h[i] - h[i - 1] > kCollisionGuard)) return false;
    return true;
  }
};

}  // namespace detail

/**
 * Damped Newton on the reduced energy E(h) = V(expand(h)), started from unit
 * spacing. Indefinite reduced Hessians are replaced by their absolute
 * spectrum; an Armijo backtracking search keeps the energy decreasing and
 * the chain ordered at every accepted step.
 */
inline CollinearEquilibrium collinear_equilibrium(const ChainModel& m,
                                                  CollinearOptions opt = {}) {
  if (m.periodic() && !opt.allow_periodic)
    throw UsageError("collinear_equilibrium needs a Neumann chain");
  if (!m.params().has_repulsion() && !m.params().is_zero())
    throw UsageError("collinear minimisation needs B > 0 or C > 0 (or A = B = C = 0)");

  const int n = m.n();
  const detail::CollinearReduction red(n);
  Eigen::VectorXd h(red.free);
  for (int i = 0; i < red.free; ++i) h[i] = (n % 2 == 0) ? i + 0.5 : i + 1.0;

  CollinearEquilibrium out;
  out.n = n;
  double energy = total_energy(m, red.expand(h));
  out.energy_trace.push_back(energy);

  double gnorm = 0.0;
  int iter = 0;
  for (;; ++iter) {
    const Positions q = red.expand(h);
    const Eigen::VectorXd g = red.reduce_gradient(gradient(m, q));
    gnorm = g.lpNorm<Eigen::Infinity>();
    if (gnorm <= opt.tol) break;
    if (iter >= opt.max_iter)
      throw ConvergenceError("collinear Newton did not converge", h, gnorm, iter);

    const Eigen::MatrixXd H = red.reduce_hessian(hessian(m, q));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    const double floor = 1e-8 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    Eigen::VectorXd step = Eigen::VectorXd::Zero(red.free);
    for (int k = 0; k < red.free; ++k) {
      const Eigen::VectorXd v = es.eigenvectors().col(k);
      step -= v * (v.dot(g) / std::max(std::abs(es.eigenvalues()[k]), floor));
    }

    const double slope = g.dot(step);
    double t = 1.0;
    bool accepted = false;
    bool blocked = false;
    while (t > 1e-14) {
      const Eigen::VectorXd trial = h + t * step;
      if (red.admissible(trial)) {
        const double e_trial = total_energy(m, red.expand(trial));
        // roundoff allowance lets the last Newton steps through
        if (e_trial <= energy + 1e-4 * t * slope + 4e-16 * std::abs(energy)) {
          h = trial;
          energy = std::min(e_trial, energy);
          accepted = true;
          break;
        }
      } else {
        blocked = true;
      }
      t *= 0.5;
    }
    if (!accepted) {
      if (blocked) {
        const ClosestPair cp = closest_pair(red.expand(h));
        throw CollisionError(cp.i, cp.j, cp.distance);
      }
      throw ConvergenceError("collinear line search stalled", h, gnorm, iter);
    }
    out.energy_trace.push_back(energy);
  }

  out.iterations = iter;
  out.residual = gnorm;
  out.energy = total_energy(m, red.expand(h));
  if (n % 2 == 1) out.half_positions.push_back(0.0);
  for (int i = 0; i < red.free; ++i) out.half_positions.push_back(h[i]);
  return out;
}

struct EquilibriumCheck {
  double residual = 0.0;  // sup-norm of the gradient
  bool pass = false;
};

inline EquilibriumCheck verify_equilibrium(const ChainModel& m, PositionsView q,
                                           double tol) {
  EquilibriumCheck c;
  c.residual = gradient(m, q).lpNorm<Eigen::Infinity>();
  c.pass = c.residual <= tol;
  return c;
}

inline EquilibriumCheck verify_equilibrium(const ChainModel& m, const Configuration& c,
                                           double tol) {
  return verify_equilibrium(m, c.positions(), tol);
}

}  // namespace chainlab
