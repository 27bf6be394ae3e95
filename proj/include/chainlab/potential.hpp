#pragma once
/**
 * potential.hpp - dimensionless chain energy, its gradient and Hessian.
 *
 * Positions are stored flat as (x1, y1, x2, y2, ..., xn, yn). Every pair
 * term is written as a function of the squared distance x = |u_j - u_k|^2:
 *
 *   V(u) = sum_{bonds} U(x) + sum_{j<k} W(x)
 *   U(x) = x - 2 sqrt(x)                       (bond stretching, minimum at x = 1)
 *   W(x) = B x^-6 - A x^-3 + C x^-1/2          (Lennard-Jones + Coulomb)
 *
 * The bond term differs from the physical (sqrt(x) - 1)^2 form by the
 * constant -1 per bond; forces and Hessians are identical.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "chainlab/errors.hpp"

namespace chainlab {

using Positions = Eigen::VectorXd;
using PositionsView = Eigen::Ref<const Eigen::VectorXd>;

// Pairs closer than this are rejected by every energy routine.
inline constexpr double kCollisionGuard = 1e-8;

enum class Boundary { Neumann, Periodic };

inline const char* to_string(Boundary b) {
  return b == Boundary::Neumann ? "neumann" : "periodic";
}

// Dimensionless Lennard-Jones attraction A, repulsion B and Coulomb C.
struct ForceFieldParams {
  double A = 0.0;
  double B = 0.0;
  double C = 0.0;

  // Inside the (A, B) in [0,1] x [0,100] box used for sweeps.
  bool in_sweep_box() const {
    return A >= 0.0 && A <= 1.0 && B >= 0.0 && B <= 100.0;
  }
  bool has_repulsion() const { return B > 0.0 || C > 0.0; }
  bool is_zero() const { return A == 0.0 && B == 0.0 && C == 0.0; }

  void validate() const {
    if (!(A >= 0.0) || !(B >= 0.0) || !(C >= 0.0) || !std::isfinite(A) ||
        !std::isfinite(B) || !std::isfinite(C))
      throw UsageError("force field parameters must be finite and non-negative");
  }
};

/**
 * CHARMM-style physical constants.
 *
 * Units as tabulated: epsilon kJ/mol, sigma and b nm, q charge coefficient,
 * m particle mass. The bond constant k is quoted in kJ nm^-1 mol^-2 for
 * carbon (255224); dimensional consistency of k (sqrt(x) - b)^2 suggests
 * kJ nm^-2 mol^-1. The value is used verbatim, no unit conversion is applied.
 */
struct PhysicalParams {
  double epsilon = 0.0;
  double sigma = 0.0;
  double b = 0.0;
  double k = 0.0;
  double q = 0.0;
  double m = 1.0;

  void validate() const {
    if (!(epsilon > 0.0) || !(sigma > 0.0) || !(b > 0.0) || !(k > 0.0) ||
        !(m > 0.0))
      throw UsageError("physical parameters epsilon, sigma, b, k, m must be positive");
    if (!(q >= 0.0)) throw UsageError("physical charge coefficient q must be >= 0");
  }

  static PhysicalParams carbon() { return {0.3, 0.35, 0.13, 255224.0, 0.0, 1.0}; }
};

struct RescaledParams {
  ForceFieldParams params;
  double omega = 1.0;         // time scale, sqrt(k/m)
  double length_scale = 1.0;  // b: physical position = b * dimensionless position
};

// Conversion w_j(t) = b u_j(omega t) of the physical force field.
inline RescaledParams rescale_physical(const PhysicalParams& p) {
  p.validate();
  const double s6 = std::pow(p.sigma, 6);
  const double kb2 = p.k * p.b * p.b;
  RescaledParams out;
  out.params.A = 4.0 * p.epsilon * s6 / (p.k * std::pow(p.b, 8));
  out.params.B = 4.0 * p.epsilon * s6 * s6 / (p.k * std::pow(p.b, 14));
  out.params.C = p.q / (kb2 * p.b);
  out.omega = std::sqrt(p.k / p.m);
  out.length_scale = p.b;
  return out;
}

class ChainModel {
 public:
  ChainModel(int n, Boundary boundary, ForceFieldParams params)
      : n_(n), boundary_(boundary), params_(params) {
    if (n < 2) throw UsageError("chain needs at least 2 particles");
    if (boundary == Boundary::Periodic && n < 3)
      throw UsageError("periodic chain needs at least 3 particles");
    params_.validate();
  }

  int n() const { return n_; }
  int dof() const { return 2 * n_; }
  Boundary boundary() const { return boundary_; }
  bool periodic() const { return boundary_ == Boundary::Periodic; }
  const ForceFieldParams& params() const { return params_; }

  // True when particles i and j (0-based) share a bond.
  bool bonded(int i, int j) const {
    const int d = std::abs(i - j);
    return d == 1 || (periodic() && d == n_ - 1);
  }

 private:
  int n_;
  Boundary boundary_;
  ForceFieldParams params_;
};

// Value and first two derivatives with respect to the squared distance.
struct PairTerms {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;

  PairTerms& operator+=(const PairTerms& o) {
    value += o.value;
    d1 += o.d1;
    d2 += o.d2;
    return *this;
  }
};

inline PairTerms bond_potential(double x) {
  if (!(x > 0.0)) throw DomainError("bond potential needs x > 0 (collision)");
  const double r = std::sqrt(x);
  const double inv_r = 1.0 / r;
  return {x - 2.0 * r, 1.0 - inv_r, 0.5 * inv_r / x};
}

inline PairTerms nonbond_potential(double x, const ForceFieldParams& p) {
  if (!(x > 0.0)) throw DomainError("non-bonded potential needs x > 0 (collision)");
  PairTerms t;
  const double inv = 1.0 / x;
  if (p.A != 0.0 || p.B != 0.0) {
    const double inv3 = inv * inv * inv;
    const double inv6 = inv3 * inv3;
    t.value += p.B * inv6 - p.A * inv3;
    t.d1 += (-6.0 * p.B * inv6 + 3.0 * p.A * inv3) * inv;
    t.d2 += (42.0 * p.B * inv6 - 12.0 * p.A * inv3) * inv * inv;
  }
  if (p.C != 0.0) {
    const double isq = 1.0 / std::sqrt(x);
    t.value += p.C * isq;
    t.d1 += -0.5 * p.C * isq * inv;
    t.d2 += 0.75 * p.C * isq * inv * inv;
  }
  return t;
}

// [delta U + W](x): bond term included when the pair is bonded.
inline PairTerms pair_potential(double x, bool bonded, const ForceFieldParams& p) {
  PairTerms t = nonbond_potential(x, p);
  if (bonded) t += bond_potential(x);
  return t;
}

/**
 * Validated chain configuration: a point of the configuration space with
 * pairwise distinct particles and the centre of mass at the origin. The
 * constructor recentres its input.
 */
class Configuration {
 public:
  static Configuration from_positions(Positions positions) {
    if (positions.size() < 4 || positions.size() % 2 != 0)
      throw UsageError("configuration needs an even number (>= 4) of coordinates");
    const Eigen::Index n = positions.size() / 2;
    double cx = 0.0, cy = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      cx += positions[2 * j];
      cy += positions[2 * j + 1];
    }
    cx /= static_cast<double>(n);
    cy /= static_cast<double>(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      positions[2 * j] -= cx;
      positions[2 * j + 1] -= cy;
    }
    Configuration c(std::move(positions));
    c.require_distinct();
    return c;
  }

  static Configuration from_points(const std::vector<Eigen::Vector2d>& pts) {
    Positions p(2 * static_cast<Eigen::Index>(pts.size()));
    for (std::size_t j = 0; j < pts.size(); ++j) {
      p[2 * j] = pts[j].x();
      p[2 * j + 1] = pts[j].y();
    }
    return from_positions(std::move(p));
  }

  int size() const { return static_cast<int>(positions_.size() / 2); }
  const Positions& positions() const { return positions_; }
  Eigen::Vector2d point(int j) const { return {positions_[2 * j], positions_[2 * j + 1]}; }

 private:
  explicit Configuration(Positions p) : positions_(std::move(p)) {}
  void require_distinct() const;

  Positions positions_;
};

struct ClosestPair {
  int i = -1;
  int j = -1;
  double distance = std::numeric_limits<double>::infinity();
};

inline ClosestPair closest_pair(PositionsView q) {
  const int n = static_cast<int>(q.size() / 2);
  ClosestPair best;
  double best_sq = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double dx = q[2 * j] - q[2 * i];
      const double dy = q[2 * j + 1] - q[2 * i + 1];
      const double x = dx * dx + dy * dy;
      if (x < best_sq) {
        best_sq = x;
        best.i = i;
        best.j = j;
      }
    }
  best.distance = std::sqrt(best_sq);
  return best;
}

inline double min_pair_distance(PositionsView q) { return closest_pair(q).distance; }

/**
 * Closest approach of every pair while the configuration moves linearly
 * from qa to qb. Catches particles passing through each other between two
 * samples, which a pointwise check misses in one dimension.
 */
inline ClosestPair closest_pair_on_segment(PositionsView qa, PositionsView qb) {
  ClosestPair best;
  const int n = static_cast<int>(qa.size() / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const Eigen::Vector2d d0 = qa.segment<2>(2 * j) - qa.segment<2>(2 * i);
      const Eigen::Vector2d d1 = qb.segment<2>(2 * j) - qb.segment<2>(2 * i);
      const Eigen::Vector2d dd = d1 - d0;
      const double den = dd.squaredNorm();
      const double s = den > 0.0 ? std::clamp(-d0.dot(dd) / den, 0.0, 1.0) : 0.0;
      const double dist = (d0 + s * dd).norm();
      if (dist < best.distance) best = {i, j, dist};
    }
  return best;
}
inline double min_pair_distance(const Configuration& c) {
  return min_pair_distance(c.positions());
}

inline void Configuration::require_distinct() const {
  const ClosestPair cp = closest_pair(positions_);
  if (cp.distance < kCollisionGuard) throw CollisionError(cp.i, cp.j, cp.distance);
}

namespace detail {

inline void require_size(const ChainModel& m, PositionsView q) {
  if (q.size() != m.dof())
    throw UsageError("configuration has " + std::to_string(q.size() / 2) +
                     " particles, model has " + std::to_string(m.n()));
}

inline double checked_sq_distance(double x, int i, int j) {
  if (!(x >= kCollisionGuard * kCollisionGuard))
    throw CollisionError(i, j, std::sqrt(std::max(x, 0.0)));
  return x;
}

}  // namespace detail

inline double total_energy(const ChainModel& m, PositionsView q) {
  detail::require_size(m, q);
  const int n = m.n();
  double e = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double dx = q[2 * j] - q[2 * i];
      const double dy = q[2 * j + 1] - q[2 * i + 1];
      const double x = detail::checked_sq_distance(dx * dx + dy * dy, i, j);
      e += pair_potential(x, m.bonded(i, j), m.params()).value;
    }
  return e;
}

/**
 * Gradient of V written into `grad` (resized). Each pair contributes
 * +/- 2 (u_i - u_j) f'(x), so the per-component sums over particles vanish
 * up to rounding. Returns the smallest squared pair distance seen, which the
 * integrator uses for its collision guard.
 */
inline double gradient_into(const ChainModel& m, PositionsView q, Eigen::VectorXd& grad) {
  detail::require_size(m, q);
  const int n = m.n();
  grad.setZero(m.dof());
  double min_sq = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double dx = q[2 * i] - q[2 * j];
      const double dy = q[2 * i + 1] - q[2 * j + 1];
      const double x = detail::checked_sq_distance(dx * dx + dy * dy, i, j);
      min_sq = std::min(min_sq, x);
      const double f1 = 2.0 * pair_potential(x, m.bonded(i, j), m.params()).d1;
      const double gx = f1 * dx;
      const double gy = f1 * dy;
      grad[2 * i] += gx;
      grad[2 * i + 1] += gy;
      grad[2 * j] -= gx;
      grad[2 * j + 1] -= gy;
    }
  return min_sq;
}

inline Eigen::VectorXd gradient(const ChainModel& m, PositionsView q) {
  Eigen::VectorXd g;
  gradient_into(m, q, g);
  return g;
}

/**
 * Hessian assembled from 2x2 minors. For i != j,
 *   -A_ij = 2 f'(x) I + 4 f''(x) d d^T,   d = u_j - u_i,
 * and the diagonal minors follow from A_ii = -sum_{j != i} A_ij, so the two
 * translation vectors are annihilated to rounding by construction.
 */
inline Eigen::MatrixXd hessian(const ChainModel& m, PositionsView q) {
  detail::require_size(m, q);
  const int n = m.n();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m.dof(), m.dof());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double dx = q[2 * j] - q[2 * i];
      const double dy = q[2 * j + 1] - q[2 * i + 1];
      const double x = detail::checked_sq_distance(dx * dx + dy * dy, i, j);
      const PairTerms t = pair_potential(x, m.bonded(i, j), m.params());
      const double a = 2.0 * t.d1;
      const double c = 4.0 * t.d2;
      Eigen::Matrix2d minor;
      minor(0, 0) = -(a + c * dx * dx);
      minor(1, 1) = -(a + c * dy * dy);
      minor(0, 1) = minor(1, 0) = -(c * dx * dy);
      h.block<2, 2>(2 * i, 2 * j) = minor;
      h.block<2, 2>(2 * j, 2 * i) = minor;
    }
  for (int i = 0; i < n; ++i) {
    Eigen::Matrix2d diag = Eigen::Matrix2d::Zero();
    for (int j = 0; j < n; ++j)
      if (j != i) diag -= h.block<2, 2>(2 * i, 2 * j);
    h.block<2, 2>(2 * i, 2 * i) = diag;
  }
  return h;
}

inline double total_energy(const ChainModel& m, const Configuration& c) {
  return total_energy(m, c.positions());
}
inline Eigen::VectorXd gradient(const ChainModel& m, const Configuration& c) {
  return gradient(m, c.positions());
}
inline Eigen::MatrixXd hessian(const ChainModel& m, const Configuration& c) {
  return hessian(m, c.positions());
}

}  // namespace chainlab
