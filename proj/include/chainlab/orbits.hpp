#pragma once
/**
 * orbits.hpp - periodic brake orbits bifurcating from symmetric equilibria.
 *
 * A brake orbit starts at rest, x'(0) = 0, and is at rest again at the half
 * period T/2; time reversibility then closes it into a T-periodic solution
 * with x(-t) = x(t). Orbits are sought inside the fixed-point slice of the
 * seed mode's isotropy group with the symmetry kernel (translations and
 * rotation) removed, where the linear frequency is simple.
 *
 * Unknowns are X = (r, theta): reduced initial displacement r (positions
 * a + B r) and the scaled half period theta = T_half / T_ref. The d brake
 * equations F(X) = B^T v(T_half) are closed by one linear constraint: the
 * amplitude pin <r, e_r> = eps when shooting, the arclength condition during
 * continuation.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chainlab/equilibria.hpp"
#include "chainlab/errors.hpp"
#include "chainlab/integrator.hpp"
#include "chainlab/potential.hpp"
#include "chainlab/spectra.hpp"
#include "chainlab/symmetry.hpp"

namespace chainlab {

enum class Family { CollinearK0, CollinearK1, RingBrake, RingHalf, RingFull };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::CollinearK0: return "collinear-k0";
    case Family::CollinearK1: return "collinear-k1";
    case Family::RingBrake: return "ring-brake";
    case Family::RingHalf: return "ring-half";
    default: return "ring-full";
  }
}

struct SymmetryClass {
  Family family = Family::CollinearK0;
  int k = 0;

  bool collinear() const {
    return family == Family::CollinearK0 || family == Family::CollinearK1;
  }
  // Extra label carried into output metadata; no geometric claim is checked.
  std::string note() const { return family == Family::CollinearK1 ? "figure-eight family" : ""; }
};

// g x(t + shift * T_half) = x(t) along the orbit, shift in {0, 1}.
struct SpatioTemporalSymmetry {
  SpatialSymmetry g;
  bool half_shift = false;
};

struct ReductionMap {
  Positions origin;
  Eigen::MatrixXd basis;  // 2n x d, orthonormal columns
  std::vector<SpatialSymmetry> subgroup;

  int dim() const { return static_cast<int>(basis.cols()); }
  Positions expand(const Eigen::VectorXd& r) const { return origin + basis * r; }
  Eigen::VectorXd restrict(const Eigen::VectorXd& q) const { return basis.transpose() * (q - origin); }
  Eigen::VectorXd restrict_tangent(const Eigen::VectorXd& v) const { return basis.transpose() * v; }
};

inline ReductionMap make_reduction(const ChainModel& m, const Configuration& eq,
                                   std::vector<SpatialSymmetry> subgroup) {
  ReductionMap red;
  red.origin = eq.positions();
  red.basis = fixed_point_basis(subgroup, m.dof(), symmetry_kernel(eq.positions()));
  red.subgroup = std::move(subgroup);
  return red;
}

/**
 * Position slice of the fixed-point space for a family:
 * CollinearK0 keeps the chain on its axis (K = {I, R}); CollinearK1 and the
 * simple ring blocks only impose the time reflection (K = {I}); RingBrake
 * adds x_j = R x_{n-j}.
 */
inline ReductionMap symmetry_basis(const ChainModel& m, const Configuration& eq,
                                   SymmetryClass cls) {
  if (cls.collinear() == m.periodic())
    throw UsageError(std::string("symmetry class ") + to_string(cls.family) +
                     " does not match the " + to_string(m.boundary()) + " boundary");
  const auto group = equilibrium_symmetries(m, eq);
  std::vector<SpatialSymmetry> k{group.front()};
  auto find = [&](const Eigen::Matrix2d& Q, bool identity_perm) {
    for (const auto& g : group) {
      bool idp = true;
      for (int j = 0; j < g.size(); ++j) idp = idp && g.perm[j] == j;
      if ((g.Q - Q).cwiseAbs().maxCoeff() < 1e-12 && (!identity_perm || idp)) return g;
    }
    throw UsageError("equilibrium lacks the symmetry required by the class");
  };
  if (cls.family == Family::CollinearK0) k.push_back(find(reflection_R(), true));
  if (cls.family == Family::RingBrake) k.push_back(find(reflection_R(), false));
  return make_reduction(m, eq, std::move(k));
}

// ---------------------------------------------------------------------------
// Bifurcation modes
// ---------------------------------------------------------------------------

struct BifurcationMode {
  SymmetryClass symmetry;
  double lambda = 0.0;
  double nu = 0.0;
  int multiplicity = 1;
  std::string block;
  bool nonresonant = true;
  int resonant_l = 0;
  bool supported = true;
  std::string unsupported_reason;
  Eigen::VectorXd vector;  // unit eigenvector in the slice
  ReductionMap reduction;
  std::vector<SpatioTemporalSymmetry> declared;
  double nu_max = 0.0;  // fastest linear frequency at the equilibrium
};

namespace detail {

inline void orient(Eigen::VectorXd& v) {
  Eigen::Index i = 0;
  v.cwiseAbs().maxCoeff(&i);
  if (v[i] < 0) v = -v;
}

inline BifurcationMode build_mode(const ChainModel& m, const Configuration& eq,
                                  const std::vector<SpatialSymmetry>& group,
                                  const Eigen::MatrixXd& H, double hnorm, EquilibriumKind kind,
                                  double lambda, const Eigen::MatrixXd& eigenspace, int block_index,
                                  const std::vector<double>& spectrum) {
  const int n = m.n();
  BifurcationMode mode;
  mode.lambda = lambda;
  mode.nu = std::sqrt(lambda);
  mode.multiplicity = static_cast<int>(eigenspace.cols());
  mode.nu_max = std::sqrt(std::max(lambda, *std::max_element(spectrum.begin(), spectrum.end())));
  const auto l = resonance_order(lambda, spectrum, 0, 1e-8 * hnorm);
  mode.nonresonant = !l.has_value();
  mode.resonant_l = l.value_or(0);

  auto reject = [&](const std::string& why) {
    mode.supported = false;
    mode.unsupported_reason = why;
    mode.vector = eigenspace.col(0);
    return mode;
  };

  if (kind == EquilibriumKind::Generic) return reject("equilibrium is neither collinear nor a ring");

  Eigen::VectorXd e;
  if (mode.multiplicity == 1) {
    e = eigenspace.col(0);
  } else {
    if (kind != EquilibriumKind::Ring || mode.multiplicity != 2)
      return reject("degenerate eigenvalue outside a ring block pair");
    // restrict the pair to the slice x_j = R x_{n-j} of the reflection with Q = R
    const auto refl = std::find_if(group.begin(), group.end(), [](const SpatialSymmetry& g) {
      return (g.Q - reflection_R()).cwiseAbs().maxCoeff() < 1e-12;
    });
    if (refl == group.end()) return reject("ring reflection not found");
    const Eigen::MatrixXd P = fixed_point_projector({group.front(), *refl}, m.dof());
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(P * eigenspace, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    if (!(sv[0] > 1e-6) || sv[1] > 1e-6 * sv[0])
      return reject("reflection-fixed part of the eigenspace is not one-dimensional");
    e = svd.matrixU().col(0);
  }
  e.normalize();
  orient(e);
  mode.vector = e;

  std::vector<SpatialSymmetry> iso = isotropy(group, e, 1.0);
  mode.reduction = make_reduction(m, eq, iso);
  for (const auto& g : group) {
    if ((g.apply(e) - e).norm() <= 1e-7) mode.declared.push_back({g, false});
    else if ((g.apply(e) + e).norm() <= 1e-7) mode.declared.push_back({g, true});
  }

  const Eigen::MatrixXd& B = mode.reduction.basis;
  if (B.cols() == 0) return reject("empty fixed-point slice");
  if ((B * (B.transpose() * e) - e).norm() > 1e-6) return reject("mode leaves its fixed-point slice");
  const Eigen::VectorXd mu = symmetric_eigen(B.transpose() * H * B).values;
  int same = 0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if (std::abs(mu[i]) <= 1e-10 * hnorm) return reject("zero eigenvalue inside the slice");
    if (std::abs(mu[i] - lambda) <= 1e-7 * hnorm) ++same;
  }
  if (same != 1) return reject("eigenvalue is not simple in its fixed-point slice");

  if (kind == EquilibriumKind::Collinear) {
    bool axial = true;
    for (int j = 0; j < n; ++j) axial = axial && std::abs(e[2 * j + 1]) <= 1e-9;
    mode.symmetry = axial ? SymmetryClass{Family::CollinearK0, 0} : SymmetryClass{Family::CollinearK1, 1};
  } else if (mode.multiplicity == 2) {
    mode.symmetry = {Family::RingBrake, block_index};
  } else if (block_index == n) {
    mode.symmetry = {Family::RingFull, n};
  } else {
    mode.symmetry = {Family::RingHalf, block_index};
  }
  return mode;
}

}  // namespace detail

/**
 * One mode per bifurcation candidate of the report, in the report's order
 * (largest frequency first). Modes that cannot be shot are kept with
 * supported = false and a reason.
 */
inline std::vector<BifurcationMode> bifurcation_modes(const ChainModel& m, const Configuration& eq,
                                                      const SpectralReport& rep) {
  const auto group = equilibrium_symmetries(m, eq);
  const Eigen::MatrixXd H = hessian(m, eq);
  const auto spectrum = rep.values();
  std::vector<BifurcationMode> modes;
  for (const auto& c : rep.candidates) {
    Eigen::MatrixXd E(m.dof(), static_cast<Eigen::Index>(c.indices.size()));
    for (std::size_t i = 0; i < c.indices.size(); ++i)
      E.col(static_cast<Eigen::Index>(i)) = rep.eigenvectors.col(c.indices[i]);
    auto mode = detail::build_mode(m, eq, group, H, rep.hessian_norm, rep.kind, c.lambda, E,
                                   c.block_index, spectrum);
    mode.block = c.block;
    modes.push_back(std::move(mode));
  }
  return modes;
}

// ---------------------------------------------------------------------------
// Brake orbits and shooting
// ---------------------------------------------------------------------------

struct BrakeOrbit {
  Positions initial_positions;
  Eigen::VectorXd reduced;  // r
  double half_period = 0.0;
  SymmetryClass symmetry;
  double energy = 0.0;
  double amplitude = 0.0;  // sup-norm of initial_positions - equilibrium
  double pin = 0.0;        // <r, e_r>
  double residual = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  long long steps = 0;  // integration steps over one half period

  double period() const { return 2.0 * half_period; }
  Configuration configuration() const { return Configuration::from_positions(initial_positions); }
};

inline BrakeOrbit seed_from_mode(const BifurcationMode& mode, const ChainModel& m, double epsilon) {
  if (!mode.nonresonant) throw ResonanceError(mode.lambda, mode.resonant_l);
  if (!mode.supported) throw UsageError("mode cannot seed a branch: " + mode.unsupported_reason);
  BrakeOrbit o;
  o.reduced = epsilon * mode.reduction.restrict_tangent(mode.vector);
  o.initial_positions = mode.reduction.expand(o.reduced);
  o.half_period = M_PI / mode.nu;
  o.symmetry = mode.symmetry;
  o.energy = total_energy(m, o.initial_positions);
  o.amplitude = (o.initial_positions - mode.reduction.origin).lpNorm<Eigen::Infinity>();
  o.pin = epsilon;
  return o;
}

/**
 * Seed from an explicit frequency and eigenvector. The eigenvector must be
 * a Hessian eigenvector at eq with eigenvalue nu_k^2; its multiplicity is
 * taken from the spectrum.
 */
inline BrakeOrbit seed_from_mode(const ChainModel& m, const Configuration& eq, double nu_k,
                                 const Eigen::VectorXd& eigenvector, double epsilon,
                                 const SpectralReport& rep) {
  if (!(nu_k > 0.0)) throw DomainError("seed frequency must be positive");
  const double lambda = nu_k * nu_k;
  const auto spectrum = rep.values();
  const auto l = resonance_order(lambda, spectrum, 0, 1e-8 * rep.hessian_norm);
  if (l) throw ResonanceError(lambda, *l);
  int block = -1;
  for (const auto& c : rep.candidates)
    if (std::abs(c.lambda - lambda) <= 1e-7 * rep.hessian_norm) block = c.block_index;
  Eigen::MatrixXd E = eigenvector.normalized();
  auto mode = detail::build_mode(m, eq, equilibrium_symmetries(m, eq), hessian(m, eq),
                                 rep.hessian_norm, rep.kind, lambda, E, block, spectrum);
  if (rep.kind == EquilibriumKind::Ring) {
    int mult = 0;
    for (double v : spectrum) mult += std::abs(v - lambda) <= 1e-7 * rep.hessian_norm;
    if (mult == 2) mode.symmetry = {Family::RingBrake, block};
  }
  return seed_from_mode(mode, m, epsilon);
}

struct ShootOptions {
  double tol = 1e-9;         // sup-norm of the reduced velocity at T_half
  int max_newton = 25;
  double fd_step = 1e-6;     // relative finite-difference step of the flow Jacobian
  Scheme scheme = Scheme::Yoshida6;
  int steps_per_period = 200;  // steps per fastest linear period
  int min_steps = 64;
};

class Shooter {
 public:
  Shooter(const ChainModel& m, const BifurcationMode& mode, ShootOptions opt = {})
      : model_(m), mode_(mode), opt_(opt) {
    if (!mode.supported) throw UsageError("mode cannot be shot: " + mode.unsupported_reason);
    e_r_ = mode.reduction.restrict_tangent(mode.vector).normalized();
    t_ref_ = M_PI / mode.nu;
    dt_ref_ = 2.0 * M_PI / (opt_.steps_per_period * mode.nu_max);
  }

  const ChainModel& model() const { return model_; }
  const BifurcationMode& mode() const { return mode_; }
  const ShootOptions& options() const { return opt_; }
  const Eigen::VectorXd& pin_direction() const { return e_r_; }
  double reference_half_period() const { return t_ref_; }
  int dim() const { return mode_.reduction.dim(); }

  // Halves the reference step; used when energy conservation degrades.
  void refine() { dt_ref_ *= 0.5; }

  long long steps_for(double T) const {
    return std::max<long long>(opt_.min_steps, static_cast<long long>(std::ceil(T / dt_ref_)));
  }

  struct Flow {
    PhaseState end;
    Eigen::VectorXd F;       // reduced velocity at T
    Eigen::VectorXd dF_dT;   // reduced acceleration at T
    long long steps = 0;
  };

  Flow flow(const Eigen::VectorXd& r, double T, long long steps = 0) const {
    if (!(T > 0.0)) throw DomainError("half period must be positive");
    if (steps <= 0) steps = steps_for(T);
    Propagator prop(model_, opt_.scheme);
    PhaseState s = PhaseState::at_rest(mode_.reduction.expand(r));
    const double h = T / static_cast<double>(steps);
    for (long long k = 0; k < steps; ++k) prop.step(s, h);
    Flow f;
    f.F = mode_.reduction.restrict_tangent(s.v);
    f.dF_dT = mode_.reduction.restrict_tangent(prop.force(s.q, s.t));
    f.end = std::move(s);
    f.steps = steps;
    return f;
  }

  // d x (d+1) Jacobian of F with respect to (r, theta) at a fixed step count.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& X, const Flow& base) const {
    const int d = dim();
    const Eigen::VectorXd r = X.head(d);
    const double T = X[d] * t_ref_;
    Eigen::MatrixXd J(d, d + 1);
    const double h = opt_.fd_step * std::max(1.0, r.lpNorm<Eigen::Infinity>());
    for (int i = 0; i < d; ++i) {
      Eigen::VectorXd rp = r;
      rp[i] += h;
      J.col(i) = (flow(rp, T, base.steps).F - base.F) / h;
    }
    J.col(d) = base.dF_dT * t_ref_;
    return J;
  }

  struct Solution {
    Eigen::VectorXd X;
    Flow flow;
    Eigen::MatrixXd jacobian;  // at the solution
    int iterations = 0;
    double residual = 0.0;
  };

  /**
   * Newton on [F(X); w.X - target] = 0 from X0. The Jacobian is refreshed
   * whenever the residual contracts by less than a factor 10 (chord
   * iterations otherwise). Past the tolerance up to three polishing steps
   * run until the update stalls at rounding level.
   */
  Solution correct(Eigen::VectorXd X, const Eigen::VectorXd& w, double target,
                   const Eigen::MatrixXd* jac_hint = nullptr) const {
    const int d = dim();
    Flow fl = flow(X.head(d), X[d] * t_ref_);
    const long long steps = fl.steps;
    Eigen::MatrixXd J = jac_hint ? *jac_hint : jacobian(X, fl);
    double prev = std::numeric_limits<double>::infinity();
    double last_step = std::numeric_limits<double>::infinity();
    int polish = 0;
    int reached = -1;
    int growth = 0;
    for (int it = 0;; ++it) {
      const double res = fl.F.lpNorm<Eigen::Infinity>();
      const double con = std::abs(w.dot(X) - target);
      if (!std::isfinite(res)) throw ConvergenceError("shooting residual is not finite", X, res, it);
      const bool within = res <= opt_.tol && con <= 1e-12 * std::max(1.0, std::abs(target));
      if (within && reached < 0) reached = it;
      const bool stalled = last_step <= 1e-11 * std::max(1.0, X.lpNorm<Eigen::Infinity>()) ||
                           res > 0.25 * prev;
      if ((within && it == 0 && res <= 1e-3 * opt_.tol) || (within && it > 0 && (stalled || polish >= 3))) {
        return {X, std::move(fl), J, reached, res};
      }
      if (within) ++polish;
      if (it >= opt_.max_newton) {
        if (within) return {X, std::move(fl), J, reached, res};
        throw ConvergenceError("shooting Newton did not converge", X, res, it);
      }
      growth = res > prev ? growth + 1 : 0;
      if (growth >= 3) throw ConvergenceError("shooting Newton diverges", X, res, it);
      if (it > 0 && res > 0.1 * prev) J = jacobian(X, fl);

      Eigen::MatrixXd A(d + 1, d + 1);
      A.topRows(d) = J;
      A.row(d) = w.transpose();
      Eigen::VectorXd rhs(d + 1);
      rhs.head(d) = -fl.F;
      rhs[d] = target - w.dot(X);
      const Eigen::VectorXd dx = A.colPivHouseholderQr().solve(rhs);
      if (!dx.allFinite()) throw ConvergenceError("singular shooting Jacobian", X, res, it);
      X += dx;
      if (!(X[d] > 0.0)) throw ConvergenceError("half period became non-positive", X, res, it);
      last_step = dx.lpNorm<Eigen::Infinity>();
      prev = res;
      fl = flow(X.head(d), X[d] * t_ref_, steps);
    }
  }

  BrakeOrbit make_orbit(const Solution& s) const {
    const int d = dim();
    BrakeOrbit o;
    o.reduced = s.X.head(d);
    o.initial_positions = mode_.reduction.expand(o.reduced);
    o.half_period = s.X[d] * t_ref_;
    o.symmetry = mode_.symmetry;
    o.energy = total_energy(model_, o.initial_positions);
    o.amplitude = (o.initial_positions - mode_.reduction.origin).lpNorm<Eigen::Infinity>();
    o.pin = e_r_.dot(o.reduced);
    o.residual = s.residual;
    o.iterations = s.iterations;
    o.steps = s.flow.steps;
    return o;
  }

  Eigen::VectorXd unknowns(const BrakeOrbit& o) const {
    Eigen::VectorXd X(dim() + 1);
    X.head(dim()) = o.reduced;
    X[dim()] = o.half_period / t_ref_;
    return X;
  }

 private:
  const ChainModel& model_;
  BifurcationMode mode_;
  ShootOptions opt_;
  Eigen::VectorXd e_r_;
  double t_ref_ = 1.0;
  double dt_ref_ = 1.0;
};

// Converges a guess at fixed amplitude pin <r, e_r> = guess.pin.
inline BrakeOrbit shoot(const Shooter& shooter, const BrakeOrbit& guess) {
  const int d = shooter.dim();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d + 1);
  w.head(d) = shooter.pin_direction();
  return shooter.make_orbit(shooter.correct(shooter.unknowns(guess), w, guess.pin));
}

inline BrakeOrbit shoot(const ChainModel& m, const BifurcationMode& mode, const BrakeOrbit& guess,
                        ShootOptions opt = {}) {
  return shoot(Shooter(m, mode, opt), guess);
}

// ---------------------------------------------------------------------------
// Orbit verification
// ---------------------------------------------------------------------------

struct OrbitCheck {
  double brake_start = 0.0;      // sup-norm of the velocity at t = 0
  double brake_end = 0.0;        // sup-norm of the velocity at T_half
  double time_reflection = 0.0;  // max |x(-t) - x(t)|
  double symmetry = 0.0;         // max violation of the declared relations
  double energy_drift = 0.0;     // max |E(t) - E(0)| / |E(0)|
  double periodicity = 0.0;      // |x(T) - x(0)|

  bool pass(double brake_tol = 1e-9, double tol = 1e-8) const {
    return brake_start <= brake_tol && brake_end <= brake_tol && time_reflection <= tol &&
           symmetry <= tol && energy_drift <= tol;
  }
};

/**
 * Integrates the orbit over a full period forward and half a period
 * backward, sampling `samples` points per period, and measures every
 * BrakeOrbit invariant.
 */
inline OrbitCheck verify_orbit(const Shooter& shooter, const BrakeOrbit& o, int samples = 32) {
  const ChainModel& m = shooter.model();
  const long long per_sample = std::max<long long>(1, (2 * o.steps + samples - 1) / samples);
  const double h = o.period() / static_cast<double>(per_sample * samples);
  Propagator prop(m, shooter.options().scheme);

  std::vector<PhaseState> fwd{PhaseState::at_rest(o.initial_positions)};
  for (int s = 0; s < samples; ++s) {
    PhaseState st = fwd.back();
    for (long long k = 0; k < per_sample; ++k) prop.step(st, h);
    fwd.push_back(st);
  }
  std::vector<PhaseState> bwd{fwd.front()};
  for (int s = 0; s < samples / 2; ++s) {
    PhaseState st = bwd.back();
    for (long long k = 0; k < per_sample; ++k) prop.step(st, -h);
    bwd.push_back(st);
  }

  OrbitCheck c;
  const int half = samples / 2;
  const double e0 = mechanical_energy(m, fwd.front());
  c.brake_start = fwd.front().v.lpNorm<Eigen::Infinity>();
  // the half period is a sample point only for even sample counts
  {
    PhaseState st = PhaseState::at_rest(o.initial_positions);
    const double hh = o.half_period / static_cast<double>(o.steps);
    for (long long k = 0; k < o.steps; ++k) prop.step(st, hh);
    c.brake_end = st.v.lpNorm<Eigen::Infinity>();
  }
  for (int s = 0; s <= samples; ++s)
    c.energy_drift = std::max(c.energy_drift, std::abs(mechanical_energy(m, fwd[s]) - e0) /
                                                  std::max(std::abs(e0), 1e-300));
  for (int s = 0; s <= half; ++s)
    c.time_reflection = std::max(c.time_reflection, (bwd[s].q - fwd[s].q).lpNorm<Eigen::Infinity>());
  for (const auto& rel : shooter.mode().declared)
    for (int s = 0; s <= half; ++s) {
      const int shifted = s + (rel.half_shift ? half : 0);
      c.symmetry = std::max(c.symmetry, (rel.g.apply(fwd[shifted].q) - fwd[s].q).lpNorm<Eigen::Infinity>());
    }
  c.periodicity = (fwd.back().q - fwd.front().q).lpNorm<Eigen::Infinity>();
  return c;
}

// ---------------------------------------------------------------------------
// Small-amplitude period law
// ---------------------------------------------------------------------------

struct PeriodLawPoint {
  double epsilon = 0.0;
  double half_period = 0.0;
  double deviation = 0.0;  // |2 T_half - 2 pi / nu|
  OrbitCheck check;
};

struct PeriodLaw {
  std::vector<PeriodLawPoint> points;
  double order = std::numeric_limits<double>::quiet_NaN();  // smallest observed order
  double K = 0.0;                                           // max deviation / eps^2
  bool isochronous = false;  // every deviation below the noise floor
};

/**
 * Shoots the mode at each amplitude and fits |2 T_half - 2 pi/nu| ~ K eps^p.
 * Deviations all below noise_floor mean the period does not depend on the
 * amplitude at this resolution and no order is reported.
 */
inline PeriodLaw period_law(const ChainModel& m, const BifurcationMode& mode,
                            std::vector<double> epsilons = {1e-3, 5e-4, 2.5e-4},
                            ShootOptions opt = {}, double noise_floor = 1e-10) {
  opt.steps_per_period = std::max(opt.steps_per_period, 400);
  const Shooter shooter(m, mode, opt);
  PeriodLaw law;
  for (double eps : epsilons) {
    const BrakeOrbit o = shoot(shooter, seed_from_mode(mode, m, eps));
    PeriodLawPoint p;
    p.epsilon = eps;
    p.half_period = o.half_period;
    p.deviation = std::abs(2.0 * o.half_period - 2.0 * M_PI / mode.nu);
    p.check = verify_orbit(shooter, o);
    law.K = std::max(law.K, p.deviation / (eps * eps));
    law.points.push_back(p);
  }
  law.isochronous = std::all_of(law.points.begin(), law.points.end(),
                                [&](const auto& p) { return p.deviation <= noise_floor; });
  if (!law.isochronous) {
    double order = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < law.points.size(); ++i) {
      const auto& a = law.points[i];
      const auto& b = law.points[i + 1];
      order = std::min(order, std::log(a.deviation / b.deviation) / std::log(a.epsilon / b.epsilon));
    }
    law.order = order;
  }
  return law;
}

// ---------------------------------------------------------------------------
// Continuation
// ---------------------------------------------------------------------------

enum class Termination {
  MaxAmplitude,
  MaxPeriod,
  Collision,
  ReturnedToBifurcationPoint,
  StepLimit,
  SolverStalled,
};

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::MaxAmplitude: return "MaxAmplitude";
    case Termination::MaxPeriod: return "MaxPeriod";
    case Termination::Collision: return "Collision";
    case Termination::ReturnedToBifurcationPoint: return "ReturnedToBifurcationPoint";
    case Termination::StepLimit: return "StepLimit";
    default: return "SolverStalled";
  }
}

// True for the outcomes of the global alternative (blow-up, collision, return).
inline bool is_global_outcome(Termination t) {
  return t == Termination::MaxAmplitude || t == Termination::MaxPeriod ||
         t == Termination::Collision || t == Termination::ReturnedToBifurcationPoint;
}

struct StepControl {
  double initial = 0.02;
  double min = 1e-6;
  double max = 0.25;
  double grow = 1.3;
  int easy_iterations = 3;
};

struct ContinuationLimits {
  double max_amplitude = 10.0;
  double max_period = 1e3;
  int step_limit = 500;
  double return_amplitude = 1e-2;  // below this the branch is back near the equilibrium
  double return_tol = 1e-3;        // relative distance of pi / T_half to another nu_j
  double energy_tol = 1e-8;
  double resolution_tol = 1e-6;    // relative shift of the unknowns when re-integrated with twice the steps
  int max_refinements = 6;
};

struct Branch {
  std::vector<BrakeOrbit> orbits;
  std::vector<double> arclength;
  double seed_frequency = 0.0;
  SymmetryClass symmetry;
  Termination termination = Termination::StepLimit;
  std::string detail;
  double returned_frequency = std::numeric_limits<double>::quiet_NaN();
  bool amplitude_monotone = true;
};

/**
 * Pseudo-arclength continuation from a converged seed. The tangent is the
 * null vector of the d x (d+1) brake Jacobian, oriented along increasing
 * pin at the seed and along the previous tangent afterwards. known_frequencies
 * lists the linear frequencies a branch may return to.
 */
inline Branch continue_branch(const Shooter& shooter_in, const BrakeOrbit& seed,
                              const std::vector<double>& known_frequencies, StepControl ctl = {},
                              ContinuationLimits lim = {}) {
  Shooter shooter = shooter_in;
  const int d = shooter.dim();
  const double nu_seed = shooter.mode().nu;

  Branch br;
  br.seed_frequency = nu_seed;
  br.symmetry = shooter.mode().symmetry;
  br.orbits.push_back(seed);
  br.arclength.push_back(0.0);

  auto tangent = [&](const Eigen::MatrixXd& J, const Eigen::VectorXd& prev) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeFullV);
    Eigen::VectorXd t = svd.matrixV().col(d);
    if (t.dot(prev) < 0.0) t = -t;
    return Eigen::VectorXd(t.normalized());
  };

  Eigen::VectorXd X = shooter.unknowns(seed);
  Shooter::Flow f0 = shooter.flow(X.head(d), X[d] * shooter.reference_half_period());
  Eigen::MatrixXd J = shooter.jacobian(X, f0);
  Eigen::VectorXd orient = Eigen::VectorXd::Zero(d + 1);
  orient.head(d) = shooter.pin_direction();
  Eigen::VectorXd tau = tangent(J, orient);

  double ds = ctl.initial;
  double s = 0.0;
  int refinements = 0;
  bool last_collision = false;
  std::string last_error;
  // Halves the step size for the rest of the branch; J must match the new flow.
  const auto refine = [&] {
    if (refinements >= lim.max_refinements) return false;
    shooter.refine();
    ++refinements;
    J = shooter.jacobian(X, shooter.flow(X.head(d), X[d] * shooter.reference_half_period()));
    return true;
  };

  while (true) {
    if (static_cast<int>(br.orbits.size()) - 1 >= lim.step_limit) {
      br.termination = Termination::StepLimit;
      break;
    }
    if (ds < ctl.min) {
      br.termination = last_collision ? Termination::Collision : Termination::SolverStalled;
      br.detail = last_error;
      break;
    }
    const Eigen::VectorXd Xp = X + ds * tau;
    Shooter::Solution sol;
    Eigen::MatrixXd Jac;
    try {
      if (!(Xp[d] > 0.0)) throw ConvergenceError("predictor left T > 0", Xp, NAN, 0);
      sol = shooter.correct(Xp, tau, tau.dot(Xp), &J);
      const ClosestPair path = closest_pair_on_segment(
          shooter.mode().reduction.expand(X.head(d)), shooter.mode().reduction.expand(sol.X.head(d)));
      if (path.distance < kIntegratorGuard) throw CollisionError(path.i, path.j, path.distance);
      const double e0 = total_energy(shooter.model(), shooter.mode().reduction.expand(sol.X.head(d)));
      const double e_end = mechanical_energy(shooter.model(), sol.flow.end);
      const bool drifted = std::abs(e_end - e0) > lim.energy_tol * std::max(1.0, std::abs(e0));
      if (drifted && refine()) continue;
      Jac = shooter.jacobian(sol.X, sol.flow);
      // An orbit that only closes at the current step size is an artefact of
      // the discretization. Integrating again with twice the steps and asking
      // how far Newton would have to move the unknowns exposes it.
      const Eigen::VectorXd fine_F = shooter.flow(sol.X.head(d), sol.X[d] * shooter.reference_half_period(),
                                                  2 * sol.flow.steps).F;
      const double shift = Jac.completeOrthogonalDecomposition().solve(fine_F).lpNorm<Eigen::Infinity>();
      if (!(shift <= lim.resolution_tol * std::max(1.0, sol.X.lpNorm<Eigen::Infinity>()))) {
        if (refine()) continue;
        throw ConvergenceError("orbit not resolved by the time step", sol.X, fine_F.lpNorm<Eigen::Infinity>(), 0);
      }
    } catch (const CollisionError& e) {
      last_collision = true;
      last_error = e.what();
      ds *= 0.5;
      continue;
    } catch (const ConvergenceError& e) {
      last_collision = false;
      last_error = e.what();
      // A residual stuck just above tolerance is integration noise, not a bad predictor.
      if (e.residual() < 1e3 * shooter.options().tol && refine()) continue;
      ds *= 0.5;
      continue;
    }

    BrakeOrbit o = shooter.make_orbit(sol);
    const Eigen::VectorXd tau_new = tangent(Jac, tau);
    s += (sol.X - X).norm();
    if (o.amplitude < br.orbits.back().amplitude) br.amplitude_monotone = false;
    const double prev_amp = br.orbits.back().amplitude;
    br.orbits.push_back(o);
    br.arclength.push_back(s);
    X = sol.X;
    J = Jac;
    tau = tau_new;
    last_collision = false;
    if (sol.iterations <= ctl.easy_iterations) ds = std::min(ctl.max, ds * ctl.grow);

    if (o.amplitude > lim.max_amplitude) {
      br.termination = Termination::MaxAmplitude;
      break;
    }
    if (o.period() > lim.max_period) {
      br.termination = Termination::MaxPeriod;
      break;
    }
    if (o.amplitude < lim.return_amplitude && o.amplitude < prev_amp) {
      for (double nu : known_frequencies) {
        if (std::abs(nu - nu_seed) <= 1e-9 * nu_seed) continue;
        if (std::abs(M_PI / o.half_period / nu - 1.0) < lim.return_tol) {
          br.termination = Termination::ReturnedToBifurcationPoint;
          br.returned_frequency = nu;
          break;
        }
      }
      if (br.termination == Termination::ReturnedToBifurcationPoint) break;
    }
  }
  return br;
}

}  // namespace chainlab
