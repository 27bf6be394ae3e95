#pragma once
/**
 * integrator.hpp - fixed-step time integration of  q'' = -grad V(q).
 *
 * Velocity Verlet is the base scheme. Yoshida compositions of Verlet give
 * 4th and 6th order while staying symplectic and time-reversible; RK4 is
 * kept for cross-checks. Every force evaluation doubles as a collision
 * check against the integrator guard distance.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "chainlab/errors.hpp"
#include "chainlab/potential.hpp"
#include "chainlab/spectra.hpp"

namespace chainlab {

inline constexpr double kIntegratorGuard = 1e-4;

struct PhaseState {
  Positions q;
  Eigen::VectorXd v;
  double t = 0.0;

  static PhaseState at_rest(Positions q, double t = 0.0) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(q.size());
    return {std::move(q), std::move(v), t};
  }
};

inline double kinetic_energy(const PhaseState& s) { return 0.5 * s.v.squaredNorm(); }

inline double mechanical_energy(const ChainModel& m, const PhaseState& s) {
  return kinetic_energy(s) + total_energy(m, s.q);
}

enum class Scheme { Verlet, Yoshida4, Yoshida6, RK4 };

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::Verlet: return "verlet";
    case Scheme::Yoshida4: return "yoshida4";
    case Scheme::Yoshida6: return "yoshida6";
    default: return "rk4";
  }
}

inline int scheme_order(Scheme s) {
  switch (s) {
    case Scheme::Verlet: return 2;
    case Scheme::Yoshida6: return 6;
    default: return 4;
  }
}

namespace detail {

// Substep weights of the symmetric compositions (Yoshida 1990, solution A for order 6).
inline std::span<const double> composition_weights(Scheme s) {
  static const std::array<double, 1> verlet{1.0};
  static const std::array<double, 3> y4 = [] {
    const double c = std::cbrt(2.0);
    const double w1 = 1.0 / (2.0 - c);
    return std::array<double, 3>{w1, -c * w1, w1};
  }();
  static const std::array<double, 7> y6 = [] {
    const double w1 = -1.17767998417887;
    const double w2 = 0.235573213359357;
    const double w3 = 0.784513610477560;
    const double w0 = 1.0 - 2.0 * (w1 + w2 + w3);
    return std::array<double, 7>{w3, w2, w1, w0, w1, w2, w3};
  }();
  switch (s) {
    case Scheme::Yoshida4: return y4;
    case Scheme::Yoshida6: return y6;
    default: return verlet;
  }
}

}  // namespace detail

/**
 * Stateful stepper for one model. Caches the force at the current state so
 * each Verlet substep costs one gradient evaluation. The cache is keyed on
 * the position vector; handing in a different state just recomputes it.
 */
class Propagator {
 public:
  explicit Propagator(const ChainModel& m, Scheme scheme = Scheme::Verlet,
                      double guard = kIntegratorGuard)
      : model_(&m),
        scheme_(scheme),
        guard_(guard),
        guard_sq_(guard * guard),
        sweep_segments_(!m.params().has_repulsion()) {}

  Scheme scheme() const { return scheme_; }
  const ChainModel& model() const { return *model_; }
  long long force_evaluations() const { return evaluations_; }

  // -grad V(q) with the collision check; t only labels the error.
  const Eigen::VectorXd& force(const Positions& q, double t) {
    if (cached_ && q.size() == cached_q_.size() && q == cached_q_) return cached_f_;
    cached_f_.resize(q.size());
    const double dmin_sq = gradient_into(*model_, q, cached_f_);
    ++evaluations_;
    if (dmin_sq < guard_sq_) {
      cached_ = false;
      const ClosestPair cp = closest_pair(q);
      throw CollisionError(cp.i, cp.j, cp.distance, t);
    }
    cached_f_ = -cached_f_;
    cached_q_ = q;
    cached_ = true;
    return cached_f_;
  }

  void step(PhaseState& s, double dt) {
    if (!(dt != 0.0) || !std::isfinite(dt)) throw DomainError("time step must be finite and non-zero");
    if (scheme_ == Scheme::RK4) {
      step_rk4(s, dt);
      return;
    }
    for (double w : detail::composition_weights(scheme_)) verlet(s, w * dt);
  }

 private:
  // Without a repulsive core nothing stops particles from passing through
  // each other within one drift, so the drift segment is checked as well.
  void drift(PhaseState& s, double h) {
    if (!sweep_segments_) {
      s.q.noalias() += h * s.v;
      return;
    }
    const Positions before = s.q;
    s.q.noalias() += h * s.v;
    const ClosestPair cp = closest_pair_on_segment(before, s.q);
    if (cp.distance < guard_) throw CollisionError(cp.i, cp.j, cp.distance, s.t);
  }

  void verlet(PhaseState& s, double h) {
    s.v.noalias() += 0.5 * h * force(s.q, s.t);
    drift(s, h);
    s.t += h;
    s.v.noalias() += 0.5 * h * force(s.q, s.t);
  }

  void step_rk4(PhaseState& s, double h) {
    const Positions q0 = s.q;
    const Eigen::VectorXd v0 = s.v;
    const Eigen::VectorXd a1 = force(q0, s.t);
    const Eigen::VectorXd k1q = v0;
    const Eigen::VectorXd a2 = force(q0 + 0.5 * h * k1q, s.t + 0.5 * h);
    const Eigen::VectorXd k2q = v0 + 0.5 * h * a1;
    const Eigen::VectorXd a3 = force(q0 + 0.5 * h * k2q, s.t + 0.5 * h);
    const Eigen::VectorXd k3q = v0 + 0.5 * h * a2;
    const Eigen::VectorXd a4 = force(q0 + h * k3q, s.t + h);
    const Eigen::VectorXd k4q = v0 + h * a3;
    s.q = q0 + (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
    s.v = v0 + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
    s.t += h;
  }

  const ChainModel* model_;
  Scheme scheme_;
  double guard_;
  double guard_sq_;
  bool sweep_segments_;
  bool cached_ = false;
  Positions cached_q_;
  Eigen::VectorXd cached_f_;
  long long evaluations_ = 0;
};

// One velocity-Verlet step.
inline PhaseState step_verlet(const PhaseState& s, double dt, const ChainModel& m,
                              double guard = kIntegratorGuard) {
  if (!(dt > 0.0)) throw DomainError("step_verlet needs dt > 0");
  PhaseState out = s;
  Propagator(m, Scheme::Verlet, guard).step(out, dt);
  return out;
}

// Fastest linear period resolved by 1000 steps: dt = 2 pi / (1000 nu_max).
inline double default_time_step(const ChainModel& m, const Configuration& equilibrium) {
  const double top = symmetric_eigen(hessian(m, equilibrium)).values.maxCoeff();
  if (!(top > 0.0)) throw DomainError("default_time_step needs a positive Hessian eigenvalue");
  return 2.0 * M_PI / (1000.0 * std::sqrt(top));
}

// ---------------------------------------------------------------------------
// Observers and the integration loop
// ---------------------------------------------------------------------------

// Called after every step (and once on the initial state). Must not modify the state.
using Observer = std::function<void(const PhaseState&)>;

class EnergyLog {
 public:
  explicit EnergyLog(const ChainModel& m) : model_(&m) {}
  void operator()(const PhaseState& s) {
    const double e = mechanical_energy(*model_, s);
    if (times_.empty()) e0_ = e;
    times_.push_back(s.t);
    energies_.push_back(e);
    max_drift_ = std::max(max_drift_, std::abs(e - e0_));
  }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& energies() const { return energies_; }
  double max_drift() const { return max_drift_; }

 private:
  const ChainModel* model_;
  std::vector<double> times_, energies_;
  double e0_ = 0.0;
  double max_drift_ = 0.0;
};

// Keeps every stride-th state.
class TrajectoryRecorder {
 public:
  explicit TrajectoryRecorder(int stride = 1) : stride_(std::max(1, stride)) {}
  void operator()(const PhaseState& s) {
    if (count_++ % stride_ == 0) samples_.push_back(s);
  }
  const std::vector<PhaseState>& samples() const { return samples_; }

 private:
  int stride_;
  long long count_ = 0;
  std::vector<PhaseState> samples_;
};

struct IntegrationResult {
  PhaseState final_state;
  long long steps = 0;
};

/**
 * Steps from s.t to t_end with step dt; the last step is shortened to land
 * on t_end exactly. Negative dt with t_end < s.t integrates backwards.
 */
inline IntegrationResult integrate(const PhaseState& s, double dt, double t_end,
                                   const ChainModel& m, const std::vector<Observer>& observers = {},
                                   Scheme scheme = Scheme::Verlet,
                                   double guard = kIntegratorGuard) {
  const double span = t_end - s.t;
  if (!(dt != 0.0) || !(span * dt > 0.0))
    throw DomainError("integrate needs dt > 0 and t_end > t (or both reversed)");
  const long long steps = static_cast<long long>(std::ceil(std::abs(span / dt) - 1e-9));
  const double h = span / static_cast<double>(steps);

  Propagator prop(m, scheme, guard);
  IntegrationResult res{s, steps};
  for (const auto& ob : observers) ob(res.final_state);
  const double t0 = s.t;
  for (long long k = 1; k <= steps; ++k) {
    prop.step(res.final_state, h);
    res.final_state.t = t0 + static_cast<double>(k) * h;
    for (const auto& ob : observers) ob(res.final_state);
  }
  res.final_state.t = t_end;
  return res;
}

// ---------------------------------------------------------------------------
// Brake instants
// ---------------------------------------------------------------------------

struct BrakeEvent {
  double time = 0.0;
  double velocity_norm = 0.0;  // sup-norm of the (projected) velocity at the event
  PhaseState state;
};

namespace detail {

inline Eigen::VectorXd project(const Eigen::MatrixXd* basis, const Eigen::VectorXd& v) {
  return basis ? Eigen::VectorXd(basis->transpose() * v) : v;
}

// d/dt of half the squared projected velocity.
inline double kinetic_rate(Propagator& prop, const Eigen::MatrixXd* basis, const PhaseState& s) {
  return project(basis, s.v).dot(project(basis, prop.force(s.q, s.t)));
}

}  // namespace detail

/**
 * Finds every kinetic-energy minimum inside a window of consecutive samples
 * (equal spacing not required). The derivative proxy
 * d/dt (|P v|^2 / 2) = (P v) . (P a)  changes sign from <= 0 to > 0 at a
 * minimum; the crossing is refined by bisection over single integrator steps
 * started from the bracketing sample. With a basis P (orthonormal columns)
 * the velocities are measured in the reduced coordinates.
 */
inline std::vector<BrakeEvent> detect_brake_instants(const ChainModel& m,
                                                     const std::vector<PhaseState>& window,
                                                     const Eigen::MatrixXd* basis = nullptr,
                                                     Scheme scheme = Scheme::Yoshida6) {
  std::vector<BrakeEvent> events;
  if (window.size() < 2) return events;
  Propagator prop(m, scheme);
  std::vector<double> rate(window.size());
  for (std::size_t i = 0; i < window.size(); ++i) rate[i] = detail::kinetic_rate(prop, basis, window[i]);

  for (std::size_t i = 0; i + 1 < window.size(); ++i) {
    if (!(rate[i] <= 0.0 && rate[i + 1] > 0.0)) continue;
    const PhaseState& base = window[i];
    double lo = 0.0, hi = window[i + 1].t - base.t;
    PhaseState best = base;
    if (rate[i] < 0.0) {
      for (int it = 0; it < 100 && hi - lo > 1e-15 * std::max(1.0, std::abs(base.t)); ++it) {
        const double mid = 0.5 * (lo + hi);
        PhaseState s = base;
        prop.step(s, mid);
        if (detail::kinetic_rate(prop, basis, s) <= 0.0) {
          lo = mid;
          best = s;
        } else {
          hi = mid;
        }
      }
    }
    BrakeEvent ev;
    ev.time = best.t;
    ev.velocity_norm = detail::project(basis, best.v).lpNorm<Eigen::Infinity>();
    ev.state = best;
    events.push_back(ev);
  }
  return events;
}

// First kinetic-energy minimum in the window, or nothing.
inline std::optional<BrakeEvent> detect_brake_instant(const ChainModel& m,
                                                      const std::vector<PhaseState>& window,
                                                      const Eigen::MatrixXd* basis = nullptr,
                                                      Scheme scheme = Scheme::Yoshida6) {
  auto events = detect_brake_instants(m, window, basis, scheme);
  if (events.empty()) return std::nullopt;
  return events.front();
}

// ---------------------------------------------------------------------------
// Trajectory dump
// ---------------------------------------------------------------------------

inline void write_trajectory_csv(std::ostream& os, const ChainModel& m,
                                 const std::vector<PhaseState>& samples, int precision = 10) {
  const int n = m.n();
  os << "t";
  for (int j = 1; j <= n; ++j) os << ",x" << j << ",y" << j;
  for (int j = 1; j <= n; ++j) os << ",vx" << j << ",vy" << j;
  os << ",E\n";
  const auto old = os.precision(precision);
  for (const auto& s : samples) {
    os << s.t;
    for (Eigen::Index i = 0; i < s.q.size(); ++i) os << ',' << s.q[i];
    for (Eigen::Index i = 0; i < s.v.size(); ++i) os << ',' << s.v[i];
    os << ',' << mechanical_energy(m, s) << '\n';
  }
  os.precision(old);
}

}  // namespace chainlab
