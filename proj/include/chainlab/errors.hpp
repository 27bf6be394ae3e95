#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace chainlab {

namespace detail {
inline std::string short_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}
}  // namespace detail

// Base class for every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation (x <= 0, a <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Two particles closer than the active guard distance.
class CollisionError : public DomainError {
 public:
  CollisionError(int i, int j, double distance,
                 double time = std::numeric_limits<double>::quiet_NaN())
      : DomainError(describe(i, j, distance, time)),
        first_(i),
        second_(j),
        distance_(distance),
        time_(time) {}

  int first() const noexcept { return first_; }
  int second() const noexcept { return second_; }
  double distance() const noexcept { return distance_; }
  double time() const noexcept { return time_; }

 private:
  static std::string describe(int i, int j, double distance, double time) {
    std::string msg = "collision between particles " + std::to_string(i + 1) +
                      " and " + std::to_string(j + 1) +
                      " (distance " + detail::short_number(distance) + ")";
    if (!std::isnan(time)) msg += " at t=" + detail::short_number(time);
    return msg;
  }

  int first_;
  int second_;
  double distance_;
  double time_;
};

// Iterative solver ran out of iterations or diverged. Carries the last iterate.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, Eigen::VectorXd last_iterate,
                   double residual, int iterations)
      : Error(what + " (residual " + detail::short_number(residual) + " after " +
              std::to_string(iterations) + " iterations)"),
        last_iterate_(std::move(last_iterate)),
        residual_(residual),
        iterations_(iterations) {}

  const Eigen::VectorXd& last_iterate() const noexcept { return last_iterate_; }
  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  Eigen::VectorXd last_iterate_;
  double residual_;
  int iterations_;
};

// Root scan found no sign change of the residual in the requested range.
class NoBracketError : public Error {
 public:
  NoBracketError(double lo, double hi, double residual_lo, double residual_hi)
      : Error("no bracket: residual has no sign change on [" +
              std::to_string(lo) + ", " + std::to_string(hi) +
              "] (endpoint residuals " + std::to_string(residual_lo) + ", " +
              std::to_string(residual_hi) + ")"),
        lo_(lo),
        hi_(hi),
        residual_lo_(residual_lo),
        residual_hi_(residual_hi) {}

  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  double residual_lo() const noexcept { return residual_lo_; }
  double residual_hi() const noexcept { return residual_hi_; }

 private:
  double lo_, hi_, residual_lo_, residual_hi_;
};

// Caller asked for something the model does not support (wrong boundary, bad n, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

// A frequency nu with l^2 nu^2 in the spectrum for some l >= 2.
class ResonanceError : public Error {
 public:
  ResonanceError(double nu_sq, int l)
      : Error("resonant frequency: " + std::to_string(l) + "^2 * " +
              std::to_string(nu_sq) + " is an eigenvalue of the Hessian"),
        order_(l) {}

  int order() const noexcept { return order_; }

 private:
  int order_;
};

}  // namespace chainlab
